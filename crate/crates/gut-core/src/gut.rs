//! The layered utility tree.
//!
//! Each level hosts a zero-sum game between the team (rows) and its
//! adversaries (columns). Solving a level yields equilibrium strategies;
//! under independent mixing the probability of landing in outcome cell
//! `(g, k)` is `x[g] * y[k]`, scaled by the probability of having reached
//! the level at all. A level's payoff may depend on the cell chosen one
//! level up, so the chain of outcomes forms a Markov factorization.
//!
//! Two selection rules are provided: [`decide`] descends greedily, taking
//! the most probable cell of each unit, while [`map_assignment`] runs
//! max-product variable elimination over the whole chain and traces back
//! the exact most-probable path.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::matgame::{self, GameSolution, PayoffMatrix};
use crate::util_model::{EngagementObs, UtilError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GutError {
    #[error("invalid tree spec: {0}")]
    InvalidSpec(String),
    #[error("prior probability {0} outside [0,1]")]
    InvalidPrior(f64),
    #[error("level {level}: payoff construction failed: {source}")]
    Build { level: usize, source: UtilError },
    #[error("level {level}: equilibrium failed: {source}")]
    Solve { level: usize, source: matgame::GameError },
    #[error("path inconsistent with spec: {0}")]
    InconsistentPath(String),
}

/// Outcome cell of one level: (row index, column index).
pub type Cell = (usize, usize);

// Probabilities that differ only by floating-point noise are ties and must
// break toward the lexicographically smaller cell. The margin is relative
// so it also holds for very small joint probabilities.
fn strictly_better(candidate: f64, best: f64) -> bool {
    if best == f64::NEG_INFINITY {
        return true;
    }
    candidate > best + best.abs() * 1e-12
}

/// Builds the payoff matrix a level presents, given the fused observation
/// and the outcome cell chosen at the previous level (`None` at the root).
/// Builders that do not condition on the parent simply ignore it.
pub type PayoffBuilder =
    Arc<dyn Fn(&EngagementObs, Option<Cell>) -> Result<PayoffMatrix, UtilError> + Send + Sync>;

/// One level of the tree: action labels for both sides plus the payoff
/// builder that scores their combinations.
#[derive(Clone)]
pub struct LevelSpec {
    level_index: usize,
    row_actions: Vec<String>,
    col_actions: Vec<String>,
    builder: PayoffBuilder,
}

impl fmt::Debug for LevelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevelSpec")
            .field("level_index", &self.level_index)
            .field("row_actions", &self.row_actions)
            .field("col_actions", &self.col_actions)
            .finish_non_exhaustive()
    }
}

impl LevelSpec {
    pub fn new(
        level_index: usize,
        row_actions: Vec<String>,
        col_actions: Vec<String>,
        builder: PayoffBuilder,
    ) -> Result<Self, GutError> {
        if level_index == 0 {
            return Err(GutError::InvalidSpec("level indices are 1-based".into()));
        }
        if row_actions.is_empty() || col_actions.is_empty() {
            return Err(GutError::InvalidSpec(format!(
                "level {level_index} needs at least one action per side"
            )));
        }
        for side in [&row_actions, &col_actions] {
            for (i, a) in side.iter().enumerate() {
                if side[..i].contains(a) {
                    return Err(GutError::InvalidSpec(format!(
                        "level {level_index}: duplicate action label {a:?}"
                    )));
                }
            }
        }
        Ok(LevelSpec { level_index, row_actions, col_actions, builder })
    }

    pub fn level_index(&self) -> usize {
        self.level_index
    }

    pub fn row_actions(&self) -> &[String] {
        &self.row_actions
    }

    pub fn col_actions(&self) -> &[String] {
        &self.col_actions
    }
}

/// An ordered stack of levels with contiguous 1-based indices.
#[derive(Clone, Debug)]
pub struct GutSpec {
    levels: Vec<LevelSpec>,
}

impl GutSpec {
    pub fn new(levels: Vec<LevelSpec>) -> Result<Self, GutError> {
        if levels.is_empty() {
            return Err(GutError::InvalidSpec("a tree needs at least one level".into()));
        }
        for (i, level) in levels.iter().enumerate() {
            if level.level_index != i + 1 {
                return Err(GutError::InvalidSpec(format!(
                    "level indices must be contiguous from 1; position {} holds index {}",
                    i + 1,
                    level.level_index
                )));
            }
        }
        Ok(GutSpec { levels })
    }

    pub fn levels(&self) -> &[LevelSpec] {
        &self.levels
    }
}

/// One solved node: the prior of reaching it, the payoff it saw, the
/// equilibrium, and the resulting outcome-cell probabilities (which sum to
/// the prior).
#[derive(Clone, Debug)]
pub struct ComputationUnit {
    pub prior_prob: f64,
    pub payoff: PayoffMatrix,
    pub solution: GameSolution,
    pub outcome_probs: Vec<Vec<f64>>,
}

impl ComputationUnit {
    /// Most probable outcome cell, ties broken lexicographically.
    pub fn argmax_cell(&self) -> Cell {
        let mut best = (0, 0);
        let mut best_p = f64::NEG_INFINITY;
        for (g, row) in self.outcome_probs.iter().enumerate() {
            for (k, &p) in row.iter().enumerate() {
                if strictly_better(p, best_p) {
                    best_p = p;
                    best = (g, k);
                }
            }
        }
        best
    }
}

/// One chosen level of a [`StrategyPath`].
#[derive(Clone, Debug, PartialEq)]
pub struct PathStep {
    pub row: usize,
    pub col: usize,
    pub row_action: String,
    pub col_action: String,
    /// Probability of this cell given the levels above it.
    pub conditional_prob: f64,
}

/// A full assignment of one cell per level and its joint probability.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyPath {
    pub steps: Vec<PathStep>,
    pub joint_prob: f64,
}

impl StrategyPath {
    pub fn cells(&self) -> Vec<Cell> {
        self.steps.iter().map(|s| (s.row, s.col)).collect()
    }
}

/// Total number of computation units in the expanded tree: one at the root
/// and one per outcome cell of every non-final level.
pub fn node_count(spec: &GutSpec) -> u64 {
    let mut total = 0u64;
    let mut layer = 1u64;
    for level in spec.levels() {
        total += layer;
        layer *= (level.row_actions.len() * level.col_actions.len()) as u64;
    }
    total
}

/// Build and solve one level in root context (no parent cell).
pub fn evaluate_unit(
    level: &LevelSpec,
    context: &EngagementObs,
    prior: f64,
) -> Result<ComputationUnit, GutError> {
    evaluate_unit_for(level, context, None, prior)
}

/// Build and solve one level conditioned on the outcome cell chosen at the
/// previous level.
pub fn evaluate_unit_for(
    level: &LevelSpec,
    context: &EngagementObs,
    parent: Option<Cell>,
    prior: f64,
) -> Result<ComputationUnit, GutError> {
    if !(0.0..=1.0).contains(&prior) {
        return Err(GutError::InvalidPrior(prior));
    }
    let payoff = (level.builder)(context, parent)
        .map_err(|source| GutError::Build { level: level.level_index, source })?;
    if payoff.rows() != level.row_actions.len() || payoff.cols() != level.col_actions.len() {
        return Err(GutError::InvalidSpec(format!(
            "level {}: builder produced a {}x{} matrix for {}x{} actions",
            level.level_index,
            payoff.rows(),
            payoff.cols(),
            level.row_actions.len(),
            level.col_actions.len()
        )));
    }
    let solution = matgame::solve(&payoff, matgame::DEFAULT_TOL)
        .map_err(|source| GutError::Solve { level: level.level_index, source })?;
    let outcome_probs = solution
        .row_strategy
        .iter()
        .map(|&xg| solution.col_strategy.iter().map(|&yk| xg * yk * prior).collect())
        .collect();
    Ok(ComputationUnit { prior_prob: prior, payoff, solution, outcome_probs })
}

fn make_step(level: &LevelSpec, cell: Cell, conditional: f64) -> PathStep {
    PathStep {
        row: cell.0,
        col: cell.1,
        row_action: level.row_actions[cell.0].clone(),
        col_action: level.col_actions[cell.1].clone(),
        conditional_prob: conditional,
    }
}

/// Greedy descent: at each level take the most probable outcome cell and
/// carry its probability down as the next prior.
pub fn decide(spec: &GutSpec, context: &EngagementObs) -> Result<StrategyPath, GutError> {
    let mut prior = 1.0;
    let mut parent: Option<Cell> = None;
    let mut steps = Vec::with_capacity(spec.levels().len());
    for level in spec.levels() {
        let unit = evaluate_unit_for(level, context, parent, prior)?;
        let cell = unit.argmax_cell();
        let conditional = unit.solution.row_strategy[cell.0] * unit.solution.col_strategy[cell.1];
        steps.push(make_step(level, cell, conditional));
        prior = unit.outcome_probs[cell.0][cell.1];
        parent = Some(cell);
    }
    Ok(StrategyPath { steps, joint_prob: prior })
}

/// Conditional cell distribution of one level given a parent cell.
fn conditional_table(
    spec: &GutSpec,
    context: &EngagementObs,
    level_pos: usize,
    parent: Option<Cell>,
) -> Result<Vec<f64>, GutError> {
    let level = &spec.levels()[level_pos];
    let unit = evaluate_unit_for(level, context, parent, 1.0)?;
    Ok(unit.outcome_probs.into_iter().flatten().collect())
}

fn cell_of_index(level: &LevelSpec, idx: usize) -> Cell {
    (idx / level.col_actions.len(), idx % level.col_actions.len())
}

/// Exact most-probable assignment by max-product variable elimination.
///
/// Forward pass: eliminate levels top-down, keeping for every cell of the
/// current level the best achievable prefix probability and the parent cell
/// that achieves it. Backward pass: start from the best final cell and
/// trace the stored argmax pointers. Ties are broken toward the
/// lexicographically smallest cell at each elimination step.
pub fn map_assignment(spec: &GutSpec, context: &EngagementObs) -> Result<StrategyPath, GutError> {
    let levels = spec.levels();
    let n = levels.len();

    // Forward elimination.
    let mut best: Vec<f64> = conditional_table(spec, context, 0, None)?;
    let mut back_pointers: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut conditionals: Vec<Vec<Vec<f64>>> = vec![vec![best.clone()]];
    for pos in 1..n {
        let parent_cells = levels[pos - 1].row_actions.len() * levels[pos - 1].col_actions.len();
        let child_cells = levels[pos].row_actions.len() * levels[pos].col_actions.len();
        let mut tables = Vec::with_capacity(parent_cells);
        for p in 0..parent_cells {
            let parent = cell_of_index(&levels[pos - 1], p);
            tables.push(conditional_table(spec, context, pos, Some(parent))?);
        }
        let mut next = vec![f64::NEG_INFINITY; child_cells];
        let mut ptr = vec![0usize; child_cells];
        for (c, (nc, pc)) in next.iter_mut().zip(ptr.iter_mut()).enumerate() {
            for p in 0..parent_cells {
                let score = best[p] * tables[p][c];
                if strictly_better(score, *nc) {
                    *nc = score;
                    *pc = p;
                }
            }
        }
        conditionals.push(tables);
        back_pointers.push(ptr);
        best = next;
    }

    // Best final cell, then trace back.
    let mut last = 0;
    let mut joint = f64::NEG_INFINITY;
    for (c, &p) in best.iter().enumerate() {
        if strictly_better(p, joint) {
            joint = p;
            last = c;
        }
    }
    let mut indices = vec![0usize; n];
    indices[n - 1] = last;
    for pos in (1..n).rev() {
        indices[pos - 1] = back_pointers[pos - 1][indices[pos]];
    }

    let mut steps = Vec::with_capacity(n);
    for (pos, level) in levels.iter().enumerate() {
        let cell = cell_of_index(level, indices[pos]);
        let table = if pos == 0 { &conditionals[0][0] } else { &conditionals[pos][indices[pos - 1]] };
        steps.push(make_step(level, cell, table[indices[pos]]));
    }
    Ok(StrategyPath { steps, joint_prob: joint })
}

/// Joint probability of an explicit path: the product of per-level
/// conditionals along it. Fails if the path does not fit the spec.
pub fn joint_probability(
    spec: &GutSpec,
    context: &EngagementObs,
    path: &StrategyPath,
) -> Result<f64, GutError> {
    let levels = spec.levels();
    if path.steps.len() != levels.len() {
        return Err(GutError::InconsistentPath(format!(
            "path has {} steps, tree has {} levels",
            path.steps.len(),
            levels.len()
        )));
    }
    let mut joint = 1.0;
    let mut parent: Option<Cell> = None;
    for (level, step) in levels.iter().zip(&path.steps) {
        if step.row >= level.row_actions.len() || step.col >= level.col_actions.len() {
            return Err(GutError::InconsistentPath(format!(
                "level {}: cell ({}, {}) out of range",
                level.level_index, step.row, step.col
            )));
        }
        if level.row_actions[step.row] != step.row_action
            || level.col_actions[step.col] != step.col_action
        {
            return Err(GutError::InconsistentPath(format!(
                "level {}: labels {:?}/{:?} do not match the spec",
                level.level_index, step.row_action, step.col_action
            )));
        }
        let unit = evaluate_unit_for(level, context, parent, 1.0)?;
        joint *= unit.outcome_probs[step.row][step.col];
        parent = Some((step.row, step.col));
    }
    Ok(joint)
}
