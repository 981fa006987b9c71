//! Utility formulas behind each tree level and the payoff-matrix builders.
//!
//! Level one scores an engagement by winning probability, level two by the
//! relative expected energy spend of the two sides, level three by the
//! relative expected HP swing. The closed forms are cheap enough to
//! re-evaluate per payoff cell; the distributional form of the energy
//! expectation is also available as a Monte-Carlo estimator so the closed
//! form can be cross-checked.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matgame::{GameError, PayoffMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UtilError {
    #[error("weights and probabilities differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Which need a [`NeedSpec`] quantifies. The expectation formula is shared;
/// the kind records what conditioned the probabilities supplied by the
/// caller.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeedKind {
    Safety,
    Basic,
    Capability,
    Teaming,
}

/// Weighted outcomes quantifying one need level of an agent.
#[derive(Clone, Debug)]
pub struct NeedSpec {
    pub kind: NeedKind,
    pub weights: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// Expectation of a need: sum of weight times probability.
pub fn need_expectation(spec: &NeedSpec) -> Result<f64, UtilError> {
    if spec.weights.len() != spec.probabilities.len() {
        return Err(UtilError::LengthMismatch(spec.weights.len(), spec.probabilities.len()));
    }
    if let Some(p) = spec.probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(UtilError::InvalidInput(format!("probability {p} outside [0,1]")));
    }
    Ok(spec.weights.iter().zip(&spec.probabilities).map(|(w, p)| w * p).sum())
}

/// Coefficients of the winning-probability utility.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WinCoeffs {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
}

impl Default for WinCoeffs {
    fn default() -> Self {
        WinCoeffs { a1: 1.0, a2: 1.0, a3: 1.0, a4: 1.0, a5: 1.0 }
    }
}

/// Coefficients of the expected-energy utility (walking, attacking and
/// communication parts).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyCoeffs {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b11: f64,
    pub b12: f64,
    pub b13: f64,
}

impl Default for EnergyCoeffs {
    fn default() -> Self {
        EnergyCoeffs { b0: 0.0, b1: 1.0, b2: 1.0, b3: 1.0, b11: 1.0, b12: 1.0, b13: 1.0 }
    }
}

/// Coefficients of the expected-HP utility. `gamma_*` converts an energy
/// level into attack ability, `delta_*` into defend ability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HpCoeffs {
    pub c0: f64,
    pub c1: f64,
    pub rho: f64,
    pub gamma_e: f64,
    pub gamma_m: f64,
    pub delta_e: f64,
    pub delta_m: f64,
}

impl Default for HpCoeffs {
    fn default() -> Self {
        HpCoeffs { c0: 0.0, c1: 1.0, rho: 1.0, gamma_e: 0.5, gamma_m: 0.5, delta_e: 0.5, delta_m: 0.5 }
    }
}

/// Everything the utility formulas read about one engagement: counts,
/// geometry, per-attack energy costs, ability levels, agent sizes,
/// simultaneous-attacker counts and current energy levels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EngagementObs {
    /// Explorer head count.
    pub explorers: usize,
    /// Monster head count.
    pub monsters: usize,
    /// Mean distance between the two groups, in world units.
    pub distance: f64,
    /// Agent speed in units per tick.
    pub speed: f64,
    /// Energy an explorer spends per attack.
    pub explorer_attack_cost: f64,
    /// Energy a monster spends per attack.
    pub monster_attack_cost: f64,
    /// Average attack ability of the explorer side.
    pub explorer_attack_level: f64,
    /// Average attack ability of the monster side.
    pub monster_attack_level: f64,
    /// Average defend ability of the explorer side.
    pub explorer_defend_level: f64,
    /// Average defend ability of the monster side.
    pub monster_defend_level: f64,
    /// Attack ability of the focal explorer.
    pub focal_explorer_attack: f64,
    /// Attack ability of the focal monster.
    pub focal_monster_attack: f64,
    /// Defend ability of the focal explorer.
    pub focal_explorer_defend: f64,
    /// Defend ability of the focal monster.
    pub focal_monster_defend: f64,
    /// Explorer body size.
    pub explorer_size: f64,
    /// Monster body size.
    pub monster_size: f64,
    /// Explorers attacking simultaneously.
    pub explorer_attackers: usize,
    /// Monsters attacking simultaneously.
    pub monster_attackers: usize,
    /// Current explorer energy level, 0-100.
    pub explorer_energy: f64,
    /// Current monster energy level, 0-100.
    pub monster_energy: f64,
}

impl Default for EngagementObs {
    fn default() -> Self {
        EngagementObs {
            explorers: 1,
            monsters: 1,
            distance: 10.0,
            speed: 1.0,
            explorer_attack_cost: 0.01,
            monster_attack_cost: 0.03,
            explorer_attack_level: 1.0,
            monster_attack_level: 1.0,
            explorer_defend_level: 1.0,
            monster_defend_level: 1.0,
            focal_explorer_attack: 1.0,
            focal_monster_attack: 1.0,
            focal_explorer_defend: 1.0,
            focal_monster_defend: 1.0,
            explorer_size: 1.0,
            monster_size: 1.0,
            explorer_attackers: 1,
            monster_attackers: 1,
            explorer_energy: 100.0,
            monster_energy: 100.0,
        }
    }
}

impl EngagementObs {
    /// Poisson rate of the explorer side's attack count: monsters times
    /// monster size (a bigger opposing group means more attack events).
    pub fn explorer_attack_rate(&self) -> f64 {
        self.monsters as f64 * self.monster_size
    }

    /// Poisson rate of the monster side's attack count.
    pub fn monster_attack_rate(&self) -> f64 {
        self.explorers as f64 * self.explorer_size
    }
}

/// Winning probability of the explorer side.
///
/// The ability ratio is raised to the monster/explorer head-count ratio;
/// with `clamp` set the result is limited to [0,1] so it can be used as a
/// Bernoulli parameter downstream. The raw value is exposed for testing.
pub fn winning_probability(obs: &EngagementObs, c: &WinCoeffs, clamp: bool) -> Result<f64, UtilError> {
    if obs.explorers == 0 {
        return Err(UtilError::InvalidInput("explorer count must be positive".into()));
    }
    let numerator = c.a2 * obs.explorer_attack_level + c.a3 * obs.explorer_defend_level;
    let denominator = c.a4 * obs.monster_attack_level + c.a5 * obs.monster_defend_level;
    if !(denominator > 0.0) {
        return Err(UtilError::InvalidInput(format!(
            "monster ability denominator must be positive, got {denominator}"
        )));
    }
    let base = c.a1 * numerator / denominator;
    if base < 0.0 && obs.monsters > 0 {
        return Err(UtilError::InvalidInput(format!("negative ability ratio {base}")));
    }
    let exponent = obs.monsters as f64 / obs.explorers as f64;
    let raw = base.powf(exponent);
    Ok(if clamp { raw.clamp(0.0, 1.0) } else { raw })
}

fn check_energy_obs(obs: &EngagementObs) -> Result<(), UtilError> {
    if !(obs.speed > 0.0) {
        return Err(UtilError::InvalidInput(format!("speed must be positive, got {}", obs.speed)));
    }
    if !(obs.distance > 0.0) {
        return Err(UtilError::InvalidInput(format!(
            "distance must be positive, got {}",
            obs.distance
        )));
    }
    Ok(())
}

/// Closed form of the relative expected energy spend (explorer minus
/// monster side): walking, attacking and communication parts.
pub fn expected_energy(obs: &EngagementObs, c: &EnergyCoeffs) -> Result<f64, UtilError> {
    check_energy_obs(obs)?;
    let n = obs.explorers as f64;
    let m = obs.monsters as f64;
    Ok(c.b0
        + c.b1 * c.b11 * (n - m) * obs.distance
        + c.b2
            * c.b12
            * n
            * m
            * (obs.explorer_attack_cost * obs.monster_size
                - obs.monster_attack_cost * obs.explorer_size)
        + c.b3 * c.b13 * n * obs.distance / obs.speed)
}

fn poisson_mean(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    if rate > 0.0 {
        let dist = Poisson::new(rate).expect("positive finite rate");
        dist.sample(rng)
    } else {
        0.0
    }
}

/// Monte-Carlo estimate of the full distributional energy expectation:
/// walking distance is normal around the group distance with unit variance,
/// attack and communication counts are Poisson. Converges to
/// [`expected_energy`] as the sample count grows.
pub fn expected_energy_distributional(
    obs: &EngagementObs,
    c: &EnergyCoeffs,
    samples: usize,
    rng_seed: u64,
) -> Result<f64, UtilError> {
    check_energy_obs(obs)?;
    if samples == 0 {
        return Err(UtilError::InvalidInput("sample count must be at least 1".into()));
    }
    let n = obs.explorers as f64;
    let m = obs.monsters as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let walk = Normal::new(obs.distance, 1.0).expect("finite mean");

    let mut walk_sum = 0.0;
    let mut explorer_attack_sum = 0.0;
    let mut monster_attack_sum = 0.0;
    let mut comm_sum = 0.0;
    for _ in 0..samples {
        walk_sum += c.b11 * walk.sample(&mut rng);
        explorer_attack_sum +=
            c.b12 * poisson_mean(&mut rng, obs.explorer_attack_rate()) * obs.explorer_attack_cost;
        monster_attack_sum +=
            c.b12 * poisson_mean(&mut rng, obs.monster_attack_rate()) * obs.monster_attack_cost;
        comm_sum += c.b13 * poisson_mean(&mut rng, obs.distance / obs.speed);
    }
    let s = samples as f64;
    Ok(c.b0
        + c.b1 * (n - m) * (walk_sum / s)
        + c.b2 * (n * (explorer_attack_sum / s) - m * (monster_attack_sum / s))
        + c.b3 * n * (comm_sum / s))
}

/// Closed form of the relative expected HP swing: damage the explorer
/// attackers project onto monsters minus damage the monster attackers
/// project back, abilities scaling with current energy.
pub fn expected_hp(obs: &EngagementObs, c: &HpCoeffs) -> Result<f64, UtilError> {
    if !obs.explorer_energy.is_finite() || !obs.monster_energy.is_finite() {
        return Err(UtilError::InvalidInput("energy levels must be finite".into()));
    }
    let k = obs.explorer_attackers as f64;
    let g = obs.monster_attackers as f64;
    Ok(c.c0
        + c.c1
            * c.rho
            * (k * obs.monster_size * obs.explorer_energy * (c.gamma_e + c.delta_e)
                - g * obs.explorer_size * obs.monster_energy * (c.gamma_m + c.delta_m)))
}

/// Per-cell observation adjustments encoding the action labels of the three
/// payoff tables. All factors are plain multipliers and can be overridden
/// from the scenario file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CellModifiers {
    /// Attack posture multiplies own attack ability by this.
    pub attack_boost: f64,
    /// Attack posture multiplies own defend ability by this (and defend
    /// posture swaps the two).
    pub defend_damp: f64,
    /// Targeting the nearest opponent scales the group distance.
    pub nearest_distance_scale: f64,
    /// Assumed energy fraction of the weakest observable opponent.
    pub lowest_energy_fraction: f64,
    /// Assumed energy fraction of the strongest observable opponent.
    pub highest_energy_fraction: f64,
}

impl Default for CellModifiers {
    fn default() -> Self {
        CellModifiers {
            attack_boost: 1.25,
            defend_damp: 0.75,
            nearest_distance_scale: 0.5,
            lowest_energy_fraction: 0.5,
            highest_energy_fraction: 1.0,
        }
    }
}

pub const LEVEL1_EXPLORER_ACTIONS: [&str; 2] = ["Attack", "Defend"];
pub const LEVEL1_MONSTER_ACTIONS: [&str; 2] = ["Attack", "Defend"];
pub const LEVEL2_EXPLORER_ACTIONS: [&str; 3] = ["Nearest", "ALowest", "AHighest"];
pub const LEVEL2_MONSTER_ACTIONS: [&str; 3] = ["Nearest", "ALowest", "AHighest"];
pub const LEVEL3_EXPLORER_ACTIONS: [&str; 3] = ["OneGroup", "TwoGroups", "ThreeGroups"];
pub const LEVEL3_MONSTER_ACTIONS: [&str; 2] = ["Independent", "Dependent"];

/// Observation as seen from one level-1 cell: each side's posture boosts its
/// attack ability and damps its defend ability, or the reverse.
pub fn level1_cell_obs(obs: &EngagementObs, mods: &CellModifiers, row: usize, col: usize) -> EngagementObs {
    let mut cell = *obs;
    let (row_t, row_r) =
        if row == 0 { (mods.attack_boost, mods.defend_damp) } else { (mods.defend_damp, mods.attack_boost) };
    let (col_t, col_r) =
        if col == 0 { (mods.attack_boost, mods.defend_damp) } else { (mods.defend_damp, mods.attack_boost) };
    cell.explorer_attack_level *= row_t;
    cell.explorer_defend_level *= row_r;
    cell.monster_attack_level *= col_t;
    cell.monster_defend_level *= col_r;
    cell
}

/// Observation as seen from one level-2 cell: nearest-targeting shortens the
/// effective distance, state-based targeting rescales the opponent's
/// assumed energy.
pub fn level2_cell_obs(obs: &EngagementObs, mods: &CellModifiers, row: usize, col: usize) -> EngagementObs {
    let mut cell = *obs;
    match row {
        0 => cell.distance *= mods.nearest_distance_scale,
        1 => cell.monster_energy *= mods.lowest_energy_fraction,
        _ => cell.monster_energy *= mods.highest_energy_fraction,
    }
    match col {
        0 => cell.distance *= mods.nearest_distance_scale,
        1 => cell.explorer_energy *= mods.lowest_energy_fraction,
        _ => cell.explorer_energy *= mods.highest_energy_fraction,
    }
    cell
}

/// Observation as seen from one level-3 cell: the explorer split determines
/// how many explorers strike at once, the monster column whether monsters
/// pile on together or one at a time.
pub fn level3_cell_obs(obs: &EngagementObs, row: usize, col: usize) -> EngagementObs {
    let mut cell = *obs;
    let groups = row + 1;
    cell.explorer_attackers = obs.explorers.div_ceil(groups);
    cell.monster_attackers = if col == 1 { obs.monsters } else { 1 };
    cell
}

/// 2x2 attack/defend payoff of winning probabilities (row: explorers).
pub fn payoff_level1(
    obs: &EngagementObs,
    c: &WinCoeffs,
    mods: &CellModifiers,
) -> Result<PayoffMatrix, UtilError> {
    let mut rows = Vec::with_capacity(2);
    for g in 0..2 {
        let mut row = Vec::with_capacity(2);
        for k in 0..2 {
            row.push(winning_probability(&level1_cell_obs(obs, mods, g, k), c, true)?);
        }
        rows.push(row);
    }
    Ok(PayoffMatrix::from_rows(rows)?)
}

/// 3x3 targeting payoff. Cells are the negated relative energy spend: the
/// explorer side prefers the cell where it outspends the monsters least.
pub fn payoff_level2(
    obs: &EngagementObs,
    c: &EnergyCoeffs,
    mods: &CellModifiers,
) -> Result<PayoffMatrix, UtilError> {
    let mut rows = Vec::with_capacity(3);
    for g in 0..3 {
        let mut row = Vec::with_capacity(3);
        for k in 0..3 {
            row.push(-expected_energy(&level2_cell_obs(obs, mods, g, k), c)?);
        }
        rows.push(row);
    }
    Ok(PayoffMatrix::from_rows(rows)?)
}

/// 3x2 grouping payoff of expected HP swings (rows: one/two/three explorer
/// groups; columns: monsters acting independently or piling on).
pub fn payoff_level3(
    obs: &EngagementObs,
    c: &HpCoeffs,
    mods: &CellModifiers,
) -> Result<PayoffMatrix, UtilError> {
    let _ = mods;
    let mut rows = Vec::with_capacity(3);
    for g in 0..3 {
        let mut row = Vec::with_capacity(2);
        for k in 0..2 {
            row.push(expected_hp(&level3_cell_obs(obs, g, k), c)?);
        }
        rows.push(row);
    }
    Ok(PayoffMatrix::from_rows(rows)?)
}
