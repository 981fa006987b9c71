//! Finite two-player zero-sum matrix games.
//!
//! Entries are utilities to the row player; the column player receives the
//! negation. [`solve`] first looks for a saddle point (a pure equilibrium)
//! and otherwise computes a mixed equilibrium through the standard linear
//! programming reduction, certified by an explicit exploitability bound.
//!
//! All tie-breaking is lexicographic over (row, column) indices and the
//! simplex uses Bland's rule, so identical inputs always produce identical
//! outputs.

use thiserror::Error;

/// Default exploitability bound used by callers that do not care to pick one.
pub const DEFAULT_TOL: f64 = 1e-6;

const PIVOT_LIMIT: usize = 10_000;
const EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("invalid payoff matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("equilibrium search exceeded {0} pivots")]
    NoConvergence(usize),
    #[error("solution failed certification: exploitability {exploitability:e} > tol {tol:e}")]
    CertificationFailed { exploitability: f64, tol: f64 },
}

/// Payoff matrix of a zero-sum game, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl PayoffMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self, GameError> {
        if rows == 0 || cols == 0 {
            return Err(GameError::InvalidMatrix(format!(
                "dimensions must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(GameError::InvalidMatrix(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|e| !e.is_finite()) {
            return Err(GameError::InvalidMatrix(format!("non-finite entry {bad}")));
        }
        Ok(PayoffMatrix { rows, cols, entries })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, GameError> {
        let nrows = rows.len();
        let ncols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(GameError::InvalidMatrix("ragged rows".into()));
        }
        PayoffMatrix::new(nrows, ncols, rows.into_iter().flatten().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.cols + col]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Best guaranteed value for the row player over pure strategies.
    pub fn maxmin(&self) -> f64 {
        (0..self.rows)
            .map(|g| (0..self.cols).map(|k| self.get(g, k)).fold(f64::INFINITY, f64::min))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Best guaranteed cap for the column player over pure strategies.
    pub fn minmax(&self) -> f64 {
        (0..self.cols)
            .map(|k| (0..self.rows).map(|g| self.get(g, k)).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolutionKind {
    Pure,
    Mixed,
}

/// One equilibrium of a zero-sum game together with its value.
#[derive(Clone, Debug, PartialEq)]
pub struct GameSolution {
    pub kind: SolutionKind,
    pub row_strategy: Vec<f64>,
    pub col_strategy: Vec<f64>,
    pub value: f64,
}

/// Expected payoff to the row player under mixed strategies `x`, `y`.
pub fn expected_payoff(payoff: &PayoffMatrix, x: &[f64], y: &[f64]) -> f64 {
    let mut total = 0.0;
    for g in 0..payoff.rows() {
        for k in 0..payoff.cols() {
            total += x[g] * y[k] * payoff.get(g, k);
        }
    }
    total
}

fn check_distribution(p: &[f64], len: usize, side: &str) -> Result<(), GameError> {
    if p.len() != len {
        return Err(GameError::DimensionMismatch(format!(
            "{side} strategy has length {}, matrix wants {len}",
            p.len()
        )));
    }
    if p.iter().any(|v| !v.is_finite() || *v < -1e-9) {
        return Err(GameError::InvalidStrategy(format!("{side} strategy has a negative entry")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(GameError::InvalidStrategy(format!("{side} strategy sums to {sum}, not 1")));
    }
    Ok(())
}

/// Sum of both players' best-response improvements against `(x, y)`.
///
/// Zero exactly at an equilibrium; always nonnegative.
pub fn exploitability(payoff: &PayoffMatrix, x: &[f64], y: &[f64]) -> Result<f64, GameError> {
    check_distribution(x, payoff.rows(), "row")?;
    check_distribution(y, payoff.cols(), "column")?;
    let value = expected_payoff(payoff, x, y);

    // Column player minimizes: its best pure response pushes the value down.
    let best_col = (0..payoff.cols())
        .map(|k| (0..payoff.rows()).map(|g| x[g] * payoff.get(g, k)).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    // Row player maximizes: its best pure response pushes the value up.
    let best_row = (0..payoff.rows())
        .map(|g| (0..payoff.cols()).map(|k| y[k] * payoff.get(g, k)).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);

    Ok((value - best_col).max(0.0) + (best_row - value).max(0.0))
}

/// Saddle point search: the cell that is simultaneously the minimum of its
/// row and the maximum of its column, if one exists.
///
/// Ties are broken by smallest row index, then smallest column index.
pub fn solve_pure(payoff: &PayoffMatrix) -> Option<(usize, usize, f64)> {
    let row_mins: Vec<f64> = (0..payoff.rows())
        .map(|g| (0..payoff.cols()).map(|k| payoff.get(g, k)).fold(f64::INFINITY, f64::min))
        .collect();
    let col_maxs: Vec<f64> = (0..payoff.cols())
        .map(|k| (0..payoff.rows()).map(|g| payoff.get(g, k)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    for g in 0..payoff.rows() {
        for k in 0..payoff.cols() {
            let a = payoff.get(g, k);
            if a == row_mins[g] && a == col_maxs[k] {
                return Some((g, k, a));
            }
        }
    }
    None
}

/// Mixed equilibrium via the linear programming reduction.
///
/// The payoff matrix is shifted so all entries are positive, the column
/// player's program `maximize sum(w) s.t. A'w <= 1, w >= 0` is solved by a
/// Bland-rule simplex, and the row strategy is read off the duals. The
/// result is certified: if its exploitability exceeds `tol` an error is
/// returned instead of an unverified solution.
pub fn solve_mixed(payoff: &PayoffMatrix, tol: f64) -> Result<GameSolution, GameError> {
    if !(tol > 0.0) {
        return Err(GameError::InvalidTolerance(tol));
    }
    let (rows, cols) = (payoff.rows(), payoff.cols());

    // Shift entries to be >= 1 so the game value is strictly positive.
    let min_entry = payoff.entries().iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = if min_entry < 1.0 { 1.0 - min_entry } else { 0.0 };

    // Tableau layout: cols variables w, then `rows` slacks, then rhs.
    // Row `rows` is the objective (reduced costs).
    let width = cols + rows + 1;
    let mut t = vec![vec![0.0f64; width]; rows + 1];
    for g in 0..rows {
        for k in 0..cols {
            t[g][k] = payoff.get(g, k) + shift;
        }
        t[g][cols + g] = 1.0;
        t[g][width - 1] = 1.0;
    }
    for k in 0..cols {
        t[rows][k] = -1.0;
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    let mut pivots = 0;
    loop {
        // Bland's rule: entering variable is the lowest-index improving column.
        let Some(enter) = (0..cols + rows).find(|&j| t[rows][j] < -EPS) else {
            break;
        };
        // Ratio test; ties broken by smallest basis variable index (Bland).
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for (i, row) in t.iter().enumerate().take(rows) {
            if row[enter] > EPS {
                let ratio = row[width - 1] / row[enter];
                let better = ratio < best_ratio - EPS
                    || ((ratio - best_ratio).abs() <= EPS
                        && leave.map_or(true, |l| basis[i] < basis[l]));
                if better {
                    best_ratio = ratio;
                    leave = Some(i);
                }
            }
        }
        // Entries are all positive, so every column admits a pivot row.
        let leave = leave.ok_or(GameError::NoConvergence(pivots))?;

        let pivot = t[leave][enter];
        for v in t[leave].iter_mut() {
            *v /= pivot;
        }
        for i in 0..=rows {
            if i != leave {
                let factor = t[i][enter];
                if factor != 0.0 {
                    for j in 0..width {
                        t[i][j] -= factor * t[leave][j];
                    }
                }
            }
        }
        basis[leave] = enter;

        pivots += 1;
        if pivots > PIVOT_LIMIT {
            return Err(GameError::NoConvergence(pivots));
        }
    }

    // Column strategy from the primal solution, row strategy from the duals
    // sitting in the objective row under the slack columns.
    let mut w = vec![0.0f64; cols];
    for (i, &b) in basis.iter().enumerate() {
        if b < cols {
            w[b] = t[i][width - 1];
        }
    }
    let mut u = vec![0.0f64; rows];
    for (g, ug) in u.iter_mut().enumerate() {
        *ug = t[rows][cols + g];
    }

    let normalize = |v: &mut Vec<f64>| -> Result<(), GameError> {
        for e in v.iter_mut() {
            if *e < 0.0 {
                *e = 0.0;
            }
        }
        let sum: f64 = v.iter().sum();
        if sum <= 0.0 {
            return Err(GameError::NoConvergence(pivots));
        }
        for e in v.iter_mut() {
            *e /= sum;
        }
        Ok(())
    };
    normalize(&mut w)?;
    normalize(&mut u)?;

    let value = expected_payoff(payoff, &u, &w);
    // The true game value always lies in [maxmin, minmax]; pin the floating
    // point evaluation back into the bound.
    let value = value.clamp(payoff.maxmin(), payoff.minmax());

    let exp = exploitability(payoff, &u, &w)?;
    if exp > tol {
        return Err(GameError::CertificationFailed { exploitability: exp, tol });
    }

    Ok(GameSolution { kind: SolutionKind::Mixed, row_strategy: u, col_strategy: w, value })
}

/// Two-step solve: saddle point if one exists, mixed equilibrium otherwise.
pub fn solve(payoff: &PayoffMatrix, tol: f64) -> Result<GameSolution, GameError> {
    if let Some((g, k, value)) = solve_pure(payoff) {
        let mut row_strategy = vec![0.0; payoff.rows()];
        let mut col_strategy = vec![0.0; payoff.cols()];
        row_strategy[g] = 1.0;
        col_strategy[k] = 1.0;
        return Ok(GameSolution { kind: SolutionKind::Pure, row_strategy, col_strategy, value });
    }
    solve_mixed(payoff, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn m(rows: Vec<Vec<f64>>) -> PayoffMatrix {
        PayoffMatrix::from_rows(rows).unwrap()
    }

    fn pennies() -> PayoffMatrix {
        m(vec![vec![1.0, -1.0], vec![-1.0, 1.0]])
    }

    /// Independent saddle oracle: a cell is a saddle iff it is <= every
    /// entry of its row and >= every entry of its column, checked pairwise.
    fn brute_saddle(p: &PayoffMatrix) -> Option<(usize, usize, f64)> {
        for g in 0..p.rows() {
            for k in 0..p.cols() {
                let a = p.get(g, k);
                let row_ok = (0..p.cols()).all(|k2| a <= p.get(g, k2));
                let col_ok = (0..p.rows()).all(|g2| a >= p.get(g2, k));
                if row_ok && col_ok {
                    return Some((g, k, a));
                }
            }
        }
        None
    }

    /// Indifference-equation oracle for 2x2 games without a saddle.
    fn indifference_2x2(p: &PayoffMatrix) -> (f64, f64, f64) {
        let (a, b, c, d) = (p.get(0, 0), p.get(0, 1), p.get(1, 0), p.get(1, 1));
        let denom = a - b - c + d;
        let x0 = (d - c) / denom;
        let y0 = (d - b) / denom;
        let v = (a * d - b * c) / denom;
        (x0, y0, v)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, max_dim: usize) -> PayoffMatrix {
        let rows = rng.random_range(1..=max_dim);
        let cols = rng.random_range(1..=max_dim);
        let entries = (0..rows * cols).map(|_| rng.random_range(-10.0..10.0)).collect();
        PayoffMatrix::new(rows, cols, entries).unwrap()
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(PayoffMatrix::new(0, 2, vec![]).is_err());
        assert!(PayoffMatrix::new(1, 2, vec![1.0]).is_err());
        assert!(PayoffMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(PayoffMatrix::from_rows(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn saddle_examples() {
        let p = m(vec![vec![2.0, 1.0], vec![4.0, 3.0]]);
        assert_eq!(solve_pure(&p), Some((1, 1, 3.0)));
        assert_eq!(solve_pure(&pennies()), None);
        assert_eq!(solve_pure(&m(vec![vec![7.0]])), Some((0, 0, 7.0)));
    }

    #[test]
    fn saddle_tie_breaks_lexicographically() {
        // Every entry equal: each cell is a saddle, (0, 0) must win.
        let p = m(vec![vec![5.0, 5.0], vec![5.0, 5.0]]);
        assert_eq!(solve_pure(&p), Some((0, 0, 5.0)));
    }

    #[test]
    fn mixed_matching_pennies() {
        let s = solve_mixed(&pennies(), 1e-6).unwrap();
        for v in s.row_strategy.iter().chain(s.col_strategy.iter()) {
            assert!((v - 0.5).abs() < 1e-9);
        }
        assert!(s.value.abs() < 1e-9);
    }

    #[test]
    fn mixed_matches_indifference_oracle() {
        let p = m(vec![vec![0.0, 2.0], vec![3.0, 1.0]]);
        let (x0, y0, v) = indifference_2x2(&p);
        assert!((x0 - 0.5).abs() < 1e-12 && (y0 - 0.25).abs() < 1e-12);
        let s = solve_mixed(&p, 1e-6).unwrap();
        assert!((s.row_strategy[0] - x0).abs() < 1e-9);
        assert!((s.col_strategy[0] - y0).abs() < 1e-9);
        assert!((s.value - v).abs() < 1e-9);
        assert!((s.value - 1.5).abs() < 1e-9);
    }

    #[test]
    fn mixed_degenerates_to_saddle() {
        let p = m(vec![vec![2.0, 1.0], vec![4.0, 3.0]]);
        let s = solve_mixed(&p, 1e-6).unwrap();
        assert!((s.row_strategy[1] - 1.0).abs() < 1e-9);
        assert!((s.col_strategy[1] - 1.0).abs() < 1e-9);
        assert!((s.value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn exploitability_examples() {
        let p = pennies();
        let even = [0.5, 0.5];
        assert!(exploitability(&p, &even, &even).unwrap().abs() < 1e-12);
        let e = exploitability(&p, &[1.0, 0.0], &even).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
        let one = m(vec![vec![7.0]]);
        assert!(exploitability(&one, &[1.0], &[1.0]).unwrap().abs() < 1e-12);
        assert!(matches!(
            exploitability(&p, &[1.0], &even),
            Err(GameError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn solve_picks_pure_then_mixed() {
        let s = solve(&m(vec![vec![2.0, 1.0], vec![4.0, 3.0]]), 1e-6).unwrap();
        assert_eq!(s.kind, SolutionKind::Pure);
        assert_eq!(s.value, 3.0);
        assert_eq!(s.row_strategy, vec![0.0, 1.0]);

        let s = solve(&pennies(), 1e-6).unwrap();
        assert_eq!(s.kind, SolutionKind::Mixed);
        assert!(s.value.abs() < 1e-9);

        let s = solve(&m(vec![vec![0.0, 2.0], vec![3.0, 1.0]]), 1e-6).unwrap();
        assert_eq!(s.kind, SolutionKind::Mixed);
        assert!((s.value - 1.5).abs() < 1e-9);
    }

    #[test]
    fn random_games_are_sound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let p = random_matrix(&mut rng, 5);
            let s = solve(&p, 1e-6).unwrap();
            let e = exploitability(&p, &s.row_strategy, &s.col_strategy).unwrap();
            assert!(e <= 1e-6, "exploitability {e} on {p:?}");
            assert!(p.maxmin() <= s.value && s.value <= p.minmax());
            assert_eq!(solve_pure(&p), brute_saddle(&p));
            let sums = [
                s.row_strategy.iter().sum::<f64>(),
                s.col_strategy.iter().sum::<f64>(),
            ];
            for sum in sums {
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn random_mixed_2x2_match_indifference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 200 {
            let p = random_matrix(&mut rng, 2);
            if p.rows() != 2 || p.cols() != 2 || solve_pure(&p).is_some() {
                continue;
            }
            let (x0, y0, v) = indifference_2x2(&p);
            let s = solve_mixed(&p, 1e-6).unwrap();
            assert!((s.row_strategy[0] - x0).abs() < 1e-7);
            assert!((s.col_strategy[0] - y0).abs() < 1e-7);
            assert!((s.value - v).abs() < 1e-7);
            checked += 1;
        }
    }

    #[test]
    fn affine_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let p = random_matrix(&mut rng, 4);
            let a = rng.random_range(0.1..5.0);
            let b = rng.random_range(-5.0..5.0);
            let scaled = PayoffMatrix::new(
                p.rows(),
                p.cols(),
                p.entries().iter().map(|e| a * e + b).collect(),
            )
            .unwrap();
            let tol = 1e-6;
            let base = solve(&p, tol).unwrap();
            let s = solve(&scaled, tol).unwrap();
            let e = exploitability(&scaled, &s.row_strategy, &s.col_strategy).unwrap();
            assert!(e <= a * tol);
            assert!((s.value - (a * base.value + b)).abs() <= a * tol);
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let p = random_matrix(&mut rng, 5);
            let s1 = solve(&p, 1e-6).unwrap();
            let s2 = solve(&p, 1e-6).unwrap();
            assert_eq!(s1, s2);
        }
    }

    #[test]
    fn bad_tolerance_is_rejected() {
        assert!(matches!(solve_mixed(&pennies(), 0.0), Err(GameError::InvalidTolerance(_))));
        assert!(matches!(solve_mixed(&pennies(), -1.0), Err(GameError::InvalidTolerance(_))));
    }
}
