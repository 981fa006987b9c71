//! Adversary classification and hidden-state prediction.
//!
//! A group is an adversary when its presence lowers the best achievable
//! team need. Adversaries whose own expected need changes when facing the
//! team are intentional (they want something from the fight); those whose
//! need is unchanged are unintentional, like terrain.
//!
//! When opponent state is not observable, two small regression models
//! estimate it from HP cost regressors: a linear one and a quadratic one,
//! both with seed-controlled Gaussian noise.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdversaryClass {
    NotAdversary,
    Intentional,
    Unintentional,
}

/// Regression coefficients for the unit-cost and energy-level predictors,
/// plus the noise level of the error term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionCoeffs {
    pub uc0: f64,
    pub uc1: f64,
    pub uc2: f64,
    pub asc0: f64,
    pub asc1: f64,
    pub asc2: f64,
    pub noise_std: f64,
}

impl Default for RegressionCoeffs {
    fn default() -> Self {
        RegressionCoeffs {
            uc0: 0.08,
            uc1: 0.03,
            uc2: 0.0001,
            asc0: 0.03,
            asc1: 0.0003,
            asc2: 0.00001,
            noise_std: 1.0,
        }
    }
}

/// Predicted opponent state: per-attack energy cost and energy level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictedState {
    pub unit_energy_cost: f64,
    /// Clamped to the 0-100 energy scale.
    pub energy_level: f64,
}

/// Classify a second group relative to the team.
///
/// Not an adversary unless its presence strictly lowers the reachable team
/// need. Among adversaries, a changed expected own-need (beyond `eq_tol`)
/// marks intent.
pub fn classify(
    max_need_alone: f64,
    max_need_with: f64,
    expected_opponent_need: f64,
    opponent_current_need: f64,
    eq_tol: f64,
) -> AdversaryClass {
    if !(max_need_alone > max_need_with) {
        return AdversaryClass::NotAdversary;
    }
    if (expected_opponent_need - opponent_current_need).abs() > eq_tol {
        AdversaryClass::Intentional
    } else {
        AdversaryClass::Unintentional
    }
}

fn noise<R: Rng + ?Sized>(std: f64, rng: &mut R) -> f64 {
    if std > 0.0 {
        Normal::new(0.0, std).expect("finite std").sample(rng)
    } else {
        0.0
    }
}

/// Linear predictor: unit cost scales with the per-hit HP cost, energy
/// level decays with the accumulated system HP cost.
pub fn predict_linear<R: Rng + ?Sized>(
    hp_unit_cost: f64,
    hp_system_cost: f64,
    c: &RegressionCoeffs,
    rng: &mut R,
) -> PredictedState {
    let unit_energy_cost = hp_unit_cost * c.uc0 + noise(c.noise_std, rng);
    let energy_level = 100.0 - hp_system_cost * c.asc0 + noise(c.noise_std, rng);
    PredictedState { unit_energy_cost, energy_level: energy_level.clamp(0.0, 100.0) }
}

/// Quadratic predictor over the same regressors.
pub fn predict_poly<R: Rng + ?Sized>(
    hp_unit_cost: f64,
    hp_system_cost: f64,
    c: &RegressionCoeffs,
    rng: &mut R,
) -> PredictedState {
    let unit_energy_cost =
        hp_unit_cost * hp_unit_cost * c.uc2 + hp_unit_cost * c.uc1 + noise(c.noise_std, rng);
    let energy_level = 100.0 - hp_system_cost * hp_system_cost * c.asc2
        - hp_system_cost * c.asc1
        + noise(c.noise_std, rng);
    PredictedState { unit_energy_cost, energy_level: energy_level.clamp(0.0, 100.0) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noiseless() -> RegressionCoeffs {
        RegressionCoeffs { noise_std: 0.0, ..RegressionCoeffs::default() }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(5.0, 5.0, 0.0, 0.0, 1e-9), AdversaryClass::NotAdversary);
        assert_eq!(classify(5.0, 3.0, 2.0, 2.0, 1e-9), AdversaryClass::Unintentional);
        assert_eq!(classify(5.0, 3.0, 4.0, 2.0, 1e-9), AdversaryClass::Intentional);
        // The need drop must be strict.
        assert_eq!(classify(4.9, 5.0, 4.0, 2.0, 1e-9), AdversaryClass::NotAdversary);
        // Differences inside the tolerance count as equal.
        assert_eq!(classify(5.0, 3.0, 2.0 + 1e-12, 2.0, 1e-9), AdversaryClass::Unintentional);
    }

    #[test]
    fn linear_prediction_examples() {
        let c = noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = predict_linear(1.0, 0.0, &c, &mut rng);
        assert_eq!(p.unit_energy_cost, 0.08);
        assert_eq!(p.energy_level, 100.0);

        let p = predict_linear(0.0, 10.0, &c, &mut rng);
        assert!((p.energy_level - 99.7).abs() < 1e-12);
    }

    #[test]
    fn poly_prediction_examples() {
        let c = noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = predict_poly(1.0, 0.0, &c, &mut rng);
        assert!((p.unit_energy_cost - 0.0301).abs() < 1e-12);

        let p = predict_poly(0.0, 0.0, &c, &mut rng);
        assert_eq!(p.unit_energy_cost, 0.0);
        assert_eq!(p.energy_level, 100.0);

        let p = predict_poly(0.0, 10.0, &c, &mut rng);
        assert!((p.energy_level - 99.996).abs() < 1e-12);
    }

    #[test]
    fn energy_level_is_clamped() {
        let c = noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = predict_linear(0.0, 1e6, &c, &mut rng);
        assert_eq!(p.energy_level, 0.0);
    }

    #[test]
    fn noiseless_predictors_are_monotone() {
        let c = noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut last_uc = f64::NEG_INFINITY;
        let mut last_el = f64::INFINITY;
        for step in 0..50 {
            let x = step as f64 * 7.0;
            let lin = predict_linear(x, x, &c, &mut rng);
            assert!(lin.unit_energy_cost >= last_uc);
            assert!(lin.energy_level <= last_el);
            last_uc = lin.unit_energy_cost;
            last_el = lin.energy_level;
        }
        last_uc = f64::NEG_INFINITY;
        last_el = f64::INFINITY;
        for step in 0..50 {
            let x = step as f64 * 7.0;
            let poly = predict_poly(x, x, &c, &mut rng);
            assert!(poly.unit_energy_cost >= last_uc);
            assert!(poly.energy_level <= last_el);
            last_uc = poly.unit_energy_cost;
            last_el = poly.energy_level;
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let c = RegressionCoeffs::default(); // unit noise
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..10).map(|i| predict_linear(i as f64, i as f64, &c, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(99), run(99));
        assert_ne!(run(99), run(100));
    }
}
