//! Runtime checkers for every verifiable hypothesis: coercivity and growth
//! sampling, monotonicity, sign certification of superposition terms, exact
//! exponent arithmetic, and post-hoc trajectory audits.
//!
//! Checkers are pure given an explicit seed and report margins rather than
//! booleans internally, so thresholds stay adjustable. A reported margin is
//! the most negative slack observed; `passed` means it clears the relevant
//! tolerance.
//!
//! Measurability of t -> A(t)u(t) needs no runtime check: the registry of
//! time profiles is piecewise continuous and every operator part is
//! continuous in the field, so the map is measurable by construction.

pub mod exponents;

mod audit;
mod checks;
mod dualnorm;

pub use audit::audit_trajectory;
pub use checks::{certify_g, check_coercivity, check_growth, check_monotone};
pub use dualnorm::dual_norm_discrete;

use serde::Serialize;
use std::collections::BTreeMap;

/// Structured pass/fail record of one hypothesis check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub samples: usize,
    pub worst_margin: f64,
    pub worst_witness: Option<serde_json::Value>,
    pub fitted_constants: Option<BTreeMap<String, f64>>,
}

impl CheckReport {
    pub fn new(name: &str, passed: bool, samples: usize, worst_margin: f64) -> Self {
        CheckReport {
            name: name.to_string(),
            passed,
            samples,
            worst_margin,
            worst_witness: None,
            fitted_constants: None,
        }
    }
}

/// Sampling effort and tolerances shared by the checkers.
#[derive(Debug, Clone)]
pub struct CheckSettings {
    pub seed: u64,
    /// Time interval [0, horizon] sampled for t-dependent constants.
    pub horizon: f64,
    pub t_samples: usize,
    /// Random directions per time sample for the coercivity check; each
    /// direction is swept through five decades of scale.
    pub field_samples: usize,
    /// Random directions per time sample for the growth check (each growth
    /// sample pays for a dual-norm ascent, so the default is smaller).
    pub growth_samples: usize,
    /// Random pairs for the monotonicity check.
    pub pair_samples: usize,
    /// Relative tolerance for margin checks.
    pub tolerance: f64,
    /// Absolute floor for the monotonicity gap.
    pub monotone_tolerance: f64,
    /// Absolute floor for the per-step energy inequality.
    pub energy_tolerance: f64,
    /// Random restarts of the projected-ascent dual norm estimator.
    pub ascent_starts: usize,
    pub ascent_iters: usize,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            seed: 42,
            horizon: 1.0,
            t_samples: 5,
            field_samples: 40,
            growth_samples: 6,
            pair_samples: 1000,
            tolerance: 1e-8,
            monotone_tolerance: 1e-10,
            energy_tolerance: 1e-9,
            ascent_starts: 8,
            ascent_iters: 40,
        }
    }
}

/// Scale sweep applied to every random direction: both the norm-dominated
/// and profile-dominated regimes of the bounds get exercised.
pub(crate) const SCALES: [f64; 5] = [1e-2, 1e-1, 1.0, 1e1, 1e2];
