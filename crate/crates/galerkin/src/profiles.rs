//! Named time profiles for coefficients and forcing amplitudes.
//!
//! All profiles are piecewise continuous, so pointwise evaluation at grid
//! times is well defined, and the registry is closed under the pointwise
//! powers needed for derived lower-bound constants.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TimeProfile {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// amplitude * exp(-rate * t)
    Exp {
        amplitude: f64,
        rate: f64,
    },
    Sum {
        terms: Vec<TimeProfile>,
    },
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Zero => 0.0,
            TimeProfile::Constant { value } => *value,
            TimeProfile::Exp { amplitude, rate } => amplitude * (-rate * t).exp(),
            TimeProfile::Sum { terms } => terms.iter().map(|p| p.eval(t)).sum(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TimeProfile::Zero => true,
            TimeProfile::Constant { value } => *value == 0.0,
            TimeProfile::Exp { amplitude, .. } => *amplitude == 0.0,
            TimeProfile::Sum { terms } => terms.iter().all(|p| p.is_zero()),
        }
    }

    /// True if the profile is nonnegative for all t >= 0.
    pub fn is_nonnegative(&self) -> bool {
        match self {
            TimeProfile::Zero => true,
            TimeProfile::Constant { value } => *value >= 0.0,
            TimeProfile::Exp { amplitude, .. } => *amplitude >= 0.0,
            TimeProfile::Sum { terms } => terms.iter().all(|p| p.is_nonnegative()),
        }
    }

    /// All parameters finite.
    pub fn is_finite(&self) -> bool {
        match self {
            TimeProfile::Zero => true,
            TimeProfile::Constant { value } => value.is_finite(),
            TimeProfile::Exp { amplitude, rate } => amplitude.is_finite() && rate.is_finite(),
            TimeProfile::Sum { terms } => terms.iter().all(|p| p.is_finite()),
        }
    }

    /// Pointwise power of a nonnegative profile. Only single terms are
    /// closed under powers; sums fall back to a constant upper bound on
    /// [0, horizon], which is safe wherever the result feeds a lower-bound
    /// constant.
    pub fn powf_upper(&self, e: f64, horizon: f64) -> TimeProfile {
        match self {
            TimeProfile::Zero => TimeProfile::Zero,
            TimeProfile::Constant { value } => TimeProfile::Constant {
                value: value.powf(e),
            },
            TimeProfile::Exp { amplitude, rate } => TimeProfile::Exp {
                amplitude: amplitude.powf(e),
                rate: rate * e,
            },
            TimeProfile::Sum { .. } => {
                let peak = self.sup_on(horizon);
                TimeProfile::Constant {
                    value: peak.powf(e),
                }
            }
        }
    }

    /// Supremum over [0, horizon] for nonnegative profiles.
    pub fn sup_on(&self, horizon: f64) -> f64 {
        match self {
            TimeProfile::Zero => 0.0,
            TimeProfile::Constant { value } => value.max(0.0),
            TimeProfile::Exp { amplitude, rate } => {
                let at0 = self.eval(0.0);
                let ath = self.eval(horizon);
                let _ = (amplitude, rate);
                at0.max(ath).max(0.0)
            }
            TimeProfile::Sum { terms } => terms.iter().map(|p| p.sup_on(horizon)).sum(),
        }
    }

    /// Discrete L^q norm over a time grid (right-endpoint rule on each step).
    pub fn lq_norm_on_grid(&self, times: &[f64], q: f64) -> f64 {
        let mut acc = 0.0;
        for k in 1..times.len() {
            let tau = times[k] - times[k - 1];
            acc += tau * self.eval(times[k]).abs().powf(q);
        }
        acc.powf(1.0 / q)
    }

    pub fn scaled(&self, factor: f64) -> TimeProfile {
        match self {
            TimeProfile::Zero => TimeProfile::Zero,
            TimeProfile::Constant { value } => TimeProfile::Constant {
                value: value * factor,
            },
            TimeProfile::Exp { amplitude, rate } => TimeProfile::Exp {
                amplitude: amplitude * factor,
                rate: *rate,
            },
            TimeProfile::Sum { terms } => TimeProfile::Sum {
                terms: terms.iter().map(|p| p.scaled(factor)).collect(),
            },
        }
    }

    pub fn plus(self, other: TimeProfile) -> TimeProfile {
        match (self, other) {
            (TimeProfile::Zero, o) => o,
            (s, TimeProfile::Zero) => s,
            (TimeProfile::Sum { mut terms }, o) => {
                terms.push(o);
                TimeProfile::Sum { terms }
            }
            (s, o) => TimeProfile::Sum { terms: vec![s, o] },
        }
    }
}
