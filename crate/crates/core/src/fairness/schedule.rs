//! Inverse-temperature schedules for noisy best response.

use serde::{Deserialize, Serialize};

use crate::harness::tagged::tagged_enum;
use crate::{Error, Result};

tagged_enum! {
    /// How `beta` evolves with the updating-time index `t >= 1`.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub enum CoolingSchedule via ScheduleRepr {
        /// Constant `beta`.
        Fixed { beta: f64 },
        /// `beta(t) = log(t) / delta`.
        Logarithmic { delta: f64 },
        /// `beta(t) = k` on `[t_k, t_{k+1})` with `t_1 = 1` and
        /// `t_{k+1} - t_k = e^{k delta}`.
        PiecewiseConstant { delta: f64 },
    }
}

/// Whether a schedule's `delta` clears the sufficient annealing bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaAssessment {
    Sufficient,
    Heuristic,
    NotApplicable,
}

impl CoolingSchedule {
    pub fn fixed(beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::invalid(format!("fixed beta must be finite and nonnegative, got {beta}")));
        }
        Ok(Self::Fixed { beta })
    }

    pub fn logarithmic(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self::Logarithmic { delta })
    }

    pub fn piecewise_constant(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self::PiecewiseConstant { delta })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Fixed { beta } => Self::fixed(beta).map(|_| ()),
            Self::Logarithmic { delta } | Self::PiecewiseConstant { delta } => check_delta(delta),
        }
    }

    /// `beta` at updating time `t`; times below 1 are treated as 1.
    pub fn beta(&self, t: u64) -> f64 {
        let t = t.max(1);
        match *self {
            Self::Fixed { beta } => beta,
            Self::Logarithmic { delta } => (t as f64).ln() / delta,
            Self::PiecewiseConstant { delta } => {
                let mut k = 1u64;
                let mut start = 1.0f64;
                loop {
                    let next = start + (k as f64 * delta).exp();
                    if (t as f64) < next {
                        return k as f64;
                    }
                    start = next;
                    k += 1;
                }
            }
        }
    }

    /// Start time `t_k` of the `k`-th constant piece (`k >= 1`).
    pub fn breakpoint(delta: f64, k: u64) -> f64 {
        (1..k).fold(1.0, |t, j| t + (j as f64 * delta).exp())
    }

    pub fn delta(&self) -> Option<f64> {
        match *self {
            Self::Fixed { .. } => None,
            Self::Logarithmic { delta } | Self::PiecewiseConstant { delta } => Some(delta),
        }
    }

    /// Compares `delta` with the sufficient bound for the instance.
    pub fn assess(&self, bound: f64) -> DeltaAssessment {
        match self.delta() {
            None => DeltaAssessment::NotApplicable,
            Some(d) if d > bound => DeltaAssessment::Sufficient,
            Some(_) => DeltaAssessment::Heuristic,
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!("delta must be positive and finite, got {delta}")));
    }
    Ok(())
}
