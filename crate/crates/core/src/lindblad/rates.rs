use crate::error::{Error, Result};
use crate::linalg::Matrix8;
use crate::model::{NvModel, DIM};

use super::state::{PopulationVector, Vector8};

/// Classical generator of the population dynamics: `W_mn` (m ≠ n) is the
/// total rate of jumps `n → m`, and each column sums to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateMatrix {
    w: Matrix8,
    laser_on: bool,
}

impl RateMatrix {
    /// Wraps an arbitrary generator, checking the column-sum and sign
    /// invariants.
    pub fn new(w: Matrix8, laser_on: bool) -> Result<Self> {
        let r = RateMatrix { w, laser_on };
        r.validate()?;
        Ok(r)
    }

    /// No invariant checks; for probing the error paths of consumers.
    pub fn from_matrix_unchecked(w: Matrix8, laser_on: bool) -> Self {
        RateMatrix { w, laser_on }
    }

    pub fn validate(&self) -> Result<()> {
        let scale = self.max_rate().max(1.0);
        for n in 0..DIM {
            let col = self.w.column(n).sum();
            if col.abs() > 1e-12 * scale {
                return Err(Error::Numerical(format!("column {} sums to {col:e}", n + 1)));
            }
            for m in 0..DIM {
                if m != n && self.w[(m, n)] < 0.0 {
                    return Err(Error::Numerical(format!(
                        "negative off-diagonal rate W[{},{}] = {}",
                        m + 1,
                        n + 1,
                        self.w[(m, n)]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn matrix(&self) -> &Matrix8 {
        &self.w
    }

    pub fn laser_on(&self) -> bool {
        self.laser_on
    }

    /// Largest off-diagonal entry (largest single transition rate).
    pub fn max_rate(&self) -> f64 {
        let mut max = 0.0f64;
        for n in 0..DIM {
            for m in 0..DIM {
                if m != n {
                    max = max.max(self.w[(m, n)]);
                }
            }
        }
        max
    }

    pub fn apply(&self, p: &PopulationVector) -> Vector8 {
        self.w * p.vector()
    }

    /// `‖W p‖_max / max_rate`, the stationarity residual used for NESS
    /// detection.
    pub fn relative_residual(&self, p: &PopulationVector) -> f64 {
        self.apply(p).amax() / self.max_rate().max(f64::MIN_POSITIVE)
    }
}

pub fn build_rate_matrix(model: &NvModel, laser_on: bool) -> RateMatrix {
    let mut w = Matrix8::zeros();
    for j in model.active(laser_on) {
        let (from, to) = (j.from.idx(), j.to.idx());
        w[(to, from)] += j.rate;
        w[(from, from)] -= j.rate;
    }
    RateMatrix { w, laser_on }
}
