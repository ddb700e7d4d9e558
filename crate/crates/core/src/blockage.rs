//! LOS probabilities under the disc-obstacle model.
//!
//! A link of length `d` is clear when no obstacle centre falls in the
//! `d x d_b` strip around it, so `P_LOS(d) = exp(-lambda_o * d * d_b)`.
//! Over a random link length the LOS probability is the expectation of that
//! exponential under the tabulated distance density.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::PdfTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockageParams {
    /// Obstacle centres per square metre.
    pub lambda_o: f64,
    /// Obstacle diameter in metres.
    pub d_b: f64,
}

impl BlockageParams {
    pub fn new(lambda_o: f64, d_b: f64) -> Result<Self> {
        if !(lambda_o >= 0.0 && lambda_o.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "obstacle density must be >= 0, got {lambda_o}"
            )));
        }
        if !(d_b > 0.0 && d_b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "obstacle diameter must be > 0, got {d_b}"
            )));
        }
        Ok(Self { lambda_o, d_b })
    }

    fn rate(&self) -> f64 {
        self.lambda_o * self.d_b
    }
}

/// LOS probability of a link of fixed length `d`.
pub fn p_los_at(params: &BlockageParams, d: f64) -> f64 {
    (-params.rate() * d.max(0.0)).exp()
}

/// Expected LOS probability over a distance density.
pub fn p_los_expected(params: &BlockageParams, dist: &PdfTable) -> f64 {
    if params.lambda_o == 0.0 {
        return 1.0;
    }
    let c = params.rate();
    dist.expect(|d| (-c * d).exp()).clamp(0.0, 1.0)
}

pub fn p_nlos_expected(params: &BlockageParams, dist: &PdfTable) -> f64 {
    1.0 - p_los_expected(params, dist)
}
