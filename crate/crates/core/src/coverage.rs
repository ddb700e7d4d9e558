//! SNR threshold probabilities and the composed coverage probability.
//!
//! Direct link: `SNR_d = P G_t G_r / s2 * (lambda / (4 pi D_tr))^alpha`, so
//! `SNR_d >= tau` iff `D_tr <= d*` with
//! `d* = lambda / (4 pi) * (P G_t G_r / (tau s2))^(1/alpha)`.
//!
//! Indirect link: `SNR_i = P G_t G_r M^4 / s2 * (lambda / (4 pi D_ts D_sr))^alpha`,
//! so `SNR_i >= tau` iff `D_ts * D_sr <= k` with
//! `k = lambda / (4 pi) * (P G_t G_r M^4 / (tau s2))^(1/alpha)`.

use serde::{Deserialize, Serialize};

use crate::blockage::{p_los_expected, BlockageParams};
use crate::distributions::{tabulate_link_distributions, LinkDistanceModel, LinkDistributions};
use crate::error::{Error, Result, StageExt};
use crate::numerics::PdfTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// Transmit power, W.
    pub p_tx: f64,
    /// Transmit antenna gain, linear.
    pub g_t: f64,
    /// Receive antenna gain, linear.
    pub g_r: f64,
    /// RIS element count.
    pub m: f64,
    /// Noise power, W.
    pub sigma2: f64,
    /// Carrier wavelength, m.
    pub wavelength: f64,
    /// SNR threshold, linear.
    pub tau: f64,
    /// Path-loss exponent.
    pub alpha: f64,
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("p_tx", self.p_tx),
            ("g_t", self.g_t),
            ("g_r", self.g_r),
            ("m", self.m),
            ("sigma2", self.sigma2),
            ("wavelength", self.wavelength),
            ("tau", self.tau),
            ("alpha", self.alpha),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || v.is_nan() {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.m < 1.0 {
            return Err(Error::InvalidParameter(format!("m must be >= 1, got {}", self.m)));
        }
        if self.alpha < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha must be >= 1, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        self.wavelength / (4.0 * std::f64::consts::PI)
    }

    /// Largest `D_tr` at which the direct link still meets the threshold.
    pub fn direct_radius(&self) -> f64 {
        self.scale() * (self.p_tx * self.g_t * self.g_r / (self.tau * self.sigma2)).powf(1.0 / self.alpha)
    }

    /// Largest `D_ts * D_sr` at which the reflected link still meets the threshold.
    pub fn indirect_product_radius(&self) -> f64 {
        self.scale()
            * (self.p_tx * self.g_t * self.g_r * self.m.powi(4) / (self.tau * self.sigma2))
                .powf(1.0 / self.alpha)
    }

    pub fn snr_direct(&self, d_tr: f64) -> f64 {
        self.p_tx * self.g_t * self.g_r / self.sigma2 * (self.scale() / d_tr).powf(self.alpha)
    }

    pub fn snr_indirect(&self, d_ts: f64, d_sr: f64) -> f64 {
        self.p_tx * self.g_t * self.g_r * self.m.powi(4) / self.sigma2
            * (self.scale() / (d_ts * d_sr)).powf(self.alpha)
    }
}

/// Every factor of the coverage composition plus the three results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageBreakdown {
    pub p_los_ts: f64,
    pub p_los_sr: f64,
    pub p_los_tr: f64,
    pub p_snr_i: f64,
    pub p_snr_d: f64,
    pub p_cov_direct: f64,
    pub p_cov_indirect: f64,
    pub p_cov_total: f64,
}

impl CoverageBreakdown {
    /// Composes direct, indirect and total coverage from the five factors.
    pub fn compose(p_los_ts: f64, p_los_sr: f64, p_los_tr: f64, p_snr_i: f64, p_snr_d: f64) -> Self {
        let p_cov_direct = coverage_direct(p_los_tr, p_snr_d);
        let p_cov_indirect = coverage_indirect(p_los_ts, p_los_sr, p_los_tr, p_snr_i, p_snr_d);
        Self {
            p_los_ts,
            p_los_sr,
            p_los_tr,
            p_snr_i,
            p_snr_d,
            p_cov_direct,
            p_cov_indirect,
            p_cov_total: p_cov_direct + p_cov_indirect,
        }
    }

    pub const FIELD_NAMES: [&'static str; 8] = [
        "p_los_ts",
        "p_los_sr",
        "p_los_tr",
        "p_snr_i",
        "p_snr_d",
        "p_cov_direct",
        "p_cov_indirect",
        "p_cov_total",
    ];

    pub fn fields(&self) -> [(&'static str, f64); 8] {
        [
            ("p_los_ts", self.p_los_ts),
            ("p_los_sr", self.p_los_sr),
            ("p_los_tr", self.p_los_tr),
            ("p_snr_i", self.p_snr_i),
            ("p_snr_d", self.p_snr_d),
            ("p_cov_direct", self.p_cov_direct),
            ("p_cov_indirect", self.p_cov_indirect),
            ("p_cov_total", self.p_cov_total),
        ]
    }
}

/// `P(SNR_d >= tau) = F_tr(d*)`.
pub fn p_snr_direct(radio: &RadioParams, f_tr: &PdfTable) -> f64 {
    f_tr.mass_below(radio.direct_radius()).clamp(0.0, 1.0)
}

/// `P(SNR_i >= tau) = ∫ f_ts(x) F_sr(k / x) dx`, treating `D_ts` and `D_sr`
/// as independent. `F_sr` is the running integral of `f_sr`.
pub fn p_snr_indirect(radio: &RadioParams, f_ts: &PdfTable, f_sr: &PdfTable) -> f64 {
    let k = radio.indirect_product_radius();
    let f_sr = f_sr.to_cdf();
    f_ts.expect(|x| if x <= 0.0 { f_sr.eval(f64::INFINITY) } else { f_sr.eval(k / x) })
        .clamp(0.0, 1.0)
}

pub fn coverage_direct(p_los_tr: f64, p_snr_d: f64) -> f64 {
    p_los_tr * p_snr_d
}

/// Indirect coverage: the reflected link succeeds and the direct one does not.
pub fn coverage_indirect(p_los_ts: f64, p_los_sr: f64, p_los_tr: f64, p_snr_i: f64, p_snr_d: f64) -> f64 {
    p_los_ts * p_los_sr * p_snr_i * (1.0 - p_los_tr * p_snr_d)
}

/// The same quantity summed over the three direct-link failure cases:
/// blocked with enough SNR, clear with too little, blocked with too little.
pub fn coverage_indirect_terms(
    p_los_ts: f64,
    p_los_sr: f64,
    p_los_tr: f64,
    p_snr_i: f64,
    p_snr_d: f64,
) -> f64 {
    let reflected = p_los_ts * p_los_sr * p_snr_i;
    let p_nlos_tr = 1.0 - p_los_tr;
    reflected * p_nlos_tr * p_snr_d
        + reflected * p_los_tr * (1.0 - p_snr_d)
        + reflected * p_nlos_tr * (1.0 - p_snr_d)
}

/// Coverage from already tabulated link distributions.
pub fn coverage_from_tables(
    tables: &LinkDistributions,
    blk: &BlockageParams,
    radio: &RadioParams,
) -> CoverageBreakdown {
    CoverageBreakdown::compose(
        p_los_expected(blk, &tables.ts.pdf),
        p_los_expected(blk, &tables.sr.pdf),
        p_los_expected(blk, &tables.tr.pdf),
        p_snr_indirect(radio, &tables.ts.pdf, &tables.sr.pdf),
        p_snr_direct(radio, &tables.tr.pdf),
    )
}

/// Total coverage probability for one configuration.
pub fn coverage_total(
    model: &LinkDistanceModel,
    blk: &BlockageParams,
    radio: &RadioParams,
) -> Result<CoverageBreakdown> {
    radio.validate()?;
    let tables = tabulate_link_distributions(model).stage(|| "tabulating link distances".into())?;
    Ok(coverage_from_tables(&tables, blk, radio))
}
