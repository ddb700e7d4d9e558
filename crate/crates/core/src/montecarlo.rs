//! Event-level simulator used as the oracle for every analytic result.
//!
//! Each trial draws its own RIS layout, receiver and obstacle field from a
//! stream derived from `(master_seed, trial_index)`, so results do not depend
//! on how trials are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockage::BlockageParams;
use crate::coverage::{CoverageBreakdown, RadioParams};
use crate::error::{Error, Result};
use crate::geometry::{sample_hppp, sample_ris_layout, segment_blocked, ObstacleField, Point, RoomGeometry};
use crate::numerics::CdfTable;

/// Two-sided 95 % normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

pub type Stream = ChaCha8Rng;

/// Counter-based stream: the key comes from the master seed, the ChaCha
/// stream id is the trial index.
pub fn derive_stream(master_seed: u64, trial_index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub room: RoomGeometry,
    /// RISs per wall.
    pub n: u32,
    pub blk: BlockageParams,
    pub radio: RadioParams,
    pub trials: u64,
    pub master_seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("at least one RIS per wall is required".into()));
        }
        self.radio.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub d_tr: f64,
    pub d_ts: f64,
    pub d_sr: f64,
    pub los_tr: bool,
    pub los_ts: bool,
    pub los_sr: bool,
    pub snr_d_ok: bool,
    pub snr_i_ok: bool,
    pub covered_direct: bool,
    pub covered_indirect: bool,
    pub covered: bool,
}

/// One realization: RIS layout, then the receiver, then the obstacles.
pub fn run_trial<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> TrialOutcome {
    let a = config.room.side();
    let tx = config.room.tx();
    let layout = sample_ris_layout(a, config.n as usize, rng);
    let rx = Point::new(rng.random::<f64>() * a, rng.random::<f64>() * a);
    let field = ObstacleField {
        centers: sample_hppp(a, config.blk.lambda_o, rng),
        diameter: config.blk.d_b,
    };

    // Exact nearest RIS over all walls.
    let (ris, d_ts) = layout
        .iter()
        .map(|&(_, p)| (p, tx.distance(p)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one RIS");
    let d_sr = ris.distance(rx);
    let d_tr = tx.distance(rx);

    let los_tr = !segment_blocked(tx, rx, &field);
    let los_ts = !segment_blocked(tx, ris, &field);
    let los_sr = !segment_blocked(ris, rx, &field);
    let snr_d_ok = config.radio.snr_direct(d_tr) >= config.radio.tau;
    let snr_i_ok = config.radio.snr_indirect(d_ts, d_sr) >= config.radio.tau;

    let covered_direct = los_tr && snr_d_ok;
    let covered_indirect = !covered_direct && los_ts && los_sr && snr_i_ok;
    TrialOutcome {
        d_tr,
        d_ts,
        d_sr,
        los_tr,
        los_ts,
        los_sr,
        snr_d_ok,
        snr_i_ok,
        covered_direct,
        covered_indirect,
        covered: covered_direct || covered_indirect,
    }
}

/// Event counts over a batch of trials.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialCounts {
    pub trials: u64,
    pub los_tr: u64,
    pub los_ts: u64,
    pub los_sr: u64,
    pub snr_d_ok: u64,
    pub snr_i_ok: u64,
    pub covered_direct: u64,
    pub covered_indirect: u64,
    pub covered: u64,
    /// Trials where both coverage flags were set; always zero.
    pub both_paths: u64,
}

impl TrialCounts {
    pub fn record(mut self, o: &TrialOutcome) -> Self {
        self.trials += 1;
        self.los_tr += o.los_tr as u64;
        self.los_ts += o.los_ts as u64;
        self.los_sr += o.los_sr as u64;
        self.snr_d_ok += o.snr_d_ok as u64;
        self.snr_i_ok += o.snr_i_ok as u64;
        self.covered_direct += o.covered_direct as u64;
        self.covered_indirect += o.covered_indirect as u64;
        self.covered += o.covered as u64;
        self.both_paths += (o.covered_direct && o.covered_indirect) as u64;
        self
    }

    pub fn merge(self, o: Self) -> Self {
        Self {
            trials: self.trials + o.trials,
            los_tr: self.los_tr + o.los_tr,
            los_ts: self.los_ts + o.los_ts,
            los_sr: self.los_sr + o.los_sr,
            snr_d_ok: self.snr_d_ok + o.snr_d_ok,
            snr_i_ok: self.snr_i_ok + o.snr_i_ok,
            covered_direct: self.covered_direct + o.covered_direct,
            covered_indirect: self.covered_indirect + o.covered_indirect,
            covered: self.covered + o.covered,
            both_paths: self.both_paths + o.both_paths,
        }
    }

    /// Empirical frequencies in the same shape as the analytic breakdown.
    pub fn breakdown(&self) -> CoverageBreakdown {
        let f = |c: u64| c as f64 / self.trials as f64;
        CoverageBreakdown {
            p_los_ts: f(self.los_ts),
            p_los_sr: f(self.los_sr),
            p_los_tr: f(self.los_tr),
            p_snr_i: f(self.snr_i_ok),
            p_snr_d: f(self.snr_d_ok),
            p_cov_direct: f(self.covered_direct),
            p_cov_indirect: f(self.covered_indirect),
            p_cov_total: f(self.covered_direct + self.covered_indirect),
        }
    }
}

/// Monte Carlo coverage estimate with a Wilson 95 % interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpEstimate {
    pub estimate: f64,
    pub ci95_halfwidth: f64,
    pub breakdown: CoverageBreakdown,
    pub counts: TrialCounts,
}

impl CpEstimate {
    pub fn from_counts(counts: TrialCounts) -> Self {
        let (lo, hi) = wilson_interval(counts.covered, counts.trials);
        let breakdown = counts.breakdown();
        Self {
            estimate: breakdown.p_cov_total,
            ci95_halfwidth: 0.5 * (hi - lo),
            breakdown,
            counts,
        }
    }
}

/// Wilson score interval for `successes` out of `trials` at 95 %.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn trial(config: &SimConfig, i: u64) -> TrialOutcome {
    run_trial(config, &mut derive_stream(config.master_seed, i))
}

/// Runs all trials on the ambient rayon pool and counts events.
pub fn simulate_counts(config: &SimConfig) -> Result<TrialCounts> {
    config.validate()?;
    Ok((0..config.trials)
        .into_par_iter()
        .fold(TrialCounts::default, |acc, i| acc.record(&trial(config, i)))
        .reduce(TrialCounts::default, TrialCounts::merge))
}

/// Every trial outcome, in trial-index order.
pub fn simulate_outcomes(config: &SimConfig) -> Result<Vec<TrialOutcome>> {
    config.validate()?;
    Ok((0..config.trials).into_par_iter().map(|i| trial(config, i)).collect())
}

pub fn estimate_cp(config: &SimConfig) -> Result<CpEstimate> {
    Ok(CpEstimate::from_counts(simulate_counts(config)?))
}

/// Sampled link distances, one entry per trial.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DistanceSamples {
    pub ts: Vec<f64>,
    pub sr: Vec<f64>,
    pub tr: Vec<f64>,
}

impl DistanceSamples {
    pub fn from_outcomes(outcomes: &[TrialOutcome]) -> Self {
        Self {
            ts: outcomes.iter().map(|o| o.d_ts).collect(),
            sr: outcomes.iter().map(|o| o.d_sr).collect(),
            tr: outcomes.iter().map(|o| o.d_tr).collect(),
        }
    }
}

/// Fraction of samples at or below each grid point.
pub fn empirical_cdf(samples: &[f64], grid: &[f64]) -> Result<CdfTable> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let values = grid
        .iter()
        .map(|&g| sorted.partition_point(|&s| s <= g) as f64 / n)
        .collect();
    CdfTable::new(grid.to_vec(), values)
}

/// Kolmogorov-Smirnov statistic `sup |F_n - F|` between the samples and a
/// continuous CDF, evaluated at every jump of the empirical CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut sup = 0.0_f64;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let f = cdf(x);
        sup = sup.max((j as f64 / n - f).abs()).max((f - i as f64 / n).abs());
        i = j;
    }
    Ok(sup)
}
