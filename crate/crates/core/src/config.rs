//! TOML engine configuration. Key names carry their units; unknown keys are
//! rejected and every validation error names the offending key path.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blockage::BlockageParams;
use crate::coverage::RadioParams;
use crate::distributions::LinkDistanceModel;
use crate::error::{Error, Result};
use crate::experiments::{FixedParams, Mode, RisAxis, SweepSpec, TxLocation};
use crate::geometry::{Point, RoomGeometry};
use crate::montecarlo::SimConfig;

/// The bundled analytic-validation configuration.
pub const REFERENCE_TOML: &str = include_str!("../configs/reference.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub room: RoomSection,
    pub ris: RisSection,
    pub blockage: BlockageSection,
    pub radio: RadioSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSection {
    pub side_m: f64,
    pub tx_x_m: f64,
    pub tx_y_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RisSection {
    pub per_wall: u32,
    pub elements: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockageSection {
    /// Obstacle centres per square metre.
    pub lambda_o: f64,
    pub diameter_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioSection {
    pub p_tx_w: f64,
    pub noise_w: f64,
    pub wavelength_m: f64,
    pub gain_tx: f64,
    pub gain_rx: f64,
    pub tau: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub trials: u64,
    pub seed: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            trials: 100_000,
            seed: 1,
        }
    }
}

fn decades() -> Vec<f64> {
    (1..=10).map(|i| 10.0 * i as f64).collect()
}

fn ris_totals_20_to_200() -> Vec<u32> {
    (1..=10).map(|i| 5 * i).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub room_size: RoomSizeSweep,
    pub ris_count: RisCountSweep,
    pub ris_obstacle: RisObstacleSweep,
    pub tx_heatmap: TxHeatmapSweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoomSizeSweep {
    pub sides_m: Vec<f64>,
    pub lambdas_o: Vec<f64>,
    pub mode: Mode,
}

impl Default for RoomSizeSweep {
    fn default() -> Self {
        Self {
            sides_m: decades(),
            lambdas_o: vec![0.01, 0.02, 0.05],
            mode: Mode::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RisCountSweep {
    pub sides_m: Vec<f64>,
    pub ris_per_wall: Vec<u32>,
    pub lambda_o: f64,
    pub mode: Mode,
}

impl Default for RisCountSweep {
    fn default() -> Self {
        Self {
            sides_m: decades(),
            ris_per_wall: ris_totals_20_to_200(),
            lambda_o: 0.02,
            mode: Mode::Analytic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RisObstacleSweep {
    pub side_m: f64,
    pub ris_per_wall: Vec<u32>,
    pub lambdas_o: Vec<f64>,
    pub mode: Mode,
}

impl Default for RisObstacleSweep {
    fn default() -> Self {
        Self {
            side_m: 30.0,
            ris_per_wall: ris_totals_20_to_200(),
            lambdas_o: (1..=10).map(|i| 0.01 * i as f64).collect(),
            mode: Mode::Analytic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TxHeatmapSweep {
    pub side_m: f64,
    pub resolution: usize,
    pub ris_per_wall: u32,
    pub lambda_o: f64,
}

impl Default for TxHeatmapSweep {
    fn default() -> Self {
        Self {
            side_m: 30.0,
            resolution: 30,
            ris_per_wall: 15,
            lambda_o: 0.02,
        }
    }
}

fn bad(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(path, format!("must be a finite value > 0, got {v}")))
    }
}

fn non_negative(path: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(path, format!("must be a finite value >= 0, got {v}")))
    }
}

fn non_empty<T>(path: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        Err(bad(path, "must not be empty"))
    } else {
        Ok(())
    }
}

fn at_least(path: &str, v: f64, min: f64) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(bad(path, format!("must be >= {min}, got {v}")))
    }
}

impl Config {
    pub fn reference() -> Self {
        Self::from_toml_str(REFERENCE_TOML).expect("bundled config is valid")
    }

    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| bad("<document>", e.to_string().trim_end()))?;
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let message = e.inner().message().to_string();
            bad(&path, message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.room.side_m;
        positive("room.side_m", a)?;
        for (path, v) in [("room.tx_x_m", self.room.tx_x_m), ("room.tx_y_m", self.room.tx_y_m)] {
            if !(v > 0.0 && v < a) {
                return Err(bad(path, format!("must lie strictly inside (0, {a}), got {v}")));
            }
        }
        at_least("ris.per_wall", self.ris.per_wall as f64, 1.0)?;
        positive("ris.elements", self.ris.elements)?;
        at_least("ris.elements", self.ris.elements, 1.0)?;
        non_negative("blockage.lambda_o", self.blockage.lambda_o)?;
        positive("blockage.diameter_m", self.blockage.diameter_m)?;
        let r = &self.radio;
        for (path, v) in [
            ("radio.p_tx_w", r.p_tx_w),
            ("radio.noise_w", r.noise_w),
            ("radio.wavelength_m", r.wavelength_m),
            ("radio.gain_tx", r.gain_tx),
            ("radio.gain_rx", r.gain_rx),
            ("radio.tau", r.tau),
            ("radio.alpha", r.alpha),
        ] {
            positive(path, v)?;
        }
        at_least("radio.alpha", r.alpha, 1.0)?;
        at_least("sim.trials", self.sim.trials as f64, 1.0)?;

        let s = &self.sweep;
        non_empty("sweep.room_size.sides_m", &s.room_size.sides_m)?;
        for &v in &s.room_size.sides_m {
            at_least("sweep.room_size.sides_m", v, 2.0)?;
        }
        non_empty("sweep.room_size.lambdas_o", &s.room_size.lambdas_o)?;
        for &v in &s.room_size.lambdas_o {
            non_negative("sweep.room_size.lambdas_o", v)?;
        }
        non_empty("sweep.ris_count.sides_m", &s.ris_count.sides_m)?;
        for &v in &s.ris_count.sides_m {
            positive("sweep.ris_count.sides_m", v)?;
        }
        non_empty("sweep.ris_count.ris_per_wall", &s.ris_count.ris_per_wall)?;
        for &n in &s.ris_count.ris_per_wall {
            at_least("sweep.ris_count.ris_per_wall", n as f64, 1.0)?;
        }
        non_negative("sweep.ris_count.lambda_o", s.ris_count.lambda_o)?;
        positive("sweep.ris_obstacle.side_m", s.ris_obstacle.side_m)?;
        non_empty("sweep.ris_obstacle.ris_per_wall", &s.ris_obstacle.ris_per_wall)?;
        for &n in &s.ris_obstacle.ris_per_wall {
            at_least("sweep.ris_obstacle.ris_per_wall", n as f64, 1.0)?;
        }
        non_empty("sweep.ris_obstacle.lambdas_o", &s.ris_obstacle.lambdas_o)?;
        for &v in &s.ris_obstacle.lambdas_o {
            non_negative("sweep.ris_obstacle.lambdas_o", v)?;
        }
        positive("sweep.tx_heatmap.side_m", s.tx_heatmap.side_m)?;
        at_least("sweep.tx_heatmap.resolution", s.tx_heatmap.resolution as f64, 8.0)?;
        at_least("sweep.tx_heatmap.ris_per_wall", s.tx_heatmap.ris_per_wall as f64, 1.0)?;
        non_negative("sweep.tx_heatmap.lambda_o", s.tx_heatmap.lambda_o)?;
        Ok(())
    }

    pub fn room(&self) -> RoomGeometry {
        RoomGeometry::new(self.room.side_m, Point::new(self.room.tx_x_m, self.room.tx_y_m))
            .expect("validated room")
    }

    pub fn model(&self) -> LinkDistanceModel {
        LinkDistanceModel::new(self.room(), self.ris.per_wall).expect("validated RIS count")
    }

    pub fn blockage(&self) -> BlockageParams {
        BlockageParams::new(self.blockage.lambda_o, self.blockage.diameter_m).expect("validated blockage")
    }

    pub fn radio(&self) -> RadioParams {
        let r = &self.radio;
        RadioParams {
            p_tx: r.p_tx_w,
            g_t: r.gain_tx,
            g_r: r.gain_rx,
            m: self.ris.elements,
            sigma2: r.noise_w,
            wavelength: r.wavelength_m,
            tau: r.tau,
            alpha: r.alpha,
        }
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            room: self.room(),
            n: self.ris.per_wall,
            blk: self.blockage(),
            radio: self.radio(),
            trials: self.sim.trials,
            master_seed: self.sim.seed,
        }
    }

    pub fn fixed(&self) -> FixedParams {
        FixedParams {
            d_b: self.blockage.diameter_m,
            radio: self.radio(),
            trials: self.sim.trials,
            master_seed: self.sim.seed,
        }
    }

    pub fn room_size_spec(&self) -> SweepSpec {
        let s = &self.sweep.room_size;
        SweepSpec {
            sides: s.sides_m.clone(),
            lambdas: s.lambdas_o.clone(),
            ..SweepSpec::room_size(self.fixed(), s.mode)
        }
    }

    pub fn ris_count_spec(&self) -> SweepSpec {
        let s = &self.sweep.ris_count;
        SweepSpec {
            sides: s.sides_m.clone(),
            ris: RisAxis::PerWall(s.ris_per_wall.clone()),
            lambdas: vec![s.lambda_o],
            ..SweepSpec::ris_count(self.fixed(), s.mode)
        }
    }

    pub fn ris_obstacle_spec(&self) -> SweepSpec {
        let s = &self.sweep.ris_obstacle;
        SweepSpec {
            sides: vec![s.side_m],
            locations: vec![TxLocation::First],
            ris: RisAxis::PerWall(s.ris_per_wall.clone()),
            lambdas: s.lambdas_o.clone(),
            ..SweepSpec::ris_obstacle(self.fixed(), s.mode)
        }
    }
}
