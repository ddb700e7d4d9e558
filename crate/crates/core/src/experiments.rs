//! Parameter sweeps: room size, transmitter location, RIS count and
//! obstacle density, plus the `D_sr` approximation report.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockage::BlockageParams;
use crate::coverage::{coverage_from_tables, CoverageBreakdown, RadioParams};
use crate::distributions::{
    cdf_dsr, tabulate_dsr_for_law, tabulate_link_distributions_with, LinkDistanceModel, WallLaw,
};
use crate::error::{Error, Result, StageExt};
use crate::geometry::{Point, RoomGeometry};
use crate::montecarlo::{derive_stream, estimate_cp, ks_distance, simulate_outcomes, CpEstimate, SimConfig};
use crate::numerics::{CdfTable, DEFAULT_GRID_POINTS};

/// Template transmitter positions, as fractions of the side length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxLocation {
    /// Upper-left, `(a/10, 9a/10)`.
    First,
    /// Centre, `(a/2, a/2)`.
    Second,
    /// Upper-middle, `(a/2, 9a/10)`.
    Third,
    /// Between first and second, `(3a/10, 7a/10)`.
    Fourth,
    /// Absolute coordinates in metres.
    At { x: f64, y: f64 },
}

impl TxLocation {
    pub const TEMPLATES: [TxLocation; 4] = [Self::First, Self::Second, Self::Third, Self::Fourth];

    pub fn position(&self, a: f64) -> Point {
        match *self {
            Self::First => Point::new(a / 10.0, 9.0 * a / 10.0),
            Self::Second => Point::new(a / 2.0, a / 2.0),
            Self::Third => Point::new(a / 2.0, 9.0 * a / 10.0),
            Self::Fourth => Point::new(3.0 * a / 10.0, 7.0 * a / 10.0),
            Self::At { x, y } => Point::new(x, y),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::First => "first",
            Self::Second => "second",
            Self::Third => "third",
            Self::Fourth => "fourth",
            Self::At { .. } => "custom",
        }
    }
}

/// How the RIS count is chosen at each grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RisAxis {
    /// Total RIS count `2a`, i.e. `a/2` per wall.
    TwiceSide,
    /// Explicit per-wall counts.
    PerWall(Vec<u32>),
}

impl RisAxis {
    fn counts(&self, a: f64) -> Result<Vec<u32>> {
        match self {
            Self::TwiceSide => {
                let n = (a / 2.0).round();
                if n < 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "room side {a} m gives no RIS under the total = 2a rule"
                    )));
                }
                Ok(vec![n as u32])
            }
            Self::PerWall(v) => Ok(v.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Analytic,
    MonteCarlo,
    Both,
}

impl Mode {
    fn analytic(self) -> bool {
        matches!(self, Self::Analytic | Self::Both)
    }

    fn monte_carlo(self) -> bool {
        matches!(self, Self::MonteCarlo | Self::Both)
    }
}

/// Parameters shared by every grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedParams {
    pub d_b: f64,
    pub radio: RadioParams,
    pub trials: u64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub sides: Vec<f64>,
    pub locations: Vec<TxLocation>,
    pub ris: RisAxis,
    pub lambdas: Vec<f64>,
    pub fixed: FixedParams,
    pub mode: Mode,
}

impl SweepSpec {
    /// Room sizes 10..100 m, first location, total RIS = 2a.
    pub fn room_size(fixed: FixedParams, mode: Mode) -> Self {
        Self {
            sides: (1..=10).map(|i| 10.0 * i as f64).collect(),
            locations: vec![TxLocation::First],
            ris: RisAxis::TwiceSide,
            lambdas: vec![0.01, 0.02, 0.05],
            fixed,
            mode,
        }
    }

    /// Four template locations, totals 20..200 RIS, `lambda_o = 0.02`.
    pub fn ris_count(fixed: FixedParams, mode: Mode) -> Self {
        Self {
            sides: (1..=10).map(|i| 10.0 * i as f64).collect(),
            locations: TxLocation::TEMPLATES.to_vec(),
            ris: RisAxis::PerWall((1..=10).map(|i| 5 * i).collect()),
            lambdas: vec![0.02],
            fixed,
            mode,
        }
    }

    /// `a = 30`, first location, totals 20..200 RIS against densities 0.01..0.10.
    pub fn ris_obstacle(fixed: FixedParams, mode: Mode) -> Self {
        Self {
            sides: vec![30.0],
            locations: vec![TxLocation::First],
            ris: RisAxis::PerWall((1..=10).map(|i| 5 * i).collect()),
            lambdas: (1..=10).map(|i| 0.01 * i as f64).collect(),
            fixed,
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::InvalidParameter(format!("sweep axis `{name}` is empty")))
            } else {
                Ok(())
            }
        };
        empty("sides", self.sides.len())?;
        empty("locations", self.locations.len())?;
        empty("lambdas", self.lambdas.len())?;
        if let RisAxis::PerWall(v) = &self.ris {
            empty("ris", v.len())?;
            if v.contains(&0) {
                return Err(Error::InvalidParameter("RIS per wall must be >= 1".into()));
            }
        }
        if self.fixed.trials == 0 && self.mode.monte_carlo() {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        self.fixed.radio.validate()?;
        for &l in &self.lambdas {
            BlockageParams::new(l, self.fixed.d_b)?;
        }
        for &a in &self.sides {
            for loc in &self.locations {
                RoomGeometry::new(a, loc.position(a))?;
            }
            self.ris.counts(a)?;
        }
        Ok(())
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub side: f64,
    pub location: TxLocation,
    pub tx: Point,
    pub ris_per_wall: u32,
    pub lambda_o: f64,
    pub analytic: Option<CoverageBreakdown>,
    pub mc: Option<CpEstimate>,
}

impl SweepRow {
    pub fn ris_total(&self) -> u32 {
        4 * self.ris_per_wall
    }

    /// `|analytic - MC|` when both columns are present.
    pub fn discrepancy(&self) -> Option<f64> {
        Some((self.analytic?.p_cov_total - self.mc?.estimate).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
}

#[derive(Clone, Copy)]
struct Group {
    side: f64,
    location: TxLocation,
    n: u32,
}

/// Runs every grid point. Rows come out ordered by side, location, RIS
/// count and density; link tables are shared across densities.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let mut groups = Vec::new();
    for &side in &spec.sides {
        for &location in &spec.locations {
            for n in spec.ris.counts(side)? {
                groups.push(Group { side, location, n });
            }
        }
    }
    let rows = groups
        .par_iter()
        .map(|g| run_group(spec, *g))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        spec: spec.clone(),
        rows: rows.into_iter().flatten().collect(),
    })
}

fn run_group(spec: &SweepSpec, g: Group) -> Result<Vec<SweepRow>> {
    let tx = g.location.position(g.side);
    let room = RoomGeometry::new(g.side, tx)?;
    let model = LinkDistanceModel::new(room, g.n)?;
    let label = || format!("a = {}, tx = ({}, {}), n = {}", g.side, tx.x, tx.y, g.n);
    let tables = if spec.mode.analytic() {
        Some(tabulate_link_distributions_with(&model, DEFAULT_GRID_POINTS, None).stage(label)?)
    } else {
        None
    };
    spec.lambdas
        .iter()
        .map(|&lambda_o| {
            let blk = BlockageParams::new(lambda_o, spec.fixed.d_b)?;
            let analytic = tables.as_ref().map(|t| coverage_from_tables(t, &blk, &spec.fixed.radio));
            let mc = if spec.mode.monte_carlo() {
                Some(estimate_cp(&SimConfig {
                    room,
                    n: g.n,
                    blk,
                    radio: spec.fixed.radio,
                    trials: spec.fixed.trials,
                    master_seed: spec.fixed.master_seed,
                })?)
            } else {
                None
            };
            Ok(SweepRow {
                side: g.side,
                location: g.location,
                tx,
                ris_per_wall: g.n,
                lambda_o,
                analytic,
                mc,
            })
        })
        .collect()
}

pub fn sweep_room_size(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep(spec)
}

pub fn sweep_ris_count(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep(spec)
}

pub fn heatmap_ris_obstacle(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep(spec)
}

impl SweepResult {
    /// Total CP used for comparisons: analytic when present, else MC.
    fn cp(row: &SweepRow) -> f64 {
        row.analytic.map(|b| b.p_cov_total).or(row.mc.map(|m| m.estimate)).unwrap_or(f64::NAN)
    }

    /// Rows matching a predicate, in sweep order.
    pub fn select<'a>(&'a self, f: impl Fn(&SweepRow) -> bool + 'a) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows.iter().filter(move |r| f(r))
    }

    /// Relative gain `(CP_max - CP_min) / CP_min` along the RIS axis for
    /// one side, location and density.
    pub fn ris_relative_gain(&self, side: f64, location: TxLocation, lambda_o: f64) -> Option<f64> {
        let (lo, hi) = self.ris_extremes(side, location, lambda_o)?;
        Some((hi - lo) / lo)
    }

    /// Absolute gain `CP_max - CP_min` along the RIS axis.
    pub fn ris_absolute_gain(&self, side: f64, location: TxLocation, lambda_o: f64) -> Option<f64> {
        let (lo, hi) = self.ris_extremes(side, location, lambda_o)?;
        Some(hi - lo)
    }

    fn ris_extremes(&self, side: f64, location: TxLocation, lambda_o: f64) -> Option<(f64, f64)> {
        let cps: Vec<f64> = self
            .select(|r| r.side == side && r.location == location && r.lambda_o == lambda_o)
            .map(Self::cp)
            .collect();
        let lo = cps.iter().copied().reduce(f64::min)?;
        let hi = cps.iter().copied().reduce(f64::max)?;
        Some((lo, hi))
    }

    /// First-vs-third location gain for every (side, RIS count, density)
    /// present in the result.
    pub fn location_gains(&self) -> Vec<LocationGain> {
        self.select(|r| r.location == TxLocation::First)
            .filter_map(|first| {
                let third = self
                    .select(|r| {
                        r.location == TxLocation::Third
                            && r.side == first.side
                            && r.ris_per_wall == first.ris_per_wall
                            && r.lambda_o == first.lambda_o
                    })
                    .next()?;
                let (c1, c3) = (Self::cp(first), Self::cp(third));
                Some(LocationGain {
                    side: first.side,
                    ris_per_wall: first.ris_per_wall,
                    lambda_o: first.lambda_o,
                    cp_first: c1,
                    cp_third: c3,
                    relative_gain: (c3 - c1) / c1,
                })
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("side_m,location,tx_x_m,tx_y_m,ris_per_wall,ris_total,lambda_o");
        for name in CoverageBreakdown::FIELD_NAMES {
            write!(out, ",analytic_{name}").unwrap();
        }
        out.push_str(",mc_estimate,mc_ci95_halfwidth,mc_trials");
        for name in CoverageBreakdown::FIELD_NAMES {
            write!(out, ",mc_{name}").unwrap();
        }
        out.push('\n');
        for r in &self.rows {
            write!(
                out,
                "{},{},{},{},{},{},{}",
                num(r.side),
                r.location.label(),
                num(r.tx.x),
                num(r.tx.y),
                r.ris_per_wall,
                r.ris_total(),
                num(r.lambda_o)
            )
            .unwrap();
            push_breakdown(&mut out, r.analytic.as_ref());
            match &r.mc {
                Some(m) => write!(out, ",{},{},{}", num(m.estimate), num(m.ci95_halfwidth), m.counts.trials).unwrap(),
                None => out.push_str(",,,"),
            }
            push_breakdown(&mut out, r.mc.as_ref().map(|m| &m.breakdown));
            out.push('\n');
        }
        out
    }
}

/// Relative CP improvement of the third location over the first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationGain {
    pub side: f64,
    pub ris_per_wall: u32,
    pub lambda_o: f64,
    pub cp_first: f64,
    pub cp_third: f64,
    pub relative_gain: f64,
}

/// Fixed 17-significant-digit float format used by every CSV output.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_breakdown(out: &mut String, b: Option<&CoverageBreakdown>) {
    match b {
        Some(b) => {
            for (_, v) in b.fields() {
                write!(out, ",{}", num(v)).unwrap();
            }
        }
        None => {
            for _ in 0..CoverageBreakdown::FIELD_NAMES.len() {
                out.push(',');
            }
        }
    }
}

/// Analytic CP at every cell centre of a `resolution x resolution` grid of
/// transmitter positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxHeatmap {
    pub side: f64,
    pub resolution: usize,
    pub ris_per_wall: u32,
    pub lambda_o: f64,
    /// Row-major in `iy`, then `ix`.
    pub cells: Vec<HeatCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatCell {
    pub ix: usize,
    pub iy: usize,
    pub tx: Point,
    pub breakdown: CoverageBreakdown,
}

// Quantized coordinate used as a cache key.
fn key(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

pub fn tx_location_heatmap(
    side: f64,
    resolution: usize,
    ris_per_wall: u32,
    lambda_o: f64,
    fixed: &FixedParams,
) -> Result<TxHeatmap> {
    if resolution < 8 {
        return Err(Error::InvalidParameter(format!(
            "heatmap resolution must be >= 8, got {resolution}"
        )));
    }
    let blk = BlockageParams::new(lambda_o, fixed.d_b)?;
    fixed.radio.validate()?;
    let step = side / resolution as f64;
    let centres: Vec<f64> = (0..resolution).map(|i| (i as f64 + 0.5) * step).collect();
    let models = centres
        .iter()
        .flat_map(|&y| centres.iter().map(move |&x| (x, y)))
        .map(|(x, y)| LinkDistanceModel::new(RoomGeometry::new(side, Point::new(x, y))?, ris_per_wall))
        .collect::<Result<Vec<_>>>()?;

    // D_sr depends only on the projection coordinate on the selected wall,
    // and is unchanged under t -> a - t.
    let mut folded: Vec<f64> = models
        .iter()
        .map(|m| {
            let t = m.dsr_frame().along;
            t.min(side - t)
        })
        .collect();
    folded.sort_by(f64::total_cmp);
    folded.dedup_by_key(|t| key(*t));
    let sr_tables: HashMap<i64, CdfTable> = folded
        .par_iter()
        .map(|&t| {
            let law = WallLaw { along: t, side, n: ris_per_wall };
            Ok((key(t), tabulate_dsr_for_law(&law, DEFAULT_GRID_POINTS)?))
        })
        .collect::<Result<_>>()?;

    let breakdowns = models
        .par_iter()
        .map(|m| {
            let t = m.dsr_frame().along;
            let sr = sr_tables[&key(t.min(side - t))].clone();
            let tables = tabulate_link_distributions_with(m, DEFAULT_GRID_POINTS, Some(sr))?;
            Ok(coverage_from_tables(&tables, &blk, &fixed.radio))
        })
        .collect::<Result<Vec<_>>>()?;

    let cells = breakdowns
        .into_iter()
        .enumerate()
        .map(|(i, breakdown)| HeatCell {
            ix: i % resolution,
            iy: i / resolution,
            tx: models[i].room.tx(),
            breakdown,
        })
        .collect();
    Ok(TxHeatmap {
        side,
        resolution,
        ris_per_wall,
        lambda_o,
        cells,
    })
}

impl TxHeatmap {
    pub fn cp(&self, ix: usize, iy: usize) -> f64 {
        self.cells[iy * self.resolution + ix].breakdown.p_cov_total
    }

    pub fn argmax(&self) -> &HeatCell {
        self.cells
            .iter()
            .max_by(|a, b| a.breakdown.p_cov_total.total_cmp(&b.breakdown.p_cov_total))
            .expect("heatmap has cells")
    }

    /// Whether a cell touches a wall and is not a corner cell.
    pub fn is_edge_not_corner(&self, ix: usize, iy: usize) -> bool {
        let last = self.resolution - 1;
        let on_x = ix == 0 || ix == last;
        let on_y = iy == 0 || iy == last;
        on_x != on_y
    }

    /// Largest CP difference between a cell and its image under any of
    /// the eight symmetries of the square.
    pub fn symmetry_defect(&self) -> f64 {
        let last = self.resolution - 1;
        let maps: [fn(usize, usize, usize) -> (usize, usize); 8] = [
            |x, y, _| (x, y),
            |x, y, l| (l - x, y),
            |x, y, l| (x, l - y),
            |x, y, l| (l - x, l - y),
            |x, y, _| (y, x),
            |x, y, l| (l - y, x),
            |x, y, l| (y, l - x),
            |x, y, l| (l - y, l - x),
        ];
        let mut worst = 0.0_f64;
        for c in &self.cells {
            for f in maps {
                let (x, y) = f(c.ix, c.iy, last);
                worst = worst.max((c.breakdown.p_cov_total - self.cp(x, y)).abs());
            }
        }
        worst
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("ix,iy,tx_x_m,tx_y_m");
        for name in CoverageBreakdown::FIELD_NAMES {
            write!(out, ",{name}").unwrap();
        }
        out.push('\n');
        for c in &self.cells {
            write!(out, "{},{},{},{}", c.ix, c.iy, num(c.tx.x), num(c.tx.y)).unwrap();
            push_breakdown(&mut out, Some(&c.breakdown));
            out.push('\n');
        }
        out
    }
}

/// One configuration of the `D_sr` approximation report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DsrConfig {
    pub side: f64,
    pub tx: Point,
    pub ris_per_wall: u32,
}

impl DsrConfig {
    /// `a = 30, tx = (3, 27)`, `a = 30, tx = (15, 15)` and
    /// `a = 40, tx = (15, 15)`, each with 1, 3 and 9 RIS per wall.
    pub fn reference_set() -> Vec<Self> {
        let mut v = Vec::new();
        for (side, tx) in [(30.0, Point::new(3.0, 27.0)), (30.0, Point::new(15.0, 15.0)), (40.0, Point::new(15.0, 15.0))] {
            for n in [1, 3, 9] {
                v.push(Self { side, tx, ris_per_wall: n });
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DsrErrorRow {
    pub config: DsrConfig,
    pub wall: usize,
    /// KS distance to the full simulator (nearest RIS over all walls).
    pub ks_full: f64,
    /// KS distance to a sampler that draws the RIS from the selected wall
    /// only; isolates quadrature error from the wall approximation.
    pub ks_selected_wall: f64,
    pub trials: u64,
}

/// Samples `D_sr` with the RIS taken as the nearest of `n` uniform points on
/// the wall the analytic model selects.
pub fn sample_dsr_selected_wall(model: &LinkDistanceModel, trials: u64, master_seed: u64) -> Vec<f64> {
    let a = model.room.side();
    let tx = model.room.tx();
    let wall = model.dsr_frame().wall;
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_stream(master_seed, i);
            let mut best = (f64::INFINITY, tx);
            for _ in 0..model.n {
                let p = wall.point_at(a, rng.random::<f64>() * a);
                let d = p.distance(tx);
                if d < best.0 {
                    best = (d, p);
                }
            }
            let rx = Point::new(rng.random::<f64>() * a, rng.random::<f64>() * a);
            best.1.distance(rx)
        })
        .collect()
}

pub fn dsr_approx_error_report(configs: &[DsrConfig], fixed: &FixedParams) -> Result<Vec<DsrErrorRow>> {
    configs
        .iter()
        .map(|c| {
            let room = RoomGeometry::new(c.side, c.tx)?;
            let model = LinkDistanceModel::new(room, c.ris_per_wall)?;
            let table = crate::distributions::tabulate_dsr(&model, DEFAULT_GRID_POINTS)?;
            let sim = SimConfig {
                room,
                n: c.ris_per_wall,
                blk: BlockageParams::new(0.0, fixed.d_b)?,
                radio: fixed.radio,
                trials: fixed.trials,
                master_seed: fixed.master_seed,
            };
            let full: Vec<f64> = simulate_outcomes(&sim)?.iter().map(|o| o.d_sr).collect();
            let local = sample_dsr_selected_wall(&model, fixed.trials, fixed.master_seed);
            Ok(DsrErrorRow {
                config: *c,
                wall: model.dsr_frame().wall.index(),
                ks_full: ks_distance(&full, |d| table.eval(d))?,
                ks_selected_wall: ks_distance(&local, |d| table.eval(d))?,
                trials: fixed.trials,
            })
        })
        .collect()
}

pub fn dsr_report_csv(rows: &[DsrErrorRow]) -> String {
    let mut out = String::from("side_m,tx_x_m,tx_y_m,ris_per_wall,wall,ks_full,ks_selected_wall,trials\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            num(r.config.side),
            num(r.config.tx.x),
            num(r.config.tx.y),
            r.config.ris_per_wall,
            r.wall,
            num(r.ks_full),
            num(r.ks_selected_wall),
            r.trials
        )
        .unwrap();
    }
    out
}

/// Direct evaluation of the `D_sr` CDF, bypassing the table.
pub fn dsr_point(config: &DsrConfig, d: f64) -> Result<f64> {
    let model = LinkDistanceModel::new(RoomGeometry::new(config.side, config.tx)?, config.ris_per_wall)?;
    cdf_dsr(&model, d)
}
