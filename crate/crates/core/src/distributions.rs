//! Distance laws of the three links: transmitter to nearest RIS (`D_ts`),
//! that RIS to the receiver (`D_sr`) and transmitter to receiver (`D_tr`).
//!
//! `D_ts` is exact: per wall the nearest RIS is a first order statistic of
//! `n` uniform positions, and `D_ts` is the minimum over the four walls.
//!
//! `D_sr` uses the nearest-wall approximation: the selected RIS is assumed to
//! sit on the wall closest to the transmitter (smallest `h`, ties to the
//! lower index) with the unconditioned nearest-on-wall law. In that wall's
//! frame (`u` along the wall, `v` distance from it) the receiver is uniform on
//! the room, so
//!
//! ```text
//! F_sr(d) = 1/a^2 ∫_0^a dv ∫_0^a du  P(|u_s - u| <= sqrt(d^2 - v^2))
//!         = P1 + P2,
//! ```
//!
//! with `P1` the mass where the RIS sits at or beyond the receiver along the
//! wall and `P2` the mass where it sits before it. The innermost integral
//! over the nearest-RIS density is taken in closed form from its CDF.
//!
//! `D_tr` is the area of the disc of radius `d` around the transmitter
//! clipped to the room, divided by `a^2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::geometry::{RoomGeometry, WallId};
use crate::numerics::{
    integrate_with_breaks, pdf_from_cdf, tabulate_cdf, uniform_grid, CdfTable, PdfTable,
    DEFAULT_GRID_POINTS,
};

const DSR_INNER_TOL: f64 = 1e-9;
const DSR_OUTER_TOL: f64 = 1e-8;
const DTR_TOL: f64 = 1e-11;

fn check_along(t: f64, a: f64) -> Result<()> {
    if (0.0..=a).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "projection coordinate",
            value: t,
            reason: "must lie on the wall, within [0, a]",
        })
    }
}

/// CDF of the distance between a uniform point on a wall of length `a` and
/// the fixed wall coordinate `t`.
pub fn cdf_along_wall_distance(t: f64, a: f64, y: f64) -> Result<f64> {
    check_along(t, a)?;
    Ok(WallLaw { along: t, side: a, n: 1 }.along_cdf(y))
}

/// CDF of the distance from wall coordinate `t` to the nearest of `n`
/// uniform points on the wall.
pub fn cdf_nearest_on_wall(t: f64, a: f64, n: u32, r: f64) -> Result<f64> {
    check_along(t, a)?;
    if n == 0 {
        return Err(Error::InvalidParameter("nearest-RIS law needs n >= 1".into()));
    }
    Ok(WallLaw { along: t, side: a, n }.nearest_cdf(r))
}

/// Nearest-RIS law on one wall, seen from along-wall coordinate `along`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallLaw {
    pub along: f64,
    pub side: f64,
    pub n: u32,
}

impl WallLaw {
    /// `P(|X - t| <= y)` for `X ~ U(0, a)`.
    #[inline]
    pub fn along_cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let (t, a) = (self.along, self.side);
        ((a.min(t + y) - (t - y).max(0.0)) / a).clamp(0.0, 1.0)
    }

    /// First order statistic of `n` such distances.
    #[inline]
    pub fn nearest_cdf(&self, r: f64) -> f64 {
        1.0 - (1.0 - self.along_cdf(r)).powi(self.n as i32)
    }

    fn short_side(&self) -> f64 {
        self.along.min(self.side - self.along)
    }

    /// `P(u_s <= x)` for the along-wall position `u_s` of the nearest RIS.
    ///
    /// Given nearest distance `r`, the RIS is at `t - r` or `t + r`; both are
    /// equally likely while `r` is below the shorter side, beyond that only
    /// the longer side is possible.
    #[inline]
    pub fn position_cdf(&self, x: f64) -> f64 {
        let (t, a) = (self.along, self.side);
        if x < 0.0 {
            return 0.0;
        }
        if x >= a {
            return 1.0;
        }
        let m = self.short_side();
        let fm = self.nearest_cdf(m);
        let left_longer = t > a - t;
        // mass strictly beyond distance r on one side
        let beyond = |r: f64, longer: bool| {
            if r <= m {
                0.5 * (fm - self.nearest_cdf(r)) + if longer { 1.0 - fm } else { 0.0 }
            } else if longer {
                1.0 - self.nearest_cdf(r)
            } else {
                0.0
            }
        };
        if x < t {
            beyond(t - x, left_longer)
        } else {
            1.0 - beyond(x - t, !left_longer)
        }
    }

    /// Coordinates where `position_cdf` is not smooth.
    fn kinks(&self) -> [f64; 5] {
        let m = self.short_side();
        [0.0, self.along - m, self.along, self.along + m, self.side]
    }
}

/// Distance from the transmitter to the nearest RIS on wall `w`.
pub fn cdf_wall_link_distance(room: &RoomGeometry, w: WallId, n: u32, d: f64) -> f64 {
    let h = room.h(w);
    if d < h {
        return 0.0;
    }
    let law = WallLaw {
        along: w.along(room.tx()),
        side: room.side(),
        n,
    };
    law.nearest_cdf((d * d - h * h).max(0.0).sqrt())
}

/// Wall with the smallest transmitter distance; ties go to the lower index.
pub fn select_wall_min_h(room: &RoomGeometry) -> WallId {
    let mut best = WallId::W1;
    for w in WallId::ALL {
        if room.h(w) < room.h(best) {
            best = w;
        }
    }
    best
}

/// Wall-local frame used for `D_sr`: `along` is the transmitter's projection
/// on the selected wall and `height` its distance to that wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallFrame {
    pub wall: WallId,
    pub along: f64,
    pub height: f64,
}

/// Room plus RIS count per wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkDistanceModel {
    pub room: RoomGeometry,
    pub n: u32,
}

impl LinkDistanceModel {
    pub fn new(room: RoomGeometry, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "at least one RIS per wall is needed for D_ts / D_sr".into(),
            ));
        }
        Ok(Self { room, n })
    }

    pub fn dsr_frame(&self) -> WallFrame {
        let wall = select_wall_min_h(&self.room);
        WallFrame {
            wall,
            along: wall.along(self.room.tx()),
            height: self.room.h(wall),
        }
    }
}

/// `D_ts` CDF: one minus the product of the per-wall survival functions.
pub fn cdf_dts(model: &LinkDistanceModel, d: f64) -> f64 {
    let survive: f64 = WallId::ALL
        .iter()
        .map(|&w| 1.0 - cdf_wall_link_distance(&model.room, w, model.n, d))
        .product();
    (1.0 - survive).clamp(0.0, 1.0)
}

/// The two halves of the `D_sr` CDF for the RIS law `law` on a wall of the
/// room: `P1` (RIS at or after the receiver along the wall) and `P2`.
pub fn dsr_parts(law: &WallLaw, d: f64) -> Result<(f64, f64)> {
    let p1 = dsr_integral(law, d, |g, u, s| g(u + s) - g(u))?;
    let p2 = dsr_integral(law, d, |g, u, s| g(u) - g(u - s))?;
    Ok((p1, p2))
}

fn dsr_integral<K>(law: &WallLaw, d: f64, kernel: K) -> Result<f64>
where
    K: Fn(&dyn Fn(f64) -> f64, f64, f64) -> f64,
{
    let a = law.side;
    if d <= 0.0 {
        return Ok(0.0);
    }
    let g = |x: f64| law.position_cdf(x);
    let kinks = law.kinks();

    // Inner: over the receiver's along-wall coordinate, for half-width s.
    let inner = |s: f64| -> Result<f64> {
        if s <= 0.0 {
            return Ok(0.0);
        }
        let mut breaks = [0.0; 10];
        for (i, k) in kinks.iter().enumerate() {
            breaks[2 * i] = k - s;
            breaks[2 * i + 1] = k + s;
        }
        integrate_with_breaks(|u| kernel(&g, u, s), 0.0, a, &breaks, DSR_INNER_TOL)
    };

    // Outer: over the receiver's distance from the wall.
    let top = a.min(d);
    let mut breaks = Vec::with_capacity(48);
    let mut push_s = |s: f64| {
        if s > 0.0 && s < d {
            breaks.push((d * d - s * s).sqrt());
        }
    };
    for (i, &ki) in kinks.iter().enumerate() {
        push_s(ki.abs());
        push_s((a - ki).abs());
        for &kj in &kinks[i + 1..] {
            push_s(0.5 * (ki - kj).abs());
            push_s((ki - kj).abs());
        }
    }

    let failure = std::cell::Cell::new(None);
    let outer = integrate_with_breaks(
        |v| {
            let s = (d * d - v * v).max(0.0).sqrt();
            match inner(s) {
                Ok(x) => x,
                Err(e) => {
                    failure.set(Some(e));
                    f64::NAN
                }
            }
        },
        0.0,
        top,
        &breaks,
        DSR_OUTER_TOL,
    );
    if let Some(e) = failure.take() {
        return Err(e.in_stage(format!("D_sr inner integral at d = {d}")));
    }
    Ok(outer.stage(|| format!("D_sr outer integral at d = {d}"))? / (a * a))
}

/// `D_sr` CDF for a RIS law on a wall of a square room, clamped to `[0, 1]`.
pub fn cdf_dsr_for_law(law: &WallLaw, d: f64) -> Result<f64> {
    if d <= 0.0 {
        return Ok(0.0);
    }
    if d >= std::f64::consts::SQRT_2 * law.side {
        return Ok(1.0);
    }
    let total = dsr_integral(law, d, |g, u, s| g(u + s) - g(u - s))?;
    Ok(total.clamp(0.0, 1.0))
}

/// `D_sr` CDF under the nearest-wall approximation.
pub fn cdf_dsr(model: &LinkDistanceModel, d: f64) -> Result<f64> {
    let frame = model.dsr_frame();
    let law = WallLaw {
        along: frame.along,
        side: model.room.side(),
        n: model.n,
    };
    cdf_dsr_for_law(&law, d).stage(|| format!("wall {} frame", frame.wall.index()))
}

/// `D_tr` CDF: disc of radius `d` around the transmitter, clipped to the
/// room, over the room area. Integrated over the receiver's `y`, splitting
/// the `x` extent at the transmitter.
pub fn cdf_dtr(room: &RoomGeometry, d: f64) -> Result<f64> {
    if d <= 0.0 {
        return Ok(0.0);
    }
    let a = room.side();
    let tx = room.tx();
    let far = tx.x.max(a - tx.x).hypot(tx.y.max(a - tx.y));
    if d >= far {
        return Ok(1.0);
    }
    let lo = (tx.y - d).max(0.0);
    let hi = (tx.y + d).min(a);
    let mut breaks = Vec::with_capacity(4);
    for c in [tx.x, a - tx.x] {
        if c < d {
            let dy = (d * d - c * c).sqrt();
            breaks.extend([tx.y - dy, tx.y + dy]);
        }
    }
    let strip = |y: f64| {
        let w = (d * d - (y - tx.y).powi(2)).max(0.0).sqrt();
        let right = a.min(tx.x + w) - tx.x;
        let left = tx.x - (tx.x - w).max(0.0);
        (right + left) / (a * a)
    };
    let v = integrate_with_breaks(strip, lo, hi, &breaks, DTR_TOL).stage(|| format!("D_tr at d = {d}"))?;
    Ok(v.clamp(0.0, 1.0))
}

/// Tabulated CDF and derived density of one link distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkTable {
    pub cdf: CdfTable,
    pub pdf: PdfTable,
}

impl LinkTable {
    pub fn from_cdf(cdf: CdfTable) -> Self {
        let pdf = pdf_from_cdf(&cdf);
        Self { cdf, pdf }
    }
}

/// All three link distance laws for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkDistributions {
    pub ts: LinkTable,
    pub sr: LinkTable,
    pub tr: LinkTable,
}

pub fn tabulate_dts(model: &LinkDistanceModel, points: usize) -> Result<CdfTable> {
    tabulate_cdf(|d| cdf_dts(model, d), 0.0, model.room.diagonal(), points).stage(|| "D_ts table".into())
}

pub fn tabulate_dtr(room: &RoomGeometry, points: usize) -> Result<CdfTable> {
    let grid = uniform_grid(0.0, room.diagonal(), points);
    let raw = grid
        .par_iter()
        .map(|&d| cdf_dtr(room, d))
        .collect::<Result<Vec<_>>>()?;
    CdfTable::from_raw(grid, raw).stage(|| "D_tr table".into())
}

/// `D_sr` table on `[0, 2 sqrt(2) a]`; depends on the room only through the
/// side length and the projection coordinate on the selected wall.
pub fn tabulate_dsr_for_law(law: &WallLaw, points: usize) -> Result<CdfTable> {
    if points < 16 {
        return Err(Error::InvalidParameter(format!(
            "CDF tabulation needs at least 16 points, got {points}"
        )));
    }
    let grid = uniform_grid(0.0, 2.0 * std::f64::consts::SQRT_2 * law.side, points);
    let raw = grid
        .par_iter()
        .map(|&d| cdf_dsr_for_law(law, d))
        .collect::<Result<Vec<_>>>()?;
    CdfTable::from_raw(grid, raw).stage(|| "D_sr table".into())
}

pub fn tabulate_dsr(model: &LinkDistanceModel, points: usize) -> Result<CdfTable> {
    let frame = model.dsr_frame();
    let law = WallLaw {
        along: frame.along,
        side: model.room.side(),
        n: model.n,
    };
    tabulate_dsr_for_law(&law, points).stage(|| format!("wall {} frame", frame.wall.index()))
}

/// Tabulates `D_ts` and `D_tr` on `[0, sqrt(2) a]` and `D_sr` on
/// `[0, 2 sqrt(2) a]`, each with [`DEFAULT_GRID_POINTS`] nodes.
pub fn tabulate_link_distributions(model: &LinkDistanceModel) -> Result<LinkDistributions> {
    tabulate_link_distributions_with(model, DEFAULT_GRID_POINTS, None)
}

/// Like [`tabulate_link_distributions`], optionally reusing an already
/// computed `D_sr` table.
pub fn tabulate_link_distributions_with(
    model: &LinkDistanceModel,
    points: usize,
    sr: Option<CdfTable>,
) -> Result<LinkDistributions> {
    let (sr, (ts, tr)) = rayon::join(
        || match sr {
            Some(t) => Ok(t),
            None => tabulate_dsr(model, points),
        },
        || rayon::join(|| tabulate_dts(model, points), || tabulate_dtr(&model.room, points)),
    );
    Ok(LinkDistributions {
        ts: LinkTable::from_cdf(ts?),
        sr: LinkTable::from_cdf(sr?),
        tr: LinkTable::from_cdf(tr?),
    })
}
