//! Room geometry, node sampling and the exact segment-disc blockage test.
//!
//! Walls are numbered 1: `x = 0`, 2: `y = 0`, 3: `x = a`, 4: `y = a`. With
//! this numbering the distance from the transmitter to wall `i` is
//! `h = (x_t, y_t, a - x_t, a - y_t)[i - 1]` and the transmitter's projection
//! onto walls 1 and 3 moves along `y`, onto walls 2 and 4 along `x`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WallId {
    /// `x = 0`
    W1,
    /// `y = 0`
    W2,
    /// `x = a`
    W3,
    /// `y = a`
    W4,
}

impl WallId {
    pub const ALL: [WallId; 4] = [WallId::W1, WallId::W2, WallId::W3, WallId::W4];

    pub fn index(self) -> usize {
        match self {
            WallId::W1 => 1,
            WallId::W2 => 2,
            WallId::W3 => 3,
            WallId::W4 => 4,
        }
    }

    pub fn from_index(index: usize) -> Result<Self> {
        match index {
            1 => Ok(WallId::W1),
            2 => Ok(WallId::W2),
            3 => Ok(WallId::W3),
            4 => Ok(WallId::W4),
            _ => Err(Error::Domain {
                what: "wall index",
                value: index as f64,
                reason: "walls are numbered 1 to 4",
            }),
        }
    }

    /// Point on this wall at along-wall coordinate `u`.
    pub fn point_at(self, side: f64, u: f64) -> Point {
        match self {
            WallId::W1 => Point::new(0.0, u),
            WallId::W2 => Point::new(u, 0.0),
            WallId::W3 => Point::new(side, u),
            WallId::W4 => Point::new(u, side),
        }
    }

    /// Along-wall coordinate of `p` for this wall (`y` for walls 1 and 3,
    /// `x` for walls 2 and 4).
    pub fn along(self, p: Point) -> f64 {
        match self {
            WallId::W1 | WallId::W3 => p.y,
            WallId::W2 | WallId::W4 => p.x,
        }
    }
}

/// Square room of side `a` with the transmitter strictly inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomGeometry {
    side: f64,
    tx: Point,
}

impl RoomGeometry {
    pub fn new(side: f64, tx: Point) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "room side must be positive and finite, got {side}"
            )));
        }
        let inside = |c: f64| c > 0.0 && c < side;
        if !(inside(tx.x) && inside(tx.y)) {
            return Err(Error::InvalidParameter(format!(
                "transmitter ({}, {}) must lie strictly inside the {side} m room",
                tx.x, tx.y
            )));
        }
        Ok(Self { side, tx })
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn tx(&self) -> Point {
        self.tx
    }

    pub fn diagonal(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.side
    }

    /// Perpendicular distance from the transmitter to wall `w`.
    pub fn h(&self, w: WallId) -> f64 {
        match w {
            WallId::W1 => self.tx.x,
            WallId::W2 => self.tx.y,
            WallId::W3 => self.side - self.tx.x,
            WallId::W4 => self.side - self.tx.y,
        }
    }

    pub fn hs(&self) -> [f64; 4] {
        WallId::ALL.map(|w| self.h(w))
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.side).contains(&p.x) && (0.0..=self.side).contains(&p.y)
    }
}

/// Foot of the perpendicular from the transmitter to `w`, and its length.
pub fn wall_projection(room: &RoomGeometry, w: WallId) -> (Point, f64) {
    (w.point_at(room.side(), w.along(room.tx())), room.h(w))
}

/// Disc obstacles of a common diameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleField {
    pub centers: Vec<Point>,
    pub diameter: f64,
}

impl ObstacleField {
    pub fn new(centers: Vec<Point>, diameter: f64) -> Result<Self> {
        if !(diameter > 0.0 && diameter.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "obstacle diameter must be positive, got {diameter}"
            )));
        }
        Ok(Self { centers, diameter })
    }

    pub fn blocks(&self, p: Point, q: Point) -> bool {
        segment_blocked(p, q, self)
    }
}

/// Squared distance from `c` to the closed segment `[p, q]`.
pub fn point_segment_distance_sq(c: Point, p: Point, q: Point) -> f64 {
    let (dx, dy) = (q.x - p.x, q.y - p.y);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq > 0.0 {
        (((c.x - p.x) * dx + (c.y - p.y) * dy) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (p.x + t * dx - c.x, p.y + t * dy - c.y);
    ex * ex + ey * ey
}

/// True iff some obstacle centre lies strictly closer than `d_b / 2` to the
/// closed segment `[p, q]`.
pub fn segment_blocked(p: Point, q: Point, field: &ObstacleField) -> bool {
    let r = 0.5 * field.diameter;
    let r_sq = r * r;
    let (xmin, xmax) = (p.x.min(q.x) - r, p.x.max(q.x) + r);
    let (ymin, ymax) = (p.y.min(q.y) - r, p.y.max(q.y) + r);
    field.centers.iter().any(|&c| {
        c.x > xmin
            && c.x < xmax
            && c.y > ymin
            && c.y < ymax
            && point_segment_distance_sq(c, p, q) < r_sq
    })
}

/// Homogeneous Poisson point process on `[0, a]^2`.
pub fn sample_hppp<R: Rng + ?Sized>(side: f64, density: f64, rng: &mut R) -> Vec<Point> {
    let mean = density * side * side;
    if !(mean > 0.0) {
        return Vec::new();
    }
    let count = Poisson::new(mean)
        .expect("Poisson mean is positive and finite")
        .sample(rng) as usize;
    (0..count)
        .map(|_| Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side))
        .collect()
}

/// `n` RISs on each wall, along-wall positions i.i.d. uniform. Wall order is
/// 1, 2, 3, 4.
pub fn sample_ris_layout<R: Rng + ?Sized>(side: f64, n: usize, rng: &mut R) -> Vec<(WallId, Point)> {
    let mut out = Vec::with_capacity(4 * n);
    for wall in WallId::ALL {
        for _ in 0..n {
            let u = rng.random::<f64>() * side;
            out.push((wall, wall.point_at(side, u)));
        }
    }
    out
}
