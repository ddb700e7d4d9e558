//! Quadrature and tabulated distributions.
//!
//! Everything analytic in the crate eventually flows through [`integrate_1d`]
//! (nested integrals are evaluated inner-to-outer as iterated 1-D integrals)
//! and through the two table types: [`CdfTable`] for distance CDFs and
//! [`PdfTable`] for the densities derived from them.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for a single-level integral.
pub const DEFAULT_REL_TOL: f64 = 1e-6;

/// Default grid resolution for tabulated CDFs.
pub const DEFAULT_GRID_POINTS: usize = 512;

/// Largest decrease tolerated between adjacent samples of a CDF-like function.
pub const MONOTONE_SLACK: f64 = 1e-6;

const ABS_TOL_FLOOR: f64 = 1e-14;
const MAX_SUBINTERVALS: usize = 1000;

// Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

fn checked<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64> {
    let y = f(x);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::NonFinite { x })
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Segment> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = checked(f, center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = checked(f, center - dx)? + checked(f, center + dx)?;
        kronrod += wk * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Ok(Segment {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

/// Adaptive Gauss-Kronrod integration of `f` over `[lo, hi]`.
///
/// Bisects the subinterval with the largest error estimate until the summed
/// estimate meets `rel_tol` relative to the integral (with a tiny absolute
/// floor so integrals of zero terminate).
pub fn integrate_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    integrate_with_breaks(f, lo, hi, &[], rel_tol)
}

/// Same as [`integrate_1d`], but starts from subintervals split at the given
/// interior points. Breakpoints outside `(lo, hi)` are ignored.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    rel_tol: f64,
) -> Result<f64> {
    if !(lo <= hi) {
        return Err(Error::Domain {
            what: "hi - lo",
            value: hi - lo,
            reason: "integration bounds must satisfy lo <= hi",
        });
    }
    if !(rel_tol > 0.0) {
        return Err(Error::Domain {
            what: "rel_tol",
            value: rel_tol,
            reason: "must be positive",
        });
    }
    if lo == hi {
        return Ok(0.0);
    }

    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&b| b > lo && b < hi && b.is_finite())
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::with_capacity(64);
    let mut left = lo;
    for right in cuts.into_iter().chain(std::iter::once(hi)) {
        if right > left {
            heap.push(kronrod15(&f, left, right)?);
        }
        left = right;
    }

    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        if error <= (rel_tol * value.abs()).max(ABS_TOL_FLOOR) || heap.len() >= MAX_SUBINTERVALS {
            // Re-sum in interval order so the result does not depend on heap layout.
            let mut segments = heap.into_vec();
            segments.sort_by(|a, b| a.lo.total_cmp(&b.lo));
            return Ok(segments.iter().map(|s| s.value).sum());
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Interval can no longer be split in floating point.
            heap.push(Segment { error: 0.0, ..worst });
            continue;
        }
        heap.push(kronrod15(&f, worst.lo, mid)?);
        heap.push(kronrod15(&f, mid, worst.hi)?);
    }
}

/// `points` equally spaced values from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (points - 1) as f64;
            (0..points)
                .map(|i| if i == points - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

fn trapezoid(grid: &[f64], ys: impl Iterator<Item = f64>) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (&x, y) in grid.iter().zip(ys) {
        if let Some((px, py)) = prev {
            total += 0.5 * (x - px) * (y + py);
        }
        prev = Some((x, y));
    }
    total
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidTable("grid is empty"));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidTable("grid contains non-finite values"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidTable("grid is not strictly increasing"));
    }
    Ok(())
}

/// Locate `x` on `grid`: index of the left node and the interpolation weight.
fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    let idx = grid.partition_point(|&g| g <= x);
    let i = idx.clamp(1, grid.len() - 1) - 1;
    let w = ((x - grid[i]) / (grid[i + 1] - grid[i])).clamp(0.0, 1.0);
    (i, w)
}

/// Monotone CDF sampled on a strictly increasing distance grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfTable {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl CdfTable {
    /// Builds a table from already-valid values.
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_grid(&grid)?;
        if values.len() != grid.len() {
            return Err(Error::InvalidTable("grid and values differ in length"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidTable("CDF value outside [0, 1]"));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidTable("CDF values decrease"));
        }
        Ok(Self { grid, values })
    }

    /// Builds a table from raw samples of a CDF-like function: values are
    /// clamped to `[0, 1]` and monotonized by running maximum. A drop larger
    /// than [`MONOTONE_SLACK`] is treated as a modelling error, not noise.
    pub fn from_raw(grid: Vec<f64>, raw: Vec<f64>) -> Result<Self> {
        validate_grid(&grid)?;
        if raw.len() != grid.len() {
            return Err(Error::InvalidTable("grid and values differ in length"));
        }
        let mut values = Vec::with_capacity(raw.len());
        let mut running = 0.0_f64;
        for (i, &v) in raw.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { x: grid[i] });
            }
            let v = v.clamp(0.0, 1.0);
            if i > 0 {
                let prev = raw[i - 1].clamp(0.0, 1.0);
                if prev - v > MONOTONE_SLACK {
                    return Err(Error::ModelInconsistency {
                        from: grid[i - 1],
                        to: grid[i],
                        drop: prev - v,
                    });
                }
            }
            running = if i == 0 { v } else { running.max(v) };
            values.push(running);
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Linear interpolation, constant beyond either end of the grid.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if n == 1 || x <= self.grid[0] {
            return self.values[0];
        }
        if x >= self.grid[n - 1] {
            return self.values[n - 1];
        }
        let (i, w) = locate(&self.grid, x);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// Probability mass carried between the first and last grid point.
    pub fn total_mass(&self) -> f64 {
        self.values[self.values.len() - 1] - self.values[0]
    }

    /// Expected value, assuming the table starts at the lower end of the
    /// support and reaches 1 at its last grid point.
    pub fn mean(&self) -> f64 {
        self.grid[0] + trapezoid(&self.grid, self.values.iter().map(|v| 1.0 - v))
    }
}

/// Non-negative density sampled on a strictly increasing distance grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfTable {
    grid: Vec<f64>,
    densities: Vec<f64>,
}

impl PdfTable {
    pub fn new(grid: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        validate_grid(&grid)?;
        if densities.len() != grid.len() {
            return Err(Error::InvalidTable("grid and densities differ in length"));
        }
        if densities.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidTable("density negative or not finite"));
        }
        Ok(Self { grid, densities })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    /// Trapezoidal integral of the density over the whole grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, self.densities.iter().copied())
    }

    /// Trapezoidal integral of `g(x) * f(x)` over the grid.
    pub fn expect<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        trapezoid(
            &self.grid,
            self.grid.iter().zip(&self.densities).map(|(&x, &d)| g(x) * d),
        )
    }

    /// Running trapezoidal integral of the density, as a CDF table.
    pub fn to_cdf(&self) -> CdfTable {
        let mut acc = 0.0;
        let mut values = Vec::with_capacity(self.grid.len());
        for i in 0..self.grid.len() {
            if i > 0 {
                acc += 0.5 * (self.grid[i] - self.grid[i - 1]) * (self.densities[i] + self.densities[i - 1]);
            }
            values.push(acc.min(1.0));
        }
        CdfTable {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Density integrated from the first grid point up to `x`, with the
    /// density linearly interpolated inside the partial cell.
    pub fn mass_below(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if n < 2 || x <= self.grid[0] {
            return 0.0;
        }
        if x >= self.grid[n - 1] {
            return self.integral();
        }
        let (i, w) = locate(&self.grid, x);
        let full = trapezoid(&self.grid[..=i], self.densities[..=i].iter().copied());
        let d_at = self.densities[i] + w * (self.densities[i + 1] - self.densities[i]);
        full + 0.5 * (x - self.grid[i]) * (self.densities[i] + d_at)
    }
}

/// Samples `f` on a uniform grid of `points` nodes over `[lo, hi]`.
pub fn tabulate_cdf<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, points: usize) -> Result<CdfTable> {
    try_tabulate_cdf(|x| Ok(f(x)), lo, hi, points)
}

/// Fallible variant of [`tabulate_cdf`] for CDFs that are themselves
/// computed by quadrature.
pub fn try_tabulate_cdf<F: Fn(f64) -> Result<f64>>(
    f: F,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<CdfTable> {
    if points < 16 {
        return Err(Error::InvalidParameter(format!(
            "CDF tabulation needs at least 16 points, got {points}"
        )));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Domain {
            what: "hi - lo",
            value: hi - lo,
            reason: "tabulation interval must be finite and non-empty",
        });
    }
    let grid = uniform_grid(lo, hi, points);
    let raw = grid.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    CdfTable::from_raw(grid, raw)
}

/// Finite-difference density of a tabulated CDF.
///
/// Central differences inside the grid, one-sided at the ends, clamped at
/// zero and rescaled so the trapezoidal integral equals the CDF's mass.
pub fn pdf_from_cdf(cdf: &CdfTable) -> PdfTable {
    let g = cdf.grid();
    let v = cdf.values();
    let n = g.len();
    if n < 2 {
        return PdfTable {
            grid: g.to_vec(),
            densities: vec![0.0; n],
        };
    }
    let mut densities: Vec<f64> = (0..n)
        .map(|i| {
            let (l, r) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            ((v[r] - v[l]) / (g[r] - g[l])).max(0.0)
        })
        .collect();
    let integral = trapezoid(g, densities.iter().copied());
    let mass = cdf.total_mass();
    if integral > 0.0 {
        let scale = mass / integral;
        densities.iter_mut().for_each(|d| *d *= scale);
    }
    PdfTable {
        grid: g.to_vec(),
        densities,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate_1d(|x| x, 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let cubic = integrate_1d(|x| 4.0 * x * x * x, 0.0, 2.0, 1e-10).unwrap();
        assert!((cubic - 16.0).abs() < 1e-12);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(integrate_1d(|_| 1.0, 2.0, 2.0, 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn exponential_matches_antiderivative() {
        let exact = 1.0 - (-10.0_f64).exp();
        let v = integrate_1d(|x| (-x).exp(), 0.0, 10.0, DEFAULT_REL_TOL).unwrap();
        assert!((v - exact).abs() <= 1e-6 * exact);
        assert!((v - 0.999_954_6).abs() < 1e-7);
    }

    #[test]
    fn kinked_integrand_converges() {
        // |x - 1/3| on [0, 1]: exact 1/18 + 2/9 = 5/18
        let v = integrate_1d(|x| (x - 1.0 / 3.0).abs(), 0.0, 1.0, 1e-9).unwrap();
        assert!((v - 5.0 / 18.0).abs() < 1e-9);
        let b = integrate_with_breaks(|x| (x - 1.0 / 3.0).abs(), 0.0, 1.0, &[1.0 / 3.0], 1e-9)
            .unwrap();
        assert!((b - 5.0 / 18.0).abs() < 1e-14);
    }

    #[test]
    fn non_finite_reports_abscissa() {
        let err = integrate_1d(|x| if x > 0.5 { f64::NAN } else { 1.0 }, 0.0, 1.0, 1e-6)
            .unwrap_err();
        match err {
            Error::NonFinite { x } => assert!(x > 0.5 && x <= 1.0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn reversed_bounds_rejected() {
        assert!(integrate_1d(|x| x, 1.0, 0.0, 1e-6).is_err());
        assert!(integrate_1d(|x| x, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn integration_is_deterministic() {
        let f = |x: f64| (3.0 * x).sin() * (-x).exp() + x.sqrt();
        let a = integrate_1d(f, 0.0, 7.0, 1e-8).unwrap();
        let b = integrate_1d(f, 0.0, 7.0, 1e-8).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn step_cdf_tabulates_to_step() {
        let t = tabulate_cdf(|x| if x >= 1.0 { 1.0 } else { 0.0 }, 0.0, 2.0, 32).unwrap();
        for (&x, &v) in t.grid().iter().zip(t.values()) {
            assert_eq!(v, if x >= 1.0 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn uniform_cdf_tabulates_to_grid() {
        let t = tabulate_cdf(|x| x, 0.0, 1.0, 64).unwrap();
        for (&x, &v) in t.grid().iter().zip(t.values()) {
            assert_eq!(x, v);
        }
        assert_eq!(*t.grid().last().unwrap(), 1.0);
    }

    #[test]
    fn decreasing_function_is_inconsistent() {
        let err = tabulate_cdf(|x| 1.0 - x, 0.0, 1.0, 16).unwrap_err();
        assert!(matches!(err, Error::ModelInconsistency { .. }));
    }

    #[test]
    fn small_noise_is_monotonized() {
        let t = tabulate_cdf(
            |x| (x + if (x * 100.0) as i64 % 2 == 0 { 5e-7 } else { -5e-7 }).clamp(-1.0, 2.0),
            0.0,
            1.0,
            101,
        )
        .unwrap();
        assert!(t.values().windows(2).all(|w| w[1] >= w[0]));
        assert!(t.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn too_few_points_rejected() {
        assert!(tabulate_cdf(|x| x, 0.0, 1.0, 15).is_err());
    }

    #[test]
    fn uniform_density_is_one() {
        let t = tabulate_cdf(|x| x, 0.0, 1.0, 65).unwrap();
        let p = pdf_from_cdf(&t);
        assert!(p.densities().iter().all(|d| (d - 1.0).abs() < 1e-12));
        assert!((p.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_density_is_one_cell() {
        let t = tabulate_cdf(|x| if x >= 1.0 { 1.0 } else { 0.0 }, 0.0, 2.0, 32).unwrap();
        let p = pdf_from_cdf(&t);
        assert!((p.integral() - 1.0).abs() < 1e-12);
        let nonzero = p.densities().iter().filter(|&&d| d > 0.0).count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn quadratic_cdf_density() {
        let a = 10.0;
        let t = tabulate_cdf(|d| d * d / (a * a), 0.0, a, 513).unwrap();
        let p = pdf_from_cdf(&t);
        let mid = p.grid().iter().position(|&x| (x - 5.0).abs() < 1e-9).unwrap();
        assert!((p.densities()[mid] - 0.1).abs() < 1e-3);
        for (&x, &d) in p.grid().iter().zip(p.densities()).skip(1).take(510) {
            assert!((d - 2.0 * x / 100.0).abs() < 1e-3);
        }
    }

    #[test]
    fn mass_below_interpolates() {
        let t = tabulate_cdf(|x| x, 0.0, 1.0, 33).unwrap();
        let p = pdf_from_cdf(&t);
        assert!((p.mass_below(0.3) - 0.3).abs() < 1e-12);
        assert_eq!(p.mass_below(-1.0), 0.0);
        assert!((p.mass_below(5.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn table_mean_of_uniform() {
        let t = tabulate_cdf(|x| x / 4.0, 0.0, 4.0, 17).unwrap();
        assert!((t.mean() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cdf_eval_interpolates_and_clamps() {
        let t = CdfTable::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(t.eval(-3.0), 0.0);
        assert_eq!(t.eval(0.5), 0.25);
        assert_eq!(t.eval(9.0), 1.0);
        assert!(CdfTable::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
        assert!(CdfTable::new(vec![0.0, 1.0], vec![0.6, 0.5]).is_err());
        assert!(CdfTable::new(vec![], vec![]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn pdf_integrates_to_cdf_mass(
                increments in proptest::collection::vec(0.0f64..1.0, 2..80),
                offset in 0.0f64..0.3,
            ) {
                let total: f64 = increments.iter().sum::<f64>().max(1e-9);
                let scale = (1.0 - offset) / total;
                let mut acc = offset;
                let mut values = vec![offset];
                for inc in &increments {
                    acc = (acc + inc * scale).min(1.0);
                    values.push(acc);
                }
                let grid = uniform_grid(0.0, 7.0, values.len());
                let cdf = CdfTable::from_raw(grid, values).unwrap();
                let pdf = pdf_from_cdf(&cdf);
                prop_assert!(pdf.densities().iter().all(|&d| d >= 0.0));
                prop_assert!((pdf.integral() - cdf.total_mass()).abs() <= 1e-3);
            }

            #[test]
            fn noisy_tabulation_is_valid(seed in 0u64..1000, points in 16usize..200) {
                let noise = move |x: f64| {
                    let h = (x * 1e3).to_bits().wrapping_mul(0x9E37_79B9_7F4A_7C15 ^ seed);
                    ((h >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 1e-6
                };
                let cdf = tabulate_cdf(|x| (x / 3.0).min(1.0) + noise(x), 0.0, 4.0, points).unwrap();
                prop_assert!(CdfTable::new(cdf.grid().to_vec(), cdf.values().to_vec()).is_ok());
            }
        }
    }
}
