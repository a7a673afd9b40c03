//! Sewing of two-parameter germs by dyadic Riemann sums, Young-type
//! convolutions against sampled paths, and the Schauder estimate check.

use crate::error::{invalid, Error, Result};
use crate::stats::pairwise_sum;
use crate::timeline::TimeGrid;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Relative Cauchy tolerance used by [`sew`].
pub const DEFAULT_TOL: f64 = 1e-9;

/// Default `ε` in the exponent bookkeeping of the convolution germ.
pub const DEFAULT_EPS: f64 = 0.05;

/// A two-parameter germ `A(s, t)` on the simplex over `domain()`.
pub trait Germ: Sync {
    fn eval(&self, s: f64, t: f64) -> f64;
    /// Claimed `(α_g, β_g)`; sewing needs `β_g > 1`.
    fn exponents(&self) -> (f64, f64);
    /// Grid on which the sewn path is reported.
    fn domain(&self) -> TimeGrid;
}

/// A germ given by a closure.
pub struct FnGerm<F> {
    pub f: F,
    pub exponents: (f64, f64),
    pub domain: TimeGrid,
}

impl<F: Fn(f64, f64) -> f64 + Sync> Germ for FnGerm<F> {
    fn eval(&self, s: f64, t: f64) -> f64 {
        (self.f)(s, t)
    }
    fn exponents(&self) -> (f64, f64) {
        self.exponents
    }
    fn domain(&self) -> TimeGrid {
        self.domain
    }
}

/// Scalar path sampled on a grid, linearly interpolated in between.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl SampledPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count {
            return invalid("path length does not match its grid");
        }
        Ok(Self { grid, values })
    }

    pub fn at(&self, t: f64) -> f64 {
        let x = ((t - self.grid.t0) / self.grid.dt).clamp(0.0, (self.grid.count - 1) as f64);
        let i = (x.floor() as usize).min(self.grid.count - 2);
        let f = x - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// `A^t(s, r) = exp(-rate (t - s)) (β_r - β_s)`, whose sewing over `[t0, t]`
/// is `∫ exp(-rate (t - r)) dβ_r`. The path is reported on the cells of `cells`
/// up to `t`.
pub struct ConvolutionGerm<'a> {
    pub beta: &'a (dyn Fn(f64) -> f64 + Sync),
    pub cells: TimeGrid,
    pub rate: f64,
    pub t: f64,
    /// Path regularity used for the claimed exponents.
    pub hurst: f64,
    pub eps: f64,
}

impl Germ for ConvolutionGerm<'_> {
    fn eval(&self, s: f64, r: f64) -> f64 {
        (-self.rate * (self.t - s)).exp() * ((self.beta)(r) - (self.beta)(s))
    }
    fn exponents(&self) -> (f64, f64) {
        (self.hurst, 1.0 + self.eps)
    }
    fn domain(&self) -> TimeGrid {
        let g = self.cells;
        let steps = ((self.t - g.t0) / g.dt).round() as usize;
        TimeGrid {
            t0: g.t0,
            dt: g.dt,
            count: steps + 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SewingResult {
    pub grid: TimeGrid,
    /// `(I A)_t` at the domain grid points; `path[0] = 0`.
    pub path: Vec<f64>,
    /// Measured `‖δA‖_β` over the probe triples.
    pub delta_norm: f64,
    /// Measured constant in `|(I A)_{s,t} - A_{s,t}| <= c ‖δA‖_β |t-s|^β`.
    pub apriori_constant: f64,
    /// Whether every cell met the Cauchy tolerance.
    pub converged: bool,
    /// Deepest refinement used in any cell.
    pub levels_used: usize,
}

/// Columns of the iterated Aitken table kept by [`sew_interval`].
const AITKEN_DEPTH: usize = 3;

/// `(I A)_{s,t}` from dyadic sums with up to `levels` halvings, accelerated
/// by iterated Aitken extrapolation.
///
/// Returns the value, whether the Cauchy tolerance was met, and the depth used.
pub fn sew_interval(
    g: &dyn Germ,
    s: f64,
    t: f64,
    levels: usize,
    tol: f64,
) -> Result<(f64, bool, usize)> {
    if t == s {
        return Ok((0.0, true, 0));
    }
    // differences below this are round-off
    let tol = tol.max(16.0 * f64::EPSILON);
    let mut table: Vec<Vec<f64>> = vec![Vec::with_capacity(levels + 1)];
    let mut scale: f64 = f64::MIN_POSITIVE;
    let mut ratio = 0.0;
    for l in 0..=levels {
        let n = 1usize << l;
        let terms: Vec<f64> = (0..n)
            .map(|i| {
                let a = s + (t - s) * i as f64 / n as f64;
                let b = if i + 1 == n {
                    t
                } else {
                    s + (t - s) * (i + 1) as f64 / n as f64
                };
                g.eval(a, b)
            })
            .collect();
        scale = scale.max(terms.iter().map(|x| x.abs()).sum::<f64>());
        table[0].push(pairwise_sum(&terms));
        for j in 0..AITKEN_DEPTH {
            let col = &table[j];
            let k = col.len();
            if k < 3 {
                break;
            }
            let (d0, d1) = (col[k - 2] - col[k - 3], col[k - 1] - col[k - 2]);
            if j == 0 && d0 != 0.0 {
                ratio = d1 / d0;
            }
            let den = d1 - d0;
            let next = if den != 0.0 && (d1 / d0).abs() < 1.0 {
                col[k - 1] - d1 * d1 / den
            } else {
                col[k - 1]
            };
            if table.len() == j + 1 {
                table.push(Vec::new());
            }
            table[j + 1].push(next);
        }
        let raw = &table[0];
        if raw.len() >= 2 && (raw[raw.len() - 1] - raw[raw.len() - 2]).abs() <= tol * scale {
            return Ok((raw[raw.len() - 1], true, l));
        }
        if let Some(col) = table.iter().rev().find(|c| c.len() >= 2) {
            let k = col.len();
            if table.len() > 1 && (col[k - 1] - col[k - 2]).abs() <= tol * scale {
                return Ok((col[k - 1], true, l));
            }
        }
    }
    if !(ratio.abs() < 1.0) {
        return Err(Error::NotSewable);
    }
    let best = table
        .iter()
        .rev()
        .find(|c| !c.is_empty())
        .and_then(|c| c.last().copied());
    best.map(|v| (v, false, levels)).ok_or(Error::NotSewable)
}

/// Probe intervals on `m` cells: dyadic blocks of cells and the whole domain.
fn probe_intervals(m: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut w = 1;
    while w <= m {
        out.extend((0..m / w).map(|i| (i * w, (i + 1) * w)));
        w *= 2;
    }
    if !m.is_power_of_two() {
        out.push((0, m));
    }
    out
}

/// Sews `g` on every cell of its domain with tolerance [`DEFAULT_TOL`].
pub fn sew(g: &dyn Germ, levels: usize) -> Result<SewingResult> {
    sew_with(g, levels, DEFAULT_TOL)
}

pub fn sew_with(g: &dyn Germ, levels: usize, tol: f64) -> Result<SewingResult> {
    let (_, beta) = g.exponents();
    if !(beta > 1.0) {
        return invalid("germ exponent β must exceed 1");
    }
    if levels < 4 {
        return invalid("sewing needs at least 4 refinement levels");
    }
    let grid = g.domain();
    let m = grid.count - 1;
    let cells = (0..m)
        .into_par_iter()
        .map(|j| sew_interval(g, grid.time(j), grid.time(j + 1), levels, tol))
        .collect::<Result<Vec<_>>>()?;
    let mut path = Vec::with_capacity(grid.count);
    let mut acc = 0.0;
    path.push(0.0);
    for (v, _, _) in &cells {
        acc += v;
        path.push(acc);
    }
    let converged = cells.iter().all(|c| c.1);
    let levels_used = cells.iter().map(|c| c.2).max().unwrap_or(0);

    let probes = probe_intervals(m);
    let mut delta_norm: f64 = 0.0;
    let mut defects = Vec::with_capacity(probes.len());
    for &(a, b) in &probes {
        let (s, t) = (grid.time(a), grid.time(b));
        let u = if b - a >= 2 {
            grid.time(a + (b - a) / 2)
        } else {
            0.5 * (s + t)
        };
        let ast = g.eval(s, t);
        let h = (t - s).powf(beta);
        delta_norm = delta_norm.max((ast - g.eval(s, u) - g.eval(u, t)).abs() / h);
        defects.push(((path[b] - path[a]) - ast).abs() / h);
    }
    let apriori_constant = if delta_norm > 0.0 {
        defects.iter().fold(0.0f64, |c, d| c.max(d / delta_norm))
    } else {
        0.0
    };
    Ok(SewingResult {
        grid,
        path,
        delta_norm,
        apriori_constant,
        converged,
        levels_used,
    })
}

/// `∫_{t0}^t exp(-rate (t - r)) dβ_r` by sewing the convolution germ over
/// the cells of `cells`; `t` must be one of its points.
pub fn young_convolution_fn(
    beta: &(dyn Fn(f64) -> f64 + Sync),
    cells: TimeGrid,
    rate: f64,
    t: f64,
    levels: usize,
) -> Result<f64> {
    let x = (t - cells.t0) / cells.dt;
    if x < -1e-9 || (x - x.round()).abs() > 1e-9 || x.round() as usize >= cells.count {
        return invalid("convolution time must be a grid point of the driver");
    }
    if x.round() == 0.0 {
        return Ok(0.0);
    }
    let germ = ConvolutionGerm {
        beta,
        cells,
        rate,
        t,
        hurst: 0.5,
        eps: DEFAULT_EPS,
    };
    Ok(*sew(&germ, levels)?.path.last().expect("non-empty path"))
}

/// [`young_convolution_fn`] for a sampled driver.
pub fn young_convolution(beta: &SampledPath, rate: f64, t: f64, levels: usize) -> Result<f64> {
    young_convolution_fn(&|r| beta.at(r), beta.grid, rate, t, levels)
}

/// `(1 - e^{-x}) / x`, with the removable singularity filled in.
pub fn phi1(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// The sewn convolution at every grid time. On each cell the driver is
/// linear, so the sewing obeys `y_{m+1} = e^{-x} y_m + φ1(x) Δβ_m`, `x = rate dt`.
pub fn young_convolution_path(beta: &SampledPath, rate: f64) -> Vec<f64> {
    let x = rate * beta.grid.dt;
    let (decay, gain) = ((-x).exp(), phi1(x));
    let mut y = 0.0;
    let mut out = Vec::with_capacity(beta.values.len());
    out.push(0.0);
    for d in beta.increments() {
        y = decay * y + gain * d;
        out.push(y);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchauderReport {
    /// `max |e^{-at} - e^{-as}| / (2^{1-θ} (a (t - s))^θ)`.
    pub max_ratio: f64,
    pub holds: bool,
}

/// Checks `|e^{-at} - e^{-as}| <= 2^{1-θ} (a (t-s))^θ` on every pair.
pub fn check_schauder(a: f64, theta: f64, pairs: &[(f64, f64)]) -> SchauderReport {
    let mut max_ratio: f64 = 0.0;
    for &(s, t) in pairs {
        let lhs = ((-a * t).exp() - (-a * s).exp()).abs();
        if lhs == 0.0 {
            continue;
        }
        let rhs = 2f64.powf(1.0 - theta) * (a * (t - s)).powf(theta);
        max_ratio = max_ratio.max(lhs / rhs);
    }
    SchauderReport {
        max_ratio,
        holds: max_ratio <= 1.0,
    }
}
