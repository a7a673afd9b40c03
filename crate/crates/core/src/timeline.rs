//! Uniform time grids, space-time fields, the causal mollifier, time
//! derivatives and time-Hölder seminorms.

use crate::error::{invalid, Error, Result};
use crate::spectral::tfld::{
    read_f64, read_header, read_samples, read_u32, write_header, write_samples,
};
use crate::spectral::{norm_with, NormKind, NormOpts, TorusField};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Samples at `t0 + i dt`, `i < count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub count: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, count: usize) -> Result<Self> {
        if !(dt > 0.0) || count < 2 {
            return invalid("time grid needs dt > 0 and at least two samples");
        }
        Ok(Self { t0, dt, count })
    }

    /// Grid covering `[t0, t0 + span]` with step `dt` (rounded to whole steps).
    pub fn covering(t0: f64, span: f64, dt: f64) -> Result<Self> {
        let steps = (span / dt).round().max(1.0) as usize;
        Self::new(t0, dt, steps + 1)
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.count - 1)
    }

    /// Index of the sample nearest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        (((t - self.t0) / self.dt).round().max(0.0) as usize).min(self.count - 1)
    }
}

/// A sequence of fields on a uniform time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    pub grid: TimeGrid,
    pub frames: Vec<TorusField>,
}

impl SpaceTimeField {
    pub fn new(grid: TimeGrid, frames: Vec<TorusField>) -> Result<Self> {
        if frames.len() != grid.count {
            return invalid("frame count does not match the time grid");
        }
        if frames.windows(2).any(|w| w[0].n() != w[1].n()) {
            return invalid("frames must share a grid size");
        }
        Ok(Self { grid, frames })
    }

    pub fn zeros(grid: TimeGrid, n: usize) -> Self {
        Self {
            grid,
            frames: vec![TorusField::zeros(n); grid.count],
        }
    }

    pub fn n(&self) -> usize {
        self.frames[0].n()
    }

    pub fn map(&self, f: impl Fn(&TorusField) -> TorusField) -> Self {
        Self {
            grid: self.grid,
            frames: self.frames.iter().map(f).collect(),
        }
    }

    /// Writes the space-time `TFLD` variant.
    pub fn write_tfld(&self, w: &mut impl Write) -> Result<()> {
        let n = self.n();
        write_header(w, n, (self.frames.len() * n * n * 8) as u64)?;
        w.write_all(&(self.frames.len() as u32).to_le_bytes())?;
        w.write_all(&self.grid.t0.to_le_bytes())?;
        w.write_all(&self.grid.dt.to_le_bytes())?;
        for f in &self.frames {
            write_samples(w, &f.to_physical())?;
        }
        Ok(())
    }

    pub fn read_tfld(r: &mut impl Read) -> Result<Self> {
        let (n, len) = read_header(r)?;
        let count = read_u32(r)? as usize;
        let t0 = read_f64(r)?;
        let dt = read_f64(r)?;
        if len != (count * n * n * 8) as u64 {
            return Err(Error::Format("payload length does not match header".into()));
        }
        let mut frames = Vec::with_capacity(count);
        for _ in 0..count {
            frames.push(TorusField::from_physical(n, &read_samples(r, n * n)?)?);
        }
        Self::new(TimeGrid::new(t0, dt, count)?, frames)
    }
}

/// Smooth bump on `[-2, 2]` with unit integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mollifier {
    pub eps: f64,
}

fn bump_raw(s: f64) -> f64 {
    let u = s / 2.0;
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

fn bump_raw_prime(s: f64) -> f64 {
    let u = s / 2.0;
    if u.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - u * u;
        // d/ds exp(-1/d) = exp(-1/d) * (-2u / d^2) * (1/2)
        (-1.0 / d).exp() * (-u / (d * d))
    }
}

/// `∫_{-2}^{2} exp(-1/(1-(s/2)^2)) ds`, by composite Simpson on a fine mesh.
fn bump_mass() -> f64 {
    static MASS: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    *MASS.get_or_init(|| {
        let m = 200_000;
        let h = 4.0 / m as f64;
        let mut s = 0.0;
        for i in 0..=m {
            let w = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += w * bump_raw(-2.0 + i as f64 * h);
        }
        s * h / 3.0
    })
}

/// Unit-mass profile `ψ0` on `[-2, 2]`.
pub fn psi0(s: f64) -> f64 {
    bump_raw(s) / bump_mass()
}

impl Mollifier {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return invalid("mollifier scale must be positive");
        }
        Ok(Self { eps })
    }

    /// Causal kernel `ψ_ε(r) = ε^{-1} ψ0(r/ε - 2)`, supported in `[0, 4ε]`.
    pub fn kernel(&self, r: f64) -> f64 {
        psi0(r / self.eps - 2.0) / self.eps
    }

    /// `ψ_ε'(r)`.
    pub fn kernel_prime(&self, r: f64) -> f64 {
        bump_raw_prime(r / self.eps - 2.0) / bump_mass() / (self.eps * self.eps)
    }

    fn check(&self, dt: f64) -> Result<usize> {
        if self.eps < 2.0 * dt {
            return Err(Error::MollifierUnderResolved);
        }
        Ok((4.0 * self.eps / dt).ceil() as usize)
    }

    /// Quadrature weights on lags `0, dt, 2dt, ...`, normalised to sum to one.
    pub fn weights(&self, dt: f64) -> Result<Vec<f64>> {
        let m = self.check(dt)?;
        let mut w: Vec<f64> = (0..=m).map(|i| self.kernel(i as f64 * dt) * dt).collect();
        let s: f64 = crate::stats::pairwise_sum(&w);
        w.iter_mut().for_each(|x| *x /= s);
        Ok(w)
    }

    /// Weights for `f * ψ_ε'`, the derivative of the mollified signal,
    /// normalised to differentiate linear signals exactly.
    pub fn derivative_weights(&self, dt: f64) -> Result<Vec<f64>> {
        let m = self.check(dt)?;
        let mut w: Vec<f64> = (0..=m)
            .map(|i| self.kernel_prime(i as f64 * dt) * dt)
            .collect();
        let moment: Vec<f64> = w
            .iter()
            .enumerate()
            .map(|(i, x)| -(i as f64) * dt * x)
            .collect();
        let s = crate::stats::pairwise_sum(&moment);
        w.iter_mut().for_each(|x| *x /= s);
        Ok(w)
    }
}

/// Mollifies a scalar series sampled with step `dt`.
pub fn mollify_series(values: &[f64], dt: f64, m: &Mollifier) -> Result<Vec<f64>> {
    let w = m.weights(dt)?;
    Ok(convolve_series(values, &w))
}

/// `Σ_m w_m f(t_{i-m})`, with `f(t_j) = f(t_0)` for `j < 0`.
fn convolve_series(values: &[f64], w: &[f64]) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            w.iter()
                .enumerate()
                .map(|(m, a)| a * values[i.saturating_sub(m)])
                .sum()
        })
        .collect()
}

/// `f *_t ψ_ε`. The output at `t_i` only reads samples at `t_j <= t_i`.
pub fn mollify(f: &SpaceTimeField, m: &Mollifier) -> Result<SpaceTimeField> {
    let w = m.weights(f.grid.dt)?;
    Ok(convolve_field(f, &w))
}

fn convolve_field(f: &SpaceTimeField, w: &[f64]) -> SpaceTimeField {
    let frames = (0..f.frames.len())
        .map(|i| {
            let mut out = TorusField::zeros(f.n());
            // lags that reach past the left edge all read frame 0
            let edge: f64 = w.iter().skip(i).sum();
            for (m, a) in w.iter().enumerate().take(i) {
                out.axpy(*a, &f.frames[i - m]);
            }
            if edge != 0.0 {
                out.axpy(edge, &f.frames[0]);
            }
            out
        })
        .collect();
    SpaceTimeField {
        grid: f.grid,
        frames,
    }
}

/// Time-derivative schemes.
#[derive(Clone, Debug)]
pub enum TimeDerivative<'a> {
    /// Fourth-order backward differences; the first four samples use the
    /// one-sided stencils on samples `0..5`.
    Fd4,
    /// Derivative of `source * ψ_ε`, evaluated as `source * ψ_ε'`.
    MollifierExact {
        mollifier: Mollifier,
        source: &'a SpaceTimeField,
    },
}

const FD4: [[f64; 5]; 5] = [
    [-25.0, 48.0, -36.0, 16.0, -3.0],
    [-3.0, -10.0, 18.0, -6.0, 1.0],
    [1.0, -8.0, 0.0, 8.0, -1.0],
    [-1.0, 6.0, -18.0, 10.0, 3.0],
    [3.0, -16.0, 36.0, -48.0, 25.0],
];

/// Stencil `(first sample, coefficients)` for sample `i` of `len`.
pub fn fd4_stencil(i: usize, len: usize) -> Result<(usize, &'static [f64; 5])> {
    if len < 5 {
        return Err(Error::TooFewFrames(len));
    }
    Ok(if i >= 4 {
        (i - 4, &FD4[4])
    } else {
        (0, &FD4[i])
    })
}

/// Fourth-order derivative of a scalar series.
pub fn fd4_series(values: &[f64], dt: f64) -> Result<Vec<f64>> {
    (0..values.len())
        .map(|i| {
            let (s, c) = fd4_stencil(i, values.len())?;
            Ok(c.iter()
                .enumerate()
                .map(|(m, a)| a * values[s + m])
                .sum::<f64>()
                / (12.0 * dt))
        })
        .collect()
}

pub fn time_derivative(f: &SpaceTimeField, scheme: &TimeDerivative) -> Result<SpaceTimeField> {
    match scheme {
        TimeDerivative::Fd4 => {
            let len = f.frames.len();
            let dt = f.grid.dt;
            let frames = (0..len)
                .map(|i| {
                    let (s, c) = fd4_stencil(i, len)?;
                    let mut out = TorusField::zeros(f.n());
                    for (m, a) in c.iter().enumerate() {
                        if *a != 0.0 {
                            out.axpy(a / (12.0 * dt), &f.frames[s + m]);
                        }
                    }
                    Ok(out)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SpaceTimeField {
                grid: f.grid,
                frames,
            })
        }
        TimeDerivative::MollifierExact { mollifier, source } => {
            if source.frames.len() < 5 {
                return Err(Error::TooFewFrames(source.frames.len()));
            }
            let w = mollifier.derivative_weights(source.grid.dt)?;
            Ok(convolve_field(source, &w))
        }
    }
}

/// Pairs `(i, j)`, `i < j`, probed by the Hölder estimators over `steps`
/// grid steps: every dyadic separation `2^k` tiled without overlap from the
/// left, plus the full window.
pub fn holder_pairs(steps: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    let mut h = 1;
    while h <= steps {
        let mut s = 0;
        while s + h <= steps {
            pairs.push((s, s + h));
            s += h;
        }
        h *= 2;
    }
    if steps > 0 && !steps.is_power_of_two() {
        pairs.push((0, steps));
    }
    pairs
}

fn window_indices(grid: &TimeGrid, window: (f64, f64)) -> Result<(usize, usize)> {
    let (a, b) = window;
    let tol = 1e-9 * grid.dt;
    if b <= a || a < grid.t0 - tol || b > grid.end() + tol {
        return Err(Error::WindowTooLong);
    }
    let i0 = grid.index_of(a);
    let steps = ((b - a) / grid.dt).round() as usize;
    if i0 + steps >= grid.count + 1 || steps == 0 {
        return Err(Error::WindowTooLong);
    }
    Ok((i0, steps.min(grid.count - 1 - i0)))
}

/// `sup |f(s) - f(s')|_E / |s - s'|^α` over the pairs of [`holder_pairs`]
/// inside `window`.
pub fn time_holder_seminorm(
    f: &SpaceTimeField,
    alpha: f64,
    window: (f64, f64),
    spatial: NormKind,
    opts: NormOpts,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid("Hölder exponent must lie in (0, 1)");
    }
    let (i0, steps) = window_indices(&f.grid, window)?;
    let mut best: f64 = 0.0;
    for (i, j) in holder_pairs(steps) {
        let d = f.frames[i0 + j].sub(&f.frames[i0 + i]);
        let v = norm_with(&d, spatial, opts)? / ((j - i) as f64 * f.grid.dt).powf(alpha);
        best = best.max(v);
    }
    Ok(best)
}

/// Scalar version of [`time_holder_seminorm`].
pub fn series_holder_seminorm(
    values: &[f64],
    grid: &TimeGrid,
    alpha: f64,
    window: (f64, f64),
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid("Hölder exponent must lie in (0, 1)");
    }
    let (i0, steps) = window_indices(grid, window)?;
    Ok(holder_pairs(steps)
        .into_iter()
        .map(|(i, j)| {
            (values[i0 + j] - values[i0 + i]).abs() / ((j - i) as f64 * grid.dt).powf(alpha)
        })
        .fold(0.0, f64::max))
}
