//! Stochastic convolutions `z_t = ∫_0^t exp(-ν(t-s)Λ^γ) Λ^{δ-1} dW_s` for three
//! driver classes, and Monte-Carlo estimates of the noise constant `C_z`.
//!
//! The noise is expanded in the real orthonormal basis
//! `cos(k·x)/(√2 π)`, `sin(k·x)/(√2 π)` over a half-plane of modes
//! `0 < |k| <= K`, each basis function carrying an independent scalar driver.

use crate::error::{invalid, Error, Result};
use crate::sewing::{young_convolution_path, SampledPath};
use crate::spectral::{grid_for_band, norm_with, NormKind, NormOpts, TorusField};
use crate::stats::{bootstrap_indices, Estimate};
use crate::timeline::{time_holder_seminorm, SpaceTimeField, TimeGrid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Wiener,
    Fbm { hurst: f64 },
    FourthMoment { upsilon: f64 },
}

/// How parameter-range violations are treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Admissibility {
    /// Violations are errors.
    Strict,
    /// Violations are reported as warnings.
    #[default]
    Demo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    /// Spatial smoothing exponent.
    pub delta: f64,
    pub gamma: f64,
    pub nu: f64,
    /// Highest driven `|k|`; defaults to a third of the grid Nyquist.
    #[serde(default)]
    pub mode_cutoff: Option<usize>,
    pub seed: u64,
    /// Overall factor on `z`.
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Target spatial regularity `κ` for the admissibility checks.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Target Sobolev index for the fourth-moment class; defaults to `2 + κ`.
    #[serde(default)]
    pub sobolev: Option<f64>,
    #[serde(default)]
    pub admissibility: Admissibility,
}

fn one() -> f64 {
    1.0
}

fn default_kappa() -> f64 {
    0.6
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::wiener(-2.2, 1.0, 0)
    }
}

impl NoiseConfig {
    pub fn wiener(delta: f64, gamma: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Wiener,
            delta,
            gamma,
            nu: 1.0,
            mode_cutoff: None,
            seed,
            amplitude: 1.0,
            kappa: default_kappa(),
            sobolev: None,
            admissibility: Admissibility::Demo,
        }
    }

    pub fn with_kind(mut self, kind: NoiseKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_cutoff(mut self, k: usize) -> Self {
        self.mode_cutoff = Some(k);
        self
    }

    pub fn cutoff(&self, n: usize) -> usize {
        self.mode_cutoff.unwrap_or(n / 6)
    }

    /// The regularity condition for the configured driver, if it fails.
    pub fn range_violation(&self) -> Option<String> {
        let (d, g, k) = (self.delta, self.gamma, self.kappa);
        match self.kind {
            NoiseKind::Wiener => {
                let bound = (-1.0 - k + g / 2.0).min(-1.0);
                (d >= bound)
                    .then(|| format!("δ = {d} must be below {bound} for white-in-time noise"))
            }
            NoiseKind::Fbm { hurst } => {
                let bound = -2.0 - (g.max(k) + g * (1.0 - hurst));
                (d >= bound).then(|| format!("δ = {d} must be below {bound} for fractional noise"))
            }
            NoiseKind::FourthMoment { upsilon } => {
                let sigma = self.sobolev.unwrap_or(2.0 + k);
                let lhs = 4.0 * (d - 1.0) + 4.0 * sigma + (1.0 + upsilon) * g;
                (lhs >= -2.0).then(|| format!("4(δ-1)+4σ+(1+υ)γ = {lhs} must be below -2"))
            }
        }
    }

    /// Validates ranges; returns warnings in demo mode.
    pub fn check(&self) -> Result<Vec<String>> {
        if !(self.gamma > 0.0 && self.gamma < 1.5) {
            return invalid("γ must lie in (0, 3/2)");
        }
        if !(self.nu >= 0.0) {
            return invalid("ν must be non-negative");
        }
        match self.kind {
            NoiseKind::Fbm { hurst } if !(hurst > 0.0 && hurst < 1.0) => {
                return invalid("Hurst index must lie in (0, 1)")
            }
            NoiseKind::FourthMoment { upsilon } if !(upsilon > 0.0 && upsilon <= 1.0) => {
                return invalid("υ must lie in (0, 1]")
            }
            _ => {}
        }
        match (self.range_violation(), self.admissibility) {
            (None, _) => Ok(Vec::new()),
            (Some(msg), Admissibility::Demo) => Ok(vec![msg]),
            (Some(msg), Admissibility::Strict) => Err(Error::Inadmissible(msg)),
        }
    }

    /// Decay rate `ν|k|^γ` of mode `k`.
    pub fn rate(&self, k: [i64; 2]) -> f64 {
        self.nu * mode_norm(k).powf(self.gamma)
    }
}

fn mode_norm(k: [i64; 2]) -> f64 {
    (k[0] as f64).hypot(k[1] as f64)
}

/// Half-plane representatives of `0 < |k| <= cutoff`, ordered by `|k|^2`,
/// then lexicographically.
pub fn driven_modes(cutoff: usize) -> Vec<[i64; 2]> {
    let c = cutoff as i64;
    let mut out = Vec::new();
    for k1 in 0..=c {
        for k2 in -c..=c {
            if (k1 == 0 && k2 <= 0) || k1 * k1 + k2 * k2 > c * c {
                continue;
            }
            out.push([k1, k2]);
        }
    }
    out.sort_by_key(|k| (k[0] * k[0] + k[1] * k[1], k[0], k[1]));
    out
}

/// Independent stream for one mode of one sample.
pub fn mode_rng(seed: u64, sample: u64, mode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((sample << 24) | mode as u64);
    rng
}

/// A sampled stochastic convolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisePath {
    pub config: NoiseConfig,
    pub grid: TimeGrid,
    /// Grid size of materialised frames.
    pub n: usize,
    pub sample: u64,
    pub modes: Vec<[i64; 2]>,
    /// `amplitude |k|^{δ-1}` per mode.
    pub weights: Vec<f64>,
    /// Per mode, the scalar convolutions `[cos, sin]` at every grid time.
    pub series: Vec<Vec<[f64; 2]>>,
    /// Per mode, the driver values `[cos, sin]` at every grid time.
    #[serde(default)]
    pub drivers: Option<Vec<Vec<[f64; 2]>>>,
}

/// `√2 π`: coefficient of `cos(k·x)/(√2π)` at `±k` in our transform.
const BASIS: f64 = std::f64::consts::SQRT_2 * PI;

impl NoisePath {
    pub fn band(&self) -> usize {
        self.modes
            .iter()
            .map(|k| k[0].unsigned_abs().max(k[1].unsigned_abs()) as usize)
            .max()
            .unwrap_or(0)
    }

    /// `z(t_i)` on an `m`-grid.
    pub fn frame_on(&self, i: usize, m: usize) -> TorusField {
        let mut f = TorusField::zeros(m);
        for ((k, w), s) in self.modes.iter().zip(&self.weights).zip(&self.series) {
            let [c, d] = s[i];
            if c != 0.0 || d != 0.0 {
                f.add_real_mode(*k, Complex64::new(c, d) * (w * BASIS));
            }
        }
        f
    }

    /// `z(t_i)` on the configured grid.
    pub fn frame(&self, i: usize) -> TorusField {
        self.frame_on(i, self.n)
    }

    /// `z(t_i)` on the smallest grid that holds it exactly.
    pub fn frame_compact(&self, i: usize) -> TorusField {
        self.frame_on(i, grid_for_band(self.band()).min(self.n))
    }

    pub fn space_time(&self) -> SpaceTimeField {
        SpaceTimeField {
            grid: self.grid,
            frames: (0..self.grid.count).map(|i| self.frame(i)).collect(),
        }
    }

    pub fn space_time_compact(&self) -> SpaceTimeField {
        SpaceTimeField {
            grid: self.grid,
            frames: (0..self.grid.count)
                .map(|i| self.frame_compact(i))
                .collect(),
        }
    }

    /// Same path with `z` multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.config.amplitude *= s;
        out.weights.iter_mut().for_each(|w| *w *= s);
        out
    }
}

fn assemble(
    cfg: &NoiseConfig,
    grid: TimeGrid,
    n: usize,
    sample: u64,
    keep_drivers: bool,
    per_mode: impl Fn(usize, [i64; 2]) -> Result<(Vec<[f64; 2]>, Vec<[f64; 2]>)> + Sync,
) -> Result<NoisePath> {
    cfg.check()?;
    let cutoff = cfg.cutoff(n);
    if cutoff == 0 || 2 * cutoff >= n {
        return invalid("mode cutoff must lie in [1, n/2)");
    }
    let modes = driven_modes(cutoff);
    let weights = modes
        .iter()
        .map(|k| cfg.amplitude * mode_norm(*k).powf(cfg.delta - 1.0))
        .collect();
    let results = modes
        .par_iter()
        .enumerate()
        .map(|(id, k)| per_mode(id, *k))
        .collect::<Result<Vec<_>>>()?;
    let (series, drivers): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(NoisePath {
        config: cfg.clone(),
        grid,
        n,
        sample,
        modes,
        weights,
        series,
        drivers: keep_drivers.then_some(drivers),
    })
}

fn cumulative(incs: impl Iterator<Item = [f64; 2]>, len: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(len);
    let mut acc = [0.0, 0.0];
    out.push(acc);
    for d in incs {
        acc = [acc[0] + d[0], acc[1] + d[1]];
        out.push(acc);
    }
    out
}

/// Exact one-step law of `y' = e^{-r dt} y + η`, `η = ∫_0^{dt} e^{-r(dt-s)} dW_s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuStep {
    pub decay: f64,
    /// `Var η`.
    pub variance: f64,
    /// `Cov(η, W_dt)`.
    pub covariance: f64,
}

/// Exact Ornstein–Uhlenbeck step; `r = 0` degenerates to Brownian increments.
pub fn ou_step(r: f64, dt: f64) -> OuStep {
    if r > 0.0 {
        let x = r * dt;
        OuStep {
            decay: (-x).exp(),
            variance: -(-2.0 * x).exp_m1() / (2.0 * r),
            covariance: -(-x).exp_m1() / r,
        }
    } else {
        OuStep {
            decay: 1.0,
            variance: dt,
            covariance: dt,
        }
    }
}

/// White-in-time noise. Each step samples the exact Ornstein–Uhlenbeck
/// increment jointly with the Brownian increment of the driver.
pub fn gen_wiener_convolution(
    cfg: &NoiseConfig,
    grid: TimeGrid,
    n: usize,
    sample: u64,
    keep_drivers: bool,
) -> Result<NoisePath> {
    if cfg.kind != NoiseKind::Wiener {
        return invalid("configuration is not of white-in-time type");
    }
    let dt = grid.dt;
    let steps = grid.count - 1;
    assemble(cfg, grid, n, sample, keep_drivers, |id, k| {
        let mut rng = mode_rng(cfg.seed, sample, id);
        let r = cfg.rate(k);
        let OuStep {
            decay,
            variance: v_eta,
            covariance: cov,
        } = ou_step(r, dt);
        // regression of ΔW on η and the conditional spread
        let slope = cov / v_eta;
        let resid = (dt - cov * slope).max(0.0).sqrt();
        let mut y = [0.0f64; 2];
        let mut series = Vec::with_capacity(steps + 1);
        let mut incs = Vec::with_capacity(steps);
        series.push(y);
        for _ in 0..steps {
            let mut dw = [0.0; 2];
            for c in 0..2 {
                let e: f64 = v_eta.sqrt() * rng.sample::<f64, _>(StandardNormal);
                let xi: f64 = rng.sample(StandardNormal);
                dw[c] = slope * e + resid * xi;
                y[c] = decay * y[c] + e;
            }
            series.push(y);
            incs.push(dw);
        }
        Ok((series, cumulative(incs.into_iter(), steps + 1)))
    })
}

/// Circulant-embedding eigenvalues for unit-step fractional Gaussian noise of
/// length `m`.
pub fn davies_harte_eigenvalues(hurst: f64, m: usize) -> Result<Vec<f64>> {
    let h2 = 2.0 * hurst;
    let rho = |k: usize| {
        let k = k as f64;
        0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
    };
    let len = 2 * m;
    let mut c: Vec<Complex64> = (0..len)
        .map(|j| Complex64::new(rho(j.min(len - j)), 0.0))
        .collect();
    crate::spectral::fft::plan(len, rustfft::FftDirection::Forward).process(&mut c);
    let top = c.iter().fold(0.0f64, |a, z| a.max(z.re));
    if c.iter().any(|z| z.re < -1e-10 * top) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(c.iter().map(|z| z.re.max(0.0)).collect())
}

/// Two independent fractional Gaussian noise sequences of length `m` with
/// step `dt` from one circulant draw.
pub fn fgn_pair(
    eig: &[f64],
    m: usize,
    hurst: f64,
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>) {
    let len = eig.len();
    let mut w: Vec<Complex64> = eig
        .iter()
        .map(|l| {
            let s = (l / len as f64).sqrt();
            Complex64::new(
                s * rng.sample::<f64, _>(StandardNormal),
                s * rng.sample::<f64, _>(StandardNormal),
            )
        })
        .collect();
    crate::spectral::fft::plan(len, rustfft::FftDirection::Forward).process(&mut w);
    let scale = dt.powf(hurst);
    (
        w[..m].iter().map(|z| z.re * scale).collect(),
        w[..m].iter().map(|z| z.im * scale).collect(),
    )
}

/// Fractional noise; each mode's convolution is the sewing of the
/// convolution germ against the linearly interpolated fBm path.
pub fn gen_fbm_convolution(
    cfg: &NoiseConfig,
    grid: TimeGrid,
    n: usize,
    sample: u64,
    keep_drivers: bool,
) -> Result<NoisePath> {
    let NoiseKind::Fbm { hurst } = cfg.kind else {
        return invalid("configuration is not of fractional type");
    };
    let steps = grid.count - 1;
    let eig = davies_harte_eigenvalues(hurst, steps)?;
    assemble(cfg, grid, n, sample, keep_drivers, |id, k| {
        let mut rng = mode_rng(cfg.seed, sample, id);
        let (a, b) = fgn_pair(&eig, steps, hurst, grid.dt, &mut rng);
        let drivers = cumulative(a.iter().zip(&b).map(|(x, y)| [*x, *y]), steps + 1);
        let rate = cfg.rate(k);
        let conv = |c: usize| {
            let p = SampledPath {
                grid,
                values: drivers.iter().map(|d| d[c]).collect(),
            };
            young_convolution_path(&p, rate)
        };
        let (c0, c1) = (conv(0), conv(1));
        Ok((
            c0.into_iter().zip(c1).map(|(x, y)| [x, y]).collect(),
            drivers,
        ))
    })
}

/// Rademacher walk with increments `±√dt`, convolved by left-point sums.
pub fn gen_fourth_moment_convolution(
    cfg: &NoiseConfig,
    grid: TimeGrid,
    n: usize,
    sample: u64,
    keep_drivers: bool,
) -> Result<NoisePath> {
    let NoiseKind::FourthMoment { upsilon } = cfg.kind else {
        return invalid("configuration is not of fourth-moment type");
    };
    if upsilon != 1.0 {
        return Err(Error::UnsupportedDriver);
    }
    let steps = grid.count - 1;
    let h = grid.dt.sqrt();
    assemble(cfg, grid, n, sample, keep_drivers, |id, k| {
        let mut rng = mode_rng(cfg.seed, sample, id);
        let decay = (-cfg.rate(k) * grid.dt).exp();
        let mut y = [0.0f64; 2];
        let mut series = Vec::with_capacity(steps + 1);
        let mut incs = Vec::with_capacity(steps);
        series.push(y);
        for _ in 0..steps {
            let d = [rademacher(&mut rng) * h, rademacher(&mut rng) * h];
            y = [decay * (y[0] + d[0]), decay * (y[1] + d[1])];
            series.push(y);
            incs.push(d);
        }
        Ok((series, cumulative(incs.into_iter(), steps + 1)))
    })
}

pub fn rademacher(rng: &mut impl Rng) -> f64 {
    if rng.gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Dispatches on the configured driver.
pub fn generate(
    cfg: &NoiseConfig,
    grid: TimeGrid,
    n: usize,
    sample: u64,
    keep_drivers: bool,
) -> Result<NoisePath> {
    match cfg.kind {
        NoiseKind::Wiener => gen_wiener_convolution(cfg, grid, n, sample, keep_drivers),
        NoiseKind::Fbm { .. } => gen_fbm_convolution(cfg, grid, n, sample, keep_drivers),
        NoiseKind::FourthMoment { .. } => {
            gen_fourth_moment_convolution(cfg, grid, n, sample, keep_drivers)
        }
    }
}

/// Moment and regularity parameters of `C_z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub m: u32,
    pub alpha: f64,
    pub kappa: f64,
    pub eps_plus: f64,
    pub samples: usize,
    /// Use every `time_stride`-th frame for the time-dependent norms.
    #[serde(default = "one_usize")]
    pub time_stride: usize,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default)]
    pub bootstrap_seed: u64,
}

fn one_usize() -> usize {
    1
}

fn default_resamples() -> usize {
    1000
}

impl MomentSpec {
    pub fn new(m: u32, alpha: f64, kappa: f64, samples: usize) -> Self {
        Self {
            m,
            alpha,
            kappa,
            eps_plus: 0.05,
            samples,
            time_stride: 1,
            resamples: 1000,
            bootstrap_seed: 0,
        }
    }
}

/// `C_z` with its two summands, each with a bootstrap 95% interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzEstimate {
    pub cz: Estimate,
    pub sup_part: Estimate,
    pub holder_part: Estimate,
    /// Per sample `(sup_t |z_t|_{C^{1+κ}}, sup_window [z]_{C^α C^{1+ε}})`.
    pub per_sample: Vec<(f64, f64)>,
}

/// Start times of the unit windows covering `grid`.
pub fn unit_windows(grid: &TimeGrid) -> Result<Vec<(f64, f64)>> {
    let span = grid.end() - grid.t0;
    if span < 1.0 - 1e-9 {
        return Err(Error::WindowTooShort);
    }
    let last = grid.end() - 1.0;
    let mut starts = Vec::new();
    let mut s = grid.t0;
    while s < last - 1e-9 {
        starts.push(s);
        s += 0.5;
    }
    starts.push(last.max(grid.t0));
    Ok(starts
        .into_iter()
        .map(|s| (s, (s + 1.0).min(grid.end())))
        .collect())
}

/// Per-sample sup norm and time-Hölder seminorm entering `C_z`.
pub fn cz_components(z: &SpaceTimeField, spec: &MomentSpec) -> Result<(f64, f64)> {
    let windows = unit_windows(&z.grid)?;
    let stride = spec.time_stride.max(1);
    let opts = NormOpts::default();
    let idx: Vec<usize> = (0..z.frames.len()).step_by(stride).collect();
    let sup = idx
        .iter()
        .map(|&i| norm_with(&z.frames[i], NormKind::HolderLP(1.0 + spec.kappa), opts))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let thinned = if stride == 1 {
        z.clone()
    } else {
        let grid = TimeGrid {
            t0: z.grid.t0,
            dt: z.grid.dt * stride as f64,
            count: idx.len(),
        };
        SpaceTimeField {
            grid,
            frames: idx.iter().map(|&i| z.frames[i].clone()).collect(),
        }
    };
    let mut holder: f64 = 0.0;
    for w in windows {
        let w = (w.0, w.1.min(thinned.grid.end()));
        holder = holder.max(time_holder_seminorm(
            &thinned,
            spec.alpha,
            w,
            NormKind::HolderLP(1.0 + spec.eps_plus),
            opts,
        )?);
    }
    Ok((sup, holder))
}

fn lp_moment(v: impl Iterator<Item = f64>, p: f64) -> f64 {
    let xs: Vec<f64> = v.map(|x| x.powf(p)).collect();
    crate::stats::mean(&xs).powf(1.0 / p)
}

/// Monte-Carlo `C_z = |z|_{L^{2m} C_loc C^{1+κ}} + [z]_{L^{2m} C^α_loc C^{1+ε}}`.
pub fn estimate_cz(ensemble: &[NoisePath], spec: &MomentSpec) -> Result<CzEstimate> {
    if !(spec.kappa > 0.5) {
        return invalid("κ must exceed 1/2");
    }
    if spec.m < 1 || ensemble.len() < spec.samples.max(1) {
        return invalid("ensemble smaller than the requested sample count");
    }
    let per_sample = ensemble
        .par_iter()
        .map(|p| cz_components(&p.space_time_compact(), spec))
        .collect::<Result<Vec<_>>>()?;
    estimate_cz_from(per_sample, spec)
}

/// [`estimate_cz`] from precomputed per-sample components.
pub fn estimate_cz_from(per_sample: Vec<(f64, f64)>, spec: &MomentSpec) -> Result<CzEstimate> {
    let p = 2.0 * spec.m as f64;
    let n = per_sample.len();
    let boot = |f: &dyn Fn(&[usize]) -> f64| {
        bootstrap_indices(n, f, spec.resamples, 0.95, spec.bootstrap_seed)
    };
    let a = |idx: &[usize]| lp_moment(idx.iter().map(|&i| per_sample[i].0), p);
    let b = |idx: &[usize]| lp_moment(idx.iter().map(|&i| per_sample[i].1), p);
    let sup_part = boot(&a);
    let holder_part = boot(&b);
    let cz = boot(&|idx| a(idx) + b(idx));
    Ok(CzEstimate {
        cz,
        sup_part,
        holder_part,
        per_sample,
    })
}
