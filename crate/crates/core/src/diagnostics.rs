//! Error ledger, iteration inequality, weak-form defects and probes.

use crate::controls::{ControlParams, Mode};
use crate::error::{invalid, Error, Result};
use crate::noise::NoisePath;
use crate::scheme::{run_levels, BlockConfig, Iterate, SchemeOpts};
use crate::spectral::{
    apply_multiplier, grid_for_band, norm_with, product, Multiplier, NormKind, NormOpts,
    TorusField, AREA,
};
use crate::stats::Estimate;
use crate::timeline::{SpaceTimeField, TimeGrid};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// The six error terms bounding the next residual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorTerms {
    pub miss: f64,
    pub com: f64,
    pub time: f64,
    pub dis: f64,
    pub trans: f64,
    pub sto: f64,
}

impl ErrorTerms {
    pub const NAMES: [&'static str; 6] = ["miss", "com", "time", "dis", "trans", "sto"];

    pub fn values(&self) -> [f64; 6] {
        [
            self.miss, self.com, self.time, self.dis, self.trans, self.sto,
        ]
    }

    pub fn total(&self) -> f64 {
        self.values().iter().sum()
    }
}

/// `ln S_{N,α}`, `S_{N,α} = Σ_{n=1}^N 4^{N-n} ℓ_n^{-α} r_{n-1}^{1/2}`; `-∞` for `N = 0`.
pub fn ln_sum_dec(cp: &ControlParams, n_max: u32, alpha: f64) -> f64 {
    let logs: Vec<f64> = (1..=n_max)
        .map(|n| (n_max - n) as f64 * 4f64.ln() + alpha * cp.ln_lambda(n) + 0.5 * cp.ln_r(n - 1))
        .collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + logs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn sum_dec(cp: &ControlParams, n_max: u32, alpha: f64) -> f64 {
    ln_sum_dec(cp, n_max, alpha).exp()
}

/// Error terms for level `n >= 1`, built from `λ_{n-1}, λ_n, μ_n, ℓ_n = 1/λ_n`
/// and `r_{n-1}`. Evaluated in log space since `λ_n` is double exponential.
pub fn error_terms(cp: &ControlParams, n: u32, cz: f64) -> Result<ErrorTerms> {
    if n == 0 {
        return invalid("error terms start at level 1");
    }
    let i = &cp.input;
    let (alpha, kappa) = (i.alpha, i.kappa);
    let (lp, ln) = (cp.ln_lambda(n - 1), cp.ln_lambda(n));
    let ln_mu = cp.ln_mu(n);
    let ln_ell = -ln;
    let ln_r = cp.ln_r(n - 1);
    let sa = ln_sum_dec(cp, n - 1, alpha);
    let s0 = ln_sum_dec(cp, n - 1, 0.0);
    let e = f64::exp;
    let miss = (ln_mu * (e(lp - ln_mu) + e(ln_mu - ln)).powi(2) + e(lp - ln)) * e(ln_r);
    let com = ln * e(lp + alpha * ln_ell + sa + s0)
        + ln * (e(0.5 * lp + alpha * ln_ell + sa) + e(0.5 * lp - kappa * lp + s0)) * cz
        + ln * (e(alpha * ln_ell) + e(-kappa * lp)) * cz * cz;
    let time = ln * e(-1.5 * ln + 0.5 * ln_r - ln_ell);
    let dis = ln * i.nu.abs() * e((i.gamma - 1.5) * ln + 0.25 * ln_r);
    let trans = ln * e(0.5 * lp - 0.5 * ln + 0.5 * ln_r + s0);
    let sto = ln * e(-0.5 * ln + 0.5 * ln_r) * cz;
    Ok(ErrorTerms {
        miss,
        com,
        time,
        dis,
        trans,
        sto,
    })
}

/// One level of the ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub level: u32,
    pub ln_lambda: f64,
    pub r: f64,
    /// Absent at level 0.
    pub terms: Option<ErrorTerms>,
    /// `S_{n,α}` and `S_{n,0}`.
    pub s_alpha: f64,
    pub s_zero: f64,
    /// Monte-Carlo estimate of `‖q_n‖`.
    pub measured: Option<Estimate>,
}

impl LedgerRow {
    /// `‖q_n‖ / Σ E_n`, the constant the iteration actually needed.
    pub fn effective_constant(&self) -> Option<f64> {
        Some(self.measured?.value / self.terms?.total())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualLedger {
    pub mode: Mode,
    pub cz: f64,
    pub rows: Vec<LedgerRow>,
}

/// Ledger for levels `0..=levels` with the measured residual norms, one per
/// level where available.
pub fn error_ledger(
    cp: &ControlParams,
    levels: u32,
    cz: f64,
    measured: &[Option<Estimate>],
) -> Result<ResidualLedger> {
    let rows = (0..=levels)
        .map(|n| {
            let terms = if n == 0 {
                None
            } else {
                Some(error_terms(cp, n, cz)?)
            };
            Ok(LedgerRow {
                level: n,
                ln_lambda: cp.ln_lambda(n),
                r: cp.r(n),
                terms,
                s_alpha: sum_dec(cp, n, cp.input.alpha),
                s_zero: sum_dec(cp, n, 0.0),
                measured: measured.get(n as usize).copied().flatten(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ResidualLedger {
        mode: cp.mode,
        cz,
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub level: u32,
    /// `C Σ E_n`.
    pub lhs: f64,
    /// `r_n`.
    pub rhs: f64,
    pub holds: bool,
    /// `lhs / rhs`; below one when the inequality holds.
    pub ratio: f64,
}

/// `C (E^miss + ... + E^sto) <= r_n` per level.
pub fn check_iteration_inequality(ledger: &ResidualLedger, c: f64) -> Result<Vec<InequalityCheck>> {
    if !(c > 1.0) {
        return invalid("the constant C must exceed 1");
    }
    Ok(ledger
        .rows
        .iter()
        .filter_map(|row| {
            let lhs = c * row.terms?.total();
            Some(InequalityCheck {
                level: row.level,
                lhs,
                rhs: row.r,
                holds: lhs <= row.r,
                ratio: lhs / row.r,
            })
        })
        .collect())
}

/// Anything that yields spatial frames on a time grid.
pub trait FrameSource: Sync {
    fn time_grid(&self) -> TimeGrid;
    fn frame_field(&self, i: usize) -> TorusField;
}

impl FrameSource for SpaceTimeField {
    fn time_grid(&self) -> TimeGrid {
        self.grid
    }
    fn frame_field(&self, i: usize) -> TorusField {
        self.frames[i].clone()
    }
}

impl FrameSource for NoisePath {
    fn time_grid(&self) -> TimeGrid {
        self.grid
    }
    fn frame_field(&self, i: usize) -> TorusField {
        self.frame_compact(i)
    }
}

impl FrameSource for Iterate {
    fn time_grid(&self) -> TimeGrid {
        self.grid
    }
    fn frame_field(&self, i: usize) -> TorusField {
        self.frame(i).to_field_compact()
    }
}

/// `ξ(t, x) = η(t) cos(j·x)` with `η` a smooth bump of peak one on
/// `[center - radius, center + radius]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub mode: [i64; 2],
    pub center: f64,
    pub radius: f64,
}

impl TestFunction {
    pub fn new(mode: [i64; 2], center: f64, radius: f64) -> Result<Self> {
        if mode == [0, 0] {
            return invalid("test function mode must be nonzero");
        }
        if !(radius > 0.0) {
            return invalid("test function radius must be positive");
        }
        Ok(Self {
            mode,
            center,
            radius,
        })
    }

    /// Centered in `grid`, covering the middle half of it.
    pub fn centered(mode: [i64; 2], grid: &TimeGrid) -> Result<Self> {
        let span = grid.end() - grid.t0;
        Self::new(mode, grid.t0 + 0.5 * span, 0.25 * span)
    }

    fn s(&self, t: f64) -> f64 {
        (t - self.center) / self.radius
    }

    pub fn eta(&self, t: f64) -> f64 {
        let s = self.s(t);
        if s.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - s * s)).exp()
        }
    }

    pub fn eta_prime(&self, t: f64) -> f64 {
        let s = self.s(t);
        if s.abs() >= 1.0 {
            0.0
        } else {
            -2.0 * s / (1.0 - s * s).powi(2) * self.eta(t) / self.radius
        }
    }

    pub fn wavenumber(&self) -> f64 {
        (self.mode[0] as f64).hypot(self.mode[1] as f64)
    }

    /// `‖ξ‖_{L^1_t Ḣ^4}` by the same quadrature the pairings use.
    pub fn norm_l1_h4(&self, grid: &TimeGrid) -> f64 {
        let l1: f64 = (0..grid.count)
            .map(|i| self.eta(grid.time(i)).abs())
            .sum::<f64>()
            * grid.dt;
        l1 * self.wavenumber().powi(4) * (AREA / 2.0).sqrt()
    }

    fn check_support(&self, grid: &TimeGrid) -> Result<()> {
        if self.center - self.radius < grid.t0 || self.center + self.radius > grid.end() {
            return invalid("test function not supported inside the run");
        }
        Ok(())
    }

    /// Frames where `η` or `η'` is nonzero.
    fn frames(&self, grid: &TimeGrid) -> Vec<usize> {
        (0..grid.count)
            .filter(|&i| self.eta(grid.time(i)) != 0.0)
            .collect()
    }
}

/// `⟨f, cos(j·x)⟩ = Re f̂(j)`.
fn pair_cos(f: &TorusField, j: [i64; 2]) -> f64 {
    f.coeff(j).re
}

/// `⟨Λf, ∇^⊥h·∇φ⟩` for `φ = cos(j·x)` as the Fourier sum
/// `(1/A²) Σ_{k,l} |k| (l_1 k_2 - l_2 k_1) f̂(k) ĥ(l) φ̂(-k-l)`, of which only
/// `l = ±j - k` survive.
pub fn flux_pairing(f: &TorusField, h: &TorusField, j: [i64; 2]) -> f64 {
    let mut s = Complex64::new(0.0, 0.0);
    for (k, c) in f.modes() {
        if c == Complex64::new(0.0, 0.0) || k == [0, 0] {
            continue;
        }
        let cross = (j[0] * k[1] - j[1] * k[0]) as f64;
        if cross == 0.0 {
            continue;
        }
        let kk = (k[0] as f64).hypot(k[1] as f64);
        let d = h.coeff([j[0] - k[0], j[1] - k[1]]) - h.coeff([-j[0] - k[0], -j[1] - k[1]]);
        s += c * d * (kk * cross);
    }
    s.re / (2.0 * AREA)
}

/// The three pairings of the weak formulation against one test function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeakDefect {
    /// `-∫η'⟨Λg, φ⟩`.
    pub time: f64,
    /// `-∫η⟨Λu, ∇^⊥u·∇φ⟩`, `u = g + z`.
    pub flux: f64,
    /// `ν∫η⟨Λ^{γ+1}g, φ⟩`.
    pub dissipation: f64,
}

impl WeakDefect {
    pub fn value(&self) -> f64 {
        self.time + self.flux + self.dissipation
    }

    pub fn abs(&self) -> f64 {
        self.value().abs()
    }
}

fn check_grids(a: &TimeGrid, b: &TimeGrid) -> Result<()> {
    if a != b {
        return invalid("g and z live on different time grids");
    }
    Ok(())
}

/// Defect of `g` in the weak formulation against `ξ`, time integrals by the
/// rectangle rule (exact up to `O(dt^∞)` for the smooth bump).
pub fn weak_residual(
    g: &dyn FrameSource,
    z: &dyn FrameSource,
    xi: &TestFunction,
    nu: f64,
    gamma: f64,
) -> Result<WeakDefect> {
    let grid = g.time_grid();
    check_grids(&grid, &z.time_grid())?;
    xi.check_support(&grid)?;
    let j = xi.mode;
    let kj = xi.wavenumber();
    let parts: Vec<WeakDefect> = xi
        .frames(&grid)
        .into_par_iter()
        .map(|i| {
            let t = grid.time(i);
            let gi = g.frame_field(i);
            let n = gi.n().max(z.frame_field(i).n());
            let u = gi.resize(n).add(&z.frame_field(i).resize(n));
            let gj = pair_cos(&gi, j);
            WeakDefect {
                time: -xi.eta_prime(t) * kj * gj * grid.dt,
                flux: -xi.eta(t) * flux_pairing(&u, &u, j) * grid.dt,
                dissipation: nu * xi.eta(t) * kj.powf(gamma + 1.0) * gj * grid.dt,
            }
        })
        .collect();
    Ok(parts.iter().fold(WeakDefect::default(), |a, p| WeakDefect {
        time: a.time + p.time,
        flux: a.flux + p.flux,
        dissipation: a.dissipation + p.dissipation,
    }))
}

/// `θ = Λ(g + z)`.
pub fn theta_of(g: &TorusField, z: &TorusField) -> TorusField {
    let n = g.n().max(z.n());
    apply_multiplier(&g.resize(n).add(&z.resize(n)), &Multiplier::LambdaPow(1.0))
        .expect("non-negative power")
}

fn inner(a: &TorusField, b: &TorusField) -> f64 {
    let s: f64 = a.modes().map(|(k, c)| (c * b.coeff(k).conj()).re).sum();
    s / AREA
}

/// `½⟨θ, [R^⊥·, ∇φ]θ⟩` for `φ = cos(j·x)`, from physical-space products.
pub fn commutator_form(theta: &TorusField, j: [i64; 2]) -> f64 {
    let band = j[0].unsigned_abs().max(j[1].unsigned_abs()) as usize;
    let phi = TorusField::cos_mode(theta.n().max(grid_for_band(band)), j);
    let grad: Vec<TorusField> = (1..=2)
        .map(|m| apply_multiplier(&phi, &Multiplier::Grad(m)).expect("valid"))
        .collect();
    let mut x = TorusField::zeros(2);
    for (m, gphi) in grad.iter().enumerate() {
        let rp = Multiplier::RieszPerp(m + 1);
        let a = apply_multiplier(&product(theta, gphi), &rp).expect("valid");
        let b = product(gphi, &apply_multiplier(theta, &rp).expect("valid"));
        let n = x.n().max(a.n()).max(b.n());
        x = x.resize(n).add(&a.resize(n)).sub(&b.resize(n));
    }
    0.5 * inner(theta, &x)
}

/// The SQG weak form for `θ = Λ(g + z)` with the linear noise pairing removed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ThetaDefect {
    /// `-∫η'⟨θ,φ⟩ + ∫η ½⟨θ,[R^⊥·,∇φ]θ⟩ + ν∫η⟨Λ^γθ,φ⟩`.
    pub sqg: f64,
    /// `-∫η'⟨Λz,φ⟩ + ν∫η⟨Λ^{γ+1}z,φ⟩`, balanced by the noise.
    pub noise: f64,
}

impl ThetaDefect {
    pub fn value(&self) -> f64 {
        self.sqg - self.noise
    }
}

pub fn theta_transform(
    g: &dyn FrameSource,
    z: &dyn FrameSource,
    xi: &TestFunction,
    nu: f64,
    gamma: f64,
) -> Result<ThetaDefect> {
    let grid = g.time_grid();
    check_grids(&grid, &z.time_grid())?;
    xi.check_support(&grid)?;
    let j = xi.mode;
    let kj = xi.wavenumber();
    let parts: Vec<ThetaDefect> = xi
        .frames(&grid)
        .into_par_iter()
        .map(|i| {
            let t = grid.time(i);
            let (eta, deta) = (xi.eta(t), xi.eta_prime(t));
            let zi = z.frame_field(i);
            let theta = theta_of(&g.frame_field(i), &zi);
            let th = pair_cos(&theta, j);
            let zj = pair_cos(&zi, j);
            ThetaDefect {
                sqg: (-deta * th
                    + eta * commutator_form(&theta, j)
                    + nu * eta * kj.powf(gamma) * th)
                    * grid.dt,
                noise: (-deta * kj * zj + nu * eta * kj.powf(gamma + 1.0) * zj) * grid.dt,
            }
        })
        .collect();
    Ok(parts
        .iter()
        .fold(ThetaDefect::default(), |a, p| ThetaDefect {
            sqg: a.sqg + p.sqg,
            noise: a.noise + p.noise,
        }))
}

/// Which branch of the regularity condition an exponent pair falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    HighSpace,
    HighTime,
}

/// Admissibility of `(ϑ_t, ϑ_x)` and the predicted decay rate `ς` of the
/// level increments, `‖g_{≤n+1} - g_{≤n}‖ ≲ a^{-nς}`.
pub fn regularity_regime(cp: &ControlParams, theta_t: f64, theta_x: f64) -> Result<(Regime, f64)> {
    let (alpha, b, beta) = (cp.input.alpha, cp.b as f64, cp.beta);
    let unit = |x: f64| (0.0..1.0).contains(&x);
    if !unit(theta_t) || !unit(theta_x) || theta_t + theta_x >= 0.5 + beta / (2.0 * b) {
        return Err(Error::OutsideRegularityRange);
    }
    let edge = 0.5 - alpha + beta / (2.0 * b);
    let first = b * (theta_t + theta_x - 0.5) - beta / 2.0;
    if theta_x >= edge {
        if theta_t < alpha - (theta_x - edge) / b {
            let second = b * b * (theta_t - alpha) + b * (theta_x + alpha - 0.5) - beta / 2.0;
            return Ok((Regime::HighSpace, -first.max(second)));
        }
    } else if theta_t < alpha {
        return Ok((Regime::HighTime, -first.max(theta_t - alpha)));
    }
    Err(Error::OutsideRegularityRange)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub regime: Regime,
    pub varsigma: f64,
    /// `[ϑ_t-Hölder quotient of g_{≤n+1} - g_{≤n}]` at spatial order `ϑ_x`, `n = 0, 1, ...`.
    pub increments: Vec<f64>,
    /// Least-squares slope of `ln increment` against `n`.
    pub fitted_slope: Option<f64>,
    /// `-ς ln a`.
    pub predicted_slope: f64,
    pub decays: bool,
}

fn spatial_norm(f: &TorusField, theta_x: f64) -> Result<f64> {
    let kind = if theta_x == 0.0 {
        NormKind::Linf
    } else {
        NormKind::HolderLP(theta_x)
    };
    norm_with(f, kind, NormOpts::default())
}

/// Sup plus `ϑ_t`-Hölder quotient over `frames` of the `C^{ϑ_x}` norm of `f`.
fn increment_norm(
    f: &dyn FrameSource,
    frames: &[usize],
    theta_t: f64,
    theta_x: f64,
) -> Result<f64> {
    let grid = f.time_grid();
    let fields: Vec<TorusField> = frames.iter().map(|&i| f.frame_field(i)).collect();
    let mut best: f64 = 0.0;
    for (a, fa) in fields.iter().enumerate() {
        best = best.max(spatial_norm(fa, theta_x)?);
        if theta_t > 0.0 {
            for (b, fb) in fields.iter().enumerate().skip(a + 1) {
                let n = fa.n().max(fb.n());
                let d = fb.resize(n).sub(&fa.resize(n));
                let dt = (frames[b] as f64 - frames[a] as f64) * grid.dt;
                best = best.max(spatial_norm(&d, theta_x)? / dt.powf(theta_t));
            }
        }
    }
    Ok(best)
}

/// Measures the level increments of the iterates on `frames`.
pub fn regularity_probe(
    iterates: &[Iterate],
    cp: &ControlParams,
    theta_t: f64,
    theta_x: f64,
    frames: &[usize],
) -> Result<RegularityReport> {
    let (regime, varsigma) = regularity_regime(cp, theta_t, theta_x)?;
    let increments = iterates
        .windows(2)
        .map(|w| increment_norm(&w[1].add(&w[0].scaled(-1.0))?, frames, theta_t, theta_x))
        .collect::<Result<Vec<f64>>>()?;
    let fitted_slope = fit_slope(&increments);
    Ok(RegularityReport {
        regime,
        varsigma,
        fitted_slope,
        predicted_slope: -varsigma * cp.ln_a(),
        decays: fitted_slope.is_some_and(|s| s < 0.0),
        increments,
    })
}

fn fit_slope(v: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = v
        .iter()
        .enumerate()
        .filter(|(_, x)| **x > 0.0)
        .map(|(i, x)| (i as f64, x.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonUniquenessReport {
    pub c0: [f64; 2],
    /// `sup_t ‖g^a - g^b‖_{B^{1/2}_{∞,1}}` over the probed frames.
    pub difference: f64,
    pub defects: [f64; 2],
    /// Larger defect over smaller.
    pub defect_ratio: f64,
}

/// Runs the scheme for two values of `C_0` on the same noise path and compares.
#[allow(clippy::too_many_arguments)]
pub fn nonuniqueness_probe(
    z: &NoisePath,
    cp: &ControlParams,
    bc: &BlockConfig,
    c0: [f64; 2],
    levels: u32,
    opts: &SchemeOpts,
    xi: &TestFunction,
    frames: &[usize],
) -> Result<NonUniquenessReport> {
    if c0[0] == c0[1] {
        return invalid("the two C0 values must differ");
    }
    let run = |c: f64| -> Result<Iterate> {
        let b = bc.with_c0(c)?;
        Ok(run_levels(
            z,
            cp,
            &b,
            levels,
            &opts
                .clone()
                .with_eval(crate::scheme::Eval::Frames(Vec::new())),
        )?
        .pop()
        .expect("nonempty")
        .g)
    };
    let (ga, gb) = (run(c0[0])?, run(c0[1])?);
    let diff = ga.add(&gb.scaled(-1.0))?;
    let besov = NormKind::Besov {
        s: 0.5,
        p: f64::INFINITY,
        q: 1.0,
    };
    let mut difference: f64 = 0.0;
    for &i in frames {
        difference = difference.max(norm_with(&diff.frame_field(i), besov, NormOpts::default())?);
    }
    let (nu, gamma) = (cp.input.nu, cp.input.gamma);
    let da = weak_residual(&ga, z, xi, nu, gamma)?.abs();
    let db = weak_residual(&gb, z, xi, nu, gamma)?.abs();
    let ratio = da.max(db) / da.min(db).max(f64::MIN_POSITIVE);
    Ok(NonUniquenessReport {
        c0,
        difference,
        defects: [da, db],
        defect_ratio: ratio,
    })
}

/// One row of the CSV ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub level: u32,
    pub quantity: String,
    pub value: f64,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub target: Option<f64>,
    pub pass: Option<bool>,
}

impl CsvRow {
    fn plain(level: u32, quantity: impl Into<String>, value: f64) -> Self {
        Self {
            level,
            quantity: quantity.into(),
            value,
            ci_lo: None,
            ci_hi: None,
            target: None,
            pass: None,
        }
    }
}

/// Flattens a ledger and its inequality checks; the residual rows pass when
/// the CI upper bound stays below `r_n`.
pub fn ledger_rows(ledger: &ResidualLedger, checks: &[InequalityCheck]) -> Vec<CsvRow> {
    let mut rows = Vec::new();
    for row in &ledger.rows {
        let n = row.level;
        rows.push(CsvRow::plain(n, "r", row.r));
        if let Some(m) = row.measured {
            rows.push(CsvRow {
                level: n,
                quantity: "residual".into(),
                value: m.value,
                ci_lo: Some(m.lo),
                ci_hi: Some(m.hi),
                target: Some(row.r),
                pass: Some(m.hi <= row.r),
            });
        }
        if let Some(t) = row.terms {
            for (name, v) in ErrorTerms::NAMES.iter().zip(t.values()) {
                rows.push(CsvRow::plain(n, format!("E_{name}"), v));
            }
            rows.push(CsvRow::plain(n, "S_alpha", row.s_alpha));
            rows.push(CsvRow::plain(n, "S_zero", row.s_zero));
        }
        if let Some(c) = row.effective_constant() {
            rows.push(CsvRow::plain(n, "effective_constant", c));
        }
    }
    for c in checks {
        rows.push(CsvRow {
            target: Some(c.rhs),
            pass: Some(c.holds),
            ..CsvRow::plain(c.level, "iteration_inequality", c.lhs)
        });
    }
    rows
}

pub fn write_csv(rows: &[CsvRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
