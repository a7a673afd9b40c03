//! The convex-integration iteration: initial residual, building blocks,
//! the mollified update and the residual of each iterate.
//!
//! Iterates are held as amplitude series on fixed carriers,
//! `g_{≤n}(t, x) = Σ_c a_c(t, x) cos(c·x)`, with every amplitude of small band.
//! Residuals are computed exactly from this representation (see
//! [`Modulated`]) and assembled on the smallest grid that holds them.

use crate::controls::{sequences, ControlParams};
use crate::error::{invalid, Error, Result};
use crate::noise::NoisePath;
use crate::spectral::{
    apply_multiplier, freq_truncate, grid_for_band, invert_gradient, perp_flux, riesz_odd_1,
    riesz_odd_2, xnorm_parts, Modulated, Multiplier, NormOpts, TorusField,
};
use crate::timeline::{
    fd4_stencil, mollify, mollify_series, time_derivative, Mollifier, SpaceTimeField,
    TimeDerivative, TimeGrid,
};
use num_complex::Complex64;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Carrier directions and the constant `C_0` of the building blocks.
///
/// Direction `j` is the Pythagorean triple `[p, q, h]`, i.e. `l_j = (p, q)/h`,
/// so `5λ l_j` is a lattice point whenever `h` divides `5λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub directions: [[i64; 3]; 2],
    pub c0: f64,
}

impl Default for BlockConfig {
    fn default() -> Self {
        Self {
            directions: [[3, 4, 5], [5, 0, 5]],
            c0: 2.0,
        }
    }
}

impl BlockConfig {
    pub fn new(directions: [[i64; 3]; 2], c0: f64) -> Result<Self> {
        for [p, q, h] in directions {
            if h <= 0 || p * p + q * q != h * h {
                return invalid(format!("({p}, {q})/{h} is not a unit vector"));
            }
        }
        if !(c0 >= 2.0) {
            return invalid("C0 must be at least 2");
        }
        Ok(Self { directions, c0 })
    }

    pub fn with_c0(&self, c0: f64) -> Result<Self> {
        Self::new(self.directions, c0)
    }

    pub fn direction(&self, j: usize) -> [f64; 2] {
        let [p, q, h] = self.directions[j];
        [p as f64 / h as f64, q as f64 / h as f64]
    }

    /// `5λ l_j` on the lattice.
    pub fn carrier(&self, j: usize, lambda: u64) -> Result<[i64; 2]> {
        let [p, q, h] = self.directions[j];
        let s = 5 * lambda as i128;
        if s % h as i128 != 0 {
            return invalid(format!("5λ l_{} is not a lattice point", j + 1));
        }
        let f = s / h as i128;
        Ok([(f * p as i128) as i64, (f * q as i128) as i64])
    }

    /// `(l^⊥·k)(l·k)/|k|^2`: the degree-zero symbol through which the low
    /// frequencies of a block's self-interaction act on its squared amplitude.
    pub fn interaction_symbol(&self, j: usize, k: [f64; 2]) -> f64 {
        let l = self.direction(j);
        let s = k[0] * k[0] + k[1] * k[1];
        (-l[1] * k[0] + l[0] * k[1]) * (l[0] * k[0] + l[1] * k[1]) / s
    }

    /// `max_k |Σ_j m_j(k) R_j^o(k) - 1|` over lattice directions; zero means the
    /// two blocks cancel a residual exactly at leading order.
    pub fn identity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k1 in -24i64..=24 {
            for k2 in -24i64..=24 {
                if k1 == 0 && k2 == 0 {
                    continue;
                }
                let kf = [k1 as f64, k2 as f64];
                let s = self.interaction_symbol(0, kf) * riesz_odd_1([k1, k2])
                    + self.interaction_symbol(1, kf) * riesz_odd_2([k1, k2]);
                worst = worst.max((s - 1.0).abs());
            }
        }
        worst
    }
}

/// `a(t, x) cos(c·x)` on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CarrierSeries {
    pub carrier: [i64; 2],
    pub amp: SpaceTimeField,
}

/// A space-time field stored as amplitude series on fixed carriers.
#[derive(Clone, Debug, PartialEq)]
pub struct Iterate {
    pub grid: TimeGrid,
    pub parts: Vec<CarrierSeries>,
}

impl Iterate {
    pub fn zero(grid: TimeGrid) -> Self {
        Self {
            grid,
            parts: Vec::new(),
        }
    }

    pub fn frame(&self, i: usize) -> Modulated {
        let mut m = Modulated::zero();
        for p in &self.parts {
            m.axpy(1.0, &Modulated::from_amplitude(&p.amp.frames[i], p.carrier));
        }
        m
    }

    /// Frame `i` on an `n`-grid.
    pub fn field(&self, i: usize, n: usize) -> Result<TorusField> {
        self.frame(i).to_field(n)
    }

    /// Largest wavenumber touched at any time.
    pub fn band(&self) -> usize {
        self.parts
            .iter()
            .map(|p| {
                let b = p.amp.frames.iter().map(|f| f.band()).max().unwrap_or(0);
                if p.amp.frames.iter().all(|f| f.l2_norm() == 0.0) {
                    0
                } else {
                    p.carrier[0].unsigned_abs().max(p.carrier[1].unsigned_abs()) as usize + b
                }
            })
            .max()
            .unwrap_or(0)
    }

    pub fn mollify(&self, m: &Mollifier) -> Result<Self> {
        let parts = self
            .parts
            .iter()
            .map(|p| {
                Ok(CarrierSeries {
                    carrier: p.carrier,
                    amp: mollify(&p.amp, m)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            grid: self.grid,
            parts,
        })
    }

    /// Fourth-order time derivative at frame `i`.
    pub fn derivative_at(&self, i: usize) -> Result<Modulated> {
        let (s, c) = fd4_stencil(i, self.grid.count)?;
        let mut m = Modulated::zero();
        for (j, a) in c.iter().enumerate() {
            if *a != 0.0 {
                m.axpy(a / (12.0 * self.grid.dt), &self.frame(s + j));
            }
        }
        Ok(m)
    }

    /// `self + other`, parts on equal carriers added.
    pub fn add(&self, other: &Iterate) -> Result<Self> {
        if self.grid != other.grid {
            return invalid("iterates live on different time grids");
        }
        let mut parts = self.parts.clone();
        for p in &other.parts {
            match parts.iter_mut().find(|q| q.carrier == p.carrier) {
                Some(q) => {
                    for (a, b) in q.amp.frames.iter_mut().zip(&p.amp.frames) {
                        *a = a.add(b);
                    }
                }
                None => parts.push(p.clone()),
            }
        }
        Ok(Self {
            grid: self.grid,
            parts,
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        let parts = self
            .parts
            .iter()
            .map(|p| CarrierSeries {
                carrier: p.carrier,
                amp: p.amp.map(|f| f.scaled(s)),
            })
            .collect();
        Self {
            grid: self.grid,
            parts,
        }
    }
}

/// Which frames get a residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eval {
    All,
    Frames(Vec<usize>),
}

impl Eval {
    /// `count` frames spread evenly over the last unit of time, ending at
    /// the last sample.
    pub fn last_window(grid: &TimeGrid, count: usize) -> Self {
        let last = grid.count - 1;
        let span = ((1.0 / grid.dt).round() as usize).min(last);
        let count = count.max(1);
        let mut v: Vec<usize> = (0..count).map(|i| last - span * i / count.max(1)).collect();
        v.sort_unstable();
        v.dedup();
        Eval::Frames(v)
    }

    fn frames(&self, len: usize) -> Vec<usize> {
        match self {
            Eval::All => (0..len).collect(),
            Eval::Frames(v) => v.iter().copied().filter(|&i| i < len).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeOpts {
    /// Grid whose Nyquist number bounds the reach of every block.
    pub grid: usize,
    pub eval: Eval,
    pub norm: NormOpts,
    /// Radicands below `C0 - 1 - clamp_tol` count as clamp events.
    pub clamp_tol: f64,
}

impl SchemeOpts {
    pub fn new(grid: usize) -> Self {
        Self {
            grid,
            eval: Eval::All,
            norm: NormOpts::default(),
            clamp_tol: 1e-9,
        }
    }

    pub fn with_eval(mut self, eval: Eval) -> Self {
        self.eval = eval;
        self
    }
}

/// Radicand clamping statistics for one level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClampStats {
    pub points: u64,
    pub clamped: u64,
    /// `max |R_j^o q_ℓ| / χ - 1`; non-positive when amplitudes dominate.
    #[serde(with = "crate::stats::extended_f64")]
    pub domination_excess: f64,
}

impl ClampStats {
    pub fn fraction(&self) -> f64 {
        if self.points == 0 {
            0.0
        } else {
            self.clamped as f64 / self.points as f64
        }
    }

    /// A level with more than 0.1% clamped points is not trusted.
    pub fn valid(&self) -> bool {
        self.fraction() <= 1e-3
    }
}

/// State after level `n`.
#[derive(Clone, Debug)]
pub struct IterationState {
    pub level: u32,
    /// `g_{≤n}`.
    pub g: Iterate,
    /// `q_n` at evaluated frames.
    pub q: Vec<Option<TorusField>>,
    /// `‖q_n(t)‖_X` at evaluated frames.
    pub q_xnorm: Vec<Option<f64>>,
    /// `z_n = P_{≤λ_n} z`.
    pub z_trunc: SpaceTimeField,
    /// The newest block `g_n` (absent at level 0).
    pub block: Option<Block>,
    pub clamps: ClampStats,
}

impl IterationState {
    pub fn grid(&self) -> TimeGrid {
        self.g.grid
    }

    /// `q_n` on all frames, or an error when some frame was not evaluated.
    pub fn q_field(&self) -> Result<SpaceTimeField> {
        let frames: Option<Vec<TorusField>> = self.q.iter().cloned().collect();
        let frames =
            frames.ok_or_else(|| Error::Invalid("residual not evaluated at every frame".into()))?;
        let n = frames.iter().map(|f| f.n()).max().unwrap_or(2);
        SpaceTimeField::new(
            self.grid(),
            frames.into_iter().map(|f| f.resize(n)).collect(),
        )
    }

    /// `sup_t ‖q_n(t)‖_X` over the evaluated frames.
    pub fn q_sup(&self) -> f64 {
        self.q_xnorm.iter().flatten().fold(0.0, |m, x| m.max(*x))
    }

    pub fn evaluated(&self) -> Vec<usize> {
        self.q
            .iter()
            .enumerate()
            .filter(|(_, q)| q.is_some())
            .map(|(i, _)| i)
            .collect()
    }
}

fn frames_of(z: &NoisePath, lambda: f64) -> SpaceTimeField {
    let frames = (0..z.grid.count)
        .into_par_iter()
        .map(|i| freq_truncate(&z.frame_compact(i), lambda).compact())
        .collect();
    SpaceTimeField {
        grid: z.grid,
        frames,
    }
}

fn residual_norms(q: &[Option<TorusField>], opts: &SchemeOpts) -> Vec<Option<f64>> {
    q.par_iter()
        .map(|f| f.as_ref().map(|f| xnorm_parts(f, opts.norm).iter().sum()))
        .collect()
}

/// Level 0: `g_{≤0} = 0`, `z_0 = P_{≤λ_0} z` and
/// `q_0 = Δ^{-1}∇·[∇^⊥z_0 Λz_0]`, evaluated at every frame.
pub fn init(z: &NoisePath, cp: &ControlParams, opts: &SchemeOpts) -> Result<IterationState> {
    let z0 = frames_of(z, cp.lambda_f64(0));
    let q: Vec<Option<TorusField>> = z0
        .frames
        .par_iter()
        .map(|f| Some(invert_gradient(&perp_flux(f)).compact()))
        .collect();
    let q_xnorm = residual_norms(&q, opts);
    Ok(IterationState {
        level: 0,
        g: Iterate::zero(z.grid),
        q,
        q_xnorm,
        z_trunc: z0,
        block: None,
        clamps: ClampStats::default(),
    })
}

/// Amplitudes `a_{1,n}, a_{2,n}` with their clamp statistics.
#[derive(Clone, Debug)]
pub struct Amplitudes {
    pub level: u32,
    pub a: [SpaceTimeField; 2],
    /// `χ_{ℓ_n}(t)`.
    pub chi: Vec<f64>,
    pub clamps: ClampStats,
}

fn scale_u64(cp: &ControlParams, n: u32) -> Result<u64> {
    cp.lambda(n)
        .and_then(|l| l.to_u64())
        .ok_or(Error::LevelInfeasible)
}

fn check_feasible(cp: &ControlParams, n: u32, grid: usize) -> Result<()> {
    if !sequences(cp, n, grid)[n as usize].feasible {
        return Err(Error::LevelInfeasible);
    }
    Ok(())
}

/// `a_{j,n} = 2 √(χ/(5λ_n)) P_{≤μ_n} √(C_0 + R_j^o(q_ℓ/χ))` from the mollified
/// residual `q_ℓ = q_{n-1} * ψ_ℓ` and `χ = ‖q_{n-1}‖_X * ψ_ℓ + r_{n-1}`,
/// `ℓ = ℓ_n = 1/λ_n`.
pub fn build_amplitudes(
    state: &IterationState,
    cp: &ControlParams,
    bc: &BlockConfig,
    opts: &SchemeOpts,
) -> Result<Amplitudes> {
    let n = state.level + 1;
    let lambda = cp.lambda_f64(n);
    let mu = cp.ln_mu(n).exp();
    let moll = Mollifier::new(1.0 / lambda)?;
    let q = state.q_field()?;
    let xn: Vec<f64> = state.q_xnorm.iter().map(|x| x.unwrap_or(0.0)).collect();
    let dt = q.grid.dt;
    let q_ell = mollify(&q, &moll)?;
    let r_prev = cp.r(n - 1);
    let chi: Vec<f64> = mollify_series(&xn, dt, &moll)?
        .into_iter()
        .map(|x| x + r_prev)
        .collect();
    let bq = q_ell.frames.iter().map(|f| f.band()).max().unwrap_or(0);
    // Harmonics of the root alias onto `|k| <= μ` only from order 8 on.
    let m = grid_for_band((4 * bq + mu.ceil() as usize).max(4));
    let c0 = bc.c0;
    let tol = opts.clamp_tol;
    let per_frame: Vec<([TorusField; 2], ClampStats)> = q_ell
        .frames
        .par_iter()
        .zip(&chi)
        .map(|(qf, &x)| {
            let mut stats = ClampStats {
                domination_excess: f64::NEG_INFINITY,
                ..Default::default()
            };
            let pref = 2.0 * (x / (5.0 * lambda)).sqrt();
            let a = [1usize, 2].map(|j| {
                let rq = apply_multiplier(qf, &Multiplier::RieszOdd(j))
                    .expect("valid component")
                    .resize(m);
                let vals = rq.to_physical();
                let root: Vec<f64> = vals
                    .iter()
                    .map(|v| {
                        let ratio = v / x;
                        stats.domination_excess = stats.domination_excess.max(ratio.abs() - 1.0);
                        let mut rad = c0 + ratio;
                        if rad < c0 - 1.0 - tol {
                            stats.clamped += 1;
                        }
                        if rad < c0 - 1.0 {
                            rad = c0 - 1.0;
                        }
                        rad.sqrt()
                    })
                    .collect();
                stats.points += vals.len() as u64;
                let s = TorusField::from_physical(m, &root).expect("power-of-two grid");
                freq_truncate(&s, mu).scaled(pref).compact()
            });
            (a, stats)
        })
        .collect();
    let mut clamps = ClampStats {
        domination_excess: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut a1 = Vec::with_capacity(per_frame.len());
    let mut a2 = Vec::with_capacity(per_frame.len());
    for ([x, y], s) in per_frame {
        clamps.points += s.points;
        clamps.clamped += s.clamped;
        clamps.domination_excess = clamps.domination_excess.max(s.domination_excess);
        a1.push(x);
        a2.push(y);
    }
    let unify = |v: Vec<TorusField>| -> Result<SpaceTimeField> {
        let size = v.iter().map(|f| f.n()).max().unwrap_or(2);
        SpaceTimeField::new(q.grid, v.into_iter().map(|f| f.resize(size)).collect())
    };
    Ok(Amplitudes {
        level: n,
        a: [unify(a1)?, unify(a2)?],
        chi,
        clamps,
    })
}

/// The block `g_n = Σ_j a_{j,n} cos(5λ_n l_j·x)`.
#[derive(Clone, Debug)]
pub struct Block {
    pub level: u32,
    pub lambda: u64,
    pub mu: f64,
    pub series: Iterate,
}

impl Block {
    /// Frame `i` on an `n`-grid.
    pub fn field(&self, i: usize, n: usize) -> Result<TorusField> {
        self.series.field(i, n)
    }
}

/// Places the amplitudes on their carriers. Fails with "level infeasible at
/// this grid" when `5λ_n + μ_n` exceeds the Nyquist number of `grid`.
pub fn build_block(
    amps: &Amplitudes,
    cp: &ControlParams,
    bc: &BlockConfig,
    grid: usize,
) -> Result<Block> {
    let n = amps.level;
    check_feasible(cp, n, grid)?;
    let lambda = scale_u64(cp, n)?;
    let mut parts = Vec::new();
    for (j, a) in amps.a.iter().enumerate() {
        let carrier = bc.carrier(j, lambda)?;
        let reach = carrier[0].unsigned_abs().max(carrier[1].unsigned_abs()) as usize
            + a.frames.iter().map(|f| f.band()).max().unwrap_or(0);
        if 2 * reach >= grid {
            return Err(Error::LevelInfeasible);
        }
        parts.push(CarrierSeries {
            carrier,
            amp: a.clone(),
        });
    }
    Ok(Block {
        level: n,
        lambda,
        mu: cp.ln_mu(n).exp(),
        series: Iterate {
            grid: amps.a[0].grid,
            parts,
        },
    })
}

/// Relative spectral mass of `f` outside `lo <= |k| <= hi`.
pub fn annulus_leakage(f: &TorusField, lo: f64, hi: f64) -> f64 {
    let mut outside = 0.0;
    let mut total = 0.0;
    for (k, c) in f.modes() {
        let m = c.norm_sqr();
        total += m;
        let r = (k[0] as f64).hypot(k[1] as f64);
        if r < lo || r > hi {
            outside += m;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        outside / total
    }
}

/// `Δ^{-1}∇·[∇^⊥u Λu]` for a modulated `u`.
pub fn flux_potential(u: &Modulated) -> Modulated {
    let p1 = u.apply(&Multiplier::PerpGrad(1)).expect("valid component");
    let p2 = u.apply(&Multiplier::PerpGrad(2)).expect("valid component");
    let lu = u
        .apply(&Multiplier::LambdaPow(1.0))
        .expect("non-negative power");
    let f = Modulated::products(&[&p1, &p2], &lu);
    let mut q = f[0].apply_symbol(|k| div_symbol(k, 0));
    q.axpy(1.0, &f[1].apply_symbol(|k| div_symbol(k, 1)));
    q
}

fn div_symbol(k: [i64; 2], j: usize) -> Complex64 {
    let s = (k[0] * k[0] + k[1] * k[1]) as f64;
    if s == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(0.0, k[j] as f64 / s)
    }
}

/// The linear part `-Λ^{-1}∂_t g - ν Λ^{γ-1} g`.
fn linear_part(g: &Modulated, dg: &Modulated, nu: f64, gamma: f64) -> Modulated {
    let mut q = dg.apply_symbol(|k| Complex64::new(-inv_norm(k), 0.0));
    if nu != 0.0 {
        q.axpy(
            -nu,
            &g.apply(&Multiplier::LambdaPow(gamma - 1.0)).expect("power"),
        );
    }
    q
}

fn inv_norm(k: [i64; 2]) -> f64 {
    let r = (k[0] as f64).hypot(k[1] as f64);
    if r == 0.0 {
        0.0
    } else {
        1.0 / r
    }
}

/// `q_n` at frame `i` for an iterate held on carriers, mean removed.
pub fn residual_modulated(
    g: &Iterate,
    z_n: &TorusField,
    i: usize,
    nu: f64,
    gamma: f64,
) -> Result<Modulated> {
    let gi = g.frame(i);
    let dg = g.derivative_at(i)?;
    let mut u = gi.clone();
    u.axpy(1.0, &Modulated::from_field(z_n));
    let mut q = flux_potential(&u);
    q.axpy(1.0, &linear_part(&gi, &dg, nu, gamma));
    Ok(q.apply_symbol(|k| {
        if k == [0, 0] {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    }))
}

pub fn residual_frame(
    g: &Iterate,
    z_n: &TorusField,
    i: usize,
    nu: f64,
    gamma: f64,
) -> Result<TorusField> {
    Ok(residual_modulated(g, z_n, i, nu, gamma)?.to_field_compact())
}

/// `q = -Λ^{-1}∂_t g - νΛ^{γ-1}g + Δ^{-1}∇·[∇^⊥(g+z_n) Λ(g+z_n)]` on plain
/// fields; the time derivative is fourth order, products are alias-free.
pub fn compute_residual(
    g_le: &SpaceTimeField,
    z_n: &SpaceTimeField,
    cp: &ControlParams,
) -> Result<SpaceTimeField> {
    if g_le.grid != z_n.grid {
        return invalid("g and z live on different time grids");
    }
    let dg = time_derivative(g_le, &TimeDerivative::Fd4)?;
    let (nu, gamma) = (cp.input.nu, cp.input.gamma);
    let frames = (0..g_le.grid.count)
        .into_par_iter()
        .map(|i| {
            let g = &g_le.frames[i];
            let u = g.add(&z_n.frames[i]);
            let mut q = invert_gradient(&perp_flux(&u));
            let mut lin = apply_multiplier(
                &dg.frames[i].clone().without_mean(),
                &Multiplier::LambdaPow(-1.0),
            )?
            .scaled(-1.0);
            if nu != 0.0 {
                lin.axpy(
                    -nu,
                    &apply_multiplier(
                        &g.clone().without_mean(),
                        &Multiplier::LambdaPow(gamma - 1.0),
                    )?,
                );
            }
            q = q.add(&lin);
            q.remove_mean();
            Ok(q)
        })
        .collect::<Result<Vec<_>>>()?;
    let size = frames.iter().map(|f| f.n()).max().unwrap_or(2);
    SpaceTimeField::new(
        g_le.grid,
        frames.into_iter().map(|f| f.resize(size)).collect(),
    )
}

/// Level `n + 1`: `g_{≤n+1} = g_{≤n} * ψ_ℓ + g_{n+1}` and its residual at the
/// frames selected by `opts.eval`.
pub fn step(
    state: &IterationState,
    cp: &ControlParams,
    bc: &BlockConfig,
    z: &NoisePath,
    opts: &SchemeOpts,
) -> Result<IterationState> {
    let n = state.level + 1;
    check_feasible(cp, n, opts.grid)?;
    if z.grid != state.grid() {
        return invalid("noise and iterate live on different time grids");
    }
    let amps = build_amplitudes(state, cp, bc, opts)?;
    let block = build_block(&amps, cp, bc, opts.grid)?;
    let moll = Mollifier::new(1.0 / cp.lambda_f64(n))?;
    let g = state.g.mollify(&moll)?.add(&block.series)?;
    let z_n = frames_of(z, cp.lambda_f64(n));
    let count = g.grid.count;
    let wanted = opts.eval.frames(count);
    let (nu, gamma) = (cp.input.nu, cp.input.gamma);
    // Sup-norms are refined on the carrier representation when oversampling
    // is requested, since a plain oversampled grid would be four times larger.
    let computed: Vec<(usize, TorusField, f64)> = wanted
        .par_iter()
        .map(|&i| {
            let qm = residual_modulated(&g, &z_n.frames[i], i, nu, gamma)?;
            let f = qm.to_field_compact();
            let x = if opts.norm.oversample {
                qm.xnorm_parts()
            } else {
                xnorm_parts(&f, opts.norm)
            };
            Ok((i, f, x.iter().sum()))
        })
        .collect::<Result<_>>()?;
    let mut q = vec![None; count];
    let mut q_xnorm = vec![None; count];
    for (i, f, x) in computed {
        q[i] = Some(f);
        q_xnorm[i] = Some(x);
    }
    Ok(IterationState {
        level: n,
        g,
        q,
        q_xnorm,
        z_trunc: z_n,
        block: Some(block),
        clamps: amps.clamps,
    })
}

/// Runs `levels` steps after [`init`]; every intermediate level is evaluated
/// at all frames, the last one at `opts.eval`.
pub fn run_levels(
    z: &NoisePath,
    cp: &ControlParams,
    bc: &BlockConfig,
    levels: u32,
    opts: &SchemeOpts,
) -> Result<Vec<IterationState>> {
    let all = SchemeOpts {
        eval: Eval::All,
        ..opts.clone()
    };
    let mut states = vec![init(z, cp, &all)?];
    for n in 1..=levels {
        let o = if n == levels { opts } else { &all };
        let next = step(states.last().expect("nonempty"), cp, bc, z, o)?;
        states.push(next);
    }
    Ok(states)
}
