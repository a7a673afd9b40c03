use super::cutoff::{lp_block, lp_max_index};
use super::field::{grid_for_band, physical_on, physical_pair, TorusField, AREA};
use super::multiplier::{apply_multiplier, Multiplier};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Norms on `T^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NormKind {
    Linf,
    /// `B^s_{p,q}`; `p` and `q` may be `f64::INFINITY`.
    Besov {
        s: f64,
        p: f64,
        q: f64,
    },
    /// Hölder norm of non-integer order via `B^s_{∞,∞}`.
    HolderLP(f64),
    /// `(Σ_{k≠0} |k|^{2s} |f̂(k)|^2 / (2π)^2)^{1/2}`, so `Ḣ^0` is the `L^2` norm.
    HdotSobolev(f64),
    /// `‖q‖_∞ + ‖R_1^o q‖_∞ + ‖R_2^o q‖_∞`.
    Xnorm,
}

/// Sampling options for sup-norms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormOpts {
    /// Evaluate on a grid twice as fine as the field's band requires.
    pub oversample: bool,
}

impl Default for NormOpts {
    fn default() -> Self {
        Self { oversample: true }
    }
}

/// Grid on which sup-norms of `f` are sampled.
pub fn sampling_grid(f: &TorusField, opts: NormOpts) -> usize {
    if !opts.oversample {
        return f.n();
    }
    let b = f.band();
    let c = if 2 * b >= f.n() {
        f.n()
    } else {
        grid_for_band(b).min(f.n())
    };
    2 * c
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn linf(f: &TorusField, opts: NormOpts) -> f64 {
    let m = sampling_grid(f, opts);
    max_abs(&physical_on(f, m))
}

fn lp(f: &TorusField, p: f64, opts: NormOpts) -> f64 {
    if p.is_infinite() {
        return linf(f, opts);
    }
    let m = sampling_grid(f, opts);
    let vals = physical_on(f, m);
    let w = AREA / (m * m) as f64;
    (vals.iter().map(|v| v.abs().powf(p)).sum::<f64>() * w).powf(1.0 / p)
}

/// `‖Δ_j f‖_{L^p}` for `j = -1..=J`, skipping blocks beyond the band.
pub fn block_norms(f: &TorusField, p: f64, opts: NormOpts) -> Vec<(i32, f64)> {
    let band = f.band() as f64 * std::f64::consts::SQRT_2;
    let mut out = Vec::new();
    for j in -1..=lp_max_index(f.n()) {
        if j >= 0 && 2f64.powi(j) >= band {
            break;
        }
        let b = lp_block(f, j).compact();
        out.push((j, lp(&b, p, opts)));
    }
    out
}

fn besov(f: &TorusField, s: f64, p: f64, q: f64, opts: NormOpts) -> f64 {
    let terms = block_norms(f, p, opts)
        .into_iter()
        .map(|(j, n)| 2f64.powf(j as f64 * s) * n);
    if q.is_infinite() {
        terms.fold(0.0, f64::max)
    } else {
        terms.map(|t| t.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// `‖f‖_X` together with its three summands.
pub fn xnorm_parts(f: &TorusField, opts: NormOpts) -> [f64; 3] {
    let r1 = apply_multiplier(f, &Multiplier::RieszOdd(1)).expect("valid multiplier");
    let r2 = apply_multiplier(f, &Multiplier::RieszOdd(2)).expect("valid multiplier");
    let m = sampling_grid(f, opts);
    let (a, b) = physical_pair(f, &r1, m);
    let c = physical_on(&r2, m);
    [max_abs(&a), max_abs(&b), max_abs(&c)]
}

pub fn norm_with(f: &TorusField, which: NormKind, opts: NormOpts) -> Result<f64> {
    Ok(match which {
        NormKind::Linf => linf(f, opts),
        NormKind::Besov { s, p, q } => besov(f, s, p, q, opts),
        NormKind::HolderLP(s) => {
            if s.fract() == 0.0 {
                return Err(Error::IntegerHolderOrder);
            }
            besov(f, s, f64::INFINITY, f64::INFINITY, opts)
        }
        NormKind::HdotSobolev(s) => {
            let sum: f64 = f
                .modes()
                .filter(|(k, c)| *k != [0, 0] && c.norm_sqr() > 0.0)
                .map(|(k, c)| ((k[0] * k[0] + k[1] * k[1]) as f64).powf(s) * c.norm_sqr())
                .sum();
            (sum / AREA).sqrt()
        }
        NormKind::Xnorm => xnorm_parts(f, opts).iter().sum(),
    })
}

pub fn norm(f: &TorusField, which: NormKind) -> Result<f64> {
    norm_with(f, which, NormOpts::default())
}
