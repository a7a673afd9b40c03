//! The radial cutoff ψ, frequency truncation and Littlewood–Paley blocks.

use super::field::TorusField;
use super::multiplier::apply_symbol;
use num_complex::Complex64;

fn h(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Smooth radial cutoff: 1 on `[0, 1/2]`, 0 on `[1, ∞)`, and the `C^∞`
/// smoothstep `h(1-r) / (h(1-r) + h(r-1/2))`, `h(s) = exp(-1/s)`, between.
pub fn psi(r: f64) -> f64 {
    if r <= 0.5 {
        1.0
    } else if r >= 1.0 {
        0.0
    } else {
        let a = h(1.0 - r);
        a / (a + h(r - 0.5))
    }
}

fn radius(k: [i64; 2]) -> f64 {
    (k[0] as f64).hypot(k[1] as f64)
}

/// `P_{≤λ}`: multiplies `f̂(k)` by `ψ(|k|/λ)`.
pub fn freq_truncate(f: &TorusField, lambda: f64) -> TorusField {
    assert!(lambda > 0.0, "truncation scale must be positive");
    apply_symbol(f, false, |k| Complex64::new(psi(radius(k) / lambda), 0.0))
}

/// Symbol of block `j >= -1`: `ψ(|k|/2)` for `j = -1`,
/// `ψ(|k|/2^{j+2}) - ψ(|k|/2^{j+1})` otherwise. Block `j` lives in
/// `2^j <= |k| <= 2^{j+2}`.
pub fn lp_symbol(j: i32, r: f64) -> f64 {
    if j < 0 {
        psi(r / 2.0)
    } else {
        psi(r / 2f64.powi(j + 2)) - psi(r / 2f64.powi(j + 1))
    }
}

/// Highest block index needed on an `n`-grid: `log2(n) - 1`.
pub fn lp_max_index(n: usize) -> i32 {
    n.trailing_zeros() as i32 - 1
}

/// A single Littlewood–Paley block.
pub fn lp_block(f: &TorusField, j: i32) -> TorusField {
    apply_symbol(f, false, |k| Complex64::new(lp_symbol(j, radius(k)), 0.0))
}

/// Dyadic decomposition `f = Σ_{j=-1}^{J} Δ_j f`.
#[derive(Clone, Debug)]
pub struct LPDecomposition {
    /// `blocks[i]` is `Δ_{i-1} f`.
    pub blocks: Vec<TorusField>,
}

impl LPDecomposition {
    pub fn block(&self, j: i32) -> &TorusField {
        &self.blocks[(j + 1) as usize]
    }

    pub fn reconstruct(&self) -> TorusField {
        let mut sum = TorusField::zeros(self.blocks[0].n());
        for b in &self.blocks {
            sum.axpy(1.0, b);
        }
        sum
    }
}

pub fn lp_decompose(f: &TorusField) -> LPDecomposition {
    let jmax = lp_max_index(f.n());
    LPDecomposition {
        blocks: (-1..=jmax).map(|j| lp_block(f, j)).collect(),
    }
}
