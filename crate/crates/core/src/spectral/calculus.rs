//! Gradients, their inversion, and alias-free products.

use super::field::{from_physical_pair, grid_for_band, physical_on, physical_pair, TorusField};
use super::multiplier::{apply_multiplier, apply_symbol, Multiplier};
use num_complex::Complex64;

pub fn grad(f: &TorusField) -> [TorusField; 2] {
    [1, 2].map(|j| apply_multiplier(f, &Multiplier::Grad(j)).expect("valid component"))
}

pub fn perp_grad(f: &TorusField) -> [TorusField; 2] {
    [1, 2].map(|j| apply_multiplier(f, &Multiplier::PerpGrad(j)).expect("valid component"))
}

/// `Δ^{-1} ∇·v` after removing the mean of each component, so that
/// `v = ∇q + ∇^⊥p` for some `p`. In this convention `q̂ = i k·v̂ / |k|^2`.
pub fn invert_gradient(v: &[TorusField; 2]) -> TorusField {
    let n = v[0].n().max(v[1].n());
    let a = v[0].resize(n);
    let b = v[1].resize(n);
    let da = apply_symbol(&a, true, |k| div_symbol(k, 0));
    let db = apply_symbol(&b, true, |k| div_symbol(k, 1));
    let mut q = da.add(&db);
    q.remove_mean();
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

/// Grid on which a product of fields with bands `a` and `b` is exact.
pub fn product_grid(a: usize, b: usize) -> usize {
    grid_for_band(a + b)
}

/// Pointwise product, computed without aliasing and kept on the padded grid.
pub fn product(a: &TorusField, b: &TorusField) -> TorusField {
    let (ba, bb) = (a.band(), b.band());
    let m = product_grid(ba, bb);
    let (x, y) = physical_pair(a, b, m);
    let p: Vec<f64> = x.iter().zip(&y).map(|(u, v)| u * v).collect();
    let mut out = TorusField::from_physical(m, &p).expect("grid is a power of two");
    out.truncate_band(ba + bb);
    out
}

/// The flux `∇^⊥u Λu`, exact on the padded grid.
pub fn perp_flux(u: &TorusField) -> [TorusField; 2] {
    let b = u.band();
    let m = product_grid(b, b);
    let [p1, p2] = perp_grad(u);
    let lu = apply_multiplier(u, &Multiplier::LambdaPow(1.0)).expect("non-negative power");
    let (g1, g2) = physical_pair(&p1, &p2, m);
    let l = physical_on(&lu, m);
    let f1: Vec<f64> = g1.iter().zip(&l).map(|(a, c)| a * c).collect();
    let f2: Vec<f64> = g2.iter().zip(&l).map(|(a, c)| a * c).collect();
    let (mut v1, mut v2) = from_physical_pair(m, &f1, &f2);
    v1.truncate_band(2 * b);
    v2.truncate_band(2 * b);
    [v1, v2]
}
