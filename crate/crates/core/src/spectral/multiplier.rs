use super::field::{wavenumber, TorusField};
use crate::error::{invalid, Error, Result};
use num_complex::Complex64;

/// Fourier multipliers, written as symbols acting on `f̂(k)`.
///
/// With `f̂(k) = ∫ exp(i x·k) f dx` a derivative `∂_j` has symbol `-i k_j`, so
/// the Riesz transform `R_j = ∂_j Λ^{-1}` has symbol `-i k_j / |k|`. Every
/// homogeneous symbol is set to zero at `k = 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum Multiplier {
    /// `Λ^s`, symbol `|k|^s`.
    LambdaPow(f64),
    /// `R_j = ∂_j Λ^{-1}`.
    Riesz(usize),
    /// Component `j` of `R^⊥ = ∇^⊥ Λ^{-1} = (-R_2, R_1)`.
    RieszPerp(usize),
    /// Odd Riesz-type transforms `R_j^o`.
    RieszOdd(usize),
    /// `∂_j`.
    Grad(usize),
    /// Component `j` of `∇^⊥ = (-∂_2, ∂_1)`.
    PerpGrad(usize),
    /// `Δ^{-1}` on mean-free fields.
    InvLaplace,
    /// Explicit table in the field's FFT order.
    Custom(Vec<Complex64>),
}

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `R_1^o` symbol.
pub fn riesz_odd_1(k: [i64; 2]) -> f64 {
    let (k1, k2) = (k[0] as f64, k[1] as f64);
    let s = k1 * k1 + k2 * k2;
    if s == 0.0 {
        return 0.0;
    }
    25.0 * (k2 * k2 - k1 * k1) / (12.0 * s)
}

/// `R_2^o` symbol.
pub fn riesz_odd_2(k: [i64; 2]) -> f64 {
    let (k1, k2) = (k[0] as f64, k[1] as f64);
    let s = k1 * k1 + k2 * k2;
    if s == 0.0 {
        return 0.0;
    }
    7.0 * (k2 * k2 - k1 * k1) / (12.0 * s) + 4.0 * k1 * k2 / s
}

fn check_component(j: usize) -> Result<()> {
    if j == 1 || j == 2 {
        Ok(())
    } else {
        invalid(format!("component index {j} must be 1 or 2"))
    }
}

impl Multiplier {
    /// Symbol at `k`. `Custom` tables have no closed form and return zero.
    pub fn symbol(&self, k: [i64; 2]) -> Complex64 {
        let (k1, k2) = (k[0] as f64, k[1] as f64);
        let r = k1.hypot(k2);
        let zero = Complex64::new(0.0, 0.0);
        match *self {
            Multiplier::LambdaPow(s) => {
                if r == 0.0 {
                    if s == 0.0 {
                        Complex64::new(1.0, 0.0)
                    } else {
                        zero
                    }
                } else {
                    Complex64::new(r.powf(s), 0.0)
                }
            }
            Multiplier::Riesz(j) => {
                if r == 0.0 {
                    zero
                } else {
                    -I * k[j - 1] as f64 / r
                }
            }
            Multiplier::RieszPerp(j) => {
                if r == 0.0 {
                    zero
                } else if j == 1 {
                    I * k2 / r
                } else {
                    -I * k1 / r
                }
            }
            Multiplier::RieszOdd(j) => Complex64::new(
                if j == 1 {
                    riesz_odd_1(k)
                } else {
                    riesz_odd_2(k)
                },
                0.0,
            ),
            Multiplier::Grad(j) => -I * k[j - 1] as f64,
            Multiplier::PerpGrad(j) => {
                if j == 1 {
                    I * k2
                } else {
                    -I * k1
                }
            }
            Multiplier::InvLaplace => {
                if r == 0.0 {
                    zero
                } else {
                    Complex64::new(-1.0 / (r * r), 0.0)
                }
            }
            Multiplier::Custom(_) => zero,
        }
    }

    /// Odd symbols produce imaginary output on the unpaired Nyquist lines,
    /// which are therefore zeroed.
    pub fn is_odd(&self) -> bool {
        matches!(
            self,
            Multiplier::Riesz(_)
                | Multiplier::RieszPerp(_)
                | Multiplier::Grad(_)
                | Multiplier::PerpGrad(_)
        )
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            Multiplier::Riesz(j)
            | Multiplier::RieszPerp(j)
            | Multiplier::RieszOdd(j)
            | Multiplier::Grad(j)
            | Multiplier::PerpGrad(j) => check_component(j),
            _ => Ok(()),
        }
    }
}

/// Multiplies every coefficient by `symbol(k)`; odd symbols also clear the
/// Nyquist lines.
pub fn apply_symbol(
    f: &TorusField,
    odd: bool,
    symbol: impl Fn([i64; 2]) -> Complex64,
) -> TorusField {
    let n = f.n();
    let mut out = f.clone();
    let nyq = -((n / 2) as i64);
    for (i, c) in out.coeffs_mut().iter_mut().enumerate() {
        if *c == Complex64::new(0.0, 0.0) {
            continue;
        }
        let k = [wavenumber(n, i / n), wavenumber(n, i % n)];
        if odd && (k[0] == nyq || k[1] == nyq) {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= symbol(k);
        }
    }
    out
}

/// Applies a multiplier. `Λ^s` with `s < 0` requires a mean-free input.
pub fn apply_multiplier(f: &TorusField, m: &Multiplier) -> Result<TorusField> {
    m.validate()?;
    match m {
        Multiplier::LambdaPow(s) if *s < 0.0 && !f.is_mean_free() => {
            Err(Error::NegativePowerOnMean)
        }
        Multiplier::Custom(table) => {
            if table.len() != f.n() * f.n() {
                return invalid("custom symbol table does not match the grid");
            }
            let mut out = f.clone();
            for (c, t) in out.coeffs_mut().iter_mut().zip(table) {
                *c *= *t;
            }
            Ok(out)
        }
        _ => Ok(apply_symbol(f, m.is_odd(), |k| m.symbol(k))),
    }
}
