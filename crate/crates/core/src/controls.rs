//! Choice of the control parameters `(a, b, β)` and the derived sequences
//! `λ_n = a^{b^n}`, `r_n`, `ℓ_n = 1/λ_n`, `μ_n = √(λ_{n-1} λ_n)`.
//!
//! The closing condition forces astronomically large `a` (`ln a ≈ 290` for
//! typical inputs), so every inequality is evaluated on logarithms and `λ_n`
//! is carried as an exact big integer.

use crate::error::{invalid, Error, Result};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Every condition must hold.
    #[default]
    Strict,
    /// User-supplied `(a, b, β)`; conditions are reported only.
    Demo,
}

/// Where the value of `a` came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ASource {
    /// Smallest `a` meeting the lattice conditions, the monotonicity threshold and the closing inequality.
    Analytic,
    /// Smallest `a` meeting the lattice conditions only.
    LatticeMin,
    User,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerInput {
    pub m: u32,
    pub alpha: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub nu: f64,
    /// The constant to beat in the closing inequality.
    pub c: f64,
    pub cz: f64,
    pub c0: f64,
    pub c_start: f64,
}

impl Default for PlannerInput {
    fn default() -> Self {
        Self::new(0.5, 0.6, 1.0)
    }
}

impl PlannerInput {
    pub fn new(alpha: f64, kappa: f64, gamma: f64) -> Self {
        Self {
            m: 1,
            alpha,
            kappa,
            gamma,
            nu: 1.0,
            c: 2.0,
            cz: 0.0,
            c0: 2.0,
            c_start: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return invalid("m must be at least 1");
        }
        if !(self.alpha > 0.0) {
            return invalid("α must be positive");
        }
        if !(self.c > 1.0) {
            return invalid("C must exceed 1");
        }
        if !(self.cz >= 0.0) {
            return invalid("C_z must be non-negative");
        }
        if !(self.c0 >= 2.0) {
            return invalid("C0 must be at least 2");
        }
        if !(self.c_start >= 1.0) {
            return invalid("C_start must be at least 1");
        }
        Ok(())
    }
}

/// Smallest integer `b > 1 + 1/α`.
pub fn choose_b(alpha: f64) -> u32 {
    let t = 1.0 + 1.0 / alpha;
    let b = t.ceil();
    (if b == t { b + 1.0 } else { b }) as u32
}

/// The six strict upper bounds on `β`.
pub fn eta_bounds(b: u32, alpha: f64, kappa: f64, gamma: f64) -> [f64; 6] {
    let b = b as f64;
    [
        (alpha * (b - 1.0) - 1.0) / b,
        (kappa - 0.5) / b,
        b / (2.0 * b - 1.0),
        4.0 * b / (4.0 * b - 1.0) * (1.5 - gamma),
        (b - 1.0) / (2.0 * b - 1.0),
        b / (2.0 * b - 1.0),
    ]
}

/// The six exponents whose maximum is `-ς`.
pub fn rate_exponents(b: u32, beta: f64, alpha: f64, kappa: f64, gamma: f64) -> [f64; 6] {
    let b = b as f64;
    [
        (1.0 - b) * (1.0 - beta),
        1.0 - alpha * (b - 1.0) + beta * b,
        0.5 - kappa + beta * b,
        -b / 2.0 + b * beta - beta / 2.0,
        b * (gamma - 1.5 + beta) - beta / 4.0,
        0.5 - b / 2.0 + b * beta - beta / 2.0,
    ]
}

pub fn varsigma(b: u32, beta: f64, alpha: f64, kappa: f64, gamma: f64) -> f64 {
    -rate_exponents(b, beta, alpha, kappa, gamma)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `ln x` for arbitrarily large integers.
pub fn ln_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    ((x >> shift).to_f64().unwrap()).ln() + shift as f64 * std::f64::consts::LN_2
}

/// Smallest integer `a` with `ln a >= x`, to the resolution of `f64` once
/// `e^x` exceeds `2^53`.
fn ceil_exp(x: f64) -> BigUint {
    if x <= 0.0 {
        return BigUint::one();
    }
    if x < 36.0 {
        let mut a = x.exp().ceil() as u64;
        while a > 1 && ((a - 1) as f64).ln() >= x {
            a -= 1;
        }
        while (a as f64).ln() < x {
            a += 1;
        }
        return BigUint::from(a);
    }
    // e^x = m 2^e with an integer mantissa
    let e = (x / std::f64::consts::LN_2).floor() - 52.0;
    let m = (x - e * std::f64::consts::LN_2).exp().ceil();
    BigUint::from(m as u64) << (e as u64)
}

/// Smallest `a` with `a^b >= 48` and `a^{1+b} >= 100` (which implies `a^b >= 9`).
pub fn lattice_min_a(b: u32) -> u64 {
    let ok = |a: u64| {
        let p = |e: u32| BigUint::from(a).pow(e);
        p(b) >= BigUint::from(48u32)
            && p(b + 1) >= BigUint::from(100u32)
            && p(b) >= BigUint::from(9u32)
    };
    (2..).find(|&a| ok(a)).unwrap()
}

/// `ln a_0`: `n ↦ (4b)^{2n} a^{-b^{n-1} ς}` is non-increasing on `n >= 1`
/// exactly when `ς (b-1) ln a >= 2 ln(4b)`.
pub fn ln_a0(b: u32, varsigma: f64) -> f64 {
    2.0 * (4.0 * b as f64).ln() / (varsigma * (b as f64 - 1.0))
}

/// `ln` of the closing left-hand side `C ln a (10+|ν|) (4b)^2 a^{-ς}`.
pub fn ln_closing(ln_a: f64, b: u32, varsigma: f64, c: f64, nu: f64) -> f64 {
    c.ln() + ln_a.ln() + (10.0 + nu.abs()).ln() + 2.0 * (4.0 * b as f64).ln() - varsigma * ln_a
}

mod big_string {
    use super::*;
    pub fn serialize<S: Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_str_radix(10))
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        BigUint::parse_bytes(s.as_bytes(), 10)
            .ok_or_else(|| serde::de::Error::custom("not a decimal integer"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    #[serde(with = "big_string")]
    pub a: BigUint,
    pub b: u32,
    pub beta: f64,
    pub varsigma: f64,
    pub mode: Mode,
    pub a_source: ASource,
    pub lattice_min_a: u64,
    /// `ln` of the analytic choice of `a`, when planned.
    pub ln_a_analytic: Option<f64>,
    pub input: PlannerInput,
}

/// Chooses `b`, then `β` as half the smallest bound, then `ς` and `a`.
pub fn plan(input: &PlannerInput) -> Result<ControlParams> {
    input.validate()?;
    let b = choose_b(input.alpha);
    let bounds = eta_bounds(b, input.alpha, input.kappa, input.gamma);
    let min = bounds.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::NoAdmissibleBeta);
    }
    let beta = (min / 2.0).min(0.5);
    let vs = varsigma(b, beta, input.alpha, input.kappa, input.gamma);
    let lattice = lattice_min_a(b);
    // the closing left side is decreasing in ln a beyond 1/ς
    let lo = (lattice as f64).ln().max(ln_a0(b, vs)).max(1.0 / vs);
    let f = |x: f64| ln_closing(x, b, vs, input.c, input.nu);
    let ln_a = if f(lo) <= 0.0 {
        lo
    } else {
        let mut hi = 2.0 * lo;
        while f(hi) > 0.0 {
            hi *= 2.0;
        }
        let mut lo = lo;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let a = ceil_exp(ln_a).max(BigUint::from(lattice));
    Ok(ControlParams {
        ln_a_analytic: Some(ln_big(&a)),
        a,
        b,
        beta,
        varsigma: vs,
        mode: Mode::Strict,
        a_source: ASource::Analytic,
        lattice_min_a: lattice,
        input: input.clone(),
    })
}

impl ControlParams {
    /// User-supplied parameters; conditions are only reported.
    pub fn demo(input: &PlannerInput, a: u64, b: u32, beta: f64) -> Result<Self> {
        input.validate()?;
        if a < 2 || b < 2 {
            return invalid("a and b must be at least 2");
        }
        if !(beta > 0.0 && beta < 1.0) {
            return invalid("β must lie in (0, 1)");
        }
        Ok(Self {
            a: BigUint::from(a),
            b,
            beta,
            varsigma: varsigma(b, beta, input.alpha, input.kappa, input.gamma),
            mode: Mode::Demo,
            a_source: ASource::User,
            lattice_min_a: lattice_min_a(b),
            ln_a_analytic: None,
            input: input.clone(),
        })
    }

    /// Same `b` and `β` with `a` lowered to the lattice minimum.
    pub fn at_lattice_min(&self) -> Self {
        Self {
            a: BigUint::from(self.lattice_min_a),
            a_source: ASource::LatticeMin,
            ..self.clone()
        }
    }

    pub fn with_c_start(&self, c_start: f64) -> Self {
        let mut out = self.clone();
        out.input.c_start = c_start;
        out
    }

    pub fn with_cz(&self, cz: f64) -> Self {
        let mut out = self.clone();
        out.input.cz = cz;
        out
    }

    pub fn ln_a(&self) -> f64 {
        ln_big(&self.a)
    }

    /// `a` if it fits a machine word.
    pub fn a_u64(&self) -> Option<u64> {
        self.a.to_u64()
    }

    /// `λ_n = a^{b^n}`, exact, or `None` when `b^n` overflows.
    pub fn lambda(&self, n: u32) -> Option<BigUint> {
        let e = (self.b as u64).checked_pow(n)?;
        let bits = self.a.bits().checked_mul(e)?;
        (bits <= 1 << 24).then(|| self.a.pow(e as u32))
    }

    pub fn ln_lambda(&self, n: u32) -> f64 {
        (self.b as f64).powi(n as i32) * self.ln_a()
    }

    /// `ln r_n = ln(C_start (C_z^2 + 1)) + β (ln λ_0 - ln λ_n)`.
    pub fn ln_r(&self, n: u32) -> f64 {
        let i = &self.input;
        (i.c_start * (i.cz * i.cz + 1.0)).ln() + self.beta * (self.ln_lambda(0) - self.ln_lambda(n))
    }

    pub fn r(&self, n: u32) -> f64 {
        self.ln_r(n).exp()
    }

    /// `ln μ_n`, `n >= 1`.
    pub fn ln_mu(&self, n: u32) -> f64 {
        0.5 * (self.ln_lambda(n - 1) + self.ln_lambda(n))
    }

    /// `λ_n` as a float; infinite past `f64` range.
    pub fn lambda_f64(&self, n: u32) -> f64 {
        self.ln_lambda(n).exp().round()
    }
}

/// One row of the control sequences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub n: u32,
    /// Exact decimal `λ_n`, absent when too large to form.
    pub lambda: Option<String>,
    pub ln_lambda: f64,
    pub r: f64,
    pub ln_r: f64,
    pub ell: f64,
    /// `μ_n`, defined for `n >= 1`.
    pub mu: Option<f64>,
    pub ln_mu: Option<f64>,
    /// Largest wavenumber the level touches: `5 λ_n + μ_n`, or `λ_n` at level 0.
    pub reach: f64,
    /// Whether `reach` fits under the Nyquist number of the grid.
    pub feasible: bool,
}

/// `(λ_n, r_n, ℓ_n, μ_n)` for `n = 0..=n_max`, flagged against an `n`-point grid.
pub fn sequences(cp: &ControlParams, n_max: u32, grid: usize) -> Vec<Level> {
    let nyquist = (grid / 2) as f64;
    (0..=n_max)
        .map(|n| {
            let ln_lambda = cp.ln_lambda(n);
            let lambda = cp
                .lambda(n)
                .filter(|l| l.bits() <= 16384)
                .map(|l| l.to_str_radix(10));
            let ln_mu = (n >= 1).then(|| cp.ln_mu(n));
            let lam = ln_lambda.exp();
            let mu = ln_mu.map(f64::exp);
            let reach = match mu {
                Some(m) => 5.0 * lam + m,
                None => lam,
            };
            Level {
                n,
                lambda,
                ln_lambda,
                r: cp.ln_r(n).exp(),
                ln_r: cp.ln_r(n),
                ell: (-ln_lambda).exp(),
                mu,
                ln_mu,
                reach,
                feasible: reach <= nyquist,
            }
        })
        .collect()
}

/// Deepest level whose blocks fit the grid.
pub fn deepest_feasible(cp: &ControlParams, grid: usize) -> u32 {
    let mut n = 0;
    while sequences(cp, n + 1, grid)[n as usize + 1].feasible {
        n += 1;
    }
    n
}

/// A named condition with its outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// `None` for conditions not indexed by level.
    pub level: Option<u32>,
    pub holds: bool,
    /// `ln(rhs / lhs)` for inequalities `lhs <= rhs`, or `bound - value` for `β` bounds.
    #[serde(with = "crate::stats::extended_f64")]
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub mode: Mode,
    pub checks: Vec<Check>,
}

impl ConditionReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn get(&self, name: &str, level: Option<u32>) -> Option<&Check> {
        self.checks
            .iter()
            .find(|c| c.name == name && c.level == level)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.holds).collect()
    }
}

/// Evaluates R1–R3 for `1 <= n <= n_max`, the lattice conditions, the `β`
/// bounds, the monotonicity threshold and the closing inequality.
pub fn check_conditions(cp: &ControlParams, n_max: u32) -> ConditionReport {
    let mut checks = Vec::new();
    // lhs <= rhs in logs, with slack for exact equalities like μ_n = λ_n
    fn le_check(name: &str, level: Option<u32>, ln_lhs: f64, ln_rhs: f64) -> Check {
        let margin = ln_rhs - ln_lhs;
        Check {
            name: name.into(),
            level,
            holds: margin >= -1e-12 * ln_rhs.abs().max(1.0),
            margin,
        }
    }
    macro_rules! le {
        ($($arg:expr),*) => { checks.push(le_check($($arg),*)) };
    }
    for n in 1..=n_max.max(1) {
        let l = Some(n);
        le!("R1", l, cp.ln_mu(n), cp.ln_lambda(n));
        le!("R2", l, -cp.ln_lambda(n), 0.0);
        le!(
            "R3.lattice",
            l,
            (12.0f64).ln() + cp.ln_lambda(n),
            (4.0f64).ln() + cp.ln_mu(n + 1)
        );
        le!("R3.mu", l, (10.0f64).ln(), cp.ln_mu(n));
        le!(
            "R3.growth",
            l,
            (48.0f64).ln() + cp.ln_lambda(n),
            cp.ln_lambda(n + 1)
        );
    }
    let (ln_a, b) = (cp.ln_a(), cp.b as f64);
    le!("A.9", None, (9.0f64).ln(), b * ln_a);
    le!("A.100", None, (100.0f64).ln(), (1.0 + b) * ln_a);
    le!("A.48", None, (48.0f64).ln(), b * ln_a);
    let i = &cp.input;
    let bounds = eta_bounds(cp.b, i.alpha, i.kappa, i.gamma);
    checks.push(Check {
        name: "B".into(),
        level: None,
        holds: b > 1.0 + 1.0 / i.alpha,
        margin: b - 1.0 - 1.0 / i.alpha,
    });
    for (k, bound) in bounds.iter().enumerate() {
        checks.push(Check {
            name: format!("Eta{}", k + 1),
            level: None,
            holds: cp.beta < *bound,
            margin: bound - cp.beta,
        });
    }
    let vs = cp.varsigma;
    if vs > 0.0 {
        le!("a0", None, ln_a0(cp.b, vs), ln_a);
        le!("closing", None, ln_closing(ln_a, cp.b, vs, i.c, i.nu), 0.0);
    } else {
        for name in ["a0", "closing"] {
            checks.push(Check {
                name: name.into(),
                level: None,
                holds: false,
                margin: f64::NEG_INFINITY,
            });
        }
    }
    ConditionReport {
        mode: cp.mode,
        checks,
    }
}
