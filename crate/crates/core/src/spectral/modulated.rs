//! Real fields concentrated near a few carrier wavevectors.
//!
//! A [`Modulated`] field is `Σ_c Re(E_c(x) exp(-i c·x))` where each envelope
//! `E_c` is a complex field of small band. Multipliers act on envelopes
//! through the shifted symbol `m(c + ξ)` and products expand into the sum and
//! difference carriers, so both are exact while every transform stays on a
//! grid sized by envelope bands rather than by carrier frequencies.

use super::fft::fft2;
use super::field::{
    grid_for_band, index, physical_on, physical_pair, wavenumber, TorusField, AREA,
};
use super::multiplier::Multiplier;
use crate::error::{Error, Result};
use num_complex::Complex64;
use rustfft::FftDirection;
use std::collections::HashMap;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// A complex field on an `n x n` grid, coefficients in FFT order with the
/// same transform convention as [`TorusField`].
#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    n: usize,
    coeffs: Vec<Complex64>,
}

impl Envelope {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            coeffs: vec![ZERO; n * n],
        }
    }

    pub fn from_real(f: &TorusField) -> Self {
        Self {
            n: f.n(),
            coeffs: f.coeffs().to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    fn nonzero(&self) -> impl Iterator<Item = ([i64; 2], Complex64)> + '_ {
        let n = self.n;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != ZERO)
            .map(move |(i, c)| ([wavenumber(n, i / n), wavenumber(n, i % n)], *c))
    }

    pub fn band(&self) -> usize {
        self.nonzero()
            .map(|(k, _)| k[0].unsigned_abs().max(k[1].unsigned_abs()) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    /// Same envelope on an `m`-grid; modes that do not fit are dropped.
    pub fn resize(&self, m: usize) -> Self {
        if m == self.n {
            return self.clone();
        }
        let mut out = Self::zeros(m);
        for (k, c) in self.nonzero() {
            if let Some(j) = index(m, k) {
                out.coeffs[j] += c;
            }
        }
        out
    }

    /// Pointwise complex conjugate.
    pub fn conj(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for (i, c) in self.coeffs.iter().enumerate() {
            let j = ((n - i / n) % n) * n + (n - i % n) % n;
            out.coeffs[j] = c.conj();
        }
        out
    }

    pub fn scale(&mut self, s: Complex64) {
        self.coeffs.iter_mut().for_each(|c| *c *= s);
    }

    /// `self += a x`, growing this grid if `x` lives on a larger one.
    pub fn axpy(&mut self, a: Complex64, x: &Envelope) {
        if x.n > self.n {
            *self = self.resize(x.n);
        }
        if x.n == self.n {
            for (d, s) in self.coeffs.iter_mut().zip(&x.coeffs) {
                *d += a * s;
            }
        } else {
            for (k, c) in x.nonzero() {
                let j = index(self.n, k).expect("smaller grid embeds");
                self.coeffs[j] += a * c;
            }
        }
    }

    pub fn truncate_band(&mut self, band: usize) {
        let n = self.n;
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            let b = wavenumber(n, i / n)
                .unsigned_abs()
                .max(wavenumber(n, i % n).unsigned_abs()) as usize;
            if b > band {
                *c = ZERO;
            }
        }
    }

    /// Values at the points of an `m`-grid.
    pub fn values(&self, m: usize) -> Vec<Complex64> {
        let mut buf = self.resize(m).coeffs;
        fft2(&mut buf, m, FftDirection::Forward);
        buf.iter_mut().for_each(|c| *c /= AREA);
        buf
    }

    pub fn from_values(m: usize, mut vals: Vec<Complex64>) -> Self {
        fft2(&mut vals, m, FftDirection::Inverse);
        let s = AREA / (m * m) as f64;
        vals.iter_mut().for_each(|c| *c *= s);
        Self { n: m, coeffs: vals }
    }
}

/// `Σ_c Re(E_c exp(-i c·x))`, carriers kept in a half-plane and unique.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Modulated {
    parts: Vec<([i64; 2], Envelope)>,
}

fn canonical(c: [i64; 2]) -> bool {
    c[0] > 0 || (c[0] == 0 && c[1] >= 0)
}

impl Modulated {
    pub fn zero() -> Self {
        Self::default()
    }

    /// A real field as the carrier-zero part.
    pub fn from_field(f: &TorusField) -> Self {
        let mut m = Self::zero();
        m.add_part([0, 0], Envelope::from_real(f));
        m
    }

    /// `a(x) cos(c·x)` for a real amplitude `a`.
    pub fn from_amplitude(a: &TorusField, carrier: [i64; 2]) -> Self {
        let mut m = Self::zero();
        m.add_part(carrier, Envelope::from_real(a));
        m
    }

    pub fn parts(&self) -> &[([i64; 2], Envelope)] {
        &self.parts
    }

    pub fn carriers(&self) -> Vec<[i64; 2]> {
        self.parts.iter().map(|p| p.0).collect()
    }

    /// Adds `Re(e exp(-i c·x))`.
    pub fn add_part(&mut self, c: [i64; 2], e: Envelope) {
        let (c, e) = if canonical(c) {
            (c, e)
        } else {
            ([-c[0], -c[1]], e.conj())
        };
        match self.parts.binary_search_by(|p| p.0.cmp(&c)) {
            Ok(i) => self.parts[i].1.axpy(Complex64::new(1.0, 0.0), &e),
            Err(i) => self.parts.insert(i, (c, e)),
        }
    }

    /// `self += s other`.
    pub fn axpy(&mut self, s: f64, other: &Modulated) {
        for (c, e) in &other.parts {
            let mut e = e.clone();
            e.scale(Complex64::new(s, 0.0));
            self.add_part(*c, e);
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.parts
            .iter_mut()
            .for_each(|p| p.1.scale(Complex64::new(s, 0.0)));
        out
    }

    /// Largest `max(|k1|, |k2|)` over the modes of the represented field.
    pub fn band(&self) -> usize {
        self.parts
            .iter()
            .flat_map(|(c, e)| {
                e.nonzero().map(move |(k, _)| {
                    (c[0] + k[0])
                        .unsigned_abs()
                        .max((c[1] + k[1]).unsigned_abs()) as usize
                })
            })
            .max()
            .unwrap_or(0)
    }

    /// Applies a symbol with `m(-k) = conj(m(k))`, which keeps the field real.
    pub fn apply_symbol(&self, symbol: impl Fn([i64; 2]) -> Complex64) -> Self {
        let mut out = self.clone();
        for (c, e) in &mut out.parts {
            let n = e.n;
            for (i, v) in e.coeffs.iter_mut().enumerate() {
                if *v != ZERO {
                    *v *= symbol([c[0] + wavenumber(n, i / n), c[1] + wavenumber(n, i % n)]);
                }
            }
        }
        out
    }

    pub fn apply(&self, m: &Multiplier) -> Result<Self> {
        m.validate()?;
        Ok(self.apply_symbol(|k| m.symbol(k)))
    }

    /// Pointwise products `l * right` for every `l` in `lefts`, sharing the
    /// transforms of `right`.
    pub fn products(lefts: &[&Modulated], right: &Modulated) -> Vec<Modulated> {
        let mut cache: HashMap<(usize, usize), Vec<Complex64>> = HashMap::new();
        let rb: Vec<usize> = right.parts.iter().map(|p| p.1.band()).collect();
        lefts
            .iter()
            .map(|left| {
                let mut out = Modulated::zero();
                for (c, u) in &left.parts {
                    let ub = u.band();
                    for (j, (d, v)) in right.parts.iter().enumerate() {
                        let band = ub + rb[j];
                        let m = grid_for_band(band);
                        let vv = cache.entry((j, m)).or_insert_with(|| v.values(m));
                        let uv = u.values(m);
                        let sum: Vec<Complex64> =
                            uv.iter().zip(vv.iter()).map(|(a, b)| a * b * 0.5).collect();
                        let dif: Vec<Complex64> = uv
                            .iter()
                            .zip(vv.iter())
                            .map(|(a, b)| a * b.conj() * 0.5)
                            .collect();
                        let mut es = Envelope::from_values(m, sum);
                        let mut ed = Envelope::from_values(m, dif);
                        es.truncate_band(band);
                        ed.truncate_band(band);
                        out.add_part([c[0] + d[0], c[1] + d[1]], es);
                        out.add_part([c[0] - d[0], c[1] - d[1]], ed);
                    }
                }
                out
            })
            .collect()
    }

    pub fn product(&self, other: &Modulated) -> Modulated {
        Self::products(&[self], other).pop().expect("one product")
    }

    /// The represented field on an `n`-grid; fails if a mode does not fit
    /// strictly inside the Nyquist band.
    pub fn to_field(&self, n: usize) -> Result<TorusField> {
        let mut out = vec![ZERO; n * n];
        for (c, e) in &self.parts {
            for (k, v) in e.nonzero() {
                let t = [c[0] + k[0], c[1] + k[1]];
                let (Some(i), Some(j)) = (index(n, t), index(n, [-t[0], -t[1]])) else {
                    return Err(Error::LevelInfeasible);
                };
                out[i] += v * 0.5;
                out[j] += v.conj() * 0.5;
            }
        }
        TorusField::from_coeffs(n, out)
    }

    /// The represented field on the smallest grid that holds it.
    pub fn to_field_compact(&self) -> TorusField {
        self.to_field(grid_for_band(self.band()))
            .expect("grid sized by band")
    }
}

/// Dense coefficient boxes of the envelopes, for evaluation at scattered points.
struct Boxes(Vec<([i64; 2], i64, Vec<Complex64>)>);

impl Boxes {
    fn new(m: &Modulated) -> Self {
        Self(
            m.parts
                .iter()
                .map(|(c, e)| {
                    let b = e.band() as i64;
                    let w = (2 * b + 1) as usize;
                    let mut d = vec![ZERO; w * w];
                    for (k, v) in e.nonzero() {
                        d[(k[0] + b) as usize * w + (k[1] + b) as usize] += v;
                    }
                    (*c, b, d)
                })
                .collect(),
        )
    }

    fn eval(&self, x1s: &[f64], x2s: &[f64]) -> Vec<f64> {
        let (na, nb) = (x1s.len(), x2s.len());
        let mut out = vec![0.0; na * nb];
        for (c, b, d) in &self.0 {
            let w = (2 * b + 1) as usize;
            let phases = |x: f64, c: i64| -> Vec<Complex64> {
                (-b..=*b)
                    .map(|k| Complex64::from_polar(1.0, -((k + c) as f64) * x))
                    .collect()
            };
            let p2: Vec<Vec<Complex64>> = x2s.iter().map(|&x| phases(x, c[1])).collect();
            let mut rows = vec![ZERO; w * nb];
            for r in 0..w {
                let row = &d[r * w..(r + 1) * w];
                for (bi, ph) in p2.iter().enumerate() {
                    rows[r * nb + bi] = row.iter().zip(ph).map(|(u, v)| u * v).sum();
                }
            }
            for (a, &x1) in x1s.iter().enumerate() {
                let ph = phases(x1, c[0]);
                for bi in 0..nb {
                    let s: Complex64 = (0..w).map(|r| ph[r] * rows[r * nb + bi]).sum();
                    out[a * nb + bi] += s.re / AREA;
                }
            }
        }
        out
    }
}

impl Modulated {
    /// Values at the points `(x1s[a], x2s[b])`, row-major in `a`.
    pub fn eval_patch(&self, x1s: &[f64], x2s: &[f64]) -> Vec<f64> {
        Boxes::new(self).eval(x1s, x2s)
    }

    /// `sup |f|` from samples on the `m`-grid that holds the field exactly,
    /// refined by direct evaluation around the largest samples.
    pub fn sup_refined(&self, vals: &[f64], m: usize) -> f64 {
        const CANDIDATES: usize = 32;
        let mut idx: Vec<usize> = (0..vals.len()).collect();
        let k = CANDIDATES.min(idx.len());
        if k == 0 {
            return 0.0;
        }
        idx.select_nth_unstable_by(k - 1, |a, b| vals[*b].abs().total_cmp(&vals[*a].abs()));
        let h = std::f64::consts::TAU / m as f64;
        let mut best = vals.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let boxes = Boxes::new(self);
        for &i in &idx[..k] {
            let mut centre = [(i / m) as f64 * h, (i % m) as f64 * h];
            let mut step = h / 4.0;
            for _ in 0..2 {
                let x1s: Vec<f64> = (-4..=4).map(|s| centre[0] + s as f64 * step).collect();
                let x2s: Vec<f64> = (-4..=4).map(|s| centre[1] + s as f64 * step).collect();
                let v = boxes.eval(&x1s, &x2s);
                let (j, top) = v.iter().enumerate().fold((0, 0.0f64), |acc, (j, x)| {
                    if x.abs() > acc.1 {
                        (j, x.abs())
                    } else {
                        acc
                    }
                });
                best = best.max(top);
                centre = [x1s[j / 9], x2s[j % 9]];
                step /= 4.0;
            }
        }
        best
    }

    /// `[‖f‖_∞, ‖R_1^o f‖_∞, ‖R_2^o f‖_∞]` with refined sup-norms.
    pub fn xnorm_parts(&self) -> [f64; 3] {
        let r1 = self.apply(&Multiplier::RieszOdd(1)).expect("valid");
        let r2 = self.apply(&Multiplier::RieszOdd(2)).expect("valid");
        let (f0, f1, f2) = (
            self.to_field_compact(),
            r1.to_field_compact(),
            r2.to_field_compact(),
        );
        let m = f0.n().max(f1.n()).max(f2.n());
        let (v0, v1) = physical_pair(&f0, &f1, m);
        let v2 = physical_on(&f2, m);
        [
            self.sup_refined(&v0, m),
            r1.sup_refined(&v1, m),
            r2.sup_refined(&v2, m),
        ]
    }
}
