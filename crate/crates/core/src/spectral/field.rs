use super::fft::fft2;
use crate::error::{invalid, Result};
use num_complex::Complex64;
use rustfft::FftDirection;
use std::f64::consts::TAU;

/// Area of the torus, `(2π)^2`.
pub const AREA: f64 = TAU * TAU;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Signed wavenumber of FFT index `i` on an `n`-point axis, in `-n/2..n/2`.
#[inline]
pub fn wavenumber(n: usize, i: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

#[inline]
fn axis_index(n: usize, k: i64) -> Option<usize> {
    let h = (n / 2) as i64;
    if k < -h || k >= h {
        None
    } else {
        Some(k.rem_euclid(n as i64) as usize)
    }
}

/// Flat index of wavevector `k`, or `None` when it is not on the grid.
#[inline]
pub fn index(n: usize, k: [i64; 2]) -> Option<usize> {
    Some(axis_index(n, k[0])? * n + axis_index(n, k[1])?)
}

/// Smallest power of two `>= x` (at least 2).
pub fn grid_for(x: usize) -> usize {
    x.max(2).next_power_of_two()
}

/// Smallest grid on which every mode with `max(|k1|,|k2|) <= band` is
/// represented without touching the Nyquist line.
pub fn grid_for_band(band: usize) -> usize {
    grid_for(2 * band + 2)
}

/// A real scalar field on the `N x N` spectral grid of `T^2 = [0, 2π)^2`.
///
/// Coefficients follow `f̂(k) = ∫ exp(i x·k) f(x) dx`, so that
/// `f(x) = (2π)^{-2} Σ_k f̂(k) exp(-i x·k)`. Storage is in FFT order: flat
/// index `i1 * N + i2` holds `k = (wavenumber(i1), wavenumber(i2))`, and
/// physical samples sit at `x = 2π (i1, i2) / N`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusField {
    n: usize,
    coeffs: Vec<Complex64>,
}

impl TorusField {
    pub fn zeros(n: usize) -> Self {
        assert!(
            n >= 2 && n.is_power_of_two(),
            "grid size must be a power of two >= 2"
        );
        Self {
            n,
            coeffs: vec![ZERO; n * n],
        }
    }

    pub fn from_coeffs(n: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return invalid(format!("grid size {n} is not a power of two >= 2"));
        }
        if coeffs.len() != n * n {
            return invalid(format!(
                "expected {} coefficients, got {}",
                n * n,
                coeffs.len()
            ));
        }
        Ok(Self { n, coeffs })
    }

    pub fn from_physical(n: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n * n {
            return invalid(format!("expected {} samples, got {}", n * n, values.len()));
        }
        if n < 2 || !n.is_power_of_two() {
            return invalid(format!("grid size {n} is not a power of two >= 2"));
        }
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft2(&mut buf, n, FftDirection::Inverse);
        let s = AREA / (n * n) as f64;
        buf.iter_mut().for_each(|c| *c *= s);
        Ok(Self { n, coeffs: buf })
    }

    /// Samples `f` on the grid and transforms.
    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let h = TAU / n as f64;
        let mut vals = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                vals.push(f(i as f64 * h, j as f64 * h));
            }
        }
        Self::from_physical(n, &vals).expect("grid checked")
    }

    /// `cos(k·x)`.
    pub fn cos_mode(n: usize, k: [i64; 2]) -> Self {
        let mut f = Self::zeros(n);
        f.add_real_mode(k, Complex64::new(AREA / 2.0, 0.0));
        f
    }

    /// `sin(k·x)`.
    pub fn sin_mode(n: usize, k: [i64; 2]) -> Self {
        let mut f = Self::zeros(n);
        f.add_real_mode(k, Complex64::new(0.0, AREA / 2.0));
        f
    }

    /// Adds `c` at `k` and `conj(c)` at `-k`; at `k = 0` only the real part.
    pub fn add_real_mode(&mut self, k: [i64; 2], c: Complex64) {
        if k == [0, 0] {
            self.coeffs[0] += Complex64::new(c.re, 0.0);
            return;
        }
        let i = index(self.n, k).expect("mode outside grid");
        let j = index(self.n, [-k[0], -k[1]]).expect("mode outside grid");
        self.coeffs[i] += c;
        self.coeffs[j] += c.conj();
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// `f̂(k)`, zero off-grid.
    pub fn coeff(&self, k: [i64; 2]) -> Complex64 {
        index(self.n, k).map_or(ZERO, |i| self.coeffs[i])
    }

    pub fn set_coeff(&mut self, k: [i64; 2], c: Complex64) {
        let i = index(self.n, k).expect("mode outside grid");
        self.coeffs[i] = c;
    }

    /// Iterates `(k, f̂(k))` over all grid modes.
    pub fn modes(&self) -> impl Iterator<Item = ([i64; 2], Complex64)> + '_ {
        let n = self.n;
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, &c)| ([wavenumber(n, i / n), wavenumber(n, i % n)], c))
    }

    pub fn to_physical(&self) -> Vec<f64> {
        let mut buf = self.coeffs.clone();
        fft2(&mut buf, self.n, FftDirection::Forward);
        buf.iter().map(|c| c.re / AREA).collect()
    }

    /// Spatial mean `f̂(0) / (2π)^2`.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re / AREA
    }

    pub fn is_mean_free(&self) -> bool {
        self.coeffs[0] == ZERO
    }

    pub fn remove_mean(&mut self) {
        self.coeffs[0] = ZERO;
    }

    pub fn without_mean(mut self) -> Self {
        self.remove_mean();
        self
    }

    /// Largest `max(|k1|, |k2|)` over nonzero coefficients.
    pub fn band(&self) -> usize {
        let n = self.n;
        let mut b = 0;
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c != ZERO {
                let k1 = wavenumber(n, i / n).unsigned_abs() as usize;
                let k2 = wavenumber(n, i % n).unsigned_abs() as usize;
                b = b.max(k1).max(k2);
            }
        }
        b
    }

    /// Zeroes every mode with `max(|k1|, |k2|) > band`.
    pub fn truncate_band(&mut self, band: usize) {
        let n = self.n;
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            let k1 = wavenumber(n, i / n).unsigned_abs() as usize;
            let k2 = wavenumber(n, i % n).unsigned_abs() as usize;
            if k1 > band || k2 > band {
                *c = ZERO;
            }
        }
    }

    /// Spectral zero-padding (`m > n`) or truncation (`m < n`). Nyquist
    /// coefficients are split evenly when padding and dropped when truncating,
    /// which keeps real fields real.
    pub fn resize(&self, m: usize) -> Self {
        if m == self.n {
            return self.clone();
        }
        let mut out = Self::zeros(m);
        self.resize_into(&mut out.coeffs, m);
        out
    }

    fn resize_into(&self, dst: &mut [Complex64], m: usize) {
        let n = self.n;
        let half = (n / 2) as i64;
        let mh = (m / 2) as i64;
        for i1 in 0..n {
            let k1 = wavenumber(n, i1);
            if m < n && (k1 <= -mh || k1 >= mh) {
                continue;
            }
            for i2 in 0..n {
                let c = self.coeffs[i1 * n + i2];
                if c == ZERO {
                    continue;
                }
                let k2 = wavenumber(n, i2);
                if m < n && (k2 <= -mh || k2 >= mh) {
                    continue;
                }
                let split1: &[(i64, f64)] = if m > n && k1 == -half {
                    &[(-1, 0.5), (1, 0.5)]
                } else {
                    &[(0, 1.0)]
                };
                let split2: &[(i64, f64)] = if m > n && k2 == -half {
                    &[(-1, 0.5), (1, 0.5)]
                } else {
                    &[(0, 1.0)]
                };
                for &(s1, w1) in split1 {
                    let t1 = if s1 == 0 { k1 } else { s1 * half };
                    for &(s2, w2) in split2 {
                        let t2 = if s2 == 0 { k2 } else { s2 * half };
                        let j = index(m, [t1, t2]).expect("target mode on grid");
                        dst[j] += c * (w1 * w2);
                    }
                }
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// `self += a * x`, padding or truncating `x` to this grid.
    pub fn axpy(&mut self, a: f64, x: &TorusField) {
        if x.n == self.n {
            for (d, s) in self.coeffs.iter_mut().zip(&x.coeffs) {
                *d += *s * a;
            }
        } else {
            let xr = x.resize(self.n);
            self.axpy(a, &xr);
        }
    }

    /// `self + other` on the larger of the two grids.
    pub fn add(&self, other: &TorusField) -> Self {
        let (mut big, small) = if self.n >= other.n {
            (self.clone(), other)
        } else {
            (other.clone(), self)
        };
        big.axpy(1.0, small);
        big
    }

    pub fn sub(&self, other: &TorusField) -> Self {
        if self.n >= other.n {
            let mut out = self.clone();
            out.axpy(-1.0, other);
            out
        } else {
            let mut out = other.scaled(-1.0);
            out.axpy(1.0, self);
            out
        }
    }

    /// `L^2(T^2)` norm through Parseval.
    pub fn l2_norm(&self) -> f64 {
        (self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / AREA).sqrt()
    }

    /// Largest Hermitian-symmetry defect relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n;
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i1 in 0..n {
            for i2 in 0..n {
                let j = ((n - i1) % n) * n + (n - i2) % n;
                worst = worst.max((self.coeffs[i1 * n + i2] - self.coeffs[j].conj()).norm());
            }
        }
        worst / scale
    }

    /// `self(x) cos(K·x)` placed on a grid of size `target_n`:
    /// `ĥ(k) = (f̂(k-K) + f̂(k+K)) / 2`. Fails if a shifted mode leaves the grid.
    pub fn modulate_cos(&self, carrier: [i64; 2], target_n: usize) -> Result<Self> {
        let mut out = Self::zeros(target_n);
        self.add_modulated_into(&mut out, carrier, 1.0)?;
        Ok(out)
    }

    /// `out += s * self(x) cos(K·x)`.
    pub fn add_modulated_into(
        &self,
        out: &mut TorusField,
        carrier: [i64; 2],
        s: f64,
    ) -> Result<()> {
        let n = self.n;
        let m = out.n;
        let h = 0.5 * s;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == ZERO {
                continue;
            }
            let k = [wavenumber(n, i / n), wavenumber(n, i % n)];
            for sign in [1i64, -1] {
                let t = [k[0] + sign * carrier[0], k[1] + sign * carrier[1]];
                match index(m, t) {
                    Some(j) => out.coeffs[j] += c * h,
                    None => return invalid("modulated mode leaves the target grid"),
                }
            }
        }
        Ok(())
    }
}

/// Physical samples of two real fields on grid `m` using one complex FFT.
pub fn physical_pair(a: &TorusField, b: &TorusField, m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut buf = vec![ZERO; m * m];
    let mut tmp = vec![ZERO; m * m];
    a.resize_into(&mut buf, m);
    b.resize_into(&mut tmp, m);
    for (d, s) in buf.iter_mut().zip(&tmp) {
        *d += Complex64::new(-s.im, s.re);
    }
    fft2(&mut buf, m, FftDirection::Forward);
    let x = buf.iter().map(|c| c.re / AREA).collect();
    let y = buf.iter().map(|c| c.im / AREA).collect();
    (x, y)
}

/// Physical samples of one field on grid `m`.
pub fn physical_on(a: &TorusField, m: usize) -> Vec<f64> {
    if m == a.n {
        return a.to_physical();
    }
    let mut buf = vec![ZERO; m * m];
    a.resize_into(&mut buf, m);
    fft2(&mut buf, m, FftDirection::Forward);
    buf.iter().map(|c| c.re / AREA).collect()
}

/// Inverse of [`physical_pair`].
pub fn from_physical_pair(m: usize, x: &[f64], y: &[f64]) -> (TorusField, TorusField) {
    let mut buf: Vec<Complex64> = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    fft2(&mut buf, m, FftDirection::Inverse);
    let s = AREA / (m * m) as f64;
    let mut fa = vec![ZERO; m * m];
    let mut fb = vec![ZERO; m * m];
    for i1 in 0..m {
        for i2 in 0..m {
            let i = i1 * m + i2;
            let j = ((m - i1) % m) * m + (m - i2) % m;
            let p = buf[i] * s;
            let q = buf[j].conj() * s;
            fa[i] = (p + q) * 0.5;
            fb[i] = (p - q) * Complex64::new(0.0, -0.5);
        }
    }
    (
        TorusField { n: m, coeffs: fa },
        TorusField { n: m, coeffs: fb },
    )
}

impl TorusField {
    /// The same field on the smallest grid that still holds its band
    /// (never larger than the current grid).
    pub fn compact(&self) -> Self {
        let m = grid_for_band(self.band());
        if m < self.n {
            self.resize(m)
        } else {
            self.clone()
        }
    }
}
