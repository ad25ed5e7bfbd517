//! Shared helpers for the integration tests: an independent direct-sum
//! evaluator for the quadratic boundary operators, the cubic remainder
//! operators, and the resonant corrections. Everything here is written as
//! literal nested sums over mode triples with no tables, no convolutions and
//! no shared code paths with the crate, so agreement is meaningful.
#![allow(dead_code)]

use mblab::diophantine::AlphaClassification;
use mblab::spectral::{GridSpec, SpectralField};
use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Band coefficient lookup that is explicit about the out-of-band zero.
fn cf(f: &SpectralField, n: i64, k: i64) -> Complex64 {
    if k.abs() <= n {
        f.coeffs()[(k + n) as usize]
    } else {
        Complex64::ZERO
    }
}

/// Hermitian projection matching the convention for real fields: the k = 0
/// coefficient is made real and opposite modes are averaged against their
/// conjugates.
fn hermitian(mut c: Vec<Complex64>, n: i64) -> Vec<Complex64> {
    let n = n as usize;
    c[n] = Complex64::new(c[n].re, 0.0);
    for k in 1..=n {
        let avg = 0.5 * (c[n + k] + c[n - k].conj());
        c[n + k] = avg;
        c[n - k] = avg.conj();
    }
    c
}

/// Direct-summation reference for the normal-form operators.
pub struct DirectOps {
    alpha: f64,
    /// Exact rational ratio a/b when the classification provides one.
    ab: Option<(i64, i64)>,
    /// Special-ratio parameters (p, q) when the resonance lines carry
    /// integer points.
    pq: Option<(i64, i64)>,
    n: i64,
}

impl DirectOps {
    pub fn new(class: &AlphaClassification, grid: GridSpec) -> Self {
        DirectOps {
            alpha: class.alpha,
            ab: class.rational_ab(),
            pq: class.pq(),
            n: grid.max_mode() as i64,
        }
    }

    /// First-family denominator k^3 - alpha j^3 - alpha (k - j)^3, or None
    /// where the term must be dropped: the whole k = 0 row, plus the exact
    /// integer zeros detected in integer arithmetic for rational ratios.
    fn c_den(&self, k: i64, j: i64) -> Option<f64> {
        if k == 0 {
            return None;
        }
        let l = k - j;
        match self.ab {
            Some((a, b)) => {
                let (a, b) = (a as i128, b as i128);
                let num = b * cube(k) - a * (cube(j) + cube(l));
                if num == 0 {
                    None
                } else {
                    Some(num as f64 / b as f64)
                }
            }
            None => {
                let d = cube(k) as f64 - self.alpha * ((cube(j) + cube(l)) as f64);
                if d == 0.0 {
                    None
                } else {
                    Some(d)
                }
            }
        }
    }

    /// Second-family denominator alpha k^3 - j^3 - alpha (k - j)^3, with the
    /// structural j = 0 column and the exact integer zeros removed.
    fn d_den(&self, k: i64, j: i64) -> Option<f64> {
        if j == 0 {
            return None;
        }
        let l = k - j;
        match self.ab {
            Some((a, b)) => {
                let (a, b) = (a as i128, b as i128);
                let num = a * cube(k) - b * cube(j) - a * cube(l);
                if num == 0 {
                    None
                } else {
                    Some(num as f64 / b as f64)
                }
            }
            None => {
                let d = self.alpha * cube(k) as f64
                    - cube(j) as f64
                    - self.alpha * cube(l) as f64;
                if d == 0.0 {
                    None
                } else {
                    Some(d)
                }
            }
        }
    }

    /// -(k/2) sum_{k1+k2=k} v1_{k1} v2_{k2} / (k^3 - a k1^3 - a k2^3).
    pub fn b1(&self, v1: &SpectralField, v2: &SpectralField) -> Vec<Complex64> {
        let n = self.n;
        let mut out = vec![Complex64::ZERO; (2 * n + 1) as usize];
        for k in -n..=n {
            let mut acc = Complex64::ZERO;
            for k1 in -n..=n {
                let k2 = k - k1;
                if k2.abs() > n {
                    continue;
                }
                if let Some(den) = self.c_den(k, k1) {
                    acc += cf(v1, n, k1) * cf(v2, n, k2) / den;
                }
            }
            out[(k + n) as usize] = -0.5 * k as f64 * acc;
        }
        hermitian(out, n)
    }

    /// -k sum_{k1+k2=k} u_{k1} v_{k2} / (a k^3 - k1^3 - a k2^3).
    pub fn b2(&self, u: &SpectralField, v: &SpectralField) -> Vec<Complex64> {
        let n = self.n;
        let mut out = vec![Complex64::ZERO; (2 * n + 1) as usize];
        for k in -n..=n {
            let mut acc = Complex64::ZERO;
            for k1 in -n..=n {
                let k2 = k - k1;
                if k2.abs() > n {
                    continue;
                }
                if let Some(den) = self.d_den(k, k1) {
                    acc += cf(u, n, k1) * cf(v, n, k2) / den;
                }
            }
            out[(k + n) as usize] = -(k as f64) * acc;
        }
        hermitian(out, n)
    }

    /// i k sum over k1 + k2 + k3 = k of (k1 + k2) u_{k1} v_{k2} w_{k3}
    /// / (k^3 - a (k1 + k2)^3 - a k3^3).
    pub fn r1(&self, u: &SpectralField, v: &SpectralField, w: &SpectralField) -> Vec<Complex64> {
        let n = self.n;
        let mut out = vec![Complex64::ZERO; (2 * n + 1) as usize];
        for k in -n..=n {
            let mut acc = Complex64::ZERO;
            for k1 in -n..=n {
                for k2 in -n..=n {
                    let m = k1 + k2;
                    let k3 = k - m;
                    if k3.abs() > n {
                        continue;
                    }
                    if let Some(den) = self.c_den(k, m) {
                        acc += cf(u, n, k1) * cf(v, n, k2) * cf(w, n, k3) * (m as f64 / den);
                    }
                }
            }
            out[(k + n) as usize] = I * k as f64 * acc;
        }
        hermitian(out, n)
    }

    /// (i k / 2) sum over k1 + k2 + k3 = k of (k1 + k2) v1_{k1} v2_{k2}
    /// v3_{k3} / (a k^3 - (k1 + k2)^3 - a k3^3).
    pub fn r2(&self, v1: &SpectralField, v2: &SpectralField, v3: &SpectralField) -> Vec<Complex64> {
        let n = self.n;
        let mut out = vec![Complex64::ZERO; (2 * n + 1) as usize];
        for k in -n..=n {
            let mut acc = Complex64::ZERO;
            for k1 in -n..=n {
                for k2 in -n..=n {
                    let m = k1 + k2;
                    let k3 = k - m;
                    if k3.abs() > n {
                        continue;
                    }
                    if let Some(den) = self.d_den(k, m) {
                        acc += cf(v1, n, k1) * cf(v2, n, k2) * cf(v3, n, k3) * (m as f64 / den);
                    }
                }
            }
            out[(k + n) as usize] = I * 0.5 * k as f64 * acc;
        }
        hermitian(out, n)
    }

    /// i k sum over k1 + k2 + k3 = k of (k2 + k3) u1_{k1} u2_{k2} v_{k3}
    /// / (a k^3 - k1^3 - a (k2 + k3)^3); the second-family denominator is
    /// taken at the unpaired first index.
    pub fn r3(&self, u1: &SpectralField, u2: &SpectralField, v: &SpectralField) -> Vec<Complex64> {
        let n = self.n;
        let mut out = vec![Complex64::ZERO; (2 * n + 1) as usize];
        for k in -n..=n {
            let mut acc = Complex64::ZERO;
            for k2 in -n..=n {
                for k3 in -n..=n {
                    let m = k2 + k3;
                    let k1 = k - m;
                    if k1.abs() > n {
                        continue;
                    }
                    if let Some(den) = self.d_den(k, k1) {
                        acc += cf(u1, n, k1) * cf(u2, n, k2) * cf(v, n, k3) * (m as f64 / den);
                    }
                }
            }
            out[(k + n) as usize] = I * k as f64 * acc;
        }
        hermitian(out, n)
    }

    /// -i k v1_{p k / q} v2_{k - p k / q} on the multiples of q; zero for
    /// non-special ratios.
    pub fn rho1(&self, v1: &SpectralField, v2: &SpectralField) -> Vec<Complex64> {
        let n = self.n;
        let mut out = vec![Complex64::ZERO; (2 * n + 1) as usize];
        if let Some((p, q)) = self.pq {
            for k in -n..=n {
                if k == 0 || k % q != 0 {
                    continue;
                }
                let k1 = p * (k / q);
                out[(k + n) as usize] = -I * k as f64 * cf(v1, n, k1) * cf(v2, n, k - k1);
            }
        }
        hermitian(out, n)
    }

    /// -i k (u_{q k / p} v_{k - q k / p} + u_{-q k / (p - q)} v_{k + q k / (p - q)}),
    /// each term live on its own divisibility class; zero for non-special
    /// ratios.
    pub fn rho2(&self, u: &SpectralField, v: &SpectralField) -> Vec<Complex64> {
        let n = self.n;
        let mut out = vec![Complex64::ZERO; (2 * n + 1) as usize];
        if let Some((p, q)) = self.pq {
            for k in -n..=n {
                if k == 0 {
                    continue;
                }
                let mut acc = Complex64::ZERO;
                if k % p == 0 {
                    let k1 = q * (k / p);
                    acc += cf(u, n, k1) * cf(v, n, k - k1);
                }
                if k % (p - q) == 0 {
                    let k1 = -q * (k / (p - q));
                    acc += cf(u, n, k1) * cf(v, n, k - k1);
                }
                out[(k + n) as usize] = -I * k as f64 * acc;
            }
        }
        hermitian(out, n)
    }
}

fn cube(x: i64) -> i128 {
    let x = x as i128;
    x * x * x
}

/// Largest coefficient-wise distance between a field and a reference band
/// vector of the same length.
pub fn max_coeff_diff(f: &SpectralField, reference: &[Complex64]) -> f64 {
    f.coeffs()
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}

/// Largest coefficient magnitude of a reference band vector.
pub fn max_coeff(reference: &[Complex64]) -> f64 {
    reference.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
