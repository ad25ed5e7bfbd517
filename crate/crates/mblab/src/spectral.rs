//! Real-valued trigonometric polynomials on [0, 2*pi) in coefficient form.
//!
//! A field is stored as complex Fourier coefficients `c_k`, |k| <= N, for
//! `f(x) = sum_k c_k e^{ikx}` with `c_k = (1/2pi) int f(x) e^{-ikx} dx`.
//! Hermitian symmetry `c_{-k} = conj(c_k)` is enforced bit-exactly after every
//! forward transform, so real-valuedness survives arbitrarily long pipelines.
//!
//! Products are evaluated pseudospectrally on a zero-padded grid and truncated
//! back to the base band, so a quadratic nonlinearity is exactly the truncated
//! convolution of the inputs (no aliasing error at any retained mode).

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Spread of the random-field magnitude exponent below the requested
/// regularity, keeping the H^s norm finite with a deterministic profile.
pub const RANDOM_FIELD_SIGMA: f64 = 0.01;

/// Tolerance on the Hermitian defect max_k |c_k - conj(c_{-k})| of data that
/// claims to represent a real field.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Ceiling on the imaginary leakage of a synthesized signal, relative to
/// its coefficient mass (so large-amplitude fields are held to the same
/// roundoff standard as order-one ones).
pub const SYNTHESIS_IMAG_TOL: f64 = 1e-12;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_forward(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

fn fft_inverse(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Discretization parameters: maximal retained mode `n` and number of
/// physical quadrature points `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    n: usize,
    m: usize,
}

impl GridSpec {
    /// A grid keeping modes |k| <= n, sampled at m uniform points.
    /// Requires n >= 1 and m >= 2n+1 so the retained band is representable.
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::structure("grid needs at least one mode (n >= 1)"));
        }
        if m < 2 * n + 1 {
            return Err(Error::structure(format!(
                "m = {m} physical points cannot represent modes up to n = {n}; need m >= {}",
                2 * n + 1
            )));
        }
        Ok(GridSpec { n, m })
    }

    /// Grid sized for quadratic nonlinearities (m = 3n).
    pub fn quadratic(n: usize) -> Result<Self> {
        Self::new(n, 3 * n)
    }

    pub fn max_mode(&self) -> usize {
        self.n
    }

    pub fn phys_points(&self) -> usize {
        self.m
    }

    /// Number of stored coefficients, 2n+1.
    pub fn band_len(&self) -> usize {
        2 * self.n + 1
    }

    /// Whether the physical grid is large enough for dealiased quadratic
    /// products of fields on this band.
    pub fn supports_quadratic(&self) -> bool {
        self.m >= 3 * self.n
    }
}

/// A real-valued field held as Fourier coefficients c_{-n}..c_n.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    /// c[i] is the coefficient of e^{ikx} with k = i - n.
    c: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        SpectralField {
            grid,
            c: vec![Complex64::ZERO; grid.band_len()],
        }
    }

    /// Build from (mode, coefficient) pairs; each entry sets c_k and the
    /// conjugate at -k. The k = 0 entry must be (numerically) real.
    pub fn from_modes(grid: GridSpec, modes: &[(i64, Complex64)]) -> Result<Self> {
        let mut f = Self::zeros(grid);
        for &(k, val) in modes {
            f.set_mode(k, val)?;
        }
        Ok(f)
    }

    /// Adopt a raw coefficient vector (length 2n+1, ascending k) after
    /// validating Hermitian symmetry.
    pub fn from_coeffs(grid: GridSpec, c: Vec<Complex64>) -> Result<Self> {
        if c.len() != grid.band_len() {
            return Err(Error::structure(format!(
                "coefficient vector has length {}, grid wants {}",
                c.len(),
                grid.band_len()
            )));
        }
        let f = SpectralField { grid, c };
        let defect = f.hermitian_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::structure(format!(
                "coefficients are not Hermitian (defect {defect:.3e})"
            )));
        }
        Ok(f)
    }

    pub(crate) fn from_coeffs_unchecked(grid: GridSpec, c: Vec<Complex64>) -> Self {
        debug_assert_eq!(c.len(), grid.band_len());
        SpectralField { grid, c }
    }

    /// Random field with |c_k| = <k>^{-(s + 1/2 + sigma)} and i.i.d. uniform
    /// phases drawn from a counter-based generator, so a seed pins the field
    /// exactly. `mean_zero` forces c_0 = 0; otherwise c_0 = cos(theta_0).
    pub fn random(grid: GridSpec, s: f64, seed: u64, mean_zero: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Self::zeros(grid);
        let theta0 = 2.0 * PI * rng.random::<f64>();
        if !mean_zero {
            f.c[grid.n] = Complex64::new(theta0.cos(), 0.0);
        }
        let expo = -(s + 0.5 + RANDOM_FIELD_SIGMA);
        for k in 1..=grid.n {
            let theta = 2.0 * PI * rng.random::<f64>();
            let mag = (1.0 + (k * k) as f64).sqrt().powf(expo);
            let val = Complex64::new(mag * theta.cos(), mag * theta.sin());
            f.c[grid.n + k] = val;
            f.c[grid.n - k] = val.conj();
        }
        f
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Coefficient of e^{ikx}; zero outside the retained band.
    pub fn coeff(&self, k: i64) -> Complex64 {
        let n = self.grid.n as i64;
        if k.abs() > n {
            Complex64::ZERO
        } else {
            self.c[(k + n) as usize]
        }
    }

    /// Set c_k = val and c_{-k} = conj(val). Errors on out-of-band k and on a
    /// non-real k = 0 value.
    pub fn set_mode(&mut self, k: i64, val: Complex64) -> Result<()> {
        let n = self.grid.n as i64;
        if k.abs() > n {
            return Err(Error::structure(format!(
                "mode {k} outside band |k| <= {n}"
            )));
        }
        if k == 0 && val.im.abs() > SYNTHESIS_IMAG_TOL {
            return Err(Error::structure(format!(
                "k = 0 coefficient must be real, got imaginary part {:.3e}",
                val.im
            )));
        }
        if k == 0 {
            self.c[self.grid.n] = Complex64::new(val.re, 0.0);
        } else {
            self.c[(k + n) as usize] = val;
            self.c[(n - k) as usize] = val.conj();
        }
        Ok(())
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.c
    }

    /// max_k |c_k - conj(c_{-k})|.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n;
        let mut worst = self.c[n].im.abs();
        for k in 1..=n {
            let d = (self.c[n + k] - self.c[n - k].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
        worst
    }

    /// Rewrite the coefficients as the nearest exactly-Hermitian vector:
    /// c_k <- (c_k + conj(c_{-k})) / 2. Applied after every forward transform.
    pub(crate) fn symmetrize(&mut self) {
        let n = self.grid.n;
        self.c[n] = Complex64::new(self.c[n].re, 0.0);
        for k in 1..=n {
            let avg = 0.5 * (self.c[n + k] + self.c[n - k].conj());
            self.c[n + k] = avg;
            self.c[n - k] = avg.conj();
        }
    }

    /// Synthesize the field at the grid's m uniform points x_j = 2 pi j / m.
    pub fn to_physical(&self) -> Result<Vec<f64>> {
        self.physical_on(self.grid.m)
    }

    /// Synthesize at `points` uniform samples (points >= 2n+1).
    pub fn physical_on(&self, points: usize) -> Result<Vec<f64>> {
        if points < self.grid.band_len() {
            return Err(Error::structure(format!(
                "{points} samples alias modes up to {}; need at least {}",
                self.grid.n,
                self.grid.band_len()
            )));
        }
        let defect = self.hermitian_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::structure(format!(
                "refusing to synthesize non-Hermitian coefficients (defect {defect:.3e})"
            )));
        }
        let spec = self.embed_bins(points);
        let mut buf = spec;
        fft_inverse(points).process(&mut buf);
        // Leakage scales with signal size; 1 + sum |c_k| bounds the sup norm.
        let scale = 1.0 + self.c.iter().map(|z| z.norm()).sum::<f64>();
        let mut out = Vec::with_capacity(points);
        for z in &buf {
            if z.im.abs() > SYNTHESIS_IMAG_TOL * scale {
                return Err(Error::structure(format!(
                    "synthesized signal has imaginary leakage {:.3e}",
                    z.im
                )));
            }
            out.push(z.re);
        }
        Ok(out)
    }

    /// Place band coefficients into length-`points` FFT bin order.
    fn embed_bins(&self, points: usize) -> Vec<Complex64> {
        let n = self.grid.n;
        let mut bins = vec![Complex64::ZERO; points];
        for k in 0..=n {
            bins[k] = self.c[n + k];
        }
        for k in 1..=n {
            bins[points - k] = self.c[n - k];
        }
        bins
    }

    /// Analyze m uniform samples into band coefficients (inverse of
    /// `to_physical` whenever the signal is band-limited to |k| <= n).
    pub fn from_physical(grid: GridSpec, samples: &[f64]) -> Result<Self> {
        if samples.len() != grid.m {
            return Err(Error::structure(format!(
                "sample vector has length {}, grid wants {}",
                samples.len(),
                grid.m
            )));
        }
        let mut buf: Vec<Complex64> = samples
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        fft_forward(grid.m).process(&mut buf);
        let scale = 1.0 / grid.m as f64;
        let n = grid.n;
        let mut c = vec![Complex64::ZERO; grid.band_len()];
        for k in 0..=n {
            c[n + k] = buf[k] * scale;
        }
        for k in 1..=n {
            c[n - k] = buf[grid.m - k] * scale;
        }
        let mut f = SpectralField { grid, c };
        f.symmetrize();
        Ok(f)
    }

    /// Sobolev norm ||<k>^s c_k||_{l^2} with <k> = (1 + k^2)^{1/2}.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let n = self.grid.n as i64;
        let mut acc = 0.0;
        for (i, z) in self.c.iter().enumerate() {
            let k = i as i64 - n;
            let w = (1.0 + (k * k) as f64).powf(s);
            acc += w * z.norm_sqr();
        }
        acc.sqrt()
    }

    /// l^2 norm of the coefficient vector (= H^0 norm).
    pub fn l2_norm(&self) -> f64 {
        self.sobolev_norm(0.0)
    }

    /// Sup norm estimated on a 4n-point synthesis grid.
    pub fn linf_norm(&self) -> f64 {
        let pts = (4 * self.grid.n).max(self.grid.band_len());
        let samples = self
            .physical_on(pts)
            .expect("valid field synthesizes cleanly");
        samples.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    /// d^order/dx^order: multiplies c_k by (ik)^order.
    pub fn derivative(&self, order: u32) -> SpectralField {
        let n = self.grid.n as i64;
        let mut out = self.clone();
        for (i, z) in out.c.iter_mut().enumerate() {
            let k = (i as i64 - n) as f64;
            let kp = k.powi(order as i32);
            let factor = match order % 4 {
                0 => Complex64::new(kp, 0.0),
                1 => Complex64::new(0.0, kp),
                2 => Complex64::new(-kp, 0.0),
                _ => Complex64::new(0.0, -kp),
            };
            *z *= factor;
        }
        out
    }

    /// 2 pi c_0, the integral of the field over the torus.
    pub fn integral(&self) -> f64 {
        2.0 * PI * self.c[self.grid.n].re
    }

    /// int f g dx = 2 pi sum_k f_k conj(g_k) for real fields.
    pub fn l2_pairing(&self, other: &SpectralField) -> f64 {
        assert_eq!(self.grid, other.grid, "l2_pairing needs matching grids");
        let mut acc = Complex64::ZERO;
        for (a, b) in self.c.iter().zip(&other.c) {
            acc += a * b.conj();
        }
        2.0 * PI * acc.re
    }

    pub fn scale(&self, a: f64) -> SpectralField {
        let mut out = self.clone();
        for z in &mut out.c {
            *z *= a;
        }
        out
    }

    /// self += a * other.
    pub fn add_scaled(&mut self, a: f64, other: &SpectralField) {
        assert_eq!(self.grid, other.grid, "add_scaled needs matching grids");
        for (z, w) in self.c.iter_mut().zip(&other.c) {
            *z += a * w;
        }
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }
}

impl std::ops::Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.add_scaled(1.0, rhs);
        out
    }
}

impl std::ops::Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.add_scaled(-1.0, rhs);
        out
    }
}

/// Pointwise product truncated to the base band, evaluated without aliasing.
///
/// The field grid must satisfy m >= 3n (the configuration contract for
/// quadratic runs); internally the product is formed on a 4n-point grid, which
/// leaves every retained mode of a quadratic product alias-free.
pub fn dealias_product(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    if f.grid != g.grid {
        return Err(Error::structure("product needs matching grids"));
    }
    let grid = f.grid;
    if !grid.supports_quadratic() {
        return Err(Error::structure(format!(
            "grid m = {} too small for dealiased products at n = {}; need m >= {}",
            grid.m,
            grid.n,
            3 * grid.n
        )));
    }
    let pts = 4 * grid.n;
    let fa = f.physical_on(pts)?;
    let ga = g.physical_on(pts)?;
    let prod: Vec<f64> = fa.iter().zip(&ga).map(|(a, b)| a * b).collect();

    let mut buf: Vec<Complex64> = prod.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_forward(pts).process(&mut buf);
    let scale = 1.0 / pts as f64;
    let n = grid.n;
    let mut c = vec![Complex64::ZERO; grid.band_len()];
    for k in 0..=n {
        c[n + k] = buf[k] * scale;
    }
    for k in 1..=n {
        c[n - k] = buf[pts - k] * scale;
    }
    let mut out = SpectralField { grid, c };
    out.symmetrize();
    Ok(out)
}

/// Mean over the torus of f * g^2, i.e. (1/2pi) int f g^2 dx, with the cubic
/// product evaluated on a 4n-point grid so the k = 0 mode is alias-free.
pub fn mean_of_triple(f: &SpectralField, g: &SpectralField) -> Result<f64> {
    if f.grid != g.grid {
        return Err(Error::structure("triple product needs matching grids"));
    }
    let pts = 4 * f.grid.n;
    let fa = f.physical_on(pts)?;
    let ga = g.physical_on(pts)?;
    let mut acc = 0.0;
    for (a, b) in fa.iter().zip(&ga) {
        acc += a * b * b;
    }
    Ok(acc / pts as f64)
}
