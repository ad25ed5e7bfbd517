//! Differentiation-by-parts operators and checks of the time-integrated
//! identities they satisfy along computed trajectories.
//!
//! The derivative nonlinearities of the coupled system can be traded for
//! quadratic boundary terms (`b1`, `b2`), cubic nonresonant sums (`r1`, `r2`,
//! `r3`) and, when the resonance roots are rational, exactly resonant
//! products (`rho1`, `rho2`). Every starred sum skips index combinations
//! where its denominator vanishes exactly; for a rational dispersion ratio
//! a/b those combinations are detected in integer arithmetic, never by
//! thresholding floats.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::diophantine::{resonant_modes, AlphaClassification, ResonantModeSet};
use crate::dynamics::{propagator, SimParams, Trajectory, MEAN_ZERO_TOL};
use crate::error::{Error, Result};
use crate::spectral::{GridSpec, SpectralField};

/// Smallest |denominator| admitted into each starred sum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MinDivisors {
    pub c_family: f64,
    pub d_family: f64,
}

/// Denominator tables for the starred sums over the index rectangle
/// |k| <= n, |j| <= 2n, stored as reciprocals with exact 0.0 marking an
/// excluded combination (so excluded terms drop out by multiplication):
///
/// ```text
/// c family:  k^3 - a j^3 - a (k-j)^3   = -3 a k (j - c1 k)(j - c2 k)
/// d family:  a k^3 - j^3 - a (k-j)^3   = -(1-a) j (j - d1 k)(j - d2 k)
/// ```
///
/// The quadratic operators read the tables at j = k1 inside the band; the
/// grouped cubic sums read them at the pair index j = k1 + k2, which ranges
/// over twice the band.
pub struct NormalFormOps {
    alpha: AlphaClassification,
    grid: GridSpec,
    inv_c: Vec<f64>,
    inv_d: Vec<f64>,
    excl_c: Vec<(i64, i64)>,
    excl_d: Vec<(i64, i64)>,
    min_div: MinDivisors,
    resonant: Option<ResonantModeSet>,
}

fn cube(x: i64) -> i128 {
    let x = x as i128;
    x * x * x
}

fn real_field(grid: GridSpec, c: Vec<Complex64>) -> SpectralField {
    let mut f = SpectralField::from_coeffs_unchecked(grid, c);
    f.symmetrize();
    f
}

/// Full convolution of two band vectors onto the doubled range [-2n, 2n];
/// entry m + 2n holds sum_{k1+k2=m} f_{k1} g_{k2}.
fn conv_double(f: &[Complex64], g: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; 2 * f.len() - 1];
    for (i, fi) in f.iter().enumerate() {
        for (j, gj) in g.iter().enumerate() {
            out[i + j] += fi * gj;
        }
    }
    out
}

impl NormalFormOps {
    pub fn new(alpha: &AlphaClassification, grid: GridSpec) -> Result<Self> {
        let n = grid.max_mode() as i64;
        let w = (4 * n + 1) as usize;
        let cells = (2 * n + 1) as usize * w;
        let mut inv_c = vec![0.0; cells];
        let mut inv_d = vec![0.0; cells];
        let mut excl_c = Vec::new();
        let mut excl_d = Vec::new();
        let mut min_c = f64::INFINITY;
        let mut min_d = f64::INFINITY;
        let ab = alpha.rational_ab();
        let af = alpha.alpha;
        for k in -n..=n {
            for j in -2 * n..=2 * n {
                // A vanishing denominator is encoded as an exact float zero:
                // the rational branch divides an integer numerator by b, the
                // numeric branch only ever cancels structurally (the k = 0
                // row of the c family, the j = 0 column of the d family).
                let (den_c, den_d) = match ab {
                    Some((a, b)) => {
                        let (a, b) = (a as i128, b as i128);
                        let (k3, j3, l3) = (cube(k), cube(j), cube(k - j));
                        let num_c = b * k3 - a * (j3 + l3);
                        let num_d = a * k3 - b * j3 - a * l3;
                        let scale = b as f64;
                        (num_c as f64 / scale, num_d as f64 / scale)
                    }
                    None => {
                        let (k3, j3, l3) = (cube(k) as f64, cube(j) as f64, cube(k - j) as f64);
                        (k3 - af * (j3 + l3), af * k3 - j3 - af * l3)
                    }
                };
                let idx = (k + n) as usize * w + (j + 2 * n) as usize;
                if den_c == 0.0 {
                    if k != 0 {
                        excl_c.push((k, j));
                    }
                } else {
                    inv_c[idx] = 1.0 / den_c;
                    min_c = min_c.min(den_c.abs());
                }
                if den_d == 0.0 {
                    if j != 0 {
                        excl_d.push((k, j));
                    }
                } else {
                    inv_d[idx] = 1.0 / den_d;
                    min_d = min_d.min(den_d.abs());
                }
            }
        }
        let resonant = if alpha.is_special() {
            Some(resonant_modes(alpha, n)?)
        } else {
            None
        };
        Ok(NormalFormOps {
            alpha: alpha.clone(),
            grid,
            inv_c,
            inv_d,
            excl_c,
            excl_d,
            min_div: MinDivisors {
                c_family: min_c,
                d_family: min_d,
            },
            resonant,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn alpha(&self) -> &AlphaClassification {
        &self.alpha
    }

    pub fn min_divisors(&self) -> MinDivisors {
        self.min_div
    }

    /// Exact resonance pairs (k, j) dropped from c-family sums, beyond the
    /// structural k = 0 row. Nonempty only for special rational ratios.
    pub fn excluded_c_pairs(&self) -> &[(i64, i64)] {
        &self.excl_c
    }

    /// Exact resonance pairs (k, j) dropped from d-family sums, beyond the
    /// structural j = 0 column.
    pub fn excluded_d_pairs(&self) -> &[(i64, i64)] {
        &self.excl_d
    }

    #[inline]
    fn inv_c_at(&self, k: i64, j: i64) -> f64 {
        let n = self.grid.max_mode() as i64;
        self.inv_c[(k + n) as usize * (4 * n + 1) as usize + (j + 2 * n) as usize]
    }

    #[inline]
    fn inv_d_at(&self, k: i64, j: i64) -> f64 {
        let n = self.grid.max_mode() as i64;
        self.inv_d[(k + n) as usize * (4 * n + 1) as usize + (j + 2 * n) as usize]
    }

    fn check_grid(&self, fields: &[&SpectralField]) -> Result<()> {
        for f in fields {
            if f.grid() != self.grid {
                return Err(Error::structure(
                    "field grid does not match the operator table grid",
                ));
            }
        }
        Ok(())
    }

    /// B1(v1,v2)_k = -(k/2) sum* v1_{k1} v2_{k-k1} / (k^3 - a k1^3 - a (k-k1)^3).
    pub fn b1(&self, v1: &SpectralField, v2: &SpectralField) -> Result<SpectralField> {
        self.check_grid(&[v1, v2])?;
        let n = self.grid.max_mode() as i64;
        let (x, y) = (v1.coeffs(), v2.coeffs());
        let mut out = vec![Complex64::ZERO; self.grid.band_len()];
        for k in -n..=n {
            let mut acc = Complex64::ZERO;
            for k1 in (k - n).max(-n)..=(k + n).min(n) {
                acc += x[(k1 + n) as usize] * y[(k - k1 + n) as usize] * self.inv_c_at(k, k1);
            }
            out[(k + n) as usize] = acc * (-0.5 * k as f64);
        }
        Ok(real_field(self.grid, out))
    }

    /// B2(u,v)_k = -k sum* u_{k1} v_{k-k1} / (a k^3 - k1^3 - a (k-k1)^3).
    /// The first argument must be mean-zero; its k1 = 0 column sits on a
    /// structural zero of the denominator.
    pub fn b2(&self, u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
        self.check_grid(&[u, v])?;
        if u.coeff(0).norm() > MEAN_ZERO_TOL {
            return Err(Error::domain(
                "quadratic boundary term b2 needs a mean-zero first argument",
            ));
        }
        let n = self.grid.max_mode() as i64;
        let (x, y) = (u.coeffs(), v.coeffs());
        let mut out = vec![Complex64::ZERO; self.grid.band_len()];
        for k in -n..=n {
            let mut acc = Complex64::ZERO;
            for k1 in (k - n).max(-n)..=(k + n).min(n) {
                acc += x[(k1 + n) as usize] * y[(k - k1 + n) as usize] * self.inv_d_at(k, k1);
            }
            out[(k + n) as usize] = acc * (-(k as f64));
        }
        Ok(real_field(self.grid, out))
    }

    /// Range of the grouped pair index m for output mode k. The free range
    /// covers every pair two band-limited inputs can reach (|m| up to 2n);
    /// the band-restricted range keeps only |m| <= n, which is what the
    /// truncated evolution itself feeds through the substituted equations of
    /// motion. Operator evaluation uses the free range; the trajectory
    /// identity check uses the restricted one.
    fn pair_range(&self, k: i64, within_band: bool) -> std::ops::RangeInclusive<i64> {
        let n = self.grid.max_mode() as i64;
        if within_band {
            (k - n).max(-n)..=(k + n).min(n)
        } else {
            k - n..=k + n
        }
    }

    /// R1(u,v,w)_k = i k sum*_m m (u*v)_m w_{k-m} / (k^3 - a m^3 - a (k-m)^3),
    /// grouped over the pair index m = k1 + k2. Because the c-family
    /// denominator factors as -3 a k (m - c1 k)(m - c2 k), this equals the
    /// root-product form with constant -i/(3a).
    pub fn r1(
        &self,
        u: &SpectralField,
        v: &SpectralField,
        w: &SpectralField,
    ) -> Result<SpectralField> {
        self.r1_impl(u, v, w, false)
    }

    fn r1_impl(
        &self,
        u: &SpectralField,
        v: &SpectralField,
        w: &SpectralField,
        within_band: bool,
    ) -> Result<SpectralField> {
        self.check_grid(&[u, v, w])?;
        let n = self.grid.max_mode() as i64;
        let cuv = conv_double(u.coeffs(), v.coeffs());
        let wc = w.coeffs();
        let mut out = vec![Complex64::ZERO; self.grid.band_len()];
        for k in -n..=n {
            let mut acc = Complex64::ZERO;
            for m in self.pair_range(k, within_band) {
                acc += cuv[(m + 2 * n) as usize]
                    * wc[(k - m + n) as usize]
                    * (m as f64 * self.inv_c_at(k, m));
            }
            out[(k + n) as usize] = Complex64::new(0.0, k as f64) * acc;
        }
        Ok(real_field(self.grid, out))
    }

    /// R2(v1,v2,v3)_k = (i k / 2) sum*_m m (v1*v2)_m v3_{k-m}
    ///                  / (a k^3 - m^3 - a (k-m)^3).
    pub fn r2(
        &self,
        v1: &SpectralField,
        v2: &SpectralField,
        v3: &SpectralField,
    ) -> Result<SpectralField> {
        self.r2_impl(v1, v2, v3, false)
    }

    fn r2_impl(
        &self,
        v1: &SpectralField,
        v2: &SpectralField,
        v3: &SpectralField,
        within_band: bool,
    ) -> Result<SpectralField> {
        self.check_grid(&[v1, v2, v3])?;
        let n = self.grid.max_mode() as i64;
        let cvv = conv_double(v1.coeffs(), v2.coeffs());
        let zc = v3.coeffs();
        let mut out = vec![Complex64::ZERO; self.grid.band_len()];
        for k in -n..=n {
            let mut acc = Complex64::ZERO;
            for m in self.pair_range(k, within_band) {
                acc += cvv[(m + 2 * n) as usize]
                    * zc[(k - m + n) as usize]
                    * (m as f64 * self.inv_d_at(k, m));
            }
            out[(k + n) as usize] = Complex64::new(0.0, 0.5 * k as f64) * acc;
        }
        Ok(real_field(self.grid, out))
    }

    /// R3(u1,u2,v)_k = i k sum*_m m u1_{k-m} (u2*v)_m
    ///                 / (a k^3 - (k-m)^3 - a m^3);
    /// the d-family table is read at the remaining index k - m.
    pub fn r3(
        &self,
        u1: &SpectralField,
        u2: &SpectralField,
        v: &SpectralField,
    ) -> Result<SpectralField> {
        self.r3_impl(u1, u2, v, false)
    }

    fn r3_impl(
        &self,
        u1: &SpectralField,
        u2: &SpectralField,
        v: &SpectralField,
        within_band: bool,
    ) -> Result<SpectralField> {
        self.check_grid(&[u1, u2, v])?;
        let n = self.grid.max_mode() as i64;
        let cuv = conv_double(u2.coeffs(), v.coeffs());
        let xc = u1.coeffs();
        let mut out = vec![Complex64::ZERO; self.grid.band_len()];
        for k in -n..=n {
            let mut acc = Complex64::ZERO;
            for m in self.pair_range(k, within_band) {
                acc += xc[(k - m + n) as usize]
                    * cuv[(m + 2 * n) as usize]
                    * (m as f64 * self.inv_d_at(k, k - m));
            }
            out[(k + n) as usize] = Complex64::new(0.0, k as f64) * acc;
        }
        Ok(real_field(self.grid, out))
    }

    /// rho1(v1,v2)_k = -i k v1_{c1 k} v2_{c2 k}, evaluated only at the integer
    /// points of the c resonance lines; identically zero unless the ratio is
    /// special rational.
    pub fn rho1(&self, v1: &SpectralField, v2: &SpectralField) -> Result<SpectralField> {
        self.check_grid(&[v1, v2])?;
        let n = self.grid.max_mode() as i64;
        let mut out = vec![Complex64::ZERO; self.grid.band_len()];
        if let Some(set) = &self.resonant {
            for t in &set.c {
                out[(t.k + n) as usize] +=
                    Complex64::new(0.0, -(t.k as f64)) * v1.coeff(t.k1) * v2.coeff(t.k2);
            }
        }
        Ok(real_field(self.grid, out))
    }

    /// rho2(u,v)_k = -i k (u_{d1 k} v_{(1-d1) k} + u_{d2 k} v_{(1-d2) k}) at
    /// the integer points of the d resonance lines.
    pub fn rho2(&self, u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
        self.check_grid(&[u, v])?;
        let n = self.grid.max_mode() as i64;
        let mut out = vec![Complex64::ZERO; self.grid.band_len()];
        if let Some(set) = &self.resonant {
            for t in set.d1.iter().chain(set.d2.iter()) {
                out[(t.k + n) as usize] +=
                    Complex64::new(0.0, -(t.k as f64)) * u.coeff(t.k1) * v.coeff(t.k2);
            }
        }
        Ok(real_field(self.grid, out))
    }
}

/// Residual series of the time-integrated normal-form identities along a
/// stored trajectory of the undamped, unforced flow.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub times: Vec<f64>,
    pub residual_u: Vec<f64>,
    pub residual_v: Vec<f64>,
    pub max_residual_u: f64,
    pub max_residual_v: f64,
    /// Whether the resonant rho corrections were part of the integrand.
    pub include_resonant: bool,
    /// Set when the stored interval count is odd, so the final point is
    /// reached with one trapezoid panel on top of the Simpson pairs.
    pub trapezoid_tail: bool,
}

fn phased(c: &[Complex64], p: &[Complex64]) -> Vec<Complex64> {
    c.iter().zip(p).map(|(z, w)| z * w).collect()
}

fn l2(c: &[Complex64]) -> f64 {
    c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Evaluate both integrated identities at every stored snapshot and return
/// the relative l2 residual series. The quadrature is cumulative composite
/// Simpson over snapshot pairs; an odd interval index is reached with a
/// single trapezoid panel on top of the last Simpson prefix.
///
/// The check applies to the undamped, unforced nonlinear flow started at
/// t = 0 with uniform snapshot spacing; anything else is rejected.
pub fn identity_residual(
    ops: &NormalFormOps,
    traj: &Trajectory,
    params: &SimParams,
    include_resonant: bool,
) -> Result<IdentityReport> {
    if traj.states.len() < 2 {
        return Err(Error::domain(
            "identity check needs at least two stored snapshots",
        ));
    }
    if params.gamma != 0.0 || params.delta != 0.0 || params.f.is_some() || params.g.is_some() {
        return Err(Error::domain(
            "the integrated identities hold for the undamped, unforced flow",
        ));
    }
    if !params.nonlinear {
        return Err(Error::domain(
            "the integrated identities describe the nonlinear flow",
        ));
    }
    if params.alpha.alpha != ops.alpha.alpha {
        return Err(Error::domain(
            "dispersion ratio of the trajectory differs from the operator tables",
        ));
    }
    let grid = ops.grid;
    let h = traj.stride;
    for (j, st) in traj.states.iter().enumerate() {
        if st.grid() != grid {
            return Err(Error::structure("snapshot grid differs from operator grid"));
        }
        if (st.t - j as f64 * h).abs() > 1e-9 * (1.0 + st.t.abs()) {
            return Err(Error::domain(
                "snapshots must start at t = 0 with uniform spacing",
            ));
        }
    }
    let alpha = ops.alpha.alpha;

    // Per-snapshot integrands (phase-unwound) and boundary terms.
    struct Slice {
        gu: Vec<Complex64>,
        gv: Vec<Complex64>,
        b1: SpectralField,
        b2: SpectralField,
    }
    let slices: Vec<Slice> = traj
        .states
        .par_iter()
        .map(|st| -> Result<Slice> {
            // Band-restricted pair range: the trajectory solves the truncated
            // system, so the substituted equations of motion only visit pair
            // indices inside the band. The free-range operators would add
            // tail terms the flow never produced and leave a stride-
            // independent residual floor.
            let mut fu = ops.r1_impl(&st.u, &st.v, &st.v, true)?;
            let mut fv =
                &ops.r2_impl(&st.v, &st.v, &st.v, true)? + &ops.r3_impl(&st.u, &st.u, &st.v, true)?;
            if include_resonant {
                fu = &fu + &ops.rho1(&st.v, &st.v)?;
                fv = &fv + &ops.rho2(&st.u, &st.v)?;
            }
            let pu = propagator(grid, 1.0, 0.0, -st.t);
            let pv = propagator(grid, alpha, 0.0, -st.t);
            Ok(Slice {
                gu: phased(fu.coeffs(), &pu),
                gv: phased(fv.coeffs(), &pv),
                b1: ops.b1(&st.v, &st.v)?,
                b2: ops.b2(&st.u, &st.v)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // Cumulative quadrature of the phase-unwound integrands.
    let len = slices.len();
    let band = grid.band_len();
    let mut iu = vec![vec![Complex64::ZERO; band]; len];
    let mut iv = vec![vec![Complex64::ZERO; band]; len];
    for j in 1..len {
        if j % 2 == 0 {
            for i in 0..band {
                iu[j][i] = iu[j - 2][i]
                    + (h / 3.0) * (slices[j - 2].gu[i] + 4.0 * slices[j - 1].gu[i] + slices[j].gu[i]);
                iv[j][i] = iv[j - 2][i]
                    + (h / 3.0) * (slices[j - 2].gv[i] + 4.0 * slices[j - 1].gv[i] + slices[j].gv[i]);
            }
        } else {
            for i in 0..band {
                iu[j][i] = iu[j - 1][i] + (h / 2.0) * (slices[j - 1].gu[i] + slices[j].gu[i]);
                iv[j][i] = iv[j - 1][i] + (h / 2.0) * (slices[j - 1].gv[i] + slices[j].gv[i]);
            }
        }
    }

    let u0 = traj.states[0].u.coeffs();
    let v0 = traj.states[0].v.coeffs();
    let b1_0 = slices[0].b1.coeffs();
    let b2_0 = slices[0].b2.coeffs();
    let mut times = Vec::with_capacity(len);
    let mut residual_u = Vec::with_capacity(len);
    let mut residual_v = Vec::with_capacity(len);
    for (j, st) in traj.states.iter().enumerate() {
        let pu = propagator(grid, 1.0, 0.0, st.t);
        let pv = propagator(grid, alpha, 0.0, st.t);
        let ut = st.u.coeffs();
        let vt = st.v.coeffs();
        let b1_t = slices[j].b1.coeffs();
        let b2_t = slices[j].b2.coeffs();
        let mut nu = 0.0;
        let mut nv = 0.0;
        for i in 0..band {
            let ru = ut[i] + b1_t[i] - pu[i] * (u0[i] + b1_0[i] + iu[j][i]);
            let rv = vt[i] + b2_t[i] - pv[i] * (v0[i] + b2_0[i] + iv[j][i]);
            nu += ru.norm_sqr();
            nv += rv.norm_sqr();
        }
        let (nu, nv) = (nu.sqrt(), nv.sqrt());
        let rel = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };
        times.push(st.t);
        residual_u.push(rel(nu, l2(ut)));
        residual_v.push(rel(nv, l2(vt)));
    }
    let fold_max = |xs: &[f64]| xs.iter().fold(0.0_f64, |a, &b| a.max(b));
    Ok(IdentityReport {
        max_residual_u: fold_max(&residual_u),
        max_residual_v: fold_max(&residual_v),
        times,
        residual_u,
        residual_v,
        include_resonant,
        trapezoid_tail: (len - 1) % 2 == 1,
    })
}

/// The part of the state created by the nonlinearity: the difference between
/// the current state and the bare linear flow of the initial data.
pub fn nonlinear_residual(
    state: &crate::dynamics::MBState,
    u0: &SpectralField,
    v0: &SpectralField,
    alpha: f64,
) -> Result<(SpectralField, SpectralField)> {
    nonlinear_residual_damped(state, u0, v0, alpha, 0.0, 0.0)
}

/// As `nonlinear_residual`, but subtracting the damped linear flow.
pub fn nonlinear_residual_damped(
    state: &crate::dynamics::MBState,
    u0: &SpectralField,
    v0: &SpectralField,
    alpha: f64,
    gamma: f64,
    delta: f64,
) -> Result<(SpectralField, SpectralField)> {
    let grid = state.grid();
    if u0.grid() != grid || v0.grid() != grid {
        return Err(Error::structure(
            "initial data grid differs from the state grid",
        ));
    }
    let pu = propagator(grid, 1.0, gamma, state.t);
    let pv = propagator(grid, alpha, delta, state.t);
    let lu = crate::dynamics::apply_multiplier(u0, &pu);
    let lv = crate::dynamics::apply_multiplier(v0, &pv);
    Ok((&state.u - &lu, &state.v - &lv))
}
