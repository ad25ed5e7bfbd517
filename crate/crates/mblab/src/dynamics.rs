//! Time integration of the coupled system in coefficient space.
//!
//! The semi-discrete system for the retained band is
//!
//! ```text
//!   d/dt u_k = (i k^3 - gamma) u_k - (ik/2) (v*v)_k + f_k
//!   d/dt v_k = (i alpha k^3 - delta) v_k - ik (u*v)_k + g_k
//! ```
//!
//! with truncated dealiased convolutions. The stepper integrates the linear
//! part exactly through integrating factors and applies classical RK4 to the
//! transformed system, so runs with the nonlinearity disabled reproduce the
//! linear flow to rounding error at any step size.

use num_complex::Complex64;
use serde::Serialize;

use crate::diophantine::AlphaClassification;
use crate::error::{Error, Result};
use crate::spectral::{dealias_product, mean_of_triple, GridSpec, SpectralField};

/// Coefficient magnitude past which a run is declared blown up.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// Mean-mode tolerance for fields that must have zero average.
pub const MEAN_ZERO_TOL: f64 = 1e-14;

/// Default step size for a band of n modes.
pub fn default_dt(n: usize) -> f64 {
    (1e-3f64).min(0.5 / n as f64)
}

/// Instantaneous state (u, v) at time t. u is mean-zero throughout.
#[derive(Debug, Clone)]
pub struct MBState {
    pub u: SpectralField,
    pub v: SpectralField,
    pub t: f64,
}

impl MBState {
    pub fn new(u: SpectralField, v: SpectralField, t: f64) -> Result<Self> {
        if u.grid() != v.grid() {
            return Err(Error::structure("u and v must share a grid"));
        }
        if u.coeff(0).norm() > MEAN_ZERO_TOL {
            return Err(Error::domain(format!(
                "u must be mean-zero, got |c_0| = {:.3e}",
                u.coeff(0).norm()
            )));
        }
        Ok(MBState { u, v, t })
    }

    pub fn grid(&self) -> GridSpec {
        self.u.grid()
    }

    pub fn max_abs(&self) -> f64 {
        self.u.max_abs().max(self.v.max_abs())
    }

    /// Sum of the two H^s norms, the distance-to-zero diagnostic.
    pub fn h_norm(&self, s: f64) -> f64 {
        self.u.sobolev_norm(s) + self.v.sobolev_norm(s)
    }
}

/// Everything the stepper needs: dispersion ratio, damping, forcing, step.
#[derive(Debug, Clone)]
pub struct SimParams {
    pub alpha: AlphaClassification,
    pub gamma: f64,
    pub delta: f64,
    pub f: Option<SpectralField>,
    pub g: Option<SpectralField>,
    pub dt: f64,
    pub t_end: f64,
    pub nonlinear: bool,
    pub blowup_threshold: f64,
}

impl SimParams {
    pub fn undamped(alpha: AlphaClassification, dt: f64, t_end: f64) -> Self {
        SimParams {
            alpha,
            gamma: 0.0,
            delta: 0.0,
            f: None,
            g: None,
            dt,
            t_end,
            nonlinear: true,
            blowup_threshold: BLOWUP_THRESHOLD,
        }
    }

    pub fn validate(&self, grid: GridSpec) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::config("time.dt", "must be positive"));
        }
        if self.t_end < 0.0 {
            return Err(Error::config("time.t_end", "must be nonnegative"));
        }
        if self.gamma < 0.0 || self.delta < 0.0 {
            return Err(Error::config("model.gamma", "damping must be nonnegative"));
        }
        if (self.gamma > 0.0) != (self.delta > 0.0) {
            return Err(Error::config(
                "model.delta",
                "damped runs need both gamma > 0 and delta > 0 (or neither)",
            ));
        }
        for (name, field) in [("forcing.f", &self.f), ("forcing.g", &self.g)] {
            if let Some(h) = field {
                if h.grid() != grid {
                    return Err(Error::config(name, "forcing grid does not match the run grid"));
                }
                if h.coeff(0).norm() > MEAN_ZERO_TOL {
                    return Err(Error::config(name, "forcing must be mean-zero"));
                }
            }
        }
        if self.nonlinear && !grid.supports_quadratic() {
            return Err(Error::config(
                "grid.m",
                format!(
                    "nonlinear runs need m >= 3n for dealiased products (n = {}, m = {})",
                    grid.max_mode(),
                    grid.phys_points()
                ),
            ));
        }
        Ok(())
    }
}

/// Nonlinear tendencies (no linear part, no forcing):
/// du = -(1/2) d/dx (v^2), dv = -d/dx (u v), dealiased.
pub fn rhs_nonlinear(u: &SpectralField, v: &SpectralField) -> Result<(SpectralField, SpectralField)> {
    let vv = dealias_product(v, v)?;
    let uv = dealias_product(u, v)?;
    let du = vv.derivative(1).scale(-0.5);
    let dv = uv.derivative(1).scale(-1.0);
    Ok((du, dv))
}

/// Exact flow of the linear, damped part over time t:
/// u_k -> e^{(i k^3 - gamma) t} u_k, v_k -> e^{(i alpha k^3 - delta) t} v_k.
pub fn linear_flow(state: &MBState, alpha: f64, gamma: f64, delta: f64, t: f64) -> MBState {
    let grid = state.grid();
    let mu = propagator(grid, 1.0, gamma, t);
    let mv = propagator(grid, alpha, delta, t);
    MBState {
        u: apply_multiplier(&state.u, &mu),
        v: apply_multiplier(&state.v, &mv),
        t: state.t + t,
    }
}

/// Band multiplier e^{(i a k^3 - damping) t}, built for k >= 0 and mirrored by
/// conjugation so applying it preserves Hermitian symmetry bit-exactly.
pub(crate) fn propagator(grid: GridSpec, a: f64, damping: f64, t: f64) -> Vec<Complex64> {
    let n = grid.max_mode();
    let decay = (-damping * t).exp();
    let mut m = vec![Complex64::ZERO; grid.band_len()];
    for k in 0..=n {
        let phase = a * (k as f64).powi(3) * t;
        let z = Complex64::new(decay * phase.cos(), decay * phase.sin());
        m[n + k] = z;
        m[n - k] = z.conj();
    }
    m
}

pub(crate) fn apply_multiplier(f: &SpectralField, m: &[Complex64]) -> SpectralField {
    let mut c = f.coeffs().to_vec();
    for (z, w) in c.iter_mut().zip(m) {
        *z *= w;
    }
    SpectralField::from_coeffs_unchecked(f.grid(), c)
}

/// Integrating-factor RK4 stepper with cached propagators.
pub struct Ifrk4 {
    grid: GridSpec,
    dt: f64,
    eu_full: Vec<Complex64>,
    eu_half: Vec<Complex64>,
    ev_full: Vec<Complex64>,
    ev_half: Vec<Complex64>,
    f: Option<SpectralField>,
    g: Option<SpectralField>,
    nonlinear: bool,
    blowup_threshold: f64,
}

impl Ifrk4 {
    pub fn new(params: &SimParams, grid: GridSpec) -> Result<Self> {
        params.validate(grid)?;
        let alpha = params.alpha.alpha;
        Ok(Ifrk4 {
            grid,
            dt: params.dt,
            eu_full: propagator(grid, 1.0, params.gamma, params.dt),
            eu_half: propagator(grid, 1.0, params.gamma, params.dt / 2.0),
            ev_full: propagator(grid, alpha, params.delta, params.dt),
            ev_half: propagator(grid, alpha, params.delta, params.dt / 2.0),
            f: params.f.clone(),
            g: params.g.clone(),
            nonlinear: params.nonlinear,
            blowup_threshold: params.blowup_threshold,
        })
    }

    /// Nonlinearity plus forcing.
    fn tendency(&self, u: &SpectralField, v: &SpectralField) -> Result<(SpectralField, SpectralField)> {
        let (mut du, mut dv) = if self.nonlinear {
            rhs_nonlinear(u, v)?
        } else {
            (SpectralField::zeros(self.grid), SpectralField::zeros(self.grid))
        };
        if let Some(f) = &self.f {
            du.add_scaled(1.0, f);
        }
        if let Some(g) = &self.g {
            dv.add_scaled(1.0, g);
        }
        Ok((du, dv))
    }

    /// One step of length dt. Errors with the pre-step state attached when a
    /// coefficient crosses the blow-up threshold.
    pub fn step(&self, state: &MBState) -> Result<MBState> {
        let h = self.dt;
        let (u, v) = (&state.u, &state.v);

        let (k1u, k1v) = self.tendency(u, v)?;

        let mut au = u.clone();
        au.add_scaled(h / 2.0, &k1u);
        let mut av = v.clone();
        av.add_scaled(h / 2.0, &k1v);
        let (k2u, k2v) =
            self.tendency(&apply_multiplier(&au, &self.eu_half), &apply_multiplier(&av, &self.ev_half))?;

        let mut bu = apply_multiplier(u, &self.eu_half);
        bu.add_scaled(h / 2.0, &k2u);
        let mut bv = apply_multiplier(v, &self.ev_half);
        bv.add_scaled(h / 2.0, &k2v);
        let (k3u, k3v) = self.tendency(&bu, &bv)?;

        let mut cu = apply_multiplier(u, &self.eu_full);
        cu.add_scaled(h, &apply_multiplier(&k3u, &self.eu_half));
        let mut cv = apply_multiplier(v, &self.ev_full);
        cv.add_scaled(h, &apply_multiplier(&k3v, &self.ev_half));
        let (k4u, k4v) = self.tendency(&cu, &cv)?;

        let mut nu = apply_multiplier(u, &self.eu_full);
        nu.add_scaled(h / 6.0, &apply_multiplier(&k1u, &self.eu_full));
        let mut sum_mid = k2u.clone();
        sum_mid.add_scaled(1.0, &k3u);
        nu.add_scaled(h / 3.0, &apply_multiplier(&sum_mid, &self.eu_half));
        nu.add_scaled(h / 6.0, &k4u);

        let mut nv = apply_multiplier(v, &self.ev_full);
        nv.add_scaled(h / 6.0, &apply_multiplier(&k1v, &self.ev_full));
        let mut sum_mid_v = k2v.clone();
        sum_mid_v.add_scaled(1.0, &k3v);
        nv.add_scaled(h / 3.0, &apply_multiplier(&sum_mid_v, &self.ev_half));
        nv.add_scaled(h / 6.0, &k4v);

        let next = MBState {
            u: nu,
            v: nv,
            t: state.t + h,
        };
        // Written so a NaN (post-overflow) state also trips the check.
        if !(next.max_abs() <= self.blowup_threshold) {
            return Err(Error::BlowUp {
                t: next.t,
                max_coeff: next.max_abs(),
                threshold: self.blowup_threshold,
                last_good: Box::new(state.clone()),
            });
        }
        Ok(next)
    }
}

/// The four tracked functionals: means of u and v, the quadratic energy
/// int u^2 + v^2, and the Hamiltonian-type int u_x^2 + alpha v_x^2 - u v^2.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Conserved {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
}

pub fn conserved_quantities(state: &MBState, alpha: f64) -> Result<Conserved> {
    let tau = 2.0 * std::f64::consts::PI;
    let ux = state.u.derivative(1);
    let vx = state.v.derivative(1);
    let e4_quad = tau * (ux.l2_norm().powi(2) + alpha * vx.l2_norm().powi(2));
    let cubic = tau * mean_of_triple(&state.u, &state.v)?;
    Ok(Conserved {
        e1: state.u.integral(),
        e2: state.v.integral(),
        e3: tau * (state.u.l2_norm().powi(2) + state.v.l2_norm().powi(2)),
        e4: e4_quad - cubic,
    })
}

/// What to record while evolving.
#[derive(Debug, Clone)]
pub struct ObserverSpec {
    /// Record diagnostics every this many steps.
    pub diag_stride_steps: usize,
    /// Store full states every this many steps (None: keep no trajectory).
    pub snapshot_stride_steps: Option<usize>,
    /// Sobolev indices whose norms are recorded for u and v separately.
    pub sobolev_indices: Vec<f64>,
}

impl ObserverSpec {
    pub fn diagnostics_only(diag_stride_steps: usize) -> Self {
        ObserverSpec {
            diag_stride_steps,
            snapshot_stride_steps: None,
            sobolev_indices: vec![1.0],
        }
    }
}

/// Columnar diagnostic record of one run.
#[derive(Debug, Clone, Serialize)]
pub struct DiagSeries {
    pub t: Vec<f64>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub e3: Vec<f64>,
    pub e4: Vec<f64>,
    pub sobolev_indices: Vec<f64>,
    /// norms_u[i][j]: H^{s_i} norm of u at time t_j.
    pub norms_u: Vec<Vec<f64>>,
    pub norms_v: Vec<Vec<f64>>,
    /// int (f u + g v) dx at each sample.
    pub forcing_power: Vec<f64>,
}

impl DiagSeries {
    fn new(sobolev_indices: Vec<f64>) -> Self {
        let slots = sobolev_indices.len();
        DiagSeries {
            t: Vec::new(),
            e1: Vec::new(),
            e2: Vec::new(),
            e3: Vec::new(),
            e4: Vec::new(),
            sobolev_indices,
            norms_u: vec![Vec::new(); slots],
            norms_v: vec![Vec::new(); slots],
            forcing_power: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Uniformly strided stored states.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<MBState>,
    /// Time between consecutive stored states.
    pub stride: f64,
}

impl Trajectory {
    /// Keep every `factor`-th state (coarsening the stride).
    pub fn thin(&self, factor: usize) -> Trajectory {
        assert!(factor >= 1);
        Trajectory {
            states: self.states.iter().step_by(factor).cloned().collect(),
            stride: self.stride * factor as f64,
        }
    }
}

/// Output of `evolve`.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub series: DiagSeries,
    pub trajectory: Option<Trajectory>,
    pub final_state: MBState,
    pub steps: usize,
}

/// March the system from (u0, v0) to t_end, recording per the observer spec.
///
/// Sample times are exact multiples of dt (the state clock is re-pinned to
/// step * dt each step, so stride arithmetic never drifts). t_end must be an
/// integer number of steps.
pub fn evolve(
    params: &SimParams,
    u0: SpectralField,
    v0: SpectralField,
    obs: &ObserverSpec,
) -> Result<SimRun> {
    let state0 = MBState::new(u0, v0, 0.0)?;
    let grid = state0.grid();
    params.validate(grid)?;
    if obs.diag_stride_steps == 0 {
        return Err(Error::config("observe.diag_stride", "must be at least one step"));
    }
    let steps_f = params.t_end / params.dt;
    let steps = steps_f.round() as usize;
    if (steps_f - steps as f64).abs() > 1e-8 * steps_f.max(1.0) {
        return Err(Error::config(
            "time.t_end",
            format!("t_end = {} is not an integer number of dt = {} steps", params.t_end, params.dt),
        ));
    }

    let stepper = Ifrk4::new(params, grid)?;
    let alpha = params.alpha.alpha;
    let mut series = DiagSeries::new(obs.sobolev_indices.clone());
    let mut snapshots: Vec<MBState> = Vec::new();

    let record = |series: &mut DiagSeries, snapshots: &mut Vec<MBState>, state: &MBState, step: usize| -> Result<()> {
        if step % obs.diag_stride_steps == 0 || step == steps {
            let cq = conserved_quantities(state, alpha)?;
            series.t.push(state.t);
            series.e1.push(cq.e1);
            series.e2.push(cq.e2);
            series.e3.push(cq.e3);
            series.e4.push(cq.e4);
            for (i, &s) in series.sobolev_indices.clone().iter().enumerate() {
                series.norms_u[i].push(state.u.sobolev_norm(s));
                series.norms_v[i].push(state.v.sobolev_norm(s));
            }
            let mut p = 0.0;
            if let Some(f) = &params.f {
                p += f.l2_pairing(&state.u);
            }
            if let Some(g) = &params.g {
                p += g.l2_pairing(&state.v);
            }
            series.forcing_power.push(p);
        }
        if let Some(ss) = obs.snapshot_stride_steps {
            if ss > 0 && step % ss == 0 {
                snapshots.push(state.clone());
            }
        }
        Ok(())
    };

    let mut state = state0;
    record(&mut series, &mut snapshots, &state, 0)?;
    for step in 1..=steps {
        let mut next = stepper.step(&state)?;
        next.t = step as f64 * params.dt;
        state = next;
        record(&mut series, &mut snapshots, &state, step)?;
    }

    let trajectory = obs.snapshot_stride_steps.map(|ss| Trajectory {
        states: snapshots,
        stride: ss as f64 * params.dt,
    });
    Ok(SimRun {
        series,
        trajectory,
        final_state: state,
        steps,
    })
}

/// Residual of the quadratic-energy balance d/dt E3 + 2 gamma E3 = 2 int (f u + g v)
/// at interior samples, via centered differencing of the recorded series.
/// Valid for equal damping gamma = delta.
pub fn damped_energy_residual(series: &DiagSeries, gamma: f64, delta: f64) -> Result<Vec<(f64, f64)>> {
    if (gamma - delta).abs() > 1e-14 {
        return Err(Error::domain(
            "energy balance residual needs equal damping gamma = delta",
        ));
    }
    if series.len() < 3 {
        return Err(Error::domain("need at least three samples to difference"));
    }
    let mut out = Vec::new();
    for j in 1..series.len() - 1 {
        let h1 = series.t[j] - series.t[j - 1];
        let h2 = series.t[j + 1] - series.t[j];
        if (h1 - h2).abs() > 1e-12 * h1.max(h2) {
            continue; // skip the off-stride final sample
        }
        let ddt = (series.e3[j + 1] - series.e3[j - 1]) / (h1 + h2);
        let r = ddt + 2.0 * gamma * series.e3[j] - 2.0 * series.forcing_power[j];
        out.push((series.t[j], r));
    }
    Ok(out)
}
