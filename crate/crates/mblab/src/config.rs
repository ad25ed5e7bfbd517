//! Run configuration: a flat INI-style text format plus `--override`
//! resolution, producing one fully-resolved [`RunConfig`] that the manifest
//! echoes verbatim.
//!
//! Format: `[section]` headers with `key = value` lines, `#` comments, blank
//! lines ignored. Keys are addressed as `section.key` in error messages and
//! overrides. Every knob has a documented default except the per-experiment
//! required ones; whatever was defaulted still appears resolved in the echo.
//!
//! Sections and keys:
//!
//! ```text
//! [run]     experiment (required), output_dir = out, seeds = 1,
//!           snapshot_stride = 0 (steps between stored snapshots; 0 = none;
//!                                defaults to 1 for check-identities),
//!           diag_stride = 0 (steps between diagnostic samples; 0 = auto,
//!                            about 500 samples across the run)
//! [model]   alpha (required, "a/b" kept exact or a decimal), gamma = 0,
//!           delta = 0, s = 1.0, s1_grid = 1.0
//! [grid]    n (required unless classify-alpha), m = 3n
//! [time]    t_end (required for time-stepping runs), dt = min(1e-3, 0.5/n)
//! [data]    kind = seeded | modes, amplitude = 1.0, u_modes, v_modes,
//!           perturbations = 0.5 (attractor perturbation sizes, H^1)
//! [forcing] f_modes, g_modes (mode lists)  -- or --  seed, amplitude
//! [solver]  nonlinear = true, tol = 1e-10, max_iter = 200,
//!           threshold = 1e-6 (attractor convergence), qmax = 1000000,
//!           blowup_threshold = 1e12
//! ```
//!
//! Mode lists are comma-separated `k:amplitude` entries with complex
//! amplitudes written like `0.3`, `0.3+0.2i`, `-0.1i`; each entry sets the
//! coefficient at k and its conjugate at -k.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::diophantine::{classify_alpha, AlphaValue, DEFAULT_QMAX};
use crate::dynamics::{default_dt, BLOWUP_THRESHOLD};
use crate::error::{Error, Result};
use crate::spectral::{GridSpec, SpectralField};

/// Which driver a run dispatches to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ClassifyAlpha,
    Simulate,
    CheckIdentities,
    Smoothing,
    Attractor,
    Stationary,
    Growth,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::ClassifyAlpha,
        ExperimentKind::Simulate,
        ExperimentKind::CheckIdentities,
        ExperimentKind::Smoothing,
        ExperimentKind::Attractor,
        ExperimentKind::Stationary,
        ExperimentKind::Growth,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::ClassifyAlpha => "classify-alpha",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::CheckIdentities => "check-identities",
            ExperimentKind::Smoothing => "smoothing",
            ExperimentKind::Attractor => "attractor",
            ExperimentKind::Stationary => "stationary",
            ExperimentKind::Growth => "growth",
        }
    }

    fn needs_grid(&self) -> bool {
        !matches!(self, ExperimentKind::ClassifyAlpha)
    }

    fn needs_horizon(&self) -> bool {
        !matches!(self, ExperimentKind::ClassifyAlpha | ExperimentKind::Stationary)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
                Error::config(
                    "run.experiment",
                    format!("unknown experiment `{s}`; one of {}", names.join(", ")),
                )
            })
    }
}

/// Initial data: seed-generated smooth random fields or an explicit mode list.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    /// Random fields at smoothness `model.s`, scaled so each component has
    /// H^s norm `amplitude`; u uses the run seed (mean-zero, as the state
    /// contract requires), v its companion.
    Seeded { amplitude: f64 },
    /// Explicit coefficients; entries are (k, re, im).
    Modes {
        u: Vec<(i64, f64, f64)>,
        v: Vec<(i64, f64, f64)>,
    },
}

/// Forcing pair (f, g) for the damped-driven system.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingSpec {
    None,
    /// Explicit coefficients; entries are (k, re, im).
    Modes {
        f: Vec<(i64, f64, f64)>,
        g: Vec<(i64, f64, f64)>,
    },
    /// Mean-zero random fields at smoothness index 2, each scaled to H^1
    /// norm `amplitude`; f uses `seed`, g its companion.
    Seeded { seed: u64, amplitude: f64 },
}

/// A fully-resolved run description. Fields that a given experiment does not
/// consume keep their defaults and are still echoed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    /// Kept in its exact parsed form; "1/7" stays the integer pair (1, 7).
    pub alpha: AlphaValue,
    pub n: usize,
    pub m: usize,
    pub dt: f64,
    pub t_end: f64,
    pub s: f64,
    pub s1_grid: Vec<f64>,
    pub gamma: f64,
    pub delta: f64,
    pub data: DataSpec,
    pub forcing: ForcingSpec,
    pub seeds: Vec<u64>,
    pub snapshot_stride: usize,
    /// 0 means auto: the driver aims for about 500 samples.
    pub diag_stride: usize,
    pub output_dir: String,
    pub nonlinear: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub threshold: f64,
    pub perturbations: Vec<f64>,
    pub qmax: u64,
    pub blowup_threshold: f64,
}

impl RunConfig {
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.n, self.m)
    }

    /// Initial (u, v) for one ensemble member.
    pub fn initial_pair(&self, grid: GridSpec, seed: u64) -> Result<(SpectralField, SpectralField)> {
        match &self.data {
            DataSpec::Seeded { amplitude } => {
                let scale_to = |w: SpectralField| -> SpectralField {
                    let norm = w.sobolev_norm(self.s);
                    if norm > 0.0 {
                        w.scale(amplitude / norm)
                    } else {
                        w
                    }
                };
                let u = scale_to(SpectralField::random(grid, self.s, seed, true));
                let v = scale_to(SpectralField::random(
                    grid,
                    self.s,
                    seed.wrapping_add(0x9e37),
                    false,
                ));
                Ok((u, v))
            }
            DataSpec::Modes { u, v } => Ok((
                field_from_entries(grid, u, "data.u_modes")?,
                field_from_entries(grid, v, "data.v_modes")?,
            )),
        }
    }

    /// Forcing fields on the run grid, or (None, None).
    pub fn forcing_pair(
        &self,
        grid: GridSpec,
    ) -> Result<(Option<SpectralField>, Option<SpectralField>)> {
        match &self.forcing {
            ForcingSpec::None => Ok((None, None)),
            ForcingSpec::Modes { f, g } => {
                let f = field_from_entries(grid, f, "forcing.f_modes")?;
                let g = field_from_entries(grid, g, "forcing.g_modes")?;
                Ok((some_if_nonzero(f), some_if_nonzero(g)))
            }
            ForcingSpec::Seeded { seed, amplitude } => {
                let draw = |sd: u64| -> SpectralField {
                    let w = SpectralField::random(grid, 2.0, sd, true);
                    let norm = w.sobolev_norm(1.0);
                    if norm > 0.0 {
                        w.scale(amplitude / norm)
                    } else {
                        w
                    }
                };
                Ok((
                    some_if_nonzero(draw(*seed)),
                    some_if_nonzero(draw(seed.wrapping_add(0x9e37))),
                ))
            }
        }
    }
}

fn some_if_nonzero(f: SpectralField) -> Option<SpectralField> {
    if f.coeffs().iter().all(|z| z.norm() == 0.0) {
        None
    } else {
        Some(f)
    }
}

fn field_from_entries(grid: GridSpec, entries: &[(i64, f64, f64)], field: &str) -> Result<SpectralField> {
    let modes: Vec<(i64, Complex64)> = entries
        .iter()
        .map(|&(k, re, im)| (k, Complex64::new(re, im)))
        .collect();
    SpectralField::from_modes(grid, &modes)
        .map_err(|e| Error::config(field, format!("{e}")))
}

/// Parse a config file with no overrides.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &[])
}

/// Parse a config file, then apply `--override` pairs (`section.key`, value)
/// on top, later entries winning, and resolve defaults and invariants.
pub fn parse_config_with(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut pairs = split_into_pairs(text)?;
    for (key, value) in overrides {
        let (sec, k) = key.split_once('.').ok_or_else(|| {
            Error::Usage(format!(
                "override key `{key}` must be section.key, e.g. time.dt=5e-4"
            ))
        })?;
        if sec.is_empty() || k.is_empty() {
            return Err(Error::Usage(format!("override key `{key}` must be section.key")));
        }
        pairs.retain(|(s, pk, _)| !(s == sec && pk == k));
        pairs.push((sec.to_string(), k.to_string(), value.clone()));
    }
    resolve(&pairs)
}

/// (section, key, value) triples in file order, comments stripped. Duplicate
/// keys inside one section are rejected so a typo cannot silently lose.
fn split_into_pairs(text: &str) -> Result<Vec<(String, String, String)>> {
    let mut pairs: Vec<(String, String, String)> = Vec::new();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let name = inner.strip_suffix(']').ok_or_else(|| {
                Error::config(
                    format!("line {}", lineno + 1),
                    format!("malformed section header `{line}`"),
                )
            })?;
            section = name.trim().to_string();
            if section.is_empty() {
                return Err(Error::config(
                    format!("line {}", lineno + 1),
                    "empty section name",
                ));
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(
                format!("line {}", lineno + 1),
                format!("expected key = value, got `{line}`"),
            )
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if section.is_empty() {
            return Err(Error::config(
                key,
                "keys must live inside a [section]",
            ));
        }
        if key.is_empty() {
            return Err(Error::config(
                format!("line {}", lineno + 1),
                "empty key",
            ));
        }
        if pairs.iter().any(|(s, k, _)| *s == section && *k == key) {
            return Err(Error::config(
                format!("{section}.{key}"),
                "duplicate key",
            ));
        }
        pairs.push((section.clone(), key, value));
    }
    Ok(pairs)
}

fn parse_num<T: FromStr>(field: &str, value: &str, what: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::config(field, format!("`{value}` is not {what}")))
}

fn parse_bool(field: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::config(field, format!("`{value}` is not true/false"))),
    }
}

fn parse_list<T: FromStr>(field: &str, value: &str, what: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for part in value.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        out.push(parse_num::<T>(field, part, what)?);
    }
    if out.is_empty() {
        return Err(Error::config(field, "list must not be empty"));
    }
    Ok(out)
}

/// `0.3`, `-2`, `1e-3+2.5e-4i`, `-0.1i`, `i`, `2-i`.
fn parse_complex(field: &str, text: &str) -> Result<Complex64> {
    let t = text.trim();
    if t.is_empty() {
        return Err(Error::config(field, "empty amplitude"));
    }
    let bad = || Error::config(field, format!("`{text}` is not a complex amplitude"));
    if let Some(body) = t.strip_suffix(['i', 'I']) {
        // Find the sign separating real and imaginary parts: a '+'/'-' that
        // is not leading and not an exponent sign.
        let bytes = body.as_bytes();
        let mut split = None;
        for i in (1..bytes.len()).rev() {
            let c = bytes[i] as char;
            if (c == '+' || c == '-') && !matches!(bytes[i - 1] as char, 'e' | 'E') {
                split = Some(i);
                break;
            }
        }
        let (re_str, im_str) = match split {
            Some(i) => (&body[..i], &body[i..]),
            None => ("", body),
        };
        let im = match im_str {
            "" | "+" => 1.0,
            "-" => -1.0,
            s => s.parse::<f64>().map_err(|_| bad())?,
        };
        let re = match re_str {
            "" => 0.0,
            s => s.parse::<f64>().map_err(|_| bad())?,
        };
        Ok(Complex64::new(re, im))
    } else {
        Ok(Complex64::new(t.parse::<f64>().map_err(|_| bad())?, 0.0))
    }
}

/// `1:0.3+0.2i, 3:-0.1i` -> [(1, 0.3, 0.2), (3, 0.0, -0.1)].
fn parse_mode_list(field: &str, value: &str) -> Result<Vec<(i64, f64, f64)>> {
    let mut out = Vec::new();
    for part in value.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (k_str, amp_str) = part.split_once(':').ok_or_else(|| {
            Error::config(field, format!("`{part}` is not k:amplitude"))
        })?;
        let k = parse_num::<i64>(field, k_str.trim(), "an integer mode")?;
        let amp = parse_complex(field, amp_str)?;
        out.push((k, amp.re, amp.im));
    }
    Ok(out)
}

fn resolve(pairs: &[(String, String, String)]) -> Result<RunConfig> {
    let mut experiment: Option<ExperimentKind> = None;
    let mut output_dir: Option<String> = None;
    let mut seeds: Option<Vec<u64>> = None;
    let mut snapshot_stride: Option<usize> = None;
    let mut diag_stride = 0usize;
    let mut alpha: Option<AlphaValue> = None;
    let mut gamma = 0.0;
    let mut delta = 0.0;
    let mut s = 1.0;
    let mut s1_grid: Option<Vec<f64>> = None;
    let mut n: Option<usize> = None;
    let mut m: Option<usize> = None;
    let mut dt: Option<f64> = None;
    let mut t_end: Option<f64> = None;
    let mut data_kind: Option<String> = None;
    let mut amplitude = 1.0;
    let mut u_modes: Option<Vec<(i64, f64, f64)>> = None;
    let mut v_modes: Option<Vec<(i64, f64, f64)>> = None;
    let mut perturbations: Option<Vec<f64>> = None;
    let mut f_modes: Option<Vec<(i64, f64, f64)>> = None;
    let mut g_modes: Option<Vec<(i64, f64, f64)>> = None;
    let mut forcing_seed: Option<u64> = None;
    let mut forcing_amplitude: Option<f64> = None;
    let mut nonlinear = true;
    let mut tol = 1e-10;
    let mut max_iter = 200usize;
    let mut threshold = 1e-6;
    let mut qmax = DEFAULT_QMAX;
    let mut blowup_threshold = BLOWUP_THRESHOLD;

    for (sec, key, value) in pairs {
        let field = format!("{sec}.{key}");
        let f = field.as_str();
        match (sec.as_str(), key.as_str()) {
            ("run", "experiment") => experiment = Some(value.parse()?),
            ("run", "output_dir") => output_dir = Some(value.clone()),
            ("run", "seeds") => seeds = Some(parse_list::<u64>(f, value, "a seed (u64)")?),
            ("run", "snapshot_stride") => {
                snapshot_stride = Some(parse_num::<usize>(f, value, "a step count")?)
            }
            ("run", "diag_stride") => diag_stride = parse_num::<usize>(f, value, "a step count")?,
            ("model", "alpha") => {
                alpha = Some(AlphaValue::parse(value).map_err(|e| {
                    Error::config(f, format!("{e}"))
                })?)
            }
            ("model", "gamma") => gamma = parse_num::<f64>(f, value, "a number")?,
            ("model", "delta") => delta = parse_num::<f64>(f, value, "a number")?,
            ("model", "s") => s = parse_num::<f64>(f, value, "a number")?,
            ("model", "s1_grid") => s1_grid = Some(parse_list::<f64>(f, value, "a number")?),
            ("grid", "n") => n = Some(parse_num::<usize>(f, value, "a mode count")?),
            ("grid", "m") => m = Some(parse_num::<usize>(f, value, "a point count")?),
            ("time", "dt") => dt = Some(parse_num::<f64>(f, value, "a number")?),
            ("time", "t_end") => t_end = Some(parse_num::<f64>(f, value, "a number")?),
            ("data", "kind") => data_kind = Some(value.clone()),
            ("data", "amplitude") => amplitude = parse_num::<f64>(f, value, "a number")?,
            ("data", "u_modes") => u_modes = Some(parse_mode_list(f, value)?),
            ("data", "v_modes") => v_modes = Some(parse_mode_list(f, value)?),
            ("data", "perturbations") => {
                perturbations = Some(parse_list::<f64>(f, value, "a number")?)
            }
            ("forcing", "f_modes") => f_modes = Some(parse_mode_list(f, value)?),
            ("forcing", "g_modes") => g_modes = Some(parse_mode_list(f, value)?),
            ("forcing", "seed") => forcing_seed = Some(parse_num::<u64>(f, value, "a seed (u64)")?),
            ("forcing", "amplitude") => {
                forcing_amplitude = Some(parse_num::<f64>(f, value, "a number")?)
            }
            ("solver", "nonlinear") => nonlinear = parse_bool(f, value)?,
            ("solver", "tol") => tol = parse_num::<f64>(f, value, "a number")?,
            ("solver", "max_iter") => max_iter = parse_num::<usize>(f, value, "a count")?,
            ("solver", "threshold") => threshold = parse_num::<f64>(f, value, "a number")?,
            ("solver", "qmax") => qmax = parse_num::<u64>(f, value, "a denominator bound")?,
            ("solver", "blowup_threshold") => {
                blowup_threshold = parse_num::<f64>(f, value, "a number")?
            }
            _ => return Err(Error::config(field, "unknown key")),
        }
    }

    let experiment = experiment.ok_or_else(|| Error::config("run.experiment", "required"))?;
    let alpha = alpha.ok_or_else(|| Error::config("model.alpha", "required"))?;
    // Validate the dispersion ratio up front; the classification itself is
    // recomputed by whichever driver needs it.
    classify_alpha(alpha.clone()).map_err(|e| Error::config("model.alpha", format!("{e}")))?;

    let n = match n {
        Some(v) => v,
        None if experiment.needs_grid() => {
            return Err(Error::config(
                "grid.n",
                format!("required for {experiment} runs"),
            ))
        }
        None => 1,
    };
    let m = m.unwrap_or(3 * n.max(1));
    if experiment.needs_grid() {
        let grid = GridSpec::new(n, m).map_err(|e| Error::config("grid.m", format!("{e}")))?;
        if nonlinear && !grid.supports_quadratic() {
            return Err(Error::config(
                "grid.m",
                format!("m = {m} < 3n = {} cannot dealias quadratic products", 3 * n),
            ));
        }
    }

    let t_end = match t_end {
        Some(v) => {
            if !(v >= 0.0) {
                return Err(Error::config("time.t_end", "must be nonnegative"));
            }
            v
        }
        None if experiment.needs_horizon() => {
            return Err(Error::config(
                "time.t_end",
                format!("required for {experiment} runs"),
            ))
        }
        None => 0.0,
    };
    let dt = dt.unwrap_or_else(|| default_dt(n));
    if !(dt > 0.0) {
        return Err(Error::config("time.dt", "must be positive"));
    }
    if gamma < 0.0 {
        return Err(Error::config("model.gamma", "must be nonnegative"));
    }
    if delta < 0.0 {
        return Err(Error::config("model.delta", "must be nonnegative"));
    }

    let data = match data_kind.as_deref() {
        None | Some("seeded") => {
            if u_modes.is_some() || v_modes.is_some() {
                return Err(Error::config(
                    "data.u_modes",
                    "mode lists need data.kind = modes",
                ));
            }
            if !(amplitude > 0.0) {
                return Err(Error::config("data.amplitude", "must be positive"));
            }
            DataSpec::Seeded { amplitude }
        }
        Some("modes") => DataSpec::Modes {
            u: u_modes.unwrap_or_default(),
            v: v_modes.unwrap_or_default(),
        },
        Some(other) => {
            return Err(Error::config(
                "data.kind",
                format!("`{other}` is not seeded/modes"),
            ))
        }
    };

    let forcing = match (f_modes, g_modes, forcing_seed, forcing_amplitude) {
        (None, None, None, None) => ForcingSpec::None,
        (f, g, None, None) => ForcingSpec::Modes {
            f: f.unwrap_or_default(),
            g: g.unwrap_or_default(),
        },
        (None, None, Some(seed), amp) => {
            let amplitude = amp.unwrap_or(1.0);
            if !(amplitude > 0.0) {
                return Err(Error::config("forcing.amplitude", "must be positive"));
            }
            ForcingSpec::Seeded { seed, amplitude }
        }
        (None, None, None, Some(_)) => {
            return Err(Error::config(
                "forcing.amplitude",
                "seeded forcing also needs forcing.seed",
            ))
        }
        _ => {
            return Err(Error::config(
                "forcing.seed",
                "give either mode lists or a seed, not both",
            ))
        }
    };

    let seeds = seeds.unwrap_or_else(|| vec![1]);
    let s1_grid = s1_grid.unwrap_or_else(|| vec![1.0]);
    let snapshot_stride = snapshot_stride.unwrap_or(match experiment {
        ExperimentKind::CheckIdentities => 1,
        _ => 0,
    });
    if experiment == ExperimentKind::CheckIdentities && snapshot_stride == 0 {
        return Err(Error::config(
            "run.snapshot_stride",
            "identity checks need stored snapshots (stride >= 1)",
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::config("solver.tol", "must be positive"));
    }
    if max_iter == 0 {
        return Err(Error::config("solver.max_iter", "must be at least 1"));
    }
    if !(threshold > 0.0) {
        return Err(Error::config("solver.threshold", "must be positive"));
    }
    if !(blowup_threshold > 0.0) {
        return Err(Error::config("solver.blowup_threshold", "must be positive"));
    }

    Ok(RunConfig {
        experiment,
        alpha,
        n,
        m,
        dt,
        t_end,
        s,
        s1_grid,
        gamma,
        delta,
        data,
        forcing,
        seeds,
        snapshot_stride,
        diag_stride,
        output_dir: output_dir.unwrap_or_else(|| "out".to_string()),
        nonlinear,
        tol,
        max_iter,
        threshold,
        perturbations: perturbations.unwrap_or_else(|| vec![0.5]),
        qmax,
        blowup_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(extra: &str) -> String {
        format!(
            "[run]\nexperiment = simulate\n[model]\nalpha = 1/2\n[grid]\nn = 16\n[time]\nt_end = 1.0\n{extra}"
        )
    }

    #[test]
    fn minimal_config_resolves_documented_defaults() {
        let cfg = parse_config(&minimal("")).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Simulate);
        assert_eq!(cfg.n, 16);
        assert_eq!(cfg.m, 48);
        assert_eq!(cfg.dt, default_dt(16));
        assert_eq!(cfg.t_end, 1.0);
        assert_eq!(cfg.seeds, vec![1]);
        assert_eq!(cfg.s1_grid, vec![1.0]);
        assert_eq!(cfg.snapshot_stride, 0);
        assert_eq!(cfg.diag_stride, 0);
        assert_eq!(cfg.output_dir, "out");
        assert_eq!(cfg.data, DataSpec::Seeded { amplitude: 1.0 });
        assert_eq!(cfg.forcing, ForcingSpec::None);
        assert!(cfg.nonlinear);
        assert_eq!(cfg.qmax, DEFAULT_QMAX);
    }

    #[test]
    fn exact_rational_alpha_survives_parsing() {
        let text = "[run]\nexperiment = classify-alpha\n[model]\nalpha = 1/7\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.alpha, AlphaValue::rational(1, 7).unwrap());
        let class = classify_alpha(cfg.alpha.clone()).unwrap();
        assert_eq!(class.pq(), Some((2, 1)));
        let echoed = serde_json::to_value(&cfg).unwrap();
        assert_eq!(echoed["alpha"], serde_json::json!("1/7"));
    }

    #[test]
    fn bad_fields_are_named_in_errors() {
        let mut no_t_end =
            "[run]\nexperiment = simulate\n[model]\nalpha = 1/2\n[grid]\nn = 16\n".to_string();
        let err = parse_config(&no_t_end).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "time.t_end"));
        no_t_end.push_str("[time]\ndt = fast\nt_end = 1\n");
        let err = parse_config(&no_t_end).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "time.dt"));

        let err = parse_config(&minimal("[grid]\nq = 3\n")).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "grid.q"));

        let err = parse_config("[run]\nexperiment = simulate\n[grid]\nn = 16\n[time]\nt_end = 1\n")
            .unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "model.alpha"));
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let err = parse_config(&minimal("[model]\ngamma = 1\ngamma = 2\n")).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "model.gamma"));
    }

    #[test]
    fn quadratic_run_rejects_small_physical_grid() {
        let text =
            "[run]\nexperiment = simulate\n[model]\nalpha = 1/2\n[grid]\nn = 64\nm = 128\n[time]\nt_end = 1\n";
        let err = parse_config(text).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "grid.m"));
        // A representable but dealias-short grid is fine once products are off.
        let linear = text
            .replace("n = 64", "n = 48")
            .replace("[time]", "[solver]\nnonlinear = false\n[time]");
        assert_eq!(parse_config(&linear).unwrap().m, 128);
    }

    #[test]
    fn overrides_replace_file_values() {
        let ov = [
            ("time.dt".to_string(), "5e-4".to_string()),
            ("run.seeds".to_string(), "3,4,5".to_string()),
        ];
        let cfg = parse_config_with(&minimal("[time]\ndt = 1e-3\n"), &ov).unwrap();
        assert_eq!(cfg.dt, 5e-4);
        assert_eq!(cfg.seeds, vec![3, 4, 5]);

        let err = parse_config_with(&minimal(""), &[("dt".to_string(), "1".to_string())])
            .unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn complex_amplitudes_parse_in_all_spellings() {
        let cases = [
            ("0.3", Complex64::new(0.3, 0.0)),
            ("-2", Complex64::new(-2.0, 0.0)),
            ("0.3+0.2i", Complex64::new(0.3, 0.2)),
            ("0.3-0.2i", Complex64::new(0.3, -0.2)),
            ("-0.1i", Complex64::new(0.0, -0.1)),
            ("i", Complex64::new(0.0, 1.0)),
            ("2-i", Complex64::new(2.0, -1.0)),
            ("1e-3+2.5e-4i", Complex64::new(1e-3, 2.5e-4)),
        ];
        for (text, want) in cases {
            let got = parse_complex("t", text).unwrap();
            assert_eq!(got, want, "{text}");
        }
        assert!(parse_complex("t", "0.3+").is_err());
        assert!(parse_complex("t", "1..2i").is_err());
    }

    #[test]
    fn forcing_mode_lists_build_mean_zero_fields() {
        let cfg = parse_config(&minimal(
            "[forcing]\nf_modes = 1:0.3+0.2i, 3:-0.1i\ng_modes = 2:0.5\n",
        ))
        .unwrap();
        let grid = cfg.grid().unwrap();
        let (f, g) = cfg.forcing_pair(grid).unwrap();
        let f = f.unwrap();
        assert_eq!(f.coeff(1), Complex64::new(0.3, 0.2));
        assert_eq!(f.coeff(-1), Complex64::new(0.3, -0.2));
        assert_eq!(f.coeff(3), Complex64::new(0.0, -0.1));
        assert_eq!(g.unwrap().coeff(2), Complex64::new(0.5, 0.0));
    }

    #[test]
    fn seeded_forcing_is_mean_zero_at_the_requested_amplitude() {
        let cfg = parse_config(&minimal("[forcing]\nseed = 9\namplitude = 0.25\n")).unwrap();
        let grid = cfg.grid().unwrap();
        let (f, g) = cfg.forcing_pair(grid).unwrap();
        let (f, g) = (f.unwrap(), g.unwrap());
        assert!(f.coeff(0).norm() == 0.0 && g.coeff(0).norm() == 0.0);
        assert!((f.sobolev_norm(1.0) - 0.25).abs() < 1e-12);
        assert!((g.sobolev_norm(1.0) - 0.25).abs() < 1e-12);
        assert!(&f.coeffs() != &g.coeffs());

        let err = parse_config(&minimal("[forcing]\nf_modes = 1:0.1\nseed = 9\n")).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "forcing.seed"));
    }

    #[test]
    fn seeded_data_hits_the_requested_sobolev_norm() {
        let cfg = parse_config(&minimal("[model]\ns = 2.0\n[data]\namplitude = 3.0\n")).unwrap();
        let grid = cfg.grid().unwrap();
        let (u, v) = cfg.initial_pair(grid, 42).unwrap();
        assert!((u.sobolev_norm(2.0) - 3.0).abs() < 1e-12);
        assert!((v.sobolev_norm(2.0) - 3.0).abs() < 1e-12);
        let (u2, _) = cfg.initial_pair(grid, 43).unwrap();
        assert!(&u.coeffs() != &u2.coeffs());
    }

    #[test]
    fn explicit_mode_data_builds_the_exact_coefficients() {
        let cfg = parse_config(&minimal(
            "[data]\nkind = modes\nu_modes = 1:1\nv_modes = 2:0.5i\n",
        ))
        .unwrap();
        let grid = cfg.grid().unwrap();
        let (u, v) = cfg.initial_pair(grid, 0).unwrap();
        assert_eq!(u.coeff(1), Complex64::new(1.0, 0.0));
        assert_eq!(v.coeff(2), Complex64::new(0.0, 0.5));
        // A mode outside the band is a config error naming the list.
        let cfg = parse_config(&minimal("[data]\nkind = modes\nu_modes = 99:1\n")).unwrap();
        let err = cfg.initial_pair(grid, 0).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "data.u_modes"));
    }

    #[test]
    fn classify_alpha_needs_no_grid_but_stepping_runs_do() {
        let text = "[run]\nexperiment = classify-alpha\n[model]\nalpha = 0.55\n";
        assert!(parse_config(text).is_ok());
        let err = parse_config("[run]\nexperiment = growth\n[model]\nalpha = 1/2\n[time]\nt_end = 1\n")
            .unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "grid.n"));
    }

    #[test]
    fn check_identities_defaults_to_storing_every_step() {
        let text = minimal("").replace("experiment = simulate", "experiment = check-identities");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.snapshot_stride, 1);
        let err = parse_config_with(
            &text,
            &[("run.snapshot_stride".to_string(), "0".to_string())],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "run.snapshot_stride"));
    }
}
