//! Command-line surface: flag parsing, config loading, dispatch to the
//! drivers, and exit-code policy.
//!
//! Every run leaves a record directory (see [`crate::record`]): the manifest
//! goes down first, series and reports follow, and the manifest is rewritten
//! on the way out with wall time and the completion flag. Exit codes: 0 on
//! success, 2 for usage/config errors, 1 for runtime failures (blow-up,
//! no convergence, io).

use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use crate::config::{parse_config_with, ExperimentKind, RunConfig};
use crate::diophantine::{
    classify_alpha, type_index_estimate, AlphaClassification, AlphaKind, AlphaValue,
    RootTypeEstimates, TypeIndexEstimate, DEFAULT_QMAX,
};
use crate::dynamics::{evolve, ObserverSpec, SimParams, SimRun};
use crate::error::{Error, Result};
use crate::experiments::{
    embedding_constant, growth_tracking, smoothing_experiment, stationary_solve,
    trivial_attractor_experiment, StationaryPair,
};
use crate::normal_form::{identity_residual, NormalFormOps};
use crate::record::{rows_from_columns, Manifest, RunRecord};
use crate::spectral::SpectralField;

pub const USAGE: &str = "\
usage: mblab <experiment> [--config <path>] [--out <dir>] [--seed <n>]
             [--override section.key=value]...

experiments:
  classify-alpha [alpha]  resonance classification of the dispersion ratio
  simulate                time-step the system and record diagnostics
  check-identities        integrated normal-form identity residuals
  smoothing               residual-vs-solution spectral slope gap
  attractor               relaxation onto the damped-driven stationary pair
  stationary              stationary solve by Picard iteration
  growth                  Sobolev norm growth tracking

classify-alpha takes the ratio positionally (e.g. `mblab classify-alpha 1/7`)
or from a config like everything else. The subcommand selects the experiment;
a run.experiment key in the config file is overridden by it. --seed replaces
the whole seed list; --out replaces run.output_dir; --override uses the same
section.key names as the config file and wins over it.
";

#[derive(Debug, Clone, PartialEq)]
pub struct CliArgs {
    pub experiment: ExperimentKind,
    /// Positional dispersion ratio (classify-alpha only).
    pub alpha_arg: Option<String>,
    pub config_path: Option<PathBuf>,
    pub out: Option<String>,
    pub seed: Option<u64>,
    pub overrides: Vec<(String, String)>,
}

/// Parse everything after the binary name.
pub fn parse_args(argv: &[String]) -> Result<CliArgs> {
    let mut it = argv.iter();
    let first = it
        .next()
        .ok_or_else(|| Error::Usage("missing experiment name".into()))?;
    let experiment: ExperimentKind = first
        .parse()
        .map_err(|_| Error::Usage(format!("unknown experiment `{first}`")))?;
    let mut args = CliArgs {
        experiment,
        alpha_arg: None,
        config_path: None,
        out: None,
        seed: None,
        overrides: Vec::new(),
    };
    while let Some(arg) = it.next() {
        let mut value_of = |flag: &str| -> Result<String> {
            it.next()
                .cloned()
                .ok_or_else(|| Error::Usage(format!("{flag} needs a value")))
        };
        match arg.as_str() {
            "--config" => args.config_path = Some(PathBuf::from(value_of("--config")?)),
            "--out" => args.out = Some(value_of("--out")?),
            "--seed" => {
                let v = value_of("--seed")?;
                args.seed = Some(
                    v.parse()
                        .map_err(|_| Error::Usage(format!("--seed `{v}` is not a u64")))?,
                );
            }
            "--override" => {
                let v = value_of("--override")?;
                let (key, value) = v.split_once('=').ok_or_else(|| {
                    Error::Usage(format!("--override `{v}` must be section.key=value"))
                })?;
                args.overrides
                    .push((key.trim().to_string(), value.trim().to_string()));
            }
            other if other.starts_with('-') => {
                return Err(Error::Usage(format!("unknown flag `{other}`")));
            }
            positional => {
                if experiment != ExperimentKind::ClassifyAlpha {
                    return Err(Error::Usage(format!(
                        "unexpected positional argument `{positional}`"
                    )));
                }
                if args.alpha_arg.is_some() {
                    return Err(Error::Usage("classify-alpha takes one ratio".into()));
                }
                args.alpha_arg = Some(positional.to_string());
            }
        }
    }
    Ok(args)
}

/// Read / synthesize the config text and resolve it with all overrides.
pub fn load_config(args: &CliArgs) -> Result<RunConfig> {
    let text = match (&args.config_path, &args.alpha_arg) {
        (Some(_), Some(_)) => {
            return Err(Error::Usage(
                "give the ratio either positionally or via --config, not both".into(),
            ))
        }
        (Some(path), None) => fs::read_to_string(path).map_err(|e| {
            Error::Usage(format!("cannot read config {}: {e}", path.display()))
        })?,
        (None, Some(alpha)) => format!("[model]\nalpha = {alpha}\n"),
        (None, None) => {
            return Err(Error::Usage(format!(
                "{} needs --config <path>",
                args.experiment
            )))
        }
    };
    let mut overrides = args.overrides.clone();
    overrides.push(("run.experiment".into(), args.experiment.name().into()));
    if let Some(out) = &args.out {
        overrides.push(("run.output_dir".into(), out.clone()));
    }
    if let Some(seed) = args.seed {
        overrides.push(("run.seeds".into(), seed.to_string()));
    }
    parse_config_with(&text, &overrides)
}

/// Entry point for the binary: returns the process exit code.
pub fn run(argv: &[String]) -> i32 {
    if argv.is_empty() {
        eprintln!("{USAGE}");
        return 2;
    }
    if matches!(argv[0].as_str(), "help" | "--help" | "-h") {
        println!("{USAGE}");
        return 0;
    }
    match parse_args(argv).and_then(|args| load_config(&args)).and_then(|cfg| dispatch(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) | Error::Config { .. } => 2,
                _ => 1,
            }
        }
    }
}

/// Run one resolved config to completion, leaving a record directory.
pub fn dispatch(cfg: &RunConfig) -> Result<()> {
    let mut rec = RunRecord::create(&cfg.output_dir, Manifest::new(cfg))?;
    let outcome = match cfg.experiment {
        ExperimentKind::ClassifyAlpha => run_classify(cfg, &mut rec),
        ExperimentKind::Simulate => run_simulate(cfg, &mut rec),
        ExperimentKind::CheckIdentities => run_identities(cfg, &mut rec),
        ExperimentKind::Smoothing => run_smoothing(cfg, &mut rec),
        ExperimentKind::Attractor => run_attractor(cfg, &mut rec),
        ExperimentKind::Stationary => run_stationary(cfg, &mut rec),
        ExperimentKind::Growth => run_growth(cfg, &mut rec),
    };
    match outcome {
        Ok(summary) => {
            rec.finalize(true)?;
            println!("{summary}");
            Ok(())
        }
        Err(e) => {
            rec.annotate(format!("{e}"));
            let _ = rec.finalize(false);
            Err(e)
        }
    }
}

fn kind_label(kind: &AlphaKind) -> String {
    match kind {
        AlphaKind::SpecialRational { p, q } => format!("special_rational (p = {p}, q = {q})"),
        AlphaKind::RationalNonspecial => "rational_nonspecial".into(),
        AlphaKind::IrrationalNumeric => "irrational_numeric".into(),
    }
}

fn run_classify(cfg: &RunConfig, rec: &mut RunRecord) -> Result<String> {
    let class = classify_alpha(cfg.alpha.clone())?;
    // The classification carries estimates at the default denominator bound;
    // honor a different solver.qmax for numeric ratios.
    let nu_at_qmax = if matches!(cfg.alpha, AlphaValue::Numeric(_)) && cfg.qmax != DEFAULT_QMAX {
        let est = |x: f64| type_index_estimate(x, cfg.qmax).unwrap_or(TypeIndexEstimate::Infinite);
        RootTypeEstimates {
            c1: est(class.roots.c1),
            c2: est(class.roots.c2),
            d1: est(class.roots.d1),
            d2: est(class.roots.d2),
        }
    } else {
        class.nu
    };

    #[derive(Serialize)]
    struct ClassifyReport<'a> {
        #[serde(flatten)]
        classification: &'a AlphaClassification,
        qmax: u64,
        nu_at_qmax: RootTypeEstimates,
    }
    let report = ClassifyReport {
        classification: &class,
        qmax: cfg.qmax,
        nu_at_qmax,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    rec.write_report("classification", &report)?;
    Ok(format!("alpha = {}: {}", cfg.alpha, kind_label(&class.kind)))
}

fn sim_params(cfg: &RunConfig, class: AlphaClassification) -> Result<SimParams> {
    let grid = cfg.grid()?;
    let (f, g) = cfg.forcing_pair(grid)?;
    Ok(SimParams {
        alpha: class,
        gamma: cfg.gamma,
        delta: cfg.delta,
        f,
        g,
        dt: cfg.dt,
        t_end: cfg.t_end,
        nonlinear: cfg.nonlinear,
        blowup_threshold: cfg.blowup_threshold,
    })
}

fn observer(cfg: &RunConfig) -> ObserverSpec {
    let steps = (cfg.t_end / cfg.dt).round() as usize;
    let diag = if cfg.diag_stride > 0 {
        cfg.diag_stride
    } else {
        (steps / 500).max(1)
    };
    ObserverSpec {
        diag_stride_steps: diag,
        snapshot_stride_steps: (cfg.snapshot_stride > 0).then_some(cfg.snapshot_stride),
        sobolev_indices: cfg.s1_grid.clone(),
    }
}

fn norm_label(s: f64) -> String {
    format!("h{s}")
}

fn write_diag(rec: &RunRecord, run: &SimRun) -> Result<()> {
    let d = &run.series;
    let mut columns: Vec<String> = ["t", "e1", "e2", "e3", "e4", "forcing_power"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for s in &d.sobolev_indices {
        columns.push(format!("{}_u", norm_label(*s)));
        columns.push(format!("{}_v", norm_label(*s)));
    }
    let mut cols: Vec<&[f64]> = vec![&d.t, &d.e1, &d.e2, &d.e3, &d.e4, &d.forcing_power];
    for i in 0..d.sobolev_indices.len() {
        cols.push(&d.norms_u[i]);
        cols.push(&d.norms_v[i]);
    }
    let rows = rows_from_columns(&cols)?;
    let col_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    rec.write_series("diag", &col_refs, &rows)?;
    Ok(())
}

fn run_simulate(cfg: &RunConfig, rec: &mut RunRecord) -> Result<String> {
    let class = classify_alpha(cfg.alpha.clone())?;
    let grid = cfg.grid()?;
    rec.set_embedding_constant(embedding_constant(grid));
    let params = sim_params(cfg, class)?;
    let (u0, v0) = cfg.initial_pair(grid, cfg.seeds[0])?;
    let run = evolve(&params, u0, v0, &observer(cfg))?;
    write_diag(rec, &run)?;
    let d = &run.series;
    let (e3_first, e3_last) = (d.e3.first().copied().unwrap_or(0.0), d.e3.last().copied().unwrap_or(0.0));
    Ok(format!(
        "simulate: n = {}, dt = {:.3e}, {} steps to t = {}\n  E3 {:.6e} -> {:.6e}\n  series: {} samples in diag.csv",
        cfg.n,
        cfg.dt,
        run.steps,
        cfg.t_end,
        e3_first,
        e3_last,
        d.len()
    ))
}

fn run_identities(cfg: &RunConfig, rec: &mut RunRecord) -> Result<String> {
    let class = classify_alpha(cfg.alpha.clone())?;
    let grid = cfg.grid()?;
    let ops = NormalFormOps::new(&class, grid)?;
    rec.set_min_divisors(ops.min_divisors());
    rec.set_embedding_constant(embedding_constant(grid));
    let params = sim_params(cfg, class)?;
    let (u0, v0) = cfg.initial_pair(grid, cfg.seeds[0])?;
    let run = evolve(&params, u0, v0, &observer(cfg))?;
    let traj = run
        .trajectory
        .as_ref()
        .expect("snapshot stride >= 1 was enforced at parse time");

    let with = identity_residual(&ops, traj, &params, true)?;
    let without = identity_residual(&ops, traj, &params, false)?;
    // Quadrature self-test: recompute on coarsened snapshot sets. Orders
    // near 2+ mean the stored stride resolves the integrands.
    let mut stride_worsts: Vec<(usize, f64)> = Vec::new();
    for factor in [1usize, 2, 4] {
        let thinned = traj.thin(factor);
        if thinned.states.len() < 3 {
            break;
        }
        let rep = identity_residual(&ops, &thinned, &params, true)?;
        stride_worsts.push((
            cfg.snapshot_stride * factor,
            rep.max_residual_u.max(rep.max_residual_v),
        ));
    }
    let orders: Vec<f64> = stride_worsts
        .windows(2)
        .map(|w| (w[1].1 / w[0].1).log2())
        .collect();

    #[derive(Serialize)]
    struct IdentityCheckReport {
        max_residual_u: f64,
        max_residual_v: f64,
        max_residual_u_without_resonant: f64,
        max_residual_v_without_resonant: f64,
        /// (snapshot stride in steps, worst relative residual)
        stride_refinement: Vec<(usize, f64)>,
        /// log2 of successive worst-residual ratios under stride doubling
        refinement_orders: Vec<f64>,
    }
    let report = IdentityCheckReport {
        max_residual_u: with.max_residual_u,
        max_residual_v: with.max_residual_v,
        max_residual_u_without_resonant: without.max_residual_u,
        max_residual_v_without_resonant: without.max_residual_v,
        stride_refinement: stride_worsts.clone(),
        refinement_orders: orders.clone(),
    };
    rec.write_report("identities", &report)?;
    let rows = rows_from_columns(&[&with.times, &with.residual_u, &with.residual_v])?;
    rec.write_series("identity_residuals", &["t", "residual_u", "residual_v"], &rows)?;

    let worst = with.max_residual_u.max(with.max_residual_v);
    let worst_no_rho = without.max_residual_u.max(without.max_residual_v);
    Ok(format!(
        "check-identities: n = {}, {} snapshots every {} steps\n  worst relative residual {:.3e} (u {:.3e}, v {:.3e})\n  without resonant terms {:.3e}\n  stride refinement orders {:?}",
        cfg.n,
        traj.states.len(),
        cfg.snapshot_stride,
        worst,
        with.max_residual_u,
        with.max_residual_v,
        worst_no_rho,
        orders
    ))
}

fn run_smoothing(cfg: &RunConfig, rec: &mut RunRecord) -> Result<String> {
    let class = classify_alpha(cfg.alpha.clone())?;
    let grid = cfg.grid()?;
    rec.set_embedding_constant(embedding_constant(grid));
    let report = smoothing_experiment(
        &class,
        cfg.s,
        &cfg.s1_grid,
        cfg.n,
        cfg.t_end,
        cfg.dt,
        &cfg.seeds,
        cfg.nonlinear,
    )?;
    for (seed, reason) in &report.skipped {
        rec.annotate(format!("seed {seed} skipped: {reason}"));
    }
    rec.write_report("smoothing", &report)?;
    let mut columns = vec!["t".to_string()];
    let mut cols: Vec<&[f64]> = vec![&report.sample_times];
    for (i, s1) in report.s1_grid.iter().enumerate() {
        columns.push(format!("residual_{}", norm_label(*s1)));
        cols.push(&report.residual_norms[i]);
    }
    let col_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    rec.write_series("residual_norms", &col_refs, &rows_from_columns(&cols)?)?;
    Ok(format!(
        "smoothing: n = {}, s = {}, {} seeds ({} skipped)\n  solution slope {:.3} (R^2 {:.3}), residual slope {:.3} (R^2 {:.3})\n  slope gap {}",
        cfg.n,
        cfg.s,
        report.seeds_used.len(),
        report.skipped.len(),
        report.solution_fit.slope,
        report.solution_fit.r2,
        report.residual_fit.slope,
        report.residual_fit.r2,
        match report.slope_gap {
            Some(g) => format!("{g:.3}"),
            None => "undefined (a fit fell below the R^2 gate)".to_string(),
        }
    ))
}

/// Materialize the forcing as concrete fields (zeros when absent), for the
/// solvers that want fields rather than options.
fn forcing_fields(cfg: &RunConfig) -> Result<(SpectralField, SpectralField)> {
    let grid = cfg.grid()?;
    let (f, g) = cfg.forcing_pair(grid)?;
    Ok((
        f.unwrap_or_else(|| SpectralField::zeros(grid)),
        g.unwrap_or_else(|| SpectralField::zeros(grid)),
    ))
}

#[derive(Serialize)]
struct StationaryReport {
    residual: f64,
    iterations: usize,
    ratio_f: f64,
    ratio_g: f64,
    step_sizes: Vec<f64>,
    p_h1: f64,
    p_h2: f64,
    q_h1: f64,
    q_h2: f64,
}

impl StationaryReport {
    fn new(stat: &StationaryPair) -> Self {
        StationaryReport {
            residual: stat.residual,
            iterations: stat.iterations,
            ratio_f: stat.ratio_f,
            ratio_g: stat.ratio_g,
            step_sizes: stat.step_sizes.clone(),
            p_h1: stat.p.sobolev_norm(1.0),
            p_h2: stat.p.sobolev_norm(2.0),
            q_h1: stat.q.sobolev_norm(1.0),
            q_h2: stat.q.sobolev_norm(2.0),
        }
    }
}

fn write_pair_modes(rec: &RunRecord, name: &str, p: &SpectralField, q: &SpectralField) -> Result<()> {
    let n = p.grid().max_mode() as i64;
    let rows: Vec<Vec<f64>> = (-n..=n)
        .map(|k| {
            let (a, b) = (p.coeff(k), q.coeff(k));
            vec![k as f64, a.re, a.im, b.re, b.im]
        })
        .collect();
    rec.write_table(name, &["k", "p_re", "p_im", "q_re", "q_im"], &rows)?;
    Ok(())
}

fn run_stationary(cfg: &RunConfig, rec: &mut RunRecord) -> Result<String> {
    let class = classify_alpha(cfg.alpha.clone())?;
    let (f, g) = forcing_fields(cfg)?;
    let stat = stationary_solve(&f, &g, cfg.gamma, cfg.delta, &class, cfg.tol, cfg.max_iter)?;
    let report = StationaryReport::new(&stat);
    rec.write_report("stationary", &report)?;
    write_pair_modes(rec, "stationary_modes", &stat.p, &stat.q)?;
    Ok(format!(
        "stationary: converged in {} iterations, residual {:.3e}\n  ||p||_H1 = {:.6e}, ||q||_H1 = {:.6e}\n  contraction ratios f {:.3e}, g {:.3e}",
        stat.iterations, stat.residual, report.p_h1, report.q_h1, stat.ratio_f, stat.ratio_g
    ))
}

fn run_attractor(cfg: &RunConfig, rec: &mut RunRecord) -> Result<String> {
    let class = classify_alpha(cfg.alpha.clone())?;
    let grid = cfg.grid()?;
    rec.set_embedding_constant(embedding_constant(grid));
    let (f, g) = forcing_fields(cfg)?;
    let stat = stationary_solve(&f, &g, cfg.gamma, cfg.delta, &class, cfg.tol, cfg.max_iter)?;
    let params = sim_params(cfg, class)?;
    let members: Vec<(u64, f64)> = cfg
        .seeds
        .iter()
        .enumerate()
        .map(|(i, &seed)| (seed, cfg.perturbations[i % cfg.perturbations.len()]))
        .collect();
    let report = trivial_attractor_experiment(&params, &stat, &members, cfg.threshold)?;
    rec.write_report("attractor", &report)?;
    write_pair_modes(rec, "stationary_modes", &stat.p, &stat.q)?;
    let mut converged = 0usize;
    for m in &report.members {
        if m.converged {
            converged += 1;
        } else {
            rec.annotate(format!(
                "seed {}: final distance {:.3e} above threshold {:.1e}",
                m.seed, m.final_distance, cfg.threshold
            ));
        }
        let rows = rows_from_columns(&[&m.times, &m.distance_h1, &m.e3, &m.h4])?;
        rec.write_series(
            &format!("member_{}", m.seed),
            &["t", "distance_h1", "e3", "h4"],
            &rows,
        )?;
    }
    let rates: Vec<String> = report
        .members
        .iter()
        .map(|m| match m.measured_rate {
            Some(r) => format!("{r:.3}"),
            None => "-".into(),
        })
        .collect();
    Ok(format!(
        "attractor: {} members, {} converged below {:.1e}\n  measured E3 decay rates [{}] vs bound {:.3}\n  embedding constant {:.4}",
        report.members.len(),
        converged,
        cfg.threshold,
        rates.join(", "),
        report.rate_bound,
        report.embedding_constant
    ))
}

fn run_growth(cfg: &RunConfig, rec: &mut RunRecord) -> Result<String> {
    let class = classify_alpha(cfg.alpha.clone())?;
    let report = growth_tracking(&class, cfg.s, cfg.n, cfg.t_end, cfg.seeds[0], cfg.nonlinear)?;
    rec.write_report("growth", &report)?;
    let rows = rows_from_columns(&[&report.times, &report.norms])?;
    let label = norm_label(cfg.s);
    rec.write_series("growth", &["t", &label], &rows)?;
    Ok(format!(
        "growth: n = {}, s = {}, t_end = {}\n  polynomial exponent {:.4} (R^2 {:.3}), late log-slope {:.3e}",
        cfg.n, cfg.s, cfg.t_end, report.poly_exponent, report.poly_r2, report.late_log_slope
    ))
}
