//! Experiment dispatch: builds the model, runs the requested experiment and
//! writes the report bundle (JSON manifest + CSV tables + SVG plots).

use std::path::{Path, PathBuf};

use thiserror::Error;

use mfldp_core::{
    log_partition_estimate, log_partition_exact, minimize, sample_mcmc, wasserstein_exact,
    Configuration, DiscreteMeasure, GibbsModel, McmcConfig, SearchSpec, StateSpace,
};

use crate::config::{
    ConfigError, ExperimentConfig, ExperimentKind, SampleFormat, Strategy,
};
use crate::converge::{convergence_report, ConvergenceSampling};
use crate::inequalities::{verify_inequalities, InstanceCaps};
use crate::plot::{line_plot, Series};
use crate::rate::{estimate_rate, RateSampling};
use crate::report::{fmt, ReportBundle};
use crate::sanov::sanov_exact_check;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("numerical failure: {0}")]
    Numerical(#[from] mfldp_core::Error),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

pub struct RunOptions {
    pub out_dir: PathBuf,
    pub trace: bool,
}

pub struct RunOutcome {
    pub manifest: PathBuf,
    pub warnings: Vec<String>,
}

/// Executes one experiment and writes its report bundle.
pub fn run_experiment(
    kind: ExperimentKind,
    config: &ExperimentConfig,
    raw_config: &str,
    options: &RunOptions,
) -> Result<RunOutcome, RunError> {
    config.validate(kind)?;
    let mut bundle = ReportBundle::new(&options.out_dir, kind.name(), config.seed, raw_config)?;
    match kind {
        ExperimentKind::Sample => run_sample(config, &mut bundle)?,
        ExperimentKind::Minimize => run_minimize(config, &mut bundle, options.trace)?,
        ExperimentKind::Rate => run_rate(config, &mut bundle)?,
        ExperimentKind::Zn => run_zn(config, &mut bundle)?,
        ExperimentKind::Verify => run_verify(config, &mut bundle, options.trace)?,
        ExperimentKind::Converge => run_converge(config, &mut bundle)?,
        ExperimentKind::Wasserstein => run_wasserstein(config, &mut bundle)?,
    }
    let (manifest, warnings) = bundle.finish()?;
    Ok(RunOutcome { manifest, warnings })
}

fn build_model(config: &ExperimentConfig) -> Result<GibbsModel, RunError> {
    Ok(config
        .model
        .as_ref()
        .ok_or_else(|| ConfigError::MissingSection("model".into()))?
        .build()?)
}

fn run_sample(config: &ExperimentConfig, bundle: &mut ReportBundle) -> Result<(), RunError> {
    let model = build_model(config)?;
    let sc = config.sample.as_ref().expect("validated");
    let mcmc = McmcConfig {
        steps: sc.steps,
        burn_in: sc.burn_in,
        thinning: sc.thinning,
        sigma: sc.sigma,
        ..Default::default()
    };
    let run = sample_mcmc(&model, sc.n, &mcmc, config.seed)?;
    match sc.format {
        SampleFormat::Csv => {
            let rows: Vec<Vec<String>> = run
                .samples
                .iter()
                .enumerate()
                .map(|(idx, s)| {
                    let mut row = vec![idx.to_string()];
                    match s {
                        Configuration::Finite(states) => {
                            let f = model.space().as_finite().unwrap();
                            row.extend(states.iter().map(|&st| f.label(st).to_string()));
                        }
                        Configuration::Euclidean { coords, .. } => {
                            row.extend(coords.iter().map(|&c| fmt(c)));
                        }
                    }
                    row
                })
                .collect();
            let mut header = vec!["sample".to_string()];
            match model.space() {
                StateSpace::Finite(_) => {
                    header.extend((0..sc.n).map(|i| format!("x{i}")));
                }
                StateSpace::Euclidean(e) => {
                    for i in 0..sc.n {
                        for d in 0..e.dim() {
                            header.push(format!("x{i}_{d}"));
                        }
                    }
                }
            }
            let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            bundle.csv("samples.csv", &header_refs, &rows)?;
        }
        SampleFormat::Binary => {
            let e = model.space().as_euclidean().ok_or_else(|| ConfigError::Invalid {
                field: "sample.format".into(),
                message: "binary frames are defined for euclidean spaces only".into(),
            })?;
            let mut bytes = Vec::new();
            bytes.extend_from_slice(b"MFLD");
            bytes.extend_from_slice(&1u16.to_le_bytes());
            bytes.extend_from_slice(&(sc.n as u32).to_le_bytes());
            bytes.extend_from_slice(&(e.dim() as u32).to_le_bytes());
            for s in &run.samples {
                if let Configuration::Euclidean { coords, .. } = s {
                    for c in coords {
                        bytes.extend_from_slice(&c.to_le_bytes());
                    }
                }
            }
            bundle.binary("samples.mfld", &bytes)?;
        }
    }
    bundle.set("n", serde_json::json!(run.n));
    bundle.set("samples", serde_json::json!(run.samples.len()));
    bundle.set("acceptance_rate", serde_json::json!(run.acceptance_rate));
    bundle.set("sigma", serde_json::json!(run.tuned_sigma));
    bundle.set("audit_failures", serde_json::json!(run.audit_failures));
    if run.audit_failures > 0 {
        bundle.warn(format!("{} cache audits failed", run.audit_failures));
    }
    Ok(())
}

fn search_spec(strategy: Strategy, mesh: f64, damping: f64, tol: f64, max_iter: u64) -> SearchSpec {
    match strategy {
        Strategy::GridScan => SearchSpec::GridScan { mesh },
        Strategy::Parametric1d => SearchSpec::Parametric1d { mesh },
        Strategy::FixedPoint => SearchSpec::FixedPointMultiStart {
            starts: Vec::new(),
            damping,
            tol,
            max_iter,
        },
    }
}

fn run_minimize(
    config: &ExperimentConfig,
    bundle: &mut ReportBundle,
    trace: bool,
) -> Result<(), RunError> {
    let model = build_model(config)?;
    let mc = config.minimize.as_ref().expect("validated");
    let spec = search_spec(mc.strategy, mc.mesh, mc.damping, mc.tol, mc.max_iter);
    let result = minimize(&model, &spec)?;
    bundle.text("minimizer.json", &result.minimizer.to_json())?;
    bundle.set("inf_value", serde_json::json!(result.inf_value));
    bundle.set("method", serde_json::json!(result.method));
    bundle.set("iterations", serde_json::json!(result.iterations));
    bundle.set("residual", serde_json::json!(result.residual));
    bundle.set("converged", serde_json::json!(result.converged));
    bundle.set("extended_ce", serde_json::json!(result.extended_ce));
    bundle.set(
        "magnetization",
        serde_json::json!(result.minimizer.magnetization()),
    );
    if !result.converged {
        bundle.warn("fixed point did not converge".into());
    }
    if trace && !result.residual_history.is_empty() {
        let rows: Vec<Vec<String>> = result
            .residual_history
            .iter()
            .enumerate()
            .map(|(i, r)| vec![i.to_string(), fmt(*r)])
            .collect();
        bundle.csv("residual_history.csv", &["iteration", "w1_step"], &rows)?;
    }
    Ok(())
}

fn run_rate(config: &ExperimentConfig, bundle: &mut ReportBundle) -> Result<(), RunError> {
    let model = build_model(config)?;
    let rc = config.rate.as_ref().expect("validated");
    let sampling = RateSampling {
        replicas: rc.replicas,
        burn_in: rc.burn_in,
        decorrelation: rc.decorrelation,
    };
    let report = estimate_rate(&model, &rc.event, &rc.n_list, &sampling, config.seed)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt(r.value),
                fmt(r.lo),
                fmt(r.hi),
                r.target.map(fmt).unwrap_or_else(|| "unavailable".into()),
                r.gap.map(fmt).unwrap_or_else(|| "unavailable".into()),
                fmt(r.envelope),
            ]
        })
        .collect();
    bundle.csv(
        "rate.csv",
        &["n", "log_rate", "wilson_lo", "wilson_hi", "target", "gap", "envelope"],
        &rows,
    )?;
    for r in &report.rows {
        if r.value == f64::NEG_INFINITY {
            bundle.warn(format!("event never hit at n = {} (censored)", r.n));
        }
    }
    let mut series = vec![Series {
        name: "(1/n) log p".into(),
        points: report.rows.iter().map(|r| (r.n as f64, r.value)).collect(),
    }];
    if let Some(t) = report.target {
        series.push(Series {
            name: "target".into(),
            points: report.rows.iter().map(|r| (r.n as f64, t)).collect(),
        });
    }
    line_plot(
        &bundle.path("rate.svg"),
        &format!("rate of {}", report.event),
        "n",
        "(1/n) log P",
        &series,
    )?;
    bundle.files.push("rate.svg".into());
    bundle.set("event", serde_json::json!(report.event));
    bundle.set("target", serde_json::json!(report.target));
    bundle.set("method", serde_json::json!(report.method));

    if rc.exact_cross_check && model.interactions().is_empty() {
        let alpha = model.reference()?.alpha().clone();
        let exact = sanov_exact_check(&alpha, &rc.n_list, &rc.event)?;
        let rows: Vec<Vec<String>> = exact
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    fmt(r.value),
                    fmt(r.target.unwrap_or(f64::NAN)),
                    fmt(r.gap.unwrap_or(f64::NAN)),
                    fmt(r.envelope),
                ]
            })
            .collect();
        bundle.csv(
            "sanov.csv",
            &["n", "log_rate", "target", "gap", "envelope"],
            &rows,
        )?;
    }
    Ok(())
}

fn zn_target(model: &GibbsModel) -> Option<f64> {
    let f = model.space().as_finite()?;
    let spec = if f.len() == 2 {
        SearchSpec::Parametric1d { mesh: 1e-4 }
    } else if f.len() <= 4 {
        SearchSpec::GridScan { mesh: 5e-3 }
    } else {
        return None;
    };
    minimize(model, &spec).ok().map(|r| -r.inf_value)
}

fn run_zn(config: &ExperimentConfig, bundle: &mut ReportBundle) -> Result<(), RunError> {
    let model = build_model(config)?;
    let zc = config.zn.as_ref().expect("validated");
    let target = zn_target(&model);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &n in &zc.n_list {
        let value = log_partition_exact(&model, n)?;
        let envelope = model
            .space()
            .as_finite()
            .map(|f| f.len() as f64 * ((n + 1) as f64).ln() / n as f64)
            .unwrap_or(f64::NAN);
        rows.push(vec![
            n.to_string(),
            fmt(value),
            target.map(fmt).unwrap_or_else(|| "unavailable".into()),
            target.map(|t| fmt(value - t)).unwrap_or_else(|| "unavailable".into()),
            fmt(envelope),
        ]);
        points.push((n as f64, value));
    }
    bundle.csv(
        "zn.csv",
        &["n", "log_zn_over_n", "target", "gap", "envelope"],
        &rows,
    )?;
    let mut series = vec![Series {
        name: "(1/n) log Zn".into(),
        points,
    }];
    if let Some(t) = target {
        series.push(Series {
            name: "-inf H_W".into(),
            points: zc.n_list.iter().map(|&n| (n as f64, t)).collect(),
        });
    }
    line_plot(
        &bundle.path("zn.svg"),
        "partition function convergence",
        "n",
        "(1/n) log Zn",
        &series,
    )?;
    bundle.files.push("zn.svg".into());
    bundle.set("target", serde_json::json!(target));

    if zc.estimate {
        let schedule: Vec<f64> = (0..zc.schedule_points)
            .map(|i| i as f64 / (zc.schedule_points - 1) as f64)
            .collect();
        let mcmc = McmcConfig {
            steps: zc.steps,
            burn_in: zc.burn_in,
            thinning: zc.thinning,
            ..Default::default()
        };
        let mut ti_rows = Vec::new();
        for &n in &zc.n_list {
            let est = log_partition_estimate(&model, n, &schedule, &mcmc, config.seed)?;
            let exact = log_partition_exact(&model, n)?;
            ti_rows.push(vec![
                n.to_string(),
                fmt(est.value),
                fmt(est.mc_stderr),
                fmt(est.quad_error),
                fmt(est.combined_stderr),
                fmt(exact),
                fmt(est.value - exact),
            ]);
        }
        bundle.csv(
            "ti.csv",
            &["n", "estimate", "mc_stderr", "quad_error", "combined_stderr", "exact", "error"],
            &ti_rows,
        )?;
    }
    Ok(())
}

fn run_verify(
    config: &ExperimentConfig,
    bundle: &mut ReportBundle,
    trace: bool,
) -> Result<(), RunError> {
    let vc = config.verify.clone().unwrap_or_default();
    let caps = InstanceCaps {
        max_states: vc.max_states,
        max_n: vc.max_n,
    };
    let report = verify_inequalities(vc.instances, &caps, config.seed)?;
    let rows: Vec<Vec<String>> = report
        .suites
        .iter()
        .map(|s| {
            vec![
                s.name.clone(),
                s.instances.to_string(),
                s.violations.to_string(),
                fmt(s.min_slack),
                fmt(s.mean_slack),
            ]
        })
        .collect();
    bundle.csv(
        "verify.csv",
        &["suite", "instances", "violations", "min_slack", "mean_slack"],
        &rows,
    )?;
    let failures: Vec<String> = report
        .suites
        .iter()
        .flat_map(|s| s.failures.iter().map(move |f| format!("{}: {f}", s.name)))
        .collect();
    if !failures.is_empty() {
        bundle.text("violations.txt", &failures.join("\n"))?;
        bundle.warn(format!("{} inequality violations", failures.len()));
    }
    bundle.set("all_green", serde_json::json!(report.all_green()));
    if trace {
        let mut rows = Vec::new();
        for s in &report.suites {
            for (idx, slack) in s.slacks.iter().enumerate() {
                rows.push(vec![s.name.clone(), idx.to_string(), fmt(*slack)]);
            }
        }
        bundle.csv("verify_trace.csv", &["suite", "instance", "slack"], &rows)?;
    }
    Ok(())
}

fn run_converge(config: &ExperimentConfig, bundle: &mut ReportBundle) -> Result<(), RunError> {
    let model = build_model(config)?;
    let cc = config.converge.as_ref().expect("validated");
    let spec = search_spec(cc.strategy, cc.mesh, 0.5, 1e-8, 10_000);
    let sampling = ConvergenceSampling {
        replicas: cc.replicas,
        burn_in: cc.burn_in,
        sweeps: cc.sweeps,
    };
    let report = convergence_report(&model, &spec, &cc.n_list, &sampling, cc.p, config.seed)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt(r.mean),
                fmt(r.q10),
                fmt(r.median),
                fmt(r.q90),
            ]
        })
        .collect();
    bundle.csv("converge.csv", &["n", "mean", "q10", "median", "q90"], &rows)?;
    line_plot(
        &bundle.path("converge.svg"),
        &format!("W_{} concentration at the minimizer", report.p),
        "n",
        "W_p(L_n, minimizer)",
        &[Series {
            name: "mean".into(),
            points: report.rows.iter().map(|r| (r.n as f64, r.mean)).collect(),
        }],
    )?;
    bundle.files.push("converge.svg".into());
    bundle.set("monotone", serde_json::json!(report.monotone));
    bundle.set("symmetric_pair", serde_json::json!(report.symmetric_pair));
    bundle.text("minimizer.json", &report.minimizer.to_json())?;
    if !report.monotone {
        bundle.warn("mean W_p not monotone over n".into());
    }
    Ok(())
}

fn run_wasserstein(config: &ExperimentConfig, bundle: &mut ReportBundle) -> Result<(), RunError> {
    let model_config = config
        .model
        .as_ref()
        .ok_or_else(|| ConfigError::MissingSection("model".into()))?;
    let wc = config.wasserstein.as_ref().expect("validated");
    let space = model_config.space.clone();
    let mu = load_measure(&space, &wc.mu)?;
    let nu = load_measure(&space, &wc.nu)?;
    let (value, plan) = wasserstein_exact(&mu, &nu, wc.p)?;
    bundle.set("w_p", serde_json::json!(value));
    bundle.set("p", serde_json::json!(wc.p));
    bundle.set("cost", serde_json::json!(plan.cost));
    if wc.plan_csv {
        let rows: Vec<Vec<String>> = plan
            .entries
            .iter()
            .map(|&(i, j, w)| vec![i.to_string(), j.to_string(), fmt(w)])
            .collect();
        bundle.csv("plan.csv", &["i", "j", "mass"], &rows)?;
    }
    Ok(())
}

fn load_measure(space: &StateSpace, path: &Path) -> Result<DiscreteMeasure, RunError> {
    let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(DiscreteMeasure::from_json(space, &raw)?)
}
