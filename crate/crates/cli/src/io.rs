//! Fixture, trace and report files.
//!
//! Data files are delimiter-separated values with a header row; every float
//! is rendered with Rust's shortest round-trip formatting, so re-reading a
//! file reproduces the exact bits. Each data file gets a JSON metadata
//! sidecar (`<file>.meta.json`) recording the seed, RNG algorithm, schema
//! version and resolved model constants.

use crate::config::{ExperimentConfig, ResolvedModel, SCHEMA_VERSION};
use crate::CliError;
use mixfilter::engine::FilterTrace;
use mixfilter::mixtures::{StateDistribution, Theta};
use mixfilter::simulate::{SimulatedPath, RNG_ALGORITHM};
use serde_json::json;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub fn sidecar_path(data_path: &Path) -> PathBuf {
    let mut name = data_path.as_os_str().to_os_string();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

fn model_metadata(cfg: &ExperimentConfig, model: &ResolvedModel) -> serde_json::Value {
    let m = &cfg.model;
    let (a, beta2) = match model {
        ResolvedModel::Kalman(k) => (k.a, k.beta2),
        ResolvedModel::Radial(r) => (r.ar_coefficient(), r.innovation_variance()),
        ResolvedModel::Cir(c) => (c.ar_coefficient(), c.innovation_variance()),
    };
    json!({
        "family": m.family,
        "delta": m.delta,
        "theta_drift": m.theta_drift,
        "sigma_diff": m.sigma_diff,
        "Delta": m.sampling_step,
        "lambda": m.lambda,
        "h": m.h,
        "gamma": m.gamma,
        "a": a,
        "beta2": beta2,
        "channel": cfg.channel.kind,
    })
}

fn metadata(
    kind: &str,
    cfg: &ExperimentConfig,
    model: &ResolvedModel,
    seed: u64,
    prune_threshold: f64,
) -> serde_json::Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "seed": seed,
        "rng": RNG_ALGORITHM,
        "n_steps": cfg.run.n_steps,
        "prune_threshold": prune_threshold,
        "init": { "kind": cfg.init.kind, "x0": cfg.init.x0 },
        "model": model_metadata(cfg, model),
    })
}

pub fn write_fixture(
    path: &Path,
    fixture: &SimulatedPath,
    cfg: &ExperimentConfig,
    model: &ResolvedModel,
    seed: u64,
) -> Result<(), CliError> {
    let mut out = String::from("step,state,obs\n");
    for (i, (x, y)) in fixture.states.iter().zip(&fixture.observations).enumerate() {
        writeln!(out, "{i},{x},{y}").expect("string write");
    }
    write_atomic(path, &out)?;
    let meta = metadata("fixture", cfg, model, seed, 0.0);
    write_atomic(
        &sidecar_path(path),
        &serde_json::to_string_pretty(&meta).expect("serializable"),
    )
}

pub fn read_fixture(path: &Path) -> Result<SimulatedPath, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading fixture {}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("step,state,obs") => {}
        other => {
            return Err(CliError::Io(format!(
                "fixture {} has unexpected header {other:?}",
                path.display()
            )))
        }
    }
    let mut states = Vec::new();
    let mut observations = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(CliError::Io(format!(
                "fixture {} line {}: expected 3 fields, got {}",
                path.display(),
                lineno + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64, CliError> {
            s.parse::<f64>().map_err(|e| {
                CliError::Io(format!(
                    "fixture {} line {}: bad float '{s}': {e}",
                    path.display(),
                    lineno + 2
                ))
            })
        };
        states.push(parse(fields[1])?);
        observations.push(parse(fields[2])?);
    }
    Ok(SimulatedPath {
        states,
        observations,
    })
}

/// Trace rows describe the posterior after each update: theta fields, then
/// weight_0..weight_K padded with zeros up to the longest mixture in the
/// trace, the mixture length, the step's log marginal and the running
/// log-likelihood. A point-mass posterior (step 0 of a Dirac start) is
/// encoded with zeroed scale fields and mixture_length 0; its location is in
/// the metadata sidecar.
pub fn write_trace(
    path: &Path,
    trace: &FilterTrace,
    cfg: &ExperimentConfig,
    model: &ResolvedModel,
    seed: u64,
    prune_threshold: f64,
) -> Result<(), CliError> {
    let max_len = trace
        .steps
        .iter()
        .map(|s| match &s.posterior {
            StateDistribution::Mixture(d) => d.length(),
            StateDistribution::Dirac(_) => 0,
        })
        .max()
        .unwrap_or(0);

    let mut header = String::from("step");
    for col in model.theta_columns() {
        write!(header, ",{col}").expect("string write");
    }
    for k in 0..=max_len {
        write!(header, ",weight_{k}").expect("string write");
    }
    header.push_str(",mixture_length,log_marginal,cum_loglik\n");

    let mut out = header;
    let mut cum = 0.0;
    for (i, step) in trace.steps.iter().enumerate() {
        cum += step.log_marginal;
        write!(out, "{i}").expect("string write");
        match &step.posterior {
            StateDistribution::Mixture(d) => {
                match d.theta() {
                    Theta::Kalman(t) => {
                        write!(out, ",{},{},{}", t.mu, t.m, t.sigma2).expect("string write")
                    }
                    Theta::Scale(t) => write!(out, ",{}", t.sigma).expect("string write"),
                }
                for k in 0..=max_len {
                    write!(out, ",{}", d.weights().get(k)).expect("string write");
                }
                write!(out, ",{}", d.length()).expect("string write");
            }
            StateDistribution::Dirac(x0) => {
                match model {
                    ResolvedModel::Kalman(_) => {
                        write!(out, ",0,{x0},0").expect("string write")
                    }
                    _ => write!(out, ",0").expect("string write"),
                }
                write!(out, ",1").expect("string write");
                for _ in 1..=max_len {
                    write!(out, ",0").expect("string write");
                }
                write!(out, ",0").expect("string write");
            }
        }
        writeln!(out, ",{},{}", step.log_marginal, cum).expect("string write");
    }
    write_atomic(path, &out)?;
    let meta = metadata("trace", cfg, model, seed, prune_threshold);
    write_atomic(
        &sidecar_path(path),
        &serde_json::to_string_pretty(&meta).expect("serializable"),
    )
}

pub fn write_report(path: &Path, report: &serde_json::Value) -> Result<(), CliError> {
    write_atomic(
        path,
        &serde_json::to_string_pretty(report).expect("serializable"),
    )
}
