//! The four batch commands: simulate, filter, loglik, validate.

use crate::config::{ExperimentConfig, ResolvedModel, SCHEMA_VERSION};
use crate::{io, CliError};
use mixfilter::engine::run_filter;
use mixfilter::mixtures::StateDistribution;
use mixfilter::oracle::grid::{grid_filter, GridDensities, GridSpec};
use mixfilter::oracle::particle::{particle_filter, ParticleConfig, ParticleSamplers};
use mixfilter::oracle::{compare_grid, compare_particle};
use mixfilter::simulate::{sample_mixture, SimConfig};
use serde_json::json;
use std::path::{Path, PathBuf};

/// Per-invocation overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub prune: Option<f64>,
    pub out: Option<PathBuf>,
}

fn effective_seed(cfg: &ExperimentConfig, ov: &Overrides) -> u64 {
    ov.seed.unwrap_or(cfg.run.seed)
}

fn effective_prune(cfg: &ExperimentConfig, ov: &Overrides) -> f64 {
    ov.prune.unwrap_or(cfg.run.prune_threshold)
}

fn output_path(
    ov: &Overrides,
    configured: &Option<String>,
    what: &str,
) -> Result<PathBuf, CliError> {
    ov.out
        .clone()
        .or_else(|| configured.as_ref().map(PathBuf::from))
        .ok_or_else(|| {
            CliError::Config(vec![format!(
                "no output path for the {what}: set [output] in the config or pass --out"
            )])
        })
}

pub fn cmd_simulate(cfg: &ExperimentConfig, ov: &Overrides) -> Result<PathBuf, CliError> {
    let model = cfg.resolve()?;
    let seed = effective_seed(cfg, ov);
    let init = cfg.init_spec(&model)?;
    let sim = SimConfig {
        n_steps: cfg.run.n_steps,
        seed,
        init,
    };
    let fixture = model.simulate(&sim).map_err(CliError::numeric)?;
    let path = output_path(ov, &cfg.output.fixture, "fixture")?;
    io::write_fixture(&path, &fixture, cfg, &model, seed)?;
    Ok(path)
}

fn filter_fixture(
    cfg: &ExperimentConfig,
    model: &ResolvedModel,
    fixture_path: &Path,
    prune: f64,
) -> Result<mixfilter::FilterTrace, CliError> {
    let fixture = io::read_fixture(fixture_path)?;
    let init = cfg.init_spec(model)?;
    let state = model.init_state(&init).map_err(CliError::numeric)?;
    run_filter(model.conjugate(), &state, &fixture.observations, prune).map_err(CliError::numeric)
}

pub fn cmd_filter(
    cfg: &ExperimentConfig,
    fixture_path: &Path,
    ov: &Overrides,
) -> Result<PathBuf, CliError> {
    let model = cfg.resolve()?;
    let prune = effective_prune(cfg, ov);
    let trace = filter_fixture(cfg, &model, fixture_path, prune)?;
    let path = output_path(ov, &cfg.output.trace, "trace")?;
    io::write_trace(&path, &trace, cfg, &model, effective_seed(cfg, ov), prune)?;
    Ok(path)
}

pub fn cmd_loglik(
    cfg: &ExperimentConfig,
    fixture_path: &Path,
    ov: &Overrides,
) -> Result<(f64, Option<PathBuf>), CliError> {
    let model = cfg.resolve()?;
    let trace = filter_fixture(cfg, &model, fixture_path, effective_prune(cfg, ov))?;
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "loglik",
        "n_steps": trace.steps.len(),
        "total_loglik": trace.total_loglik,
        "per_step_log_marginal": trace.steps.iter().map(|s| s.log_marginal).collect::<Vec<_>>(),
    });
    let path = match output_path(ov, &cfg.output.report, "report") {
        Ok(p) => {
            io::write_report(&p, &report)?;
            Some(p)
        }
        Err(_) => None,
    };
    Ok((trace.total_loglik, path))
}

/// Thresholds the validation report is judged against.
const GRID_SUP_TOL: f64 = 1e-6;
const GRID_LOGLIK_TOL: f64 = 1e-6;
const PARTICLE_Z_TOL: f64 = 3.0;

pub fn cmd_validate(
    cfg: &ExperimentConfig,
    fixture_path: &Path,
    ov: &Overrides,
) -> Result<(serde_json::Value, Option<PathBuf>), CliError> {
    let model = cfg.resolve()?;
    let seed = effective_seed(cfg, ov);
    let fixture = io::read_fixture(fixture_path)?;
    let init = cfg.init_spec(&model)?;
    let init_state = model.init_state(&init).map_err(CliError::numeric)?;
    let init_mixture = match &init_state {
        StateDistribution::Mixture(d) => d.clone(),
        StateDistribution::Dirac(_) => {
            return Err(CliError::Config(vec![
                "validate needs a stationary or mixture init (a point mass cannot be \
                 discretized on the oracle grid)"
                    .into(),
            ]))
        }
    };

    // exact filter
    let trace = run_filter(model.conjugate(), &init_state, &fixture.observations, 0.0)
        .map_err(CliError::numeric)?;
    let posteriors: Vec<_> = trace
        .steps
        .iter()
        .map(|s| s.posterior.as_mixture().expect("mixture init").clone())
        .collect();

    // grid oracle
    let grid = GridSpec::new(
        cfg.oracle.grid_lo,
        cfg.oracle.grid_hi,
        cfg.oracle.grid_points,
    )
    .map_err(CliError::numeric)?;
    let init_lp = |x: f64| init_mixture.logpdf(x);
    let trans = |x: f64, xp: f64| model.transition_logpdf(x, xp);
    let obs = |x: f64, y: f64| model.obs_logpdf(x, y);
    let grid_out = grid_filter(
        &GridDensities {
            init_logpdf: &init_lp,
            trans_logpdf: &trans,
            obs_logpdf: &obs,
        },
        &grid,
        &fixture.observations,
    )
    .map_err(CliError::numeric)?;
    let grid_report = compare_grid(&posteriors, trace.total_loglik, &grid_out);

    // particle oracle
    let init_for_sampler = init_mixture.clone();
    let init_sample =
        move |rng: &mut rand_chacha::ChaCha8Rng| sample_mixture(&init_for_sampler, rng);
    let model_for_sampler = model.clone();
    let trans_sample = move |rng: &mut rand_chacha::ChaCha8Rng, x: f64| {
        model_for_sampler.transition_sample(rng, x)
    };
    let pf = particle_filter(
        &ParticleSamplers {
            init_sample: &init_sample,
            trans_sample: &trans_sample,
            obs_logpdf: &obs,
        },
        &ParticleConfig::new(cfg.oracle.n_particles, cfg.oracle.replicates, seed)
            .map_err(CliError::numeric)?,
        &fixture.observations,
    )
    .map_err(CliError::numeric)?;
    let means: Vec<f64> = posteriors.iter().map(|d| d.mean()).collect();
    let vars: Vec<f64> = posteriors.iter().map(|d| d.variance()).collect();
    let particle_report = compare_particle(&means, &vars, trace.total_loglik, &pf);

    let grid_pass =
        grid_report.sup_density_diff < GRID_SUP_TOL && grid_report.loglik_diff < GRID_LOGLIK_TOL;
    let particle_pass = particle_report.max_abs_z < PARTICLE_Z_TOL;
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "validate",
        "n_steps": fixture.observations.len(),
        "exact_loglik": trace.total_loglik,
        "grid": {
            "sup_density_diff": grid_report.sup_density_diff,
            "loglik_diff": grid_report.loglik_diff,
            "max_mean_diff": grid_report.max_mean_diff,
            "max_var_diff": grid_report.max_var_diff,
            "tolerance": { "sup_density": GRID_SUP_TOL, "loglik": GRID_LOGLIK_TOL },
            "pass": grid_pass,
        },
        "particle": {
            "loglik_estimate": pf.loglik,
            "loglik_se": pf.loglik_se,
            "loglik_z": particle_report.loglik_z,
            "max_abs_z": particle_report.max_abs_z,
            "tolerance": { "abs_z": PARTICLE_Z_TOL },
            "pass": particle_pass,
        },
        "pass": grid_pass && particle_pass,
    });
    let path = match output_path(ov, &cfg.output.report, "report") {
        Ok(p) => {
            io::write_report(&p, &report)?;
            Some(p)
        }
        Err(_) => None,
    };
    Ok((report, path))
}
