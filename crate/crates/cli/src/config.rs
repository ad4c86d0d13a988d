//! Experiment configuration: a versioned TOML schema resolving to a concrete
//! model, initial condition and run/oracle settings.
//!
//! Validation collects every violated constraint rather than stopping at the
//! first, so a bad config is fixable in one pass.

use crate::CliError;
use mixfilter::engine::ConjugateFamily;
use mixfilter::mixtures::{
    Family, KalmanTheta, MixtureDistribution, ScaleTheta, StateDistribution, Theta, WeightVector,
};
use mixfilter::radial_ou::derive_discrete;
use mixfilter::simulate::{self, InitSpec, SimConfig, SimulatedPath};
use mixfilter::{ChannelKind, CirModel, KalmanModel, RadialOuModel};
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    pub init: InitConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: String,
    pub delta: Option<f64>,
    pub theta_drift: f64,
    pub sigma_diff: f64,
    #[serde(rename = "Delta")]
    pub sampling_step: f64,
    pub lambda: Option<f64>,
    pub h: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub kind: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub kind: String,
    pub x0: Option<f64>,
    pub sigma: Option<f64>,
    pub mu: Option<f64>,
    pub m: Option<f64>,
    pub sigma2: Option<f64>,
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub prune_threshold: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    pub n_particles: usize,
    pub replicates: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            grid_lo: 1e-9,
            grid_hi: 15.0,
            grid_points: 2001,
            n_particles: 10_000,
            replicates: 10,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub fixture: Option<String>,
    pub trace: Option<String>,
    pub report: Option<String>,
}

impl ExperimentConfig {
    pub fn from_str(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(vec![format!("parse error: {e}")]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading config {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    /// Check every constraint and report all violations at once.
    fn validate(&self) -> Result<(), CliError> {
        let mut problems = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            problems.push(format!(
                "schema_version must be {SCHEMA_VERSION}, got {}",
                self.schema_version
            ));
        }
        let m = &self.model;
        let family = m.family.as_str();
        if !matches!(family, "kalman" | "radial_ou" | "gamma_cir") {
            problems.push(format!(
                "model.family must be one of kalman | radial_ou | gamma_cir, got '{family}'"
            ));
        }
        if !(m.sigma_diff > 0.0) {
            problems.push(format!("model.sigma_diff must be > 0, got {}", m.sigma_diff));
        }
        if !(m.sampling_step > 0.0) {
            problems.push(format!("model.Delta must be > 0, got {}", m.sampling_step));
        }
        match family {
            "kalman" => {
                if m.h.is_none() {
                    problems.push("model.h is required for the kalman family".into());
                }
                match m.gamma {
                    None => problems.push("model.gamma is required for the kalman family".into()),
                    Some(g) if !(g > 0.0) => {
                        problems.push(format!("model.gamma must be > 0, got {g}"))
                    }
                    _ => {}
                }
                if m.delta.is_some() {
                    problems.push("model.delta does not apply to the kalman family".into());
                }
                if m.lambda.is_some() {
                    problems.push("model.lambda does not apply to the kalman family".into());
                }
            }
            "radial_ou" | "gamma_cir" => {
                match m.delta {
                    None => problems.push(format!("model.delta is required for {family}")),
                    Some(d) if !(d >= 1.0) => {
                        problems.push(format!("model.delta must be >= 1, got {d}"))
                    }
                    _ => {}
                }
                match m.lambda {
                    None => problems.push(format!("model.lambda is required for {family}")),
                    Some(l) if !(l > 0.0) => {
                        problems.push(format!("model.lambda must be > 0, got {l}"))
                    }
                    _ => {}
                }
                if m.h.is_some() || m.gamma.is_some() {
                    problems.push(format!("model.h / model.gamma do not apply to {family}"));
                }
            }
            _ => {}
        }

        let kind = self.channel.kind.as_deref();
        match (family, kind) {
            ("kalman", None | Some("linear_gaussian")) => {}
            ("kalman", Some(other)) => problems.push(format!(
                "channel.kind '{other}' is not valid for kalman (only linear_gaussian)"
            )),
            ("radial_ou", None | Some("multiplicative")) => {}
            ("radial_ou", Some(other)) => problems.push(format!(
                "channel.kind '{other}' is not valid for radial_ou (only multiplicative)"
            )),
            ("gamma_cir", Some(k)) => {
                if parse_channel(k).is_none() {
                    problems.push(format!(
                        "channel.kind '{k}' is not valid for gamma_cir (squared_mult | inverse | \
                         sv_prime | sv_double_prime | poisson)"
                    ));
                }
            }
            ("gamma_cir", None) => {
                problems.push("channel.kind is required for the gamma_cir family".into())
            }
            _ => {}
        }

        match self.init.kind.as_str() {
            "stationary" => {
                if self.model.theta_drift >= 0.0 {
                    problems.push(format!(
                        "init.kind = stationary requires theta_drift < 0, got {}",
                        self.model.theta_drift
                    ));
                }
            }
            "dirac" => match self.init.x0 {
                None => problems.push("init.x0 is required for init.kind = dirac".into()),
                Some(x0) if family != "kalman" && !(x0 > 0.0) => {
                    problems.push(format!("init.x0 must be > 0 for {family}, got {x0}"))
                }
                _ => {}
            },
            "mixture" => {
                match &self.init.weights {
                    None => {
                        problems.push("init.weights is required for init.kind = mixture".into())
                    }
                    Some(w) => {
                        if w.is_empty() || w.iter().any(|&x| !(x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                            problems.push("init.weights must be nonnegative with positive sum".into());
                        }
                    }
                }
                if family == "kalman" {
                    if self.init.m.is_none() || self.init.sigma2.is_none() {
                        problems.push(
                            "init.m and init.sigma2 are required for a kalman mixture init".into(),
                        );
                    }
                    if let Some(s2) = self.init.sigma2 {
                        if !(s2 > 0.0) {
                            problems.push(format!("init.sigma2 must be > 0, got {s2}"));
                        }
                    }
                } else {
                    match self.init.sigma {
                        None => problems
                            .push(format!("init.sigma is required for a {family} mixture init")),
                        Some(s) if !(s > 0.0) => {
                            problems.push(format!("init.sigma must be > 0, got {s}"))
                        }
                        _ => {}
                    }
                }
            }
            other => problems.push(format!(
                "init.kind must be one of stationary | dirac | mixture, got '{other}'"
            )),
        }

        if !(self.run.prune_threshold >= 0.0 && self.run.prune_threshold < 1.0) {
            problems.push(format!(
                "run.prune_threshold must be in [0, 1), got {}",
                self.run.prune_threshold
            ));
        }
        let o = &self.oracle;
        if !(o.grid_lo < o.grid_hi) {
            problems.push(format!(
                "oracle.grid_lo must be < oracle.grid_hi, got ({}, {})",
                o.grid_lo, o.grid_hi
            ));
        }
        if o.grid_points < 64 {
            problems.push(format!(
                "oracle.grid_points must be >= 64, got {}",
                o.grid_points
            ));
        }
        if o.n_particles < 100 {
            problems.push(format!(
                "oracle.n_particles must be >= 100, got {}",
                o.n_particles
            ));
        }
        if o.replicates < 2 {
            problems.push(format!(
                "oracle.replicates must be >= 2, got {}",
                o.replicates
            ));
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems))
        }
    }

    /// Build the concrete model. Assumes `validate` passed.
    pub fn resolve(&self) -> Result<ResolvedModel, CliError> {
        let m = &self.model;
        let numeric = |e: mixfilter::Error| CliError::Config(vec![e.to_string()]);
        match m.family.as_str() {
            "kalman" => {
                let (a, beta2) = derive_discrete(m.theta_drift, m.sigma_diff, m.sampling_step);
                let gamma = m.gamma.expect("validated");
                Ok(ResolvedModel::Kalman(
                    KalmanModel::new(m.h.expect("validated"), gamma * gamma, a, beta2)
                        .map_err(numeric)?,
                ))
            }
            "radial_ou" => Ok(ResolvedModel::Radial(
                RadialOuModel::new(
                    m.theta_drift,
                    m.sigma_diff,
                    m.delta.expect("validated"),
                    m.sampling_step,
                    m.lambda.expect("validated"),
                )
                .map_err(numeric)?,
            )),
            "gamma_cir" => {
                let kind = parse_channel(self.channel.kind.as_deref().expect("validated"))
                    .expect("validated");
                Ok(ResolvedModel::Cir(
                    CirModel::new(
                        m.theta_drift,
                        m.sigma_diff,
                        m.delta.expect("validated"),
                        m.sampling_step,
                        m.lambda.expect("validated"),
                        kind,
                    )
                    .map_err(numeric)?,
                ))
            }
            other => Err(CliError::Config(vec![format!("unknown family '{other}'")])),
        }
    }

    pub fn init_spec(&self, model: &ResolvedModel) -> Result<InitSpec, CliError> {
        let numeric = |e: mixfilter::Error| CliError::Config(vec![e.to_string()]);
        Ok(match self.init.kind.as_str() {
            "stationary" => InitSpec::Stationary,
            "dirac" => InitSpec::Dirac(self.init.x0.expect("validated")),
            "mixture" => {
                let weights =
                    WeightVector::new(self.init.weights.clone().expect("validated")).map_err(numeric)?;
                let dist = match model {
                    ResolvedModel::Kalman(_) => MixtureDistribution::new(
                        Family::KalmanExt,
                        Theta::Kalman(
                            KalmanTheta::new(
                                self.init.mu.unwrap_or(0.0),
                                self.init.m.expect("validated"),
                                self.init.sigma2.expect("validated"),
                            )
                            .map_err(numeric)?,
                        ),
                        weights,
                    ),
                    ResolvedModel::Radial(r) => MixtureDistribution::new(
                        Family::RadialOu { delta: r.delta },
                        Theta::Scale(
                            ScaleTheta::new(self.init.sigma.expect("validated")).map_err(numeric)?,
                        ),
                        weights,
                    ),
                    ResolvedModel::Cir(c) => MixtureDistribution::new(
                        Family::GammaCir { delta: c.delta },
                        Theta::Scale(
                            ScaleTheta::new(self.init.sigma.expect("validated")).map_err(numeric)?,
                        ),
                        weights,
                    ),
                }
                .map_err(numeric)?;
                InitSpec::Mixture(dist)
            }
            _ => unreachable!("validated"),
        })
    }
}

pub fn parse_channel(kind: &str) -> Option<ChannelKind> {
    Some(match kind {
        "squared_mult" => ChannelKind::SquaredMult,
        "inverse" => ChannelKind::Inverse,
        "sv_prime" => ChannelKind::SvPrime,
        "sv_double_prime" => ChannelKind::SvDoublePrime,
        "poisson" => ChannelKind::Poisson,
        _ => return None,
    })
}

/// A fully resolved model with uniform access to filtering and simulation.
#[derive(Debug, Clone)]
pub enum ResolvedModel {
    Kalman(KalmanModel),
    Radial(RadialOuModel),
    Cir(CirModel),
}

impl ResolvedModel {
    pub fn conjugate(&self) -> &dyn ConjugateFamily {
        match self {
            ResolvedModel::Kalman(m) => m,
            ResolvedModel::Radial(m) => m,
            ResolvedModel::Cir(m) => m,
        }
    }

    pub fn stationary(&self) -> mixfilter::Result<MixtureDistribution> {
        match self {
            ResolvedModel::Kalman(m) => m.stationary(),
            ResolvedModel::Radial(m) => m.stationary(),
            ResolvedModel::Cir(m) => m.stationary(),
        }
    }

    pub fn init_state(&self, init: &InitSpec) -> mixfilter::Result<StateDistribution> {
        simulate::init_distribution(init, || self.stationary())
    }

    pub fn simulate(&self, cfg: &SimConfig) -> mixfilter::Result<SimulatedPath> {
        match self {
            ResolvedModel::Kalman(m) => simulate::simulate_kalman(m, cfg),
            ResolvedModel::Radial(m) => simulate::simulate_radial_ou(m, cfg),
            ResolvedModel::Cir(m) => simulate::simulate_cir(m, cfg),
        }
    }

    pub fn transition_logpdf(&self, x: f64, x_next: f64) -> f64 {
        match self {
            ResolvedModel::Kalman(m) => m.transition_logpdf(x, x_next),
            ResolvedModel::Radial(m) => m.transition_logpdf(x, x_next),
            ResolvedModel::Cir(m) => m.transition_logpdf(x, x_next),
        }
    }

    pub fn obs_logpdf(&self, x: f64, y: f64) -> f64 {
        self.conjugate().obs_logpdf(x, y)
    }

    pub fn transition_sample(&self, rng: &mut rand_chacha::ChaCha8Rng, x: f64) -> f64 {
        match self {
            ResolvedModel::Kalman(m) => simulate::sample_kalman_step(m, x, rng),
            ResolvedModel::Radial(m) => simulate::sample_radial_ou_step(m, x, rng),
            ResolvedModel::Cir(m) => simulate::sample_cir_step(m, r_clamp(x), rng),
        }
    }

    /// Theta column names for trace files.
    pub fn theta_columns(&self) -> &'static [&'static str] {
        match self {
            ResolvedModel::Kalman(_) => &["mu", "m", "sigma2"],
            _ => &["sigma"],
        }
    }

    pub fn family_label(&self) -> &'static str {
        match self {
            ResolvedModel::Kalman(_) => "kalman",
            ResolvedModel::Radial(_) => "radial_ou",
            ResolvedModel::Cir(_) => "gamma_cir",
        }
    }
}

fn r_clamp(x: f64) -> f64 {
    x.max(0.0)
}

#[cfg(test)]
pub(crate) fn tests_fixture_toml() -> &'static str {
    tests::RADIAL_TOML
}
