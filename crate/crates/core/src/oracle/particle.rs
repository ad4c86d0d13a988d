//! Bootstrap particle filter with systematic resampling, used purely as a
//! Monte Carlo ground truth.
//!
//! The proposal is the prior transition sampler; weights only ever see the
//! raw observation density. Replicates run on independent ChaCha streams and
//! the summary reports replicate means with standard errors.

use crate::error::{Error, Result};
use crate::mixtures::logsumexp;
use crate::simulate::rng_for;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Raw samplers and densities the bootstrap filter needs.
pub struct ParticleSamplers<'a> {
    pub init_sample: &'a (dyn Fn(&mut ChaCha8Rng) -> f64 + Sync),
    pub trans_sample: &'a (dyn Fn(&mut ChaCha8Rng, f64) -> f64 + Sync),
    pub obs_logpdf: &'a (dyn Fn(f64, f64) -> f64 + Sync),
}

#[derive(Debug, Clone, Copy)]
pub struct ParticleConfig {
    pub n_particles: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Resample when ESS drops below this fraction of n_particles.
    pub ess_threshold: f64,
}

impl ParticleConfig {
    pub fn new(n_particles: usize, replicates: usize, seed: u64) -> Result<Self> {
        if n_particles < 100 || replicates < 2 {
            return Err(Error::InvalidParameter(format!(
                "particle filter needs n_particles >= 100 and replicates >= 2, got ({n_particles}, {replicates})"
            )));
        }
        Ok(Self {
            n_particles,
            replicates,
            seed,
            ess_threshold: 0.5,
        })
    }
}

/// Per-replicate filtering summary.
#[derive(Debug, Clone)]
pub struct ReplicateRun {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub loglik: f64,
}

/// Replicate-aggregated estimates with Monte Carlo standard errors.
#[derive(Debug, Clone)]
pub struct ParticleSummary {
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    pub variance: Vec<f64>,
    pub variance_se: Vec<f64>,
    pub loglik: f64,
    pub loglik_se: f64,
    pub replicates: Vec<ReplicateRun>,
}

/// ESS = 1 / sum w_i^2 for normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Systematic resampling: one uniform u positions n evenly spaced pointers
/// over the cumulative weights.
pub fn systematic_resample(weights: &[f64], u: f64) -> Vec<usize> {
    let n = weights.len();
    let mut indices = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut j = 0usize;
    for i in 0..n {
        let pointer = (i as f64 + u) / n as f64;
        while pointer > cumulative && j + 1 < n {
            j += 1;
            cumulative += weights[j];
        }
        indices.push(j);
    }
    indices
}

fn run_replicate(
    s: &ParticleSamplers<'_>,
    n: usize,
    ess_threshold: f64,
    observations: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<ReplicateRun> {
    let mut particles: Vec<f64> = (0..n).map(|_| (s.init_sample)(rng)).collect();
    let mut log_weights = vec![0.0f64; n];
    let mut means = Vec::with_capacity(observations.len());
    let mut variances = Vec::with_capacity(observations.len());
    let mut loglik = 0.0;

    for (step, &y) in observations.iter().enumerate() {
        let prev_norm = logsumexp(&log_weights);
        for (lw, &x) in log_weights.iter_mut().zip(&particles) {
            *lw += (s.obs_logpdf)(x, y);
        }
        let post_norm = logsumexp(&log_weights);
        if !post_norm.is_finite() {
            return Err(Error::ParticleDegeneracy { step });
        }
        loglik += post_norm - prev_norm;

        let weights: Vec<f64> = log_weights.iter().map(|lw| (lw - post_norm).exp()).collect();
        let mean: f64 = weights.iter().zip(&particles).map(|(w, x)| w * x).sum();
        let m2: f64 = weights.iter().zip(&particles).map(|(w, x)| w * x * x).sum();
        means.push(mean);
        variances.push(m2 - mean * mean);

        if effective_sample_size(&weights) < ess_threshold * n as f64 {
            let u: f64 = rng.gen();
            let picks = systematic_resample(&weights, u);
            particles = picks.iter().map(|&j| particles[j]).collect();
            log_weights.fill(0.0);
        }

        for x in particles.iter_mut() {
            *x = (s.trans_sample)(rng, *x);
        }
    }

    Ok(ReplicateRun {
        means,
        variances,
        loglik,
    })
}

fn aggregate(per_step: Vec<Vec<f64>>) -> (Vec<f64>, Vec<f64>) {
    let r = per_step.len() as f64;
    let n_steps = per_step[0].len();
    let mut mean = vec![0.0; n_steps];
    let mut se = vec![0.0; n_steps];
    for t in 0..n_steps {
        let m: f64 = per_step.iter().map(|rep| rep[t]).sum::<f64>() / r;
        let var: f64 = per_step.iter().map(|rep| (rep[t] - m).powi(2)).sum::<f64>() / (r - 1.0);
        mean[t] = m;
        se[t] = (var / r).sqrt();
    }
    (mean, se)
}

/// Run `replicates` independent bootstrap filters and aggregate.
pub fn particle_filter(
    s: &ParticleSamplers<'_>,
    cfg: &ParticleConfig,
    observations: &[f64],
) -> Result<ParticleSummary> {
    if observations.is_empty() {
        return Err(Error::InvalidParameter(
            "particle filter needs a nonempty series".into(),
        ));
    }
    let runs: Vec<Result<ReplicateRun>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng_for(cfg.seed, 1 + rep as u64);
            run_replicate(s, cfg.n_particles, cfg.ess_threshold, observations, &mut rng)
        })
        .collect();
    let replicates: Vec<ReplicateRun> = runs.into_iter().collect::<Result<_>>()?;

    let (mean, mean_se) = aggregate(replicates.iter().map(|r| r.means.clone()).collect());
    let (variance, variance_se) =
        aggregate(replicates.iter().map(|r| r.variances.clone()).collect());
    let r = replicates.len() as f64;
    let ll_mean: f64 = replicates.iter().map(|x| x.loglik).sum::<f64>() / r;
    let ll_var: f64 = replicates
        .iter()
        .map(|x| (x.loglik - ll_mean).powi(2))
        .sum::<f64>()
        / (r - 1.0);

    Ok(ParticleSummary {
        mean,
        mean_se,
        variance,
        variance_se,
        loglik: ll_mean,
        loglik_se: (ll_var / r).sqrt(),
        replicates,
    })
}
