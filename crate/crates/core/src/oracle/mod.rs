//! Independent ground-truth machinery: adaptive quadrature, a grid-quadrature
//! Bayes filter and a bootstrap particle filter, plus comparison reports.
//!
//! Nothing in this module calls the conjugate update/predict formulas; the
//! oracles consume only raw densities and samplers so agreement with the
//! exact filter is a genuine cross-check.

pub mod grid;
pub mod particle;
pub mod quad;

use crate::mixtures::MixtureDistribution;
use grid::GridFilterOutput;
use particle::ParticleSummary;

/// Deviations between an exact posterior sequence and a grid-filter run.
#[derive(Debug, Clone, Copy, Default)]
pub struct GridComparison {
    pub max_mean_diff: f64,
    pub max_var_diff: f64,
    pub sup_density_diff: f64,
    pub loglik_diff: f64,
}

/// Compare exact posteriors (one mixture per step) against the grid filter.
pub fn compare_grid(
    exact_posteriors: &[MixtureDistribution],
    exact_loglik: f64,
    grid_out: &GridFilterOutput,
) -> GridComparison {
    assert_eq!(exact_posteriors.len(), grid_out.steps.len());
    let mut report = GridComparison {
        loglik_diff: (exact_loglik - grid_out.total_loglik).abs(),
        ..Default::default()
    };
    for (dist, step) in exact_posteriors.iter().zip(&grid_out.steps) {
        report.max_mean_diff = report.max_mean_diff.max((dist.mean() - step.mean).abs());
        report.max_var_diff = report
            .max_var_diff
            .max((dist.variance() - step.variance).abs());
        for (&x, &d) in grid_out.nodes.iter().zip(&step.posterior) {
            report.sup_density_diff = report.sup_density_diff.max((dist.pdf(x) - d).abs());
        }
    }
    report
}

/// z-scores of exact moments and log-likelihood against particle estimates.
#[derive(Debug, Clone, Default)]
pub struct ParticleComparison {
    pub mean_z: Vec<f64>,
    pub var_z: Vec<f64>,
    pub loglik_z: f64,
    pub max_abs_z: f64,
}

fn zscore(exact: f64, estimate: f64, se: f64) -> f64 {
    let diff = estimate - exact;
    if diff == 0.0 {
        0.0
    } else {
        diff / se
    }
}

/// Compare exact per-step moments and log-likelihood against a particle run.
pub fn compare_particle(
    exact_means: &[f64],
    exact_vars: &[f64],
    exact_loglik: f64,
    summary: &ParticleSummary,
) -> ParticleComparison {
    assert_eq!(exact_means.len(), summary.mean.len());
    let mut report = ParticleComparison {
        loglik_z: zscore(exact_loglik, summary.loglik, summary.loglik_se),
        ..Default::default()
    };
    for t in 0..exact_means.len() {
        report
            .mean_z
            .push(zscore(exact_means[t], summary.mean[t], summary.mean_se[t]));
        report.var_z.push(zscore(
            exact_vars[t],
            summary.variance[t],
            summary.variance_se[t],
        ));
    }
    report.max_abs_z = report
        .mean_z
        .iter()
        .chain(&report.var_z)
        .chain(std::iter::once(&report.loglik_z))
        .fold(0.0f64, |m, z| m.max(z.abs()));
    report
}
