//! Grid-quadrature Bayes filter: ground truth by direct numerical
//! integration of the filtering recursion.
//!
//! Works purely from pointwise densities (initial, transition, observation);
//! it never touches the conjugate update/predict formulas, which keeps it an
//! independent check of the exact filter.

use crate::error::{Error, Result};
use rayon::prelude::*;

const LEAK_TOL: f64 = 1e-8;

/// A uniform window [lo, hi] with n_points nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, n_points: usize) -> Result<Self> {
        if !(lo < hi) || n_points < 64 {
            return Err(Error::InvalidParameter(format!(
                "grid needs lo < hi and n_points >= 64, got ({lo}, {hi}, {n_points})"
            )));
        }
        Ok(Self { lo, hi, n_points })
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_points).map(|j| self.lo + j as f64 * h).collect()
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n_points - 1) as f64
    }

    /// Trapezoid quadrature weights over the window.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.n_points];
        w[0] = 0.5 * h;
        w[self.n_points - 1] = 0.5 * h;
        w
    }
}

/// Pointwise log densities defining the model for the grid filter.
pub struct GridDensities<'a> {
    pub init_logpdf: &'a (dyn Fn(f64) -> f64 + Sync),
    pub trans_logpdf: &'a (dyn Fn(f64, f64) -> f64 + Sync),
    pub obs_logpdf: &'a (dyn Fn(f64, f64) -> f64 + Sync),
}

/// Discretized posterior for one step.
#[derive(Debug, Clone)]
pub struct GridStep {
    /// Posterior density values at the grid nodes.
    pub posterior: Vec<f64>,
    pub log_marginal: f64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone)]
pub struct GridFilterOutput {
    pub nodes: Vec<f64>,
    pub steps: Vec<GridStep>,
    pub total_loglik: f64,
}

fn check_mass(mass: f64) -> Result<()> {
    let leak = (mass - 1.0).abs();
    if !(leak <= LEAK_TOL) {
        return Err(Error::GridWindowLeak { leak });
    }
    Ok(())
}

fn moments(nodes: &[f64], qw: &[f64], density: &[f64]) -> (f64, f64) {
    let mean: f64 = nodes
        .iter()
        .zip(qw)
        .zip(density)
        .map(|((x, w), d)| x * w * d)
        .sum();
    let m2: f64 = nodes
        .iter()
        .zip(qw)
        .zip(density)
        .map(|((x, w), d)| x * x * w * d)
        .sum();
    (mean, m2 - mean * mean)
}

/// Run the discretized filtering recursion: pointwise multiply + renormalize
/// for updates, a quadrature-weighted kernel product for predictions. The
/// log-likelihood accumulates the per-step normalizers.
///
/// The chain is time-homogeneous, so the kernel matrix is evaluated once up
/// front and reused by every prediction step.
pub fn grid_filter(
    densities: &GridDensities<'_>,
    grid: &GridSpec,
    observations: &[f64],
) -> Result<GridFilterOutput> {
    let nodes = grid.nodes();
    let qw = grid.quadrature_weights();

    // transposed kernel: row `to` holds p(x_from, x_to) over all sources, so
    // the prediction product reads contiguously
    let kernel_t: Vec<Vec<f64>> = nodes
        .par_iter()
        .map(|&xp| {
            nodes
                .iter()
                .map(|&x| (densities.trans_logpdf)(x, xp).exp())
                .collect()
        })
        .collect();

    // discretize the initial law and check the window captures it
    let mut predictive: Vec<f64> = nodes.iter().map(|&x| (densities.init_logpdf)(x).exp()).collect();
    let mass: f64 = predictive.iter().zip(&qw).map(|(d, w)| d * w).sum();
    check_mass(mass)?;
    predictive.iter_mut().for_each(|d| *d /= mass);

    let mut steps = Vec::with_capacity(observations.len());
    let mut total = 0.0;
    for &y in observations {
        // update: multiply by the likelihood, renormalize
        let likelihood: Vec<f64> = nodes.iter().map(|&x| (densities.obs_logpdf)(x, y).exp()).collect();
        let normalizer: f64 = predictive
            .iter()
            .zip(&likelihood)
            .zip(&qw)
            .map(|((d, l), w)| d * l * w)
            .sum();
        if normalizer <= 0.0 {
            return Err(Error::ImpossibleObservation { y });
        }
        let posterior: Vec<f64> = predictive
            .iter()
            .zip(&likelihood)
            .map(|(d, l)| d * l / normalizer)
            .collect();
        total += normalizer.ln();
        let (mean, variance) = moments(&nodes, &qw, &posterior);

        // predict: integrate the transition kernel against the posterior
        let weighted: Vec<f64> = posterior.iter().zip(&qw).map(|(d, w)| d * w).collect();
        let mut next: Vec<f64> = kernel_t
            .par_iter()
            .map(|row| row.iter().zip(&weighted).map(|(k, wd)| k * wd).sum::<f64>())
            .collect();
        let mass: f64 = next.iter().zip(&qw).map(|(d, w)| d * w).sum();
        check_mass(mass)?;
        next.iter_mut().for_each(|d| *d /= mass);

        steps.push(GridStep {
            posterior,
            log_marginal: normalizer.ln(),
            mean,
            variance,
        });
        predictive = next;
    }

    Ok(GridFilterOutput {
        nodes,
        steps,
        total_loglik: total,
    })
}
