//! Generic update/prediction machinery over a conjugate mixture class.
//!
//! A family supplies the per-component maps: the update index shift t_y and
//! parameter map T_y, the component marginal density, and the prediction
//! decomposition (tau, per-component weights). The engine lifts them to whole
//! mixtures and runs the alternating update/predict recursion, accumulating
//! the exact log-likelihood as the sum of log conditional marginals.

use crate::error::{Error, Result};
use crate::mixtures::{
    logsumexp, Family, MixtureDistribution, StateDistribution, Theta, WeightVector,
};

/// Per-component operations a conjugate family must provide.
///
/// Contract: `update_component`'s index map is one-to-one on the integers and
/// independent of theta, and both returned parameter maps depend only on
/// (theta, y) and theta respectively, never on the component index or the
/// mixture weights. `predict_component` returns finitely many weights whose
/// maximum index is non-decreasing in i.
pub trait ConjugateFamily {
    /// Tag identifying which mixtures this model filters.
    fn family(&self) -> Family;

    /// The update map: (t_y(i), T_y(theta)).
    fn update_component(&self, i: usize, theta: &Theta, y: f64) -> Result<(usize, Theta)>;

    /// log p_{nu^i_theta}(y), the component's marginal observation density.
    /// Observations outside the support give -inf, not an error.
    fn component_marginal_logpdf(&self, i: usize, theta: &Theta, y: f64) -> Result<f64>;

    /// The prediction decomposition of nu^i_theta P: (tau(theta), log weights
    /// over component indices 0..=L(i)). Log domain keeps deep tail
    /// components representable.
    fn predict_component(&self, i: usize, theta: &Theta) -> Result<(Theta, Vec<f64>)>;

    /// Raw observation log density f_x(y); used for point-mass states and by
    /// consumers that need the channel density directly.
    fn obs_logpdf(&self, x: f64, y: f64) -> f64;

    /// The transition law from a point: P(x, .) as a mixture (condition (C3)).
    fn predict_dirac(&self, x: f64) -> Result<MixtureDistribution>;
}

fn check_family<F: ConjugateFamily + ?Sized>(
    family: &F,
    dist: &MixtureDistribution,
) -> Result<()> {
    if family.family() != dist.family() {
        return Err(Error::FamilyMismatch {
            expected: family.family().label().to_string(),
            got: dist.family().label().to_string(),
        });
    }
    Ok(())
}

/// One Bayes step: returns the posterior mixture and the log marginal
/// log p_nu(y) of the observation under the prior mixture.
pub fn update<F: ConjugateFamily + ?Sized>(
    family: &F,
    dist: &MixtureDistribution,
    y: f64,
) -> Result<(MixtureDistribution, f64)> {
    check_family(family, dist)?;
    let theta = dist.theta();

    let mut shifted: Vec<(usize, f64)> = Vec::new();
    let mut log_terms: Vec<f64> = Vec::new();
    let mut new_theta: Option<Theta> = None;
    for (i, lw) in dist.weights().iter_log() {
        let lm = family.component_marginal_logpdf(i, theta, y)?;
        let (j, t) = family.update_component(i, theta, y)?;
        new_theta.get_or_insert(t);
        let lt = lw + lm;
        shifted.push((j, lt));
        log_terms.push(lt);
    }
    let log_marginal = logsumexp(&log_terms);
    if !log_marginal.is_finite() {
        return Err(Error::ImpossibleObservation { y });
    }

    let max_index = shifted.iter().map(|&(j, _)| j).max().expect("nonempty");
    let mut weights = vec![f64::NEG_INFINITY; max_index + 1];
    for (j, lt) in shifted {
        // t_y is one-to-one, so each target index is written once
        weights[j] = if weights[j] == f64::NEG_INFINITY {
            lt - log_marginal
        } else {
            logsumexp(&[weights[j], lt - log_marginal])
        };
    }
    let posterior = MixtureDistribution::new(
        family.family(),
        new_theta.expect("at least one component"),
        WeightVector::from_log_weights(&weights)?,
    )?;
    Ok((posterior, log_marginal))
}

/// One prediction step: pushes the mixture through the transition operator.
pub fn predict<F: ConjugateFamily + ?Sized>(
    family: &F,
    dist: &MixtureDistribution,
) -> Result<MixtureDistribution> {
    check_family(family, dist)?;
    let theta = dist.theta();

    let mut per_target: Vec<Vec<f64>> = Vec::new();
    let mut new_theta: Option<Theta> = None;
    for (i, lw) in dist.weights().iter_log() {
        let (t, comp_log_weights) = family.predict_component(i, theta)?;
        new_theta.get_or_insert(t);
        if comp_log_weights.len() > per_target.len() {
            per_target.resize_with(comp_log_weights.len(), Vec::new);
        }
        for (j, lcw) in comp_log_weights.into_iter().enumerate() {
            if lcw > f64::NEG_INFINITY {
                per_target[j].push(lw + lcw);
            }
        }
    }
    let log_weights: Vec<f64> = per_target.iter().map(|terms| logsumexp(terms)).collect();
    MixtureDistribution::new(
        family.family(),
        new_theta.expect("at least one component"),
        WeightVector::from_log_weights(&log_weights)?,
    )
}

/// One recorded filter step.
///
/// `posterior` is the exact filter nu_{n|n:0}; `predictive` is the prediction
/// filter nu_{n+1|n:0} produced from it; `log_marginal` is
/// log p(y_n | y_{n-1}, ..., y_0).
#[derive(Debug, Clone)]
pub struct FilterStep {
    pub predictive: StateDistribution,
    pub posterior: StateDistribution,
    pub log_marginal: f64,
}

#[derive(Debug, Clone)]
pub struct FilterTrace {
    pub steps: Vec<FilterStep>,
    pub total_loglik: f64,
}

impl FilterTrace {
    /// Mixture length of each posterior (point masses count as length 0).
    pub fn posterior_lengths(&self) -> Vec<usize> {
        self.steps
            .iter()
            .map(|s| match &s.posterior {
                StateDistribution::Dirac(_) => 0,
                StateDistribution::Mixture(d) => d.length(),
            })
            .collect()
    }
}

fn maybe_prune(dist: MixtureDistribution, threshold: f64) -> Result<MixtureDistribution> {
    if threshold > 0.0 {
        dist.prune(threshold)
    } else {
        Ok(dist)
    }
}

/// Run the alternating update/predict recursion over a series, starting from
/// `init` as the time-0 predictive law. Point-mass initial conditions pass
/// through the first update unchanged and enter the mixture class at the
/// first prediction.
pub fn run_filter<F: ConjugateFamily + ?Sized>(
    family: &F,
    init: &StateDistribution,
    observations: &[f64],
    prune_threshold: f64,
) -> Result<FilterTrace> {
    let mut current = init.clone();
    let mut steps = Vec::with_capacity(observations.len());
    let mut total = 0.0;

    for &y in observations {
        let (posterior, log_marginal) = match &current {
            StateDistribution::Dirac(x) => {
                let lm = family.obs_logpdf(*x, y);
                if !lm.is_finite() {
                    return Err(Error::ImpossibleObservation { y });
                }
                (StateDistribution::Dirac(*x), lm)
            }
            StateDistribution::Mixture(d) => {
                let (p, lm) = update(family, d, y)?;
                (
                    StateDistribution::Mixture(maybe_prune(p, prune_threshold)?),
                    lm,
                )
            }
        };
        total += log_marginal;

        let predictive = match &posterior {
            StateDistribution::Dirac(x) => StateDistribution::Mixture(maybe_prune(
                family.predict_dirac(*x)?,
                prune_threshold,
            )?),
            StateDistribution::Mixture(d) => {
                StateDistribution::Mixture(maybe_prune(predict(family, d)?, prune_threshold)?)
            }
        };
        current = predictive.clone();
        steps.push(FilterStep {
            predictive,
            posterior,
            log_marginal,
        });
    }

    Ok(FilterTrace {
        steps,
        total_loglik: total,
    })
}

/// The exact log-likelihood of the series: the sum of log conditional
/// marginals. An empty series is the empty product, log 1 = 0.
pub fn log_likelihood<F: ConjugateFamily + ?Sized>(
    family: &F,
    init: &StateDistribution,
    observations: &[f64],
) -> Result<f64> {
    Ok(run_filter(family, init, observations, 0.0)?.total_loglik)
}
