//! Finite nonnegative mixture weights with log-domain normalization.

use crate::error::{Error, Result};

/// log(sum(exp(x))) with the usual max shift; empty input gives -inf.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        // all -inf (or empty): the sum is zero
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// A finite mixture parameter: probabilities indexed from 0.
///
/// Entries are nonnegative and sum to one. Storage is in the log domain: the
/// tail weights of a long filter run decay below the smallest positive f64,
/// and the mixture length l(alpha) (largest index with positive weight) must
/// survive that. Trailing zero weights are trimmed so l(alpha) equals
/// `len() - 1`; interior zeros are kept, representing the index shifts of the
/// update operator with explicit zeros rather than an offset field.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    log_weights: Vec<f64>,
}

impl WeightVector {
    fn from_shifted(mut log_weights: Vec<f64>) -> Result<Self> {
        let norm = logsumexp(&log_weights);
        if !norm.is_finite() {
            return Err(Error::DegenerateWeights);
        }
        log_weights.iter_mut().for_each(|lw| *lw -= norm);
        let last = log_weights
            .iter()
            .rposition(|&lw| lw > f64::NEG_INFINITY)
            .expect("finite normalizer implies a positive entry");
        log_weights.truncate(last + 1);
        Ok(Self { log_weights })
    }

    /// Build from raw nonnegative weights; renormalizes to sum exactly to 1.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("empty weight vector".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w >= 0.0) || w.is_infinite() {
                return Err(Error::InvalidParameter(format!(
                    "weight[{i}] = {w} is negative or non-finite"
                )));
            }
        }
        Self::from_shifted(weights.into_iter().map(f64::ln).collect())
    }

    /// Normalize log-domain weights via a log-sum-exp shift.
    ///
    /// Errors with `DegenerateWeights` when every input is -inf.
    pub fn from_log_weights(log_weights: &[f64]) -> Result<Self> {
        if log_weights.is_empty() {
            return Err(Error::InvalidParameter("empty weight vector".into()));
        }
        for (i, &lw) in log_weights.iter().enumerate() {
            if lw.is_nan() || lw == f64::INFINITY {
                return Err(Error::InvalidParameter(format!(
                    "log-weight[{i}] = {lw} is not a valid log probability"
                )));
            }
        }
        Self::from_shifted(log_weights.to_vec())
    }

    /// The point mass alpha^(i): weight 1 at `index`.
    pub fn single(index: usize) -> Self {
        let mut v = vec![f64::NEG_INFINITY; index + 1];
        v[index] = 0.0;
        Self { log_weights: v }
    }

    /// Storage length (l(alpha) + 1).
    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    /// Mixture length l(alpha): the largest index with positive weight.
    pub fn length(&self) -> usize {
        self.log_weights.len() - 1
    }

    /// Weight at `index` in the linear domain (zero beyond the stored range).
    pub fn get(&self, index: usize) -> f64 {
        self.log_get(index).exp()
    }

    /// Log weight at `index` (-inf beyond the stored range).
    pub fn log_get(&self, index: usize) -> f64 {
        self.log_weights
            .get(index)
            .copied()
            .unwrap_or(f64::NEG_INFINITY)
    }

    /// The weights in the linear domain; entries below the smallest positive
    /// f64 flush to zero here but keep their index in [`Self::length`].
    pub fn to_linear(&self) -> Vec<f64> {
        self.log_weights.iter().map(|lw| lw.exp()).collect()
    }

    /// Iterate over (index, linear weight) pairs with positive weight.
    pub fn iter_positive(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.iter_log().map(|(i, lw)| (i, lw.exp()))
    }

    /// Iterate over (index, log weight) pairs with positive weight.
    pub fn iter_log(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.log_weights
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, lw)| lw > f64::NEG_INFINITY)
    }

    pub fn sum(&self) -> f64 {
        self.log_weights.iter().map(|lw| lw.exp()).sum()
    }

    /// Drop entries below `threshold` and renormalize. `threshold = 0` is the
    /// exact filter (nothing dropped).
    pub fn prune(&self, threshold: f64) -> Result<Self> {
        if threshold <= 0.0 {
            return Ok(self.clone());
        }
        let cut = threshold.ln();
        Self::from_shifted(
            self.log_weights
                .iter()
                .map(|&lw| if lw < cut { f64::NEG_INFINITY } else { lw })
                .collect(),
        )
    }
}
