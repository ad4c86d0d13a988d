//! Mixture-distribution representations shared by every filter family.
//!
//! A distribution in the conjugate class is a family tag, one structural
//! parameter theta shared by every component, and a mixture parameter alpha.
//! Component densities are evaluated here for all three families so that the
//! engine, the oracles and the CLI agree on a single definition.

pub mod moments;
pub mod weights;

pub use weights::{logsumexp, WeightVector};

use crate::error::{Error, Result};
use moments::{log_abs_moment, log_c2i_shifted, shifted_gaussian_raw_moment};
use statrs::function::gamma::ln_gamma;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Conjugate family tag. The scale families carry their dimension parameter
/// delta >= 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// Gaussians tilted by even powers (x + mu)^{2i}; support R.
    KalmanExt,
    /// Scaled sqrt-Gamma laws nu^{i,(delta)}_sigma; support (0, inf).
    RadialOu { delta: f64 },
    /// Gamma laws with shape i + delta/2; support (0, inf).
    GammaCir { delta: f64 },
}

impl Family {
    pub fn delta(&self) -> Option<f64> {
        match self {
            Family::KalmanExt => None,
            Family::RadialOu { delta } | Family::GammaCir { delta } => Some(*delta),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Family::KalmanExt => "kalman_ext",
            Family::RadialOu { .. } => "radial_ou",
            Family::GammaCir { .. } => "gamma_cir",
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(d) = self.delta() {
            if !(d >= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "family {} requires delta >= 1, got {d}",
                    self.label()
                )));
            }
        }
        Ok(())
    }
}

/// Structural parameter of the extended Kalman components.
///
/// The i = 0 component is the plain Gaussian N(m, sigma2); mu only enters for
/// i >= 1, so constructors of pure Gaussians force mu = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanTheta {
    pub mu: f64,
    pub m: f64,
    pub sigma2: f64,
}

impl KalmanTheta {
    pub fn new(mu: f64, m: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !mu.is_finite() || !m.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "KalmanTheta needs finite (mu, m) and sigma2 > 0, got ({mu}, {m}, {sigma2})"
            )));
        }
        Ok(Self { mu, m, sigma2 })
    }

    /// Pure Gaussian N(m, sigma2), i.e. the i = 0 component with mu = 0.
    pub fn gaussian(m: f64, sigma2: f64) -> Result<Self> {
        Self::new(0.0, m, sigma2)
    }
}

/// Structural parameter of the positive-support families: a scale sigma > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleTheta {
    pub sigma: f64,
}

impl ScaleTheta {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ScaleTheta needs sigma > 0, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }
}

/// The structural parameter carried by a mixture, one variant per family kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Theta {
    Kalman(KalmanTheta),
    Scale(ScaleTheta),
}

impl Theta {
    pub fn as_kalman(&self) -> Result<&KalmanTheta> {
        match self {
            Theta::Kalman(t) => Ok(t),
            Theta::Scale(_) => Err(Error::InvalidParameter(
                "expected a Kalman-type theta, got a scale theta".into(),
            )),
        }
    }

    pub fn as_scale(&self) -> Result<&ScaleTheta> {
        match self {
            Theta::Scale(t) => Ok(t),
            Theta::Kalman(_) => Err(Error::InvalidParameter(
                "expected a scale theta, got a Kalman-type theta".into(),
            )),
        }
    }
}

/// An element nu_{theta,alpha} of the conjugate class: all components share
/// the single structural parameter and differ only in the index i.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDistribution {
    family: Family,
    theta: Theta,
    alpha: WeightVector,
}

impl MixtureDistribution {
    pub fn new(family: Family, theta: Theta, alpha: WeightVector) -> Result<Self> {
        family.validate()?;
        match (family, &theta) {
            (Family::KalmanExt, Theta::Kalman(_)) => {}
            (Family::RadialOu { .. } | Family::GammaCir { .. }, Theta::Scale(_)) => {}
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "theta variant does not match family {}",
                    family.label()
                )))
            }
        }
        Ok(Self {
            family,
            theta,
            alpha,
        })
    }

    /// Single-component distribution nu^i_theta.
    pub fn component(family: Family, theta: Theta, index: usize) -> Result<Self> {
        Self::new(family, theta, WeightVector::single(index))
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    pub fn weights(&self) -> &WeightVector {
        &self.alpha
    }

    /// Mixture length l(alpha).
    pub fn length(&self) -> usize {
        self.alpha.length()
    }

    /// Log density at x; -inf outside the family's support.
    pub fn logpdf(&self, x: f64) -> f64 {
        let terms: Vec<f64> = self
            .alpha
            .iter_log()
            .map(|(i, lw)| lw + component_logpdf(self.family, i, &self.theta, x))
            .collect();
        logsumexp(&terms)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.logpdf(x).exp()
    }

    /// Exact mean (order 1) or second moment (order 2), as the alpha-weighted
    /// sum of component moments.
    pub fn moment(&self, order: u32) -> Result<f64> {
        if order != 1 && order != 2 {
            return Err(Error::Unsupported(format!(
                "mixture moments implemented for orders 1 and 2, got {order}"
            )));
        }
        let mut total = 0.0;
        for (i, w) in self.alpha.iter_positive() {
            total += w * component_moment(self.family, i, &self.theta, order)?;
        }
        Ok(total)
    }

    pub fn mean(&self) -> f64 {
        self.moment(1).expect("order 1 supported")
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.moment(2).expect("order 2 supported") - m * m
    }

    /// Drop weights below `threshold` and renormalize.
    pub fn prune(&self, threshold: f64) -> Result<Self> {
        Ok(Self {
            family: self.family,
            theta: self.theta,
            alpha: self.alpha.prune(threshold)?,
        })
    }
}

/// A filter state: either a point mass (consumed by the first prediction
/// step) or a member of the conjugate mixture class.
#[derive(Debug, Clone, PartialEq)]
pub enum StateDistribution {
    Dirac(f64),
    Mixture(MixtureDistribution),
}

impl StateDistribution {
    pub fn as_mixture(&self) -> Result<&MixtureDistribution> {
        match self {
            StateDistribution::Mixture(d) => Ok(d),
            StateDistribution::Dirac(x) => Err(Error::Unsupported(format!(
                "point mass at {x} has no mixture representation"
            ))),
        }
    }
}

fn gaussian_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln()) - (x - mean) * (x - mean) / (2.0 * var)
}

/// Log density of the Gamma(shape, rate) law at r > 0.
pub(crate) fn gamma_logpdf(shape: f64, rate: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * r.ln() - rate * r
}

/// Log density at x of the i-th component of the given family.
///
/// Points outside the support map to -inf rather than an error.
pub fn component_logpdf(family: Family, i: usize, theta: &Theta, x: f64) -> f64 {
    match (family, theta) {
        (Family::KalmanExt, Theta::Kalman(t)) => {
            let base = gaussian_logpdf(x, t.m, t.sigma2);
            if i == 0 {
                base
            } else {
                let i32i = i as u32;
                let norm = log_c2i_shifted(i32i, t.m + t.mu, t.sigma2)
                    .expect("sigma2 > 0 by construction");
                2.0 * i as f64 * (x + t.mu).abs().ln() - norm + base
            }
        }
        (Family::RadialOu { delta }, Theta::Scale(t)) => {
            if x <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let p = delta - 1.0 + 2.0 * i as f64;
            let log_cp = log_abs_moment(p).expect("p >= 0 for delta >= 1");
            std::f64::consts::LN_2 - 0.5 * LN_2PI - t.sigma.ln() + p * (x.ln() - t.sigma.ln())
                - log_cp
                - x * x / (2.0 * t.sigma * t.sigma)
        }
        (Family::GammaCir { delta }, Theta::Scale(t)) => {
            let shape = i as f64 + 0.5 * delta;
            let rate = 1.0 / (2.0 * t.sigma * t.sigma);
            gamma_logpdf(shape, rate, x)
        }
        _ => panic!("family/theta mismatch is rejected at construction"),
    }
}

fn component_moment(family: Family, i: usize, theta: &Theta, order: u32) -> Result<f64> {
    match (family, theta) {
        (Family::KalmanExt, Theta::Kalman(t)) => {
            if i == 0 {
                return Ok(match order {
                    1 => t.m,
                    _ => t.m * t.m + t.sigma2,
                });
            }
            // moments of (x + mu)^{2i} N(m, sigma2) / C_{2i}(m + mu; sigma2):
            // expand around z = x + mu whose law is the tilted N(m + mu, sigma2).
            let c = t.m + t.mu;
            let p = 2 * i as u32;
            let norm = shifted_gaussian_raw_moment(p, c, t.sigma2);
            let m1 = shifted_gaussian_raw_moment(p + 1, c, t.sigma2);
            Ok(match order {
                1 => m1 / norm - t.mu,
                _ => {
                    let m2 = shifted_gaussian_raw_moment(p + 2, c, t.sigma2);
                    (m2 - 2.0 * t.mu * m1) / norm + t.mu * t.mu
                }
            })
        }
        (Family::RadialOu { delta }, Theta::Scale(t)) => {
            let shape = i as f64 + 0.5 * delta;
            Ok(match order {
                // E sqrt(G) for G Gamma(shape, 1/(2 sigma^2))
                1 => t.sigma * std::f64::consts::SQRT_2 * (ln_gamma(shape + 0.5) - ln_gamma(shape)).exp(),
                _ => 2.0 * t.sigma * t.sigma * shape,
            })
        }
        (Family::GammaCir { delta }, Theta::Scale(t)) => {
            let shape = i as f64 + 0.5 * delta;
            let scale = 2.0 * t.sigma * t.sigma;
            Ok(match order {
                1 => shape * scale,
                _ => shape * (shape + 1.0) * scale * scale,
            })
        }
        _ => Err(Error::InvalidParameter(
            "family/theta mismatch in moment evaluation".into(),
        )),
    }
}
