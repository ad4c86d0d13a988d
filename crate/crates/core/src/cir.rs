//! Gamma-mixture filters on the squared signal r_n = x_n^2, a discretely
//! sampled Cox-Ingersoll-Ross diffusion, with the observation channels that
//! keep the class conjugate: squared multiplicative noise, its inverse, the
//! two symmetrized stochastic-volatility channels, and conditionally Poisson
//! counts.
//!
//! The channel densities below follow from the stated noise constructions by
//! one change of variables each; every one is gated by a normalization check
//! and a grid-Bayes conjugacy test before being trusted.

use crate::engine::ConjugateFamily;
use crate::error::{Error, Result};
use crate::mixtures::{
    gamma_logpdf, Family, MixtureDistribution, ScaleTheta, Theta, WeightVector,
};
use crate::radial_ou::{
    binomial_log_weights, binomial_weights, derive_discrete, poisson_log_weights,
    poisson_mixture_logpdf,
};
use statrs::function::gamma::ln_gamma;

const SERIES_TOL: f64 = 1e-14;

/// Observation channel acting on the CIR state r.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    /// z = r v with v inverse-exponential (the squared multiplicative model).
    SquaredMult,
    /// z = Gamma / r, i.e. the reciprocal of the squared multiplicative model.
    Inverse,
    /// z = sqrt(r) eps / sqrt(Gamma) with eps a symmetric sign.
    SvPrime,
    /// z = eps sqrt(Gamma) / sqrt(r).
    SvDoublePrime,
    /// z | r Poisson with mean lambda r.
    Poisson,
}

impl ChannelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ChannelKind::SquaredMult => "squared_mult",
            ChannelKind::Inverse => "inverse",
            ChannelKind::SvPrime => "sv_prime",
            ChannelKind::SvDoublePrime => "sv_double_prime",
            ChannelKind::Poisson => "poisson",
        }
    }

    /// All channel kinds, in a stable order.
    pub const ALL: [ChannelKind; 5] = [
        ChannelKind::SquaredMult,
        ChannelKind::Inverse,
        ChannelKind::SvPrime,
        ChannelKind::SvDoublePrime,
        ChannelKind::Poisson,
    ];
}

fn valid_count(z: f64) -> Option<f64> {
    if z >= 0.0 && z.fract() == 0.0 && z.is_finite() {
        Some(z)
    } else {
        None
    }
}

/// Log observation density (or pmf) of the channel given the state r > 0.
pub fn channel_obs_logpdf(kind: ChannelKind, r: f64, z: f64, lambda: f64) -> f64 {
    debug_assert!(r > 0.0 && lambda > 0.0);
    let lr = lambda * r;
    match kind {
        ChannelKind::SquaredMult => {
            if z <= 0.0 {
                f64::NEG_INFINITY
            } else {
                lr.ln() - 2.0 * z.ln() - lr / z
            }
        }
        ChannelKind::Inverse => {
            if z <= 0.0 {
                f64::NEG_INFINITY
            } else {
                lr.ln() - lr * z
            }
        }
        ChannelKind::SvPrime => {
            if z == 0.0 || !z.is_finite() {
                f64::NEG_INFINITY
            } else {
                lr.ln() - 3.0 * z.abs().ln() - lr / (z * z)
            }
        }
        ChannelKind::SvDoublePrime => {
            if z == 0.0 || !z.is_finite() {
                f64::NEG_INFINITY
            } else {
                lr.ln() + z.abs().ln() - lr * z * z
            }
        }
        ChannelKind::Poisson => match valid_count(z) {
            Some(k) => -lr + k * lr.ln() - ln_gamma(k + 1.0),
            None => f64::NEG_INFINITY,
        },
    }
}

/// The conjugate update of a Gamma(i + delta/2, 1/(2 sigma^2)) prior:
/// the index shift t_z(i) and the updated scale T_z(sigma).
pub fn update_channel(
    kind: ChannelKind,
    i: usize,
    sigma: f64,
    z: f64,
    lambda: f64,
) -> Result<(usize, f64)> {
    debug_assert!(sigma > 0.0 && lambda > 0.0);
    let base = 1.0 / (2.0 * sigma * sigma);
    let (shift, rate_add) = match kind {
        ChannelKind::SquaredMult => {
            if z <= 0.0 {
                return Err(Error::ImpossibleObservation { y: z });
            }
            (1, lambda / z)
        }
        ChannelKind::Inverse => {
            if z <= 0.0 {
                return Err(Error::ImpossibleObservation { y: z });
            }
            (1, lambda * z)
        }
        ChannelKind::SvPrime => {
            if z == 0.0 || !z.is_finite() {
                return Err(Error::ImpossibleObservation { y: z });
            }
            (1, lambda / (z * z))
        }
        ChannelKind::SvDoublePrime => {
            if !z.is_finite() {
                return Err(Error::ImpossibleObservation { y: z });
            }
            (1, lambda * z * z)
        }
        ChannelKind::Poisson => match valid_count(z) {
            Some(k) => (k as usize, lambda),
            None => return Err(Error::ImpossibleObservation { y: z }),
        },
    };
    let new_rate = base + rate_add;
    Ok((i + shift, (2.0 * new_rate).recip().sqrt()))
}

/// log p_{nu^i_sigma}(z): the channel density integrated against the
/// Gamma(i + delta/2, 1/(2 sigma^2)) component.
///
/// Each continuous channel has the form c(z) r exp(-q(z) r), so the integral
/// is c(z) s rho^s / (rho + q)^{s+1}; the Poisson channel integrates to the
/// usual negative-binomial-type pmf.
pub fn marginal_channel_logpdf(
    kind: ChannelKind,
    i: usize,
    sigma: f64,
    z: f64,
    lambda: f64,
    delta: f64,
) -> f64 {
    let s = i as f64 + 0.5 * delta;
    let rho = 1.0 / (2.0 * sigma * sigma);
    let continuous = |ln_c: f64, q: f64| ln_c + s * rho.ln() + s.ln() - (s + 1.0) * (rho + q).ln();
    match kind {
        ChannelKind::SquaredMult => {
            if z <= 0.0 {
                f64::NEG_INFINITY
            } else {
                continuous(lambda.ln() - 2.0 * z.ln(), lambda / z)
            }
        }
        ChannelKind::Inverse => {
            if z <= 0.0 {
                f64::NEG_INFINITY
            } else {
                continuous(lambda.ln(), lambda * z)
            }
        }
        ChannelKind::SvPrime => {
            if z == 0.0 || !z.is_finite() {
                f64::NEG_INFINITY
            } else {
                continuous(lambda.ln() - 3.0 * z.abs().ln(), lambda / (z * z))
            }
        }
        ChannelKind::SvDoublePrime => {
            if z == 0.0 || !z.is_finite() {
                f64::NEG_INFINITY
            } else {
                continuous(lambda.ln() + z.abs().ln(), lambda * z * z)
            }
        }
        ChannelKind::Poisson => match valid_count(z) {
            Some(k) => {
                k * lambda.ln() + s * rho.ln() + ln_gamma(s + k)
                    - ln_gamma(k + 1.0)
                    - ln_gamma(s)
                    - (s + k) * (rho + lambda).ln()
            }
            None => f64::NEG_INFINITY,
        },
    }
}

/// Map a radial OU mixture to the law of its square: component i goes to
/// Gamma(i + delta/2, 1/(2 sigma^2)) with identical weights.
pub fn pushforward_square(dist: &MixtureDistribution) -> Result<MixtureDistribution> {
    match dist.family() {
        Family::RadialOu { delta } => MixtureDistribution::new(
            Family::GammaCir { delta },
            *dist.theta(),
            dist.weights().clone(),
        ),
        other => Err(Error::FamilyMismatch {
            expected: "radial_ou".into(),
            got: other.label().into(),
        }),
    }
}

/// Inverse of [`pushforward_square`]: the law of the square root.
pub fn pullback_sqrt(dist: &MixtureDistribution) -> Result<MixtureDistribution> {
    match dist.family() {
        Family::GammaCir { delta } => MixtureDistribution::new(
            Family::RadialOu { delta },
            *dist.theta(),
            dist.weights().clone(),
        ),
        other => Err(Error::FamilyMismatch {
            expected: "gamma_cir".into(),
            got: other.label().into(),
        }),
    }
}

/// A discretely sampled CIR signal with one of the conjugate channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirModel {
    pub theta_drift: f64,
    pub sigma_diff: f64,
    pub delta: f64,
    pub step: f64,
    pub lambda: f64,
    pub channel: ChannelKind,
    a: f64,
    beta2: f64,
}

impl CirModel {
    pub fn new(
        theta_drift: f64,
        sigma_diff: f64,
        delta: f64,
        step: f64,
        lambda: f64,
        channel: ChannelKind,
    ) -> Result<Self> {
        if !(sigma_diff > 0.0) || !(step > 0.0) || !(lambda > 0.0) || !(delta >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "CirModel needs sigma_diff > 0, step > 0, lambda > 0, delta >= 1; got \
                 (theta_drift={theta_drift}, sigma_diff={sigma_diff}, delta={delta}, step={step}, lambda={lambda})"
            )));
        }
        let (a, beta2) = derive_discrete(theta_drift, sigma_diff, step);
        Ok(Self {
            theta_drift,
            sigma_diff,
            delta,
            step,
            lambda,
            channel,
            a,
            beta2,
        })
    }

    pub fn ar_coefficient(&self) -> f64 {
        self.a
    }

    pub fn innovation_variance(&self) -> f64 {
        self.beta2
    }

    pub fn rho2(&self) -> Result<f64> {
        if self.theta_drift >= 0.0 {
            return Err(Error::Unsupported(format!(
                "no stationary law for theta_drift = {} >= 0",
                self.theta_drift
            )));
        }
        Ok(self.sigma_diff * self.sigma_diff / (2.0 * self.theta_drift.abs()))
    }

    /// Stationary law Gamma(delta/2, 1/(2 rho^2)).
    pub fn stationary(&self) -> Result<MixtureDistribution> {
        let rho = self.rho2()?.sqrt();
        MixtureDistribution::component(
            Family::GammaCir { delta: self.delta },
            Theta::Scale(ScaleTheta::new(rho)?),
            0,
        )
    }

    /// Transition log density q(r, r'): a Poisson(a^2 r / (2 beta^2)) mixture
    /// of Gamma(k + delta/2, 1/(2 beta^2)) laws.
    pub fn transition_logpdf(&self, r: f64, r_next: f64) -> f64 {
        debug_assert!(r >= 0.0);
        if r_next <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mean = self.a * self.a * r / (2.0 * self.beta2);
        let rate = 1.0 / (2.0 * self.beta2);
        poisson_mixture_logpdf(mean, SERIES_TOL, |k| {
            gamma_logpdf(k as f64 + 0.5 * self.delta, rate, r_next)
        })
    }

    /// Prediction decomposition: same tau and binomial weights as the radial
    /// family, applied to the Gamma shapes.
    pub fn predict_component_params(&self, i: usize, sigma: f64) -> (f64, Vec<f64>) {
        let tau2 = self.beta2 + self.a * self.a * sigma * sigma;
        let p = self.a * self.a * sigma * sigma / tau2;
        (tau2.sqrt(), binomial_weights(i, p))
    }
}

impl ConjugateFamily for CirModel {
    fn family(&self) -> Family {
        Family::GammaCir { delta: self.delta }
    }

    fn update_component(&self, i: usize, theta: &Theta, y: f64) -> Result<(usize, Theta)> {
        let t = theta.as_scale()?;
        let (j, scaled) = update_channel(self.channel, i, t.sigma, y, self.lambda)?;
        Ok((j, Theta::Scale(ScaleTheta::new(scaled)?)))
    }

    fn component_marginal_logpdf(&self, i: usize, theta: &Theta, y: f64) -> Result<f64> {
        Ok(marginal_channel_logpdf(
            self.channel,
            i,
            theta.as_scale()?.sigma,
            y,
            self.lambda,
            self.delta,
        ))
    }

    fn predict_component(&self, i: usize, theta: &Theta) -> Result<(Theta, Vec<f64>)> {
        let sigma = theta.as_scale()?.sigma;
        let tau2 = self.beta2 + self.a * self.a * sigma * sigma;
        let p = self.a * self.a * sigma * sigma / tau2;
        Ok((
            Theta::Scale(ScaleTheta::new(tau2.sqrt())?),
            binomial_log_weights(i, p),
        ))
    }

    fn obs_logpdf(&self, x: f64, y: f64) -> f64 {
        channel_obs_logpdf(self.channel, x, y, self.lambda)
    }

    fn predict_dirac(&self, x: f64) -> Result<MixtureDistribution> {
        let mean = self.a * self.a * x / (2.0 * self.beta2);
        let lw = poisson_log_weights(mean, SERIES_TOL);
        MixtureDistribution::new(
            self.family(),
            Theta::Scale(ScaleTheta::new(self.beta2.sqrt())?),
            WeightVector::from_log_weights(&lw)?,
        )
    }
}
