//! The delta-dimensional radial Ornstein-Uhlenbeck signal observed through a
//! multiplicative inverse-sqrt-exponential channel.
//!
//! The exactly discretized signal has a Poisson-over-sqrt-Gamma transition
//! mixture; the update shifts the component index by one and rescales, the
//! prediction redistributes index i onto 0..=i with binomial weights. Closed
//! transition forms exist for odd integer delta via iterated cosh derivatives.

use crate::engine::ConjugateFamily;
use crate::error::{Error, Result};
use crate::mixtures::moments::{ln_binomial, log_abs_moment};
use crate::mixtures::{
    component_logpdf, logsumexp, Family, MixtureDistribution, ScaleTheta, Theta, WeightVector,
};
use statrs::function::gamma::ln_gamma;

const LN_2PI: f64 = 1.837_877_066_409_345_3;
const DEFAULT_SERIES_TOL: f64 = 1e-14;

/// Exact discretization constants of the (radial) OU generator over one
/// sampling interval: a = exp(theta step), beta^2 = sigma^2 (e^{2 theta step}
/// - 1) / (2 theta), with the theta = 0 limit (1, sigma^2 step).
pub fn derive_discrete(theta_drift: f64, sigma_diff: f64, step: f64) -> (f64, f64) {
    let a = (theta_drift * step).exp();
    let beta2 = if theta_drift == 0.0 {
        sigma_diff * sigma_diff * step
    } else {
        sigma_diff * sigma_diff * (2.0 * theta_drift * step).exp_m1() / (2.0 * theta_drift)
    };
    (a, beta2)
}

/// Log pmf values of Poisson(mean) for k = 0..=K, truncated once the
/// cumulative mass reaches 1 - tol. The weights are an exact pmf, so this
/// tail bound is analytic.
pub(crate) fn poisson_log_weights(mean: f64, tol: f64) -> Vec<f64> {
    debug_assert!(mean >= 0.0 && tol > 0.0);
    if mean == 0.0 {
        return vec![0.0];
    }
    let ln_mean = mean.ln();
    let target = 1.0 - tol;
    // Past 2*mean the pmf decays at least geometrically with ratio < 1/2, so
    // tail_{>k} <= pmf_k; this criterion does not depend on the accumulated
    // f64 sum actually reaching the target (rounding can leave it just shy).
    let ln_tail_cut = (0.5 * tol).ln();
    let mut out = Vec::new();
    let mut cdf = 0.0;
    let mut k = 0usize;
    loop {
        let lp = -mean + k as f64 * ln_mean - ln_gamma(k as f64 + 1.0);
        out.push(lp);
        cdf += lp.exp();
        let done = (cdf >= target && k as f64 >= mean)
            || (k as f64 >= 2.0 * mean && lp < ln_tail_cut);
        if done || k > 200_000 {
            return out;
        }
        k += 1;
    }
}

/// log of sum_k Poisson_k(mean) exp(component_log(k)), the generic
/// Poisson-mixture density evaluation.
///
/// Truncation is adaptive on two conditions: the cumulative Poisson mass must
/// reach 1 - tol (the analytic pmf tail bound), and the latest term must have
/// decayed well below tol relative to the largest one, since the component
/// factor can keep growing in k after the Poisson bulk has passed.
pub(crate) fn poisson_mixture_logpdf(
    mean: f64,
    tol: f64,
    component_log: impl Fn(usize) -> f64,
) -> f64 {
    debug_assert!(mean >= 0.0 && tol > 0.0);
    let ln_mean = mean.ln();
    let decay_cut = tol.ln() - 12.0;
    let ln_tail_cut = (0.5 * tol).ln();
    let mut terms = Vec::new();
    let mut max_term = f64::NEG_INFINITY;
    let mut cum = 0.0;
    let mut k = 0usize;
    loop {
        let lp = if mean == 0.0 {
            if k == 0 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        } else {
            -mean + k as f64 * ln_mean - ln_gamma(k as f64 + 1.0)
        };
        let lt = lp + component_log(k);
        terms.push(lt);
        max_term = max_term.max(lt);
        cum += lp.exp();
        // the f64 sum may round to just under 1 - tol, so accept the analytic
        // geometric tail bound past 2*mean as well
        let tail_done = (cum >= 1.0 - tol || (k as f64 >= 2.0 * mean && lp < ln_tail_cut))
            && k as f64 >= mean;
        let term_done = lt == f64::NEG_INFINITY || lt < max_term + decay_cut;
        if (tail_done && term_done) || k > 200_000 {
            return logsumexp(&terms);
        }
        k += 1;
    }
}

/// Log Binomial(i, p) weights; the deep tail stays representable for any i.
pub(crate) fn binomial_log_weights(i: usize, p: f64) -> Vec<f64> {
    debug_assert!((0.0..1.0).contains(&p));
    if p == 0.0 {
        return vec![0.0];
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    (0..=i)
        .map(|k| ln_binomial(i as u64, k as u64) + k as f64 * lp + (i - k) as f64 * lq)
        .collect()
}

/// Binomial(i, p) weights in the linear domain.
pub(crate) fn binomial_weights(i: usize, p: f64) -> Vec<f64> {
    binomial_log_weights(i, p).into_iter().map(f64::exp).collect()
}

/// Observation channel: log f_x(y) for y = x * w with w distributed as
/// Gamma^{-1/2}, Gamma exponential with rate `lambda`.
pub fn noise_obs_logpdf(x: f64, y: f64, lambda: f64) -> f64 {
    debug_assert!(x > 0.0 && lambda > 0.0);
    if y <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (2.0 * lambda * x * x).ln() - 3.0 * y.ln() - lambda * x * x / (y * y)
}

/// Both sides of the falling-factorial moment identity
/// C_{2(i+k)+d-1} / (C_{2k+d-1} C_{2i+d-1})
///   = sum_j k(k-1)...(k-j+1) binom(i,j) 2^j / C_{2j+d-1}.
pub fn lemma45_check(i: u32, k: u32, delta: f64) -> (f64, f64) {
    let d1 = delta - 1.0;
    let lc = |order: f64| log_abs_moment(order).expect("order >= 0 for delta >= 1");
    let lhs = (lc(2.0 * f64::from(i + k) + d1) - lc(2.0 * f64::from(k) + d1)
        - lc(2.0 * f64::from(i) + d1))
    .exp();

    let mut rhs = 0.0;
    let mut falling = 1.0; // k(k-1)...(k-j+1), empty product for j = 0
    for j in 0..=i.min(k) {
        if j > 0 {
            falling *= f64::from(k - j + 1);
        }
        rhs += falling
            * (ln_binomial(u64::from(i), u64::from(j)) + f64::from(j) * std::f64::consts::LN_2
                - lc(2.0 * f64::from(j) + d1))
            .exp();
    }
    (lhs, rhs)
}

/// Fully resolved radial OU model: diffusion constants plus channel rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialOuModel {
    pub theta_drift: f64,
    pub sigma_diff: f64,
    pub delta: f64,
    /// Sampling interval between observations.
    pub step: f64,
    /// Exponential rate of the channel noise construction.
    pub lambda: f64,
    a: f64,
    beta2: f64,
}

impl RadialOuModel {
    pub fn new(theta_drift: f64, sigma_diff: f64, delta: f64, step: f64, lambda: f64) -> Result<Self> {
        if !(sigma_diff > 0.0) || !(step > 0.0) || !(lambda > 0.0) || !(delta >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "RadialOuModel needs sigma_diff > 0, step > 0, lambda > 0, delta >= 1; got \
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
            a,
            beta2,
        })
    }

    /// AR(1) coefficient of the exact discretization.
    pub fn ar_coefficient(&self) -> f64 {
        self.a
    }

    /// Innovation variance of the exact discretization.
    pub fn innovation_variance(&self) -> f64 {
        self.beta2
    }

    /// Stationary squared scale sigma^2 / (2 |theta|); only for theta < 0.
    pub fn rho2(&self) -> Result<f64> {
        if self.theta_drift >= 0.0 {
            return Err(Error::Unsupported(format!(
                "no stationary law for theta_drift = {} >= 0",
                self.theta_drift
            )));
        }
        Ok(self.sigma_diff * self.sigma_diff / (2.0 * self.theta_drift.abs()))
    }

    /// Stationary law: the single component nu^{0,(delta)}_rho.
    pub fn stationary(&self) -> Result<MixtureDistribution> {
        let rho = self.rho2()?.sqrt();
        MixtureDistribution::component(
            Family::RadialOu { delta: self.delta },
            Theta::Scale(ScaleTheta::new(rho)?),
            0,
        )
    }

    /// The update map T_y(sigma) = sigma y / sqrt(y^2 + 2 lambda sigma^2).
    pub fn update_scale(&self, sigma: f64, y: f64) -> Result<f64> {
        if y <= 0.0 {
            return Err(Error::ImpossibleObservation { y });
        }
        Ok(sigma * y / (y * y + 2.0 * self.lambda * sigma * sigma).sqrt())
    }

    /// log p_{nu^i_sigma}(y) = log of
    /// 2 lambda sigma^2 (delta+2i) y^{delta-1+2i} / (y^2 + 2 lambda sigma^2)^{i+1+delta/2}.
    pub fn marginal_component_logpdf(&self, i: usize, sigma: f64, y: f64) -> f64 {
        if y <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let d = self.delta;
        let ifl = i as f64;
        std::f64::consts::LN_2
            + self.lambda.ln()
            + 2.0 * sigma.ln()
            + (d + 2.0 * ifl).ln()
            + (d - 1.0 + 2.0 * ifl) * y.ln()
            - (ifl + 1.0 + 0.5 * d) * (y * y + 2.0 * self.lambda * sigma * sigma).ln()
    }

    /// Prediction decomposition of nu^i_sigma P: new scale tau and
    /// Binomial(i, 1 - beta^2/tau^2) weights.
    pub fn predict_component_params(&self, i: usize, sigma: f64) -> (f64, Vec<f64>) {
        let tau2 = self.beta2 + self.a * self.a * sigma * sigma;
        let p = self.a * self.a * sigma * sigma / tau2;
        (tau2.sqrt(), binomial_weights(i, p))
    }

    /// Transition log density via the Poisson-mixture series, truncated at
    /// tail mass `tol`.
    pub fn transition_logpdf_with_tol(&self, x: f64, x_next: f64, tol: f64) -> f64 {
        debug_assert!(x >= 0.0);
        if x_next <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mean = self.a * self.a * x * x / (2.0 * self.beta2);
        let theta = Theta::Scale(ScaleTheta {
            sigma: self.beta2.sqrt(),
        });
        let fam = Family::RadialOu { delta: self.delta };
        poisson_mixture_logpdf(mean, tol, |k| component_logpdf(fam, k, &theta, x_next))
    }

    pub fn transition_logpdf(&self, x: f64, x_next: f64) -> f64 {
        self.transition_logpdf_with_tol(x, x_next, DEFAULT_SERIES_TOL)
    }

    /// Closed transition form for delta in {1, 3, 5} via the iterated
    /// derivative operator applied to cosh.
    pub fn transition_logpdf_closed(&self, x: f64, x_next: f64) -> Result<f64> {
        let n = if (self.delta - 1.0).abs() < 1e-12 {
            0u32
        } else if (self.delta - 3.0).abs() < 1e-12 {
            1
        } else if (self.delta - 5.0).abs() < 1e-12 {
            2
        } else {
            return Err(Error::Unsupported(format!(
                "closed transition form needs delta in {{1, 3, 5}}, got {}",
                self.delta
            )));
        };
        if x_next <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let beta = self.beta2.sqrt();
        let z = self.a * x * x_next / self.beta2;
        let ln_t = iterated_cosh_log(n, z);
        Ok(std::f64::consts::LN_2 - 0.5 * LN_2PI - beta.ln()
            - x_next * x_next / (2.0 * self.beta2)
            - self.a * self.a * x * x / (2.0 * self.beta2)
            + 2.0 * f64::from(n) * (x_next.ln() - beta.ln())
            + ln_t)
    }
}

/// log of T^n(cosh)(z) for T(f) = f'/x and n in {0, 1, 2}:
/// cosh z, sinh(z)/z, (z cosh z - sinh z)/z^3.
///
/// Small |z| uses the Taylor series (the n = 2 numerator cancels
/// catastrophically), large z an exponential split that never overflows.
fn iterated_cosh_log(n: u32, z: f64) -> f64 {
    let az = z.abs();
    match n {
        0 => az + (-2.0 * az).exp().ln_1p() - std::f64::consts::LN_2,
        1 => {
            if az <= 1.0 {
                // sum z^{2j} / (2j+1)!
                let mut term = 1.0;
                let mut sum = 1.0;
                for j in 0..30u32 {
                    let jf = f64::from(j);
                    term *= z * z / ((2.0 * jf + 2.0) * (2.0 * jf + 3.0));
                    sum += term;
                    if term < 1e-18 * sum {
                        break;
                    }
                }
                sum.ln()
            } else {
                az - std::f64::consts::LN_2 - az.ln() + (-(-2.0 * az).exp()).ln_1p()
            }
        }
        2 => {
            if az <= 2.0 {
                // sum z^{2j} (2j+2) / (2j+3)!
                let mut term = 1.0 / 3.0;
                let mut sum = term;
                for j in 0..40u32 {
                    let jf = f64::from(j);
                    term *= z * z / ((2.0 * jf + 2.0) * (2.0 * jf + 5.0));
                    sum += term;
                    if term < 1e-18 * sum {
                        break;
                    }
                }
                sum.ln()
            } else {
                // (z cosh z - sinh z)/z^3 = e^z (z-1) [1 + e^{-2z}(z+1)/(z-1)] / (2 z^3)
                az + (az - 1.0).ln() - std::f64::consts::LN_2 - 3.0 * az.ln()
                    + ((-2.0 * az).exp() * (az + 1.0) / (az - 1.0)).ln_1p()
            }
        }
        _ => unreachable!("n restricted to 0..=2"),
    }
}

impl ConjugateFamily for RadialOuModel {
    fn family(&self) -> Family {
        Family::RadialOu { delta: self.delta }
    }

    fn update_component(&self, i: usize, theta: &Theta, y: f64) -> Result<(usize, Theta)> {
        let t = theta.as_scale()?;
        let scaled = self.update_scale(t.sigma, y)?;
        Ok((i + 1, Theta::Scale(ScaleTheta::new(scaled)?)))
    }

    fn component_marginal_logpdf(&self, i: usize, theta: &Theta, y: f64) -> Result<f64> {
        Ok(self.marginal_component_logpdf(i, theta.as_scale()?.sigma, y))
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
        noise_obs_logpdf(x, y, self.lambda)
    }

    fn predict_dirac(&self, x: f64) -> Result<MixtureDistribution> {
        let mean = self.a * self.a * x * x / (2.0 * self.beta2);
        let lw = poisson_log_weights(mean, DEFAULT_SERIES_TOL);
        MixtureDistribution::new(
            self.family(),
            Theta::Scale(ScaleTheta::new(self.beta2.sqrt())?),
            WeightVector::from_log_weights(&lw)?,
        )
    }
}
