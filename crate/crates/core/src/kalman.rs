//! The scalar Kalman model with the extended (tilted-Gaussian) mixture class.
//!
//! Signal x_n = a x_{n-1} + beta eta_n, observation y_n = h x_n + gamma w_n.
//! The class mixes Gaussians against even-power tilts (x + mu)^{2i}; the
//! update keeps the index fixed, the prediction redistributes index i onto
//! 0..=i, so the mixture length never changes along iterations.

use crate::engine::ConjugateFamily;
use crate::error::{Error, Result};
use crate::mixtures::moments::{ln_binomial, log_c2i_shifted, log_even_moment};
use crate::mixtures::{
    component_logpdf, logsumexp, Family, KalmanTheta, MixtureDistribution, Theta,
};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

fn gaussian_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln()) - (x - mean) * (x - mean) / (2.0 * var)
}

/// Observation gain/variance and state transition constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanModel {
    pub h: f64,
    pub gamma2: f64,
    pub a: f64,
    pub beta2: f64,
}

impl KalmanModel {
    pub fn new(h: f64, gamma2: f64, a: f64, beta2: f64) -> Result<Self> {
        if !(gamma2 > 0.0) || !(beta2 > 0.0) || !h.is_finite() || !a.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "KalmanModel needs gamma2 > 0 and beta2 > 0, got (h={h}, gamma2={gamma2}, a={a}, beta2={beta2})"
            )));
        }
        Ok(Self {
            h,
            gamma2,
            a,
            beta2,
        })
    }

    /// Conditional update of (m, sigma2) given y.
    fn posterior_params(&self, m: f64, sigma2: f64, y: f64) -> (f64, f64) {
        let denom = self.gamma2 + self.h * self.h * sigma2;
        (
            (m * self.gamma2 + self.h * y * sigma2) / denom,
            sigma2 * self.gamma2 / denom,
        )
    }

    /// The update map T_y: index unchanged, mu unchanged, (m, sigma2) updated.
    pub fn update_theta(&self, theta: &KalmanTheta, y: f64) -> KalmanTheta {
        let (m_hat, s2_hat) = self.posterior_params(theta.m, theta.sigma2, y);
        KalmanTheta {
            mu: theta.mu,
            m: m_hat,
            sigma2: s2_hat,
        }
    }

    /// Log mixture weights of the prediction (or marginal) decomposition of
    /// the i-th component, for a generic (gain, noise_var) kernel.
    ///
    /// All terms are nonnegative; the double sum is evaluated in log domain.
    fn decomposition_log_weights(
        i: usize,
        theta: &KalmanTheta,
        gain: f64,
        noise_var: f64,
    ) -> Result<Vec<f64>> {
        if i == 0 {
            return Ok(vec![0.0]);
        }
        if gain == 0.0 {
            return Err(Error::SingularGain(format!(
                "index {i} >= 1 requires a nonzero gain in the prediction/marginal decomposition"
            )));
        }
        let iu = i as u64;
        let c = theta.mu + theta.m;
        let ln_c2 = (c * c).ln();
        let ln_sig2 = theta.sigma2.ln();
        let sbar2 = noise_var + gain * gain * theta.sigma2;
        let ln_sbar2 = sbar2.ln();
        let ln_gain2_sig2 = (gain * gain * theta.sigma2).ln();
        let ln_noise = noise_var.ln();

        // B_i = sum_k binom(i,k) c^{2k} / (C_{2k} sigma^{2k})
        let mut b_terms = Vec::with_capacity(i + 1);
        for k in 0..=iu {
            let mut t = ln_binomial(iu, k) - log_even_moment(k as u32);
            if k > 0 {
                t += k as f64 * (ln_c2 - ln_sig2);
            }
            b_terms.push(t);
        }
        let ln_b = logsumexp(&b_terms);

        let mut weights = Vec::with_capacity(i + 1);
        for k in 0..=iu {
            let mut inner = Vec::with_capacity(k as usize + 1);
            for j in 0..=k {
                let mut t = ln_binomial(k, j) - log_even_moment(j as u32)
                    + (k - j) as f64 * ln_gain2_sig2
                    - (iu - j) as f64 * ln_sbar2;
                if j > 0 {
                    t += j as f64 * (ln_c2 - ln_sig2);
                }
                inner.push(t);
            }
            let ln_w = ln_binomial(iu, k) + (iu - k) as f64 * ln_noise + logsumexp(&inner) - ln_b;
            weights.push(ln_w);
        }
        Ok(weights)
    }

    /// Parameter part of the prediction map for a generic kernel.
    fn decomposition_theta(
        &self,
        theta: &KalmanTheta,
        gain: f64,
        noise_var: f64,
        single_gaussian: bool,
    ) -> Result<KalmanTheta> {
        let m_bar = gain * theta.m;
        let sbar2 = noise_var + gain * gain * theta.sigma2;
        let mu_bar = if gain == 0.0 {
            if single_gaussian {
                // gain 0 with a pure Gaussian: mu never enters
                0.0
            } else {
                return Err(Error::SingularGain(
                    "zero gain makes the shifted-center map singular for indices >= 1".into(),
                ));
            }
        } else {
            (theta.m * noise_var + theta.mu * sbar2) / (gain * theta.sigma2)
        };
        Ok(KalmanTheta {
            mu: mu_bar,
            m: m_bar,
            sigma2: sbar2,
        })
    }

    /// The prediction decomposition of the i-th component: tau(theta) and the
    /// redistribution weights over indices 0..=i (linear domain).
    pub fn predict_component_params(
        &self,
        i: usize,
        theta: &KalmanTheta,
    ) -> Result<(KalmanTheta, Vec<f64>)> {
        let weights = Self::decomposition_log_weights(i, theta, self.a, self.beta2)?
            .into_iter()
            .map(f64::exp)
            .collect();
        let t = self.decomposition_theta(theta, self.a, self.beta2, i == 0)?;
        Ok((t, weights))
    }

    /// log p_{nu^i_theta}(y): the marginal decomposition evaluated at y, with
    /// (h, gamma2) in place of (a, beta2).
    pub fn marginal_component(&self, i: usize, theta: &KalmanTheta, y: f64) -> Result<f64> {
        if i == 0 {
            let var = self.gamma2 + self.h * self.h * theta.sigma2;
            return Ok(gaussian_logpdf(y, self.h * theta.m, var));
        }
        let log_weights = Self::decomposition_log_weights(i, theta, self.h, self.gamma2)?;
        let t = self.decomposition_theta(theta, self.h, self.gamma2, false)?;
        let terms: Vec<f64> = log_weights
            .iter()
            .enumerate()
            .map(|(k, lw)| lw + component_logpdf(Family::KalmanExt, k, &Theta::Kalman(t), y))
            .collect();
        Ok(logsumexp(&terms))
    }

    /// Same marginal through the Gaussian-factorization route:
    /// p(y) = N(hm, gamma2 + h^2 sigma2)(y) * C_{2i}(mu + m_hat(y); sigma2_hat)
    ///        / C_{2i}(mu + m; sigma2).
    /// Algebraically equal to `marginal_component`; kept as an independent
    /// closed-form cross-check (and it stays finite at h = 0).
    pub fn marginal_component_ratio_form(&self, i: usize, theta: &KalmanTheta, y: f64) -> f64 {
        let var = self.gamma2 + self.h * self.h * theta.sigma2;
        let base = gaussian_logpdf(y, self.h * theta.m, var);
        if i == 0 {
            return base;
        }
        let (m_hat, s2_hat) = self.posterior_params(theta.m, theta.sigma2, y);
        let iu = i as u32;
        let num = log_c2i_shifted(iu, theta.mu + m_hat, s2_hat).expect("s2_hat > 0");
        let den = log_c2i_shifted(iu, theta.mu + theta.m, theta.sigma2).expect("sigma2 > 0");
        base + num - den
    }

    /// Moment generating function E exp(lambda X) of nu^i_theta:
    /// [C_{2i}(m + mu + lambda sigma2; sigma2) / C_{2i}(m + mu; sigma2)]
    /// * exp(lambda m + lambda^2 sigma2 / 2).
    pub fn laplace_transform(i: usize, theta: &KalmanTheta, lambda: f64) -> f64 {
        let iu = i as u32;
        let c = theta.m + theta.mu;
        let num = log_c2i_shifted(iu, c + lambda * theta.sigma2, theta.sigma2).expect("sigma2 > 0");
        let den = log_c2i_shifted(iu, c, theta.sigma2).expect("sigma2 > 0");
        (num - den + lambda * theta.m + 0.5 * lambda * lambda * theta.sigma2).exp()
    }

    /// Stationary law of the signal (requires |a| < 1): N(0, beta2/(1-a^2)).
    pub fn stationary(&self) -> Result<MixtureDistribution> {
        if self.a.abs() >= 1.0 {
            return Err(Error::Unsupported(format!(
                "no stationary law for |a| = {} >= 1",
                self.a.abs()
            )));
        }
        let var = self.beta2 / (1.0 - self.a * self.a);
        MixtureDistribution::component(
            Family::KalmanExt,
            Theta::Kalman(KalmanTheta::gaussian(0.0, var)?),
            0,
        )
    }

    /// Transition log density p(x, x') = N(ax, beta2)(x').
    pub fn transition_logpdf(&self, x: f64, x_next: f64) -> f64 {
        gaussian_logpdf(x_next, self.a * x, self.beta2)
    }
}

impl ConjugateFamily for KalmanModel {
    fn family(&self) -> Family {
        Family::KalmanExt
    }

    fn update_component(&self, i: usize, theta: &Theta, y: f64) -> Result<(usize, Theta)> {
        let t = theta.as_kalman()?;
        Ok((i, Theta::Kalman(self.update_theta(t, y))))
    }

    fn component_marginal_logpdf(&self, i: usize, theta: &Theta, y: f64) -> Result<f64> {
        self.marginal_component(i, theta.as_kalman()?, y)
    }

    fn predict_component(&self, i: usize, theta: &Theta) -> Result<(Theta, Vec<f64>)> {
        let t = theta.as_kalman()?;
        let log_weights = Self::decomposition_log_weights(i, t, self.a, self.beta2)?;
        let tau = self.decomposition_theta(t, self.a, self.beta2, i == 0)?;
        Ok((Theta::Kalman(tau), log_weights))
    }

    fn obs_logpdf(&self, x: f64, y: f64) -> f64 {
        gaussian_logpdf(y, self.h * x, self.gamma2)
    }

    fn predict_dirac(&self, x: f64) -> Result<MixtureDistribution> {
        MixtureDistribution::component(
            Family::KalmanExt,
            Theta::Kalman(KalmanTheta::gaussian(self.a * x, self.beta2)?),
            0,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::quad::integrate;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(h: f64, gamma2: f64, a: f64, beta2: f64) -> KalmanModel {
        KalmanModel::new(h, gamma2, a, beta2).unwrap()
    }

    fn theta(mu: f64, m: f64, sigma2: f64) -> KalmanTheta {
        KalmanTheta::new(mu, m, sigma2).unwrap()
    }

    #[test]
    fn update_symmetric_case() {
        let k = model(1.0, 1.0, 1.0, 1.0);
        let t = k.update_theta(&theta(0.0, 0.0, 1.0), 0.0);
        assert_abs_diff_eq!(t.m, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.sigma2, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn update_textbook_values() {
        let k = model(1.0, 1.0, 1.0, 1.0);
        let t = k.update_theta(&theta(0.0, 0.0, 1.0), 2.0);
        assert_abs_diff_eq!(t.m, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.sigma2, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn update_ignores_index_and_mu() {
        let k = model(2.0, 1.0, 0.7, 0.5);
        let t0 = k.update_theta(&theta(0.0, 2.0, 4.0), 1.0);
        let t3 = k.update_theta(&theta(1.0, 2.0, 4.0), 1.0);
        assert_eq!(t0.m, t3.m);
        assert_eq!(t0.sigma2, t3.sigma2);
        assert_eq!(t3.mu, 1.0);
    }

    #[test]
    fn update_matches_grid_bayes_for_tilted_component() {
        // posterior density on a grid: prior * N(y; hx, gamma2), renormalized
        let k = model(2.0, 1.0, 0.7, 0.5);
        let th = theta(1.0, 2.0, 4.0);
        let y = 1.0;
        let i = 3usize;
        let post = k.update_theta(&th, y);
        let prior = |x: f64| component_logpdf(Family::KalmanExt, i, &Theta::Kalman(th), x).exp();
        let unnorm = |x: f64| prior(x) * k.obs_logpdf(x, y).exp();
        let mass = integrate(&unnorm, -40.0, 40.0, 1e-12).value;
        for x in [-2.0, -0.5, 0.0, 0.4, 1.5] {
            let grid_bayes = unnorm(x) / mass;
            let exact = component_logpdf(Family::KalmanExt, i, &Theta::Kalman(post), x).exp();
            assert_abs_diff_eq!(exact, grid_bayes, epsilon = 1e-8);
        }
    }

    #[test]
    fn predict_gaussian_component() {
        let k = model(1.0, 1.0, 0.8, 0.3);
        let (t, w) = k.predict_component_params(0, &theta(0.0, 1.5, 2.0)).unwrap();
        assert_eq!(w, vec![1.0]);
        assert_abs_diff_eq!(t.m, 0.8 * 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(t.sigma2, 0.3 + 0.64 * 2.0, epsilon = 1e-15);
    }

    #[test]
    fn predict_binomial_reduction_when_centered() {
        // mu + m = 0: weights reduce to binom(i,k) (a^2 s^2 / sbar^2)^k (b^2 / sbar^2)^{i-k}
        let k = model(1.0, 1.0, 0.9, 0.7);
        let th = theta(0.5, -0.5, 1.3);
        let i = 5usize;
        let (_, w) = k.predict_component_params(i, &th).unwrap();
        let sbar2 = k.beta2 + k.a * k.a * th.sigma2;
        let p = k.a * k.a * th.sigma2 / sbar2;
        for (kk, &wk) in w.iter().enumerate() {
            let expected = (ln_binomial(i as u64, kk as u64)).exp()
                * p.powi(kk as i32)
                * (1.0 - p).powi((i - kk) as i32);
            assert_relative_eq!(wk, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn predict_worked_example_sums_to_one() {
        let k = model(1.0, 1.0, 1.0, 1.0);
        let th = theta(0.0, 1.0, 1.0);
        let (t, w) = k.predict_component_params(1, &th).unwrap();
        assert_abs_diff_eq!(t.sigma2, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.mu, 1.0, epsilon = 1e-14);
        let sum: f64 = w.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn predict_weights_sum_to_one_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let th = theta(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(0.05..4.0),
            );
            let a = loop {
                let a: f64 = rng.gen_range(-2.0..2.0);
                if a.abs() > 1e-3 {
                    break a;
                }
            };
            let k = model(1.0, 1.0, a, rng.gen_range(0.05..4.0));
            let i = rng.gen_range(0..=10usize);
            let (_, w) = k.predict_component_params(i, &th).unwrap();
            let sum: f64 = w.iter().sum();
            assert_relative_eq!(sum, 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn predict_pushforward_matches_quadrature() {
        // density of psi(nu^i) at x' equals integral of nu^i(dx) p(x, x')
        let k = model(1.0, 1.0, 0.8, 0.6);
        let th = theta(0.4, -0.2, 1.1);
        for i in 0..=5usize {
            let (t, w) = k.predict_component_params(i, &th).unwrap();
            for xp in [-2.5, -0.7, 0.0, 0.9, 3.1] {
                let direct = integrate(
                    &|x: f64| {
                        component_logpdf(Family::KalmanExt, i, &Theta::Kalman(th), x).exp()
                            * k.transition_logpdf(x, xp).exp()
                    },
                    -45.0,
                    45.0,
                    1e-12,
                )
                .value;
                let mixture: f64 = w
                    .iter()
                    .enumerate()
                    .map(|(kk, &wk)| {
                        wk * component_logpdf(Family::KalmanExt, kk, &Theta::Kalman(t), xp).exp()
                    })
                    .sum();
                assert_abs_diff_eq!(mixture, direct, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn zero_gain_rejected_for_tilted_components() {
        let k = model(0.0, 1.0, 0.0, 1.0);
        let th = theta(0.3, 0.4, 1.0);
        assert!(k.predict_component_params(1, &th).is_err());
        assert!(k.marginal_component(1, &th, 0.2).is_err());
        // index 0 is the plain Gaussian: both still work
        let (t, w) = k.predict_component_params(0, &th).unwrap();
        assert_eq!(w, vec![1.0]);
        assert_abs_diff_eq!(t.m, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.sigma2, 1.0, epsilon = 1e-15);
        assert!(k.marginal_component(0, &th, 0.2).is_ok());
    }

    #[test]
    fn marginal_gaussian_component() {
        let k = model(2.0, 0.5, 1.0, 1.0);
        let th = theta(0.0, 0.3, 1.2);
        let lm = k.marginal_component(0, &th, 1.0).unwrap();
        let var = 0.5 + 4.0 * 1.2;
        assert_abs_diff_eq!(lm, gaussian_logpdf(1.0, 0.6, var), epsilon = 1e-14);
    }

    #[test]
    fn marginal_integrates_to_one() {
        let k = model(1.3, 0.8, 0.9, 0.4);
        let th = theta(0.5, -0.7, 1.1);
        for i in [1usize, 2, 4] {
            let mass = integrate(
                &|y: f64| k.marginal_component(i, &th, y).unwrap().exp(),
                -60.0,
                60.0,
                1e-11,
            )
            .value;
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn marginal_matches_quadrature_and_ratio_form() {
        let k = model(1.3, 0.8, 0.9, 0.4);
        let th = theta(0.5, -0.7, 1.1);
        for i in 0..=5usize {
            for y in [-3.0, -0.4, 0.1, 1.7] {
                let direct = integrate(
                    &|x: f64| {
                        component_logpdf(Family::KalmanExt, i, &Theta::Kalman(th), x).exp()
                            * k.obs_logpdf(x, y).exp()
                    },
                    -45.0,
                    45.0,
                    1e-13,
                )
                .value;
                let viaprop = k.marginal_component(i, &th, y).unwrap().exp();
                let ratio = k.marginal_component_ratio_form(i, &th, y).exp();
                assert_abs_diff_eq!(viaprop, direct, epsilon = 1e-8);
                assert_relative_eq!(viaprop, ratio, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn center_consistency_identity() {
        // m_bar + mu_bar = a (m + mu) / (1 - beta2 / sbar2)
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let th = theta(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(0.1..3.0),
            );
            let a = rng.gen_range(0.1..1.5);
            let k = model(1.0, 1.0, a, rng.gen_range(0.1..3.0));
            let (t, _) = k.predict_component_params(2, &th).unwrap();
            let sbar2 = k.beta2 + a * a * th.sigma2;
            let rhs = a * (th.m + th.mu) / (1.0 - k.beta2 / sbar2);
            assert_relative_eq!(t.m + t.mu, rhs, max_relative = 1e-10);
        }
    }

    #[test]
    fn laplace_transform_basics() {
        let th = theta(0.4, 0.7, 1.3);
        assert_abs_diff_eq!(
            KalmanModel::laplace_transform(3, &th, 0.0),
            1.0,
            epsilon = 1e-12
        );
        // i = 0 is the Gaussian MGF
        let lam = 0.6;
        let gauss = (lam * th.m + 0.5 * lam * lam * th.sigma2).exp();
        assert_relative_eq!(
            KalmanModel::laplace_transform(0, &th, lam),
            gauss,
            max_relative = 1e-12
        );
    }

    #[test]
    fn laplace_transform_matches_quadrature() {
        let th = theta(0.3, -0.2, 0.9);
        for i in 0..=3usize {
            for lam in [-0.5, 0.25, 0.8] {
                let q = integrate(
                    &|x: f64| {
                        (lam * x).exp()
                            * component_logpdf(Family::KalmanExt, i, &Theta::Kalman(th), x).exp()
                    },
                    -45.0,
                    45.0,
                    1e-12,
                )
                .value;
                assert_relative_eq!(
                    KalmanModel::laplace_transform(i, &th, lam),
                    q,
                    max_relative = 1e-8
                );
            }
        }
    }

    #[test]
    fn small_sigma_concentrates_at_m() {
        // weak convergence to the point mass at m as sigma -> 0
        for &sigma in &[1e-2, 1e-3, 1e-4] {
            for i in [1usize, 3] {
                let th = theta(0.8, 1.7, sigma * sigma);
                let d =
                    MixtureDistribution::component(Family::KalmanExt, Theta::Kalman(th), i).unwrap();
                assert!((d.mean() - th.m).abs() <= sigma);
            }
        }
    }

    #[test]
    fn stationary_law_requires_contraction() {
        assert!(model(1.0, 1.0, 1.0, 1.0).stationary().is_err());
        let st = model(1.0, 1.0, 0.5, 0.75).stationary().unwrap();
        assert_abs_diff_eq!(st.variance(), 1.0, epsilon = 1e-12);
    }
}
