//! Absolute moments of the standard Gaussian and the related closed-form
//! identities used as mixture normalizers.
//!
//! Everything factorial-sized is computed through `ln_gamma`: C_{2i} grows
//! like (2i-1)!! and overflows f64 near i = 85, so normalizers and weight
//! formulas stay in the log domain throughout.

use crate::error::{Error, Result};
use crate::mixtures::weights::logsumexp;
use statrs::function::gamma::ln_gamma;

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// log C_alpha where C_alpha = E|X|^alpha for X standard normal.
///
/// C_alpha = 2^(alpha/2) Gamma((alpha+1)/2) / sqrt(pi), which satisfies
/// C_0 = 1, C_{alpha+1} = alpha C_{alpha-1} and C_{2i} = (2i)!/(2^i i!).
pub fn log_abs_moment(alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!(
            "absolute moment order must be >= 0, got {alpha}"
        )));
    }
    Ok(0.5 * alpha * std::f64::consts::LN_2 + ln_gamma(0.5 * (alpha + 1.0)) - 0.5 * LN_PI)
}

/// log C_{2i}, the log of the 2i-th standard Gaussian moment.
pub fn log_even_moment(i: u32) -> f64 {
    log_abs_moment(2.0 * f64::from(i)).expect("nonnegative order")
}

/// log of the binomial coefficient n choose k.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// log E((sigma X + s)^{2i}) for X standard normal, via the finite sum
/// sum_k s^{2k} sigma^{2(i-k)} (C_{2i}/C_{2k}) binom(i,k).
///
/// Every term is nonnegative, so the sum is a log-sum-exp.
pub fn log_c2i_shifted(i: u32, s: f64, sigma2: f64) -> Result<f64> {
    if !(sigma2 >= 0.0) {
        return Err(Error::Domain(format!(
            "variance must be >= 0, got {sigma2}"
        )));
    }
    if i == 0 {
        return Ok(0.0);
    }
    let ln_s2 = (s * s).ln();
    let ln_sig2 = sigma2.ln();
    let log_c2i = log_even_moment(i);
    let mut terms = Vec::with_capacity(i as usize + 1);
    for k in 0..=i {
        let mut t = ln_binomial(u64::from(i), u64::from(k)) + log_c2i - log_even_moment(k);
        // guard 0 * -inf when s or sigma vanishes
        if k > 0 {
            t += f64::from(k) * ln_s2;
        }
        if k < i {
            t += f64::from(i - k) * ln_sig2;
        }
        terms.push(t);
    }
    Ok(logsumexp(&terms))
}

/// E((sigma X + s)^{2i}) for X standard normal.
pub fn c2i_shifted(i: u32, s: f64, sigma2: f64) -> Result<f64> {
    Ok(log_c2i_shifted(i, s, sigma2)?.exp())
}

/// Both sides of the binomial moment identity
/// binom(2i,2k) C_{2(i-k)} = (C_{2i}/C_{2k}) binom(i,k), for 0 <= k <= i.
pub fn moment_binom_identity(i: u32, k: u32) -> Result<(f64, f64)> {
    if k > i {
        return Err(Error::Domain(format!("need k <= i, got k = {k}, i = {i}")));
    }
    let lhs = (ln_binomial(2 * u64::from(i), 2 * u64::from(k)) + log_even_moment(i - k)).exp();
    let rhs =
        (log_even_moment(i) - log_even_moment(k) + ln_binomial(u64::from(i), u64::from(k))).exp();
    Ok((lhs, rhs))
}

/// Signed raw moment E((c + sigma X)^p) for X standard normal.
///
/// Direct summation over even Gaussian moments; fine for the moderate p the
/// moment helpers need (p <= ~40), unlike the normalizers above.
pub fn shifted_gaussian_raw_moment(p: u32, c: f64, sigma2: f64) -> f64 {
    let sigma = sigma2.sqrt();
    let mut total = 0.0;
    let mut k = 0u32;
    while k <= p {
        // odd Gaussian moments vanish
        let term = (ln_binomial(u64::from(p), u64::from(k)) + log_even_moment(k / 2)).exp()
            * c.powi((p - k) as i32)
            * sigma.powi(k as i32);
        total += term;
        k += 2;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::quad::integrate;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn std_normal_pdf(x: f64) -> f64 {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn zeroth_moment_is_one() {
        assert_abs_diff_eq!(log_abs_moment(0.0).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn fourth_moment_is_three() {
        assert_abs_diff_eq!(log_abs_moment(4.0).unwrap(), 3f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn first_moment_matches_quadrature() {
        // oracle: integral of |x| phi(x) over R = 2 * integral over (0, inf)
        let q = integrate(&|x: f64| 2.0 * x * std_normal_pdf(x), 0.0, 40.0, 1e-13).value;
        let expected = q.ln();
        // frozen from the quadrature oracle; equals ln sqrt(2/pi)
        assert_abs_diff_eq!(expected, -0.225_791_352_644_727_43, epsilon = 1e-12);
        assert_abs_diff_eq!(log_abs_moment(1.0).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn negative_order_rejected() {
        assert!(log_abs_moment(-0.5).is_err());
    }

    #[test]
    fn even_moments_match_double_factorial() {
        // C_{2i} = (2i)!/(2^i i!)
        let mut expected = 1.0f64;
        for i in 0..=20u32 {
            if i > 0 {
                expected *= 2.0 * f64::from(i) - 1.0;
            }
            assert_relative_eq!(log_even_moment(i).exp(), expected, max_relative = 1e-10);
        }
    }

    #[test]
    fn recursion_holds_for_half_integer_orders() {
        // C_{alpha+1} = alpha C_{alpha-1} for alpha in {1, 1.5, ..., 20}
        let mut alpha = 1.0;
        while alpha <= 20.0 {
            let lhs = log_abs_moment(alpha + 1.0).unwrap().exp();
            let rhs = alpha * log_abs_moment(alpha - 1.0).unwrap().exp();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
            alpha += 0.5;
        }
    }

    #[test]
    fn binom_identity_examples() {
        let (l, r) = moment_binom_identity(1, 0).unwrap();
        assert_abs_diff_eq!(l, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-12);
        let (l, r) = moment_binom_identity(2, 1).unwrap();
        assert_relative_eq!(l, 6.0, max_relative = 1e-12);
        assert_relative_eq!(r, 6.0, max_relative = 1e-12);
        // (5, 2): exact integer arithmetic gives binom(10,4) * C_6 = 210 * 15 = 3150
        // and (C_10 / C_4) * binom(5,2) = (945 / 3) * 10 = 3150.
        let (l, r) = moment_binom_identity(5, 2).unwrap();
        assert_relative_eq!(l, 3150.0, max_relative = 1e-12);
        assert_relative_eq!(r, 3150.0, max_relative = 1e-12);
    }

    #[test]
    fn binom_identity_full_grid() {
        for i in 0..=12 {
            for k in 0..=i {
                let (l, r) = moment_binom_identity(i, k).unwrap();
                assert_relative_eq!(l, r, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn c2i_shifted_examples() {
        assert_abs_diff_eq!(c2i_shifted(0, 3.7, 0.2).unwrap(), 1.0, epsilon = 1e-14);
        // second moment of a shifted Gaussian
        assert_relative_eq!(
            c2i_shifted(1, -1.5, 0.7).unwrap(),
            1.5 * 1.5 + 0.7,
            max_relative = 1e-13
        );
        // E(X + 1)^4 = 1 + 6 + 3 = 10
        assert_relative_eq!(c2i_shifted(2, 1.0, 1.0).unwrap(), 10.0, max_relative = 1e-13);
    }

    #[test]
    fn c2i_shifted_degenerate_scales() {
        // sigma = 0: E(s)^{2i}
        assert_relative_eq!(
            c2i_shifted(3, 2.0, 0.0).unwrap(),
            64.0,
            max_relative = 1e-13
        );
        // s = 0: E(sigma X)^{2i} = sigma^{2i} C_{2i}
        assert_relative_eq!(
            c2i_shifted(2, 0.0, 2.0).unwrap(),
            4.0 * 3.0,
            max_relative = 1e-13
        );
    }

    #[test]
    fn c2i_shifted_matches_quadrature() {
        let cases = [(0.3f64, 1.7f64), (-2.0, 0.5), (1.0, 3.0)];
        for (s, sigma2) in cases {
            let sigma = sigma2.sqrt();
            for i in 0..=8u32 {
                let q = integrate(
                    &|x: f64| (sigma * x + s).powi(2 * i as i32) * std_normal_pdf(x),
                    -45.0,
                    45.0,
                    1e-12,
                )
                .value;
                assert_relative_eq!(c2i_shifted(i, s, sigma2).unwrap(), q, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn raw_moments_match_quadrature() {
        let (c, sigma2) = (0.8, 1.3);
        let sigma = sigma2_sqrt(sigma2);
        for p in 0..=7u32 {
            let q = integrate(
                &|x: f64| (c + sigma * x).powi(p as i32) * std_normal_pdf(x),
                -45.0,
                45.0,
                1e-12,
            )
            .value;
            assert_relative_eq!(
                shifted_gaussian_raw_moment(p, c, sigma2),
                q,
                max_relative = 1e-9
            );
        }
    }

    fn sigma2_sqrt(s: f64) -> f64 {
        s.sqrt()
    }
}
