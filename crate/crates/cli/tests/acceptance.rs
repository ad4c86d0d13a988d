//! Acceptance gate: nine criteria covering the moment identities, density
//! normalizations, oracle equivalence, structural filter laws, closed-form
//! agreement, the squaring commutation, the component MGF, and byte-level
//! reproducibility. One test per criterion; each prints a pass line with its
//! runtime (visible under --nocapture) and pins every tolerance in code.

use approx::assert_abs_diff_eq;
use mixfilter::engine::{run_filter, ConjugateFamily};
use mixfilter::mixtures::moments::{log_even_moment, moment_binom_identity};
use mixfilter::mixtures::{
    component_logpdf, Family, KalmanTheta, MixtureDistribution, ScaleTheta, StateDistribution,
    Theta,
};
use mixfilter::oracle::grid::{grid_filter, GridDensities, GridSpec};
use mixfilter::oracle::particle::{particle_filter, ParticleConfig, ParticleSamplers};
use mixfilter::oracle::quad::integrate;
use mixfilter::oracle::compare_particle;
use mixfilter::radial_ou::lemma45_check;
use mixfilter::simulate::{
    rng_for, sample_cir_step, sample_kalman_component, sample_kalman_step, sample_mixture,
    sample_radial_ou_step, simulate_cir, simulate_kalman, simulate_radial_ou, InitSpec, SimConfig,
};
use mixfilter::{cir, ChannelKind, CirModel, KalmanModel, RadialOuModel};
use rand::Rng;
use std::time::{Duration, Instant};

const DELTA_GRID: [f64; 5] = [1.0, 2.0, 2.5, 3.0, 7.0];

fn pass(criterion: u32, started: Instant, budget: Duration, what: &str) {
    let elapsed = started.elapsed();
    println!(
        "[criterion {criterion}] PASS ({:.2}s of {:.0}s budget): {what}",
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    assert!(
        elapsed <= budget,
        "criterion {criterion} exceeded its runtime budget: {elapsed:?} > {budget:?}"
    );
}

fn radial(delta: f64) -> RadialOuModel {
    RadialOuModel::new(-0.5, 1.0, delta, 1.0, 0.5).unwrap()
}

fn cir_model(delta: f64, channel: ChannelKind) -> CirModel {
    CirModel::new(-0.5, 1.0, delta, 1.0, 0.8, channel).unwrap()
}

#[test]
fn criterion_1_identity_suite() {
    let t0 = Instant::now();
    // falling-factorial moment identity: i <= 10, k <= 20, delta grid, 1e-9
    for &delta in &DELTA_GRID {
        for i in 0..=10u32 {
            for k in 0..=20u32 {
                let (lhs, rhs) = lemma45_check(i, k, delta);
                let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs());
                assert!(
                    rel <= 1e-9,
                    "falling-factorial identity failed at (i={i}, k={k}, delta={delta}): rel {rel}"
                );
            }
        }
    }
    // binomial moment identity: k <= i <= 12, 1e-12
    for i in 0..=12u32 {
        for k in 0..=i {
            let (lhs, rhs) = moment_binom_identity(i, k).unwrap();
            let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs());
            assert!(
                rel <= 1e-12,
                "binomial moment identity failed at (i={i}, k={k}): rel {rel}"
            );
        }
    }
    // even Gaussian moments against the double factorial: i <= 20, 1e-10
    let mut expected = 1.0f64;
    for i in 0..=20u32 {
        if i > 0 {
            expected *= 2.0 * f64::from(i) - 1.0;
        }
        let got = log_even_moment(i).exp();
        let rel = (got - expected).abs() / expected;
        assert!(rel <= 1e-10, "even moment failed at i={i}: rel {rel}");
    }
    pass(
        1,
        t0,
        Duration::from_secs(1),
        "moment identities over the full parameter grid",
    );
}

/// integral of f over (0, inf) allowing an integrable power singularity at 0
/// and an algebraic tail: both halves are mapped to [0, 1] with z = v^2 and
/// z = 1/v^2, which flattens every z^p with p > -1 at the endpoints.
fn integrate_heavy_tail(f: &dyn Fn(f64) -> f64, tol: f64) -> f64 {
    integrate(&|v: f64| 2.0 * v * f(v * v), 1e-12, 1.0, tol).value
        + integrate(&|v: f64| 2.0 * f(1.0 / (v * v)) / (v * v * v), 1e-12, 1.0, tol).value
}

#[test]
fn criterion_2_normalization_suite() {
    let t0 = Instant::now();
    let tol = 1e-8;
    let scale = Theta::Scale(ScaleTheta::new(0.8).unwrap());

    // component densities, both positive-support families, i <= 10
    for &delta in &DELTA_GRID {
        for i in 0..=10usize {
            let fam = Family::RadialOu { delta };
            let mass = integrate(
                &|x: f64| component_logpdf(fam, i, &scale, x).exp(),
                1e-12,
                30.0,
                1e-11,
            )
            .value;
            assert_abs_diff_eq!(mass, 1.0, epsilon = tol);

            let fam = Family::GammaCir { delta };
            let mass = integrate(
                &|u: f64| 2.0 * u * component_logpdf(fam, i, &scale, u * u).exp(),
                1e-12,
                30.0,
                1e-11,
            )
            .value;
            assert_abs_diff_eq!(mass, 1.0, epsilon = tol);
        }
    }
    // extended Kalman components with a shifted center
    let ktheta = Theta::Kalman(KalmanTheta::new(0.7, -0.4, 1.3).unwrap());
    for i in 0..=10usize {
        let mass = integrate(
            &|x: f64| component_logpdf(Family::KalmanExt, i, &ktheta, x).exp(),
            -70.0,
            70.0,
            1e-11,
        )
        .value;
        assert_abs_diff_eq!(mass, 1.0, epsilon = tol);
    }

    // transition densities
    for &delta in &DELTA_GRID {
        let m = radial(delta);
        let c = cir_model(delta, ChannelKind::SquaredMult);
        for &x in &[0.1, 1.0, 5.0] {
            let mass =
                integrate(&|xp: f64| m.transition_logpdf(x, xp).exp(), 1e-10, 25.0, 1e-11).value;
            assert_abs_diff_eq!(mass, 1.0, epsilon = tol);
            let mass = integrate(
                &|u: f64| 2.0 * u * c.transition_logpdf(x * x, u * u).exp(),
                1e-10,
                25.0,
                1e-11,
            )
            .value;
            assert_abs_diff_eq!(mass, 1.0, epsilon = tol);
        }
    }

    // marginal observation densities
    for &delta in &DELTA_GRID {
        let m = radial(delta);
        for i in 0..=5usize {
            let mass = integrate_heavy_tail(&|y| m.marginal_component_logpdf(i, 0.9, y).exp(), 1e-11);
            assert_abs_diff_eq!(mass, 1.0, epsilon = tol);
        }
    }
    let k = KalmanModel::new(1.3, 0.8, 0.9, 0.4).unwrap();
    let kth = KalmanTheta::new(0.5, -0.7, 1.1).unwrap();
    for i in 0..=5usize {
        let mass = integrate(
            &|y: f64| k.marginal_component(i, &kth, y).unwrap().exp(),
            -70.0,
            70.0,
            1e-11,
        )
        .value;
        assert_abs_diff_eq!(mass, 1.0, epsilon = tol);
    }
    let (lambda, sigma) = (0.8, 0.9);
    for &delta in &DELTA_GRID {
        for i in [0usize, 1, 5] {
            for kind in [
                ChannelKind::SquaredMult,
                ChannelKind::Inverse,
                ChannelKind::SvPrime,
                ChannelKind::SvDoublePrime,
            ] {
                let f = |z: f64| cir::marginal_channel_logpdf(kind, i, sigma, z, lambda, delta).exp();
                let mass = match kind {
                    ChannelKind::SvPrime | ChannelKind::SvDoublePrime => {
                        2.0 * integrate_heavy_tail(&f, 1e-11)
                    }
                    _ => integrate_heavy_tail(&f, 1e-11),
                };
                assert_abs_diff_eq!(mass, 1.0, epsilon = tol);
            }
            // the count channel sums over the integers
            let mut mass = 0.0;
            for z in 0..1000 {
                mass += cir::marginal_channel_logpdf(
                    ChannelKind::Poisson,
                    i,
                    sigma,
                    z as f64,
                    lambda,
                    delta,
                )
                .exp();
            }
            assert_abs_diff_eq!(mass, 1.0, epsilon = tol);
        }
    }

    // raw channel densities given the state
    for kind in ChannelKind::ALL {
        for &r in &[0.5, 1.0, 3.0] {
            let f = |z: f64| cir::channel_obs_logpdf(kind, r, z, lambda).exp();
            let mass = match kind {
                ChannelKind::Poisson => (0..400).map(|z| f(z as f64)).sum(),
                ChannelKind::SvPrime | ChannelKind::SvDoublePrime => {
                    2.0 * integrate_heavy_tail(&f, 1e-11)
                }
                _ => integrate_heavy_tail(&f, 1e-11),
            };
            assert_abs_diff_eq!(mass, 1.0, epsilon = tol);
        }
    }
    // the scale channel of the radial family
    let m = radial(2.0);
    for &x in &[0.5, 1.0, 3.0] {
        let mass = integrate_heavy_tail(&|y| m.obs_logpdf(x, y).exp(), 1e-11);
        assert_abs_diff_eq!(mass, 1.0, epsilon = tol);
    }

    pass(
        2,
        t0,
        Duration::from_secs(30),
        "all densities integrate or sum to one at 1e-8",
    );
}

/// First seed whose 3-step series keeps observations inside the window the
/// oracle grid can resolve. The scan is deterministic, so the fixture is
/// reproducible.
fn pick_seed(mut gen: impl FnMut(u64) -> Vec<f64>, lo: f64, hi: f64) -> u64 {
    for seed in 0..500u64 {
        let ys = gen(seed);
        if ys.iter().all(|&y| y.abs() > lo && y.abs() < hi) {
            return seed;
        }
    }
    panic!("no seed in 0..500 produced observations in ({lo}, {hi})");
}

struct GridCase<'a> {
    name: &'static str,
    family: &'a dyn ConjugateFamily,
    init: MixtureDistribution,
    observations: Vec<f64>,
    grid: GridSpec,
    init_logpdf: Box<dyn Fn(f64) -> f64 + Sync + 'a>,
    trans_logpdf: Box<dyn Fn(f64, f64) -> f64 + Sync + 'a>,
    obs_logpdf: Box<dyn Fn(f64, f64) -> f64 + Sync + 'a>,
    /// Exact posterior density on the grid's coordinate scale.
    exact_pdf: Box<dyn Fn(&MixtureDistribution, f64) -> f64 + 'a>,
    /// Exact log-likelihood shift between the grid's observation coordinates
    /// and the family's own (zero unless the case transforms observations).
    loglik_shift: f64,
}

fn check_grid_case(case: GridCase<'_>) -> (f64, f64) {
    let trace = run_filter(
        case.family,
        &StateDistribution::Mixture(case.init.clone()),
        &case.observations,
        0.0,
    )
    .unwrap();
    let out = grid_filter(
        &GridDensities {
            init_logpdf: &*case.init_logpdf,
            trans_logpdf: &*case.trans_logpdf,
            obs_logpdf: &*case.obs_logpdf,
        },
        &case.grid,
        &case.observations,
    )
    .unwrap();
    let mut sup = 0.0f64;
    for (step, gs) in trace.steps.iter().zip(&out.steps) {
        let post = step.posterior.as_mixture().unwrap();
        for (&x, &d) in out.nodes.iter().zip(&gs.posterior) {
            sup = sup.max(((case.exact_pdf)(post, x) - d).abs());
        }
    }
    let loglik_diff = (trace.total_loglik - case.loglik_shift - out.total_loglik).abs();
    assert!(
        sup < 1e-6,
        "{}: grid sup density diff {sup:.3e} >= 1e-6",
        case.name
    );
    assert!(
        loglik_diff < 1e-6,
        "{}: grid loglik diff {loglik_diff:.3e} >= 1e-6",
        case.name
    );
    (sup, loglik_diff)
}

#[test]
fn criterion_3_grid_oracle_equivalence() {
    let t0 = Instant::now();

    // extended Kalman
    let k = KalmanModel::new(1.0, 0.5, 0.8, 0.4).unwrap();
    let seed = pick_seed(
        |s| {
            simulate_kalman(&k, &SimConfig { n_steps: 3, seed: s, init: InitSpec::Stationary })
                .unwrap()
                .observations
        },
        0.0,
        3.5,
    );
    let path = simulate_kalman(&k, &SimConfig { n_steps: 3, seed, init: InitSpec::Stationary })
        .unwrap();
    let init = k.stationary().unwrap();
    let init_c = init.clone();
    check_grid_case(GridCase {
        name: "kalman",
        family: &k,
        init: init.clone(),
        observations: path.observations,
        grid: GridSpec::new(-16.0, 16.0, 4001).unwrap(),
        init_logpdf: Box::new(move |x| init_c.logpdf(x)),
        trans_logpdf: Box::new(move |x, xp| k.transition_logpdf(x, xp)),
        obs_logpdf: Box::new(move |x, y| k.obs_logpdf(x, y)),
        exact_pdf: Box::new(|d, x| d.pdf(x)),
        loglik_shift: 0.0,
    });

    // radial OU, both deltas, closed-form kernels
    for delta in [1.0, 3.0] {
        let m = radial(delta);
        let seed = pick_seed(
            |s| {
                simulate_radial_ou(&m, &SimConfig { n_steps: 3, seed: s, init: InitSpec::Stationary })
                    .unwrap()
                    .observations
            },
            0.35,
            6.0,
        );
        let path =
            simulate_radial_ou(&m, &SimConfig { n_steps: 3, seed, init: InitSpec::Stationary })
                .unwrap();
        let init = m.stationary().unwrap();
        let init_c = init.clone();
        check_grid_case(GridCase {
            name: if delta == 1.0 { "radial_ou d1" } else { "radial_ou d3" },
            family: &m,
            init: init.clone(),
            observations: path.observations,
            grid: GridSpec::new(1e-9, 14.0, 4001).unwrap(),
            init_logpdf: Box::new(move |x| init_c.logpdf(x)),
            trans_logpdf: Box::new(move |x, xp| m.transition_logpdf_closed(x, xp).unwrap()),
            obs_logpdf: Box::new(move |x, y| m.obs_logpdf(x, y)),
            exact_pdf: Box::new(|d, x| d.pdf(x)),
            loglik_shift: 0.0,
        });
    }

    // CIR with every channel; the grid runs on the sqrt scale where the
    // integrands are even at the origin, using the change-of-variables
    // identity q(r, r') = p(sqrt r, sqrt r') / (2 sqrt r')
    let radial_kernel = radial(3.0);
    for kind in ChannelKind::ALL {
        let c = cir_model(3.0, kind);
        let seed = pick_seed(
            |s| {
                simulate_cir(&c, &SimConfig { n_steps: 3, seed: s, init: InitSpec::Stationary })
                    .unwrap()
                    .observations
            },
            match kind {
                ChannelKind::Poisson => -0.5, // counts may be zero
                _ => 0.3,
            },
            8.0,
        );
        let path = simulate_cir(&c, &SimConfig { n_steps: 3, seed, init: InitSpec::Stationary })
            .unwrap();
        let init = c.stationary().unwrap();
        let init_c = init.clone();
        check_grid_case(GridCase {
            name: kind.label(),
            family: &c,
            init: init.clone(),
            observations: path.observations,
            grid: GridSpec::new(1e-9, 7.5, 4001).unwrap(),
            init_logpdf: Box::new(move |x| init_c.logpdf(x * x) + (2.0 * x).ln()),
            trans_logpdf: Box::new(move |x, xp| {
                radial_kernel.transition_logpdf_closed(x, xp).unwrap()
            }),
            obs_logpdf: Box::new(move |x, z| c.obs_logpdf(x * x, z)),
            exact_pdf: Box::new(|d, x| d.pdf(x * x) * 2.0 * x),
            loglik_shift: 0.0,
        });
    }

    pass(
        3,
        t0,
        Duration::from_secs(120),
        "grid oracle matches filter densities and likelihoods at 1e-6",
    );
}

#[test]
fn criterion_4_particle_oracle_equivalence() {
    let t0 = Instant::now();
    const N_PARTICLES: usize = 100_000;
    const REPLICATES: usize = 20;
    const N_STEPS: usize = 50;

    let mut worst: (String, f64) = (String::new(), 0.0);
    let mut run_case = |name: &str,
                        family: &dyn ConjugateFamily,
                        init: &MixtureDistribution,
                        observations: &[f64],
                        samplers: &ParticleSamplers<'_>,
                        seed: u64| {
        let trace = run_filter(
            family,
            &StateDistribution::Mixture(init.clone()),
            observations,
            0.0,
        )
        .unwrap();
        let posteriors: Vec<_> = trace
            .steps
            .iter()
            .map(|s| s.posterior.as_mixture().unwrap().clone())
            .collect();
        let means: Vec<f64> = posteriors.iter().map(|d| d.mean()).collect();
        let vars: Vec<f64> = posteriors.iter().map(|d| d.variance()).collect();
        let summary = particle_filter(
            samplers,
            &ParticleConfig::new(N_PARTICLES, REPLICATES, seed).unwrap(),
            observations,
        )
        .unwrap();
        let report = compare_particle(&means, &vars, trace.total_loglik, &summary);
        assert!(
            report.max_abs_z < 3.0,
            "{name}: max |z| = {:.3} (loglik z {:.3})",
            report.max_abs_z,
            report.loglik_z
        );
        if report.max_abs_z > worst.1 {
            worst = (name.to_string(), report.max_abs_z);
        }
    };

    // Kalman
    let k = KalmanModel::new(1.0, 0.5, 0.8, 0.4).unwrap();
    let path = simulate_kalman(&k, &SimConfig { n_steps: N_STEPS, seed: 1001, init: InitSpec::Stationary }).unwrap();
    let init = k.stationary().unwrap();
    let init_s = init.clone();
    let init_sample = move |rng: &mut rand_chacha::ChaCha8Rng| sample_mixture(&init_s, rng);
    let trans_sample = move |rng: &mut rand_chacha::ChaCha8Rng, x: f64| sample_kalman_step(&k, x, rng);
    let obs = move |x: f64, y: f64| k.obs_logpdf(x, y);
    run_case(
        "kalman",
        &k,
        &init,
        &path.observations,
        &ParticleSamplers {
            init_sample: &init_sample,
            trans_sample: &trans_sample,
            obs_logpdf: &obs,
        },
        2001,
    );

    // radial OU
    for delta in [1.0, 3.0] {
        let m = radial(delta);
        let path = simulate_radial_ou(&m, &SimConfig { n_steps: N_STEPS, seed: 1002, init: InitSpec::Stationary }).unwrap();
        let init = m.stationary().unwrap();
        let init_s = init.clone();
        let init_sample = move |rng: &mut rand_chacha::ChaCha8Rng| sample_mixture(&init_s, rng);
        let trans_sample =
            move |rng: &mut rand_chacha::ChaCha8Rng, x: f64| sample_radial_ou_step(&m, x, rng);
        let obs = move |x: f64, y: f64| m.obs_logpdf(x, y);
        run_case(
            if delta == 1.0 { "radial_ou d1" } else { "radial_ou d3" },
            &m,
            &init,
            &path.observations,
            &ParticleSamplers {
                init_sample: &init_sample,
                trans_sample: &trans_sample,
                obs_logpdf: &obs,
            },
            2002,
        );
    }

    // CIR, all channels
    for kind in ChannelKind::ALL {
        let c = cir_model(3.0, kind);
        let path = simulate_cir(&c, &SimConfig { n_steps: N_STEPS, seed: 1003, init: InitSpec::Stationary }).unwrap();
        let init = c.stationary().unwrap();
        let init_s = init.clone();
        let init_sample = move |rng: &mut rand_chacha::ChaCha8Rng| sample_mixture(&init_s, rng);
        let trans_sample =
            move |rng: &mut rand_chacha::ChaCha8Rng, r: f64| sample_cir_step(&c, r, rng);
        let obs = move |r: f64, z: f64| c.obs_logpdf(r, z);
        run_case(
            kind.label(),
            &c,
            &init,
            &path.observations,
            &ParticleSamplers {
                init_sample: &init_sample,
                trans_sample: &trans_sample,
                obs_logpdf: &obs,
            },
            2003,
        );
    }

    let budget = Duration::from_secs(600);
    println!("worst particle deviation: {} at |z| = {:.3}", worst.0, worst.1);
    pass(
        4,
        t0,
        budget,
        "particle oracle brackets moments and likelihoods at 3 SE",
    );
}

#[test]
fn criterion_5_structural_laws() {
    let t0 = Instant::now();

    // (a) Kalman length constant over 50 steps
    let k = KalmanModel::new(1.0, 0.5, 0.8, 0.4).unwrap();
    let path = simulate_kalman(&k, &SimConfig { n_steps: 50, seed: 3001, init: InitSpec::Stationary }).unwrap();
    let theta = Theta::Kalman(KalmanTheta::new(0.4, 0.0, 1.0).unwrap());
    let init = MixtureDistribution::new(
        Family::KalmanExt,
        theta,
        mixfilter::WeightVector::new(vec![0.4, 0.3, 0.3]).unwrap(),
    )
    .unwrap();
    let trace = run_filter(&k, &StateDistribution::Mixture(init), &path.observations, 0.0).unwrap();
    for step in &trace.steps {
        assert_eq!(step.posterior.as_mixture().unwrap().length(), 2);
        assert_eq!(step.predictive.as_mixture().unwrap().length(), 2);
    }

    // (b) +1 per update, preserved by predict, over 50 steps
    let m = radial(1.0);
    let path = simulate_radial_ou(&m, &SimConfig { n_steps: 50, seed: 3002, init: InitSpec::Stationary }).unwrap();
    let trace = run_filter(
        &m,
        &StateDistribution::Mixture(m.stationary().unwrap()),
        &path.observations,
        0.0,
    )
    .unwrap();
    for (n, step) in trace.steps.iter().enumerate() {
        assert_eq!(step.posterior.as_mixture().unwrap().length(), n + 1);
        assert_eq!(step.predictive.as_mixture().unwrap().length(), n + 1);
    }
    let c = cir_model(3.0, ChannelKind::SquaredMult);
    let path = simulate_cir(&c, &SimConfig { n_steps: 50, seed: 3003, init: InitSpec::Stationary }).unwrap();
    let trace = run_filter(
        &c,
        &StateDistribution::Mixture(c.stationary().unwrap()),
        &path.observations,
        0.0,
    )
    .unwrap();
    for (n, step) in trace.steps.iter().enumerate() {
        assert_eq!(step.posterior.as_mixture().unwrap().length(), n + 1);
        assert_eq!(step.predictive.as_mixture().unwrap().length(), n + 1);
    }
    // the count channel shifts by the observed count instead
    let c = cir_model(3.0, ChannelKind::Poisson);
    let path = simulate_cir(&c, &SimConfig { n_steps: 50, seed: 3004, init: InitSpec::Stationary }).unwrap();
    let trace = run_filter(
        &c,
        &StateDistribution::Mixture(c.stationary().unwrap()),
        &path.observations,
        0.0,
    )
    .unwrap();
    let mut expected = 0usize;
    for (step, &z) in trace.steps.iter().zip(&path.observations) {
        expected += z as usize;
        assert_eq!(step.posterior.as_mixture().unwrap().length(), expected);
        assert_eq!(step.predictive.as_mixture().unwrap().length(), expected);
    }

    // (c) the stationary scale is a fixed point of the prediction map
    for &delta in &DELTA_GRID {
        let m = radial(delta);
        let rho = m.rho2().unwrap().sqrt();
        let (tau, _) = m.predict_component_params(0, rho);
        assert!(
            (tau - rho).abs() <= 1e-12 * rho,
            "radial fixed point off: tau {tau}, rho {rho}"
        );
        let c = cir_model(delta, ChannelKind::Inverse);
        let rho = c.rho2().unwrap().sqrt();
        let (tau, _) = c.predict_component_params(0, rho);
        assert!(
            (tau - rho).abs() <= 1e-12 * rho,
            "cir fixed point off: tau {tau}, rho {rho}"
        );
    }

    pass(
        5,
        t0,
        Duration::from_secs(60),
        "mixture-length laws and the stationary fixed point",
    );
}

#[test]
fn criterion_6_closed_form_matches_series() {
    let t0 = Instant::now();
    let mut rng = rng_for(606, 0);
    for delta in [1.0, 3.0, 5.0] {
        let m = RadialOuModel::new(-0.7, 1.1, delta, 0.8, 1.0).unwrap();
        for _ in 0..100 {
            let x = rng.gen_range(0.02..6.0);
            let xp = rng.gen_range(0.02..6.0);
            let closed = m.transition_logpdf_closed(x, xp).unwrap();
            let series = m.transition_logpdf_with_tol(x, xp, 1e-16);
            assert!(
                (closed - series).abs() <= 1e-10,
                "delta={delta} at (x={x}, x'={xp}): closed {closed}, series {series}"
            );
        }
    }
    pass(
        6,
        t0,
        Duration::from_secs(60),
        "closed transition forms equal the series at 100 random points each",
    );
}

#[test]
fn criterion_7_squaring_commutes_with_filtering() {
    let t0 = Instant::now();
    let m = RadialOuModel::new(-0.6, 1.0, 2.0, 1.0, 0.9).unwrap();
    let c = CirModel::new(-0.6, 1.0, 2.0, 1.0, 0.9, ChannelKind::SquaredMult).unwrap();
    let path = simulate_radial_ou(&m, &SimConfig { n_steps: 20, seed: 707, init: InitSpec::Stationary }).unwrap();
    let zs: Vec<f64> = path.observations.iter().map(|y| y * y).collect();
    let rtrace = run_filter(
        &m,
        &StateDistribution::Mixture(m.stationary().unwrap()),
        &path.observations,
        0.0,
    )
    .unwrap();
    let ctrace = run_filter(
        &c,
        &StateDistribution::Mixture(c.stationary().unwrap()),
        &zs,
        0.0,
    )
    .unwrap();
    let probe: Vec<f64> = (1..=40).map(|i| i as f64 * 0.15).collect();
    for (rs, cs) in rtrace.steps.iter().zip(&ctrace.steps) {
        let pushed = cir::pushforward_square(rs.posterior.as_mixture().unwrap()).unwrap();
        let direct = cs.posterior.as_mixture().unwrap();
        for &r in &probe {
            assert!(
                (pushed.pdf(r) - direct.pdf(r)).abs() <= 1e-10,
                "posterior density mismatch at r={r}"
            );
        }
        let pushed_pred = cir::pushforward_square(rs.predictive.as_mixture().unwrap()).unwrap();
        let direct_pred = cs.predictive.as_mixture().unwrap();
        for &r in &probe {
            assert!(
                (pushed_pred.pdf(r) - direct_pred.pdf(r)).abs() <= 1e-10,
                "predictive density mismatch at r={r}"
            );
        }
    }
    pass(
        7,
        t0,
        Duration::from_secs(60),
        "radial filtering pushed through squaring equals direct CIR filtering",
    );
}

#[test]
fn criterion_8_laplace_transform_matches_monte_carlo() {
    let t0 = Instant::now();
    let theta = KalmanTheta::new(0.3, -0.2, 0.9).unwrap();
    let n = 10_000_000usize;
    let mut rng = rng_for(808, 0);
    for i in 0..=3usize {
        for lam in [0.25, 0.5] {
            let exact = KalmanModel::laplace_transform(i, &theta, lam);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..n {
                let x = sample_kalman_component(i, &theta, &mut rng);
                let v = (lam * x).exp();
                sum += v;
                sum_sq += v * v;
            }
            let mean = sum / n as f64;
            let var = sum_sq / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            let z = (exact - mean).abs() / se;
            assert!(
                z < 3.0,
                "MGF mismatch at (i={i}, lambda={lam}): exact {exact}, MC {mean} +- {se} (z={z:.2})"
            );
        }
    }
    pass(
        8,
        t0,
        Duration::from_secs(300),
        "component MGF matches 1e7-sample Monte Carlo at 3 SE for i <= 3",
    );
}

#[test]
fn criterion_9_reproducibility() {
    let t0 = Instant::now();
    use mixfilter_cli::commands::{cmd_filter, cmd_loglik, cmd_simulate, Overrides};
    use mixfilter_cli::config::ExperimentConfig;

    let dir = tempfile::tempdir().unwrap();
    let configs = [
        format!(
            r#"
schema_version = 1
[model]
family = "kalman"
theta_drift = -0.4
sigma_diff = 1.0
Delta = 1.0
h = 1.0
gamma = 0.8
[init]
kind = "stationary"
[run]
n_steps = 20
seed = 99
[output]
fixture = "{0}/k_fixture.csv"
trace = "{0}/k_trace.csv"
report = "{0}/k_report.json"
"#,
            dir.path().display()
        ),
        format!(
            r#"
schema_version = 1
[model]
family = "radial_ou"
delta = 2.5
theta_drift = -0.5
sigma_diff = 1.0
Delta = 1.0
lambda = 0.7
[init]
kind = "stationary"
[run]
n_steps = 20
seed = 99
[output]
fixture = "{0}/r_fixture.csv"
trace = "{0}/r_trace.csv"
report = "{0}/r_report.json"
"#,
            dir.path().display()
        ),
        format!(
            r#"
schema_version = 1
[model]
family = "gamma_cir"
delta = 3.0
theta_drift = -0.5
sigma_diff = 1.0
Delta = 1.0
lambda = 0.8
[channel]
kind = "poisson"
[init]
kind = "stationary"
[run]
n_steps = 20
seed = 99
[output]
fixture = "{0}/c_fixture.csv"
trace = "{0}/c_trace.csv"
report = "{0}/c_report.json"
"#,
            dir.path().display()
        ),
    ];
    for text in &configs {
        let cfg = ExperimentConfig::from_str(text).unwrap();
        let ov = Overrides::default();
        let mut rounds = Vec::new();
        for _ in 0..2 {
            let fixture = cmd_simulate(&cfg, &ov).unwrap();
            let trace = cmd_filter(&cfg, &fixture, &ov).unwrap();
            let (_, report) = cmd_loglik(&cfg, &fixture, &ov).unwrap();
            rounds.push((
                std::fs::read(&fixture).unwrap(),
                std::fs::read(&trace).unwrap(),
                std::fs::read(report.unwrap()).unwrap(),
            ));
        }
        assert_eq!(rounds[0].0, rounds[1].0, "fixture bytes differ across runs");
        assert_eq!(rounds[0].1, rounds[1].1, "trace bytes differ across runs");
        assert_eq!(rounds[0].2, rounds[1].2, "report bytes differ across runs");
    }
    pass(
        9,
        t0,
        Duration::from_secs(60),
        "identical seeds give byte-identical fixtures, traces and reports",
    );
}
