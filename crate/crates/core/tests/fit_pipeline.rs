use isogplm_core::fit::{fit_with_k, jackknife_with, leverage_weights, ramp_start};
use isogplm_core::{
    bic_range, bic_select, contaminate, fit, generate, is_feasible, jackknife_se, BasisSize, Contamination, Dataset,
    Error, Estimator, EtaModel, FitConfig, FitFlag, Nuisance, ResponseScale, ScenarioConfig, SplineBasis,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn fixed(k: usize) -> FitConfig {
    FitConfig { basis_size: BasisSize::Fixed(k), ..FitConfig::default() }
}

fn scenario(n: usize, eta: EtaModel) -> ScenarioConfig {
    ScenarioConfig { n, eta, ..ScenarioConfig::default() }
}

/// Unconstrained Gamma log-link maximum likelihood by IRLS: with the log
/// link the working weights are constant, so each step is least squares on
/// `Xθ + (y − μ)/μ`.
fn gamma_irls(data: &Dataset, basis: &SplineBasis) -> Vec<f64> {
    let n = data.n();
    let k = basis.dim();
    let design = basis.design(&data.t).unwrap();
    let x = DMatrix::from_fn(n, 1 + k, |i, j| if j == 0 { data.x[i] } else { design[i * k + j - 1] });
    let y: Vec<f64> = data.response.iter().map(|z| z.exp()).collect();
    let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
    // Least squares on the log scale is a safe start.
    let logy = DVector::from_vec(data.response.clone());
    let mut theta = &xtx_inv * x.transpose() * logy;
    for _ in 0..200 {
        let eta = &x * &theta;
        let z = DVector::from_fn(n, |i, _| eta[i] + (y[i] - eta[i].exp()) / eta[i].exp());
        let next = &xtx_inv * x.transpose() * z;
        let done = (&next - &theta).norm() < 1e-14;
        theta = next;
        if done {
            break;
        }
    }
    theta.iter().copied().collect()
}

#[test]
fn classical_fit_is_gamma_maximum_likelihood() {
    let mut data = generate(&scenario(300, EtaModel::Model1), 0).unwrap();
    // A steep trend keeps the unconstrained optimum strictly increasing.
    for i in 0..data.n() {
        data.response[i] += 4.0 * data.t[i];
    }
    let basis = SplineBasis::uniform(6, 4).unwrap();
    let want = gamma_irls(&data, &basis);
    assert!(is_feasible(&want[1..]), "oracle must be interior for this check: {want:?}");
    let got = fit(&data, Estimator::Classical, &fixed(6)).unwrap();
    for (g, w) in got.theta().iter().zip(&want) {
        assert!((g - w).abs() < 1e-6, "{:?} vs {want:?}", got.theta());
    }
    assert!(got.report.active_set.is_empty());
}

#[test]
fn robust_fit_on_clean_data() {
    let data = generate(&scenario(100, EtaModel::Model1), 3).unwrap();
    let rob = fit(&data, Estimator::Robust, &fixed(5)).unwrap();
    let cl = fit(&data, Estimator::Classical, &fixed(5)).unwrap();
    assert!(is_feasible(&rob.lambda));
    assert!((rob.beta[0] - cl.beta[0]).abs() < 0.1, "{} vs {}", rob.beta[0], cl.beta[0]);
    let Nuisance::Alpha(alpha) = rob.nuisance else { panic!("{:?}", rob.nuisance) };
    assert!(alpha > 1.0 && alpha < 9.0, "alpha {alpha}");
    assert!(rob.tuning.unwrap() >= rob.s_scale.unwrap());
    assert!(rob.converged(), "{:?}", rob.flags);
}

#[test]
fn robust_fit_is_deterministic_under_a_seed() {
    let data = generate(&scenario(100, EtaModel::Model1), 4).unwrap();
    let a = fit(&data, Estimator::Robust, &FitConfig::default()).unwrap();
    let b = fit(&data, Estimator::Robust, &FitConfig::default()).unwrap();
    assert_eq!(a.theta(), b.theta());
    assert_eq!(a.bic_curve, b.bic_curve);
}

#[test]
fn robust_fit_resists_response_contamination() {
    let sc = ScenarioConfig { contamination: Contamination::C2, ..scenario(100, EtaModel::Model1) };
    let clean = generate(&sc, 1).unwrap();
    let dirty = contaminate(&clean, Contamination::C2, &sc, 1).unwrap();
    let rob = fit(&dirty, Estimator::Robust, &fixed(5)).unwrap();
    let cl = fit(&dirty, Estimator::Classical, &fixed(5)).unwrap();
    assert!((rob.beta[0] - 2.0).abs() < 0.25, "robust {}", rob.beta[0]);
    assert!((cl.beta[0] - 2.0).abs() > 0.5, "classical {}", cl.beta[0]);
}

#[test]
fn raw_and_log_scale_responses_agree() {
    let logd = generate(&scenario(80, EtaModel::Model1), 2).unwrap();
    let raw = Dataset::new(logd.response.iter().map(|z| z.exp()).collect(), logd.x.clone(), logd.t.clone(), 1)
        .unwrap()
        .with_scale(ResponseScale::Raw);
    let a = fit(&logd, Estimator::Classical, &fixed(5)).unwrap();
    let b = fit(&raw, Estimator::Classical, &fixed(5)).unwrap();
    assert!((a.beta[0] - b.beta[0]).abs() < 1e-9);
    let bad = Dataset::new(vec![1.0, -1.0], vec![0.0, 1.0], vec![0.1, 0.2], 1).unwrap();
    assert!(matches!(fit(&bad, Estimator::Classical, &fixed(4)), Err(Error::Argument(_) | Error::Domain(_))));
}

fn identity_data(n: usize, outliers: bool, noise: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = Normal::new(0.0, noise.max(1e-300)).unwrap();
    let (mut y, mut x, mut t) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        let xi: f64 = rng.random::<f64>() * 4.0 - 2.0;
        let ti: f64 = rng.random();
        let mut yi = 2.0 * xi + 3.0 * ti * ti + if noise > 0.0 { eps.sample(&mut rng) } else { 0.0 };
        if outliers && i % 10 == 0 {
            yi += 25.0;
        }
        y.push(yi);
        x.push(xi);
        t.push(ti);
    }
    Dataset::new(y, x, t, 1).unwrap()
}

#[test]
fn identity_link_fit_with_outliers() {
    let data = identity_data(200, true, 0.5, 8);
    let f = fit(&data, Estimator::Identity, &fixed(6)).unwrap();
    assert!((f.beta[0] - 2.0).abs() < 0.15, "beta {}", f.beta[0]);
    let Nuisance::Sigma(s) = f.nuisance else { panic!() };
    assert!(s > 0.3 && s < 0.8, "sigma {s}");
    assert!(is_feasible(&f.lambda));
}

#[test]
fn identity_exact_fit_is_flagged() {
    let data = identity_data(60, false, 0.0, 9);
    // η(t) = 3t² is a cubic spline, so the model interpolates.
    let f = fit(&data, Estimator::Identity, &fixed(4)).unwrap();
    assert!(f.flags.contains(&FitFlag::ExactFit));
    assert_eq!(f.nuisance, Nuisance::Sigma(0.0));
}

fn logistic_data(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).unwrap();
    let (mut y, mut x, mut t) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let xi: f64 = std.sample(&mut rng);
        let ti: f64 = rng.random();
        let p = 1.0 / (1.0 + (-(xi + 2.0 * ti - 1.0)).exp());
        y.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
        x.push(xi);
        t.push(ti);
    }
    Dataset::new(y, x, t, 1).unwrap()
}

#[test]
fn logistic_fit_recovers_the_slope() {
    let data = logistic_data(600, 10);
    let f = fit(&data, Estimator::Logistic, &fixed(4)).unwrap();
    assert!((f.beta[0] - 1.0).abs() < 0.35, "beta {}", f.beta[0]);
    assert_eq!(f.nuisance, Nuisance::None);
    assert!(!f.flags.contains(&FitFlag::Separation));
}

#[test]
fn logistic_rejects_non_binary_and_flags_separation() {
    let mut data = logistic_data(60, 11);
    data.response[3] = 0.5;
    assert!(matches!(fit(&data, Estimator::Logistic, &fixed(4)), Err(Error::Domain(_))));
    let mut sep = logistic_data(60, 12);
    for i in 0..sep.n() {
        sep.response[i] = if sep.x[i] > 0.0 { 1.0 } else { 0.0 };
    }
    let f = fit(&sep, Estimator::Logistic, &fixed(4)).unwrap();
    assert!(f.flags.contains(&FitFlag::Separation), "{:?}", f.flags);
}

#[test]
fn bic_scans_the_default_range_and_picks_the_first_local_minimum() {
    assert_eq!(bic_range(100), (4, 13));
    let data = generate(&scenario(100, EtaModel::Model2), 5).unwrap();
    let cfg = FitConfig::default();
    let sel = bic_select(&data, Estimator::Classical, &cfg, None).unwrap();
    let ks: Vec<usize> = sel.curve.iter().map(|c| c.0).collect();
    assert_eq!(ks, (4..=13).collect::<Vec<_>>());
    let vals: Vec<f64> = sel.curve.iter().map(|c| c.1.unwrap()).collect();
    let first_min = (0..vals.len())
        .find(|&i| (i == 0 || vals[i] < vals[i - 1]) && (i + 1 == vals.len() || vals[i] <= vals[i + 1]))
        .unwrap();
    assert_eq!(sel.k, ks[first_min]);
    assert_eq!(sel.fit.k, sel.k);
    let early = bic_select(&data, Estimator::Classical, &FitConfig { bic_early_stop: true, ..cfg }, None).unwrap();
    assert_eq!(early.k, sel.k);
    assert_eq!(early.fit.theta(), sel.fit.theta());
}

#[test]
fn jackknife_matches_the_leave_one_out_formula() {
    let data = generate(&scenario(40, EtaModel::Model1), 6).unwrap();
    let cfg = fixed(4);
    let jk = jackknife_with(&data, Estimator::Classical, &cfg, 4, None).unwrap();
    let betas: Vec<f64> =
        (0..40).map(|i| fit_with_k(&data.without(i), Estimator::Classical, 4, &cfg, None).unwrap().beta[0]).collect();
    let mean = betas.iter().sum::<f64>() / 40.0;
    let want = (39.0 / 40.0 * betas.iter().map(|b| (b - mean).powi(2)).sum::<f64>()).sqrt();
    assert!((jk.sd[0] - want).abs() < 1e-7 * want, "{} vs {want}", jk.sd[0]);
    assert_eq!(jk.failed, 0);
    // Warm starts reach the same minimizers.
    let warm = jackknife_se(&data, Estimator::Classical, &cfg).unwrap();
    assert!((warm.sd[0] - want).abs() < 1e-6 * want);
}

#[test]
fn jackknife_needs_twenty_observations() {
    let data = generate(&scenario(19, EtaModel::Model1), 0).unwrap();
    assert!(jackknife_se(&data, Estimator::Classical, &fixed(4)).is_err());
}

#[test]
fn leverage_weights_drop_outlying_carriers() {
    let mut data = generate(&scenario(50, EtaModel::Model1), 7).unwrap();
    data.x[0] = 40.0;
    let w = leverage_weights(&data, 4.685).unwrap();
    assert_eq!(w[0], 0.0);
    assert!(w[1..].iter().all(|v| *v > 0.0 && *v <= 1.0));
}

#[test]
fn ramp_start_is_feasible() {
    assert_eq!(ramp_start(5), vec![0.0, 0.0, 1.0, 2.0, 3.0]);
}

#[test]
fn invalid_configuration_is_rejected() {
    let data = generate(&scenario(50, EtaModel::Model1), 0).unwrap();
    let bad = FitConfig { efficiency: 1.5, ..FitConfig::default() };
    assert!(matches!(fit(&data, Estimator::Robust, &bad), Err(Error::Argument(_))));
    assert!(fit(&data, Estimator::Robust, &fixed(3)).is_err());
}
