use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thermal_nrm::config::ExperimentConfig;
use thermal_nrm::dataset::TimeSeriesDataset;
use thermal_nrm::identify::{
    information_matrix, oe_simulate, rls_update, train, train_history, RlsConfig, RlsState, ThetaVector,
};
use thermal_nrm::regressors::{LaggedHistory, RegressorLayout, RegressorSpec, Structure};
use thermal_nrm::sim::run_experiment;

fn dataset(hours: f64) -> TimeSeriesDataset {
    let mut cfg = ExperimentConfig::default();
    cfg.sim.duration = hours;
    run_experiment(&cfg.plant, &cfg.sim).unwrap()
}

fn spec(s: Structure) -> RegressorSpec {
    RegressorSpec::new(s, 1).unwrap()
}

// Exponentially weighted least squares with the initial covariance as a prior.
fn batch_ls(phis: &[Vec<f64>], ys: &[f64], lambda: f64, delta: f64) -> DVector<f64> {
    let n = phis[0].len();
    let big_n = phis.len() as i32;
    let mut a = DMatrix::identity(n, n) * (lambda.powi(big_n) / delta);
    let mut b = DVector::zeros(n);
    for (k, (phi, y)) in phis.iter().zip(ys).enumerate() {
        let w = lambda.powi(big_n - 1 - k as i32);
        let v = DVector::from_column_slice(phi);
        a += &v * v.transpose() * w;
        b += v * (w * y);
    }
    a.lu().solve(&b).unwrap()
}

#[test]
fn rls_matches_weighted_batch_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let truth = [0.8, -1.5, 2.0, 0.3];
    for &lambda in &[1.0, 0.99] {
        let phis: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ys: Vec<f64> = phis
            .iter()
            .map(|p| p.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(-0.1..0.1))
            .collect();
        let mut s = RlsState::new(&ThetaVector::zeros(4), lambda, 1e3);
        for (p, y) in phis.iter().zip(&ys) {
            rls_update(&mut s, p, *y).unwrap();
        }
        let want = batch_ls(&phis, &ys, lambda, 1e3);
        for i in 0..4 {
            assert!(
                (s.theta[i] - want[i]).abs() < 1e-8 * want[i].abs().max(1.0),
                "{} vs {}",
                s.theta[i],
                want[i]
            );
        }
    }
}

#[test]
fn scalar_rls_is_the_running_mean_ratio() {
    // y = c x with no prior weight: theta = sum x y / sum x^2
    let mut s = RlsState::new(&ThetaVector::zeros(1), 1.0, 1e12);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in 1..50 {
        let x = (i as f64).sqrt();
        let y = 3.0 * x + if i % 2 == 0 { 0.1 } else { -0.07 };
        sxy += x * y;
        sxx += x * x;
        rls_update(&mut s, &[x], y).unwrap();
        assert!((s.theta[0] - sxy / sxx).abs() < 1e-9);
    }
}

#[test]
fn covariance_stays_positive_definite_over_long_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut s = RlsState::new(&ThetaVector::zeros(6), 0.999, 1e3);
    for k in 0..100_000 {
        // the last direction is barely excited, which winds up P
        let mut phi: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        phi.push(if k % 1000 == 0 { 1e-3 } else { 0.0 });
        rls_update(&mut s, &phi, rng.random_range(-1.0..1.0)).unwrap();
        if k % 10_000 == 9_999 {
            let p = s.p_matrix();
            assert!((&p - p.transpose()).amax() <= 1e-9 * p.amax());
            let min = p.symmetric_eigenvalues().min();
            assert!(min > 0.0, "min eigenvalue {min} at {k}");
        }
    }
}

#[test]
fn zero_parameters_predict_zero() {
    let ds = dataset(48.0);
    for s in [Structure::Lrm, Structure::NrmMi, Structure::NrmLi] {
        let sp = spec(s);
        let layout = RegressorLayout::new(sp);
        let mut h = LaggedHistory::from_dataset(&ds);
        let y = oe_simulate(&ThetaVector::zeros(layout.len()), &sp, &mut h).unwrap();
        assert_eq!(&y[..layout.max_lag()], &ds.t_r[..layout.max_lag()]);
        assert!(y[layout.max_lag()..].iter().all(|v| *v == 0.0));
    }
}

#[test]
fn persistence_model_holds_the_last_warm_up_value() {
    let ds = dataset(48.0);
    let sp = spec(Structure::Lrm);
    let layout = RegressorLayout::new(sp);
    let mut theta = vec![0.0; layout.len()];
    theta[0] = 1.0;
    let mut h = LaggedHistory::from_dataset(&ds);
    let y = oe_simulate(&ThetaVector::new(theta).unwrap(), &sp, &mut h).unwrap();
    let held = ds.t_r[layout.max_lag() - 1];
    assert!(y[layout.max_lag()..].iter().all(|v| *v == held));
}

#[test]
fn free_run_ignores_measured_output_after_warm_up() {
    let ds = dataset(96.0);
    let sp = spec(Structure::NrmMi);
    let theta = train(&ds, &sp, &RlsConfig::default()).unwrap().theta;
    let mut h = LaggedHistory::from_dataset(&ds);
    let a = oe_simulate(&theta, &sp, &mut h).unwrap();
    let mut h = LaggedHistory::from_dataset(&ds);
    let warm = RegressorLayout::new(sp).max_lag();
    for v in &mut h.t_r[warm..] {
        *v = -100.0;
    }
    assert_eq!(a, oe_simulate(&theta, &sp, &mut h).unwrap());
}

#[test]
fn zero_passes_return_the_initial_guess() {
    let ds = dataset(24.0);
    let sp = spec(Structure::Lrm);
    let theta0 = ThetaVector::new((0..21).map(|i| i as f64 * 0.01).collect()).unwrap();
    let cfg = RlsConfig {
        passes: 0,
        ..RlsConfig::default()
    };
    let r = train_history(LaggedHistory::from_dataset(&ds), &sp, &cfg, &theta0).unwrap();
    assert_eq!(r.theta, theta0);
    assert!(r.errors.is_empty() && r.pass_rmse.is_empty() && r.rls.is_none());
    assert!(r.final_rmse().is_nan());
}

#[test]
fn extra_passes_do_not_hurt_on_noise_free_model_data() {
    let mut cfg = ExperimentConfig::default();
    cfg.sim.duration = 336.0;
    cfg.sim.noise_std = 0.0;
    let ds = run_experiment(&cfg.plant, &cfg.sim).unwrap();
    for s in [Structure::Lrm, Structure::NrmMi] {
        let sp = spec(s);
        let theta = train(&ds, &sp, &RlsConfig::default()).unwrap().theta;
        // data the model class can reproduce exactly
        let mut h = LaggedHistory::from_dataset(&ds);
        h.t_r = oe_simulate(&theta, &sp, &mut h).unwrap();
        h.yhat.clear();
        let rls = RlsConfig {
            passes: 4,
            ..RlsConfig::default()
        };
        let r = train_history(h, &sp, &rls, &ThetaVector::zeros(theta.len())).unwrap();
        for w in r.pass_rmse.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "{s}: pass RMSE {:?}", r.pass_rmse);
        }
    }
}

#[test]
fn default_data_excite_every_regressor_direction() {
    let ds = dataset(672.0);
    for s in [Structure::Lrm, Structure::NrmMi] {
        let sp = spec(s);
        let layout = RegressorLayout::new(sp);
        let theta = train(&ds, &sp, &RlsConfig::default()).unwrap().theta;
        let mut h = LaggedHistory::from_dataset(&ds);
        oe_simulate(&theta, &sp, &mut h).unwrap();

        // numerical rank of the stacked regressors, columns scaled to unit norm
        let rows: Vec<Vec<f64>> = (layout.max_lag()..h.len())
            .map(|k| layout.build(&h, k).unwrap())
            .collect();
        let mut phi = DMatrix::from_fn(rows.len(), layout.len(), |i, j| rows[i][j]);
        for mut c in phi.column_iter_mut() {
            let norm = c.norm();
            c /= norm;
        }
        let sv = phi.singular_values();
        let tol = rows.len() as f64 * f64::EPSILON * sv.max();
        assert!(
            sv.min() > tol,
            "{s}: smallest singular value {:e}, tolerance {tol:e}",
            sv.min()
        );

        // the normal-equation matrix is the square of the same spread
        let m = information_matrix(&sp, &h).unwrap();
        let eig = m.symmetric_eigenvalues();
        assert!(eig.min() > 0.0 && eig.max().is_finite());
    }
}
