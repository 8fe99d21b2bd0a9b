use std::sync::atomic::AtomicBool;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use nomix_simbench::baselines::{classical_pca, oracle_pca};
use nomix_simbench::metrics::{metric_corr, metric_mse, metric_reconstruction};
use nomix_simbench::simulate::{simulate_gls, simulate_ppca, wishart_identity};
use nomix_simbench::{run_gls_benchmark, run_ppca_benchmark, GlsSimConfig, PpcaSimConfig, SimError};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[test]
fn all_spike_prior_gives_pure_noise() {
    let config = GlsSimConfig {
        p0: 1.0,
        ..GlsSimConfig::smoke()
    };
    let sim = simulate_gls(&config, 0, 1).unwrap();
    assert!(sim.true_beta.iter().all(|&b| b == 0.0));
    assert!(sim.problem.beta_hat().iter().any(|&b| b != 0.0));
}

#[test]
fn about_ten_nonzero_effects_at_full_size() {
    let config = GlsSimConfig {
        wishart_df: 1000,
        replicates: 1,
        ..GlsSimConfig::full_scale()
    };
    let counts: Vec<f64> = (0..8)
        .map(|r| {
            simulate_gls(&config, r, 0)
                .unwrap()
                .true_beta
                .iter()
                .filter(|b| **b != 0.0)
                .count() as f64
        })
        .collect();
    let (m, _) = mean_sd(&counts);
    // Binomial(1000, 0.01): the mean of 8 draws has sd about 1.1
    assert!((m - 10.0).abs() < 3.0 * (9.9f64 / 8.0).sqrt(), "mean count {m}");
}

#[test]
fn wishart_diagonal_has_unit_mean_and_draws_are_definite() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let diag: Vec<f64> = (0..60)
        .flat_map(|_| {
            let x = wishart_identity(20, 30, &mut rng);
            assert!(x.clone().cholesky().is_some());
            assert_eq!(x, x.transpose());
            x.diagonal().iter().copied().collect::<Vec<_>>()
        })
        .collect();
    let (m, sd) = mean_sd(&diag);
    assert!((m - 1.0).abs() < 3.0 * sd / (diag.len() as f64).sqrt(), "mean diag {m}");
}

#[test]
fn observed_effects_are_centered_on_x_beta() {
    let config = GlsSimConfig {
        p_dim: 30,
        wishart_df: 40,
        sigma_e2_grid: vec![0.5],
        replicates: 200,
        ..GlsSimConfig::default()
    };
    let resid: Vec<DVector<f64>> = (0..200)
        .map(|r| {
            let sim = simulate_gls(&config, r, 0).unwrap();
            sim.problem.beta_hat() - sim.problem.corr() * &sim.true_beta
        })
        .collect();
    for i in 0..10 {
        let xs: Vec<f64> = resid.iter().map(|v| v[i]).collect();
        let (m, sd) = mean_sd(&xs);
        assert!(m.abs() < 4.0 * sd / (xs.len() as f64).sqrt(), "coordinate {i}: {m}");
    }
}

#[test]
fn gls_simulation_is_seeded() {
    let config = GlsSimConfig::smoke();
    let a = simulate_gls(&config, 2, 1).unwrap();
    let b = simulate_gls(&config, 2, 1).unwrap();
    assert_eq!(a.problem, b.problem);
    let c = simulate_gls(&config, 2, 2).unwrap();
    assert_eq!(a.true_beta, c.true_beta);
    assert_eq!(a.problem.corr(), c.problem.corr());
    assert!(simulate_gls(&config, 0, 99).is_err());
}

#[test]
fn config_validation() {
    let bad = GlsSimConfig {
        wishart_df: 10,
        ..GlsSimConfig::smoke()
    };
    assert!(matches!(bad.validate(), Err(SimError::InvalidConfig(_))));
    let bad = PpcaSimConfig {
        cluster_sizes: vec![1, 2],
        ..PpcaSimConfig::smoke()
    };
    assert!(matches!(bad.validate(), Err(SimError::InvalidConfig(_))));
    let bad = PpcaSimConfig {
        informative_dims: 1000,
        ..PpcaSimConfig::smoke()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn ppca_data_is_standardized() {
    let sim = simulate_ppca(&PpcaSimConfig::smoke(), 0).unwrap();
    let x = sim.problem.data();
    for j in 0..x.ncols() {
        let col = x.column(j);
        let m = col.mean();
        let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
        assert!(m.abs() < 1e-12);
        assert!((sd - 1.0).abs() < 1e-12);
    }
    assert!(sim.flat_columns.is_empty());
    assert_eq!(sim.active_dims, (0..20).collect::<Vec<_>>());
}

#[test]
fn no_informative_dims_means_no_signal() {
    let config = PpcaSimConfig {
        informative_dims: 0,
        ..PpcaSimConfig::smoke()
    };
    let sim = simulate_ppca(&config, 0).unwrap();
    assert!(sim.signal.iter().all(|&v| v == 0.0));
}

#[test]
fn clusters_separate_on_active_dims() {
    let sim = simulate_ppca(&PpcaSimConfig::smoke(), 1).unwrap();
    let x = sim.problem.data();
    let centroid_spread = |cols: std::ops::Range<usize>| {
        let mut centroids = vec![vec![0.0; cols.len()]; 4];
        let mut counts = [0.0; 4];
        for (i, &c) in sim.cluster_of.iter().enumerate() {
            counts[c] += 1.0;
            for (slot, j) in cols.clone().enumerate() {
                centroids[c][slot] += x[(i, j)];
            }
        }
        let mut total = 0.0;
        for a in 0..4 {
            for b in (a + 1)..4 {
                total += centroids[a]
                    .iter()
                    .zip(&centroids[b])
                    .map(|(u, v)| (u / counts[a] - v / counts[b]).powi(2))
                    .sum::<f64>()
                    .sqrt();
            }
        }
        total / cols.len() as f64
    };
    assert!(centroid_spread(0..20) > 2.0 * centroid_spread(20..40));
}

#[test]
fn classical_pca_properties() {
    let sim = simulate_ppca(&PpcaSimConfig::smoke(), 0).unwrap();
    let fit = classical_pca(sim.problem.data(), 2).unwrap();
    let ltl = fit.loadings.transpose() * &fit.loadings;
    assert!(ltl[(0, 1)].abs() < 1e-10);
    assert_relative_eq!(ltl[(0, 0)], 1.0, epsilon = 1e-10);
    assert!(matches!(
        classical_pca(&DMatrix::zeros(5, 4), 1),
        Err(SimError::Model(nomix::Error::RankDeficient { k: 1 }))
    ));

    let u = DMatrix::from_row_slice(3, 1, &[0.6, 0.0, 0.8]);
    let v = DMatrix::from_row_slice(4, 1, &[0.5, 0.5, 0.5, 0.5]);
    let exact = classical_pca(&(&u * v.transpose() * 3.0), 1).unwrap();
    assert_relative_eq!(exact.scores, &u * 3.0, epsilon = 1e-12);
    assert_relative_eq!(exact.loadings, v, epsilon = 1e-12);
}

#[test]
fn oracle_pca_zeroes_inactive_rows_and_reconstructs_better() {
    let sim = simulate_ppca(&PpcaSimConfig::smoke(), 0).unwrap();
    let oracle = oracle_pca(sim.problem.data(), 2, &sim.active_dims).unwrap();
    for r in 20..200 {
        assert!(oracle.loadings.row(r).iter().all(|&v| v == 0.0));
    }
    let classical = classical_pca(sim.problem.data(), 2).unwrap();
    let e_oracle = metric_reconstruction(&oracle.reconstruct(), &sim.signal).unwrap();
    let e_classical = metric_reconstruction(&classical.reconstruct(), &sim.signal).unwrap();
    assert!(e_oracle <= e_classical);
    assert!(oracle_pca(sim.problem.data(), 2, &[500]).is_err());
}

#[test]
fn gls_smoke_run_is_complete_and_reproducible() {
    let config = GlsSimConfig {
        replicates: 1,
        ..GlsSimConfig::smoke()
    };
    let run = run_gls_benchmark(&config, None).unwrap();
    assert!(!run.truncated);
    assert_eq!(run.records.len(), 4 * 7);
    for r in &run.records {
        assert!(r.error.is_none(), "{}: {:?}", r.method, r.error);
        assert!(r.mse.unwrap().is_finite() && r.mse.unwrap() >= 0.0);
        assert!((-1.0..=1.0).contains(&r.correlation.unwrap()));
    }
    let again = run_gls_benchmark(&config, None).unwrap();
    let strip = |rs: &[nomix_simbench::BenchmarkRecord]| {
        rs.iter()
            .map(|r| {
                (
                    r.replicate,
                    r.method.clone(),
                    r.mse.map(f64::to_bits),
                    r.elbo_trace.clone(),
                )
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&run.records), strip(&again.records));
}

#[test]
fn gls_method_ordering_at_moderate_size() {
    let config = GlsSimConfig {
        p_dim: 200,
        // df = P, as in the full study, keeps X badly conditioned
        wishart_df: 200,
        sigma_e2_grid: vec![0.5],
        sigma_0_2_grid: vec![1e-2],
        replicates: 20,
        ..GlsSimConfig::default()
    };
    let run = run_gls_benchmark(&config, None).unwrap();
    // replicates whose effects are all zero have no correlation and are skipped
    let mean = |method: &str, pick: fn(&nomix_simbench::BenchmarkRecord) -> Option<f64>| {
        let xs: Vec<f64> = run
            .records
            .iter()
            .filter(|r| r.method == method)
            .filter_map(pick)
            .collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    let corr = |r: &nomix_simbench::BenchmarkRecord| r.correlation;
    let mse = |r: &nomix_simbench::BenchmarkRecord| r.mse;
    assert!(mean("sparse", corr) >= mean("raw", corr));
    assert!(mean("mle", mse) > 100.0 * mean("raw", mse));
}

#[test]
fn ppca_smoke_run() {
    let run = run_ppca_benchmark(&PpcaSimConfig::smoke(), None).unwrap();
    assert_eq!(run.records.len(), 2 * 6);
    for r in &run.records {
        assert!(r.error.is_none(), "{}: {:?}", r.method, r.error);
        assert!(r.reconstruction_error.unwrap().is_finite());
        assert_eq!(r.score_correlations.len(), 2);
    }
}

#[test]
fn cancelled_run_is_truncated() {
    let flag = AtomicBool::new(true);
    let run = run_gls_benchmark(&GlsSimConfig::smoke(), Some(&flag)).unwrap();
    assert!(run.truncated);
    assert!(run.records.is_empty());
}

fn pearson_by_sums(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let saa: f64 = a.iter().map(|x| x * x).sum();
    let sbb: f64 = b.iter().map(|y| y * y).sum();
    (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
}

proptest! {
    #[test]
    fn correlation_matches_sum_formula(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (va, vb) = (DVector::from_vec(a.clone()), DVector::from_vec(b.clone()));
        match metric_corr(&va, &vb) {
            Ok(r) => prop_assert!((r - pearson_by_sums(&a, &b)).abs() < 1e-9),
            Err(e) => prop_assert_eq!(e, SimError::CorrelationUndefined),
        }
        let mse: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
        prop_assert!((metric_mse(&va, &vb).unwrap() - mse).abs() <= 1e-12 * mse.max(1.0));
    }
}
