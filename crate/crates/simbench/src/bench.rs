//! Replicate runner.
//!
//! Replicates run in parallel on the rayon pool; each owns its substreams
//! and fits single-threaded, and records come back in (replicate, noise
//! level, method) order whatever the scheduling.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use nomix::gls::{fit_gls_naive, fit_gls_sparse};
use nomix::ppca::{fit_ppca, PpcaOptions};
use nomix::Scheme;
use rayon::prelude::*;

use crate::baselines::{baseline_mle, baseline_raw, classical_pca, oracle_pca};
use crate::metrics::{fraction_below, metric_corr, metric_mse, metric_reconstruction, score_alignment};
use crate::simulate::{simulate_gls, simulate_ppca};
use crate::{GlsSimConfig, PpcaSimConfig, Result};

/// Loadings below this magnitude count as zero.
pub const SPARSITY_THRESHOLD: f64 = 1e-5;

/// One method on one simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    pub replicate: usize,
    pub method: String,
    pub sigma_e2: f64,
    pub mse: Option<f64>,
    pub correlation: Option<f64>,
    pub reconstruction_error: Option<f64>,
    pub elbo_final: Option<f64>,
    pub elbo_trace: Vec<f64>,
    /// Fraction of loading means below [`SPARSITY_THRESHOLD`] (PCA methods).
    pub loading_sparsity: Option<f64>,
    /// Per-component absolute score correlation with classical PCA.
    pub score_correlations: Vec<f64>,
    pub wall_time_ms: u64,
    pub error: Option<String>,
}

impl BenchmarkRecord {
    fn new(replicate: usize, method: impl Into<String>, sigma_e2: f64) -> Self {
        Self {
            replicate,
            method: method.into(),
            sigma_e2,
            mse: None,
            correlation: None,
            reconstruction_error: None,
            elbo_final: None,
            elbo_trace: Vec::new(),
            loading_sparsity: None,
            score_correlations: Vec::new(),
            wall_time_ms: 0,
            error: None,
        }
    }

    fn failed(mut self, err: impl ToString) -> Self {
        self.error = Some(err.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRun {
    pub records: Vec<BenchmarkRecord>,
    /// Set when the cancel flag stopped the run before every task finished.
    pub truncated: bool,
}

pub fn gls_methods(config: &GlsSimConfig) -> Vec<String> {
    let mut out = vec![Scheme::Sparse.label()];
    out.extend(
        config
            .sigma_0_2_grid
            .iter()
            .map(|&s| Scheme::Naive { sigma_0_2: s }.label()),
    );
    out.push("raw".into());
    out.push("mle".into());
    out
}

pub fn ppca_methods(config: &PpcaSimConfig) -> Vec<String> {
    let mut out = vec![Scheme::Sparse.label()];
    out.extend(
        config
            .sigma_0_2_grid
            .iter()
            .map(|&s| Scheme::Naive { sigma_0_2: s }.label()),
    );
    out.push("classical".into());
    out.push("oracle".into());
    out
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_millis() as u64)
}

fn vector_metrics(mut rec: BenchmarkRecord, est: &DVector<f64>, truth: &DVector<f64>) -> BenchmarkRecord {
    match metric_mse(est, truth) {
        Ok(m) => rec.mse = Some(m),
        Err(e) => return rec.failed(e),
    }
    match metric_corr(est, truth) {
        Ok(c) => rec.correlation = Some(c),
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

pub fn run_gls_benchmark(config: &GlsSimConfig, cancel: Option<&AtomicBool>) -> Result<BenchmarkRun> {
    config.validate()?;
    let tasks: Vec<(usize, usize)> = (0..config.replicates)
        .flat_map(|r| (0..config.sigma_e2_grid.len()).map(move |s| (r, s)))
        .collect();
    let chunks: Vec<Option<Vec<BenchmarkRecord>>> = tasks
        .par_iter()
        .map(|&(r, s)| {
            if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
                return None;
            }
            Some(gls_replicate(config, r, s))
        })
        .collect();
    Ok(collect_chunks(chunks))
}

fn gls_replicate(config: &GlsSimConfig, replicate: usize, sigma_idx: usize) -> Vec<BenchmarkRecord> {
    let sigma_e2 = config.sigma_e2_grid[sigma_idx];
    let methods = gls_methods(config);
    let sim = match simulate_gls(config, replicate, sigma_idx) {
        Ok(sim) => sim,
        Err(e) => {
            return methods
                .into_iter()
                .map(|m| BenchmarkRecord::new(replicate, m, sigma_e2).failed(&e))
                .collect()
        }
    };
    let truth = &sim.true_beta;
    let mut out = Vec::with_capacity(methods.len());

    let mut schemes = vec![Scheme::Sparse];
    schemes.extend(config.sigma_0_2_grid.iter().map(|&s| Scheme::Naive { sigma_0_2: s }));
    for scheme in schemes {
        let rec = BenchmarkRecord::new(replicate, scheme.label(), sigma_e2);
        let (result, ms) = timed(|| match scheme {
            Scheme::Sparse => fit_gls_sparse(&sim.problem, config.sweeps, config.tol),
            Scheme::Naive { sigma_0_2 } => fit_gls_naive(&sim.problem, sigma_0_2, config.sweeps, config.tol),
        });
        let rec = match result {
            Ok(report) => {
                let mut rec = vector_metrics(rec, &report.posterior_mean(), truth);
                rec.elbo_final = report.final_elbo();
                rec.elbo_trace = report.elbo_trace;
                rec
            }
            Err(e) => rec.failed(e),
        };
        out.push(BenchmarkRecord {
            wall_time_ms: ms,
            ..rec
        });
    }

    let (raw, ms) = timed(|| baseline_raw(&sim.problem));
    let rec = vector_metrics(BenchmarkRecord::new(replicate, "raw", sigma_e2), &raw, truth);
    out.push(BenchmarkRecord {
        wall_time_ms: ms,
        ..rec
    });

    let (mle, ms) = timed(|| baseline_mle(&sim.problem));
    let rec = BenchmarkRecord::new(replicate, "mle", sigma_e2);
    let rec = match mle {
        Ok(est) => vector_metrics(rec, &est, truth),
        Err(e) => rec.failed(e),
    };
    out.push(BenchmarkRecord {
        wall_time_ms: ms,
        ..rec
    });
    out
}

pub fn run_ppca_benchmark(config: &PpcaSimConfig, cancel: Option<&AtomicBool>) -> Result<BenchmarkRun> {
    config.validate()?;
    let chunks: Vec<Option<Vec<BenchmarkRecord>>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
                return None;
            }
            Some(ppca_replicate(config, r))
        })
        .collect();
    Ok(collect_chunks(chunks))
}

fn pca_metrics(
    mut rec: BenchmarkRecord,
    scores: &DMatrix<f64>,
    loadings: &DMatrix<f64>,
    reconstruction: &DMatrix<f64>,
    signal: &DMatrix<f64>,
    reference_scores: Option<&DMatrix<f64>>,
) -> BenchmarkRecord {
    match metric_reconstruction(reconstruction, signal) {
        Ok(e) => rec.reconstruction_error = Some(e),
        Err(e) => return rec.failed(e),
    }
    rec.loading_sparsity = Some(fraction_below(loadings, SPARSITY_THRESHOLD));
    if let Some(reference) = reference_scores {
        match score_alignment(scores, reference) {
            Ok(c) => rec.score_correlations = c,
            Err(e) => rec.error = Some(e.to_string()),
        }
    }
    rec
}

fn ppca_replicate(config: &PpcaSimConfig, replicate: usize) -> Vec<BenchmarkRecord> {
    let sigma_e2 = config.sigma_e2;
    let methods = ppca_methods(config);
    let sim = match simulate_ppca(config, replicate) {
        Ok(sim) => sim,
        Err(e) => {
            return methods
                .into_iter()
                .map(|m| BenchmarkRecord::new(replicate, m, sigma_e2).failed(&e))
                .collect()
        }
    };
    let data = sim.problem.data();
    let k = config.k_fit;
    let (classical, classical_ms) = timed(|| classical_pca(data, k));
    let reference = classical.as_ref().ok().map(|c| c.scores.clone());

    let mut out = Vec::with_capacity(methods.len());
    let mut schemes = vec![Scheme::Sparse];
    schemes.extend(config.sigma_0_2_grid.iter().map(|&s| Scheme::Naive { sigma_0_2: s }));
    let options = PpcaOptions {
        sweeps: config.sweeps,
        elbo_rel_tol: None,
    };
    for scheme in schemes {
        let rec = BenchmarkRecord::new(replicate, scheme.label(), sigma_e2);
        let (result, ms) = timed(|| fit_ppca(&sim.problem, scheme, &options));
        let rec = match result {
            Ok(fit) => {
                let loadings = fit.loading_means();
                let mut rec = pca_metrics(
                    rec,
                    &fit.posterior.mu_z,
                    &loadings,
                    &fit.reconstruct(),
                    &sim.signal,
                    reference.as_ref(),
                );
                rec.elbo_final = fit.final_elbo();
                rec.elbo_trace = fit.elbo_trace;
                rec
            }
            Err(e) => rec.failed(e),
        };
        out.push(BenchmarkRecord {
            wall_time_ms: ms,
            ..rec
        });
    }

    let rec = BenchmarkRecord::new(replicate, "classical", sigma_e2);
    let rec = match &classical {
        Ok(c) => pca_metrics(
            rec,
            &c.scores,
            &c.loadings,
            &c.reconstruct(),
            &sim.signal,
            reference.as_ref(),
        ),
        Err(e) => rec.failed(e),
    };
    out.push(BenchmarkRecord {
        wall_time_ms: classical_ms,
        ..rec
    });

    let (oracle, ms) = timed(|| oracle_pca(data, k, &sim.active_dims));
    let rec = BenchmarkRecord::new(replicate, "oracle", sigma_e2);
    let rec = match oracle {
        Ok(c) => pca_metrics(
            rec,
            &c.scores,
            &c.loadings,
            &c.reconstruct(),
            &sim.signal,
            reference.as_ref(),
        ),
        Err(e) => rec.failed(e),
    };
    out.push(BenchmarkRecord {
        wall_time_ms: ms,
        ..rec
    });
    out
}

fn collect_chunks(chunks: Vec<Option<Vec<BenchmarkRecord>>>) -> BenchmarkRun {
    let truncated = chunks.iter().any(Option::is_none);
    BenchmarkRun {
        records: chunks.into_iter().flatten().flatten().collect(),
        truncated,
    }
}
