//! Quadrature oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss–Hermite rule for `∫ f(x) e^{−x²} dx` via Golub–Welsch.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let off = (i as f64 / 2.0).sqrt();
        jacobi[(i, i - 1)] = off;
        jacobi[(i - 1, i)] = off;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let v0 = eig.eigenvectors[(0, j)];
            (eig.eigenvalues[j], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `E[f(X)]` for `X ~ N(mean, var)`.
pub fn gaussian_expectation(mean: f64, var: f64, nodes: usize, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_hermite(nodes);
    let scale = (2.0 * var).sqrt();
    x.iter().zip(&w).map(|(xi, wi)| wi * f(mean + scale * xi)).sum::<f64>() / std::f64::consts::PI.sqrt()
}

/// Composite Simpson rule with `intervals` (rounded up to even) panels.
pub fn simpson(lo: f64, hi: f64, intervals: usize, f: impl Fn(f64) -> f64) -> f64 {
    let n = intervals + intervals % 2;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

pub fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - d * d / (2.0 * var)
}

/// Spike probability, mean and variance of the slab part of a posterior
/// proportional to `spike·δ₀ + (1 − spike)·exp(log_slab(x))`, by brute-force
/// quadrature on `[lo, hi]`.
pub struct QuadPosterior {
    pub spike_prob: f64,
    pub slab_mean: f64,
    pub slab_var: f64,
}

pub fn quadrature_posterior(
    log_spike: f64,
    log_slab: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    intervals: usize,
) -> QuadPosterior {
    // locate the peak on a coarse grid to keep the exponentials in range
    let peak = (0..=2000)
        .map(|i| log_slab(lo + (hi - lo) * i as f64 / 2000.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let shifted = |x: f64| (log_slab(x) - peak).exp();
    let z = simpson(lo, hi, intervals, shifted);
    let m1 = simpson(lo, hi, intervals, |x| x * shifted(x)) / z;
    let m2 = simpson(lo, hi, intervals, |x| (x - m1) * (x - m1) * shifted(x)) / z;
    let log_z_slab = z.ln() + peak;
    let log_odds = log_spike - log_z_slab;
    QuadPosterior {
        spike_prob: 1.0 / (1.0 + (-log_odds).exp()),
        slab_mean: m1,
        slab_var: m2,
    }
}

/// Posterior of `β ~ p0 δ₀ + (1 − p0) N(0, σ²₁)` given `β̂ ~ N(β, σ²ₑ)`.
pub fn quadrature_exact_1d(beta_hat: f64, p0: f64, sigma_e2: f64, sigma_1_2: f64) -> QuadPosterior {
    quadrature_posterior(
        p0.ln() + normal_log_pdf(beta_hat, 0.0, sigma_e2),
        |b| (1.0 - p0).ln() + normal_log_pdf(b, 0.0, sigma_1_2) + normal_log_pdf(beta_hat, b, sigma_e2),
        -12.0,
        12.0,
        240_000,
    )
}
