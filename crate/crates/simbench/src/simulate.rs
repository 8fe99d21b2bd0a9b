//! Data generators.

use nalgebra::{DMatrix, DVector};
use nomix::gls::GlsProblem;
use nomix::ppca::PpcaProblem;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::{substream, Purpose};
use crate::{GlsSimConfig, PpcaSimConfig, Result, SimError};

#[derive(Debug, Clone)]
pub struct GlsSimulation {
    pub problem: GlsProblem,
    pub true_beta: DVector<f64>,
}

/// `X ~ Wishart(I, df)/df`, `βⱼ ~ p₀δ₀ + (1 − p₀)N(0, σ²₁)` and
/// `β̂ = Xβ + σₑ L z` with `X = LLᵀ`.
///
/// `X` and `β` depend only on `(seed, replicate)`; the noise also depends on
/// the noise-grid index, so every noise level sees the same effects.
pub fn simulate_gls(config: &GlsSimConfig, replicate: usize, sigma_idx: usize) -> Result<GlsSimulation> {
    config.validate()?;
    let sigma_e2 = *config.sigma_e2_grid.get(sigma_idx).ok_or_else(|| {
        SimError::InvalidConfig(format!(
            "sigma index {sigma_idx} out of range for a grid of {}",
            config.sigma_e2_grid.len()
        ))
    })?;
    let p = config.p_dim;
    let x = wishart_identity(
        p,
        config.wishart_df,
        &mut substream(config.seed, replicate, 0, Purpose::Correlation),
    );

    let mut rng = substream(config.seed, replicate, 0, Purpose::Effects);
    let slab_sd = config.sigma_1_2.sqrt();
    let true_beta = DVector::from_fn(p, |_, _| {
        let spike = rng.random::<f64>() < config.p0;
        let z: f64 = rng.sample(StandardNormal);
        if spike {
            0.0
        } else {
            slab_sd * z
        }
    });

    let mut rng = substream(config.seed, replicate, sigma_idx, Purpose::Noise);
    let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let chol = x.clone().cholesky().ok_or(nomix::Error::NotPositiveSemidefinite)?;
    let beta_hat = &x * &true_beta + chol.l() * z * sigma_e2.sqrt();

    let problem = GlsProblem::new(beta_hat, x, sigma_e2, config.sigma_1_2, config.p0)?;
    Ok(GlsSimulation { problem, true_beta })
}

/// `GᵀG / df` for a `df × p` matrix `G` of standard normals.
pub fn wishart_identity(p: usize, df: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(df, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut x = g.tr_mul(&g) / df as f64;
    // exact symmetry
    for j in 0..p {
        for i in (j + 1)..p {
            let v = 0.5 * (x[(i, j)] + x[(j, i)]);
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
    }
    x
}

#[derive(Debug, Clone)]
pub struct PpcaSimulation {
    pub problem: PpcaProblem,
    /// The cluster means, column-centered and divided by the data's column
    /// standard deviations.
    pub signal: DMatrix<f64>,
    pub active_dims: Vec<usize>,
    pub cluster_of: Vec<usize>,
    /// Columns whose standard deviation was zero and were left unscaled.
    pub flat_columns: Vec<usize>,
}

/// Clustered observations: on each of the first `informative_dims` columns,
/// cluster `c` has mean `μ_c ~ N(0, 1)` and observations add unit noise;
/// the remaining columns are pure noise. Columns are then centered and
/// scaled to unit (population) standard deviation.
pub fn simulate_ppca(config: &PpcaSimConfig, replicate: usize) -> Result<PpcaSimulation> {
    config.validate()?;
    let (n, p, d) = (config.n, config.p, config.informative_dims);
    let cluster_of: Vec<usize> = config
        .cluster_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &size)| std::iter::repeat_n(c, size))
        .collect();

    let mut rng = substream(config.seed, replicate, 0, Purpose::ClusterMeans);
    let means = DMatrix::from_fn(config.cluster_sizes.len(), d, |_, _| {
        rng.sample::<f64, _>(StandardNormal)
    });

    let mut rng = substream(config.seed, replicate, 0, Purpose::Observations);
    let mut raw = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut signal = DMatrix::zeros(n, p);
    for j in 0..d {
        for (i, &c) in cluster_of.iter().enumerate() {
            raw[(i, j)] += means[(c, j)];
            signal[(i, j)] = means[(c, j)];
        }
    }

    let mut flat_columns = Vec::new();
    for j in 0..p {
        let mean = raw.column(j).mean();
        let var = raw.column(j).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let scale = if var > 0.0 {
            var.sqrt()
        } else {
            flat_columns.push(j);
            1.0
        };
        raw.column_mut(j).apply(|v| *v = (*v - mean) / scale);
        if j < d {
            let signal_mean = signal.column(j).mean();
            signal.column_mut(j).apply(|v| *v = (*v - signal_mean) / scale);
        }
    }

    let problem = PpcaProblem::new(raw, config.k_fit, config.sigma_e2, config.sigma_1_2, config.p0)?;
    Ok(PpcaSimulation {
        problem,
        signal,
        active_dims: (0..d).collect(),
        cluster_of,
        flat_columns,
    })
}
