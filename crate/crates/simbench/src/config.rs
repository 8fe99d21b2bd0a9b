use serde::{Deserialize, Serialize};

use crate::{Result, SimError};

/// Summary-statistics regression study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlsSimConfig {
    pub p_dim: usize,
    pub p0: f64,
    pub sigma_1_2: f64,
    pub sigma_e2_grid: Vec<f64>,
    pub wishart_df: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Spike variances for the naive scheme, one method per entry.
    pub sigma_0_2_grid: Vec<f64>,
    pub sweeps: usize,
    pub tol: f64,
}

impl Default for GlsSimConfig {
    fn default() -> Self {
        Self {
            p_dim: 1000,
            p0: 0.99,
            sigma_1_2: 1.0,
            sigma_e2_grid: vec![0.05, 0.25, 0.5, 1.0],
            wishart_df: 1000,
            replicates: 100,
            seed: 1,
            sigma_0_2_grid: vec![1.0, 1e-2, 1e-4, 1e-10],
            sweeps: nomix::gls::DEFAULT_SWEEPS,
            tol: nomix::gls::DEFAULT_TOL,
        }
    }
}

impl GlsSimConfig {
    pub fn full_scale() -> Self {
        Self::default()
    }

    pub fn smoke() -> Self {
        Self {
            p_dim: 50,
            wishart_df: 200,
            replicates: 3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.p_dim == 0 {
            return bad("p_dim must be positive".into());
        }
        if self.wishart_df < self.p_dim {
            return bad(format!(
                "wishart_df ({}) must be at least p_dim ({})",
                self.wishart_df, self.p_dim
            ));
        }
        if !(0.0..=1.0).contains(&self.p0) {
            return bad(format!("p0 must lie in [0, 1] (got {})", self.p0));
        }
        if !(self.sigma_1_2 > 0.0 && self.sigma_1_2.is_finite()) {
            return bad(format!("sigma_1_2 must be positive (got {})", self.sigma_1_2));
        }
        if self.sigma_e2_grid.is_empty() {
            return bad("sigma_e2_grid is empty".into());
        }
        if let Some(v) = self.sigma_e2_grid.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return bad(format!("sigma_e2_grid entry {v} must be positive"));
        }
        if let Some(v) = self.sigma_0_2_grid.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return bad(format!("sigma_0_2_grid entry {v} must be positive"));
        }
        if self.replicates == 0 {
            return bad("replicates must be positive".into());
        }
        if self.sweeps == 0 {
            return bad("sweeps must be positive".into());
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return bad(format!("tol must be non-negative (got {})", self.tol));
        }
        Ok(())
    }
}

/// Sparse PCA study with clustered observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpcaSimConfig {
    pub n: usize,
    pub p: usize,
    pub cluster_sizes: Vec<usize>,
    pub informative_dims: usize,
    pub k_fit: usize,
    pub sigma_1_2: f64,
    pub sigma_e2: f64,
    pub p0: f64,
    pub sigma_0_2_grid: Vec<f64>,
    pub sweeps: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for PpcaSimConfig {
    fn default() -> Self {
        Self {
            n: 500,
            p: 10_000,
            cluster_sizes: vec![200, 200, 50, 50],
            informative_dims: 100,
            k_fit: 2,
            sigma_1_2: 0.5,
            sigma_e2: 1.0,
            p0: 1.0 - 100.0 / 10_000.0,
            sigma_0_2_grid: vec![1e-8, 1e-4, 0.05],
            sweeps: nomix::ppca::DEFAULT_SWEEPS,
            replicates: 5,
            seed: 1,
        }
    }
}

impl PpcaSimConfig {
    pub fn full_scale() -> Self {
        Self::default()
    }

    pub fn smoke() -> Self {
        Self {
            n: 60,
            p: 200,
            cluster_sizes: vec![24, 24, 6, 6],
            informative_dims: 20,
            p0: 1.0 - 20.0 / 200.0,
            sweeps: 100,
            replicates: 2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.cluster_sizes.iter().sum::<usize>() != self.n {
            return bad(format!(
                "cluster_sizes sum to {}, expected n = {}",
                self.cluster_sizes.iter().sum::<usize>(),
                self.n
            ));
        }
        if self.informative_dims > self.p {
            return bad(format!(
                "informative_dims ({}) exceeds p ({})",
                self.informative_dims, self.p
            ));
        }
        if self.k_fit == 0 || self.k_fit > self.n.min(self.p) {
            return bad(format!("k_fit ({}) must lie in 1..=min(n, p)", self.k_fit));
        }
        for (name, v) in [("sigma_1_2", self.sigma_1_2), ("sigma_e2", self.sigma_e2)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive (got {v})"));
            }
        }
        if !(self.p0 > 0.0 && self.p0 < 1.0) {
            return bad(format!("p0 must lie in (0, 1) (got {})", self.p0));
        }
        if let Some(v) = self.sigma_0_2_grid.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return bad(format!("sigma_0_2_grid entry {v} must be positive"));
        }
        if self.replicates == 0 || self.sweeps == 0 {
            return bad("replicates and sweeps must be positive".into());
        }
        Ok(())
    }
}
