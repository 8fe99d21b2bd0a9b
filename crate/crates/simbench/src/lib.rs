//! Simulation studies for the `nomix` fitters: seeded data generators for
//! the summary-statistics regression and sparse PCA experiments, non-VI
//! baselines, metrics, and a parallel replicate runner.

pub mod baselines;
pub mod bench;
pub mod config;
pub mod error;
pub mod metrics;
pub mod rng;
pub mod simulate;

pub use bench::{run_gls_benchmark, run_ppca_benchmark, BenchmarkRecord, BenchmarkRun};
pub use config::{GlsSimConfig, PpcaSimConfig};
pub use error::{Result, SimError};
