//! Mean-field coordinate-ascent variational inference with spike-and-slab
//! variational families.
//!
//! A mixture of exponential-family distributions whose supports do not
//! overlap is itself an exponential family, and when each component's
//! sufficient statistics are affine in those of a conjugate prior the
//! mixture stays conjugate. The point-mass-plus-Gaussian case gives exact
//! spike-and-slab coordinate updates with no auxiliary indicator variables.
//!
//! * [`expfam`]: spike-and-slab distributions, the general
//!   [`expfam::NonOverlappingMixture`] density form, conjugate updates, KL.
//! * [`gls`]: summary-statistics regression `β̂ | β ~ N(Xβ, σ²ₑX)` with a
//!   spike-and-slab prior; sparse and naive auxiliary-variable CAVI.
//! * [`ppca`]: sparse probabilistic PCA with a spike-and-slab prior on the
//!   loadings; sparse and naive CAVI.
//! * [`linalg`]: truncated SVD and small helpers shared by the above.

pub mod error;
pub mod expfam;
pub mod gls;
pub mod linalg;
pub mod ppca;

pub use error::{Error, Result};

/// Which variational family a fit uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// Point mass at zero plus a Gaussian slab, treated exactly.
    Sparse,
    /// Bernoulli indicator plus an independent Gaussian, with the spike
    /// replaced by `N(0, sigma_0_2)`.
    Naive { sigma_0_2: f64 },
}

impl Scheme {
    pub fn label(&self) -> String {
        match self {
            Scheme::Sparse => "sparse".to_string(),
            Scheme::Naive { sigma_0_2 } => format!("naive_s0={sigma_0_2:e}"),
        }
    }

    /// Rejects a naive scheme whose spike variance is not positive and finite.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Scheme::Sparse => Ok(()),
            Scheme::Naive { sigma_0_2 } if sigma_0_2 > 0.0 && sigma_0_2.is_finite() => Ok(()),
            Scheme::Naive { sigma_0_2 } => Err(Error::AbsoluteContinuityViolation(format!(
                "naive scheme needs sigma_0_2 > 0 (got {sigma_0_2}); KL to a zero-variance Gaussian is undefined"
            ))),
        }
    }
}
