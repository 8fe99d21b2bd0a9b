//! Sparse probabilistic PCA.
//!
//! ```text
//! W_pk ~ p₀δ₀ + (1 − p₀) N(0, σ²₁)
//! Z_n  ~ N(0, I_K)
//! X_n | Z_n, W ~ N(W Z_n, σ²ₑ I_P)
//! ```
//!
//! The variational family factorizes over the rows `Z_n` (Gaussian, with a
//! covariance shared by all rows because its optimum does not depend on
//! `n`) and over the loadings `W_pk` (spike-and-slab for the sparse scheme,
//! Gaussian times an independent Bernoulli indicator for the naive one).

use nalgebra::{DMatrix, DVector};

use crate::expfam::{
    kl_bernoulli, kl_gaussian, kl_spike_slab, logistic, logit, spike_slab_posterior_parts, GaussianComponent,
    GaussianLikelihoodEvidence, SpikeSlabGaussian, LN_2PI,
};
use crate::linalg::{spd_inverse, spd_log_det, truncated_svd};
use crate::{Error, Result, Scheme};

pub const DEFAULT_SWEEPS: usize = 250;
/// Spike probability every loading starts from.
pub const INITIAL_PSI: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PpcaProblem {
    data: DMatrix<f64>,
    k: usize,
    sigma_e2: f64,
    sigma_1_2: f64,
    p0: f64,
}

impl PpcaProblem {
    /// `data` is `N × P` with one observation per row.
    pub fn new(data: DMatrix<f64>, k: usize, sigma_e2: f64, sigma_1_2: f64, p0: f64) -> Result<Self> {
        let (n, p) = data.shape();
        if k == 0 || k > n.min(p) {
            return Err(Error::InvalidParameter(format!(
                "k = {k} must lie in 1..={} for {n}x{p} data",
                n.min(p)
            )));
        }
        if let Some(idx) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "data entry ({}, {}) is not finite",
                idx % n,
                idx / n
            )));
        }
        for (name, v) in [("sigma_e2", sigma_e2), ("sigma_1_2", sigma_1_2)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be positive (got {v})")));
            }
        }
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(Error::InvalidParameter(format!("p0 must lie in (0, 1) (got {p0})")));
        }
        Ok(Self {
            data,
            k,
            sigma_e2,
            sigma_1_2,
            p0,
        })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sigma_e2(&self) -> f64 {
        self.sigma_e2
    }

    pub fn sigma_1_2(&self) -> f64 {
        self.sigma_1_2
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    /// Same problem with a different noise variance.
    pub fn with_sigma_e2(&self, sigma_e2: f64) -> Result<Self> {
        Self::new(self.data.clone(), self.k, sigma_e2, self.sigma_1_2, self.p0)
    }

    fn prior(&self) -> SpikeSlabGaussian {
        SpikeSlabGaussian {
            spike_prob: self.p0,
            slab: GaussianComponent {
                mean: 0.0,
                variance: self.sigma_1_2,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpcaPosterior {
    /// `N × K` score means.
    pub mu_z: DMatrix<f64>,
    /// `K × K` score covariance, shared by every row.
    pub cov_z: DMatrix<f64>,
    /// `P × K` slab means.
    pub mu_w: DMatrix<f64>,
    /// `P × K` slab variances.
    pub s2_w: DMatrix<f64>,
    /// `P × K` spike probabilities (`q(Y_pk = 0)` for the naive scheme).
    pub psi_w: DMatrix<f64>,
}

impl PpcaPosterior {
    /// `E[W]`.
    pub fn loading_means(&self, scheme: Scheme) -> DMatrix<f64> {
        match scheme {
            Scheme::Sparse => self.mu_w.zip_map(&self.psi_w, |m, psi| (1.0 - psi) * m),
            Scheme::Naive { .. } => self.mu_w.clone(),
        }
    }

    /// Elementwise `E[W_pk²]`.
    pub fn loading_second_moments(&self, scheme: Scheme) -> DMatrix<f64> {
        let raw = self.mu_w.zip_map(&self.s2_w, |m, s2| m * m + s2);
        match scheme {
            Scheme::Sparse => raw.zip_map(&self.psi_w, |r, psi| (1.0 - psi) * r),
            Scheme::Naive { .. } => raw,
        }
    }

    /// `E[WᵀW]`: products of means off the diagonal, summed second moments
    /// on it.
    pub fn wtw(&self, scheme: Scheme) -> DMatrix<f64> {
        let ew = self.loading_means(scheme);
        let e2 = self.loading_second_moments(scheme);
        let mut out = ew.tr_mul(&ew);
        for k in 0..out.nrows() {
            out[(k, k)] = e2.column(k).sum();
        }
        out
    }

    /// `Σ_n E[Z_n Z_nᵀ] = μ_Zᵀ μ_Z + N S`.
    pub fn score_gram(&self) -> DMatrix<f64> {
        self.mu_z.tr_mul(&self.mu_z) + &self.cov_z * self.mu_z.nrows() as f64
    }

    /// `E[Z] E[W]ᵀ`, the posterior mean of `Z Wᵀ` under mean-field independence.
    pub fn reconstruct(&self, scheme: Scheme) -> DMatrix<f64> {
        reconstruct(self, scheme)
    }

    fn check_shapes(&self, n: usize, p: usize, k: usize) -> Result<()> {
        let ok = self.mu_z.shape() == (n, k)
            && self.cov_z.shape() == (k, k)
            && self.mu_w.shape() == (p, k)
            && self.s2_w.shape() == (p, k)
            && self.psi_w.shape() == (p, k);
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "posterior shapes do not match N = {n}, P = {p}, K = {k}"
            )))
        }
    }
}

pub fn reconstruct(posterior: &PpcaPosterior, scheme: Scheme) -> DMatrix<f64> {
    &posterior.mu_z * posterior.loading_means(scheme).transpose()
}

/// Starting point from a rank-`K` SVD `X ≈ U Σ Vᵀ`: `μ_Z = U`, `S = I`,
/// `μ_W = V Σ`, `s²_W = 1`, `ψ = 1e-10`.
pub fn ppca_init(problem: &PpcaProblem) -> Result<PpcaPosterior> {
    let k = problem.k;
    let svd = truncated_svd(&problem.data, k)?;
    let mut mu_w = svd.v;
    for (j, s) in svd.singular_values.iter().enumerate() {
        mu_w.column_mut(j).scale_mut(*s);
    }
    let p = problem.p();
    Ok(PpcaPosterior {
        mu_z: svd.u,
        cov_z: DMatrix::identity(k, k),
        mu_w,
        s2_w: DMatrix::from_element(p, k, 1.0),
        psi_w: DMatrix::from_element(p, k, INITIAL_PSI),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpcaOptions {
    pub sweeps: usize,
    /// Stop once the relative ELBo change over a sweep falls below this.
    pub elbo_rel_tol: Option<f64>,
}

impl Default for PpcaOptions {
    fn default() -> Self {
        Self {
            sweeps: DEFAULT_SWEEPS,
            elbo_rel_tol: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpcaFit {
    pub posterior: PpcaPosterior,
    pub elbo_trace: Vec<f64>,
    pub scheme: Scheme,
    pub sweeps: usize,
}

impl PpcaFit {
    pub fn loading_means(&self) -> DMatrix<f64> {
        self.posterior.loading_means(self.scheme)
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        reconstruct(&self.posterior, self.scheme)
    }

    pub fn final_elbo(&self) -> Option<f64> {
        self.elbo_trace.last().copied()
    }
}

pub fn fit_ppca_sparse(problem: &PpcaProblem, sweeps: usize) -> Result<PpcaFit> {
    fit_ppca(
        problem,
        Scheme::Sparse,
        &PpcaOptions {
            sweeps,
            elbo_rel_tol: None,
        },
    )
}

pub fn fit_ppca_naive(problem: &PpcaProblem, sigma_0_2: f64, sweeps: usize) -> Result<PpcaFit> {
    fit_ppca(
        problem,
        Scheme::Naive { sigma_0_2 },
        &PpcaOptions {
            sweeps,
            elbo_rel_tol: None,
        },
    )
}

pub fn fit_ppca(problem: &PpcaProblem, scheme: Scheme, options: &PpcaOptions) -> Result<PpcaFit> {
    scheme.validate()?;
    let init = ppca_init(problem)?;
    fit_ppca_from(problem, scheme, init, options)
}

/// Coordinate ascent from an explicit starting point.
///
/// Each sweep updates the shared score covariance and every score mean in
/// one block, then visits the loadings row by row. Sparse loadings take
/// their joint conjugate optimum; naive loadings update the indicator and
/// then the Gaussian factor.
pub fn fit_ppca_from(
    problem: &PpcaProblem,
    scheme: Scheme,
    init: PpcaPosterior,
    options: &PpcaOptions,
) -> Result<PpcaFit> {
    scheme.validate()?;
    if options.sweeps == 0 {
        return Err(Error::InvalidParameter("sweeps must be at least 1".into()));
    }
    let (n, p, k) = (problem.n(), problem.p(), problem.k);
    init.check_shapes(n, p, k)?;
    let x = &problem.data;
    let sigma_e2 = problem.sigma_e2;
    let sigma_1_2 = problem.sigma_1_2;
    let prior = problem.prior();
    let prior_log_odds = logit(problem.p0);
    let x_sq = x.norm_squared();

    let mut post = init;
    let mut trace = Vec::with_capacity(options.sweeps);
    let mut done = 0;

    for _ in 0..options.sweeps {
        // scores
        let ew = post.loading_means(scheme);
        let precision = post.wtw(scheme) / sigma_e2 + DMatrix::<f64>::identity(k, k);
        post.cov_z = spd_inverse(precision)
            .map_err(|_| Error::divergence("score covariance", "precision is not positive definite"))?;
        post.mu_z = (x * &ew) * &post.cov_z / sigma_e2;

        // loadings
        let gram = post.score_gram();
        let xtz = x.tr_mul(&post.mu_z);
        let mut ew = ew;
        for row in 0..p {
            for col in 0..k {
                let mut lin = xtz[(row, col)];
                for l in (0..k).filter(|&l| l != col) {
                    lin -= ew[(row, l)] * gram[(col, l)];
                }
                let gkk = gram[(col, col)];
                match scheme {
                    Scheme::Sparse => {
                        let evidence = GaussianLikelihoodEvidence::new(-0.5 * gkk / sigma_e2, lin / sigma_e2);
                        let (slab, log_odds) = spike_slab_posterior_parts(&prior, &evidence)
                            .map_err(|e| Error::divergence(format!("loading ({row}, {col})"), e.to_string()))?;
                        post.mu_w[(row, col)] = slab.mean;
                        post.s2_w[(row, col)] = slab.variance;
                        post.psi_w[(row, col)] = logistic(log_odds);
                    }
                    Scheme::Naive { sigma_0_2 } => {
                        let m = post.mu_w[(row, col)];
                        let e2 = m * m + post.s2_w[(row, col)];
                        let log_odds = prior_log_odds + 0.5 * (sigma_1_2.ln() - sigma_0_2.ln())
                            - 0.5 * e2 * (1.0 / sigma_0_2 - 1.0 / sigma_1_2);
                        let psi = logistic(log_odds);
                        let s2 = 1.0 / (gkk / sigma_e2 + psi / sigma_0_2 + (1.0 - psi) / sigma_1_2);
                        post.psi_w[(row, col)] = psi;
                        post.s2_w[(row, col)] = s2;
                        post.mu_w[(row, col)] = s2 * lin / sigma_e2;
                    }
                }
                let (m, s2, psi) = (post.mu_w[(row, col)], post.s2_w[(row, col)], post.psi_w[(row, col)]);
                if !(m.is_finite() && s2.is_finite() && psi.is_finite()) {
                    return Err(Error::divergence(
                        format!("loading ({row}, {col})"),
                        format!("psi {psi}, mu {m}, s2 {s2}"),
                    ));
                }
                ew[(row, col)] = match scheme {
                    Scheme::Sparse => (1.0 - psi) * m,
                    Scheme::Naive { .. } => m,
                };
            }
        }

        let terms = elbo_terms_with(problem, &post, scheme, &xtz, x_sq)?;
        let elbo = terms.total();
        if !elbo.is_finite() {
            return Err(Error::divergence("elbo", format!("{elbo}")));
        }
        let previous = trace.last().copied();
        trace.push(elbo);
        done += 1;
        if let (Some(tol), Some(prev)) = (options.elbo_rel_tol, previous) {
            if (elbo - prev).abs() <= tol * elbo.abs() {
                break;
            }
        }
    }

    Ok(PpcaFit {
        posterior: post,
        elbo_trace: trace,
        scheme,
        sweeps: done,
    })
}

/// ELBo split into its expected log-likelihood and the two KL blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboTerms {
    pub expected_loglik: f64,
    pub kl_scores: f64,
    pub kl_loadings: f64,
}

impl ElboTerms {
    pub fn total(&self) -> f64 {
        self.expected_loglik - self.kl_scores - self.kl_loadings
    }
}

pub fn elbo_ppca(problem: &PpcaProblem, posterior: &PpcaPosterior, scheme: Scheme) -> Result<ElboTerms> {
    scheme.validate()?;
    posterior.check_shapes(problem.n(), problem.p(), problem.k)?;
    let xtz = problem.data.tr_mul(&posterior.mu_z);
    elbo_terms_with(problem, posterior, scheme, &xtz, problem.data.norm_squared())
}

fn elbo_terms_with(
    problem: &PpcaProblem,
    post: &PpcaPosterior,
    scheme: Scheme,
    xtz: &DMatrix<f64>,
    x_sq: f64,
) -> Result<ElboTerms> {
    let (n, p, k) = (problem.n() as f64, problem.p() as f64, problem.k);
    let ew = post.loading_means(scheme);
    let gram = post.score_gram();
    let cross = ew.dot(xtz);
    let quad = (post.wtw(scheme) * &gram).trace();
    let expected_loglik =
        -0.5 * n * p * (LN_2PI + problem.sigma_e2.ln()) - 0.5 * (x_sq - 2.0 * cross + quad) / problem.sigma_e2;

    let log_det =
        spd_log_det(&post.cov_z).map_err(|_| Error::divergence("score covariance", "not positive definite"))?;
    let kl_scores = 0.5 * n * (post.cov_z.trace() - k as f64 - log_det) + 0.5 * post.mu_z.norm_squared();

    let mut kl_loadings = 0.0;
    let slab_prior = GaussianComponent {
        mean: 0.0,
        variance: problem.sigma_1_2,
    };
    match scheme {
        Scheme::Sparse => {
            let prior = problem.prior();
            for idx in 0..post.mu_w.len() {
                let q = SpikeSlabGaussian {
                    spike_prob: post.psi_w[idx],
                    slab: GaussianComponent {
                        mean: post.mu_w[idx],
                        variance: post.s2_w[idx],
                    },
                };
                kl_loadings += kl_spike_slab(&q, &prior)?;
            }
        }
        Scheme::Naive { sigma_0_2 } => {
            let spike = GaussianComponent {
                mean: 0.0,
                variance: sigma_0_2,
            };
            for idx in 0..post.mu_w.len() {
                let psi = post.psi_w[idx];
                let q = GaussianComponent {
                    mean: post.mu_w[idx],
                    variance: post.s2_w[idx],
                };
                kl_loadings += kl_bernoulli(psi, problem.p0)?
                    + psi * kl_gaussian(&q, &spike)
                    + (1.0 - psi) * kl_gaussian(&q, &slab_prior);
            }
        }
    }
    Ok(ElboTerms {
        expected_loglik,
        kl_scores,
        kl_loadings,
    })
}

/// Fraction of entries with absolute value below `threshold`.
pub fn fraction_below(m: &DMatrix<f64>, threshold: f64) -> f64 {
    m.iter().filter(|x| x.abs() < threshold).count() as f64 / m.len() as f64
}

/// Pearson correlation of two equal-length columns; `None` when either is
/// constant.
pub fn column_correlation(a: &DVector<f64>, b: &DVector<f64>) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.sum() / n, b.sum() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy() -> PpcaProblem {
        let data = DMatrix::from_fn(8, 6, |i, j| ((i * 5 + j * 3) % 7) as f64 - 3.0 + 0.25 * j as f64);
        PpcaProblem::new(data, 2, 1.0, 0.5, 0.9).unwrap()
    }

    #[test]
    fn problem_validation() {
        let d = DMatrix::<f64>::zeros(3, 4);
        assert!(PpcaProblem::new(d.clone(), 4, 1.0, 1.0, 0.5).is_err());
        assert!(PpcaProblem::new(d.clone(), 0, 1.0, 1.0, 0.5).is_err());
        assert!(PpcaProblem::new(d.clone(), 1, -1.0, 1.0, 0.5).is_err());
        assert!(PpcaProblem::new(d.clone(), 1, 1.0, 1.0, 1.0).is_err());
        let mut bad = d;
        bad[(1, 2)] = f64::NAN;
        assert!(PpcaProblem::new(bad, 1, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn zero_data_cannot_be_initialized() {
        let problem = PpcaProblem::new(DMatrix::zeros(4, 3), 1, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(ppca_init(&problem).unwrap_err(), Error::RankDeficient { k: 1 });
    }

    #[test]
    fn init_ignores_p0() {
        let post = ppca_init(&toy()).unwrap();
        assert!(post.psi_w.iter().all(|&v| v == INITIAL_PSI));
        assert!(post.s2_w.iter().all(|&v| v == 1.0));
        assert_eq!(post.cov_z, DMatrix::identity(2, 2));
    }

    #[test]
    fn reconstruction_edge_cases() {
        let mut post = ppca_init(&toy()).unwrap();
        let mut zeroed = post.clone();
        zeroed.mu_z.fill(0.0);
        assert!(reconstruct(&zeroed, Scheme::Sparse).iter().all(|&v| v == 0.0));
        post.psi_w.fill(1.0);
        assert!(reconstruct(&post, Scheme::Sparse).iter().all(|&v| v == 0.0));
        // the naive scheme ignores psi in the mean
        assert!(reconstruct(&post, Scheme::Naive { sigma_0_2: 0.1 })
            .iter()
            .any(|&v| v != 0.0));
    }

    #[test]
    fn rank_one_reconstruction_is_outer_product() {
        let u = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let v = DVector::from_vec(vec![2.0, 0.0, 3.0, -1.0]);
        let post = PpcaPosterior {
            mu_z: DMatrix::from_column_slice(3, 1, u.as_slice()),
            cov_z: DMatrix::identity(1, 1),
            mu_w: DMatrix::from_column_slice(4, 1, v.as_slice()),
            s2_w: DMatrix::from_element(4, 1, 1.0),
            psi_w: DMatrix::zeros(4, 1),
        };
        assert_relative_eq!(reconstruct(&post, Scheme::Sparse), &u * v.transpose());
    }

    #[test]
    fn second_moments_dominate_squared_means() {
        let fit = fit_ppca_sparse(&toy(), 5).unwrap();
        for scheme in [Scheme::Sparse, Scheme::Naive { sigma_0_2: 0.01 }] {
            let ew = fit.posterior.loading_means(scheme);
            let naive_gram = ew.transpose() * &ew;
            let wtw = fit.posterior.wtw(scheme);
            for k in 0..2 {
                assert!(wtw[(k, k)] >= naive_gram[(k, k)] - 1e-10);
            }
        }
    }

    #[test]
    fn naive_rejects_zero_spike_variance() {
        assert!(matches!(
            fit_ppca_naive(&toy(), 0.0, 3),
            Err(Error::AbsoluteContinuityViolation(_))
        ));
        let post = ppca_init(&toy()).unwrap();
        assert!(matches!(
            elbo_ppca(&toy(), &post, Scheme::Naive { sigma_0_2: 0.0 }),
            Err(Error::AbsoluteContinuityViolation(_))
        ));
    }

    #[test]
    fn tolerance_stops_early() {
        let opts = PpcaOptions {
            sweeps: 500,
            elbo_rel_tol: Some(1e-9),
        };
        let fit = fit_ppca(&toy(), Scheme::Sparse, &opts).unwrap();
        assert!(fit.sweeps < 500);
        assert_eq!(fit.elbo_trace.len(), fit.sweeps);
    }

    #[test]
    fn correlation_helper() {
        let a = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let b = DVector::from_vec(vec![-2.0, -4.0, -6.0]);
        assert_relative_eq!(column_correlation(&a, &b).unwrap(), -1.0);
        assert!(column_correlation(&a, &DVector::from_element(3, 1.0)).is_none());
    }
}
