//! Variational inference for `β̂ | β ~ N(Xβ, σ²ₑX)` with i.i.d. spike-and-slab
//! effects `βⱼ ~ p₀δ₀ + (1 − p₀)N(0, σ²₁)`.
//!
//! Two mean-field schemes are provided:
//!
//! * **Sparse**: each `q(βᵢ)` is itself a spike-and-slab law. Its coordinate
//!   update is the exact conjugate update of the prior against the Gaussian
//!   evidence left after averaging over the other coordinates.
//! * **Naive**: the prior is split with an indicator `Zᵢ ~ Bernoulli(1 − p₀)`
//!   and `βᵢ | Zᵢ ~ N(0, σ²_{Zᵢ})`, the spike replaced by `N(0, σ²₀)`, and
//!   `q(βᵢ, Zᵢ) = q(βᵢ) q(Zᵢ)` with Gaussian and Bernoulli factors.
//!
//! The ELBo drops the terms `−(P/2) log(2πσ²ₑ) − ½ log det X − β̂ᵀX⁻¹β̂ / (2σ²ₑ)`,
//! which do not depend on the variational parameters.

use nalgebra::{DMatrix, DVector};

use crate::expfam::{
    kl_bernoulli, kl_gaussian, kl_spike_slab, logistic, logit, spike_slab_posterior_parts, GaussianComponent,
    GaussianLikelihoodEvidence, SpikeSlabGaussian, LN_2PI,
};
use crate::linalg::check_symmetric;
use crate::{Error, Result, Scheme};

pub const DEFAULT_SWEEPS: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-8;
/// Log-odds are clamped to this magnitude before the logistic.
pub const LOG_ODDS_CLAMP: f64 = 700.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GlsProblem {
    beta_hat: DVector<f64>,
    corr: DMatrix<f64>,
    sigma_e2: f64,
    sigma_1_2: f64,
    p0: f64,
}

impl GlsProblem {
    pub fn new(beta_hat: DVector<f64>, corr: DMatrix<f64>, sigma_e2: f64, sigma_1_2: f64, p0: f64) -> Result<Self> {
        check_symmetric(&corr, 1e-10)?;
        if corr.nrows() != beta_hat.len() {
            return Err(Error::DimensionMismatch(format!(
                "beta_hat has length {} but corr is {}x{}",
                beta_hat.len(),
                corr.nrows(),
                corr.ncols()
            )));
        }
        if beta_hat.is_empty() {
            return Err(Error::InvalidParameter("empty problem".into()));
        }
        if let Some(i) = beta_hat.iter().position(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta_hat[{i}] is not finite")));
        }
        if let Some(i) = corr.diagonal().iter().position(|d| !d.is_finite() || *d <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "corr[{i},{i}] = {} must be positive",
                corr[(i, i)]
            )));
        }
        for (name, v) in [("sigma_e2", sigma_e2), ("sigma_1_2", sigma_1_2)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be positive (got {v})")));
            }
        }
        if !(0.0..=1.0).contains(&p0) {
            return Err(Error::InvalidParameter(format!("p0 must lie in [0, 1] (got {p0})")));
        }
        let n = corr.nrows();
        let jittered = &corr + DMatrix::identity(n, n) * 1e-10;
        if jittered.cholesky().is_none() {
            return Err(Error::NotPositiveSemidefinite);
        }
        Ok(Self {
            beta_hat,
            corr,
            sigma_e2,
            sigma_1_2,
            p0,
        })
    }

    /// A one-coordinate problem with `X = [[1]]`.
    pub fn scalar(beta_hat: f64, sigma_e2: f64, sigma_1_2: f64, p0: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(1, beta_hat),
            DMatrix::from_element(1, 1, 1.0),
            sigma_e2,
            sigma_1_2,
            p0,
        )
    }

    pub fn dim(&self) -> usize {
        self.beta_hat.len()
    }

    pub fn beta_hat(&self) -> &DVector<f64> {
        &self.beta_hat
    }

    pub fn corr(&self) -> &DMatrix<f64> {
        &self.corr
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

/// Per-coordinate variational parameters. `psi[i]` is the probability of the
/// spike (sparse) or of `Zᵢ = 0` (naive).
#[derive(Debug, Clone, PartialEq)]
pub struct GlsPosterior {
    pub psi: DVector<f64>,
    pub mu: DVector<f64>,
    pub s2: DVector<f64>,
}

impl GlsPosterior {
    /// The starting point used by both fits: `μ = 0`, `s² = σ²₁ + σ²ₑ`, and
    /// `ψ = p₀` (sparse) or `ψ = 1` (naive).
    pub fn initial(problem: &GlsProblem, scheme: Scheme) -> Self {
        let p = problem.dim();
        let psi = match scheme {
            Scheme::Sparse => problem.p0,
            Scheme::Naive { .. } => 1.0,
        };
        Self {
            psi: DVector::from_element(p, psi),
            mu: DVector::zeros(p),
            s2: DVector::from_element(p, problem.sigma_1_2 + problem.sigma_e2),
        }
    }

    pub fn with_psi(mut self, psi: f64) -> Self {
        self.psi.fill(psi);
        self
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mean_at(&self, i: usize, scheme: Scheme) -> f64 {
        match scheme {
            Scheme::Sparse => (1.0 - self.psi[i]) * self.mu[i],
            Scheme::Naive { .. } => self.mu[i],
        }
    }

    pub fn second_moment_at(&self, i: usize, scheme: Scheme) -> f64 {
        let raw = self.mu[i] * self.mu[i] + self.s2[i];
        match scheme {
            Scheme::Sparse => (1.0 - self.psi[i]) * raw,
            Scheme::Naive { .. } => raw,
        }
    }

    /// `E_q[β]`.
    pub fn means(&self, scheme: Scheme) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| self.mean_at(i, scheme))
    }

    fn check_dims(&self, p: usize) -> Result<()> {
        if self.psi.len() != p || self.mu.len() != p || self.s2.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "posterior vectors have lengths {}/{}/{}, problem has {p}",
                self.psi.len(),
                self.mu.len(),
                self.s2.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub posterior: GlsPosterior,
    /// ELBo after each completed sweep.
    pub elbo_trace: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub scheme: Scheme,
    /// Number of coordinate updates whose log-odds hit [`LOG_ODDS_CLAMP`].
    pub saturated: usize,
}

impl FitReport {
    pub fn posterior_mean(&self) -> DVector<f64> {
        self.posterior.means(self.scheme)
    }

    pub fn final_elbo(&self) -> Option<f64> {
        self.elbo_trace.last().copied()
    }
}

fn clamp_log_odds(l: f64, saturated: &mut usize) -> f64 {
    if l.abs() > LOG_ODDS_CLAMP {
        *saturated += 1;
        l.clamp(-LOG_ODDS_CLAMP, LOG_ODDS_CLAMP)
    } else {
        l
    }
}

pub fn fit_gls_sparse(problem: &GlsProblem, sweeps: usize, tol: f64) -> Result<FitReport> {
    let init = GlsPosterior::initial(problem, Scheme::Sparse);
    fit_gls_from(problem, Scheme::Sparse, init, sweeps, tol)
}

pub fn fit_gls_naive(problem: &GlsProblem, sigma_0_2: f64, sweeps: usize, tol: f64) -> Result<FitReport> {
    let scheme = Scheme::Naive { sigma_0_2 };
    scheme.validate()?;
    let init = GlsPosterior::initial(problem, scheme);
    fit_gls_from(problem, scheme, init, sweeps, tol)
}

/// Naive fits started from `ψ = 1` and from `ψ = 0`, keeping the one with
/// the larger final ELBo (the first on ties).
///
/// For small `σ²₀` both starting points are fixed points of the naive
/// updates, so a single run cannot move between the "everything spiked" and
/// "no spike" optima.
pub fn fit_gls_naive_multistart(problem: &GlsProblem, sigma_0_2: f64, sweeps: usize, tol: f64) -> Result<FitReport> {
    let scheme = Scheme::Naive { sigma_0_2 };
    scheme.validate()?;
    let spiked = fit_gls_naive(problem, sigma_0_2, sweeps, tol)?;
    let init = GlsPosterior::initial(problem, scheme).with_psi(0.0);
    let slabbed = fit_gls_from(problem, scheme, init, sweeps, tol)?;
    let best = match (spiked.final_elbo(), slabbed.final_elbo()) {
        (Some(a), Some(b)) if b > a => slabbed,
        _ => spiked,
    };
    Ok(best)
}

/// Coordinate ascent from an explicit starting point.
///
/// Each sweep visits `i = 0..P` in order. The sparse scheme replaces
/// `q(βᵢ)` by its conjugate optimum; the naive scheme updates `(μᵢ, s²ᵢ)`
/// and then `ψᵢ`. `X E_q[β]` is maintained incrementally inside a sweep and
/// recomputed in full at the end of each sweep.
pub fn fit_gls_from(
    problem: &GlsProblem,
    scheme: Scheme,
    init: GlsPosterior,
    sweeps: usize,
    tol: f64,
) -> Result<FitReport> {
    scheme.validate()?;
    if sweeps == 0 {
        return Err(Error::InvalidParameter("sweeps must be at least 1".into()));
    }
    let p = problem.dim();
    init.check_dims(p)?;
    let x = &problem.corr;
    let sigma_e2 = problem.sigma_e2;
    let sigma_1_2 = problem.sigma_1_2;
    let prior = problem.prior();
    let prior_log_odds = logit(problem.p0);

    let mut post = init;
    let mut m = post.means(scheme);
    let mut xm = x * &m;
    let mut elbo_trace = Vec::with_capacity(sweeps);
    let mut saturated = 0usize;
    let mut converged = false;
    let mut done = 0;

    for _ in 0..sweeps {
        let mut max_change = 0.0f64;
        for i in 0..p {
            let xii = x[(i, i)];
            let resid = problem.beta_hat[i] - (xm[i] - xii * m[i]);
            match scheme {
                Scheme::Sparse => {
                    let evidence = GaussianLikelihoodEvidence::new(-0.5 * xii / sigma_e2, resid / sigma_e2);
                    let (slab, log_odds) = spike_slab_posterior_parts(&prior, &evidence)
                        .map_err(|e| Error::divergence(format!("coordinate {i}"), e.to_string()))?;
                    post.mu[i] = slab.mean;
                    post.s2[i] = slab.variance;
                    post.psi[i] = logistic(clamp_log_odds(log_odds, &mut saturated));
                }
                Scheme::Naive { sigma_0_2 } => {
                    let psi = post.psi[i];
                    let prior_precision = psi / sigma_0_2 + (1.0 - psi) / sigma_1_2;
                    let s2 = 1.0 / (prior_precision + xii / sigma_e2);
                    let mu = s2 * resid / sigma_e2;
                    let e2 = mu * mu + s2;
                    let log_odds = prior_log_odds + 0.5 * (sigma_1_2.ln() - sigma_0_2.ln())
                        - 0.5 * e2 * (1.0 / sigma_0_2 - 1.0 / sigma_1_2);
                    post.mu[i] = mu;
                    post.s2[i] = s2;
                    post.psi[i] = logistic(clamp_log_odds(log_odds, &mut saturated));
                }
            }
            let new_m = post.mean_at(i, scheme);
            if !new_m.is_finite() || !post.s2[i].is_finite() || !post.psi[i].is_finite() {
                return Err(Error::divergence(
                    format!("coordinate {i}"),
                    format!("psi {}, mu {}, s2 {}", post.psi[i], post.mu[i], post.s2[i]),
                ));
            }
            let delta = new_m - m[i];
            if delta != 0.0 {
                xm.axpy(delta, &x.column(i), 1.0);
                m[i] = new_m;
            }
            max_change = max_change.max(delta.abs());
        }
        let fresh = x * &m;
        debug_assert!(
            (&fresh - &xm).amax() < 1e-9,
            "incremental residual drifted by {}",
            (&fresh - &xm).amax()
        );
        xm = fresh;
        elbo_trace.push(elbo_with_xm(problem, &post, scheme, &m, &xm)?);
        done += 1;
        if max_change < tol {
            converged = true;
            break;
        }
    }

    Ok(FitReport {
        posterior: post,
        elbo_trace,
        sweeps: done,
        converged,
        scheme,
        saturated,
    })
}

/// `E_q[log p(β̂ | β)] − Σᵢ KL(qᵢ ‖ priorᵢ)` up to the constants listed in
/// the module docs.
pub fn elbo_gls(problem: &GlsProblem, posterior: &GlsPosterior, scheme: Scheme) -> Result<f64> {
    scheme.validate()?;
    posterior.check_dims(problem.dim())?;
    let m = posterior.means(scheme);
    let xm = &problem.corr * &m;
    elbo_with_xm(problem, posterior, scheme, &m, &xm)
}

fn elbo_with_xm(
    problem: &GlsProblem,
    post: &GlsPosterior,
    scheme: Scheme,
    m: &DVector<f64>,
    xm: &DVector<f64>,
) -> Result<f64> {
    let x = &problem.corr;
    let p = problem.dim();
    let mut quad = m.dot(xm);
    for i in 0..p {
        quad += x[(i, i)] * (post.second_moment_at(i, scheme) - m[i] * m[i]);
    }
    let loglik = problem.beta_hat.dot(m) / problem.sigma_e2 - 0.5 * quad / problem.sigma_e2;

    let mut kl = 0.0;
    match scheme {
        Scheme::Sparse => {
            let prior = problem.prior();
            for i in 0..p {
                let q = SpikeSlabGaussian {
                    spike_prob: post.psi[i],
                    slab: GaussianComponent {
                        mean: post.mu[i],
                        variance: post.s2[i],
                    },
                };
                kl += kl_spike_slab(&q, &prior)?;
            }
        }
        Scheme::Naive { sigma_0_2 } => {
            let spike = GaussianComponent {
                mean: 0.0,
                variance: sigma_0_2,
            };
            let slab = GaussianComponent {
                mean: 0.0,
                variance: problem.sigma_1_2,
            };
            for i in 0..p {
                let psi = post.psi[i];
                let q = GaussianComponent {
                    mean: post.mu[i],
                    variance: post.s2[i],
                };
                kl += kl_bernoulli(psi, problem.p0)?
                    + psi * kl_gaussian(&q, &spike)
                    + (1.0 - psi) * kl_gaussian(&q, &slab);
            }
        }
    }
    Ok(loglik - kl)
}

/// Exact posterior of `β` given one observation `β̂ ~ N(β, σ²ₑ)` under the
/// spike-and-slab prior, from the marginal likelihoods of the two
/// components: `p₀ N(β̂; 0, σ²ₑ)` against `(1 − p₀) N(β̂; 0, σ²ₑ + σ²₁)`.
pub fn exact_posterior_1d(beta_hat: f64, p0: f64, sigma_e2: f64, sigma_1_2: f64) -> Result<SpikeSlabGaussian> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::InvalidParameter(format!("p0 must lie in (0, 1) (got {p0})")));
    }
    if !(sigma_e2 > 0.0 && sigma_1_2 > 0.0) {
        return Err(Error::InvalidParameter("variances must be positive".into()));
    }
    let log_normal = |x: f64, v: f64| -0.5 * (LN_2PI + v.ln()) - x * x / (2.0 * v);
    let log_odds = logit(p0) + log_normal(beta_hat, sigma_e2) - log_normal(beta_hat, sigma_e2 + sigma_1_2);
    Ok(SpikeSlabGaussian {
        spike_prob: logistic(log_odds),
        slab: GaussianComponent::new(
            beta_hat / (sigma_e2 / sigma_1_2 + 1.0),
            1.0 / (1.0 / sigma_e2 + 1.0 / sigma_1_2),
        )?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRow {
    pub beta_hat: f64,
    pub naive_mean: f64,
    pub sparse_mean: f64,
    pub exact_mean: f64,
}

/// Posterior means at `P = 1` along a grid of observed effects: the naive
/// scheme (best of [`fit_gls_naive_multistart`]), the sparse scheme, and
/// the exact posterior.
pub fn threshold_curve(
    p0: f64,
    sigma_e2: f64,
    sigma_1_2: f64,
    sigma_0_2: f64,
    beta_hat_grid: &[f64],
) -> Result<Vec<ThresholdRow>> {
    if beta_hat_grid.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidParameter("grid has non-finite entries".into()));
    }
    if beta_hat_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("grid must be sorted".into()));
    }
    beta_hat_grid
        .iter()
        .map(|&b| {
            let problem = GlsProblem::scalar(b, sigma_e2, sigma_1_2, p0)?;
            let naive = fit_gls_naive_multistart(&problem, sigma_0_2, DEFAULT_SWEEPS, DEFAULT_TOL)?;
            let sparse = fit_gls_sparse(&problem, DEFAULT_SWEEPS, DEFAULT_TOL)?;
            let exact = exact_posterior_1d(b, p0, sigma_e2, sigma_1_2)?;
            Ok(ThresholdRow {
                beta_hat: b,
                naive_mean: naive.posterior_mean()[0],
                sparse_mean: sparse.posterior_mean()[0],
                exact_mean: exact.mean(),
            })
        })
        .collect()
}
