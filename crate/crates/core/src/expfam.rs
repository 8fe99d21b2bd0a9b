//! Exponential-family machinery for mixtures with non-overlapping support.
//!
//! The spike-and-slab case used throughout the crate is
//! `ψ·δ₀ + (1 − ψ)·N(μ, s²)`. Its density is taken with respect to the base
//! measure `δ₀ + Lebesgue`, so the value at `x = 0` is the spike mass and
//! the value elsewhere is the weighted Gaussian density.

use std::fmt;

use crate::{Error, Result};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Numerically stable `1 / (1 + e^{-l})`.
pub fn logistic(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

/// `ln p − ln(1 − p)`, infinite at the endpoints.
pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `x ln(x / y)` with the convention `0 ln 0 = 0`.
fn xlogx_over_y(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x.ln() - y.ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianComponent {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !variance.is_finite() || variance <= 0.0 || !mean.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian needs finite mean and variance > 0 (got mean {mean}, variance {variance})"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let d = x - self.mean;
        -0.5 * (LN_2PI + self.variance.ln()) - d * d / (2.0 * self.variance)
    }

    /// Natural parameters against the sufficient statistics `(x, x²)`.
    pub fn natural_params(&self) -> [f64; 2] {
        [self.mean / self.variance, -0.5 / self.variance]
    }

    pub fn log_partition(&self) -> f64 {
        self.mean * self.mean / (2.0 * self.variance) + 0.5 * self.variance.ln()
    }
}

/// `ψ·δ₀ + (1 − ψ)·N(μ, s²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeSlabGaussian {
    pub spike_prob: f64,
    pub slab: GaussianComponent,
}

impl SpikeSlabGaussian {
    pub fn new(spike_prob: f64, slab_mean: f64, slab_variance: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&spike_prob) {
            return Err(Error::InvalidParameter(format!(
                "spike probability must lie in [0, 1] (got {spike_prob})"
            )));
        }
        Ok(Self {
            spike_prob,
            slab: GaussianComponent::new(slab_mean, slab_variance)?,
        })
    }

    /// The prior `p₀·δ₀ + (1 − p₀)·N(0, σ²)`.
    pub fn centered(p0: f64, slab_variance: f64) -> Result<Self> {
        Self::new(p0, 0.0, slab_variance)
    }

    pub fn moments(&self) -> (f64, f64) {
        spike_slab_moments(self)
    }

    pub fn mean(&self) -> f64 {
        self.moments().0
    }

    pub fn log_density(&self, x: f64) -> f64 {
        spike_slab_log_density(self, x)
    }
}

/// `(E[x], E[x²])`.
pub fn spike_slab_moments(d: &SpikeSlabGaussian) -> (f64, f64) {
    let w = 1.0 - d.spike_prob;
    let m = d.slab.mean;
    (w * m, w * (m * m + d.slab.variance))
}

pub fn spike_slab_log_density(d: &SpikeSlabGaussian, x: f64) -> f64 {
    if x == 0.0 {
        d.spike_prob.ln()
    } else {
        (-d.spike_prob).ln_1p() + d.slab.log_density(x)
    }
}

type StatsFn = Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>;
type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;
type SupportFn = Box<dyn Fn(f64) -> bool + Send + Sync>;

/// One exponential-family piece of a [`NonOverlappingMixture`], restricted
/// to its support.
pub struct MixtureComponent {
    log_weight: f64,
    natural_params: Vec<f64>,
    log_partition: f64,
    sufficient_stats: StatsFn,
    log_base_density: ScalarFn,
    support: SupportFn,
}

impl fmt::Debug for MixtureComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MixtureComponent")
            .field("log_weight", &self.log_weight)
            .field("natural_params", &self.natural_params)
            .field("log_partition", &self.log_partition)
            .finish_non_exhaustive()
    }
}

impl MixtureComponent {
    pub fn new(
        log_weight: f64,
        natural_params: Vec<f64>,
        log_partition: f64,
        sufficient_stats: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
        log_base_density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: impl Fn(f64) -> bool + Send + Sync + 'static,
    ) -> Self {
        Self {
            log_weight,
            natural_params,
            log_partition,
            sufficient_stats: Box::new(sufficient_stats),
            log_base_density: Box::new(log_base_density),
            support: Box::new(support),
        }
    }

    /// A point mass: no sufficient statistics, zero log-partition, counting
    /// base measure on `{location}`.
    pub fn point_mass(location: f64, log_weight: f64) -> Self {
        Self::new(
            log_weight,
            Vec::new(),
            0.0,
            |_| Vec::new(),
            |_| 0.0,
            move |x| x == location,
        )
    }

    /// A Gaussian on `ℝ` minus the given atoms, with statistics `(x, x²)`.
    pub fn gaussian(slab: GaussianComponent, log_weight: f64, excluded_atoms: Vec<f64>) -> Self {
        Self::new(
            log_weight,
            slab.natural_params().to_vec(),
            slab.log_partition(),
            |x| vec![x, x * x],
            |_| -0.5 * LN_2PI,
            move |x| x.is_finite() && !excluded_atoms.contains(&x),
        )
    }

    /// The uniform distribution on `[lo, hi)`.
    pub fn uniform(lo: f64, hi: f64, log_weight: f64) -> Self {
        Self::new(
            log_weight,
            Vec::new(),
            (hi - lo).ln(),
            |_| Vec::new(),
            |_| 0.0,
            move |x| lo <= x && x < hi,
        )
    }

    pub fn log_weight(&self) -> f64 {
        self.log_weight
    }

    pub fn natural_params(&self) -> &[f64] {
        &self.natural_params
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn accepts(&self, x: f64) -> bool {
        (self.support)(x)
    }

    pub fn sufficient_stats(&self, x: f64) -> Vec<f64> {
        (self.sufficient_stats)(x)
    }

    pub fn log_base_density(&self, x: f64) -> f64 {
        (self.log_base_density)(x)
    }

    /// `⟨η, T(x)⟩ − A + log h(x)`, ignoring the weight and the support.
    fn log_unweighted(&self, x: f64) -> f64 {
        let t = self.sufficient_stats(x);
        let dot: f64 = self.natural_params.iter().zip(&t).map(|(e, s)| e * s).sum();
        dot - self.log_partition + self.log_base_density(x)
    }
}

/// A finite mixture of exponential-family components with pairwise
/// disjoint supports.
#[derive(Debug)]
pub struct NonOverlappingMixture {
    components: Vec<MixtureComponent>,
}

impl NonOverlappingMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("mixture needs at least one component".into()));
        }
        for (i, c) in components.iter().enumerate() {
            if !c.log_partition.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "component {i} has non-finite log-partition {}",
                    c.log_partition
                )));
            }
        }
        let logs: Vec<f64> = components.iter().map(|c| c.log_weight).collect();
        let total = log_sum_exp(&logs).exp();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Index of the unique component whose support contains `x`.
    pub fn component_at(&self, x: f64) -> Result<Option<usize>> {
        let mut found = None;
        for (i, c) in self.components.iter().enumerate() {
            if c.accepts(x) {
                if let Some(first) = found {
                    return Err(Error::OverlappingSupport { first, second: i, x });
                }
                found = Some(i);
            }
        }
        Ok(found)
    }

    pub fn log_density(&self, x: f64) -> Result<f64> {
        Ok(match self.component_at(x)? {
            Some(i) => {
                let c = &self.components[i];
                c.log_weight + c.log_unweighted(x)
            }
            None => f64::NEG_INFINITY,
        })
    }

    /// Checks pairwise exclusivity of the support indicators on probe points.
    pub fn check_disjoint(&self, probes: &[f64]) -> Result<()> {
        probes.iter().try_for_each(|&x| self.component_at(x).map(|_| ()))
    }

    /// Natural parameters of the mixture as a single exponential family:
    /// all component parameters, then for each of the first `K − 1`
    /// components `log πᵢ − Aᵢ − log π_K + A_K`.
    pub fn stacked_natural_params(&self) -> Result<Vec<f64>> {
        let last = self.components.last().expect("non-empty");
        if last.log_weight == f64::NEG_INFINITY {
            return Err(Error::InvalidParameter(
                "stacked parameterization needs a positive weight on the last component".into(),
            ));
        }
        let anchor = last.log_weight - last.log_partition;
        let mut eta: Vec<f64> = self
            .components
            .iter()
            .flat_map(|c| c.natural_params.iter().copied())
            .collect();
        eta.extend(
            self.components[..self.len() - 1]
                .iter()
                .map(|c| c.log_weight - c.log_partition - anchor),
        );
        Ok(eta)
    }

    /// Sufficient statistics matching [`Self::stacked_natural_params`]:
    /// indicator-masked component statistics followed by the first `K − 1`
    /// support indicators.
    pub fn stacked_sufficient_stats(&self, x: f64) -> Result<Vec<f64>> {
        let active = self.component_at(x)?;
        let mut t = Vec::new();
        for (i, c) in self.components.iter().enumerate() {
            if active == Some(i) {
                t.extend(c.sufficient_stats(x));
            } else {
                t.extend(std::iter::repeat_n(0.0, c.natural_params.len()));
            }
        }
        t.extend((0..self.len() - 1).map(|i| if active == Some(i) { 1.0 } else { 0.0 }));
        Ok(t)
    }

    /// `A_K − log π_K`.
    pub fn stacked_log_partition(&self) -> f64 {
        let last = self.components.last().expect("non-empty");
        last.log_partition - last.log_weight
    }

    /// Log of `dH_mix/dH`; `−∞` outside every support.
    pub fn stacked_log_base_density(&self, x: f64) -> Result<f64> {
        Ok(match self.component_at(x)? {
            Some(i) => self.components[i].log_base_density(x),
            None => f64::NEG_INFINITY,
        })
    }
}

pub fn mixture_log_density(m: &NonOverlappingMixture, x: f64) -> Result<f64> {
    m.log_density(x)
}

/// Two-component natural form: the atom at zero, then the slab on `ℝ \ {0}`.
pub fn spike_slab_to_natural(d: &SpikeSlabGaussian) -> Result<NonOverlappingMixture> {
    let psi = d.spike_prob;
    if !(psi > 0.0 && psi < 1.0) {
        return Err(Error::DegenerateMixture(psi));
    }
    NonOverlappingMixture::new(vec![
        MixtureComponent::point_mass(0.0, psi.ln()),
        MixtureComponent::gaussian(d.slab, (-psi).ln_1p(), vec![0.0]),
    ])
}

/// A Gaussian-form log-likelihood `a·x² + b·x + const` in one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianLikelihoodEvidence {
    pub precision_coeff: f64,
    pub linear_coeff: f64,
}

impl GaussianLikelihoodEvidence {
    pub fn new(precision_coeff: f64, linear_coeff: f64) -> Self {
        Self {
            precision_coeff,
            linear_coeff,
        }
    }

    /// Evidence from one observation `y ~ N(x, noise_variance)`.
    pub fn from_observation(y: f64, noise_variance: f64) -> Self {
        Self::new(-0.5 / noise_variance, y / noise_variance)
    }
}

impl std::ops::Add for GaussianLikelihoodEvidence {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::new(
            self.precision_coeff + rhs.precision_coeff,
            self.linear_coeff + rhs.linear_coeff,
        )
    }
}

/// Posterior slab and the posterior log-odds `ln(ψ / (1 − ψ))` of the spike.
///
/// The slab absorbs the evidence by adding natural parameters. The spike's
/// sufficient statistics vanish at zero, so its weight only changes through
/// the slab's normalizer.
pub fn spike_slab_posterior_parts(
    prior: &SpikeSlabGaussian,
    evidence: &GaussianLikelihoodEvidence,
) -> Result<(GaussianComponent, f64)> {
    let GaussianComponent { mean: m0, variance: v0 } = prior.slab;
    let precision = 1.0 / v0 - 2.0 * evidence.precision_coeff;
    if !precision.is_finite() || precision <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "posterior slab precision {precision} is not positive"
        )));
    }
    let variance = 1.0 / precision;
    let mean = variance * (m0 / v0 + evidence.linear_coeff);
    let slab = GaussianComponent::new(mean, variance)
        .map_err(|_| Error::divergence("conjugate update", format!("mean {mean}, variance {variance}")))?;
    // log ∫ N(x; m0, v0) exp(a x² + b x) dx
    let log_slab_evidence = 0.5 * (variance / v0).ln() + mean * mean / (2.0 * variance) - m0 * m0 / (2.0 * v0);
    Ok((slab, logit(prior.spike_prob) - log_slab_evidence))
}

pub fn conjugate_update_spike_slab(
    prior: &SpikeSlabGaussian,
    evidence: &GaussianLikelihoodEvidence,
) -> Result<SpikeSlabGaussian> {
    let (slab, log_odds) = spike_slab_posterior_parts(prior, evidence)?;
    Ok(SpikeSlabGaussian {
        spike_prob: logistic(log_odds),
        slab,
    })
}

pub fn kl_gaussian(q: &GaussianComponent, p: &GaussianComponent) -> f64 {
    let d = q.mean - p.mean;
    0.5 * ((p.variance / q.variance).ln() + (q.variance + d * d) / p.variance - 1.0)
}

/// KL between Bernoulli laws given by their probabilities of the "zero"
/// outcome.
pub fn kl_bernoulli(q: f64, p: f64) -> Result<f64> {
    if (q > 0.0 && p == 0.0) || (q < 1.0 && p == 1.0) {
        return Err(Error::AbsoluteContinuityViolation(format!(
            "Bernoulli({q}) is not absolutely continuous w.r.t. Bernoulli({p})"
        )));
    }
    Ok(xlogx_over_y(q, p) + xlogx_over_y(1.0 - q, 1.0 - p))
}

/// Both laws put their atom at zero, so the KL splits into the Bernoulli
/// KL of the spike weights plus the weighted slab KL.
pub fn kl_spike_slab(q: &SpikeSlabGaussian, p: &SpikeSlabGaussian) -> Result<f64> {
    let spike = kl_bernoulli(q.spike_prob, p.spike_prob)?;
    let w = 1.0 - q.spike_prob;
    let slab = if w == 0.0 {
        0.0
    } else {
        w * kl_gaussian(&q.slab, &p.slab)
    };
    Ok(spike + slab)
}
