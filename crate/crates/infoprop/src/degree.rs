//! Degree distributions over a truncated integer support, their moments,
//! natural cutoffs, inverse-CDF sampling and the Molloy-Reed criterion.
//!
//! A [`DegreeLaw`] is the parametric (or empirical) law before truncation;
//! [`DegreeDistribution`] is the law truncated to `[k_min, k_max]` and
//! renormalized, ready for sampling.

use std::io::BufRead;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DegreeError {
    #[error("power-law exponent must exceed 2, got {0}")]
    ExponentTooSmall(f64),
    #[error("power-law minimum degree must be at least 1, got {0}")]
    PowerLawKMinZero(usize),
    #[error("Poisson mean must be positive, got {0}")]
    NonPositiveMean(f64),
    #[error("invalid degree range: k_min={k_min}, k_max={k_max}")]
    InvalidRange { k_min: usize, k_max: usize },
    #[error("pmf has no mass on the requested support")]
    ZeroMass,
    #[error("pmf entry for degree {k} is negative ({value})")]
    NegativeMass { k: usize, value: f64 },
    #[error("empty pmf")]
    EmptyPmf,
    #[error("duplicate degree {0} in empirical pmf")]
    DuplicateDegree(usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Probability mass function over integer degrees `k_min..=k_max`.
///
/// Entries are non-negative and sum to 1 (renormalized on construction;
/// the residual is below 1e-12).
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    k_min: usize,
    probs: Vec<f64>,
}

impl Pmf {
    /// Builds a pmf from non-negative weights for degrees `k_min..`.
    pub fn new(k_min: usize, weights: Vec<f64>) -> Result<Self, DegreeError> {
        if weights.is_empty() {
            return Err(DegreeError::EmptyPmf);
        }
        for (j, &w) in weights.iter().enumerate() {
            if w < 0.0 || !w.is_finite() {
                return Err(DegreeError::NegativeMass {
                    k: k_min + j,
                    value: w,
                });
            }
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(DegreeError::ZeroMass);
        }
        let probs = weights.into_iter().map(|w| w / sum).collect();
        Ok(Self { k_min, probs })
    }

    /// Builds a pmf from sparse `(degree, weight)` pairs, zero-filling gaps.
    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self, DegreeError> {
        if pairs.is_empty() {
            return Err(DegreeError::EmptyPmf);
        }
        let k_min = pairs.iter().map(|&(k, _)| k).min().unwrap();
        let k_max = pairs.iter().map(|&(k, _)| k).max().unwrap();
        let mut weights = vec![0.0; k_max - k_min + 1];
        for &(k, w) in pairs {
            if weights[k - k_min] != 0.0 {
                return Err(DegreeError::DuplicateDegree(k));
            }
            weights[k - k_min] = w;
        }
        Self::new(k_min, weights)
    }

    pub fn k_min(&self) -> usize {
        self.k_min
    }

    pub fn k_max(&self) -> usize {
        self.k_min + self.probs.len() - 1
    }

    /// Probability of degree `k`; zero outside the support.
    pub fn get(&self, k: usize) -> f64 {
        if k < self.k_min {
            return 0.0;
        }
        self.probs.get(k - self.k_min).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Iterates `(degree, probability)` over the support.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(j, &p)| (self.k_min + j, p))
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.iter().map(|(k, p)| (k * k) as f64 * p).sum()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Total-variation distance, treating missing entries as zero.
    pub fn tv_distance(&self, other: &Pmf) -> f64 {
        let lo = self.k_min.min(other.k_min);
        let hi = self.k_max().max(other.k_max());
        (lo..=hi)
            .map(|k| (self.get(k) - other.get(k)).abs())
            .sum::<f64>()
            / 2.0
    }
}

/// A degree law before truncation.
#[derive(Debug, Clone, PartialEq)]
pub enum DegreeLaw {
    /// Continuous density proportional to `k^(-exponent)` on `[k_min, inf)`.
    PowerLaw { exponent: f64, k_min: usize },
    /// Poisson with the given mean, optionally floored at `k_min`.
    Poisson { mean: f64, k_min: usize },
    /// An explicitly given pmf.
    Empirical(Pmf),
}

impl DegreeLaw {
    pub fn power_law(exponent: f64, k_min: usize) -> Result<Self, DegreeError> {
        if exponent <= 2.0 {
            return Err(DegreeError::ExponentTooSmall(exponent));
        }
        if k_min == 0 {
            return Err(DegreeError::PowerLawKMinZero(k_min));
        }
        Ok(Self::PowerLaw { exponent, k_min })
    }

    pub fn poisson(mean: f64, k_min: usize) -> Result<Self, DegreeError> {
        if mean <= 0.0 || !mean.is_finite() {
            return Err(DegreeError::NonPositiveMean(mean));
        }
        Ok(Self::Poisson { mean, k_min })
    }

    pub fn k_min(&self) -> usize {
        match self {
            Self::PowerLaw { k_min, .. } | Self::Poisson { k_min, .. } => *k_min,
            Self::Empirical(pmf) => pmf.k_min(),
        }
    }

    /// Tail probability `P(K > k)` under the untruncated law.
    pub fn tail_beyond(&self, k: usize) -> f64 {
        match self {
            Self::PowerLaw { exponent, k_min } => {
                if k < *k_min {
                    1.0
                } else {
                    (k as f64 / *k_min as f64).powf(1.0 - exponent)
                }
            }
            Self::Poisson { mean, .. } => poisson_tail(*mean, k),
            Self::Empirical(pmf) => pmf.iter().filter(|&(j, _)| j > k).map(|(_, p)| p).sum(),
        }
    }

    /// Natural cutoff: the smallest degree whose tail mass is at most `1/n`.
    ///
    /// For the power law this agrees with the closed form
    /// `k_min * n^(1/(exponent-1))` up to integer rounding; for the other
    /// kinds it is a direct tail scan of the law's pmf.
    pub fn natural_cutoff(&self, n: usize) -> usize {
        let bound = 1.0 / n.max(1) as f64;
        let start = self.k_min();
        let mut k = match self {
            // jump near the closed form, then settle by scanning
            Self::PowerLaw { exponent, k_min } => {
                let guess = scale_free_cutoff_closed_form(*exponent, *k_min, n);
                (guess.floor() as usize).saturating_sub(2).max(start)
            }
            _ => start,
        };
        while self.tail_beyond(k) > bound {
            k += 1;
        }
        while k > start && self.tail_beyond(k - 1) <= bound {
            k -= 1;
        }
        k
    }

    /// Truncates to `[k_min, k_max]` and renormalizes. Without an explicit
    /// `k_max` the natural cutoff for `n` is used (empirical laws keep their
    /// own support).
    pub fn distribution(
        &self,
        n: usize,
        k_max: Option<usize>,
    ) -> Result<DegreeDistribution, DegreeError> {
        let k_min = self.k_min();
        let k_max = match (k_max, self) {
            (Some(k), _) => k,
            (None, Self::Empirical(pmf)) => pmf.k_max(),
            (None, _) => self.natural_cutoff(n),
        };
        if k_max < k_min {
            return Err(DegreeError::InvalidRange { k_min, k_max });
        }
        let weights: Vec<f64> = match self {
            Self::PowerLaw { exponent, k_min } => power_law_bin_masses(*exponent, *k_min, k_max),
            Self::Poisson { mean, k_min } => poisson_weights(*mean, *k_min, k_max),
            Self::Empirical(pmf) => (k_min..=k_max).map(|k| pmf.get(k)).collect(),
        };
        let pmf = Pmf::new(k_min, weights)?;
        let mut cdf = Vec::with_capacity(pmf.probs.len());
        let mut acc = 0.0;
        for &p in &pmf.probs {
            acc += p;
            cdf.push(acc);
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Ok(DegreeDistribution {
            law: self.clone(),
            pmf,
            cdf,
        })
    }
}

/// A truncated, renormalized degree distribution with a sampling table.
#[derive(Debug, Clone)]
pub struct DegreeDistribution {
    law: DegreeLaw,
    pmf: Pmf,
    cdf: Vec<f64>,
}

impl DegreeDistribution {
    pub fn law(&self) -> &DegreeLaw {
        &self.law
    }

    pub fn pmf(&self) -> &Pmf {
        &self.pmf
    }

    pub fn k_min(&self) -> usize {
        self.pmf.k_min()
    }

    pub fn k_max(&self) -> usize {
        self.pmf.k_max()
    }

    pub fn mean_degree(&self) -> f64 {
        self.pmf.mean()
    }

    pub fn second_moment(&self) -> f64 {
        self.pmf.second_moment()
    }

    /// Giant-component criterion: `E[K^2] - 2 E[K] > 0`.
    pub fn molloy_reed_ok(&self) -> bool {
        self.second_moment() - 2.0 * self.mean_degree() > 0.0
    }

    /// Inverse-CDF draw from the precomputed cumulative table.
    pub fn sample_degree<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u);
        self.pmf.k_min() + idx.min(self.cdf.len() - 1)
    }

    /// Samples a whole degree sequence.
    pub fn sample_sequence<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        (0..n).map(|_| self.sample_degree(rng)).collect()
    }
}

/// Closed-form scale-free cutoff `k_min * n^(1/(exponent-1))`.
pub fn scale_free_cutoff_closed_form(exponent: f64, k_min: usize, n: usize) -> f64 {
    k_min as f64 * (n as f64).powf(1.0 / (exponent - 1.0))
}

/// Closed-form scale-free mean degree with the finite-size correction.
pub fn scale_free_mean_closed_form(exponent: f64, k_min: usize, n: usize) -> f64 {
    let nf = n as f64;
    (exponent - 1.0) / (exponent - 2.0)
        * k_min as f64
        * (1.0 - nf.powf(-(exponent - 2.0) / (exponent - 1.0)))
        / (1.0 - 1.0 / nf)
}

/// Reference-only closed form `e^mean * (1 - 1/n)` quoted for Poisson
/// cutoffs in the literature. It does not satisfy the tail-mass definition
/// (compare with [`DegreeLaw::natural_cutoff`]); kept for documentation.
pub fn er_cutoff_closed_form(mean: f64, n: usize) -> f64 {
    mean.exp() * (1.0 - 1.0 / n as f64)
}

/// Loads an empirical pmf from two-column `k probability` text.
/// `#` starts a comment; blank lines are skipped.
pub fn load_empirical_pmf<R: BufRead>(reader: R) -> Result<Pmf, DegreeError> {
    let mut pairs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let data = line.split('#').next().unwrap_or("").trim();
        if data.is_empty() {
            continue;
        }
        let mut parts = data.split_whitespace();
        let k: usize = parts
            .next()
            .ok_or_else(|| DegreeError::Parse {
                line: idx + 1,
                msg: "missing degree".into(),
            })?
            .parse()
            .map_err(|e| DegreeError::Parse {
                line: idx + 1,
                msg: format!("bad degree: {e}"),
            })?;
        let p: f64 = parts
            .next()
            .ok_or_else(|| DegreeError::Parse {
                line: idx + 1,
                msg: "missing probability".into(),
            })?
            .parse()
            .map_err(|e| DegreeError::Parse {
                line: idx + 1,
                msg: format!("bad probability: {e}"),
            })?;
        if parts.next().is_some() {
            return Err(DegreeError::Parse {
                line: idx + 1,
                msg: "expected exactly two columns".into(),
            });
        }
        pairs.push((k, p));
    }
    Pmf::from_pairs(&pairs)
}

/// Integrated bin masses of the continuous density `x^(-exponent)` on
/// `[k_min, k_max]`: degree `k` receives the mass of
/// `[max(k-1/2, k_min), min(k+1/2, k_max)]`. Keeps the discrete moments in
/// line with the continuous closed forms, unlike pointwise `k^(-exponent)`.
fn power_law_bin_masses(exponent: f64, k_min: usize, k_max: usize) -> Vec<f64> {
    if k_min == k_max {
        return vec![1.0];
    }
    let a = 1.0 - exponent;
    (k_min..=k_max)
        .map(|k| {
            let lo = (k as f64 - 0.5).max(k_min as f64);
            let hi = (k as f64 + 0.5).min(k_max as f64);
            (hi.powf(a) - lo.powf(a)) / a
        })
        .collect()
}

/// Log-domain Poisson weights on `[k_min, k_max]`, stable for large means.
fn poisson_weights(mean: f64, k_min: usize, k_max: usize) -> Vec<f64> {
    let logs: Vec<f64> = (k_min..=k_max).map(|k| poisson_log_pmf(mean, k)).collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    logs.iter().map(|&l| (l - m).exp()).collect()
}

fn poisson_log_pmf(mean: f64, k: usize) -> f64 {
    -mean + k as f64 * mean.ln() - ln_factorial(k)
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

/// `P(K > k)` for a Poisson with the given mean, summed from the far tail
/// for accuracy.
fn poisson_tail(mean: f64, k: usize) -> f64 {
    let hi = (mean + 20.0 * mean.sqrt() + 60.0).ceil() as usize;
    if k >= hi {
        return 0.0;
    }
    let mut tail = 0.0;
    for j in (k + 1..=hi).rev() {
        tail += poisson_log_pmf(mean, j).exp();
    }
    tail
}
