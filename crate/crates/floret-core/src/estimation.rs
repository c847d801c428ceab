//! Closed-form maximum-likelihood estimation.
//!
//! The multinomial log-likelihood kernel of a floret model separates into
//! floret-specific terms, and each floret maximizes in closed form:
//! `theta_hat_f = M_f y / S_f(y)`, where `S_f(y) = 1' M_f y` is the observed
//! exposure size of the floret. Estimates are exact rationals of the data.

use serde::{Deserialize, Serialize};

use crate::design::{DesignMatrix, ParameterVector};
use crate::error::{Error, Result};

/// Leaf-indexed observed counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedCounts {
    counts: Vec<u64>,
    total: u64,
}

impl ObservedCounts {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        let total = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyData);
        }
        Ok(ObservedCounts { counts, total })
    }

    /// Zero counts of a given length; only meaningful as a simulation
    /// result with `n = 0`.
    pub fn zeros(len: usize) -> Self {
        ObservedCounts {
            counts: vec![0; len],
            total: 0,
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Per-floret sufficient statistics M_f y and exposure sizes S_f(y).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SufficientStats {
    pub per_floret: Vec<Vec<u64>>,
    pub exposure_sizes: Vec<u64>,
}

/// An edge-probability estimate as the exact fraction (M_f y)_j / S_f(y).
///
/// Kept unreduced so reports show the same fractions a hand calculation
/// from the sufficient statistics produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalEstimate {
    pub num: u64,
    pub den: u64,
}

impl RationalEstimate {
    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Equality as rationals, regardless of reduction.
    pub fn equals(&self, num: u64, den: u64) -> bool {
        (self.num as u128) * (den as u128) == (num as u128) * (self.den as u128)
    }
}

impl std::fmt::Display for RationalEstimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Exposure statistics of one floret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloretExposure {
    /// Observed exposure size S_f(y), an integer count of treatment
    /// applications.
    pub observed: u64,
    /// Expected exposure size S_f(y_hat) at the fitted distribution.
    pub fitted: f64,
    /// Exposure ratio gamma_f = S_f(y_hat) / S_f(y).
    pub ratio: f64,
    /// Exposure rate S_f(N p_hat) / N, applications per subject.
    pub rate: f64,
}

/// Per-floret exposure sizes, ratios and rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureStats {
    pub per_floret: Vec<FloretExposure>,
}

/// Result of a maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta_hat: ParameterVector,
    pub theta_hat_rational: Vec<Vec<RationalEstimate>>,
    pub p_hat: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub exposure: ExposureStats,
    /// Some theta_hat component is exactly zero: the MLE lies on the simplex
    /// boundary and the asymptotic formulas do not apply.
    pub boundary: bool,
    pub log_likelihood: f64,
    pub sufficient: SufficientStats,
    pub n: u64,
}

/// Multinomial log-likelihood kernel, sum_f (M_f y)' log theta_f.
///
/// Terms with a zero sufficient-statistic coefficient contribute zero even
/// at a boundary theta (0 * log 0 = 0 convention).
pub fn log_likelihood(
    m: &DesignMatrix,
    theta: &ParameterVector,
    y: &ObservedCounts,
) -> Result<f64> {
    m.check_theta_shape(theta)?;
    let stats = sufficient_statistics(m, y)?;
    let mut ll = 0.0;
    for f in 0..m.floret_count() {
        for (j, &s) in stats.per_floret[f].iter().enumerate() {
            if s == 0 {
                continue;
            }
            let t = theta.component(f, j);
            if t <= 0.0 {
                return Err(Error::BoundaryTheta);
            }
            ll += s as f64 * t.ln();
        }
    }
    Ok(ll)
}

/// Exact per-floret sufficient statistics M_f y and exposure sizes.
pub fn sufficient_statistics(m: &DesignMatrix, y: &ObservedCounts) -> Result<SufficientStats> {
    if y.len() != m.leaf_count() {
        return Err(Error::DimensionMismatch {
            expected: m.leaf_count(),
            got: y.len(),
        });
    }
    let mut per_floret = Vec::with_capacity(m.floret_count());
    let mut exposure_sizes = Vec::with_capacity(m.floret_count());
    for f in 0..m.floret_count() {
        let stats: Vec<u64> = m
            .block_rows(f)
            .iter()
            .map(|row| row.iter().zip(y.counts()).map(|(&mu, &yi)| mu as u64 * yi).sum())
            .collect();
        exposure_sizes.push(stats.iter().sum());
        per_floret.push(stats);
    }
    Ok(SufficientStats {
        per_floret,
        exposure_sizes,
    })
}

/// Closed-form maximum-likelihood fit.
///
/// Fails only when some floret was never exposed (S_f(y) = 0). Boundary
/// estimates (a zero sufficient-statistic component) are returned with the
/// `boundary` flag set; covariance and p-values are refused downstream.
pub fn fit_mle(m: &DesignMatrix, y: &ObservedCounts) -> Result<FitResult> {
    let stats = sufficient_statistics(m, y)?;
    let mut rational = Vec::with_capacity(m.floret_count());
    let mut groups = Vec::with_capacity(m.floret_count());
    let mut boundary = false;
    for f in 0..m.floret_count() {
        let s = stats.exposure_sizes[f];
        if s == 0 {
            return Err(Error::ZeroExposure(f.to_string()));
        }
        let ests: Vec<RationalEstimate> = stats.per_floret[f]
            .iter()
            .map(|&num| RationalEstimate { num, den: s })
            .collect();
        boundary |= ests.iter().any(|e| e.num == 0);
        groups.push(ests.iter().map(RationalEstimate::value).collect());
        rational.push(ests);
    }
    let theta_hat = ParameterVector::new(groups)?;
    let p_hat = m.leaf_probabilities(&theta_hat)?;
    let n = y.total();
    let y_hat: Vec<f64> = p_hat.iter().map(|&p| p * n as f64).collect();

    let exposure = exposure_from_parts(m, &stats, &y_hat, n);
    let ll = if boundary {
        boundary_log_likelihood(&stats, &theta_hat)
    } else {
        log_likelihood(m, &theta_hat, y)?
    };

    Ok(FitResult {
        theta_hat,
        theta_hat_rational: rational,
        p_hat,
        y_hat,
        exposure,
        boundary,
        log_likelihood: ll,
        sufficient: stats,
        n,
    })
}

fn boundary_log_likelihood(stats: &SufficientStats, theta: &ParameterVector) -> f64 {
    let mut ll = 0.0;
    for (f, group) in stats.per_floret.iter().enumerate() {
        for (j, &s) in group.iter().enumerate() {
            if s > 0 {
                ll += s as f64 * theta.component(f, j).ln();
            }
        }
    }
    ll
}

fn exposure_from_parts(
    m: &DesignMatrix,
    stats: &SufficientStats,
    y_hat: &[f64],
    n: u64,
) -> ExposureStats {
    let fitted = m.exposure_at(y_hat);
    let per_floret = (0..m.floret_count())
        .map(|f| {
            let observed = stats.exposure_sizes[f];
            FloretExposure {
                observed,
                fitted: fitted[f],
                ratio: fitted[f] / observed as f64,
                rate: fitted[f] / n as f64,
            }
        })
        .collect();
    ExposureStats { per_floret }
}

/// Recomputes exposure statistics for a fit (the fit already carries them;
/// this is the standalone entry point).
pub fn exposure_statistics(
    m: &DesignMatrix,
    fit: &FitResult,
    y: &ObservedCounts,
) -> Result<ExposureStats> {
    let stats = sufficient_statistics(m, y)?;
    Ok(exposure_from_parts(m, &stats, &fit.y_hat, y.total()))
}

/// Componentwise proportionality diagnostics for one floret.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloretProportionality {
    /// (M_f y_hat)_j / (M_f y)_j per component; `None` where the observed
    /// component is zero and the ratio is undefined.
    pub ratios: Vec<Option<f64>>,
    /// Maximum relative deviation of a defined ratio from gamma_f.
    pub max_relative_deviation: f64,
    pub undefined_components: usize,
}

/// Diagnostic report for the theorem that all componentwise ratios
/// (M_f y_hat)_j / (M_f y)_j within a floret equal the exposure ratio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProportionalityReport {
    pub per_floret: Vec<FloretProportionality>,
    /// True iff every defined ratio is within 1e-9 relative of gamma_f.
    pub pass: bool,
}

pub fn check_proportionality(
    m: &DesignMatrix,
    fit: &FitResult,
    y: &ObservedCounts,
) -> Result<ProportionalityReport> {
    let stats = sufficient_statistics(m, y)?;
    let mut per_floret = Vec::with_capacity(m.floret_count());
    let mut pass = true;
    for f in 0..m.floret_count() {
        let gamma = fit.exposure.per_floret[f].ratio;
        let fitted_stats: Vec<f64> = m
            .block_rows(f)
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&fit.y_hat)
                    .map(|(&mu, &yh)| mu as f64 * yh)
                    .sum()
            })
            .collect();
        let mut max_dev = 0.0f64;
        let mut undefined = 0;
        let ratios: Vec<Option<f64>> = fitted_stats
            .iter()
            .zip(&stats.per_floret[f])
            .map(|(&fs, &os)| {
                if os == 0 {
                    undefined += 1;
                    None
                } else {
                    let r = fs / os as f64;
                    max_dev = max_dev.max((r - gamma).abs() / gamma.abs().max(f64::MIN_POSITIVE));
                    Some(r)
                }
            })
            .collect();
        pass &= max_dev < 1e-9;
        per_floret.push(FloretProportionality {
            ratios,
            max_relative_deviation: max_dev,
            undefined_components: undefined,
        });
    }
    Ok(ProportionalityReport { per_floret, pass })
}
