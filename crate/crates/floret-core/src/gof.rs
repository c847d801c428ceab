//! Goodness-of-fit statistics and the chi-square reference distribution.

use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::estimation::{FitResult, ObservedCounts};

/// Goodness-of-fit summary of a fitted model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GofSummary {
    pub x2: f64,
    pub g2: f64,
    pub df: u32,
    /// Upper-tail chi-square probabilities; absent for boundary fits and
    /// for df = 0.
    pub p_x2: Option<f64>,
    pub p_g2: Option<f64>,
    /// Classical small-expected-count caution: some fitted count < 5.
    pub small_expected_warning: bool,
}

/// Pearson statistic sum (y - y_hat)^2 / y_hat.
pub fn pearson_x2(y: &ObservedCounts, y_hat: &[f64]) -> Result<f64> {
    check_fitted(y, y_hat)?;
    Ok(y
        .counts()
        .iter()
        .zip(y_hat)
        .map(|(&yi, &yh)| {
            let d = yi as f64 - yh;
            d * d / yh
        })
        .sum())
}

/// Deviance 2 sum y log(y / y_hat), with zero observed counts contributing
/// zero.
pub fn deviance_g2(y: &ObservedCounts, y_hat: &[f64]) -> Result<f64> {
    check_fitted(y, y_hat)?;
    Ok(2.0
        * y.counts()
            .iter()
            .zip(y_hat)
            .map(|(&yi, &yh)| {
                if yi == 0 {
                    0.0
                } else {
                    yi as f64 * (yi as f64 / yh).ln()
                }
            })
            .sum::<f64>())
}

fn check_fitted(y: &ObservedCounts, y_hat: &[f64]) -> Result<()> {
    if y.len() != y_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: y_hat.len(),
        });
    }
    if let Some(i) = y_hat.iter().position(|&v| v <= 0.0) {
        return Err(Error::ZeroFitted(i));
    }
    Ok(())
}

/// Upper-tail probability P(X > x) for a chi-square variable with `df`
/// degrees of freedom: the regularized upper incomplete gamma Q(df/2, x/2).
pub fn chisq_upper_tail(x: f64, df: u32) -> Result<f64> {
    if df == 0 {
        return Err(Error::InvalidDf);
    }
    if !(x >= 0.0) {
        return Err(Error::Data(format!("statistic must be >= 0, got {x}")));
    }
    Ok(upper_regularized_gamma(df as f64 / 2.0, x / 2.0))
}

/// Regularized upper incomplete gamma Q(a, x), absolute error below 1e-10.
/// Series for x < a + 1, Lentz continued fraction otherwise.
fn upper_regularized_gamma(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - lower_gamma_series(a, x)
    } else {
        upper_gamma_cf(a, x)
    }
}

const GAMMA_EPS: f64 = 1e-15;
const GAMMA_MAX_ITER: usize = 500;

fn lower_gamma_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn upper_gamma_cf(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Lanczos log-gamma (g = 7, n = 9).
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    let x = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, &c) in COEFFS.iter().enumerate() {
        acc += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Full goodness-of-fit summary for a fit. P-values are plug-in asymptotic
/// chi-square tails, omitted at a boundary fit or when df = 0.
pub fn summarize(m: &DesignMatrix, fit: &FitResult, y: &ObservedCounts) -> Result<GofSummary> {
    let x2 = pearson_x2(y, &fit.y_hat)?;
    let g2 = deviance_g2(y, &fit.y_hat)?;
    let df = m.degrees_of_freedom()?;
    let (p_x2, p_g2) = if fit.boundary || df == 0 {
        (None, None)
    } else {
        (
            Some(chisq_upper_tail(x2, df)?),
            Some(chisq_upper_tail(g2, df)?),
        )
    };
    Ok(GofSummary {
        x2,
        g2,
        df,
        p_x2,
        p_g2,
        small_expected_warning: fit.y_hat.iter().any(|&v| v < 5.0),
    })
}
