//! Machine- and human-readable fit reports.

use serde::{Deserialize, Serialize};

use crate::asymptotics::{self, StandardErrors};
use crate::design::DesignMatrix;
use crate::error::Result;
use crate::estimation::{
    check_proportionality, ExposureStats, FitResult, ObservedCounts, ProportionalityReport,
    RationalEstimate,
};
use crate::gof::{self, GofSummary};
use crate::model::SequentialTree;

/// One edge-probability estimate in a report: exact rational and decimal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub label: String,
    pub rational: RationalEstimate,
    pub decimal: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloretEstimates {
    pub id: String,
    pub theta: Vec<ThetaEstimate>,
}

/// A matrix serialized row-major with explicit dimensions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixJson {
    fn from_rows(rows: &[Vec<f64>]) -> Self {
        MatrixJson {
            rows: rows.len(),
            cols: rows.first().map_or(0, Vec::len),
            data: rows.iter().flatten().copied().collect(),
        }
    }
}

/// Full report of one model fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub model_leaves: Vec<String>,
    pub n: u64,
    pub theta_hat: Vec<FloretEstimates>,
    pub p_hat: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub exposure: ExposureStats,
    pub proportionality: ProportionalityReport,
    pub boundary: bool,
    pub log_likelihood: f64,
    pub gof: GofSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_theta: Option<MatrixJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_p: Option<MatrixJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se_theta: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se_p: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl FitReport {
    /// Assembles the full report for a fit. Covariance and standard errors
    /// are omitted (with a warning) when the fit is on the boundary.
    pub fn build(
        tree: &SequentialTree,
        m: &DesignMatrix,
        fit: &FitResult,
        y: &ObservedCounts,
    ) -> Result<Self> {
        let theta_hat = tree
            .florets()
            .iter()
            .enumerate()
            .map(|(f, fl)| FloretEstimates {
                id: fl.id.clone(),
                theta: fl
                    .outcomes
                    .iter()
                    .enumerate()
                    .map(|(j, label)| ThetaEstimate {
                        label: label.clone(),
                        rational: fit.theta_hat_rational[f][j],
                        decimal: fit.theta_hat.component(f, j),
                    })
                    .collect(),
            })
            .collect();

        let proportionality = check_proportionality(m, fit, y)?;
        let gof = gof::summarize(m, fit, y)?;

        let (phi_theta, phi_p, se_theta, se_p, warning) = if fit.boundary {
            (
                None,
                None,
                None,
                None,
                Some("MLE on the simplex boundary; covariance and p-values unavailable".into()),
            )
        } else {
            let cov = asymptotics::covariance(m, &fit.theta_hat)?;
            let StandardErrors { se_theta, se_p } = asymptotics::standard_errors(fit, m)?;
            (
                Some(MatrixJson::from_rows(&cov.phi_theta)),
                Some(MatrixJson::from_rows(&cov.phi_p)),
                Some(se_theta),
                Some(se_p),
                None,
            )
        };

        Ok(FitReport {
            model_leaves: tree.leaf_labels(),
            n: y.total(),
            theta_hat,
            p_hat: fit.p_hat.clone(),
            y_hat: fit.y_hat.clone(),
            exposure: fit.exposure.clone(),
            proportionality,
            boundary: fit.boundary,
            log_likelihood: fit.log_likelihood,
            gof,
            phi_theta,
            phi_p,
            se_theta,
            se_p,
            warning,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned text rendering, decimals at six significant digits.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "N = {}", self.n);
        let _ = writeln!(out, "log-likelihood kernel = {:.6}", self.log_likelihood);
        if let Some(w) = &self.warning {
            let _ = writeln!(out, "warning: {w}");
        }
        let _ = writeln!(out, "\nedge probability estimates:");
        for group in &self.theta_hat {
            for est in &group.theta {
                let _ = writeln!(
                    out,
                    "  {:<12} {:<12} = {:>12}  ({:.6})",
                    group.id, est.label, est.rational, est.decimal
                );
            }
        }
        let _ = writeln!(out, "\nleaf  observed-order path, fitted p, fitted count:");
        for (i, label) in self.model_leaves.iter().enumerate() {
            let _ = writeln!(
                out,
                "  {:<20} p = {:.6}  y_hat = {:.6}",
                label, self.p_hat[i], self.y_hat[i]
            );
        }
        let _ = writeln!(out, "\nexposure per floret:");
        for (group, e) in self.theta_hat.iter().zip(&self.exposure.per_floret) {
            let _ = writeln!(
                out,
                "  {:<12} S(y) = {}  S(y_hat) = {:.6}  gamma = {:.6}  rate = {:.6}",
                group.id, e.observed, e.fitted, e.ratio, e.rate
            );
        }
        let g = &self.gof;
        let _ = writeln!(
            out,
            "\ngoodness of fit: X2 = {:.6}  G2 = {:.6}  df = {}",
            g.x2, g.g2, g.df
        );
        if let (Some(px), Some(pg)) = (g.p_x2, g.p_g2) {
            let _ = writeln!(out, "p-values (asymptotic): p_X2 = {px:.6}  p_G2 = {pg:.6}");
        }
        if g.small_expected_warning {
            let _ = writeln!(out, "note: some fitted counts are below 5");
        }
        if let Some(se) = &self.se_theta {
            let _ = writeln!(out, "\nstandard errors (theta):");
            for (group, ses) in self.theta_hat.iter().zip(se) {
                for (est, s) in group.theta.iter().zip(ses) {
                    let _ = writeln!(out, "  {:<12} {:<12} {:.6}", group.id, est.label, s);
                }
            }
        }
        out
    }
}
