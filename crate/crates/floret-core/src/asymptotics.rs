//! Asymptotic covariance of the estimates.
//!
//! With the last component of each floret eliminated, the model has J - F
//! free parameters. The Jacobian of the leaf probabilities is analytic in
//! the design-matrix exponents, the information-style matrix A'A is
//! block-diagonal with closed-form floret blocks, and its inverse is the
//! exposure-rate-scaled multinomial covariance
//! `Phi_f = (1/S_f) (diag(theta~_f) - theta~_f theta~_f')`.
//! The closed forms are cross-checked against the Jacobian triple product
//! and finite differences in the test suites.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::design::{DesignMatrix, ParameterVector};
use crate::error::{Error, Result};
use crate::estimation::FitResult;

/// Derivative of each leaf probability with respect to each non-redundant
/// parameter, I x (J - F). Column order: florets in block order, components
/// j = 1 .. J_f - 1 within a floret.
pub fn jacobian(m: &DesignMatrix, theta: &ParameterVector) -> Result<DMatrix<f64>> {
    m.check_theta_shape(theta)?;
    theta.require_interior()?;
    let p = m.leaf_probabilities(theta)?;
    let i_count = m.leaf_count();
    let cols = reduced_dim(m);
    let mut jac = DMatrix::zeros(i_count, cols);
    let mut col = 0;
    for f in 0..m.floret_count() {
        let arity = m.block_arity(f);
        let last = arity - 1;
        let t_last = theta.component(f, last);
        for j in 0..last {
            let t = theta.component(f, j);
            for i in 0..i_count {
                let mu_j = m.block_entry(f, j, i) as f64;
                let mu_last = m.block_entry(f, last, i) as f64;
                jac[(i, col)] = p[i] * (mu_j / t - mu_last / t_last);
            }
            col += 1;
        }
    }
    Ok(jac)
}

/// Number of non-redundant parameters J - F.
pub fn reduced_dim(m: &DesignMatrix) -> usize {
    (0..m.floret_count()).map(|f| m.block_arity(f) - 1).sum()
}

/// Closed-form A'A: block-diagonal with floret blocks
/// `S_f(p(theta)) * (diag(theta~_f^{-1}) + 1 1' / theta_{f,J_f})`.
pub fn ata_matrix(m: &DesignMatrix, theta: &ParameterVector) -> Result<DMatrix<f64>> {
    m.check_theta_shape(theta)?;
    theta.require_interior()?;
    let p = m.leaf_probabilities(theta)?;
    let exposure = m.exposure_at(&p);
    let dim = reduced_dim(m);
    let mut ata = DMatrix::zeros(dim, dim);
    let mut offset = 0;
    for f in 0..m.floret_count() {
        let k = m.block_arity(f) - 1;
        let t_last = theta.component(f, m.block_arity(f) - 1);
        for a in 0..k {
            for b in 0..k {
                let mut v = 1.0 / t_last;
                if a == b {
                    v += 1.0 / theta.component(f, a);
                }
                ata[(offset + a, offset + b)] = exposure[f] * v;
            }
        }
        offset += k;
    }
    Ok(ata)
}

/// Asymptotic covariances of sqrt(N) (theta~_hat - theta~) and of
/// sqrt(N) (p_hat - p), plus the exposure sizes at the evaluation point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceResult {
    /// (J - F) x (J - F), block-diagonal across florets.
    pub phi_theta: Vec<Vec<f64>>,
    /// I x I, symmetric PSD with zero row sums.
    pub phi_p: Vec<Vec<f64>>,
    /// S_f(p(theta)) per floret.
    pub exposure_sizes: Vec<f64>,
}

/// Closed-form covariance of the non-redundant edge-probability estimates:
/// block f is `(1/S_f(p(theta))) * (diag(theta~_f) - theta~_f theta~_f')`.
/// Constructed directly; never a numerical inverse.
pub fn covariance_theta(m: &DesignMatrix, theta: &ParameterVector) -> Result<DMatrix<f64>> {
    m.check_theta_shape(theta)?;
    theta.require_interior()?;
    let p = m.leaf_probabilities(theta)?;
    let exposure = m.exposure_at(&p);
    let dim = reduced_dim(m);
    let mut phi = DMatrix::zeros(dim, dim);
    let mut offset = 0;
    for f in 0..m.floret_count() {
        let k = m.block_arity(f) - 1;
        for a in 0..k {
            let ta = theta.component(f, a);
            for b in 0..k {
                let tb = theta.component(f, b);
                let mut v = -ta * tb;
                if a == b {
                    v += ta;
                }
                phi[(offset + a, offset + b)] = v / exposure[f];
            }
        }
        offset += k;
    }
    Ok(phi)
}

/// Delta-method covariance of the leaf-probability estimates,
/// `Phi_p = J Phi_theta J'` with J the analytic Jacobian.
pub fn covariance_p(m: &DesignMatrix, theta: &ParameterVector) -> Result<DMatrix<f64>> {
    let jac = jacobian(m, theta)?;
    let phi = covariance_theta(m, theta)?;
    Ok(&jac * phi * jac.transpose())
}

/// Both covariance matrices at the given evaluation point.
pub fn covariance(m: &DesignMatrix, theta: &ParameterVector) -> Result<CovarianceResult> {
    let phi_theta = covariance_theta(m, theta)?;
    let phi_p = covariance_p(m, theta)?;
    let p = m.leaf_probabilities(theta)?;
    Ok(CovarianceResult {
        phi_theta: to_rows(&phi_theta),
        phi_p: to_rows(&phi_p),
        exposure_sizes: m.exposure_at(&p),
    })
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

/// Plug-in standard errors of every edge probability and leaf probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StandardErrors {
    /// Per floret, one entry per component including the redundant last one.
    pub se_theta: Vec<Vec<f64>>,
    pub se_p: Vec<f64>,
}

/// Wald standard errors at the fit: SE(theta_hat) = sqrt(Phi_jj / N), with
/// the dropped last component's variance taken from the linear combination
/// -sum of the floret's free components.
pub fn standard_errors(fit: &FitResult, m: &DesignMatrix) -> Result<StandardErrors> {
    if fit.boundary {
        return Err(Error::BoundaryFit);
    }
    let n = fit.n as f64;
    let phi_theta = covariance_theta(m, &fit.theta_hat)?;
    let phi_p = covariance_p(m, &fit.theta_hat)?;
    let mut se_theta = Vec::with_capacity(m.floret_count());
    let mut offset = 0;
    for f in 0..m.floret_count() {
        let k = m.block_arity(f) - 1;
        let mut group: Vec<f64> = (0..k)
            .map(|j| (phi_theta[(offset + j, offset + j)] / n).sqrt())
            .collect();
        // Var(theta_last) = 1' Phi_f 1 since theta_last = 1 - sum theta~.
        let mut var_last = 0.0;
        for a in 0..k {
            for b in 0..k {
                var_last += phi_theta[(offset + a, offset + b)];
            }
        }
        group.push((var_last / n).sqrt());
        se_theta.push(group);
        offset += k;
    }
    let se_p = (0..m.leaf_count())
        .map(|i| (phi_p[(i, i)] / n).sqrt())
        .collect();
    Ok(StandardErrors { se_theta, se_p })
}
