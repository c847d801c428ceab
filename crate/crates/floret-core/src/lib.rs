//! Multiplicative staged-tree ("floret") models for sequential experimental
//! designs without a prespecified number of observations.
//!
//! A sequential design is a tree of experiments: each non-terminal node is an
//! experiment whose outcome decides which experiment (if any) runs next.
//! Nodes sharing one outcome distribution form a *floret*. The leaf
//! probabilities are monomials in the edge probabilities, `p = prod_f
//! theta_f^{M_f'}`, where `M` is an integer design matrix counting how often
//! each edge parameter occurs on each root-to-leaf path.
//!
//! The crate derives design matrices from tree declarations, computes the
//! closed-form maximum-likelihood estimates and exposure statistics, the
//! asymptotic covariances of the estimates, goodness-of-fit tests, and runs
//! seeded Monte Carlo studies that verify the asymptotic theory empirically.

pub mod asymptotics;
pub mod design;
pub mod estimation;
pub mod gof;
pub mod model;
pub mod report;
pub mod simulate;

mod error;

pub use design::{DesignMatrix, ParameterVector};
pub use error::{Error, Result};
pub use estimation::{ExposureStats, FitResult, ObservedCounts, SufficientStats};
pub use model::{Floret, ModelSpec, SequentialTree};
pub use report::FitReport;
