//! Seeded data generation and Monte Carlo verification.
//!
//! Two samplers produce data from a floret model: walking the tree subject
//! by subject (the data-generating process itself) and drawing from the
//! induced multinomial directly. Replicate `k` of a Monte Carlo run uses a
//! ChaCha12 stream that is a pure function of `(seed, k)`, so replicates
//! may execute in any order, concurrently, and still reproduce bit-for-bit.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::Binomial;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{covariance_theta, reduced_dim};
use crate::design::{DesignMatrix, ParameterVector};
use crate::error::{Error, Result};
use crate::estimation::{fit_mle, ObservedCounts};
use crate::gof::{deviance_g2, pearson_x2};
use crate::model::{Edge, SequentialTree};

/// Which data generator a simulation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Subject-by-subject root-to-leaf walk.
    Path,
    /// Direct draw from Mult(n, p(theta)).
    Multinomial,
}

/// Configuration of a Monte Carlo study.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub theta0: ParameterVector,
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    pub sampler: Sampler,
}

/// Aggregated results of a Monte Carlo study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub reps: u64,
    pub n: u64,
    pub seed: u64,
    /// Replicates excluded because the MLE landed on the simplex boundary.
    pub boundary_count: u64,
    /// Empirical mean of sqrt(N) (theta~_hat - theta~_0).
    pub scaled_error_mean: Vec<f64>,
    /// Empirical covariance of sqrt(N) (theta~_hat - theta~_0).
    pub scaled_error_covariance: Vec<Vec<f64>>,
    /// Reference covariance Phi_theta evaluated at theta_0.
    pub phi_theta: Vec<Vec<f64>>,
    pub mean_exposure_ratio: Vec<f64>,
    pub mean_exposure_rate: Vec<f64>,
    pub mean_x2: f64,
    pub mean_g2: f64,
}

/// RNG for replicate `k` of a run with the given seed.
fn replicate_rng(seed: u64, k: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Draws one outcome index from a floret distribution.
fn draw_outcome(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    probs.len() - 1
}

/// Samples `n` subjects by walking the tree root-to-leaf, each edge drawn
/// from the current node's floret distribution. Boundary theta is allowed
/// (degenerate walks simply always take the same edge).
pub fn sample_path(
    tree: &SequentialTree,
    theta0: &ParameterVector,
    n: u64,
    seed: u64,
) -> Result<ObservedCounts> {
    if theta0.floret_count() != tree.floret_count() {
        return Err(Error::DimensionMismatch {
            expected: tree.floret_count(),
            got: theta0.floret_count(),
        });
    }
    let mut rng = replicate_rng(seed, 0);
    Ok(sample_path_with(tree, theta0, n, &mut rng))
}

fn sample_path_with(
    tree: &SequentialTree,
    theta0: &ParameterVector,
    n: u64,
    rng: &mut impl Rng,
) -> ObservedCounts {
    let mut counts = vec![0u64; tree.leaf_count()];
    for _ in 0..n {
        let mut node = 0usize;
        loop {
            let floret = tree.nodes()[node].floret;
            let j = draw_outcome(theta0.floret(floret), rng);
            match tree.nodes()[node].edges[j] {
                Edge::Node(next) => node = next,
                Edge::Leaf(leaf) => {
                    counts[leaf] += 1;
                    break;
                }
            }
        }
    }
    observed(counts)
}

/// Draws counts from Mult(n, p(theta0)) by the conditional-binomial method.
pub fn sample_multinomial(
    m: &DesignMatrix,
    theta0: &ParameterVector,
    n: u64,
    seed: u64,
) -> Result<ObservedCounts> {
    theta0.require_interior()?;
    let p = m.leaf_probabilities(theta0)?;
    let mut rng = replicate_rng(seed, 0);
    Ok(sample_multinomial_with(&p, n, &mut rng))
}

fn sample_multinomial_with(p: &[f64], n: u64, rng: &mut impl Rng) -> ObservedCounts {
    let mut counts = vec![0u64; p.len()];
    let mut remaining = n;
    let mut rest = 1.0;
    for (i, &pi) in p.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == p.len() - 1 || pi >= rest {
            counts[i] = remaining;
            break;
        }
        let q = (pi / rest).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, q)
            .expect("valid binomial parameters")
            .sample(rng);
        counts[i] = draw;
        remaining -= draw;
        rest -= pi;
    }
    observed(counts)
}

fn observed(counts: Vec<u64>) -> ObservedCounts {
    if counts.iter().sum::<u64>() == 0 {
        ObservedCounts::zeros(counts.len())
    } else {
        ObservedCounts::new(counts).expect("non-empty counts")
    }
}

struct ReplicateOutcome {
    scaled_error: Option<Vec<f64>>,
    ratios: Vec<f64>,
    rates: Vec<f64>,
    x2: f64,
    g2: f64,
    boundary: bool,
}

/// Runs a seeded Monte Carlo study: samples each replicate, fits it with
/// the closed form, and aggregates estimation errors, exposure statistics
/// and goodness-of-fit statistics. Boundary replicates are counted and
/// excluded from the covariance aggregation. The report depends only on
/// the configuration, not on replicate execution order.
pub fn run_monte_carlo(
    cfg: &SimulationConfig,
    tree: &SequentialTree,
    m: &DesignMatrix,
) -> Result<MonteCarloReport> {
    cfg.theta0.require_interior()?;
    m.check_theta_shape(&cfg.theta0)?;
    if cfg.n == 0 || cfg.reps == 0 {
        return Err(Error::Data("n and reps must be at least 1".into()));
    }
    let p0 = m.leaf_probabilities(&cfg.theta0)?;
    let reduced0 = cfg.theta0.reduced();
    let sqrt_n = (cfg.n as f64).sqrt();

    let outcomes: Vec<ReplicateOutcome> = (0..cfg.reps)
        .into_par_iter()
        .map(|k| {
            let mut rng = replicate_rng(cfg.seed, k + 1);
            let y = match cfg.sampler {
                Sampler::Path => sample_path_with(tree, &cfg.theta0, cfg.n, &mut rng),
                Sampler::Multinomial => sample_multinomial_with(&p0, cfg.n, &mut rng),
            };
            let fit = fit_mle(m, &y).expect("exposure positive for interior theta0, n >= 1");
            let boundary = fit.boundary;
            let scaled_error = if boundary {
                None
            } else {
                Some(
                    fit.theta_hat
                        .reduced()
                        .iter()
                        .zip(&reduced0)
                        .map(|(&t, &t0)| sqrt_n * (t - t0))
                        .collect(),
                )
            };
            let (x2, g2) = if boundary {
                (f64::NAN, f64::NAN)
            } else {
                (
                    pearson_x2(&y, &fit.y_hat).expect("interior fit"),
                    deviance_g2(&y, &fit.y_hat).expect("interior fit"),
                )
            };
            ReplicateOutcome {
                scaled_error,
                ratios: fit.exposure.per_floret.iter().map(|e| e.ratio).collect(),
                rates: fit.exposure.per_floret.iter().map(|e| e.rate).collect(),
                x2,
                g2,
                boundary,
            }
        })
        .collect();

    let dim = reduced_dim(m);
    let f_count = m.floret_count();
    let mut mean = vec![0.0; dim];
    let mut cov = vec![vec![0.0; dim]; dim];
    let mut ratio_sum = vec![0.0; f_count];
    let mut rate_sum = vec![0.0; f_count];
    let mut x2_sum = 0.0;
    let mut g2_sum = 0.0;
    let mut boundary_count = 0u64;
    let mut used = 0u64;

    for o in &outcomes {
        if o.boundary {
            boundary_count += 1;
            continue;
        }
        used += 1;
        let e = o.scaled_error.as_ref().unwrap();
        for (i, &v) in e.iter().enumerate() {
            mean[i] += v;
        }
        for f in 0..f_count {
            ratio_sum[f] += o.ratios[f];
            rate_sum[f] += o.rates[f];
        }
        x2_sum += o.x2;
        g2_sum += o.g2;
    }
    if used == 0 {
        return Err(Error::Data(
            "every replicate produced a boundary fit; increase n".into(),
        ));
    }
    let used_f = used as f64;
    for v in &mut mean {
        *v /= used_f;
    }
    for o in &outcomes {
        if let Some(e) = &o.scaled_error {
            for i in 0..dim {
                for j in 0..dim {
                    cov[i][j] += (e[i] - mean[i]) * (e[j] - mean[j]);
                }
            }
        }
    }
    let denom = if used > 1 { used_f - 1.0 } else { 1.0 };
    for row in &mut cov {
        for v in row.iter_mut() {
            *v /= denom;
        }
    }

    let phi = covariance_theta(m, &cfg.theta0)?;
    let phi_rows = (0..dim)
        .map(|r| (0..dim).map(|c| phi[(r, c)]).collect())
        .collect();

    Ok(MonteCarloReport {
        reps: cfg.reps,
        n: cfg.n,
        seed: cfg.seed,
        boundary_count,
        scaled_error_mean: mean,
        scaled_error_covariance: cov,
        phi_theta: phi_rows,
        mean_exposure_ratio: ratio_sum.iter().map(|s| s / used_f).collect(),
        mean_exposure_rate: rate_sum.iter().map(|s| s / used_f).collect(),
        mean_x2: x2_sum / used_f,
        mean_g2: g2_sum / used_f,
    })
}
