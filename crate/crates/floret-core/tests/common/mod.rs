//! Shared helpers for the integration suites: random model generation, a
//! generic numerical likelihood maximizer used as an independent oracle for
//! the closed-form fit, and a finite-difference Jacobian.

// Each integration test binary compiles its own copy; not every binary uses
// every helper.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use floret_core::estimation::log_likelihood;
use floret_core::model::NodeSpec;
use floret_core::{DesignMatrix, ModelSpec, ObservedCounts, ParameterVector, SequentialTree};

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Generates a random valid model: 1-3 florets of arity 2-3 and a random
/// tree of depth at most 3. Only florets actually referenced by the tree are
/// declared, so the result always passes validation.
pub fn random_tree(rng: &mut impl Rng) -> SequentialTree {
    loop {
        let n_florets = rng.random_range(1..=3usize);
        let arities: Vec<usize> = (0..n_florets).map(|_| rng.random_range(2..=3)).collect();
        let mut used = vec![false; n_florets];
        let root = random_node(rng, &arities, &mut used, 0);
        let NodeSpec::Node { .. } = root else {
            continue; // depth-0 leaf, not a model
        };
        let florets: Vec<floret_core::Floret> = (0..n_florets)
            .filter(|&f| used[f])
            .map(|f| floret_core::Floret {
                id: format!("f{f}"),
                outcomes: (0..arities[f]).map(|j| format!("o{j}")).collect(),
            })
            .collect();
        let spec = ModelSpec { florets, tree: root };
        match SequentialTree::validate(&spec) {
            Ok(tree) if tree.leaf_count() >= 2 => return tree,
            _ => continue,
        }
    }
}

fn random_node(rng: &mut impl Rng, arities: &[usize], used: &mut [bool], depth: usize) -> NodeSpec {
    // Leaves become more likely deeper in the tree; depth 3 is always a leaf.
    if depth >= 3 || (depth > 0 && rng.random_bool(0.35 + 0.2 * depth as f64)) {
        return NodeSpec::Leaf("leaf".to_string());
    }
    let f = rng.random_range(0..arities.len());
    used[f] = true;
    let children: HashMap<String, NodeSpec> = (0..arities[f])
        .map(|j| (format!("o{j}"), random_node(rng, arities, used, depth + 1)))
        .collect();
    NodeSpec::Node {
        floret: format!("f{f}"),
        children,
    }
}

/// Random interior parameter vector with every component at least 1e-3.
pub fn random_theta(tree: &SequentialTree, rng: &mut impl Rng) -> ParameterVector {
    let groups = tree
        .florets()
        .iter()
        .map(|fl| {
            let raw: Vec<f64> = (0..fl.arity()).map(|_| 0.05 + rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / total).collect()
        })
        .collect();
    let theta = ParameterVector::new(groups).expect("normalized weights form a simplex");
    debug_assert!(theta.groups().iter().flatten().all(|&t| t >= 1e-3));
    theta
}

/// Random observed counts with positive totals, drawn by walking the tree.
pub fn random_counts(
    tree: &SequentialTree,
    theta: &ParameterVector,
    n: u64,
    seed: u64,
) -> ObservedCounts {
    floret_core::simulate::sample_path(tree, theta, n, seed).expect("valid simulation inputs")
}

/// Softmax over (z_1, ..., z_{J-1}, 0).
fn softmax(z: &[f64]) -> Vec<f64> {
    let mut e: Vec<f64> = z.iter().map(|&v| v.exp()).collect();
    e.push(1.0);
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

fn theta_from_logits(m: &DesignMatrix, z: &[f64]) -> ParameterVector {
    let mut groups = Vec::with_capacity(m.floret_count());
    let mut at = 0;
    for f in 0..m.floret_count() {
        let k = m.block_arity(f) - 1;
        groups.push(softmax(&z[at..at + k]));
        at += k;
    }
    ParameterVector::new(groups).expect("softmax output is a simplex")
}

/// Maximizes the log-likelihood numerically by Nelder-Mead over the softmax
/// parameterization, independent of the closed-form estimator. Returns the
/// maximizing parameter vector.
pub fn numerical_mle(m: &DesignMatrix, y: &ObservedCounts) -> ParameterVector {
    let dim: usize = (0..m.floret_count()).map(|f| m.block_arity(f) - 1).sum();
    let objective = |z: &[f64]| -> f64 {
        let theta = theta_from_logits(m, z);
        // Negated: Nelder-Mead below minimizes.
        -log_likelihood(m, &theta, y).unwrap_or(f64::INFINITY)
    };
    let mut best = nelder_mead(&objective, &vec![0.0; dim]);
    // One restart from the found optimum tightens the simplex.
    for _ in 0..2 {
        best = nelder_mead(&objective, &best);
    }
    theta_from_logits(m, &best)
}

/// Plain Nelder-Mead with standard coefficients. Good enough as an oracle
/// for smooth concave likelihoods in at most ~6 dimensions.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: &[f64]) -> Vec<f64> {
    let n = start.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), f(start)));
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += 0.5;
        let fv = f(&v);
        simplex.push((v, fv));
    }
    for _ in 0..2000 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        if spread.abs() < 1e-13 {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(v, _)| v[i]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let reflect: Vec<f64> = (0..n)
            .map(|i| centroid[i] + alpha * (centroid[i] - worst.0[i]))
            .collect();
        let fr = f(&reflect);
        if fr < simplex[0].1 {
            let expand: Vec<f64> = (0..n)
                .map(|i| centroid[i] + gamma * (reflect[i] - centroid[i]))
                .collect();
            let fe = f(&expand);
            simplex[n] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
        } else {
            let contract: Vec<f64> = (0..n)
                .map(|i| centroid[i] + rho * (worst.0[i] - centroid[i]))
                .collect();
            let fc = f(&contract);
            if fc < worst.1 {
                simplex[n] = (contract, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let shrunk: Vec<f64> = (0..n)
                        .map(|i| best[i] + sigma * (entry.0[i] - best[i]))
                        .collect();
                    entry.1 = f(&shrunk);
                    entry.0 = shrunk;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0].0.clone()
}

/// Central finite-difference Jacobian of the leaf probabilities with respect
/// to the reduced coordinates (last component of each floret eliminated).
pub fn finite_difference_jacobian(m: &DesignMatrix, theta: &ParameterVector) -> Vec<Vec<f64>> {
    const H: f64 = 1e-6;
    let reduced = theta.reduced();
    let probe = |z: &[f64]| -> Vec<f64> {
        let mut groups = Vec::with_capacity(m.floret_count());
        let mut at = 0;
        for f in 0..m.floret_count() {
            let k = m.block_arity(f) - 1;
            let mut g: Vec<f64> = z[at..at + k].to_vec();
            g.push(1.0 - g.iter().sum::<f64>());
            groups.push(g);
            at += k;
        }
        let theta = ParameterVector::new(groups).expect("perturbed point stays a simplex");
        m.leaf_probabilities(&theta).expect("interior theta")
    };
    let mut jac = vec![vec![0.0; reduced.len()]; m.leaf_count()];
    for (c, _) in reduced.iter().enumerate() {
        let mut plus = reduced.clone();
        plus[c] += H;
        let mut minus = reduced.clone();
        minus[c] -= H;
        let (pp, pm) = (probe(&plus), probe(&minus));
        for i in 0..m.leaf_count() {
            jac[i][c] = (pp[i] - pm[i]) / (2.0 * H);
        }
    }
    jac
}
