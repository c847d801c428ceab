//! Design matrices and parameter vectors.
//!
//! The design matrix M of a tree is the J x I integer matrix whose entry
//! counts how many times an edge parameter occurs on a root-to-leaf path.
//! Rows are grouped into contiguous per-floret blocks M_f, in floret
//! declaration order; columns follow the canonical leaf order.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::SequentialTree;

/// Integer design matrix with floret block structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignMatrix {
    /// J x I entries, row-major.
    entries: Vec<Vec<u32>>,
    /// Row range of each floret block.
    blocks: Vec<std::ops::Range<usize>>,
    n_leaves: usize,
}

impl DesignMatrix {
    /// Builds the design matrix of a validated tree by walking every
    /// root-to-leaf path and counting edge parameters.
    pub fn from_tree(tree: &SequentialTree) -> Self {
        let n_leaves = tree.leaf_count();
        let mut blocks = Vec::with_capacity(tree.floret_count());
        let mut start = 0;
        for fl in tree.florets() {
            blocks.push(start..start + fl.arity());
            start += fl.arity();
        }
        let mut entries = vec![vec![0u32; n_leaves]; start];
        for (i, leaf) in tree.leaves().iter().enumerate() {
            for &(f, j) in &leaf.steps {
                entries[blocks[f].start + j][i] += 1;
            }
        }
        DesignMatrix {
            entries,
            blocks,
            n_leaves,
        }
    }

    /// Number of leaves I (columns).
    pub fn leaf_count(&self) -> usize {
        self.n_leaves
    }

    /// Total number of edge parameters J (rows).
    pub fn parameter_count(&self) -> usize {
        self.entries.len()
    }

    /// Number of florets F.
    pub fn floret_count(&self) -> usize {
        self.blocks.len()
    }

    /// Arity J_f of floret block `f`.
    pub fn block_arity(&self, f: usize) -> usize {
        self.blocks[f].len()
    }

    pub fn entry(&self, row: usize, col: usize) -> u32 {
        self.entries[row][col]
    }

    /// Entry mu_{fji} addressed by block.
    pub fn block_entry(&self, f: usize, j: usize, i: usize) -> u32 {
        self.entries[self.blocks[f].start + j][i]
    }

    /// Rows of block f, each of length I.
    pub fn block_rows(&self, f: usize) -> &[Vec<u32>] {
        &self.entries[self.blocks[f].clone()]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.entries
    }

    /// True iff the all-ones row lies in the rational row space of block
    /// M_f. Overall-effect detection is a discrete yes/no property, so this
    /// is computed by exact rational Gaussian elimination rather than a
    /// floating-point rank.
    pub fn floret_has_overall_effect(&self, f: usize) -> bool {
        let rows: Vec<Vec<BigRational>> = self
            .block_rows(f)
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&x| BigRational::from(BigInt::from(x)))
                    .collect()
            })
            .collect();
        ones_in_row_space(&rows, self.n_leaves)
    }

    /// Model degrees of freedom, (I - 1) - sum_f (J_f - 1).
    pub fn degrees_of_freedom(&self) -> Result<u32> {
        let free: i64 = self.blocks.iter().map(|b| b.len() as i64 - 1).sum();
        let df = (self.n_leaves as i64 - 1) - free;
        if df < 0 {
            return Err(Error::NegativeDf(df));
        }
        Ok(df as u32)
    }

    /// Leaf probabilities p_i = prod_f prod_j theta_{fj}^{mu_{fji}}.
    ///
    /// Boundary components are accepted (0^0 = 1), so the limits of fitted
    /// probabilities at a boundary MLE are still well defined.
    pub fn leaf_probabilities(&self, theta: &ParameterVector) -> Result<Vec<f64>> {
        self.check_theta_shape(theta)?;
        let mut p = vec![1.0; self.n_leaves];
        for f in 0..self.floret_count() {
            for j in 0..self.block_arity(f) {
                let t = theta.component(f, j);
                for (i, pi) in p.iter_mut().enumerate() {
                    let mu = self.block_entry(f, j, i);
                    if mu > 0 {
                        *pi *= t.powi(mu as i32);
                    }
                }
            }
        }
        let sum: f64 = p.iter().sum();
        debug_assert!(
            (sum - 1.0).abs() < 1e-10,
            "leaf probabilities sum to {sum}, not 1"
        );
        Ok(p)
    }

    /// Per-floret exposure size at a distribution: S_f(p) = 1' M_f p.
    pub fn exposure_at(&self, p: &[f64]) -> Vec<f64> {
        (0..self.floret_count())
            .map(|f| {
                self.block_rows(f)
                    .iter()
                    .map(|row| row.iter().zip(p).map(|(&mu, &pi)| mu as f64 * pi).sum::<f64>())
                    .sum()
            })
            .collect()
    }

    pub(crate) fn check_theta_shape(&self, theta: &ParameterVector) -> Result<()> {
        if theta.floret_count() != self.floret_count() {
            return Err(Error::DimensionMismatch {
                expected: self.floret_count(),
                got: theta.floret_count(),
            });
        }
        for f in 0..self.floret_count() {
            if theta.floret(f).len() != self.block_arity(f) {
                return Err(Error::DimensionMismatch {
                    expected: self.block_arity(f),
                    got: theta.floret(f).len(),
                });
            }
        }
        Ok(())
    }
}

/// True iff (1, ..., 1) of length `width` is a rational linear combination
/// of `rows`. Exact forward elimination with partial structural pivoting.
fn ones_in_row_space(rows: &[Vec<BigRational>], width: usize) -> bool {
    let mut basis: Vec<Vec<BigRational>> = Vec::new();
    for row in rows {
        let mut r = row.clone();
        reduce(&mut r, &basis);
        if r.iter().any(|x| !x.is_zero()) {
            normalize(&mut r);
            basis.push(r);
        }
    }
    let mut target = vec![BigRational::one(); width];
    reduce(&mut target, &basis);
    target.iter().all(Zero::is_zero)
}

/// Subtracts from `row` its projection onto each basis row (each basis row
/// has a leading 1 at its pivot column).
fn reduce(row: &mut [BigRational], basis: &[Vec<BigRational>]) {
    for b in basis {
        let pivot = b.iter().position(|x| !x.is_zero()).unwrap();
        if row[pivot].is_zero() {
            continue;
        }
        let factor = row[pivot].clone();
        for (r, bv) in row.iter_mut().zip(b) {
            *r -= &factor * bv;
        }
    }
}

fn normalize(row: &mut [BigRational]) {
    let pivot = row.iter().position(|x| !x.is_zero()).unwrap();
    let lead = row[pivot].clone();
    for r in row.iter_mut() {
        *r /= &lead;
    }
}

/// Per-floret edge probabilities, each group on the closed simplex.
///
/// Interiority (all components strictly positive) is required by most
/// downstream operations and checked there; the container itself admits
/// boundary points so that boundary MLEs can be represented.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    groups: Vec<Vec<f64>>,
}

/// Simplex sum tolerance.
const SIMPLEX_TOL: f64 = 1e-12;

impl ParameterVector {
    /// Validates per-floret simplex membership: components in [0, 1], sums
    /// equal to 1 within 1e-12.
    pub fn new(groups: Vec<Vec<f64>>) -> Result<Self> {
        for (f, g) in groups.iter().enumerate() {
            if g.iter().any(|&t| !(0.0..=1.0).contains(&t) || t.is_nan()) {
                return Err(Error::OutOfRange { id: f.to_string() });
            }
            let sum: f64 = g.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::NotSimplex {
                    id: f.to_string(),
                    sum,
                });
            }
        }
        Ok(ParameterVector { groups })
    }

    pub fn floret_count(&self) -> usize {
        self.groups.len()
    }

    pub fn floret(&self, f: usize) -> &[f64] {
        &self.groups[f]
    }

    pub fn groups(&self) -> &[Vec<f64>] {
        &self.groups
    }

    pub fn component(&self, f: usize, j: usize) -> f64 {
        self.groups[f][j]
    }

    /// True iff every component is strictly positive.
    pub fn is_interior(&self) -> bool {
        self.groups.iter().flatten().all(|&t| t > 0.0)
    }

    pub fn require_interior(&self) -> Result<()> {
        if self.is_interior() {
            Ok(())
        } else {
            Err(Error::BoundaryTheta)
        }
    }

    /// Non-redundant components (all but the last per floret), concatenated.
    pub fn reduced(&self) -> Vec<f64> {
        self.groups
            .iter()
            .flat_map(|g| g[..g.len() - 1].iter().copied())
            .collect()
    }
}

/// Canonical example models, also shipped as JSON files under `fixtures/`.
pub mod fixtures {
    use crate::model::{ModelSpec, SequentialTree};

    macro_rules! fixture {
        ($name:ident, $file:expr) => {
            pub fn $name() -> SequentialTree {
                let spec = ModelSpec::from_json(include_str!(concat!(
                    "../fixtures/",
                    $file
                )))
                .expect("fixture parses");
                SequentialTree::validate(&spec).expect("fixture is valid")
            }
        };
    }

    fixture!(calves, "calves.json");
    fixture!(hwe, "hwe.json");
    fixture!(vaccine, "vaccine.json");
    fixture!(johnson, "johnson.json");
    fixture!(regimen, "regimen.json");

    /// All five canonical models with their names.
    pub fn all() -> Vec<(&'static str, SequentialTree)> {
        vec![
            ("calves", calves()),
            ("hwe", hwe()),
            ("vaccine", vaccine()),
            ("johnson", johnson()),
            ("regimen", regimen()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(tree: &SequentialTree) -> Vec<Vec<u32>> {
        DesignMatrix::from_tree(tree).entries
    }

    #[test]
    fn hwe_matrix() {
        assert_eq!(
            matrix(&fixtures::hwe()),
            vec![vec![2, 1, 1, 0], vec![0, 1, 1, 2]]
        );
    }

    #[test]
    fn calves_matrix() {
        assert_eq!(matrix(&fixtures::calves()), vec![vec![2, 1, 0], vec![0, 1, 1]]);
    }

    #[test]
    fn vaccine_matrix() {
        assert_eq!(
            matrix(&fixtures::vaccine()),
            vec![vec![3, 2, 1, 0], vec![0, 1, 1, 1]]
        );
    }

    #[test]
    fn johnson_matrix() {
        assert_eq!(
            matrix(&fixtures::johnson()),
            vec![
                vec![1, 1, 1, 0, 0, 0, 0, 0, 0],
                vec![0, 0, 0, 1, 1, 1, 0, 0, 0],
                vec![0, 0, 0, 0, 0, 0, 1, 1, 1],
                vec![2, 1, 0, 2, 1, 0, 2, 1, 0],
                vec![0, 1, 1, 0, 1, 1, 0, 1, 1],
            ]
        );
    }

    #[test]
    fn regimen_matrix() {
        assert_eq!(
            matrix(&fixtures::regimen()),
            vec![
                vec![2, 2, 1, 0, 0],
                vec![0, 0, 1, 1, 1],
                vec![1, 0, 0, 1, 0],
                vec![0, 1, 0, 0, 1],
            ]
        );
    }

    #[test]
    fn one_node_matrix_is_identity() {
        let spec = crate::model::ModelSpec::from_json(
            r#"{"florets":[{"id":"t","outcomes":["a","b","c"]}],
                "tree":{"floret":"t","children":{"a":"leaf","b":"leaf","c":"leaf"}}}"#,
        )
        .unwrap();
        let tree = SequentialTree::validate(&spec).unwrap();
        assert_eq!(
            matrix(&tree),
            vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]
        );
    }

    #[test]
    fn overall_effect() {
        assert!(DesignMatrix::from_tree(&fixtures::hwe()).floret_has_overall_effect(0));
        assert!(!DesignMatrix::from_tree(&fixtures::calves()).floret_has_overall_effect(0));
        let m = DesignMatrix::from_tree(&fixtures::regimen());
        assert!(!m.floret_has_overall_effect(0));
        assert!(!m.floret_has_overall_effect(1));
        // Johnson: severity block has the OE (its rows sum to 1'), the
        // improvement block does not.
        let m = DesignMatrix::from_tree(&fixtures::johnson());
        assert!(m.floret_has_overall_effect(0));
        assert!(!m.floret_has_overall_effect(1));
    }

    #[test]
    fn identity_block_has_overall_effect() {
        let spec = crate::model::ModelSpec::from_json(
            r#"{"florets":[{"id":"t","outcomes":["a","b","c"]}],
                "tree":{"floret":"t","children":{"a":"leaf","b":"leaf","c":"leaf"}}}"#,
        )
        .unwrap();
        let tree = SequentialTree::validate(&spec).unwrap();
        assert!(DesignMatrix::from_tree(&tree).floret_has_overall_effect(0));
    }

    #[test]
    fn degrees_of_freedom() {
        assert_eq!(
            DesignMatrix::from_tree(&fixtures::johnson())
                .degrees_of_freedom()
                .unwrap(),
            5
        );
        assert_eq!(
            DesignMatrix::from_tree(&fixtures::vaccine())
                .degrees_of_freedom()
                .unwrap(),
            2
        );
        assert_eq!(
            DesignMatrix::from_tree(&fixtures::calves())
                .degrees_of_freedom()
                .unwrap(),
            1
        );
    }

    #[test]
    fn calves_leaf_probabilities() {
        let m = DesignMatrix::from_tree(&fixtures::calves());
        let theta = ParameterVector::new(vec![vec![0.5, 0.5]]).unwrap();
        let p = m.leaf_probabilities(&theta).unwrap();
        assert_eq!(p, vec![0.25, 0.25, 0.5]);
    }

    #[test]
    fn regimen_leaf_probabilities() {
        let m = DesignMatrix::from_tree(&fixtures::regimen());
        let theta = ParameterVector::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let p = m.leaf_probabilities(&theta).unwrap();
        assert_eq!(p, vec![0.125, 0.125, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn every_column_has_positive_entry() {
        for (_, tree) in fixtures::all() {
            let m = DesignMatrix::from_tree(&tree);
            for i in 0..m.leaf_count() {
                assert!((0..m.parameter_count()).any(|j| m.entry(j, i) > 0));
            }
        }
    }

    #[test]
    fn block_column_sums_count_path_nodes() {
        for (_, tree) in fixtures::all() {
            let m = DesignMatrix::from_tree(&tree);
            for (i, leaf) in tree.leaves().iter().enumerate() {
                for f in 0..m.floret_count() {
                    let col_sum: u32 = (0..m.block_arity(f))
                        .map(|j| m.block_entry(f, j, i))
                        .sum();
                    let on_path = leaf.steps.iter().filter(|&&(g, _)| g == f).count();
                    assert_eq!(col_sum as usize, on_path);
                }
            }
        }
    }

    #[test]
    fn non_simplex_theta_rejected() {
        assert!(ParameterVector::new(vec![vec![0.5, 0.4]]).is_err());
        assert!(ParameterVector::new(vec![vec![1.2, -0.2]]).is_err());
    }
}
