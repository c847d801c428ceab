//! Sequential-design trees with floret partitions.
//!
//! A model file declares a list of florets (shared outcome distributions) and
//! a recursive tree of nodes. Every non-terminal node names the floret whose
//! distribution governs it and maps each outcome label either to a child node
//! or to the string `"leaf"`. Leaves are ordered depth-first, children
//! visited in the floret's declared outcome order; every file-format consumer
//! relies on that ordering being deterministic.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Recursion guard for tree declarations.
const MAX_DEPTH: usize = 64;

/// A set of tree nodes sharing one outcome distribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Floret {
    pub id: String,
    pub outcomes: Vec<String>,
}

impl Floret {
    /// Number of outcomes (J_f).
    pub fn arity(&self) -> usize {
        self.outcomes.len()
    }
}

/// Raw model description as read from a model file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub florets: Vec<Floret>,
    pub tree: NodeSpec,
}

/// A node in the raw tree declaration: either the leaf marker or an inner
/// node with a floret reference and one child per outcome label.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeSpec {
    Leaf(String),
    Node {
        floret: String,
        children: HashMap<String, NodeSpec>,
    },
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// One edge target inside a validated tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Node(usize),
    Leaf(usize),
}

/// A validated non-terminal node.
#[derive(Debug, Clone)]
pub struct Node {
    /// Index into `SequentialTree::florets`.
    pub floret: usize,
    /// One edge per outcome, in declared outcome order.
    pub edges: Vec<Edge>,
}

/// A root-to-leaf path as a sequence of (floret index, outcome index) steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafPath {
    pub steps: Vec<(usize, usize)>,
}

impl LeafPath {
    /// Slash-joined outcome labels, e.g. `Yes/No`.
    pub fn label(&self, florets: &[Floret]) -> String {
        self.steps
            .iter()
            .map(|&(f, j)| florets[f].outcomes[j].as_str())
            .collect::<Vec<_>>()
            .join("/")
    }
}

/// A validated sequential-design tree. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SequentialTree {
    florets: Vec<Floret>,
    nodes: Vec<Node>,
    leaves: Vec<LeafPath>,
    /// Node indices belonging to each floret.
    members: Vec<Vec<usize>>,
}

impl SequentialTree {
    /// Validates a raw model description.
    ///
    /// Checks floret declarations (arity >= 2, unique labels, unique ids),
    /// node/floret consistency (every child label is a declared outcome, no
    /// label missing), that every declared floret is used, and that the tree
    /// has at least two leaves. Leaf ordering is fixed here: depth-first,
    /// children in declared outcome order.
    pub fn validate(spec: &ModelSpec) -> Result<Self> {
        let mut index = HashMap::new();
        for (f, fl) in spec.florets.iter().enumerate() {
            if fl.arity() < 2 {
                return Err(Error::TooFewOutcomes {
                    id: fl.id.clone(),
                    count: fl.arity(),
                });
            }
            let mut seen = std::collections::HashSet::new();
            for label in &fl.outcomes {
                if !seen.insert(label.as_str()) {
                    return Err(Error::DuplicateLabel {
                        id: fl.id.clone(),
                        label: label.clone(),
                    });
                }
            }
            if index.insert(fl.id.as_str(), f).is_some() {
                return Err(Error::DuplicateFloret(fl.id.clone()));
            }
        }

        let mut tree = SequentialTree {
            florets: spec.florets.clone(),
            nodes: Vec::new(),
            leaves: Vec::new(),
            members: vec![Vec::new(); spec.florets.len()],
        };
        let mut path = Vec::new();
        tree.visit(&spec.tree, &index, &mut path, 0)?;

        if tree.leaves.len() < 2 {
            return Err(Error::TooFewLeaves(tree.leaves.len()));
        }
        for (f, nodes) in tree.members.iter().enumerate() {
            if nodes.is_empty() {
                return Err(Error::UnusedFloret(tree.florets[f].id.clone()));
            }
        }
        Ok(tree)
    }

    fn visit(
        &mut self,
        spec: &NodeSpec,
        index: &HashMap<&str, usize>,
        path: &mut Vec<(usize, usize)>,
        depth: usize,
    ) -> Result<Edge> {
        if depth > MAX_DEPTH {
            return Err(Error::TooDeep(MAX_DEPTH));
        }
        match spec {
            NodeSpec::Leaf(marker) => {
                if marker != "leaf" {
                    return Err(Error::Data(format!(
                        "expected the string \"leaf\", found \"{marker}\""
                    )));
                }
                self.leaves.push(LeafPath { steps: path.clone() });
                Ok(Edge::Leaf(self.leaves.len() - 1))
            }
            NodeSpec::Node { floret, children } => {
                let f = *index
                    .get(floret.as_str())
                    .ok_or_else(|| Error::UnknownFloret(floret.clone()))?;
                let arity = self.florets[f].arity();
                if children.len() != arity {
                    return Err(Error::ArityMismatch {
                        id: floret.clone(),
                        declared: arity,
                        given: children.len(),
                    });
                }
                for label in children.keys() {
                    if !self.florets[f].outcomes.contains(label) {
                        return Err(Error::UnknownOutcome {
                            id: floret.clone(),
                            label: label.clone(),
                        });
                    }
                }
                let node_idx = self.nodes.len();
                self.nodes.push(Node {
                    floret: f,
                    edges: Vec::new(),
                });
                self.members[f].push(node_idx);
                // Children in declared outcome order, not JSON key order.
                let outcomes = self.florets[f].outcomes.clone();
                let mut edges = Vec::with_capacity(arity);
                for (j, label) in outcomes.iter().enumerate() {
                    path.push((f, j));
                    edges.push(self.visit(&children[label], index, path, depth + 1)?);
                    path.pop();
                }
                self.nodes[node_idx].edges = edges;
                Ok(Edge::Node(node_idx))
            }
        }
    }

    pub fn florets(&self) -> &[Floret] {
        &self.florets
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Leaf paths in the canonical depth-first order.
    pub fn leaves(&self) -> &[LeafPath] {
        &self.leaves
    }

    /// Number of leaves I.
    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    /// Number of non-terminal nodes K.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of florets F.
    pub fn floret_count(&self) -> usize {
        self.florets.len()
    }

    /// Node indices belonging to floret `f`.
    pub fn floret_members(&self, f: usize) -> &[usize] {
        &self.members[f]
    }

    /// Total number of edge parameters J = sum of floret arities.
    pub fn parameter_count(&self) -> usize {
        self.florets.iter().map(Floret::arity).sum()
    }

    /// Slash-joined labels of every leaf, in leaf order.
    pub fn leaf_labels(&self) -> Vec<String> {
        self.leaves.iter().map(|l| l.label(&self.florets)).collect()
    }

    /// Looks up a leaf index by its slash-joined label path.
    pub fn leaf_by_label(&self, label: &str) -> Option<usize> {
        self.leaves
            .iter()
            .position(|l| l.label(&self.florets) == label)
    }
}
