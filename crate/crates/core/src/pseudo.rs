//! Node pseudo targets: the ground-truth labels `z_n`, the oracle optimal
//! labels `z*_n` and their scorer-based recursive estimate `ẑ_n`.

use serde::{Deserialize, Serialize};

use crate::beam::NodeProbability;
use crate::error::{invalid, Result};
use crate::tree::{NodeId, TargetId, Tree};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelKind {
    GroundTruth,
    OptimalOracle,
    EstimatedOptimal,
}

/// Sparse binary node labels; nodes not listed are 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeLabelAssignment {
    pub kind: LabelKind,
    /// Positive node ids, ascending.
    ones: Vec<NodeId>,
}

impl NodeLabelAssignment {
    pub fn new(kind: LabelKind, mut ones: Vec<NodeId>) -> Self {
        ones.sort_unstable();
        ones.dedup();
        Self { kind, ones }
    }

    pub fn get(&self, n: NodeId) -> bool {
        self.ones.binary_search(&n).is_ok()
    }

    pub fn label(&self, n: NodeId) -> f64 {
        if self.get(n) {
            1.0
        } else {
            0.0
        }
    }

    pub fn ones(&self) -> &[NodeId] {
        &self.ones
    }

    /// Positive nodes at level `h`.
    pub fn ones_at_level<'a>(&'a self, tree: &'a Tree, h: usize) -> &'a [NodeId] {
        let range = tree.level_nodes(h);
        let lo = self.ones.partition_point(|&n| n < range.start);
        let hi = self.ones.partition_point(|&n| n < range.end);
        &self.ones[lo..hi]
    }
}

fn check_targets(tree: &Tree, targets: &[TargetId]) -> Result<()> {
    if let Some(&bad) = targets.iter().find(|&&t| t >= tree.num_targets()) {
        return invalid(format!(
            "target {bad} out of range for {} targets",
            tree.num_targets()
        ));
    }
    Ok(())
}

/// `z_n = 1` exactly on the ancestors (inclusive) of relevant leaves.
pub fn ground_truth_z(tree: &Tree, relevant: &[TargetId]) -> Result<NodeLabelAssignment> {
    check_targets(tree, relevant)?;
    let mut ones = Vec::with_capacity(relevant.len() * (tree.height() + 1));
    for &t in relevant {
        let mut cur = Some(tree.target_leaf_unchecked(t));
        while let Some(n) = cur {
            ones.push(n);
            cur = tree.parent(n);
        }
    }
    Ok(NodeLabelAssignment::new(LabelKind::GroundTruth, ones))
}

/// `z*_n`: the relevance of the highest-η leaf under `n`, ties to the
/// lowest leaf id. Needs the true η, so it is only available on
/// synthetic data.
pub fn optimal_z_star(tree: &Tree, y: &[bool], eta: &[f64]) -> Result<NodeLabelAssignment> {
    let m = tree.num_targets();
    if y.len() != m || eta.len() != m {
        return invalid(format!(
            "y has {} and eta has {} entries, expected {m}",
            y.len(),
            eta.len()
        ));
    }
    let mut best_leaf = vec![0; tree.num_nodes()];
    for leaf in tree.leaves() {
        best_leaf[leaf] = leaf;
    }
    for n in (0..tree.leaves().start).rev() {
        let mut best = usize::MAX;
        let mut best_eta = f64::NEG_INFINITY;
        for child in tree.children(n) {
            let cand = best_leaf[child];
            let e = eta[tree.leaf_target_unchecked(cand)];
            if e > best_eta {
                best_eta = e;
                best = cand;
            }
        }
        best_leaf[n] = best;
    }
    let ones = (0..tree.num_nodes())
        .filter(|&n| y[tree.leaf_target_unchecked(best_leaf[n])])
        .collect();
    Ok(NodeLabelAssignment::new(LabelKind::OptimalOracle, ones))
}

/// `ẑ_n`: a node copies the estimate of its most probable child; leaves
/// copy `y`. Only the ancestor closure of relevant leaves can be positive,
/// so nothing else is visited. Returns the labels and the number of
/// probability evaluations made.
///
/// Under the hierarchical model siblings share their parent factor, so the
/// argmax can be taken over conditional probabilities.
pub fn estimate_z_hat_counted<P: NodeProbability + ?Sized>(
    tree: &Tree,
    relevant: &[TargetId],
    probs: &P,
) -> Result<(NodeLabelAssignment, usize)> {
    let closure = ground_truth_z(tree, relevant)?;
    let nodes = closure.ones();
    let mut z_hat = vec![false; nodes.len()];
    let mut evaluations = 0;
    // Children have larger ids than their parents, so a descending sweep
    // settles every child before its parent.
    for i in (0..nodes.len()).rev() {
        let n = nodes[i];
        if tree.is_leaf(n) {
            z_hat[i] = true;
            continue;
        }
        let mut best = usize::MAX;
        let mut best_p = f64::NEG_INFINITY;
        for child in tree.children(n) {
            let p = probs.node_prob(child, 1.0)?;
            evaluations += 1;
            if p > best_p {
                best_p = p;
                best = child;
            }
        }
        z_hat[i] = match nodes[i + 1..].binary_search(&best) {
            Ok(j) => z_hat[i + 1 + j],
            Err(_) => false,
        };
    }
    let ones = nodes
        .iter()
        .zip(&z_hat)
        .filter_map(|(&n, &z)| z.then_some(n))
        .collect();
    Ok((
        NodeLabelAssignment::new(LabelKind::EstimatedOptimal, ones),
        evaluations,
    ))
}

pub fn estimate_z_hat<P: NodeProbability + ?Sized>(
    tree: &Tree,
    relevant: &[TargetId],
    probs: &P,
) -> Result<NodeLabelAssignment> {
    Ok(estimate_z_hat_counted(tree, relevant, probs)?.0)
}
