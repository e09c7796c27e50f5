//! Level-wise beam search over the label tree.

use std::cmp::Ordering;

use crate::error::{invalid, Result};
use crate::scorer::{log_sigmoid, sigmoid, LinearScorerParams, ProbabilityModel};
use crate::tree::{NodeId, TargetId, Tree};

/// Source of node relevance probabilities during beam search.
pub trait NodeProbability {
    /// `p_g(z_n = 1 | x)` for `node`, given the probability already
    /// accumulated for its parent on the beam.
    fn node_prob(&self, node: NodeId, parent_prob: f64) -> Result<f64>;
}

/// A precomputed node-id-indexed probability table.
impl NodeProbability for [f64] {
    fn node_prob(&self, node: NodeId, _parent_prob: f64) -> Result<f64> {
        match self.get(node) {
            Some(&p) => Ok(p),
            None => invalid(format!("no probability for node {node}")),
        }
    }
}

impl NodeProbability for Vec<f64> {
    fn node_prob(&self, node: NodeId, parent_prob: f64) -> Result<f64> {
        self.as_slice().node_prob(node, parent_prob)
    }
}

/// A linear scorer evaluated at one feature vector.
#[derive(Clone, Copy, Debug)]
pub struct ScoredQuery<'a> {
    pub params: &'a LinearScorerParams,
    pub model: ProbabilityModel,
    pub x: &'a [f64],
}

impl<'a> ScoredQuery<'a> {
    pub fn new(
        params: &'a LinearScorerParams,
        model: ProbabilityModel,
        x: &'a [f64],
    ) -> Result<Self> {
        if x.len() != params.feature_dim() {
            return invalid(format!(
                "feature vector has length {}, expected {}",
                x.len(),
                params.feature_dim()
            ));
        }
        Ok(Self { params, model, x })
    }
}

impl NodeProbability for ScoredQuery<'_> {
    #[inline]
    fn node_prob(&self, node: NodeId, parent_prob: f64) -> Result<f64> {
        if node >= self.params.num_nodes() {
            return invalid(format!("no scorer entry for node {node}"));
        }
        let g = self.params.score_unchecked(self.x, node);
        if !g.is_finite() {
            return invalid(format!("non-finite score at node {node}"));
        }
        Ok(match self.model {
            ProbabilityModel::Direct => sigmoid(g),
            // Accumulate the path product incrementally.
            ProbabilityModel::Hierarchical => (parent_prob.ln() + log_sigmoid(g)).exp(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamEntry {
    pub node: NodeId,
    pub prob: f64,
}

/// Retained nodes of one level, ordered by (probability desc, id asc).
#[derive(Clone, Debug, PartialEq)]
pub struct Beam {
    pub level: usize,
    pub entries: Vec<BeamEntry>,
}

impl Beam {
    pub fn root(tree: &Tree) -> Self {
        Self {
            level: 0,
            entries: vec![BeamEntry {
                node: tree.root(),
                prob: 1.0,
            }],
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.iter().map(|e| e.node)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[inline]
fn rank_order(a: &BeamEntry, b: &BeamEntry) -> Ordering {
    b.prob.total_cmp(&a.prob).then(a.node.cmp(&b.node))
}

/// Optional per-node keys that break probability ties before the node id.
fn keyed_order(ties: Option<&[u64]>) -> impl Fn(&BeamEntry, &BeamEntry) -> Ordering + '_ {
    move |a, b| {
        let key = |e: &BeamEntry| ties.map_or(0, |t| t[e.node]);
        b.prob
            .total_cmp(&a.prob)
            .then(key(a).cmp(&key(b)))
            .then(a.node.cmp(&b.node))
    }
}

/// Children of every beam node, ascending by id.
pub fn expand(tree: &Tree, beam: &Beam) -> Result<Vec<NodeId>> {
    if beam.level >= tree.height() {
        return invalid("cannot expand a beam at the leaf level");
    }
    let mut out = Vec::with_capacity(beam.len() * tree.arity());
    for node in beam.nodes() {
        out.extend(tree.children(node));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// The `k` best candidates, ties broken towards the lower node id.
pub fn select_topk(mut candidates: Vec<BeamEntry>, k: usize) -> Result<Vec<BeamEntry>> {
    if k < 1 {
        return invalid("beam size must be at least 1");
    }
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, rank_order);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(rank_order);
    Ok(candidates)
}

fn select_topk_by(
    mut candidates: Vec<BeamEntry>,
    k: usize,
    order: &impl Fn(&BeamEntry, &BeamEntry) -> Ordering,
) -> Vec<BeamEntry> {
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, order);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(order);
    candidates
}

/// Everything a beam search touched: the candidate set `B̃_h` of every
/// level `1..=H` and the final leaf beam.
#[derive(Clone, Debug)]
pub struct BeamTrace {
    /// `candidates[h - 1]` holds `B̃_h` with probabilities.
    pub candidates: Vec<Vec<BeamEntry>>,
    pub beams: Vec<Beam>,
    /// Number of node probability evaluations.
    pub evaluations: usize,
}

impl BeamTrace {
    pub fn final_beam(&self) -> &Beam {
        self.beams.last().expect("trace holds at least the root beam")
    }
}

pub fn beam_search_traced<P: NodeProbability + ?Sized>(
    tree: &Tree,
    probs: &P,
    k: usize,
) -> Result<BeamTrace> {
    beam_search_traced_with_ties(tree, probs, k, None)
}

/// Beam search where equal probabilities are ordered by `ties[node]`
/// (ascending) before the node id. `None` is the plain id rule.
pub fn beam_search_traced_with_ties<P: NodeProbability + ?Sized>(
    tree: &Tree,
    probs: &P,
    k: usize,
    ties: Option<&[u64]>,
) -> Result<BeamTrace> {
    if k < 1 {
        return invalid("beam size must be at least 1");
    }
    if let Some(t) = ties {
        if t.len() != tree.num_nodes() {
            return invalid(format!("{} tie keys for {} nodes", t.len(), tree.num_nodes()));
        }
    }
    let order = keyed_order(ties);
    let mut beam = Beam::root(tree);
    let mut trace = BeamTrace {
        candidates: Vec::with_capacity(tree.height()),
        beams: Vec::with_capacity(tree.height() + 1),
        evaluations: 0,
    };
    for level in 1..=tree.height() {
        let mut cands = Vec::with_capacity(beam.len() * tree.arity());
        for parent in &beam.entries {
            for child in tree.children(parent.node) {
                cands.push(BeamEntry {
                    node: child,
                    prob: probs.node_prob(child, parent.prob)?,
                });
                trace.evaluations += 1;
            }
        }
        let entries = select_topk_by(cands.clone(), k, &order);
        trace.candidates.push(cands);
        trace.beams.push(std::mem::replace(&mut beam, Beam { level, entries }));
    }
    trace.beams.push(beam);
    Ok(trace)
}

/// `B_H(x)`: the leaf-level beam.
pub fn beam_search<P: NodeProbability + ?Sized>(tree: &Tree, probs: &P, k: usize) -> Result<Beam> {
    let mut trace = beam_search_traced(tree, probs, k)?;
    Ok(trace.beams.pop().expect("non-empty trace"))
}

pub fn beam_search_with_ties<P: NodeProbability + ?Sized>(
    tree: &Tree,
    probs: &P,
    k: usize,
    ties: &[u64],
) -> Result<Beam> {
    let mut trace = beam_search_traced_with_ties(tree, probs, k, Some(ties))?;
    Ok(trace.beams.pop().expect("non-empty trace"))
}

/// Targets of the top-`m` entries of a leaf beam, in rank order.
pub fn retrieve_topm(tree: &Tree, beam: &Beam, m: usize) -> Result<Vec<TargetId>> {
    if m < 1 || m > beam.len() {
        return invalid(format!("m = {m} outside 1..={}", beam.len()));
    }
    if beam.level != tree.height() {
        return invalid("retrieval needs a leaf-level beam");
    }
    beam.entries[..m]
        .iter()
        .map(|e| tree.target_of_leaf(e.node))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seven() -> Tree {
        Tree::with_leaf_order(4, 2, vec![0, 1, 2, 3]).unwrap()
    }

    /// Root children (0.9, 0.8), leaves (0.1, 0.7, 0.95, 0.2).
    fn greedy_table() -> Vec<f64> {
        vec![1.0, 0.9, 0.8, 0.1, 0.7, 0.95, 0.2]
    }

    fn entries(pairs: &[(NodeId, f64)]) -> Vec<BeamEntry> {
        pairs
            .iter()
            .map(|&(node, prob)| BeamEntry { node, prob })
            .collect()
    }

    #[test]
    fn expand_examples() {
        let tree = seven();
        assert_eq!(expand(&tree, &Beam::root(&tree)).unwrap(), vec![1, 2]);
        let beam = Beam {
            level: 1,
            entries: entries(&[(1, 0.5), (2, 0.4)]),
        };
        assert_eq!(expand(&tree, &beam).unwrap(), vec![3, 4, 5, 6]);
        let leaves = Beam {
            level: 2,
            entries: entries(&[(3, 0.5)]),
        };
        assert!(expand(&tree, &leaves).is_err());
    }

    #[test]
    fn expand_respects_uneven_child_counts() {
        let tree = Tree::random(5, 2, 0).unwrap();
        // Level 2 = {3, 4, 5}; node 5 has the single child 10.
        let beam = Beam {
            level: 2,
            entries: entries(&[(5, 0.9), (3, 0.1)]),
        };
        assert_eq!(expand(&tree, &beam).unwrap(), vec![6, 7, 10]);
    }

    #[test]
    fn select_topk_examples() {
        let top = select_topk(entries(&[(3, 0.9), (4, 0.2), (5, 0.6)]), 2).unwrap();
        assert_eq!(top, entries(&[(3, 0.9), (5, 0.6)]));
        let tied = select_topk(entries(&[(9, 0.5), (4, 0.5), (7, 0.5)]), 2).unwrap();
        assert_eq!(tied, entries(&[(4, 0.5), (7, 0.5)]));
        let all = select_topk(entries(&[(3, 0.1), (4, 0.2), (5, 0.3)]), 10).unwrap();
        assert_eq!(all.len(), 3);
        assert!(select_topk(vec![], 0).is_err());
    }

    #[test]
    fn tie_keys_order_equal_probabilities() {
        let tree = seven();
        let flat = vec![0.5; tree.num_nodes()];
        let plain = beam_search(&tree, &flat, 1).unwrap();
        assert_eq!(plain.nodes().collect::<Vec<_>>(), vec![3]);
        let ties = [0, 9, 1, 5, 5, 2, 0];
        let keyed = beam_search_with_ties(&tree, &flat, 1, &ties).unwrap();
        assert_eq!(keyed.nodes().collect::<Vec<_>>(), vec![6]);
        // Keys never override a strict probability difference.
        let keyed = beam_search_with_ties(&tree, &greedy_table(), 1, &ties).unwrap();
        assert_eq!(keyed.entries, entries(&[(4, 0.7)]));
        assert!(beam_search_with_ties(&tree, &flat, 1, &[0; 3]).is_err());
    }

    #[test]
    fn greedy_search_misses_the_best_leaf() {
        let tree = seven();
        let beam = beam_search(&tree, &greedy_table(), 1).unwrap();
        assert_eq!(beam.entries, entries(&[(4, 0.7)]));
        let wide = beam_search(&tree, &greedy_table(), 2).unwrap();
        let nodes: Vec<_> = wide.nodes().collect();
        assert_eq!(nodes, vec![5, 4]);
    }

    #[test]
    fn no_pruning_ranks_all_leaves() {
        let tree = seven();
        let beam = beam_search(&tree, &greedy_table(), 4).unwrap();
        let nodes: Vec<_> = beam.nodes().collect();
        assert_eq!(nodes, vec![5, 4, 6, 3]);
    }

    #[test]
    fn retrieve_examples() {
        let tree = seven();
        let beam = Beam {
            level: 2,
            entries: entries(&[(5, 0.95), (4, 0.7)]),
        };
        assert_eq!(retrieve_topm(&tree, &beam, 1).unwrap(), vec![2]);
        assert_eq!(retrieve_topm(&tree, &beam, 2).unwrap(), vec![2, 1]);
        assert!(retrieve_topm(&tree, &beam, 0).is_err());
        assert!(retrieve_topm(&tree, &beam, 3).is_err());

        let tied = beam_search(&tree, &vec![1.0, 0.5, 0.5, 0.3, 0.3, 0.3, 0.3], 4).unwrap();
        assert_eq!(retrieve_topm(&tree, &tied, 1).unwrap(), vec![0]);
    }

    #[test]
    fn evaluation_count_is_bounded() {
        let tree = Tree::random(100, 3, 4).unwrap();
        let table: Vec<f64> = (0..tree.num_nodes())
            .map(|n| ((n * 7919) % 101) as f64 / 101.0)
            .collect();
        for k in [1, 2, 5, 17] {
            let trace = beam_search_traced(&tree, &table, k).unwrap();
            assert!(trace.evaluations <= tree.height() * tree.arity() * k);
            for (h, beam) in trace.beams.iter().enumerate() {
                assert_eq!(beam.level, h);
                assert!(beam.len() <= k);
            }
        }
    }

    #[test]
    fn hierarchical_query_accumulates_path_product() {
        let tree = seven();
        let mut params = LinearScorerParams::zeros(7, 1);
        params.set_node(1, &[0.0], 2.0).unwrap();
        params.set_node(4, &[0.0], -1.0).unwrap();
        let q = ScoredQuery::new(&params, ProbabilityModel::Hierarchical, &[1.0]).unwrap();
        let beam = beam_search(&tree, &q, 4).unwrap();
        let p4 = beam.entries.iter().find(|e| e.node == 4).unwrap().prob;
        assert!((p4 - sigmoid(2.0) * sigmoid(-1.0)).abs() < 1e-14);
    }
}
