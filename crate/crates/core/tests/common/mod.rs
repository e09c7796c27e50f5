//! Brute-force references shared by the integration tests. Nothing here
//! calls the search or the probability code under test.

#![allow(dead_code)]

use beamtree::rng;
use beamtree::scorer::{LinearScorerParams, ProbabilityModel};
use beamtree::tree::{NodeId, TargetId, Tree};
use rand::Rng;

pub fn logistic(g: f64) -> f64 {
    1.0 / (1.0 + (-g).exp())
}

pub fn raw_score(params: &LinearScorerParams, x: &[f64], n: NodeId) -> f64 {
    params
        .weights(n)
        .iter()
        .zip(x)
        .map(|(w, v)| w * v)
        .sum::<f64>()
        + params.bias(n)
}

/// Node probability from first principles: `σ(g_n)` or the product of
/// `σ(g)` along the ancestors below the root.
pub fn reference_prob(
    tree: &Tree,
    params: &LinearScorerParams,
    model: ProbabilityModel,
    x: &[f64],
    n: NodeId,
) -> f64 {
    match model {
        ProbabilityModel::Direct => logistic(raw_score(params, x, n)),
        ProbabilityModel::Hierarchical => {
            let mut p = 1.0;
            let mut cur = n;
            while let Some(parent) = tree.parent(cur) {
                p *= logistic(raw_score(params, x, cur));
                cur = parent;
            }
            p
        }
    }
}

/// Targets of the `m` best leaves by `value`, ties to the lower leaf id.
pub fn argtopm_leaves(tree: &Tree, value: impl Fn(NodeId) -> f64, m: usize) -> Vec<TargetId> {
    let mut leaves: Vec<(NodeId, f64)> = tree.leaves().map(|l| (l, value(l))).collect();
    leaves.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut top: Vec<TargetId> = leaves[..m]
        .iter()
        .map(|&(l, _)| tree.target_of_leaf(l).unwrap())
        .collect();
    top.sort_unstable();
    top
}

/// Sum of the `m` largest entries.
pub fn top_sum(values: &[f64], m: usize) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v[..m].iter().sum()
}

pub fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Distinct continuous values, so no search decision is a tie.
pub fn random_eta(m: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, "test-eta");
    (0..m).map(|_| r.random::<f64>()).collect()
}

/// Oracle table: each node holds the largest η below it, found by walking
/// up from every leaf.
pub fn max_eta_table(tree: &Tree, eta: &[f64]) -> Vec<f64> {
    let mut table = vec![f64::NEG_INFINITY; tree.num_nodes()];
    for leaf in tree.leaves() {
        let e = eta[tree.target_of_leaf(leaf).unwrap()];
        let mut cur = Some(leaf);
        while let Some(n) = cur {
            table[n] = table[n].max(e);
            cur = tree.parent(n);
        }
    }
    table
}

pub fn random_params(tree: &Tree, d: usize, seed: u64, scale: f64) -> LinearScorerParams {
    let mut r = rng::stream(seed, "test-params");
    let mut params = LinearScorerParams::zeros(tree.num_nodes(), d);
    for n in 0..tree.num_nodes() {
        let w: Vec<f64> = (0..d).map(|_| scale * (r.random::<f64>() * 2.0 - 1.0)).collect();
        params.set_node(n, &w, scale * (r.random::<f64>() - 0.5)).unwrap();
    }
    params
}

pub fn random_x(d: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, "test-x");
    (0..d).map(|_| r.random::<f64>() * 2.0 - 1.0).collect()
}
