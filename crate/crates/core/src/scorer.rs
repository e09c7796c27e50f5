//! Linear node-wise scorer `g(x, n) = θ_n·x + b_n` and the two ways of
//! turning scores into node relevance probabilities.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::tree::{NodeId, Tree};

/// Standard deviation of the Gaussian used to initialize weights and biases.
pub const INIT_STD: f64 = 0.01;

/// Overflow-safe logistic function.
#[inline]
pub fn sigmoid(g: f64) -> f64 {
    if g >= 0.0 {
        1.0 / (1.0 + (-g).exp())
    } else {
        let e = g.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^v)` without overflow.
#[inline]
pub fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// `ln σ(g)`.
#[inline]
pub fn log_sigmoid(g: f64) -> f64 {
    -softplus(-g)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbabilityModel {
    /// `p(z_n = 1 | x) = σ(g(x, n))`, as in TDM and OTM.
    Direct,
    /// `p(z_n = 1 | x)` is the product of conditional sigmoids along the
    /// path, as in PLT.
    Hierarchical,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearScorerParams {
    feature_dim: usize,
    /// Row-major `num_nodes × feature_dim`. Row 0 (root) is never trained.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

/// JSON checkpoint, indexed by node id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerCheckpoint {
    pub feature_dim: usize,
    pub model_tag: ProbabilityModel,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl LinearScorerParams {
    pub fn zeros(num_nodes: usize, feature_dim: usize) -> Self {
        Self {
            feature_dim,
            weights: vec![0.0; num_nodes * feature_dim],
            biases: vec![0.0; num_nodes],
        }
    }

    /// Weights and biases drawn i.i.d. from `N(0, INIT_STD²)`.
    pub fn init_random(tree: &Tree, feature_dim: usize, seed: u64) -> Self {
        let mut params = Self::zeros(tree.num_nodes(), feature_dim);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut rng = rng::stream(seed, "init");
        for v in params.weights.iter_mut().chain(params.biases.iter_mut()) {
            *v = normal.sample(&mut rng);
        }
        params
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_nodes(&self) -> usize {
        self.biases.len()
    }

    pub fn weights(&self, n: NodeId) -> &[f64] {
        &self.weights[n * self.feature_dim..(n + 1) * self.feature_dim]
    }

    pub fn weights_mut(&mut self, n: NodeId) -> &mut [f64] {
        &mut self.weights[n * self.feature_dim..(n + 1) * self.feature_dim]
    }

    pub fn bias(&self, n: NodeId) -> f64 {
        self.biases[n]
    }

    pub fn bias_mut(&mut self, n: NodeId) -> &mut f64 {
        &mut self.biases[n]
    }

    pub fn set_node(&mut self, n: NodeId, weights: &[f64], bias: f64) -> Result<()> {
        if n >= self.num_nodes() || weights.len() != self.feature_dim {
            return invalid(format!("cannot set node {n} with {} weights", weights.len()));
        }
        self.weights_mut(n).copy_from_slice(weights);
        self.biases[n] = bias;
        Ok(())
    }

    /// Checks that the parameters cover every node of `tree`.
    pub fn check_bound(&self, tree: &Tree) -> Result<()> {
        if self.num_nodes() != tree.num_nodes() {
            return invalid(format!(
                "scorer has {} nodes, tree has {}",
                self.num_nodes(),
                tree.num_nodes()
            ));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(|v| v.is_finite())
    }

    /// `g(x, n)` without argument checks.
    #[inline]
    pub fn score_unchecked(&self, x: &[f64], n: NodeId) -> f64 {
        let w = self.weights(n);
        let mut acc = self.biases[n];
        for (a, b) in w.iter().zip(x) {
            acc += a * b;
        }
        acc
    }

    pub fn score(&self, x: &[f64], n: NodeId) -> Result<f64> {
        if x.len() != self.feature_dim {
            return invalid(format!(
                "feature vector has length {}, expected {}",
                x.len(),
                self.feature_dim
            ));
        }
        if n >= self.num_nodes() {
            return invalid(format!("no scorer entry for node {n}"));
        }
        Ok(self.score_unchecked(x, n))
    }

    pub fn to_checkpoint(&self, model: ProbabilityModel) -> ScorerCheckpoint {
        ScorerCheckpoint {
            feature_dim: self.feature_dim,
            model_tag: model,
            weights: self
                .weights
                .chunks(self.feature_dim.max(1))
                .take(self.num_nodes())
                .map(<[f64]>::to_vec)
                .collect(),
            biases: self.biases.clone(),
        }
    }

    pub fn from_checkpoint(ckpt: &ScorerCheckpoint) -> Result<(Self, ProbabilityModel)> {
        if ckpt.weights.len() != ckpt.biases.len() {
            return Err(Error::Data("checkpoint weight and bias counts differ".into()));
        }
        let mut params = Self::zeros(ckpt.biases.len(), ckpt.feature_dim);
        for (n, (w, &b)) in ckpt.weights.iter().zip(&ckpt.biases).enumerate() {
            params
                .set_node(n, w, b)
                .map_err(|_| Error::Data(format!("checkpoint row {n} has wrong length")))?;
        }
        if !params.all_finite() {
            return Err(Error::Data("checkpoint contains non-finite values".into()));
        }
        Ok((params, ckpt.model_tag))
    }
}

/// `σ(g)` with input validation.
pub fn node_prob_direct(g: f64) -> Result<f64> {
    if !g.is_finite() {
        return invalid(format!("non-finite score {g}"));
    }
    Ok(sigmoid(g))
}

/// Product of conditional sigmoids along `Path(n)`, accumulated in log space.
pub fn node_prob_hierarchical(
    params: &LinearScorerParams,
    tree: &Tree,
    x: &[f64],
    n: NodeId,
) -> Result<f64> {
    Ok(node_log_prob_hierarchical(params, tree, x, n)?.exp())
}

pub fn node_log_prob_hierarchical(
    params: &LinearScorerParams,
    tree: &Tree,
    x: &[f64],
    n: NodeId,
) -> Result<f64> {
    let mut log_p = 0.0;
    for node in tree.path_to_root(n)? {
        log_p += log_sigmoid(params.score(x, node)?);
    }
    Ok(log_p)
}

/// `p_g(z_n = 1 | x)` under either probability model.
pub fn node_relevance_prob(
    params: &LinearScorerParams,
    model: ProbabilityModel,
    tree: &Tree,
    x: &[f64],
    n: NodeId,
) -> Result<f64> {
    match model {
        ProbabilityModel::Direct => {
            if n == tree.root() {
                // The root covers every target and carries no parameters.
                return Ok(1.0);
            }
            node_prob_direct(params.score(x, n)?)
        }
        ProbabilityModel::Hierarchical => node_prob_hierarchical(params, tree, x, n),
    }
}
