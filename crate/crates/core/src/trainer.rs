//! Training regimes for the node-wise scorer: PLT, TDM, OTM and the two OTM
//! ablations. All of them minimize a sum of binary cross-entropy terms over a
//! per-instance set of `(node, label)` pairs; they differ only in which
//! nodes are chosen and how those nodes are labelled.

use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beam::{beam_search_traced, ScoredQuery};
use crate::error::{invalid, Error, Result};
use crate::pseudo::{estimate_z_hat_counted, ground_truth_z, LabelKind, NodeLabelAssignment};
use crate::rng::{self, StreamRng};
use crate::scorer::{sigmoid, softplus, LinearScorerParams, ProbabilityModel};
use crate::synth::Instance;
use crate::tree::{NodeId, Tree};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "PLT")]
    Plt,
    #[serde(rename = "TDM")]
    Tdm,
    #[serde(rename = "OTM")]
    Otm,
    /// OTM with beam-search subsampling replaced by TDM subsampling.
    #[serde(rename = "OTM_minus_BS")]
    OtmMinusBs,
    /// OTM with estimated optimal labels replaced by ground-truth labels.
    #[serde(rename = "OTM_minus_OptEst")]
    OtmMinusOptEst,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Plt,
        Method::Tdm,
        Method::Otm,
        Method::OtmMinusBs,
        Method::OtmMinusOptEst,
    ];

    pub fn model(self) -> ProbabilityModel {
        match self {
            Method::Plt => ProbabilityModel::Hierarchical,
            _ => ProbabilityModel::Direct,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Plt => "PLT",
            Method::Tdm => "TDM",
            Method::Otm => "OTM",
            Method::OtmMinusBs => "OTM(-BS)",
            Method::OtmMinusOptEst => "OTM(-OptEst)",
        }
    }

    fn uses_estimated_labels(self) -> bool {
        matches!(self, Method::Otm | Method::OtmMinusBs)
    }
}

fn default_negatives() -> usize {
    3
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    pub beam_size: usize,
    #[serde(default = "default_negatives")]
    pub negatives_per_level: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_eps")]
    pub adam_epsilon: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(method: Method, seed: u64) -> Self {
        Self {
            method,
            beam_size: 50,
            negatives_per_level: default_negatives(),
            epochs: 10,
            batch_size: 100,
            learning_rate: 0.01,
            adam_beta1: default_beta1(),
            adam_beta2: default_beta2(),
            adam_epsilon: default_eps(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.beam_size < 1 {
            return bad("beam_size must be at least 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon must be positive");
        }
        Ok(())
    }
}

/// Binary cross-entropy written as a nonnegative loss: `softplus((1-2z)g)`.
pub fn bce_loss(z: f64, g: f64) -> Result<f64> {
    if !g.is_finite() {
        return invalid(format!("non-finite score {g}"));
    }
    Ok(softplus((1.0 - 2.0 * z) * g))
}

/// `d/dg bce_loss(z, g) = σ(g) - z`.
pub fn bce_grad(z: f64, g: f64) -> Result<f64> {
    if !g.is_finite() {
        return invalid(format!("non-finite score {g}"));
    }
    Ok(sigmoid(g) - z)
}

/// Per-level node sets, `sets[h - 1]` for `h = 1..=H`.
pub type LevelSets = Vec<Vec<NodeId>>;

fn require_ground_truth(z: &NodeLabelAssignment) -> Result<()> {
    if z.kind != LabelKind::GroundTruth {
        return invalid("subsampling needs ground-truth labels");
    }
    Ok(())
}

/// Children of positive nodes, level by level.
pub fn subsample_plt(tree: &Tree, z: &NodeLabelAssignment) -> Result<LevelSets> {
    require_ground_truth(z)?;
    let mut sets = vec![Vec::new(); tree.height()];
    for &n in z.ones() {
        if !tree.is_leaf(n) {
            sets[tree.level(n)].extend(tree.children(n));
        }
    }
    Ok(sets)
}

/// Positive nodes plus up to `negatives` uniform draws (without
/// replacement) from the remaining nodes of each level.
pub fn subsample_tdm(
    tree: &Tree,
    z: &NodeLabelAssignment,
    negatives: usize,
    rng: &mut StreamRng,
) -> Result<LevelSets> {
    require_ground_truth(z)?;
    let mut sets = Vec::with_capacity(tree.height());
    for h in 1..=tree.height() {
        let level = tree.level_nodes(h);
        let positives = z.ones_at_level(tree, h);
        let available = level.len() - positives.len();
        let mut set = positives.to_vec();
        let want = negatives.min(available);
        if want == available {
            set.extend(level.filter(|n| positives.binary_search(n).is_err()));
        } else if 2 * (positives.len() + want) >= level.len() {
            let pool: Vec<NodeId> = level
                .filter(|n| positives.binary_search(n).is_err())
                .collect();
            for i in index::sample(rng, pool.len(), want) {
                set.push(pool[i]);
            }
        } else {
            let mut chosen = Vec::with_capacity(want);
            while chosen.len() < want {
                let n = rng.random_range(level.clone());
                if positives.binary_search(&n).is_err() && !chosen.contains(&n) {
                    chosen.push(n);
                }
            }
            set.extend(chosen);
        }
        sets.push(set);
    }
    Ok(sets)
}

/// The candidate sets `B̃_h(x; θ_t)` of a beam search under the snapshot
/// parameters, and the number of scorer evaluations spent.
pub fn subsample_beam(tree: &Tree, query: &ScoredQuery<'_>, k: usize) -> Result<(LevelSets, usize)> {
    let trace = beam_search_traced(tree, query, k)?;
    let sets = trace
        .candidates
        .iter()
        .map(|level| level.iter().map(|e| e.node).collect())
        .collect();
    Ok((sets, trace.evaluations))
}

/// Training pairs for one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct LossNodes {
    pub pairs: Vec<(NodeId, f64)>,
    /// Scorer evaluations spent choosing nodes and labels.
    pub evaluations: usize,
}

/// The `(node, label)` pairs one instance contributes under `config.method`.
/// `params` are the snapshot parameters `θ_t`.
pub fn instance_loss_nodes(
    tree: &Tree,
    instance: &Instance,
    params: &LinearScorerParams,
    model: ProbabilityModel,
    config: &TrainConfig,
    rng: &mut StreamRng,
) -> Result<LossNodes> {
    let method = config.method;
    if model != method.model() {
        return Err(Error::InvalidConfig(format!(
            "{} requires the {:?} probability model",
            method.name(),
            method.model()
        )));
    }
    let query = ScoredQuery::new(params, model, &instance.x)?;
    let z = ground_truth_z(tree, &instance.targets)?;
    let mut evaluations = 0;

    let sets = match method {
        Method::Plt => subsample_plt(tree, &z)?,
        Method::Tdm | Method::OtmMinusBs => {
            subsample_tdm(tree, &z, config.negatives_per_level, rng)?
        }
        Method::Otm | Method::OtmMinusOptEst => {
            let (sets, evals) = subsample_beam(tree, &query, config.beam_size)?;
            evaluations += evals;
            sets
        }
    };

    let labels = if method.uses_estimated_labels() {
        let (z_hat, evals) = estimate_z_hat_counted(tree, &instance.targets, &query)?;
        evaluations += evals;
        z_hat
    } else {
        z
    };

    let pairs = sets
        .into_iter()
        .flatten()
        .map(|n| (n, labels.label(n)))
        .collect();
    Ok(LossNodes { pairs, evaluations })
}

/// Dense gradient buffers that remember which nodes were written.
#[derive(Clone, Debug)]
pub struct SparseGrad {
    feature_dim: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    touched: Vec<bool>,
    touched_list: Vec<NodeId>,
}

impl SparseGrad {
    pub fn new(num_nodes: usize, feature_dim: usize) -> Self {
        Self {
            feature_dim,
            weights: vec![0.0; num_nodes * feature_dim],
            biases: vec![0.0; num_nodes],
            touched: vec![false; num_nodes],
            touched_list: Vec::new(),
        }
    }

    /// Adds `coef · (x, 1)` to the gradient of node `n`.
    pub fn add(&mut self, n: NodeId, x: &[f64], coef: f64) {
        if !self.touched[n] {
            self.touched[n] = true;
            self.touched_list.push(n);
        }
        let row = &mut self.weights[n * self.feature_dim..(n + 1) * self.feature_dim];
        for (r, v) in row.iter_mut().zip(x) {
            *r += coef * v;
        }
        self.biases[n] += coef;
    }

    pub fn touched(&self) -> &[NodeId] {
        &self.touched_list
    }

    pub fn weight_grad(&self, n: NodeId) -> &[f64] {
        &self.weights[n * self.feature_dim..(n + 1) * self.feature_dim]
    }

    pub fn bias_grad(&self, n: NodeId) -> f64 {
        self.biases[n]
    }

    pub fn clear(&mut self) {
        for &n in &self.touched_list {
            self.weights[n * self.feature_dim..(n + 1) * self.feature_dim].fill(0.0);
            self.biases[n] = 0.0;
            self.touched[n] = false;
        }
        self.touched_list.clear();
    }
}

/// Loss of a fixed set of pairs at `params`, accumulating its gradient.
pub fn accumulate_pairs(
    params: &LinearScorerParams,
    x: &[f64],
    pairs: &[(NodeId, f64)],
    grad: &mut SparseGrad,
) -> Result<f64> {
    let mut loss = 0.0;
    for &(n, label) in pairs {
        let g = params.score_unchecked(x, n);
        loss += bce_loss(label, g)?;
        grad.add(n, x, bce_grad(label, g)?);
    }
    Ok(loss)
}

/// Loss of a fixed set of pairs, without gradients.
pub fn pairs_loss(params: &LinearScorerParams, x: &[f64], pairs: &[(NodeId, f64)]) -> Result<f64> {
    pairs
        .iter()
        .map(|&(n, label)| bce_loss(label, params.score_unchecked(x, n)))
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m_w: Vec<f64>,
    v_w: Vec<f64>,
    m_b: Vec<f64>,
    v_b: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &LinearScorerParams) -> Self {
        let nw = params.num_nodes() * params.feature_dim();
        let nb = params.num_nodes();
        Self {
            m_w: vec![0.0; nw],
            v_w: vec![0.0; nw],
            m_b: vec![0.0; nb],
            v_b: vec![0.0; nb],
            step: 0,
        }
    }
}

/// One lazy Adam step: only nodes present in `grad` are updated.
pub fn adam_step(
    params: &mut LinearScorerParams,
    grad: &SparseGrad,
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<()> {
    for &n in grad.touched() {
        if grad.bias_grad(n).is_nan() || grad.weight_grad(n).iter().any(|g| g.is_nan()) {
            return Err(Error::Diverged(format!("NaN gradient at node {n}")));
        }
    }
    state.step += 1;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let corr1 = 1.0 - b1.powi(state.step as i32);
    let corr2 = 1.0 - b2.powi(state.step as i32);
    let lr = config.learning_rate;
    let eps = config.adam_epsilon;
    let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / corr1;
        let v_hat = *v / corr2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };
    let d = params.feature_dim();
    for &n in grad.touched() {
        let gw = grad.weight_grad(n);
        let w = params.weights_mut(n);
        for i in 0..d {
            update(
                &mut w[i],
                &mut state.m_w[n * d + i],
                &mut state.v_w[n * d + i],
                gw[i],
            );
        }
        update(
            params.bias_mut(n),
            &mut state.m_b[n],
            &mut state.v_b[n],
            grad.bias_grad(n),
        );
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-instance loss at the snapshot parameters of each step.
    pub mean_loss: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub params: LinearScorerParams,
    pub model: ProbabilityModel,
    pub log: Vec<EpochLog>,
    /// Largest number of scorer evaluations spent on one instance.
    pub max_evaluations: usize,
}

/// Runs `config.epochs` passes of shuffled minibatches. Within a minibatch
/// every instance's nodes, labels and gradient are computed at the
/// parameters from the start of the step; the update is applied after.
pub fn train(
    data: &[Instance],
    tree: &Tree,
    feature_dim: usize,
    config: &TrainConfig,
) -> Result<TrainOutput> {
    let init = LinearScorerParams::init_random(tree, feature_dim, config.seed);
    train_from(data, tree, init, config)
}

/// Shapes are checked before the first step, so an argument error inside
/// the loop can only be a score that overflowed.
fn as_divergence(e: Error) -> Error {
    match e {
        Error::InvalidArgument(msg) => Error::Diverged(msg),
        other => other,
    }
}

pub fn train_from(
    data: &[Instance],
    tree: &Tree,
    mut params: LinearScorerParams,
    config: &TrainConfig,
) -> Result<TrainOutput> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    params.check_bound(tree)?;
    let d = params.feature_dim();
    if let Some(i) = data.iter().position(|inst| inst.x.len() != d) {
        return Err(Error::Data(format!(
            "instance {i} has {} features, expected {d}",
            data[i].x.len()
        )));
    }
    let model = config.method.model();
    let mut order_rng = rng::stream(config.seed, "data-order");
    let mut neg_rng = rng::stream(config.seed, "negatives");
    let mut state = AdamState::new(&params);
    let mut grad = SparseGrad::new(params.num_nodes(), d);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let mut max_evaluations = 0;
    let started = Instant::now();
    let mut batch_pairs: Vec<LossNodes> = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.epochs {
        order.shuffle(&mut order_rng);
        let mut total_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            batch_pairs.clear();
            for &i in batch {
                let nodes =
                    instance_loss_nodes(tree, &data[i], &params, model, config, &mut neg_rng)
                        .map_err(as_divergence)?;
                max_evaluations = max_evaluations.max(nodes.evaluations);
                batch_pairs.push(nodes);
            }
            for (&i, nodes) in batch.iter().zip(&batch_pairs) {
                total_loss += accumulate_pairs(&params, &data[i].x, &nodes.pairs, &mut grad)
                    .map_err(as_divergence)?;
            }
            adam_step(&mut params, &grad, &mut state, config)?;
            grad.clear();
        }
        if !params.all_finite() {
            return Err(Error::Diverged(format!("non-finite parameters after epoch {epoch}")));
        }
        let mean_loss = total_loss / data.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Diverged(format!("non-finite loss in epoch {epoch}")));
        }
        log.push(EpochLog {
            epoch,
            mean_loss,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(TrainOutput {
        params,
        model,
        log,
        max_evaluations,
    })
}
