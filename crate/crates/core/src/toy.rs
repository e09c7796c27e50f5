//! Feature-free toy setting: every target is an independent Bernoulli with a
//! fixed `η_j ~ U[0, 1]`, and node probabilities come from one of three
//! estimators instead of a trained scorer. With `η` known, the regret of
//! beam search over the estimated table is exact.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beam::{beam_search_with_ties, retrieve_topm};
use crate::error::{invalid, Error, Result};
use crate::metrics::{regret_p_at_m, MeanAcc, RegretReport, RegretRow};
use crate::rng::{self, StreamRng};
use crate::tree::{NodeId, Tree};

/// Node-id-indexed `p_g(z_n = 1)`.
pub type NodeProbTable = Vec<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimator {
    DirEst,
    HierEst,
    OptEst,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Training sample size; `Infinite` selects the closed-form population
/// values instead of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "serde_json::Value")]
pub enum SampleSize {
    Finite(usize),
    Infinite,
}

impl TryFrom<serde_json::Value> for SampleSize {
    type Error = String;

    fn try_from(v: serde_json::Value) -> std::result::Result<Self, String> {
        match &v {
            serde_json::Value::Number(n) => match n.as_u64() {
                Some(n) if n >= 1 => Ok(SampleSize::Finite(n as usize)),
                _ => Err(format!("sample size must be a positive integer, got {n}")),
            },
            serde_json::Value::String(s) if s == "inf" || s == "infinite" => {
                Ok(SampleSize::Infinite)
            }
            _ => Err(format!("sample size must be a positive integer or \"inf\", got {v}")),
        }
    }
}

impl From<SampleSize> for serde_json::Value {
    fn from(n: SampleSize) -> Self {
        match n {
            SampleSize::Finite(n) => n.into(),
            SampleSize::Infinite => "inf".into(),
        }
    }
}

impl fmt::Display for SampleSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleSize::Finite(n) => write!(f, "{n}"),
            SampleSize::Infinite => write!(f, "inf"),
        }
    }
}

impl SampleSize {
    fn stream_index(self) -> u64 {
        match self {
            SampleSize::Finite(n) => n as u64,
            SampleSize::Infinite => u64::MAX,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyConfig {
    pub num_targets: usize,
    pub arity: usize,
    pub estimator: Estimator,
    pub sample_size: SampleSize,
    pub beam_size: usize,
    pub m_values: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.runs < 1 {
            return bad("runs must be at least 1".into());
        }
        if self.arity < 2 || self.num_targets < 1 {
            return bad("need arity >= 2 and at least one target".into());
        }
        if self.beam_size < 1 || self.beam_size > self.num_targets {
            return bad(format!("beam size {} outside 1..=M", self.beam_size));
        }
        if self.m_values.is_empty() {
            return bad("m_values is empty".into());
        }
        if let Some(m) = self.m_values.iter().find(|&&m| m < 1 || m > self.beam_size) {
            return bad(format!("m = {m} outside 1..=k"));
        }
        Ok(())
    }
}

/// `M` i.i.d. uniforms on `[0, 1)`.
pub fn gen_toy(num_targets: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed, "toy-eta");
    (0..num_targets).map(|_| rng.random::<f64>()).collect()
}

fn draw_row(eta: &[f64], rng: &mut StreamRng, row: &mut Vec<usize>) {
    row.clear();
    for (j, &p) in eta.iter().enumerate() {
        if rng.random::<f64>() < p {
            row.push(j);
        }
    }
}

/// `n` independent draws of the target vector.
pub fn sample_toy_dataset(eta: &[f64], n: usize, rng: &mut StreamRng) -> Vec<Vec<bool>> {
    let mut row = Vec::new();
    (0..n)
        .map(|_| {
            draw_row(eta, rng, &mut row);
            let mut y = vec![false; eta.len()];
            for &j in &row {
                y[j] = true;
            }
            y
        })
        .collect()
}

/// How often each node's ground-truth label was positive in a sample.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeCounts {
    pub n: usize,
    pub counts: Vec<u64>,
}

struct CountBuilder<'a> {
    tree: &'a Tree,
    counts: Vec<u64>,
    stamp: Vec<usize>,
    rows: usize,
}

impl<'a> CountBuilder<'a> {
    fn new(tree: &'a Tree) -> Self {
        Self {
            tree,
            counts: vec![0; tree.num_nodes()],
            stamp: vec![usize::MAX; tree.num_nodes()],
            rows: 0,
        }
    }

    fn add_row(&mut self, relevant: impl Iterator<Item = usize>) {
        let row = self.rows;
        self.rows += 1;
        for t in relevant {
            let mut cur = Some(self.tree.target_leaf_unchecked(t));
            while let Some(n) = cur {
                if self.stamp[n] == row {
                    break;
                }
                self.stamp[n] = row;
                self.counts[n] += 1;
                cur = self.tree.parent(n);
            }
        }
    }

    fn finish(self) -> NodeCounts {
        NodeCounts {
            n: self.rows,
            counts: self.counts,
        }
    }
}

/// Node label counts of an explicit sample.
pub fn count_node_labels(tree: &Tree, rows: &[Vec<bool>]) -> Result<NodeCounts> {
    let mut builder = CountBuilder::new(tree);
    for row in rows {
        if row.len() != tree.num_targets() {
            return invalid("row length differs from the number of targets");
        }
        builder.add_row(row.iter().enumerate().filter_map(|(j, &y)| y.then_some(j)));
    }
    Ok(builder.finish())
}

/// Same draws as [`sample_toy_dataset`] followed by [`count_node_labels`],
/// without materializing the rows.
pub fn sample_node_counts(tree: &Tree, eta: &[f64], n: usize, rng: &mut StreamRng) -> NodeCounts {
    let mut builder = CountBuilder::new(tree);
    let mut row = Vec::new();
    for _ in 0..n {
        draw_row(eta, rng, &mut row);
        builder.add_row(row.iter().copied());
    }
    builder.finish()
}

/// What an estimator is fitted on.
#[derive(Clone, Copy, Debug)]
pub enum ToySource<'a> {
    Sample(&'a NodeCounts),
    /// Population values computed from η.
    Exact(&'a [f64]),
}

fn check_source(tree: &Tree, source: ToySource<'_>) -> Result<()> {
    match source {
        ToySource::Sample(c) if c.counts.len() != tree.num_nodes() => {
            invalid("node counts do not match the tree")
        }
        ToySource::Sample(c) if c.n == 0 => invalid("a finite sample needs at least one row"),
        ToySource::Exact(eta) if eta.len() != tree.num_targets() => {
            invalid("eta length differs from the number of targets")
        }
        _ => Ok(()),
    }
}

/// `p(z_n = 1) = 1 − ∏_{l ∈ L(n)} (1 − η_π(l))` for every node.
pub fn exact_node_probs(tree: &Tree, eta: &[f64]) -> Vec<f64> {
    // Accumulate ln P(z_n = 0) bottom-up.
    let mut log_none = vec![0.0; tree.num_nodes()];
    for leaf in tree.leaves() {
        log_none[leaf] = (-eta[tree.leaf_target_unchecked(leaf)]).ln_1p();
    }
    for n in (0..tree.leaves().start).rev() {
        log_none[n] = tree.children(n).map(|c| log_none[c]).sum();
    }
    log_none.iter().map(|&l| -l.exp_m1()).collect()
}

/// Direct estimator: frequency of `z_n = 1`.
pub fn fit_direst(tree: &Tree, source: ToySource<'_>) -> Result<NodeProbTable> {
    check_source(tree, source)?;
    Ok(match source {
        ToySource::Sample(c) => c.counts.iter().map(|&k| k as f64 / c.n as f64).collect(),
        ToySource::Exact(eta) => exact_node_probs(tree, eta),
    })
}

/// Hierarchical estimator: product of conditional frequencies
/// `P(z_n = 1 | z_ρ(n) = 1)` along the path, starting from the root's own
/// marginal. A never-positive parent yields 0.
pub fn fit_hierest(tree: &Tree, source: ToySource<'_>) -> Result<NodeProbTable> {
    check_source(tree, source)?;
    let (marginal, total): (Vec<f64>, f64) = match source {
        ToySource::Sample(c) => (c.counts.iter().map(|&k| k as f64).collect(), c.n as f64),
        ToySource::Exact(eta) => (exact_node_probs(tree, eta), 1.0),
    };
    let mut table = vec![0.0; tree.num_nodes()];
    table[0] = marginal[0] / total;
    for n in 1..tree.num_nodes() {
        let parent = tree.parent(n).expect("non-root");
        let cond = if marginal[parent] > 0.0 {
            marginal[n] / marginal[parent]
        } else {
            0.0
        };
        table[n] = table[parent] * cond;
    }
    Ok(table)
}

/// Optimal estimator: a node's per-instance label copies that of its most
/// probable child, so its frequency equals the child's frequency.
pub fn fit_optest(tree: &Tree, source: ToySource<'_>) -> Result<NodeProbTable> {
    check_source(tree, source)?;
    let mut table = vec![0.0; tree.num_nodes()];
    for leaf in tree.leaves() {
        table[leaf] = match source {
            ToySource::Sample(c) => c.counts[leaf] as f64 / c.n as f64,
            ToySource::Exact(eta) => eta[tree.leaf_target_unchecked(leaf)],
        };
    }
    for n in (0..tree.leaves().start).rev() {
        let best = argmax_child(tree, &table, n);
        table[n] = table[best];
    }
    Ok(table)
}

fn argmax_child(tree: &Tree, table: &[f64], n: NodeId) -> NodeId {
    let mut best = usize::MAX;
    let mut best_p = f64::NEG_INFINITY;
    for c in tree.children(n) {
        if table[c] > best_p {
            best_p = table[c];
            best = c;
        }
    }
    best
}

pub fn fit(tree: &Tree, estimator: Estimator, source: ToySource<'_>) -> Result<NodeProbTable> {
    match estimator {
        Estimator::DirEst => fit_direst(tree, source),
        Estimator::HierEst => fit_hierest(tree, source),
        Estimator::OptEst => fit_optest(tree, source),
    }
}

/// The oracle node probabilities `p*(z_n = 1) = max_{l ∈ L(n)} η_π(l)`,
/// computed by scanning each subtree's leaves.
pub fn oracle_table(tree: &Tree, eta: &[f64]) -> Result<NodeProbTable> {
    if eta.len() != tree.num_targets() {
        return invalid("eta length differs from the number of targets");
    }
    (0..tree.num_nodes())
        .map(|n| {
            Ok(tree
                .subtree_leaves(n)?
                .map(|l| eta[tree.leaf_target_unchecked(l)])
                .fold(f64::NEG_INFINITY, f64::max))
        })
        .collect()
}

/// One cell of a toy grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyRow {
    pub estimator: Estimator,
    pub sample_size: SampleSize,
    pub k: usize,
    pub m: usize,
    pub mean_regret: f64,
    pub std_err: f64,
    pub runs: usize,
}

/// Several estimators, sample sizes and `(k, m)` cells evaluated on the same
/// runs: run `r` always sees the same η, tree and samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyGrid {
    pub num_targets: usize,
    pub arity: usize,
    pub estimators: Vec<Estimator>,
    pub sample_sizes: Vec<SampleSize>,
    /// `(k, m)` pairs.
    pub cells: Vec<(usize, usize)>,
    pub runs: usize,
    pub seed: u64,
}

impl ToyGrid {
    /// `m = k` for each `k`, as in the DirEst-only table.
    pub fn diagonal(ks: &[usize]) -> Vec<(usize, usize)> {
        ks.iter().map(|&k| (k, k)).collect()
    }

    /// Every `m ∈ ms` with `m <= k`.
    pub fn triangle(ks: &[usize], ms: &[usize]) -> Vec<(usize, usize)> {
        ks.iter()
            .flat_map(|&k| ms.iter().filter(move |&&m| m <= k).map(move |&m| (k, m)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        for &(k, m) in &self.cells {
            ToyConfig {
                num_targets: self.num_targets,
                arity: self.arity,
                estimator: Estimator::DirEst,
                sample_size: SampleSize::Infinite,
                beam_size: k,
                m_values: vec![m],
                runs: self.runs,
                seed: self.seed,
            }
            .validate()?;
        }
        if self.estimators.is_empty() || self.sample_sizes.is_empty() || self.cells.is_empty() {
            return Err(Error::InvalidConfig("toy grid has an empty axis".into()));
        }
        Ok(())
    }
}

/// Random keys that order tied node probabilities. Upper-level DirEst
/// values saturate to exactly 1.0 and sampled counts often equal N, so
/// ties are common and a fixed id rule would always favour the left subtree.
pub fn tie_keys(num_nodes: usize, seed: u64) -> Vec<u64> {
    let mut rng = rng::stream(seed, "toy-ties");
    (0..num_nodes).map(|_| rng.random::<u64>()).collect()
}

/// One run's random draws: η, the tree, tie keys, and a sample per finite size.
struct ToyRun {
    tree: Tree,
    eta: Vec<f64>,
    ties: Vec<u64>,
    run_seed: u64,
}

impl ToyRun {
    fn new(num_targets: usize, arity: usize, seed: u64, run: usize) -> Result<Self> {
        let run_seed = rng::derive_seed(seed, "toy-run", run as u64);
        let tree = Tree::random(num_targets, arity, run_seed)?;
        Ok(Self {
            ties: tie_keys(tree.num_nodes(), run_seed),
            tree,
            eta: gen_toy(num_targets, run_seed),
            run_seed,
        })
    }

    fn counts(&self, n: usize) -> NodeCounts {
        let mut rng = rng::indexed_stream(
            self.run_seed,
            "toy-sample",
            SampleSize::Finite(n).stream_index(),
        );
        sample_node_counts(&self.tree, &self.eta, n, &mut rng)
    }

    fn regret(&self, table: &NodeProbTable, k: usize, m: usize) -> Result<f64> {
        let beam = beam_search_with_ties(&self.tree, table, k, &self.ties)?;
        let retrieved = retrieve_topm(&self.tree, &beam, m)?;
        regret_p_at_m(&self.eta, &retrieved, m)
    }
}

pub fn run_toy_grid(grid: &ToyGrid) -> Result<Vec<ToyRow>> {
    grid.validate()?;
    let ne = grid.estimators.len();
    let ns = grid.sample_sizes.len();
    let nc = grid.cells.len();
    let mut accs = vec![MeanAcc::default(); ne * ns * nc];
    for run in 0..grid.runs {
        let toy = ToyRun::new(grid.num_targets, grid.arity, grid.seed, run)?;
        for (si, &size) in grid.sample_sizes.iter().enumerate() {
            let counts = match size {
                SampleSize::Finite(n) => Some(toy.counts(n)),
                SampleSize::Infinite => None,
            };
            let source = match &counts {
                Some(c) => ToySource::Sample(c),
                None => ToySource::Exact(&toy.eta),
            };
            for (ei, &est) in grid.estimators.iter().enumerate() {
                let table = fit(&toy.tree, est, source)?;
                for (ci, &(k, m)) in grid.cells.iter().enumerate() {
                    accs[(ei * ns + si) * nc + ci].push(toy.regret(&table, k, m)?);
                }
            }
        }
    }
    let mut rows = Vec::with_capacity(accs.len());
    for (ei, &estimator) in grid.estimators.iter().enumerate() {
        for (si, &sample_size) in grid.sample_sizes.iter().enumerate() {
            for (ci, &(k, m)) in grid.cells.iter().enumerate() {
                let acc = &accs[(ei * ns + si) * nc + ci];
                rows.push(ToyRow {
                    estimator,
                    sample_size,
                    k,
                    m,
                    mean_regret: acc.mean(),
                    std_err: acc.std_err(),
                    runs: acc.count(),
                });
            }
        }
    }
    Ok(rows)
}

/// Mean regret over `config.runs` independent draws of η and the tree.
pub fn run_toy_experiment(config: &ToyConfig) -> Result<RegretReport> {
    config.validate()?;
    let grid = ToyGrid {
        num_targets: config.num_targets,
        arity: config.arity,
        estimators: vec![config.estimator],
        sample_sizes: vec![config.sample_size],
        cells: config.m_values.iter().map(|&m| (config.beam_size, m)).collect(),
        runs: config.runs,
        seed: config.seed,
    };
    let rows = run_toy_grid(&grid)?
        .into_iter()
        .map(|r| RegretRow {
            k: r.k,
            m: r.m,
            mean_regret: r.mean_regret,
            std_err: r.std_err,
            count: r.runs,
        })
        .collect();
    Ok(RegretReport {
        rows,
        runs: config.runs,
        seeds: vec![config.seed],
        config: serde_json::to_value(config)?,
    })
}
