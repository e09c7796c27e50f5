//! Retrieval metrics, exact regret against a known η, and the level-wise
//! label distribution statistic.

use serde::{Deserialize, Serialize};

use crate::beam::{beam_search, retrieve_topm, ScoredQuery};
use crate::error::{invalid, Error, Result};
use crate::scorer::{LinearScorerParams, ProbabilityModel};
use crate::synth::Instance;
use crate::tree::{TargetId, Tree};

fn hits(retrieved: &[TargetId], relevant: &[TargetId]) -> usize {
    retrieved
        .iter()
        .filter(|t| relevant.binary_search(t).is_ok())
        .count()
}

fn check_len(retrieved: &[TargetId], m: usize) -> Result<()> {
    if retrieved.len() != m || m == 0 {
        return invalid(format!("retrieved {} targets, expected m = {m}", retrieved.len()));
    }
    Ok(())
}

/// Fraction of the `m` retrieved targets that are relevant. `relevant` must
/// be sorted.
pub fn precision_at_m(retrieved: &[TargetId], relevant: &[TargetId], m: usize) -> Result<f64> {
    check_len(retrieved, m)?;
    Ok(hits(retrieved, relevant) as f64 / m as f64)
}

/// Fraction of relevant targets that were retrieved; `None` when there is
/// nothing relevant.
pub fn recall_at_m(
    retrieved: &[TargetId],
    relevant: &[TargetId],
    m: usize,
) -> Result<Option<f64>> {
    check_len(retrieved, m)?;
    if relevant.is_empty() {
        return Ok(None);
    }
    Ok(Some(hits(retrieved, relevant) as f64 / relevant.len() as f64))
}

pub fn f_measure_at_m(p: f64, r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&r) {
        return invalid(format!("precision {p} or recall {r} outside [0, 1]"));
    }
    if p + r == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * p * r / (p + r))
}

fn descending_sum(mut values: Vec<f64>) -> f64 {
    values.sort_unstable_by(|a, b| b.total_cmp(a));
    values.iter().sum()
}

/// `(Σ of the m largest η − Σ of η over the retrieved targets) / m`.
///
/// Both sums run over values sorted in descending order, so retrieving an
/// exact top-m set gives exactly zero.
pub fn regret_p_at_m(eta: &[f64], retrieved: &[TargetId], m: usize) -> Result<f64> {
    if m > eta.len() {
        return invalid(format!("m = {m} exceeds {} targets", eta.len()));
    }
    check_len(retrieved, m)?;
    let mut top = eta.to_vec();
    if m < top.len() {
        top.select_nth_unstable_by(m - 1, |a, b| b.total_cmp(a));
        top.truncate(m);
    }
    let mut got = Vec::with_capacity(m);
    for &t in retrieved {
        match eta.get(t) {
            Some(&e) => got.push(e),
            None => return invalid(format!("retrieved target {t} out of range")),
        }
    }
    let regret = (descending_sum(top) - descending_sum(got)) / m as f64;
    Ok(regret.max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub k: usize,
    pub m: usize,
    pub mean_regret: f64,
    pub std_err: f64,
    /// Number of averaged terms (test instances or toy runs).
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub rows: Vec<RegretRow>,
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub config: serde_json::Value,
}

impl RegretReport {
    pub fn get(&self, k: usize, m: usize) -> Option<&RegretRow> {
        self.rows.iter().find(|r| r.k == k && r.m == m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub k: usize,
    pub m: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub instances: usize,
    /// Instances without relevant targets, excluded from recall and F.
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
}

/// Running mean and standard error.
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanAcc {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl MeanAcc {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Beam-search evaluation of a trained model on a test set: P/R/F for every
/// `m`, and regret when every instance carries its η.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub metrics: MetricsReport,
    pub regret: Option<Vec<RegretRow>>,
}

pub fn evaluate(
    tree: &Tree,
    params: &LinearScorerParams,
    model: ProbabilityModel,
    data: &[Instance],
    k: usize,
    ms: &[usize],
    with_regret: bool,
) -> Result<Evaluation> {
    params.check_bound(tree)?;
    if data.is_empty() {
        return Err(Error::Data("test set is empty".into()));
    }
    if let Some(&bad) = ms.iter().find(|&&m| m < 1 || m > k || m > tree.num_targets()) {
        return invalid(format!("m = {bad} must satisfy 1 <= m <= min(k, M)"));
    }
    if with_regret && data.iter().any(|i| i.eta.is_none()) {
        return invalid("regret needs the true eta on every test instance");
    }
    let mut prec = vec![MeanAcc::default(); ms.len()];
    let mut rec = vec![MeanAcc::default(); ms.len()];
    let mut fm = vec![MeanAcc::default(); ms.len()];
    let mut reg = vec![MeanAcc::default(); ms.len()];
    for inst in data {
        let query = ScoredQuery::new(params, model, &inst.x)?;
        let beam = beam_search(tree, &query, k)?;
        for (i, &m) in ms.iter().enumerate() {
            let m_eff = m.min(beam.len());
            let retrieved = retrieve_topm(tree, &beam, m_eff)?;
            let p = precision_at_m(&retrieved, &inst.targets, m_eff)?;
            prec[i].push(p);
            if let Some(r) = recall_at_m(&retrieved, &inst.targets, m_eff)? {
                rec[i].push(r);
                fm[i].push(f_measure_at_m(p, r)?);
            }
            if with_regret {
                let eta = inst.eta.as_ref().expect("checked above");
                reg[i].push(regret_p_at_m(eta, &retrieved, m_eff)?);
            }
        }
    }
    let metrics = MetricsReport {
        rows: ms
            .iter()
            .enumerate()
            .map(|(i, &m)| MetricsRow {
                k,
                m,
                precision: prec[i].mean(),
                recall: rec[i].mean(),
                f_measure: fm[i].mean(),
                instances: data.len(),
                skipped: data.len() - rec[i].count(),
            })
            .collect(),
    };
    let regret = with_regret.then(|| {
        ms.iter()
            .enumerate()
            .map(|(i, &m)| RegretRow {
                k,
                m,
                mean_regret: reg[i].mean(),
                std_err: reg[i].std_err(),
                count: reg[i].count(),
            })
            .collect()
    });
    Ok(Evaluation { metrics, regret })
}

/// Test-set estimate of the regret for each `m` at beam size `k`.
pub fn estimated_regret(
    tree: &Tree,
    params: &LinearScorerParams,
    model: ProbabilityModel,
    data: &[Instance],
    k: usize,
    ms: &[usize],
) -> Result<Vec<RegretRow>> {
    Ok(evaluate(tree, params, model, data, k, ms, true)?
        .regret
        .expect("regret requested"))
}

/// Per-node counts of positive labels at level `h`, sorted descending and
/// normalized to sum to one.
pub fn level_distribution(data: &[Instance], tree: &Tree, h: usize) -> Result<Vec<f64>> {
    if h < 1 || h > tree.height() {
        return invalid(format!("level {h} outside 1..={}", tree.height()));
    }
    if data.is_empty() {
        return Err(Error::Data("dataset is empty".into()));
    }
    let level = tree.level_nodes(h);
    let mut counts = vec![0u64; level.len()];
    let mut seen = Vec::new();
    for inst in data {
        seen.clear();
        for &t in &inst.targets {
            let leaf = tree.leaf_of_target(t)?;
            seen.push(tree.ancestor_at_level(leaf, h)? - level.start);
        }
        seen.sort_unstable();
        seen.dedup();
        for &i in &seen {
            counts[i] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Data(format!("no positive labels at level {h}")));
    }
    counts.sort_unstable_by(|a, b| b.cmp(a));
    Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
}
