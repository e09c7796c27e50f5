//! Synthetic multi-label data with a known conditional distribution.
//!
//! Features are isotropic Gaussian and every target is an independent
//! Bernoulli with `η_j(x) = σ(w_j·x + c)`. Gaussian draws use the ziggurat
//! sampler of `rand_distr::StandardNormal` on a ChaCha8 stream.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, StreamRng};
use crate::scorer::sigmoid;
use crate::tree::TargetId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_targets: usize,
    pub feature_dim: usize,
    /// Additive bias `c` shared by all targets; controls sparsity.
    pub bias: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_targets < 1 || self.feature_dim < 1 {
            return Err(Error::InvalidConfig(
                "num_targets and feature_dim must be at least 1".into(),
            ));
        }
        if !self.bias.is_finite() {
            return Err(Error::InvalidConfig("bias must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub x: Vec<f64>,
    /// Relevant target ids, ascending.
    pub targets: Vec<TargetId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
}

impl Instance {
    pub fn new(x: Vec<f64>, mut targets: Vec<TargetId>, eta: Option<Vec<f64>>) -> Self {
        targets.sort_unstable();
        targets.dedup();
        Self { x, targets, eta }
    }

    /// Dense binary target vector.
    pub fn y(&self, num_targets: usize) -> Vec<bool> {
        let mut y = vec![false; num_targets];
        for &t in &self.targets {
            y[t] = true;
        }
        y
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub train: Vec<Instance>,
    pub test: Vec<Instance>,
    /// One row `w_j` per target.
    pub weights: Vec<Vec<f64>>,
}

/// `η_j(x) = σ(w_j·x + c)` for every target.
pub fn eta_of(weights: &[Vec<f64>], bias: f64, x: &[f64]) -> Result<Vec<f64>> {
    weights
        .iter()
        .map(|w| {
            if w.len() != x.len() {
                return invalid(format!(
                    "weight row has length {}, features have {}",
                    w.len(),
                    x.len()
                ));
            }
            let logit: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias;
            Ok(sigmoid(logit))
        })
        .collect()
}

fn gaussian_vec(rng: &mut StreamRng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn draw_instances(
    rng: &mut StreamRng,
    weights: &[Vec<f64>],
    bias: f64,
    count: usize,
    d: usize,
) -> Vec<Instance> {
    (0..count)
        .map(|_| {
            let x = gaussian_vec(rng, d);
            let eta = eta_of(weights, bias, &x).expect("dimensions agree");
            let targets = eta
                .iter()
                .enumerate()
                .filter_map(|(j, &p)| (rng.random::<f64>() < p).then_some(j))
                .collect();
            Instance::new(x, targets, Some(eta))
        })
        .collect()
}

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut w_rng = rng::stream(spec.seed, "synth-weights");
    let weights: Vec<Vec<f64>> = (0..spec.num_targets)
        .map(|_| gaussian_vec(&mut w_rng, spec.feature_dim))
        .collect();
    let train = draw_instances(
        &mut rng::stream(spec.seed, "synth-train"),
        &weights,
        spec.bias,
        spec.n_train,
        spec.feature_dim,
    );
    let test = draw_instances(
        &mut rng::stream(spec.seed, "synth-test"),
        &weights,
        spec.bias,
        spec.n_test,
        spec.feature_dim,
    );
    Ok(SyntheticData {
        train,
        test,
        weights,
    })
}

/// First line of a dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    #[serde(rename = "M")]
    pub num_targets: usize,
    #[serde(rename = "d")]
    pub feature_dim: usize,
    #[serde(rename = "c")]
    pub bias: Option<f64>,
    pub seed: Option<u64>,
    pub split: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub instances: Vec<Instance>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        for (i, inst) in self.instances.iter().enumerate() {
            if inst.x.len() != h.feature_dim {
                return Err(Error::Data(format!(
                    "record {i} has {} features, header says {}",
                    inst.x.len(),
                    h.feature_dim
                )));
            }
            if inst.targets.iter().any(|&t| t >= h.num_targets) {
                return Err(Error::Data(format!("record {i} has an out-of-range target")));
            }
            if let Some(eta) = &inst.eta {
                if eta.len() != h.num_targets || eta.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::Data(format!("record {i} has a malformed eta vector")));
                }
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, &self.header)?;
        out.write_all(b"\n")?;
        for inst in &self.instances {
            serde_json::to_writer(&mut out, inst)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::Data("dataset file is empty".into()))??;
        let header: DatasetHeader = serde_json::from_str(&header_line)
            .map_err(|e| Error::Data(format!("bad dataset header: {e}")))?;
        let mut instances = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let inst: Instance = serde_json::from_str(&line)
                .map_err(|e| Error::Data(format!("bad record {i}: {e}")))?;
            instances.push(Instance::new(inst.x, inst.targets, inst.eta));
        }
        let ds = Self { header, instances };
        ds.validate()?;
        Ok(ds)
    }
}
