//! WebAssembly bindings for the browser demo. Each exported function takes
//! plain numbers and returns a JSON string; the `*_json` functions hold the
//! logic and are callable natively.

use beamtree::beam::beam_search_traced_with_ties;
use beamtree::metrics::regret_p_at_m;
use beamtree::toy::{fit, gen_toy, run_toy_grid, Estimator, SampleSize, ToyGrid, ToySource};
use beamtree::tree::Tree;
use beamtree::{rng, toy};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest tree the beam view will draw.
pub const MAX_DRAWN_TARGETS: usize = 64;

fn parse_estimator(name: &str) -> Result<Estimator, String> {
    match name {
        "DirEst" => Ok(Estimator::DirEst),
        "HierEst" => Ok(Estimator::HierEst),
        "OptEst" => Ok(Estimator::OptEst),
        other => Err(format!("unknown estimator {other:?}")),
    }
}

/// `0` selects the exact population values.
fn sample_size(n: u32) -> SampleSize {
    if n == 0 {
        SampleSize::Infinite
    } else {
        SampleSize::Finite(n as usize)
    }
}

#[derive(Serialize)]
struct ToyCell {
    estimator: String,
    n: String,
    k: usize,
    m: usize,
    mean_regret: f64,
    std_err: f64,
    runs: usize,
}

/// Mean regret of all three estimators for `m = 1..=k` at one sample size.
pub fn toy_experiment_json(
    num_targets: usize,
    arity: usize,
    n: u32,
    k: usize,
    runs: usize,
    seed: u64,
) -> Result<String, String> {
    if runs > 500 || num_targets > 20_000 {
        return Err("keep runs <= 500 and M <= 20000 in the browser".into());
    }
    let ms: Vec<usize> = (1..=k).collect();
    let grid = ToyGrid {
        num_targets,
        arity,
        estimators: vec![Estimator::DirEst, Estimator::HierEst, Estimator::OptEst],
        sample_sizes: vec![sample_size(n)],
        cells: ToyGrid::triangle(&[k], &ms),
        runs,
        seed,
    };
    let rows = run_toy_grid(&grid).map_err(|e| e.to_string())?;
    let cells: Vec<ToyCell> = rows
        .into_iter()
        .map(|r| ToyCell {
            estimator: r.estimator.to_string(),
            n: r.sample_size.to_string(),
            k: r.k,
            m: r.m,
            mean_regret: r.mean_regret,
            std_err: r.std_err,
            runs: r.runs,
        })
        .collect();
    serde_json::to_string(&cells).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct DrawnNode {
    id: usize,
    level: usize,
    parent: Option<usize>,
    prob: f64,
    /// Largest η in the subtree.
    best_eta: f64,
    target: Option<usize>,
    eta: Option<f64>,
    scored: bool,
    kept: bool,
}

#[derive(Serialize)]
struct BeamView {
    height: usize,
    nodes: Vec<DrawnNode>,
    retrieved: Vec<usize>,
    best: Vec<usize>,
    regret: f64,
    evaluations: usize,
}

/// One toy draw on a small tree: the estimated node table, which nodes the
/// beam scored and kept, and the regret of the top-`m` it returns.
pub fn beam_view_json(
    num_targets: usize,
    arity: usize,
    estimator: &str,
    n: u32,
    k: usize,
    m: usize,
    seed: u64,
) -> Result<String, String> {
    if num_targets > MAX_DRAWN_TARGETS {
        return Err(format!("at most {MAX_DRAWN_TARGETS} targets can be drawn"));
    }
    if m < 1 || m > k || k > num_targets {
        return Err("need 1 <= m <= k <= M".into());
    }
    let estimator = parse_estimator(estimator)?;
    let tree = Tree::random(num_targets, arity, seed).map_err(|e| e.to_string())?;
    let eta = gen_toy(num_targets, seed);
    let counts;
    let source = match sample_size(n) {
        SampleSize::Infinite => ToySource::Exact(&eta),
        SampleSize::Finite(n) => {
            counts = toy::sample_node_counts(&tree, &eta, n, &mut rng::stream(seed, "demo-sample"));
            ToySource::Sample(&counts)
        }
    };
    let table = fit(&tree, estimator, source).map_err(|e| e.to_string())?;
    let best_eta = toy::oracle_table(&tree, &eta).map_err(|e| e.to_string())?;
    let ties = toy::tie_keys(tree.num_nodes(), seed);
    let trace = beam_search_traced_with_ties(&tree, &table, k, Some(&ties)).map_err(|e| e.to_string())?;

    let mut scored = vec![false; tree.num_nodes()];
    let mut kept = vec![false; tree.num_nodes()];
    kept[0] = true;
    for level in &trace.candidates {
        for e in level {
            scored[e.node] = true;
        }
    }
    for beam in &trace.beams {
        for n in beam.nodes() {
            kept[n] = true;
        }
    }
    let nodes = (0..tree.num_nodes())
        .map(|id| {
            let target = tree.target_of_leaf(id).ok();
            DrawnNode {
                id,
                level: tree.level(id),
                parent: tree.parent(id),
                prob: table[id],
                best_eta: best_eta[id],
                target,
                eta: target.map(|t| eta[t]),
                scored: scored[id],
                kept: kept[id],
            }
        })
        .collect();
    let retrieved = beamtree::beam::retrieve_topm(&tree, trace.final_beam(), m)
        .map_err(|e| e.to_string())?;
    let mut order: Vec<usize> = (0..num_targets).collect();
    order.sort_by(|&a, &b| eta[b].total_cmp(&eta[a]).then(a.cmp(&b)));
    order.truncate(m);
    let view = BeamView {
        height: tree.height(),
        nodes,
        regret: regret_p_at_m(&eta, &retrieved, m).map_err(|e| e.to_string())?,
        retrieved,
        best: order,
        evaluations: trace.evaluations,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn toy_experiment(
    num_targets: usize,
    arity: usize,
    n: u32,
    k: usize,
    runs: usize,
    seed: u32,
) -> Result<String, JsValue> {
    toy_experiment_json(num_targets, arity, n, k, runs, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn beam_view(
    num_targets: usize,
    arity: usize,
    estimator: &str,
    n: u32,
    k: usize,
    m: usize,
    seed: u32,
) -> Result<String, JsValue> {
    beam_view_json(num_targets, arity, estimator, n, k, m, seed as u64)
        .map_err(|e| JsValue::from_str(&e))
}
