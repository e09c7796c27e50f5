use beamtree_web::{beam_view_json, toy_experiment_json};
use serde_json::Value;

#[test]
fn optimal_estimator_view_has_zero_regret() {
    let v: Value = serde_json::from_str(&beam_view_json(32, 2, "OptEst", 0, 4, 3, 7).unwrap()).unwrap();
    assert_eq!(v["regret"], 0.0);
    assert_eq!(v["retrieved"].as_array().unwrap().len(), 3);
    let mut got: Vec<u64> = v["retrieved"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    let mut best: Vec<u64> = v["best"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    got.sort_unstable();
    best.sort_unstable();
    assert_eq!(got, best);
    let nodes = v["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 63);
    let kept_leaves = nodes
        .iter()
        .filter(|n| n["target"].is_number() && n["kept"] == true)
        .count();
    assert_eq!(kept_leaves, 4);
}

#[test]
fn beam_view_rejects_bad_input() {
    assert!(beam_view_json(100, 2, "DirEst", 0, 4, 2, 0).is_err());
    assert!(beam_view_json(10, 2, "Nope", 0, 4, 2, 0).is_err());
    assert!(beam_view_json(10, 2, "DirEst", 0, 4, 5, 0).is_err());
}

#[test]
fn toy_experiment_lists_every_estimator_and_m() {
    let v: Value = serde_json::from_str(&toy_experiment_json(200, 2, 0, 5, 10, 1).unwrap()).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 15);
    for r in rows.iter().filter(|r| r["estimator"] == "OptEst") {
        assert_eq!(r["mean_regret"], 0.0);
        assert_eq!(r["n"], "inf");
    }
    assert!(toy_experiment_json(200, 2, 0, 5, 10_000, 1).is_err());
}
