//! Trains every method on the M=1000 synthetic benchmark and prints the
//! test regret at k=50.
//!
//! Usage: compare_methods [lr] [epochs] [batch] [seeds] [negatives]

use std::thread;

use beamtree::metrics::estimated_regret;
use beamtree::synth::{gen_synthetic, SyntheticSpec};
use beamtree::trainer::{train, Method, TrainConfig};
use beamtree::tree::Tree;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: f64| args.get(i).map_or(default, |s| s.parse().unwrap());
    let lr = arg(0, 0.01);
    let epochs = arg(1, 10.0) as usize;
    let batch = arg(2, 100.0) as usize;
    let seeds = arg(3, 5.0) as u64;
    let negatives = arg(4, 3.0) as usize;
    let ms = [1, 10, 20, 50];

    let results: Vec<(Method, u64, Vec<f64>)> = thread::scope(|s| {
        let handles: Vec<_> = (0..seeds)
            .flat_map(|seed| Method::ALL.into_iter().map(move |m| (m, seed)))
            .map(|(method, seed)| {
                s.spawn(move || {
                    let data = gen_synthetic(&SyntheticSpec {
                        num_targets: 1000,
                        feature_dim: 10,
                        bias: -5.0,
                        n_train: 10_000,
                        n_test: 1000,
                        seed,
                    })
                    .unwrap();
                    let tree = Tree::random(1000, 2, seed).unwrap();
                    let config = TrainConfig {
                        beam_size: 50,
                        epochs,
                        batch_size: batch,
                        learning_rate: lr,
                        negatives_per_level: negatives,
                        ..TrainConfig::new(method, seed)
                    };
                    let out = train(&data.train, &tree, 10, &config).unwrap();
                    let rows =
                        estimated_regret(&tree, &out.params, out.model, &data.test, 50, &ms)
                            .unwrap();
                    (method, seed, rows.iter().map(|r| r.mean_regret).collect())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    println!("lr={lr} epochs={epochs} batch={batch} seeds={seeds} negatives={negatives}");
    for method in Method::ALL {
        let mut mean = vec![0.0; ms.len()];
        for (_, _, r) in results.iter().filter(|(m, _, _)| *m == method) {
            for (a, b) in mean.iter_mut().zip(r) {
                *a += b / seeds as f64;
            }
        }
        let cells: Vec<String> = mean.iter().map(|v| format!("{v:.4}")).collect();
        println!("{:<14} {}", method.name(), cells.join("  "));
    }
}
