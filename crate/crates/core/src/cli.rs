//! Command-line front end. Every command reads one JSON config, writes its
//! artifacts into an output directory, and is a pure function of the config
//! and its input files.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{evaluate, level_distribution, MetricsRow, RegretRow};
use crate::scorer::{LinearScorerParams, ScorerCheckpoint};
use crate::synth::{gen_synthetic, Dataset, DatasetHeader, SyntheticSpec};
use crate::toy::{run_toy_grid, ToyGrid, ToyRow};
use crate::trainer::{train_from, EpochLog, TrainConfig};
use crate::tree::{Tree, TreeFile};

#[derive(Debug, Parser)]
#[command(name = "beamtree", version, about = "Tree retrieval models with beam search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON config for the command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    SynthGen,
    /// Train a node scorer.
    Train,
    /// Beam-search evaluation of a checkpoint.
    Evaluate,
    /// Toy estimator experiments.
    Toy,
    /// Level-wise label distribution of a dataset.
    Stats,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::SynthGen => "synth-gen",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Toy => "toy",
            Command::Stats => "stats",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainCommand {
    pub train_data: PathBuf,
    /// Existing tree file; when absent a random tree is built from the seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<PathBuf>,
    #[serde(default = "default_arity")]
    pub arity: usize,
    pub trainer: TrainConfig,
}

fn default_arity() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateCommand {
    pub test_data: PathBuf,
    pub tree: PathBuf,
    pub checkpoint: PathBuf,
    pub beam_size: usize,
    pub m_values: Vec<usize>,
    /// `true` requires η on every record, `false` skips regret; by default
    /// regret is reported whenever η is available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regret: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsCommand {
    pub data: PathBuf,
    pub tree: PathBuf,
    pub level: usize,
}

/// Written next to every command's outputs; `config` re-validates as the
/// command's config.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
}

/// Parses the process arguments and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig(format!("{} needs --config", cli.command.name())))?;
    let text = fs::read_to_string(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new(""));
    fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::SynthGen => {
            let mut spec: SyntheticSpec = parse_config(&text)?;
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            cmd_synth_gen(&spec, &cli.out)
        }
        Command::Train => {
            let mut config: TrainCommand = parse_config(&text)?;
            if let Some(seed) = cli.seed {
                config.trainer.seed = seed;
            }
            cmd_train(&config, base, &cli.out)
        }
        Command::Evaluate => cmd_evaluate(&parse_config(&text)?, base, &cli.out),
        Command::Toy => {
            let mut grid: ToyGrid = parse_config(&text)?;
            if let Some(seed) = cli.seed {
                grid.seed = seed;
            }
            cmd_toy(&grid, &cli.out)
        }
        Command::Stats => cmd_stats(&parse_config(&text)?, base, &cli.out),
    }
}

fn parse_config<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

fn write_manifest<T: Serialize>(out: &Path, command: Command, config: &T, outputs: &[&str]) -> Result<()> {
    write_json(
        &out.join("manifest.json"),
        &Manifest {
            command: command.name().into(),
            config: serde_json::to_value(config)?,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        },
    )
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    Dataset::read_from(BufReader::new(file))
}

fn read_tree(path: &Path) -> Result<Tree> {
    let file: TreeFile = read_json(path)?;
    Tree::from_file(file).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn cmd_synth_gen(spec: &SyntheticSpec, out: &Path) -> Result<()> {
    let data = gen_synthetic(spec)?;
    let mut outputs = vec!["train.jsonl"];
    let mut splits = vec![("train", data.train)];
    if spec.n_test > 0 {
        outputs.push("test.jsonl");
        splits.push(("test", data.test));
    }
    for (split, instances) in splits {
        let ds = Dataset {
            header: DatasetHeader {
                num_targets: spec.num_targets,
                feature_dim: spec.feature_dim,
                bias: Some(spec.bias),
                seed: Some(spec.seed),
                split: split.into(),
            },
            instances,
        };
        ds.write_to(BufWriter::new(File::create(out.join(format!("{split}.jsonl")))?))?;
    }
    write_manifest(out, Command::SynthGen, spec, &outputs)
}

pub fn cmd_train(config: &TrainCommand, base: &Path, out: &Path) -> Result<()> {
    config.trainer.validate()?;
    let data = read_dataset(&resolve(base, &config.train_data))?;
    let tree = match &config.tree {
        Some(p) => read_tree(&resolve(base, p))?,
        None => Tree::random(data.header.num_targets, config.arity, config.trainer.seed)?,
    };
    if tree.num_targets() != data.header.num_targets {
        return Err(Error::Data(format!(
            "tree has {} targets, dataset has {}",
            tree.num_targets(),
            data.header.num_targets
        )));
    }
    let init = LinearScorerParams::init_random(&tree, data.header.feature_dim, config.trainer.seed);
    let trained = train_from(&data.instances, &tree, init, &config.trainer)?;
    write_json(&out.join("tree.json"), &tree.to_file())?;
    write_json(
        &out.join("checkpoint.json"),
        &trained.params.to_checkpoint(trained.model),
    )?;
    write_csv(
        &out.join("train_log.csv"),
        "epoch,mean_loss,wall_seconds",
        trained.log.iter().map(|EpochLog { epoch, mean_loss, wall_seconds }| {
            format!("{epoch},{mean_loss},{wall_seconds:.3}")
        }),
    )?;
    write_manifest(
        out,
        Command::Train,
        config,
        &["tree.json", "checkpoint.json", "train_log.csv"],
    )
}

#[derive(Serialize)]
struct EvaluateSummary<'a> {
    instances: usize,
    metrics: &'a [MetricsRow],
    regret: Option<&'a [RegretRow]>,
}

pub fn cmd_evaluate(config: &EvaluateCommand, base: &Path, out: &Path) -> Result<()> {
    let data = read_dataset(&resolve(base, &config.test_data))?;
    let tree = read_tree(&resolve(base, &config.tree))?;
    let ckpt: ScorerCheckpoint = read_json(&resolve(base, &config.checkpoint))?;
    let (params, model) = LinearScorerParams::from_checkpoint(&ckpt)?;
    if params.num_nodes() != tree.num_nodes() || params.feature_dim() != data.header.feature_dim {
        return Err(Error::Data("checkpoint does not match the tree or the dataset".into()));
    }
    let has_eta = data.instances.iter().all(|i| i.eta.is_some());
    let with_regret = match config.regret {
        Some(true) if !has_eta => {
            return Err(Error::Data("regret requested but the test set has no eta".into()))
        }
        Some(r) => r,
        None => has_eta,
    };
    let eval = evaluate(
        &tree,
        &params,
        model,
        &data.instances,
        config.beam_size,
        &config.m_values,
        with_regret,
    )?;
    let mut outputs = vec!["metrics.csv", "summary.json"];
    write_csv(
        &out.join("metrics.csv"),
        "k,m,precision,recall,f_measure,instances,skipped",
        eval.metrics.rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.k, r.m, r.precision, r.recall, r.f_measure, r.instances, r.skipped
            )
        }),
    )?;
    if let Some(rows) = &eval.regret {
        outputs.push("regret.csv");
        write_csv(
            &out.join("regret.csv"),
            "k,m,mean_regret,std_err,count",
            rows.iter()
                .map(|r| format!("{},{},{},{},{}", r.k, r.m, r.mean_regret, r.std_err, r.count)),
        )?;
    }
    write_json(
        &out.join("summary.json"),
        &EvaluateSummary {
            instances: data.instances.len(),
            metrics: &eval.metrics.rows,
            regret: eval.regret.as_deref(),
        },
    )?;
    write_manifest(out, Command::Evaluate, config, &outputs)
}

/// CSV lines of a toy grid, in the column order
/// `estimator,N,k,m,mean_regret,std_err,runs`.
pub fn toy_csv_rows(rows: &[ToyRow]) -> impl Iterator<Item = String> + '_ {
    rows.iter().map(|r| {
        format!(
            "{},{},{},{},{},{},{}",
            r.estimator, r.sample_size, r.k, r.m, r.mean_regret, r.std_err, r.runs
        )
    })
}

pub const TOY_CSV_HEADER: &str = "estimator,N,k,m,mean_regret,std_err,runs";

pub fn cmd_toy(grid: &ToyGrid, out: &Path) -> Result<()> {
    let rows = run_toy_grid(grid)?;
    write_csv(&out.join("toy.csv"), TOY_CSV_HEADER, toy_csv_rows(&rows))?;
    write_json(&out.join("summary.json"), &rows)?;
    write_manifest(out, Command::Toy, grid, &["toy.csv", "summary.json"])
}

pub fn cmd_stats(config: &StatsCommand, base: &Path, out: &Path) -> Result<()> {
    let data = read_dataset(&resolve(base, &config.data))?;
    let tree = read_tree(&resolve(base, &config.tree))?;
    if tree.num_targets() != data.header.num_targets {
        return Err(Error::Data("tree and dataset disagree on the number of targets".into()));
    }
    let dist = level_distribution(&data.instances, &tree, config.level)?;
    write_csv(
        &out.join("level_distribution.csv"),
        "rank,mass",
        dist.iter().enumerate().map(|(i, p)| format!("{},{p}", i + 1)),
    )?;
    write_manifest(out, Command::Stats, config, &["level_distribution.csv"])
}
