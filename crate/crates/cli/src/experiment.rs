//! Experiment configuration and the per-seed run pipeline:
//! generate -> train -> evaluate -> dump corpora -> metrics -> persist.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

use hierref_core::agents::{
    dump_corpus, evaluate, save_checkpoint, train, GameConfig, TrainOutcome,
};
use hierref_core::dataset::{
    build_zeroshot_abstraction_split, generate_dataset, save_dataset, DatasetSplits,
    DistractorMode, GenConfig, SplitId,
};
use hierref_core::metrics::{
    compute_report, write_per_level_csv, write_report_json, write_report_text, MetricsReport,
};
use hierref_core::nn::TemperatureSchedule;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ZeroShotMode {
    Objects,
    Abstractions,
}

impl std::fmt::Display for ZeroShotMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ZeroShotMode::Objects => write!(f, "objects"),
            ZeroShotMode::Abstractions => write!(f, "abstractions"),
        }
    }
}

impl FromStr for ZeroShotMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "objects" => Ok(ZeroShotMode::Objects),
            "abstractions" => Ok(ZeroShotMode::Abstractions),
            other => Err(format!("unknown zero-shot mode {other:?}")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: u8,
    pub vocab_factor: usize,
    pub distractor_mode: DistractorMode,
    pub zero_shot_mode: ZeroShotMode,
    pub seeds: Vec<u64>,
    /// Seed for dataset generation; shared by all runs of the experiment.
    pub data_seed: u64,
    pub samples_per_object_per_level: usize,
    pub distractors_per_sample: usize,
    pub zero_shot_object_fraction: f64,
    pub train_fraction_of_rest: f64,
    pub max_len: Option<usize>,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub temperature_initial: f64,
    pub temperature_decay: f64,
    pub metrics_split: SplitId,
    pub max_pairs: usize,
    pub out_dir: PathBuf,
    pub force: bool,
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(n: usize, k: u8, out_dir: PathBuf) -> Self {
        ExperimentConfig {
            n,
            k,
            vocab_factor: 3,
            distractor_mode: DistractorMode::Unbalanced,
            zero_shot_mode: ZeroShotMode::Objects,
            seeds: vec![1, 2, 3, 4, 5],
            data_seed: 42,
            samples_per_object_per_level: 10,
            distractors_per_sample: 10,
            zero_shot_object_fraction: 0.20,
            train_fraction_of_rest: 0.75,
            max_len: None,
            embed_dim: 128,
            hidden_dim: 256,
            epochs: 300,
            batch_size: 32,
            learning_rate: 0.0005,
            temperature_initial: 1.5,
            temperature_decay: 0.99,
            metrics_split: SplitId::Validation,
            max_pairs: hierref_core::metrics::DEFAULT_MAX_PAIRS,
            out_dir,
            force: false,
            threads: None,
        }
    }

    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            n: self.n,
            k: self.k,
            samples_per_object_per_level: self.samples_per_object_per_level,
            distractors_per_sample: self.distractors_per_sample,
            distractor_mode: self.distractor_mode,
            zero_shot_object_fraction: self.zero_shot_object_fraction,
            train_fraction_of_rest: self.train_fraction_of_rest,
            seed: self.data_seed,
        }
    }

    pub fn game_config(&self, seed: u64) -> GameConfig {
        GameConfig {
            n: self.n,
            k: self.k,
            max_len: self.max_len.unwrap_or(self.n),
            vocab_factor: self.vocab_factor,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            temperature: TemperatureSchedule::new(
                self.temperature_initial,
                self.temperature_decay,
            ),
            seed,
        }
    }

    pub fn config_lines(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        format!(
            "n={}\nk={}\nvocab_factor={}\ndistractor_mode={}\nzero_shot={}\nseeds={}\n\
             data_seed={}\nsamples_per_level={}\ndistractors={}\nzero_shot_object_fraction={}\n\
             train_fraction_of_rest={}\nmax_len={}\nembed_dim={}\nhidden_dim={}\nepochs={}\n\
             batch_size={}\nlearning_rate={}\ntemperature_initial={}\ntemperature_decay={}\n\
             metrics_split={}\nmax_pairs={}\n",
            self.n,
            self.k,
            self.vocab_factor,
            self.distractor_mode,
            self.zero_shot_mode,
            seeds.join(","),
            self.data_seed,
            self.samples_per_object_per_level,
            self.distractors_per_sample,
            self.zero_shot_object_fraction,
            self.train_fraction_of_rest,
            self.max_len.unwrap_or(self.n),
            self.embed_dim,
            self.hidden_dim,
            self.epochs,
            self.batch_size,
            self.learning_rate,
            self.temperature_initial,
            self.temperature_decay,
            self.metrics_split,
            self.max_pairs,
        )
    }
}

/// Files produced by one seed's run.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub seed: u64,
    pub dir: PathBuf,
    pub accuracies: BTreeMap<String, f64>,
    pub report: MetricsReport,
}

pub fn generate_for(cfg: &ExperimentConfig) -> Result<DatasetSplits> {
    let gen = cfg.gen_config();
    let dataset = match cfg.zero_shot_mode {
        ZeroShotMode::Objects => generate_dataset(&gen),
        ZeroShotMode::Abstractions => build_zeroshot_abstraction_split(&gen),
    }
    .context("stage gen-data")?;
    Ok(dataset)
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn write_history(outcome: &TrainOutcome<f32>, path: &Path) -> Result<()> {
    let mut out = String::from("epoch,temperature,train_loss,train_acc,val_loss,val_acc\n");
    for s in &outcome.history {
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            s.epoch, s.temperature, s.train_loss, s.train_acc, s.val_loss, s.val_acc
        )?;
    }
    fs::write(path, out)?;
    Ok(())
}

fn nonempty_splits(dataset: &DatasetSplits) -> Vec<SplitId> {
    SplitId::ALL
        .into_iter()
        .filter(|&id| !dataset.split(id).is_empty())
        .collect()
}

/// Trains and persists one seed into `<out_dir>/seed_<seed>/`.
pub fn run_one_seed(
    cfg: &ExperimentConfig,
    dataset: &DatasetSplits,
    seed: u64,
) -> Result<RunArtifacts> {
    let dir = cfg.out_dir.join(format!("seed_{seed}"));
    fs::create_dir_all(&dir)?;
    let marker = dir.join("INCOMPLETE");
    fs::write(&marker, "run in progress or aborted\n")?;

    let game_cfg = cfg.game_config(seed);
    let outcome = train::<f32>(dataset, &game_cfg)
        .with_context(|| format!("stage train (seed {seed})"))?;
    write_history(&outcome, &dir.join("history.csv"))
        .with_context(|| format!("stage history (seed {seed})"))?;

    let mut pair = outcome.pair;
    save_checkpoint(&mut pair, cfg.epochs, &dir.join("checkpoint.bin"))
        .with_context(|| format!("stage checkpoint (seed {seed})"))?;

    let mut accuracies = BTreeMap::new();
    for id in nonempty_splits(dataset) {
        let acc = evaluate(&pair, dataset.split(id))
            .with_context(|| format!("stage eval {id} (seed {seed})"))?;
        accuracies.insert(id.to_string(), acc);
    }
    let mut acc_text = String::new();
    for (split, acc) in &accuracies {
        writeln!(acc_text, "{split}={acc:.6}")?;
    }
    fs::write(dir.join("accuracies.txt"), acc_text)?;

    for id in nonempty_splits(dataset) {
        let corpus = dump_corpus(&pair, dataset.split(id));
        corpus
            .save(&dir.join(format!("corpus_{id}.txt")))
            .with_context(|| format!("stage corpus {id} (seed {seed})"))?;
    }

    let metrics_corpus = dump_corpus(&pair, dataset.split(cfg.metrics_split));
    let report = compute_report(&metrics_corpus, cfg.max_pairs)
        .with_context(|| format!("stage metrics (seed {seed})"))?;
    write_report_json(&report, &dir.join("metrics.json"))?;
    write_report_text(&report, &dir.join("metrics.txt"))?;
    write_per_level_csv(&report, &dir.join("per_level.csv"))?;

    // Manifest: config plus content hashes of everything in the run dir.
    let mut manifest = String::from("hierref-run v1\n");
    manifest.push_str(&cfg.config_lines());
    manifest.push_str(&format!("seed={seed}\n"));
    let mut names: Vec<String> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|name| name != "INCOMPLETE" && name != "manifest.txt")
        .collect();
    names.sort();
    for name in names {
        let hash = sha256_file(&dir.join(&name))?;
        manifest.push_str(&format!("sha256 {hash} {name}\n"));
    }
    fs::write(dir.join("manifest.txt"), manifest)?;

    fs::remove_file(&marker)?;
    Ok(RunArtifacts {
        seed,
        dir,
        accuracies,
        report,
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn write_aggregate(cfg: &ExperimentConfig, artifacts: &[RunArtifacts]) -> Result<()> {
    let mut csv = String::from("kind,name,mean,median,min,max\n");
    let mut text = format!(
        "experiment D({},{}) f={} {} zero-shot={} seeds={}\n",
        cfg.n,
        cfg.k,
        cfg.vocab_factor,
        cfg.distractor_mode,
        cfg.zero_shot_mode,
        artifacts.len()
    );

    let mut split_names: Vec<String> = artifacts
        .iter()
        .flat_map(|a| a.accuracies.keys().cloned())
        .collect();
    split_names.sort();
    split_names.dedup();
    for split in &split_names {
        let mut values: Vec<f64> = artifacts
            .iter()
            .filter_map(|a| a.accuracies.get(split).copied())
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let med = median(&mut values);
        writeln!(csv, "accuracy,{split},{mean:.6},{med:.6},{min:.6},{max:.6}")?;
        writeln!(text, "accuracy {split}: mean {mean:.4} median {med:.4}")?;
    }

    type MetricGetter = fn(&MetricsReport) -> f64;
    let metric_cols: [(&str, MetricGetter); 8] = [
        ("effectiveness", |r| r.effectiveness),
        ("consistency", |r| r.consistency),
        ("nmi", |r| r.nmi),
        ("topsim", |r| r.topsim),
        ("posdis", |r| r.posdis),
        ("bosdis", |r| r.bosdis),
        ("symbol_redundancy", |r| r.symbol_redundancy),
        ("mean_message_length", |r| r.mean_message_length),
    ];
    for (name, get) in metric_cols {
        let mut values: Vec<f64> = artifacts.iter().map(|a| get(&a.report)).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let med = median(&mut values);
        writeln!(csv, "metric,{name},{mean:.6},{med:.6},{min:.6},{max:.6}")?;
        writeln!(text, "metric {name}: mean {mean:.4} median {med:.4}")?;
    }

    fs::write(cfg.out_dir.join("aggregate.csv"), csv)?;
    fs::write(cfg.out_dir.join("aggregate.txt"), text)?;
    Ok(())
}

/// Runs every seed (parallel up to the thread cap), then aggregates.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunArtifacts>> {
    if cfg.seeds.is_empty() {
        bail!("at least one seed is required");
    }
    if cfg.out_dir.exists() && !cfg.force {
        bail!(
            "output directory {} already exists; pass --force to overwrite",
            cfg.out_dir.display()
        );
    }
    fs::create_dir_all(&cfg.out_dir)?;

    let dataset = generate_for(cfg)?;
    save_dataset(&dataset, &cfg.out_dir.join("dataset.txt")).context("stage save-dataset")?;

    let threads = crate::max_threads(cfg.threads).min(cfg.seeds.len());
    let queue = Mutex::new(cfg.seeds.clone());
    let results: Mutex<Vec<Result<RunArtifacts>>> = Mutex::new(Vec::new());

    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let seed = {
                    let mut q = queue.lock().unwrap();
                    match q.pop() {
                        Some(s) => s,
                        None => break,
                    }
                };
                let result = run_one_seed(cfg, &dataset, seed);
                results.lock().unwrap().push(result);
            });
        }
    });

    let mut artifacts = Vec::new();
    for result in results.into_inner().unwrap() {
        artifacts.push(result?);
    }
    // Aggregates are invariant to completion order.
    artifacts.sort_by_key(|a| a.seed);
    write_aggregate(cfg, &artifacts)?;
    Ok(artifacts)
}
