//! `hierref`: experiment runner and analysis CLI for the hierarchical
//! reference game. Exit codes: 0 success, 1 usage error, 2 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hierref_cli::ablate::cross_sampling_ablation;
use hierref_cli::config_file::ConfigFile;
use hierref_cli::experiment::{run_experiment, ExperimentConfig, ZeroShotMode};
use hierref_cli::figures::emit_figures;
use hierref_cli::qualitative::{qualitative_dump, DumpMode, DumpRequest};
use hierref_core::agents::{dump_corpus, evaluate, load_checkpoint};
use hierref_core::concept::{ConceptKey, ObjectVector};
use hierref_core::dataset::{
    build_zeroshot_abstraction_split, generate_dataset, load_dataset, save_dataset,
    DistractorMode, GenConfig, SplitId,
};
use hierref_core::metrics::{
    compute_report, write_per_level_csv, write_report_json, write_report_text, Corpus, CorpusMeta,
};

#[derive(Parser, Debug)]
#[command(
    name = "hierref",
    about = "Hierarchical reference game: dataset generation, agent training, and language analysis",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct ExperimentArgs {
    /// Attribute count n.
    #[arg(long)]
    n: Option<usize>,
    /// Values per attribute k.
    #[arg(long)]
    k: Option<u8>,
    /// Multiplier on the minimal content vocabulary k+1.
    #[arg(long)]
    vocab_factor: Option<usize>,
    /// Distractor sampling: unbalanced | balanced.
    #[arg(long)]
    distractor_mode: Option<String>,
    /// Zero-shot hold-out: objects | abstractions.
    #[arg(long)]
    zero_shot: Option<String>,
    /// Training seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Dataset generation seed (shared across training seeds).
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    samples_per_level: Option<usize>,
    #[arg(long)]
    distractors: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    temperature_initial: Option<f64>,
    #[arg(long)]
    temperature_decay: Option<f64>,
    /// Split the metrics report is computed on.
    #[arg(long)]
    metrics_split: Option<String>,
    /// Pair budget for topographic similarity.
    #[arg(long)]
    max_pairs: Option<usize>,
    /// Parallel seed jobs (also HIERREF_THREADS).
    #[arg(long)]
    threads: Option<usize>,
    /// key=value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ExperimentArgs {
    fn resolve(&self, out_dir: PathBuf, force: bool) -> Result<ExperimentConfig> {
        let file = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        fn pick<T: FromStr + Clone>(cli: &Option<T>, file: Result<Option<T>>, default: T) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            Ok(cli.clone().or(file?).unwrap_or(default))
        }

        let n = pick(&self.n, file.get("n"), 3)?;
        let k = pick(&self.k, file.get("k"), 4)?;
        let mut cfg = ExperimentConfig::new(n, k, out_dir);
        cfg.vocab_factor = pick(&self.vocab_factor, file.get("vocab_factor"), cfg.vocab_factor)?;
        let mode = pick(
            &self.distractor_mode,
            file.get("distractor_mode"),
            cfg.distractor_mode.to_string(),
        )?;
        cfg.distractor_mode = mode.parse::<DistractorMode>().map_err(anyhow::Error::msg)?;
        let zs = pick(&self.zero_shot, file.get("zero_shot"), cfg.zero_shot_mode.to_string())?;
        cfg.zero_shot_mode = zs.parse::<ZeroShotMode>().map_err(anyhow::Error::msg)?;
        cfg.seeds = self
            .seeds
            .clone()
            .or(file.get_seeds("seeds")?)
            .unwrap_or(cfg.seeds);
        cfg.data_seed = pick(&self.data_seed, file.get("data_seed"), cfg.data_seed)?;
        cfg.samples_per_object_per_level = pick(
            &self.samples_per_level,
            file.get("samples_per_level"),
            cfg.samples_per_object_per_level,
        )?;
        cfg.distractors_per_sample = pick(
            &self.distractors,
            file.get("distractors"),
            cfg.distractors_per_sample,
        )?;
        cfg.epochs = pick(&self.epochs, file.get("epochs"), cfg.epochs)?;
        cfg.batch_size = pick(&self.batch_size, file.get("batch_size"), cfg.batch_size)?;
        cfg.learning_rate = pick(&self.learning_rate, file.get("learning_rate"), cfg.learning_rate)?;
        cfg.embed_dim = pick(&self.embed_dim, file.get("embed_dim"), cfg.embed_dim)?;
        cfg.hidden_dim = pick(&self.hidden_dim, file.get("hidden_dim"), cfg.hidden_dim)?;
        cfg.max_len = self.max_len.or(file.get("max_len")?).or(cfg.max_len);
        cfg.temperature_initial = pick(
            &self.temperature_initial,
            file.get("temperature_initial"),
            cfg.temperature_initial,
        )?;
        cfg.temperature_decay = pick(
            &self.temperature_decay,
            file.get("temperature_decay"),
            cfg.temperature_decay,
        )?;
        let split = pick(
            &self.metrics_split,
            file.get("metrics_split"),
            cfg.metrics_split.to_string(),
        )?;
        cfg.metrics_split = split.parse::<SplitId>().map_err(anyhow::Error::msg)?;
        cfg.max_pairs = pick(&self.max_pairs, file.get("max_pairs"), cfg.max_pairs)?;
        cfg.threads = self.threads.or(file.get("threads")?);
        cfg.force = force;
        Ok(cfg)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset file without training.
    GenData {
        #[command(flatten)]
        args: ExperimentArgs,
        /// Output dataset file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a full experiment: generate data, train every seed, evaluate,
    /// dump corpora, and compute metrics.
    Train {
        #[command(flatten)]
        args: ExperimentArgs,
        /// Output experiment directory.
        #[arg(long)]
        out: PathBuf,
        /// Overwrite an existing experiment directory.
        #[arg(long)]
        force: bool,
    },
    /// Evaluate a trained checkpoint on a dataset split.
    Eval {
        /// Seed directory containing checkpoint.bin.
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value = "validation")]
        split: String,
        /// Evaluate on a different dataset file instead of the run's own.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Compute the metrics report for a trained run or a corpus dump.
    Metrics {
        /// Seed directory containing checkpoint.bin (mutually exclusive
        /// with --corpus).
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long, default_value = "validation")]
        split: String,
        /// Standalone corpus dump file; requires the dimension flags.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        k: Option<u8>,
        #[arg(long)]
        vocab_size: Option<usize>,
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long)]
        max_pairs: Option<usize>,
        /// Directory for metrics files; defaults to the run directory or,
        /// for --corpus, next to the corpus file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Qualitative dumps: instances of a concept, or one object across its
    /// abstraction levels.
    Dump {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value = "train")]
        split: String,
        /// concept | object
        #[arg(long, default_value = "concept")]
        mode: String,
        /// Concept key like 4,_,_ (mode = concept).
        #[arg(long)]
        concept: Option<String>,
        /// Object like 4,3,1 (mode = object).
        #[arg(long)]
        object: Option<String>,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        dump_seed: u64,
    },
    /// Cross-sampling ablation between an unbalanced-trained and a
    /// balanced-trained run.
    Ablate {
        #[arg(long)]
        run_a: PathBuf,
        #[arg(long)]
        run_b: PathBuf,
        /// Write the 4-cell table as CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit figure CSVs and SVG charts from completed experiments.
    Figures {
        /// Experiment directories (each containing seed_* runs).
        #[arg(long, num_args = 1.., required = true)]
        experiments: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a preset grid of datasets.
    Sweep {
        #[command(flatten)]
        args: ExperimentArgs,
        /// desk (D(3,4), D(4,4)) or paper (the full dataset grid).
        #[arg(long, default_value = "desk")]
        preset: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

fn split_from(name: &str) -> Result<SplitId> {
    name.parse::<SplitId>().map_err(anyhow::Error::msg)
}

fn cmd_gen_data(args: ExperimentArgs, out: PathBuf) -> Result<()> {
    let cfg = args.resolve(PathBuf::from("."), false)?;
    let gen: GenConfig = cfg.gen_config();
    let dataset = match cfg.zero_shot_mode {
        ZeroShotMode::Objects => generate_dataset(&gen)?,
        ZeroShotMode::Abstractions => build_zeroshot_abstraction_split(&gen)?,
    };
    save_dataset(&dataset, &out)?;
    println!(
        "wrote {} ({} train / {} validation / {} zeroshot_objects / {} zeroshot_abstractions)",
        out.display(),
        dataset.train.len(),
        dataset.validation.len(),
        dataset.zeroshot_objects.len(),
        dataset.zeroshot_abstractions.len()
    );
    Ok(())
}

fn cmd_train(args: ExperimentArgs, out: PathBuf, force: bool) -> Result<()> {
    let cfg = args.resolve(out, force)?;
    let artifacts = run_experiment(&cfg)?;
    for run in &artifacts {
        println!("seed {}: {}", run.seed, run.dir.display());
        for (split, acc) in &run.accuracies {
            println!("  accuracy {split} = {acc:.4}");
        }
        println!(
            "  effectiveness {:.4}  consistency {:.4}  nmi {:.4}",
            run.report.effectiveness, run.report.consistency, run.report.nmi
        );
    }
    println!("aggregate: {}", cfg.out_dir.join("aggregate.txt").display());
    Ok(())
}

fn cmd_eval(run: PathBuf, split: String, dataset: Option<PathBuf>) -> Result<()> {
    let (pair, _) = load_checkpoint(&run.join("checkpoint.bin"))
        .with_context(|| format!("loading checkpoint from {}", run.display()))?;
    let dataset_path = match dataset {
        Some(p) => p,
        None => {
            let local = run.join("dataset.txt");
            if local.exists() {
                local
            } else {
                run.parent()
                    .map(|p| p.join("dataset.txt"))
                    .filter(|p| p.exists())
                    .context("no dataset.txt found; pass --dataset")?
            }
        }
    };
    let data = load_dataset(&dataset_path)?;
    let id = split_from(&split)?;
    let samples = data.split(id);
    if samples.is_empty() {
        bail!("split {split} is empty in {}", dataset_path.display());
    }
    let acc = evaluate(&pair, samples)?;
    println!("split={split} samples={} accuracy={acc:.6}", samples.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_metrics(
    run: Option<PathBuf>,
    split: String,
    corpus: Option<PathBuf>,
    k: Option<u8>,
    vocab_size: Option<usize>,
    max_len: Option<usize>,
    max_pairs: Option<usize>,
    out: Option<PathBuf>,
) -> Result<()> {
    let max_pairs = max_pairs.unwrap_or(hierref_core::metrics::DEFAULT_MAX_PAIRS);
    let (corpus, out_dir, tag) = match (run, corpus) {
        (Some(run), None) => {
            let (pair, _) = load_checkpoint(&run.join("checkpoint.bin"))?;
            let dataset_path = if run.join("dataset.txt").exists() {
                run.join("dataset.txt")
            } else {
                run.parent()
                    .map(|p| p.join("dataset.txt"))
                    .filter(|p| p.exists())
                    .context("no dataset.txt found for the run")?
            };
            let dataset = load_dataset(&dataset_path)?;
            let id = split_from(&split)?;
            if dataset.split(id).is_empty() {
                bail!("split {split} is empty for this dataset");
            }
            let corpus = dump_corpus(&pair, dataset.split(id));
            (corpus, out.unwrap_or(run), format!("metrics_{split}"))
        }
        (None, Some(path)) => {
            let (k, vocab_size, max_len) = match (k, vocab_size, max_len) {
                (Some(k), Some(v), Some(l)) => (k, v, l),
                _ => bail!("--corpus requires --k, --vocab-size, and --max-len"),
            };
            // n is inferred from the keys in the file.
            let header_meta = CorpusMeta {
                n: peek_corpus_n(&path)?,
                k,
                vocab_size,
                max_len,
            };
            let corpus = Corpus::load(&path, header_meta)?;
            let out_dir = out
                .or_else(|| path.parent().map(|p| p.to_path_buf()))
                .unwrap_or_else(|| PathBuf::from("."));
            (corpus, out_dir, "metrics_corpus".to_string())
        }
        _ => bail!("pass exactly one of --run or --corpus"),
    };

    let report = compute_report(&corpus, max_pairs)?;
    std::fs::create_dir_all(&out_dir)?;
    write_report_json(&report, &out_dir.join(format!("{tag}.json")))?;
    write_report_text(&report, &out_dir.join(format!("{tag}.txt")))?;
    write_per_level_csv(&report, &out_dir.join(format!("{tag}_per_level.csv")))?;
    print!("{}", std::fs::read_to_string(out_dir.join(format!("{tag}.txt")))?);
    Ok(())
}

fn peek_corpus_n(path: &std::path::Path) -> Result<usize> {
    let text = std::fs::read_to_string(path)?;
    let second = text
        .lines()
        .nth(1)
        .context("corpus file has no records; cannot infer n")?;
    let key = second
        .split('\t')
        .next()
        .context("malformed corpus record")?;
    Ok(key.split(',').count())
}

fn cmd_dump(
    run: PathBuf,
    split: String,
    mode: String,
    concept: Option<String>,
    object: Option<String>,
    count: usize,
    dump_seed: u64,
) -> Result<()> {
    let request = DumpRequest {
        split: split_from(&split)?,
        mode: mode.parse::<DumpMode>().map_err(anyhow::Error::msg)?,
        concept: concept
            .map(|c| c.parse::<ConceptKey>())
            .transpose()
            .map_err(|e| anyhow::anyhow!("{e}"))?,
        object: object
            .map(|o| o.parse::<ObjectVector>())
            .transpose()
            .map_err(|e| anyhow::anyhow!("{e}"))?,
        count,
        seed: dump_seed,
    };
    print!("{}", qualitative_dump(&run, &request)?);
    Ok(())
}

fn cmd_ablate(run_a: PathBuf, run_b: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let (csv, text) = cross_sampling_ablation(&run_a, &run_b)?;
    if let Some(path) = out {
        std::fs::write(&path, &csv)?;
        println!("wrote {}", path.display());
    }
    print!("{text}");
    Ok(())
}

fn cmd_sweep(args: ExperimentArgs, preset: String, out: PathBuf, force: bool) -> Result<()> {
    let grid: Vec<(usize, u8)> = match preset.as_str() {
        "desk" => vec![(3, 4), (4, 4)],
        "paper" => vec![(3, 4), (3, 8), (3, 16), (4, 4), (4, 8), (5, 4)],
        other => bail!("unknown preset {other:?} (use desk|paper)"),
    };
    for (n, k) in grid {
        if (n, k) == (3, 16) || (n, k) == (4, 8) {
            eprintln!(
                "note: D({n},{k}) is a long run (hours per seed at the default 300 epochs)"
            );
        }
        let mut per_dataset = args.clone();
        per_dataset.n = Some(n);
        per_dataset.k = Some(k);
        let dir = out.join(format!("D{n}_{k}"));
        println!("=== D({n},{k}) -> {}", dir.display());
        let cfg = per_dataset.resolve(dir, force)?;
        run_experiment(&cfg)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { args, out } => cmd_gen_data(args, out),
        Command::Train { args, out, force } => cmd_train(args, out, force),
        Command::Eval {
            run,
            split,
            dataset,
        } => cmd_eval(run, split, dataset),
        Command::Metrics {
            run,
            split,
            corpus,
            k,
            vocab_size,
            max_len,
            max_pairs,
            out,
        } => cmd_metrics(run, split, corpus, k, vocab_size, max_len, max_pairs, out),
        Command::Dump {
            run,
            split,
            mode,
            concept,
            object,
            count,
            dump_seed,
        } => cmd_dump(run, split, mode, concept, object, count, dump_seed),
        Command::Ablate { run_a, run_b, out } => cmd_ablate(run_a, run_b, out),
        Command::Figures { experiments, out } => {
            let written = emit_figures(&experiments, &out)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Sweep {
            args,
            preset,
            out,
            force,
        } => cmd_sweep(args, preset, out, force),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
