//! End-to-end tests of the experiment pipeline and the `hierref` binary.

use std::path::PathBuf;
use std::process::Command;

use hierref_cli::experiment::{run_experiment, ExperimentConfig, ZeroShotMode};
use hierref_cli::figures::emit_figures;
use hierref_cli::qualitative::{qualitative_dump, DumpMode, DumpRequest};
use hierref_core::dataset::{DistractorMode, SplitId};

fn test_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir()
        .join("hierref-cli-tests")
        .join(format!("{name}-{}", std::process::id()));
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn tiny_config(out_dir: PathBuf) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(2, 3, out_dir);
    cfg.seeds = vec![1, 2];
    cfg.samples_per_object_per_level = 6;
    cfg.distractors_per_sample = 4;
    cfg.embed_dim = 8;
    cfg.hidden_dim = 12;
    cfg.vocab_factor = 2;
    cfg.epochs = 10;
    cfg
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hierref"))
}

#[test]
fn experiment_emits_all_artifacts_and_is_reproducible() {
    let root = test_dir("experiment");
    let cfg = tiny_config(root.join("a"));
    let artifacts = run_experiment(&cfg).unwrap();
    assert_eq!(artifacts.len(), 2);

    assert!(root.join("a/dataset.txt").exists());
    assert!(root.join("a/aggregate.csv").exists());
    assert!(root.join("a/aggregate.txt").exists());
    for seed in [1, 2] {
        let dir = root.join(format!("a/seed_{seed}"));
        for file in [
            "history.csv",
            "checkpoint.bin",
            "checkpoint.bin.manifest.txt",
            "accuracies.txt",
            "corpus_train.txt",
            "corpus_validation.txt",
            "corpus_zeroshot_objects.txt",
            "metrics.json",
            "metrics.txt",
            "per_level.csv",
            "manifest.txt",
        ] {
            assert!(dir.join(file).exists(), "missing {file} for seed {seed}");
        }
        assert!(!dir.join("INCOMPLETE").exists());
    }

    // Identical config into a fresh directory: byte-identical datasets and
    // metrics.
    let cfg_b = ExperimentConfig {
        out_dir: root.join("b"),
        ..cfg.clone()
    };
    run_experiment(&cfg_b).unwrap();
    for file in ["dataset.txt", "seed_1/metrics.json", "seed_1/history.csv"] {
        let a = std::fs::read(root.join("a").join(file)).unwrap();
        let b = std::fs::read(root.join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }

    // Aggregates are invariant to seed order.
    let cfg_c = ExperimentConfig {
        out_dir: root.join("c"),
        seeds: vec![2, 1],
        ..cfg.clone()
    };
    run_experiment(&cfg_c).unwrap();
    let agg_a = std::fs::read(root.join("a/aggregate.csv")).unwrap();
    let agg_c = std::fs::read(root.join("c/aggregate.csv")).unwrap();
    assert_eq!(agg_a, agg_c);
}

#[test]
fn existing_output_requires_force() {
    let root = test_dir("force");
    let cfg = tiny_config(root.join("exp"));
    run_experiment(&cfg).unwrap();
    let err = run_experiment(&cfg).unwrap_err();
    assert!(err.to_string().contains("--force"), "{err}");
    let forced = ExperimentConfig {
        force: true,
        ..cfg
    };
    run_experiment(&forced).unwrap();
}

#[test]
fn abstraction_mode_populates_the_other_split() {
    let root = test_dir("abstractions");
    let mut cfg = tiny_config(root.join("exp"));
    cfg.zero_shot_mode = ZeroShotMode::Abstractions;
    cfg.seeds = vec![3];
    let artifacts = run_experiment(&cfg).unwrap();
    assert!(artifacts[0].accuracies.contains_key("zeroshot_abstractions"));
    assert!(!artifacts[0].accuracies.contains_key("zeroshot_objects"));
    assert!(root.join("exp/seed_3/corpus_zeroshot_abstractions.txt").exists());
}

#[test]
fn qualitative_dumps_are_deterministic() {
    let root = test_dir("dump");
    let mut cfg = tiny_config(root.join("exp"));
    cfg.seeds = vec![1];
    run_experiment(&cfg).unwrap();
    let run_dir = root.join("exp/seed_1");

    let request = DumpRequest {
        split: SplitId::Train,
        mode: DumpMode::ConceptInstances,
        concept: None,
        object: None,
        count: 10,
        seed: 7,
    };
    let a = qualitative_dump(&run_dir, &request).unwrap();
    let b = qualitative_dump(&run_dir, &request).unwrap();
    assert_eq!(a, b);
    assert!(a.contains("instances"));

    let request = DumpRequest {
        split: SplitId::Train,
        mode: DumpMode::ObjectAbstractions,
        concept: None,
        object: None,
        count: 10,
        seed: 7,
    };
    let text = qualitative_dump(&run_dir, &request).unwrap();
    assert!(text.contains("level 1"));
    assert!(text.contains("level 2"));

    // Unknown concept lists available keys.
    let request = DumpRequest {
        split: SplitId::Train,
        mode: DumpMode::ConceptInstances,
        concept: Some("9,9".parse().unwrap()),
        object: None,
        count: 5,
        seed: 7,
    };
    let err = qualitative_dump(&run_dir, &request).unwrap_err();
    assert!(err.to_string().contains("available keys"), "{err}");
}

#[test]
fn figures_cover_every_analysis() {
    let root = test_dir("figures");
    let cfg = tiny_config(root.join("exp"));
    run_experiment(&cfg).unwrap();
    let figs = root.join("figs");
    let written = emit_figures(&[root.join("exp")], &figs).unwrap();
    for file in [
        "accuracy.csv",
        "accuracy.svg",
        "entropy_scores.csv",
        "entropy_by_level.csv",
        "length_redundancy.csv",
        "symbol_occurrence.csv",
        "symbol_occurrence.svg",
        "compositionality.csv",
        "compositionality.svg",
    ] {
        assert!(figs.join(file).exists(), "missing {file}");
    }
    assert!(written.len() >= 10);

    // Accuracy rows cover datasets x splits.
    let accuracy = std::fs::read_to_string(figs.join("accuracy.csv")).unwrap();
    let rows: Vec<&str> = accuracy.lines().skip(1).collect();
    assert_eq!(rows.len(), 3, "one dataset x three splits: {rows:?}");

    // The heatmap covers top-10 ranks x levels.
    let occurrence = std::fs::read_to_string(figs.join("symbol_occurrence.csv")).unwrap();
    assert_eq!(occurrence.lines().skip(1).count(), 10 * 2);

    // Bootstrapped figures are reproducible.
    let figs2 = root.join("figs2");
    emit_figures(&[root.join("exp")], &figs2).unwrap();
    let a = std::fs::read(figs.join("entropy_by_level.csv")).unwrap();
    let b = std::fs::read(figs2.join("entropy_by_level.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ablation_crosses_the_two_sampling_strategies() {
    let root = test_dir("ablate");
    let mut unbalanced = tiny_config(root.join("unbalanced"));
    unbalanced.seeds = vec![1];
    run_experiment(&unbalanced).unwrap();

    let mut balanced = tiny_config(root.join("balanced"));
    balanced.distractor_mode = DistractorMode::Balanced;
    balanced.seeds = vec![1];
    run_experiment(&balanced).unwrap();

    let (csv, text) = hierref_cli::ablate::cross_sampling_ablation(
        &root.join("unbalanced/seed_1"),
        &root.join("balanced/seed_1"),
    )
    .unwrap();
    assert_eq!(csv.lines().count(), 5, "header + 4 cells:\n{csv}");
    assert!(text.contains("unbalanced"));
    assert!(text.contains("balanced"));

    // Same strategy twice is a usage error.
    let err = hierref_cli::ablate::cross_sampling_ablation(
        &root.join("unbalanced/seed_1"),
        &root.join("unbalanced/seed_1"),
    )
    .unwrap_err();
    assert!(err.to_string().contains("nothing to cross"));
}

#[test]
fn binary_exit_codes() {
    // Help: success.
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("gen-data"));

    // Usage error: unknown flag.
    let out = bin().args(["train", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Usage error: bad subcommand.
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Runtime failure: missing run directory.
    let out = bin()
        .args(["eval", "--run", "/nonexistent/run"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn binary_gen_data_is_deterministic_and_config_file_applies() {
    let root = test_dir("gendata");
    let a = root.join("a.txt");
    let b = root.join("b.txt");
    for path in [&a, &b] {
        let out = bin()
            .args([
                "gen-data",
                "--n",
                "2",
                "--k",
                "3",
                "--data-seed",
                "9",
                "--samples-per-level",
                "2",
                "--distractors",
                "3",
                "--out",
            ])
            .arg(path)
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    // Config file supplies defaults; flags override.
    let cfg_path = root.join("exp.cfg");
    std::fs::write(&cfg_path, "n=2\nk=3\nsamples_per_level=2\ndistractors=3\ndata_seed=9\n")
        .unwrap();
    let c = root.join("c.txt");
    let out = bin()
        .args(["gen-data", "--config"])
        .arg(&cfg_path)
        .args(["--out"])
        .arg(&c)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn binary_eval_and_metrics_roundtrip() {
    let root = test_dir("evalmetrics");
    let mut cfg = tiny_config(root.join("exp"));
    cfg.seeds = vec![1];
    run_experiment(&cfg).unwrap();
    let run_dir = root.join("exp/seed_1");

    let out = bin()
        .args(["eval", "--run"])
        .arg(&run_dir)
        .args(["--split", "train"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("accuracy="));

    let out = bin()
        .args(["metrics", "--run"])
        .arg(&run_dir)
        .args(["--split", "train"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(run_dir.join("metrics_train.json").exists());

    // Standalone corpus path: vocab = 2*(3+1)+1 = 9, max_len = 2.
    let out = bin()
        .args(["metrics", "--corpus"])
        .arg(run_dir.join("corpus_train.txt"))
        .args([
            "--k",
            "3",
            "--vocab-size",
            "9",
            "--max-len",
            "2",
            "--out",
        ])
        .arg(root.join("standalone"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(root.join("standalone/metrics_corpus.json").exists());
}
