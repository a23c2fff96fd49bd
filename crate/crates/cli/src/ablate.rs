//! Cross-sampling ablation: evaluate pairs trained under one distractor
//! sampling strategy on the validation set of the other.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use hierref_core::agents::{evaluate, load_checkpoint, TrainedPair};
use hierref_core::dataset::{load_dataset, DatasetSplits};

struct LoadedRun {
    label: String,
    pair: TrainedPair<f32>,
    dataset: DatasetSplits,
}

fn load_run(run_dir: &Path) -> Result<LoadedRun> {
    let checkpoint = run_dir.join("checkpoint.bin");
    let (pair, _) = load_checkpoint(&checkpoint)
        .with_context(|| format!("loading checkpoint from {}", run_dir.display()))?;
    let dataset_path = dataset_path_for(run_dir)?;
    let dataset = load_dataset(&dataset_path)
        .with_context(|| format!("loading dataset {}", dataset_path.display()))?;
    let label = format!("{}", dataset.distractor_mode);
    Ok(LoadedRun {
        label,
        pair,
        dataset,
    })
}

/// A seed directory keeps its dataset one level up.
fn dataset_path_for(run_dir: &Path) -> Result<PathBuf> {
    let local = run_dir.join("dataset.txt");
    if local.exists() {
        return Ok(local);
    }
    let parent = run_dir
        .parent()
        .map(|p| p.join("dataset.txt"))
        .filter(|p| p.exists());
    parent.ok_or_else(|| {
        anyhow::anyhow!(
            "no dataset.txt in {} or its parent directory",
            run_dir.display()
        )
    })
}

/// Four-cell report: each trained pair evaluated on both validation sets.
pub fn cross_sampling_ablation(run_a: &Path, run_b: &Path) -> Result<(String, String)> {
    let a = load_run(run_a)?;
    let b = load_run(run_b)?;

    if a.dataset.n != b.dataset.n || a.dataset.k != b.dataset.k {
        bail!(
            "dataset mismatch: D({},{}) vs D({},{})",
            a.dataset.n,
            a.dataset.k,
            b.dataset.n,
            b.dataset.k
        );
    }
    if a.pair.config.vocab_factor != b.pair.config.vocab_factor {
        bail!(
            "vocab factor mismatch: {} vs {}",
            a.pair.config.vocab_factor,
            b.pair.config.vocab_factor
        );
    }
    if a.label == b.label {
        bail!("both runs use {} distractor sampling; nothing to cross", a.label);
    }

    let mut csv = String::from("trained_on,evaluated_on,accuracy\n");
    let mut text = String::from("cross-sampling ablation (validation accuracy)\n");
    for run in [&a, &b] {
        for eval_set in [&a, &b] {
            let acc = evaluate(&run.pair, &eval_set.dataset.validation)
                .with_context(|| format!("evaluating {} on {}", run.label, eval_set.label))?;
            csv.push_str(&format!("{},{},{:.6}\n", run.label, eval_set.label, acc));
            text.push_str(&format!(
                "  trained on {:<10} -> evaluated on {:<10} : {:.4}\n",
                run.label, eval_set.label, acc
            ));
        }
    }
    Ok((csv, text))
}
