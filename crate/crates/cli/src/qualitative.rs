//! Qualitative inspection of trained languages: concrete instances of one
//! abstract concept, or one object across its abstraction levels.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;

use hierref_core::agents::{load_checkpoint, sender_forward_eval, TrainedPair};
use hierref_core::concept::{concept_key, Concept, ConceptKey, ObjectVector, RelevanceVector};
use hierref_core::dataset::{load_dataset, GameSample, SplitId};
use hierref_core::RunRng;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DumpMode {
    /// Instances of one abstract concept, grouped by message.
    ConceptInstances,
    /// One object across every abstraction recorded for it.
    ObjectAbstractions,
}

impl std::str::FromStr for DumpMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "concept" => Ok(DumpMode::ConceptInstances),
            "object" => Ok(DumpMode::ObjectAbstractions),
            other => Err(format!("unknown dump mode {other:?} (use concept|object)")),
        }
    }
}

pub struct DumpRequest {
    pub split: SplitId,
    pub mode: DumpMode,
    pub concept: Option<ConceptKey>,
    pub object: Option<ObjectVector>,
    pub count: usize,
    pub seed: u64,
}

fn message_text(message: &[u16]) -> String {
    if message.is_empty() {
        "(empty)".to_string()
    } else {
        message
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn sample_key(sample: &GameSample) -> ConceptKey {
    concept_key(&Concept::new(
        sample.sender_object.clone(),
        sample.relevance.clone(),
    ))
}

fn concept_instances(
    pair: &TrainedPair<f32>,
    split: &[GameSample],
    request: &DumpRequest,
) -> Result<String> {
    let mut rng = RunRng::seed_from_u64(request.seed);
    let key = match &request.concept {
        Some(key) => key.clone(),
        None => {
            // Random key at the most abstract level present.
            let min_level = split
                .iter()
                .map(|s| sample_key(s).level())
                .min()
                .context("empty split")?;
            let mut keys: Vec<ConceptKey> = split
                .iter()
                .map(sample_key)
                .filter(|k| k.level() == min_level)
                .collect();
            keys.sort();
            keys.dedup();
            keys.shuffle(&mut rng);
            keys.into_iter().next().context("no abstract keys")?
        }
    };

    let mut matching: Vec<&GameSample> = split.iter().filter(|s| sample_key(s) == key).collect();
    if matching.is_empty() {
        let mut available: Vec<String> = split.iter().map(|s| sample_key(s).to_string()).collect();
        available.sort();
        available.dedup();
        let preview: Vec<String> = available.iter().take(20).cloned().collect();
        bail!(
            "concept {key} not present in the split; available keys include: {}{}",
            preview.join(" "),
            if available.len() > 20 { " ..." } else { "" }
        );
    }
    matching.shuffle(&mut rng);
    matching.truncate(request.count);

    // Group identical messages together.
    let mut groups: BTreeMap<Vec<u16>, Vec<String>> = BTreeMap::new();
    for sample in &matching {
        let message = sender_forward_eval(
            &pair.sender,
            &sample.sender_object,
            &sample.relevance,
        );
        groups
            .entry(message)
            .or_default()
            .push(sample.sender_object.to_string());
    }

    let mut out = format!(
        "concept {key}: {} instances, {} distinct messages\n",
        matching.len(),
        groups.len()
    );
    let mut ordered: Vec<_> = groups.into_iter().collect();
    ordered.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
    for (message, mut objects) in ordered {
        objects.sort();
        writeln!(
            out,
            "  message {} ({} instances)",
            message_text(&message),
            objects.len()
        )?;
        for object in objects {
            writeln!(out, "    object ({object})")?;
        }
    }
    Ok(out)
}

fn object_abstractions(
    pair: &TrainedPair<f32>,
    split: &[GameSample],
    request: &DumpRequest,
) -> Result<String> {
    let mut rng = RunRng::seed_from_u64(request.seed);
    let object = match &request.object {
        Some(o) => o.clone(),
        None => {
            let mut objects: Vec<ObjectVector> =
                split.iter().map(|s| s.sender_object.clone()).collect();
            objects.sort();
            objects.dedup();
            objects.shuffle(&mut rng);
            objects.into_iter().next().context("empty split")?
        }
    };

    let mut relevances: Vec<RelevanceVector> = split
        .iter()
        .filter(|s| s.sender_object == object)
        .map(|s| s.relevance.clone())
        .collect();
    if relevances.is_empty() {
        bail!("object ({object}) not present in the split");
    }
    relevances.sort();
    relevances.dedup();
    relevances.sort_by_key(|r| {
        (
            hierref_core::concept::abstraction_level(r),
            r.0.iter().map(|&b| !b).collect::<Vec<bool>>(),
        )
    });

    let mut out = format!(
        "object ({object}): {} abstractions in split\n",
        relevances.len()
    );
    for relevance in relevances {
        let key = concept_key(&Concept::new(object.clone(), relevance.clone()));
        let message = sender_forward_eval(&pair.sender, &object, &relevance);
        writeln!(
            out,
            "  level {}  concept ({})  message {}",
            hierref_core::concept::abstraction_level(&relevance),
            key,
            message_text(&message)
        )?;
    }
    Ok(out)
}

/// Renders the requested dump from a completed seed directory.
pub fn qualitative_dump(run_dir: &Path, request: &DumpRequest) -> Result<String> {
    let (pair, _) = load_checkpoint(&run_dir.join("checkpoint.bin"))
        .with_context(|| format!("loading checkpoint from {}", run_dir.display()))?;
    let dataset_path = if run_dir.join("dataset.txt").exists() {
        run_dir.join("dataset.txt")
    } else {
        run_dir
            .parent()
            .map(|p| p.join("dataset.txt"))
            .filter(|p| p.exists())
            .context("no dataset.txt next to or above the run directory")?
    };
    let dataset = load_dataset(&dataset_path)?;
    let split = dataset.split(request.split);
    if split.is_empty() {
        bail!("split {} is empty for this dataset", request.split);
    }
    match request.mode {
        DumpMode::ConceptInstances => concept_instances(&pair, split, request),
        DumpMode::ObjectAbstractions => object_abstractions(&pair, split, request),
    }
}
