//! Game dataset generation: samples, targets, distractors, and splits.
//!
//! A dataset over `D(n,k)` contains, for every object and every abstraction
//! level, a fixed number of game samples. Each sample pins the target and
//! the distractor objects at generation time, so a dataset is a pure
//! function of its config (including the seed) and serializes to a stable
//! line-oriented text file.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::concept::{
    abstraction_level, instantiates, Concept, ConceptError, ObjectVector, RelevanceVector,
};
use crate::RunRng;

/// Hard cap on enumerated object spaces.
const MAX_OBJECTS: u64 = 1 << 24;

/// Redraw budget for balanced distractor sampling.
const BALANCED_RETRY_CAP: usize = 100;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Concept(#[from] ConceptError),
    #[error("object space k^n = {count} exceeds the supported maximum {MAX_OBJECTS}")]
    TooLarge { count: u64 },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(
        "balanced distractor sampling exhausted {cap} redraws for object {object} \
         with relevance {relevance} (n={n}, k={k})"
    )]
    RetryExhausted {
        cap: usize,
        object: String,
        relevance: String,
        n: usize,
        k: u8,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported dataset file version: {found:?}")]
    VersionMismatch { found: String },
}

/// How distractors relate to the target concept.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DistractorMode {
    /// Each distractor instantiates a concept exactly one level more
    /// abstract than the target concept.
    Unbalanced,
    /// Distractor concepts are drawn from all abstraction levels.
    Balanced,
}

impl fmt::Display for DistractorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistractorMode::Unbalanced => write!(f, "unbalanced"),
            DistractorMode::Balanced => write!(f, "balanced"),
        }
    }
}

impl FromStr for DistractorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unbalanced" => Ok(DistractorMode::Unbalanced),
            "balanced" => Ok(DistractorMode::Balanced),
            other => Err(format!("unknown distractor mode {other:?}")),
        }
    }
}

/// Dataset generation parameters.
#[derive(Clone, Debug)]
pub struct GenConfig {
    pub n: usize,
    pub k: u8,
    pub samples_per_object_per_level: usize,
    pub distractors_per_sample: usize,
    pub distractor_mode: DistractorMode,
    /// Fraction of object vectors reserved for the novel-objects split.
    pub zero_shot_object_fraction: f64,
    /// Fraction of the non-reserved samples that goes to training.
    pub train_fraction_of_rest: f64,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(n: usize, k: u8, seed: u64) -> Self {
        GenConfig {
            n,
            k,
            samples_per_object_per_level: 10,
            distractors_per_sample: 10,
            distractor_mode: DistractorMode::Unbalanced,
            zero_shot_object_fraction: 0.20,
            train_fraction_of_rest: 0.75,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.n < 1 {
            return Err(DatasetError::InvalidConfig("n must be >= 1".into()));
        }
        if self.k < 2 {
            return Err(DatasetError::InvalidConfig("k must be >= 2".into()));
        }
        if self.samples_per_object_per_level < 1 || self.distractors_per_sample < 1 {
            return Err(DatasetError::InvalidConfig("counts must be >= 1".into()));
        }
        for (name, frac) in [
            ("zero_shot_object_fraction", self.zero_shot_object_fraction),
            ("train_fraction_of_rest", self.train_fraction_of_rest),
        ] {
            if !(frac > 0.0 && frac < 1.0) {
                return Err(DatasetError::InvalidConfig(format!(
                    "{name} must lie in (0,1), got {frac}"
                )));
            }
        }
        Ok(())
    }
}

/// One round of the game: the sender's input concept plus the receiver's
/// candidate objects.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GameSample {
    pub sender_object: ObjectVector,
    pub relevance: RelevanceVector,
    pub target: ObjectVector,
    pub distractors: Vec<ObjectVector>,
}

impl GameSample {
    pub fn concept(&self) -> Concept {
        Concept::new(self.sender_object.clone(), self.relevance.clone())
    }

    pub fn level(&self) -> usize {
        abstraction_level(&self.relevance)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SplitId {
    Train,
    Validation,
    ZeroShotObjects,
    ZeroShotAbstractions,
}

impl SplitId {
    pub const ALL: [SplitId; 4] = [
        SplitId::Train,
        SplitId::Validation,
        SplitId::ZeroShotObjects,
        SplitId::ZeroShotAbstractions,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SplitId::Train => "train",
            SplitId::Validation => "validation",
            SplitId::ZeroShotObjects => "zeroshot_objects",
            SplitId::ZeroShotAbstractions => "zeroshot_abstractions",
        }
    }
}

impl fmt::Display for SplitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

impl FromStr for SplitId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitId::Train),
            "validation" => Ok(SplitId::Validation),
            "zeroshot_objects" => Ok(SplitId::ZeroShotObjects),
            "zeroshot_abstractions" => Ok(SplitId::ZeroShotAbstractions),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// A generated dataset partitioned into its splits.
///
/// Depending on the generation mode either `zeroshot_objects` or
/// `zeroshot_abstractions` is populated; the other stays empty.
#[derive(Clone, PartialEq, Debug)]
pub struct DatasetSplits {
    pub n: usize,
    pub k: u8,
    pub seed: u64,
    pub distractor_mode: DistractorMode,
    pub train: Vec<GameSample>,
    pub validation: Vec<GameSample>,
    pub zeroshot_objects: Vec<GameSample>,
    pub zeroshot_abstractions: Vec<GameSample>,
    /// Per-attribute value withheld from abstraction during training, set
    /// only by [`build_zeroshot_abstraction_split`].
    pub heldout_values: Option<Vec<u8>>,
}

impl DatasetSplits {
    pub fn split(&self, id: SplitId) -> &[GameSample] {
        match id {
            SplitId::Train => &self.train,
            SplitId::Validation => &self.validation,
            SplitId::ZeroShotObjects => &self.zeroshot_objects,
            SplitId::ZeroShotAbstractions => &self.zeroshot_abstractions,
        }
    }

    pub fn total_samples(&self) -> usize {
        SplitId::ALL.iter().map(|&id| self.split(id).len()).sum()
    }
}

/// All `k^n` objects in lexicographic order (last attribute fastest).
pub fn enumerate_objects(n: usize, k: u8) -> Result<Vec<ObjectVector>, DatasetError> {
    let count = (k as u64)
        .checked_pow(n as u32)
        .ok_or(DatasetError::TooLarge { count: u64::MAX })?;
    if count > MAX_OBJECTS {
        return Err(DatasetError::TooLarge { count });
    }
    let mut objects = Vec::with_capacity(count as usize);
    let mut current = vec![1u8; n];
    loop {
        objects.push(ObjectVector(current.clone()));
        let mut pos = n;
        while pos > 0 {
            if current[pos - 1] < k {
                current[pos - 1] += 1;
                current[pos..].iter_mut().for_each(|v| *v = 1);
                break;
            }
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
    }
    Ok(objects)
}

/// Relevance vector with exactly `level` relevant positions, uniform over
/// the possible patterns.
pub fn sample_relevance_at_level<R: Rng>(n: usize, level: usize, rng: &mut R) -> RelevanceVector {
    debug_assert!(level >= 1 && level <= n);
    let mut indices: Vec<usize> = (0..n).collect();
    // Partial Fisher-Yates: the first `level` entries are a uniform subset.
    for i in 0..level {
        let j = rng.random_range(i..n);
        indices.swap(i, j);
    }
    let mut flags = vec![false; n];
    for &i in &indices[..level] {
        flags[i] = true;
    }
    RelevanceVector(flags)
}

/// Draws a level uniformly from `1..=n`, then a uniform relevance pattern at
/// that level. Levels therefore occur equally often rather than following
/// the binomial profile of flag-wise uniform sampling.
pub fn sample_relevance_uniform_by_level<R: Rng>(n: usize, rng: &mut R) -> RelevanceVector {
    let level = rng.random_range(1..=n);
    sample_relevance_at_level(n, level, rng)
}

/// Target object: copies `o` at relevant positions, resamples the rest.
pub fn sample_target<R: Rng>(
    o: &ObjectVector,
    r: &RelevanceVector,
    k: u8,
    rng: &mut R,
) -> ObjectVector {
    ObjectVector(
        o.0.iter()
            .zip(&r.0)
            .map(|(&v, &rel)| if rel { v } else { rng.random_range(1..=k) })
            .collect(),
    )
}

/// Distractors one level more abstract than the concept: one relevant
/// position is flipped to irrelevant, and the object's value there is
/// forced to differ so the distractor never instantiates the concept.
pub fn sample_distractors_unbalanced<R: Rng>(
    o: &ObjectVector,
    r: &RelevanceVector,
    k: u8,
    count: usize,
    rng: &mut R,
) -> Result<Vec<ObjectVector>, DatasetError> {
    if k < 2 {
        return Err(DatasetError::InvalidConfig(
            "unbalanced distractors require k >= 2".into(),
        ));
    }
    let relevant: Vec<usize> = (0..r.len()).filter(|&i| r.0[i]).collect();
    if relevant.is_empty() {
        return Err(DatasetError::Concept(ConceptError::AllIrrelevant));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let p = relevant[rng.random_range(0..relevant.len())];
        let values: Vec<u8> = o
            .0
            .iter()
            .zip(&r.0)
            .enumerate()
            .map(|(i, (&v, &rel))| {
                if i == p {
                    // Any value except the target's: sample from k-1 options.
                    let draw = rng.random_range(1..k);
                    if draw >= v {
                        draw + 1
                    } else {
                        draw
                    }
                } else if rel {
                    v
                } else {
                    rng.random_range(1..=k)
                }
            })
            .collect();
        out.push(ObjectVector(values));
    }
    Ok(out)
}

/// One balanced-mode distractor together with the abstraction level of the
/// relevance vector it was instantiated from. Exposed so the sampling
/// distribution can be tested directly.
pub fn sample_distractor_balanced_with_level<R: Rng>(
    o: &ObjectVector,
    r: &RelevanceVector,
    k: u8,
    rng: &mut R,
) -> Result<(ObjectVector, usize), DatasetError> {
    let concept = Concept::new(o.clone(), r.clone());
    for _ in 0..BALANCED_RETRY_CAP {
        let r_alt = sample_relevance_uniform_by_level(o.len(), rng);
        if r_alt == *r {
            continue;
        }
        let candidate = sample_target(o, &r_alt, k, rng);
        if !instantiates(&candidate, &concept)? {
            return Ok((candidate, abstraction_level(&r_alt)));
        }
    }
    Err(DatasetError::RetryExhausted {
        cap: BALANCED_RETRY_CAP,
        object: o.to_string(),
        relevance: r.to_string(),
        n: o.len(),
        k,
    })
}

/// Distractors drawn from all abstraction levels: each is an instance of a
/// concept over `o` with a different relevance vector, redrawn while it
/// happens to instantiate the target concept.
pub fn sample_distractors_balanced<R: Rng>(
    o: &ObjectVector,
    r: &RelevanceVector,
    k: u8,
    count: usize,
    rng: &mut R,
) -> Result<Vec<ObjectVector>, DatasetError> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let (d, _) = sample_distractor_balanced_with_level(o, r, k, rng)?;
        out.push(d);
    }
    Ok(out)
}

fn sample_pool(cfg: &GenConfig, rng: &mut RunRng) -> Result<Vec<GameSample>, DatasetError> {
    let objects = enumerate_objects(cfg.n, cfg.k)?;
    let mut pool =
        Vec::with_capacity(objects.len() * cfg.n * cfg.samples_per_object_per_level);
    for object in &objects {
        for level in 1..=cfg.n {
            for _ in 0..cfg.samples_per_object_per_level {
                let relevance = sample_relevance_at_level(cfg.n, level, rng);
                let target = sample_target(object, &relevance, cfg.k, rng);
                let distractors = match cfg.distractor_mode {
                    DistractorMode::Unbalanced => sample_distractors_unbalanced(
                        object,
                        &relevance,
                        cfg.k,
                        cfg.distractors_per_sample,
                        rng,
                    )?,
                    DistractorMode::Balanced => sample_distractors_balanced(
                        object,
                        &relevance,
                        cfg.k,
                        cfg.distractors_per_sample,
                        rng,
                    )?,
                };
                pool.push(GameSample {
                    sender_object: object.clone(),
                    relevance,
                    target,
                    distractors,
                });
            }
        }
    }
    Ok(pool)
}

fn split_rest(
    mut rest: Vec<GameSample>,
    train_fraction: f64,
    rng: &mut RunRng,
) -> (Vec<GameSample>, Vec<GameSample>) {
    rest.shuffle(rng);
    let train_count = (rest.len() as f64 * train_fraction).round() as usize;
    let validation = rest.split_off(train_count.min(rest.len()));
    (rest, validation)
}

/// Generates the dataset with a novel-objects hold-out: a fraction of the
/// object vectors is reserved entirely, and the remaining samples are
/// shuffled into train/validation.
pub fn generate_dataset(cfg: &GenConfig) -> Result<DatasetSplits, DatasetError> {
    cfg.validate()?;
    let mut rng = RunRng::seed_from_u64(cfg.seed);
    let pool = sample_pool(cfg, &mut rng)?;

    let objects = enumerate_objects(cfg.n, cfg.k)?;
    let mut indices: Vec<usize> = (0..objects.len()).collect();
    indices.shuffle(&mut rng);
    let reserve = (objects.len() as f64 * cfg.zero_shot_object_fraction).round() as usize;
    let heldout: HashSet<ObjectVector> = indices[..reserve]
        .iter()
        .map(|&i| objects[i].clone())
        .collect();

    let (zeroshot, rest): (Vec<_>, Vec<_>) = pool
        .into_iter()
        .partition(|s| heldout.contains(&s.sender_object));
    let (train, validation) = split_rest(rest, cfg.train_fraction_of_rest, &mut rng);

    Ok(DatasetSplits {
        n: cfg.n,
        k: cfg.k,
        seed: cfg.seed,
        distractor_mode: cfg.distractor_mode,
        train,
        validation,
        zeroshot_objects: zeroshot,
        zeroshot_abstractions: Vec::new(),
        heldout_values: None,
    })
}

/// Generates the dataset with a novel-abstractions hold-out: one value per
/// attribute is chosen (seed-derived), and every sample that abstracts over
/// that value (the attribute is irrelevant while the object carries the
/// value) is withheld from train/validation.
pub fn build_zeroshot_abstraction_split(cfg: &GenConfig) -> Result<DatasetSplits, DatasetError> {
    cfg.validate()?;
    let mut rng = RunRng::seed_from_u64(cfg.seed);
    let heldout_values: Vec<u8> = (0..cfg.n).map(|_| rng.random_range(1..=cfg.k)).collect();
    let pool = sample_pool(cfg, &mut rng)?;

    let is_heldout = |s: &GameSample| {
        s.sender_object
            .0
            .iter()
            .zip(&s.relevance.0)
            .zip(&heldout_values)
            .any(|((&v, &rel), &h)| !rel && v == h)
    };
    let (zeroshot, rest): (Vec<_>, Vec<_>) = pool.into_iter().partition(is_heldout);
    let (train, validation) = split_rest(rest, cfg.train_fraction_of_rest, &mut rng);

    Ok(DatasetSplits {
        n: cfg.n,
        k: cfg.k,
        seed: cfg.seed,
        distractor_mode: cfg.distractor_mode,
        train,
        validation,
        zeroshot_objects: Vec::new(),
        zeroshot_abstractions: zeroshot,
        heldout_values: Some(heldout_values),
    })
}

fn write_objects(objects: &[ObjectVector]) -> String {
    objects
        .iter()
        .map(|o| o.to_string())
        .collect::<Vec<_>>()
        .join("|")
}

/// Writes the splits as a line-oriented text file; see the repository README
/// for the format.
pub fn save_dataset(splits: &DatasetSplits, path: &Path) -> Result<(), DatasetError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write!(
        w,
        "hierref-dataset v1 n={} k={} seed={} mode={}",
        splits.n, splits.k, splits.seed, splits.distractor_mode
    )?;
    if let Some(values) = &splits.heldout_values {
        let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        write!(w, " heldout={}", parts.join(","))?;
    }
    writeln!(w)?;
    for id in SplitId::ALL {
        for sample in splits.split(id) {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                id,
                sample.sender_object,
                sample.relevance,
                sample.target,
                write_objects(&sample.distractors)
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> DatasetError {
    DatasetError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Reads a dataset file written by [`save_dataset`].
pub fn load_dataset(path: &Path) -> Result<DatasetSplits, DatasetError> {
    let file = File::open(path)?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file"))
        .and_then(|(i, r)| r.map(|l| (i, l)).map_err(DatasetError::Io))?;
    let mut tokens = header.split_whitespace();
    let magic = tokens.next().unwrap_or("");
    let version = tokens.next().unwrap_or("");
    if magic != "hierref-dataset" {
        return Err(parse_err(1, format!("not a dataset file: {magic:?}")));
    }
    if version != "v1" {
        return Err(DatasetError::VersionMismatch {
            found: version.to_string(),
        });
    }
    let mut n = None;
    let mut k = None;
    let mut seed = None;
    let mut mode = None;
    let mut heldout_values = None;
    for token in tokens {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| parse_err(1, format!("bad header token {token:?}")))?;
        match key {
            "n" => n = Some(value.parse().map_err(|_| parse_err(1, "bad n"))?),
            "k" => k = Some(value.parse().map_err(|_| parse_err(1, "bad k"))?),
            "seed" => seed = Some(value.parse().map_err(|_| parse_err(1, "bad seed"))?),
            "mode" => {
                mode = Some(
                    value
                        .parse::<DistractorMode>()
                        .map_err(|e| parse_err(1, e))?,
                )
            }
            "heldout" => {
                let values = value
                    .split(',')
                    .map(|v| v.parse::<u8>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| parse_err(1, "bad heldout values"))?;
                heldout_values = Some(values);
            }
            other => return Err(parse_err(1, format!("unknown header key {other:?}"))),
        }
    }
    let n: usize = n.ok_or_else(|| parse_err(1, "missing n"))?;
    let k: u8 = k.ok_or_else(|| parse_err(1, "missing k"))?;
    let seed: u64 = seed.ok_or_else(|| parse_err(1, "missing seed"))?;
    let mode = mode.ok_or_else(|| parse_err(1, "missing mode"))?;

    let mut splits = DatasetSplits {
        n,
        k,
        seed,
        distractor_mode: mode,
        train: Vec::new(),
        validation: Vec::new(),
        zeroshot_objects: Vec::new(),
        zeroshot_abstractions: Vec::new(),
        heldout_values,
    };

    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(parse_err(
                line_no,
                format!("expected 5 tab-separated fields, got {}", fields.len()),
            ));
        }
        let split: SplitId = fields[0].parse().map_err(|e| parse_err(line_no, e))?;
        let sender_object: ObjectVector = fields[1]
            .parse()
            .map_err(|e: ConceptError| parse_err(line_no, e.to_string()))?;
        let relevance: RelevanceVector = fields[2]
            .parse()
            .map_err(|e: ConceptError| parse_err(line_no, e.to_string()))?;
        let target: ObjectVector = fields[3]
            .parse()
            .map_err(|e: ConceptError| parse_err(line_no, e.to_string()))?;
        let distractors = fields[4]
            .split('|')
            .map(|s| s.parse::<ObjectVector>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| parse_err(line_no, e.to_string()))?;

        sender_object
            .validate(n, k)
            .map_err(|e| parse_err(line_no, e.to_string()))?;
        relevance
            .validate(n)
            .map_err(|e| parse_err(line_no, e.to_string()))?;
        target
            .validate(n, k)
            .map_err(|e| parse_err(line_no, e.to_string()))?;

        let sample = GameSample {
            sender_object,
            relevance,
            target,
            distractors,
        };
        match split {
            SplitId::Train => splits.train.push(sample),
            SplitId::Validation => splits.validation.push(sample),
            SplitId::ZeroShotObjects => splits.zeroshot_objects.push(sample),
            SplitId::ZeroShotAbstractions => splits.zeroshot_abstractions.push(sample),
        }
    }
    Ok(splits)
}
