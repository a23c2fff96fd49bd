//! Distance- and disentanglement-based compositionality metrics.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};

use super::corpus::Corpus;
use super::entropy::entropy_bits;
use super::MetricsError;
use crate::concept::MetricEncoding;
use crate::RunRng;

/// Pair budget before topographic similarity switches to seeded subsampling.
pub const DEFAULT_MAX_PAIRS: usize = 500_000;

/// Fixed stream for pair subsampling so repeated runs agree bit for bit.
const TOPSIM_SUBSAMPLE_SEED: u64 = 0x70_70_51;

/// Unit-cost Levenshtein distance between two symbol sequences.
pub fn levenshtein(a: &[u16], b: &[u16]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let cost = if ca == cb { diag } else { diag + 1 };
            diag = row[j + 1];
            row[j + 1] = cost.min(row[j] + 1).min(row[j + 1] + 1);
        }
    }
    row[b.len()]
}

/// Cosine distance between binary vectors.
pub fn cosine_distance(a: &[u8], b: &[u8]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut dot = 0usize;
    let mut na = 0usize;
    let mut nb = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        dot += (x & y) as usize;
        na += (x != 0) as usize;
        nb += (y != 0) as usize;
    }
    if na == 0 || nb == 0 {
        return 1.0;
    }
    1.0 - dot as f64 / ((na as f64).sqrt() * (nb as f64).sqrt())
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; ties share the mean rank of their run.
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// side has zero rank variance.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    if x.len() < 2 {
        return None;
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = x.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&a, &b) in rx.iter().zip(&ry) {
        cov += (a - mean) * (b - mean);
        var_x += (a - mean) * (a - mean);
        var_y += (b - mean) * (b - mean);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return None;
    }
    Some(cov / (var_x.sqrt() * var_y.sqrt()))
}

/// Spearman correlation between pairwise concept-encoding distances
/// (cosine) and pairwise message distances (edit). Above `max_pairs` the
/// pair set is subsampled under a fixed seed.
pub fn topographic_similarity(corpus: &Corpus, max_pairs: usize) -> Result<f64, MetricsError> {
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let n_rec = corpus.len();
    if n_rec < 2 {
        return Err(MetricsError::Degenerate(
            "topographic similarity needs at least two records".into(),
        ));
    }
    let encodings: Vec<MetricEncoding> = corpus
        .records
        .iter()
        .map(|r| MetricEncoding::from_key(&r.key, corpus.meta.k))
        .collect::<Result<_, _>>()?;

    let total_pairs = n_rec * (n_rec - 1) / 2;
    let mut d_input = Vec::new();
    let mut d_message = Vec::new();
    if total_pairs <= max_pairs {
        for i in 0..n_rec {
            for j in (i + 1)..n_rec {
                d_input.push(cosine_distance(encodings[i].bits(), encodings[j].bits()));
                d_message.push(
                    levenshtein(&corpus.records[i].message, &corpus.records[j].message) as f64,
                );
            }
        }
    } else {
        let mut rng = RunRng::seed_from_u64(TOPSIM_SUBSAMPLE_SEED);
        for _ in 0..max_pairs {
            let i = rng.random_range(0..n_rec);
            let mut j = rng.random_range(0..n_rec);
            while j == i {
                j = rng.random_range(0..n_rec);
            }
            d_input.push(cosine_distance(encodings[i].bits(), encodings[j].bits()));
            d_message
                .push(levenshtein(&corpus.records[i].message, &corpus.records[j].message) as f64);
        }
    }

    if d_input.len() == 1 {
        // A single pair carries no rank variation; the correlation is 1 by
        // convention.
        return Ok(1.0);
    }
    spearman(&d_input, &d_message).ok_or_else(|| {
        MetricsError::Degenerate(
            "all pairwise distances identical on one side; correlation undefined".into(),
        )
    })
}

/// Joint counts of two categorical variables.
struct PairCounts {
    joint: BTreeMap<(usize, usize), usize>,
    left: BTreeMap<usize, usize>,
    right: BTreeMap<usize, usize>,
}

impl PairCounts {
    fn collect<I: IntoIterator<Item = (usize, usize)>>(items: I) -> Self {
        let mut joint = BTreeMap::new();
        let mut left = BTreeMap::new();
        let mut right = BTreeMap::new();
        for (a, b) in items {
            *joint.entry((a, b)).or_insert(0) += 1;
            *left.entry(a).or_insert(0) += 1;
            *right.entry(b).or_insert(0) += 1;
        }
        PairCounts { joint, left, right }
    }

    fn mutual_information_bits(&self) -> f64 {
        entropy_bits(self.left.values().copied()) + entropy_bits(self.right.values().copied())
            - entropy_bits(self.joint.values().copied())
    }

    fn h_left_bits(&self) -> f64 {
        entropy_bits(self.left.values().copied())
    }
}

/// Attribute category per record: the value at a relevant position, or a
/// distinguished abstraction category when the attribute is irrelevant.
fn attribute_category(corpus: &Corpus, record: usize, attr: usize) -> usize {
    match corpus.records[record].key.0[attr] {
        Some(v) => v as usize,
        None => 0,
    }
}

fn top_two_gap(mis: &mut [f64]) -> f64 {
    mis.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let first = mis.first().copied().unwrap_or(0.0);
    let second = mis.get(1).copied().unwrap_or(0.0);
    first - second
}

/// Positional disentanglement: per message position, the gap between the
/// two largest symbol/attribute mutual informations, normalized by the
/// position's symbol entropy. Positions past a message's end count as the
/// end-of-sequence symbol.
pub fn posdis(corpus: &Corpus) -> Result<f64, MetricsError> {
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let max_len = corpus.meta.max_len;
    let n = corpus.meta.n;
    let mut sum = 0.0;
    for pos in 0..max_len {
        let symbol_at = |rec: &super::corpus::CorpusRecord| {
            rec.message.get(pos).copied().unwrap_or(crate::agents::EOS) as usize
        };
        let h_symbol = {
            let counts = PairCounts::collect(
                corpus.records.iter().map(|r| (symbol_at(r), 0usize)),
            );
            counts.h_left_bits()
        };
        if h_symbol <= 0.0 {
            continue;
        }
        let mut mis: Vec<f64> = (0..n)
            .map(|attr| {
                PairCounts::collect(
                    corpus
                        .records
                        .iter()
                        .enumerate()
                        .map(|(i, r)| (symbol_at(r), attribute_category(corpus, i, attr))),
                )
                .mutual_information_bits()
            })
            .collect();
        sum += top_two_gap(&mut mis) / h_symbol;
    }
    Ok(sum / max_len as f64)
}

/// Bag-of-symbols disentanglement: per content symbol, the gap between the
/// two largest count/attribute mutual informations, normalized by the
/// count entropy. Order within messages is irrelevant by construction.
pub fn bosdis(corpus: &Corpus) -> Result<f64, MetricsError> {
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let n = corpus.meta.n;
    let content_vocab = corpus.meta.vocab_size - 1;
    if content_vocab == 0 {
        return Err(MetricsError::Degenerate("no content symbols".into()));
    }
    let mut sum = 0.0;
    for sym in 1..corpus.meta.vocab_size {
        let count_of = |r: &super::corpus::CorpusRecord| {
            r.message.iter().filter(|&&s| s as usize == sym).count()
        };
        let h_count = {
            let counts =
                PairCounts::collect(corpus.records.iter().map(|r| (count_of(r), 0usize)));
            counts.h_left_bits()
        };
        if h_count <= 0.0 {
            continue;
        }
        let mut mis: Vec<f64> = (0..n)
            .map(|attr| {
                PairCounts::collect(
                    corpus
                        .records
                        .iter()
                        .enumerate()
                        .map(|(i, r)| (count_of(r), attribute_category(corpus, i, attr))),
                )
                .mutual_information_bits()
            })
            .collect();
        sum += top_two_gap(&mut mis) / h_count;
    }
    Ok(sum / content_vocab as f64)
}
