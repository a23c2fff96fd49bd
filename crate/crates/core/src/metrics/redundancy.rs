//! Symbol redundancy: how often the symbol standing for an attribute value
//! is repeated when that value is part of the communicated concept.

use std::collections::BTreeMap;

use super::corpus::Corpus;
use super::entropy::entropy_bits;
use super::MetricsError;

/// Mutual-information comparisons within this margin count as ties, broken
/// toward the lower symbol index. Keeps the selection stable under
/// summation-order noise.
const MI_TIE_EPS: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct RedundancyReport {
    /// Mean over attribute-value pairs of the mean occurrence count of the
    /// pair's preferred symbol in messages where the pair is communicated.
    pub overall: f64,
    /// Same average restricted to records at each abstraction level.
    pub per_level: BTreeMap<usize, f64>,
    /// Preferred symbol per (attribute index, value).
    pub preferred_symbols: BTreeMap<(usize, u8), u16>,
    /// Pairs that never occur as a relevant attribute value in the corpus.
    pub skipped_pairs: Vec<(usize, u8)>,
}

fn binary_mi(n11: usize, n10: usize, n01: usize, n00: usize) -> f64 {
    let total = n11 + n10 + n01 + n00;
    let h_a = entropy_bits([n11 + n10, n01 + n00]);
    let h_b = entropy_bits([n11 + n01, n10 + n00]);
    let h_ab = entropy_bits([n11, n10, n01, n00]);
    debug_assert!(total > 0);
    h_a + h_b - h_ab
}

/// Computes the redundancy report; pairs never communicated are skipped and
/// listed. Errors only when no pair is ever communicated.
pub fn symbol_redundancy(corpus: &Corpus) -> Result<RedundancyReport, MetricsError> {
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let n = corpus.meta.n;
    let k = corpus.meta.k;
    let vocab = corpus.meta.vocab_size;
    let records = &corpus.records;

    // Per record: does symbol s occur at least once?
    let occurs: Vec<Vec<bool>> = records
        .iter()
        .map(|r| {
            let mut row = vec![false; vocab];
            for &s in &r.message {
                row[s as usize] = true;
            }
            row
        })
        .collect();

    let mut preferred_symbols = BTreeMap::new();
    let mut skipped_pairs = Vec::new();
    let mut pair_means: Vec<f64> = Vec::new();
    let mut level_sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();

    for attr in 0..n {
        for value in 1..=k {
            let active: Vec<bool> = records
                .iter()
                .map(|r| r.key.0[attr] == Some(value))
                .collect();
            let active_count = active.iter().filter(|&&a| a).count();
            if active_count == 0 {
                skipped_pairs.push((attr, value));
                continue;
            }

            // Preferred symbol: highest MI between "pair communicated" and
            // "symbol occurs"; content symbols only.
            let mut best_sym = 1u16;
            let mut best_mi = f64::NEG_INFINITY;
            for sym in 1..vocab {
                let mut n11 = 0;
                let mut n10 = 0;
                let mut n01 = 0;
                let mut n00 = 0;
                for (&a, row) in active.iter().zip(&occurs) {
                    match (a, row[sym]) {
                        (true, true) => n11 += 1,
                        (true, false) => n10 += 1,
                        (false, true) => n01 += 1,
                        (false, false) => n00 += 1,
                    }
                }
                let mi = binary_mi(n11, n10, n01, n00);
                if mi > best_mi + MI_TIE_EPS {
                    best_mi = mi;
                    best_sym = sym as u16;
                }
            }
            preferred_symbols.insert((attr, value), best_sym);

            // Mean occurrences of the preferred symbol where the pair is
            // communicated, overall and per level.
            let mut total_count = 0usize;
            let mut by_level: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
            for (i, record) in records.iter().enumerate() {
                if !active[i] {
                    continue;
                }
                let count = record
                    .message
                    .iter()
                    .filter(|&&s| s == best_sym)
                    .count();
                total_count += count;
                let entry = by_level.entry(record.level()).or_insert((0, 0));
                entry.0 += count;
                entry.1 += 1;
            }
            pair_means.push(total_count as f64 / active_count as f64);
            for (level, (count, records_at)) in by_level {
                let entry = level_sums.entry(level).or_insert((0.0, 0));
                entry.0 += count as f64 / records_at as f64;
                entry.1 += 1;
            }
        }
    }

    if pair_means.is_empty() {
        return Err(MetricsError::Degenerate(
            "no attribute value is ever communicated in the corpus".into(),
        ));
    }

    let overall = pair_means.iter().sum::<f64>() / pair_means.len() as f64;
    let per_level = level_sums
        .into_iter()
        .map(|(level, (sum, pairs))| (level, sum / pairs as f64))
        .collect();

    Ok(RedundancyReport {
        overall,
        per_level,
        preferred_symbols,
        skipped_pairs,
    })
}
