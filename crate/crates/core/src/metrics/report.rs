//! Aggregated metric reports and their file formats.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::compositional::{bosdis, posdis, topographic_similarity};
use super::corpus::Corpus;
use super::entropy::entropy_scores_for;
use super::redundancy::symbol_redundancy;
use super::MetricsError;
use crate::agents::EOS;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MessageLengthStats {
    pub overall_mean: f64,
    pub mean_by_level: BTreeMap<usize, f64>,
}

/// Mean lengths of the end-of-sequence-truncated messages.
pub fn message_length_stats(corpus: &Corpus) -> Result<MessageLengthStats, MetricsError> {
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut by_level: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut total = 0usize;
    for record in &corpus.records {
        total += record.message.len();
        let entry = by_level.entry(record.level()).or_insert((0, 0));
        entry.0 += record.message.len();
        entry.1 += 1;
    }
    Ok(MessageLengthStats {
        overall_mean: total as f64 / corpus.len() as f64,
        mean_by_level: by_level
            .into_iter()
            .map(|(level, (sum, count))| (level, sum as f64 / count as f64))
            .collect(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymbolOccurrenceRow {
    pub symbol: u16,
    pub mean_by_level: BTreeMap<usize, f64>,
}

/// Per-symbol mean occurrences per message at each abstraction level,
/// ranked by occurrence at the most abstract level present. The
/// end-of-sequence symbol is excluded.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymbolOccurrenceTable {
    /// Level used for the ranking (the smallest level in the corpus).
    pub base_level: usize,
    pub rows: Vec<SymbolOccurrenceRow>,
}

pub fn symbol_occurrence_by_level(corpus: &Corpus) -> Result<SymbolOccurrenceTable, MetricsError> {
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let levels = corpus.levels();
    let base_level = levels[0];
    let vocab = corpus.meta.vocab_size;

    let mut level_counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut sums: BTreeMap<(u16, usize), usize> = BTreeMap::new();
    for record in &corpus.records {
        let level = record.level();
        *level_counts.entry(level).or_insert(0) += 1;
        for &sym in &record.message {
            *sums.entry((sym, level)).or_insert(0) += 1;
        }
    }

    let mut rows: Vec<SymbolOccurrenceRow> = (1..vocab)
        .map(|sym| {
            let sym = sym as u16;
            debug_assert_ne!(sym, EOS);
            let mean_by_level = levels
                .iter()
                .map(|&level| {
                    let count = sums.get(&(sym, level)).copied().unwrap_or(0);
                    (level, count as f64 / level_counts[&level] as f64)
                })
                .collect();
            SymbolOccurrenceRow {
                symbol: sym,
                mean_by_level,
            }
        })
        .collect();

    rows.sort_by(|a, b| {
        b.mean_by_level[&base_level]
            .partial_cmp(&a.mean_by_level[&base_level])
            .unwrap()
            .then(a.symbol.cmp(&b.symbol))
    });
    Ok(SymbolOccurrenceTable { base_level, rows })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerLevelMetrics {
    pub effectiveness: f64,
    pub consistency: f64,
    pub nmi: f64,
    pub mean_message_length: f64,
    /// Absent when no attribute-value pair has records at this level.
    pub symbol_redundancy: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    pub effectiveness: f64,
    pub consistency: f64,
    pub nmi: f64,
    pub topsim: f64,
    pub posdis: f64,
    pub bosdis: f64,
    pub symbol_redundancy: f64,
    pub mean_message_length: f64,
    pub per_level: BTreeMap<usize, PerLevelMetrics>,
    pub symbol_occurrence: SymbolOccurrenceTable,
}

/// Computes every corpus metric in one pass.
pub fn compute_report(corpus: &Corpus, max_pairs: usize) -> Result<MetricsReport, MetricsError> {
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    corpus.validate()?;

    let scores = entropy_scores_for(&corpus.records)?;
    let lengths = message_length_stats(corpus)?;
    let redundancy = symbol_redundancy(corpus)?;
    let occurrence = symbol_occurrence_by_level(corpus)?;

    let mut per_level = BTreeMap::new();
    for level in corpus.levels() {
        // A level whose sub-corpus has a single concept and a single
        // message has no defined entropy scores; such levels are omitted.
        let level_scores = match entropy_scores_for(corpus.records_at_level(level)) {
            Ok(scores) => scores,
            Err(MetricsError::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        };
        per_level.insert(
            level,
            PerLevelMetrics {
                effectiveness: level_scores.effectiveness,
                consistency: level_scores.consistency,
                nmi: level_scores.nmi,
                mean_message_length: lengths.mean_by_level[&level],
                symbol_redundancy: redundancy.per_level.get(&level).copied(),
            },
        );
    }

    Ok(MetricsReport {
        effectiveness: scores.effectiveness,
        consistency: scores.consistency,
        nmi: scores.nmi,
        topsim: topographic_similarity(corpus, max_pairs)?,
        posdis: posdis(corpus)?,
        bosdis: bosdis(corpus)?,
        symbol_redundancy: redundancy.overall,
        mean_message_length: lengths.overall_mean,
        per_level,
        symbol_occurrence: occurrence,
    })
}

/// Flat `key=value` rendering.
pub fn write_report_text(report: &MetricsReport, path: &Path) -> Result<(), MetricsError> {
    let mut out = String::new();
    for (key, value) in [
        ("effectiveness", report.effectiveness),
        ("consistency", report.consistency),
        ("nmi", report.nmi),
        ("topsim", report.topsim),
        ("posdis", report.posdis),
        ("bosdis", report.bosdis),
        ("symbol_redundancy", report.symbol_redundancy),
        ("mean_message_length", report.mean_message_length),
    ] {
        out.push_str(&format!("{key}={value:.6}\n"));
    }
    for (level, m) in &report.per_level {
        out.push_str(&format!("level.{level}.effectiveness={:.6}\n", m.effectiveness));
        out.push_str(&format!("level.{level}.consistency={:.6}\n", m.consistency));
        out.push_str(&format!("level.{level}.nmi={:.6}\n", m.nmi));
        out.push_str(&format!(
            "level.{level}.mean_message_length={:.6}\n",
            m.mean_message_length
        ));
        if let Some(r) = m.symbol_redundancy {
            out.push_str(&format!("level.{level}.symbol_redundancy={r:.6}\n"));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_report_json(report: &MetricsReport, path: &Path) -> Result<(), MetricsError> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| MetricsError::Inconsistent(format!("serialization failed: {e}")))?;
    fs::write(path, json)?;
    Ok(())
}

/// `level,metric,value` rows for the per-level table.
pub fn write_per_level_csv(report: &MetricsReport, path: &Path) -> Result<(), MetricsError> {
    let mut out = String::from("level,metric,value\n");
    for (level, m) in &report.per_level {
        out.push_str(&format!("{level},effectiveness,{:.6}\n", m.effectiveness));
        out.push_str(&format!("{level},consistency,{:.6}\n", m.consistency));
        out.push_str(&format!("{level},nmi,{:.6}\n", m.nmi));
        out.push_str(&format!(
            "{level},mean_message_length,{:.6}\n",
            m.mean_message_length
        ));
        if let Some(r) = m.symbol_redundancy {
            out.push_str(&format!("{level},symbol_redundancy,{r:.6}\n"));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concept::ConceptKey;
    use crate::metrics::corpus::{CorpusMeta, CorpusRecord};
    use std::str::FromStr;

    fn record(key: &str, message: &[u16]) -> CorpusRecord {
        CorpusRecord::from_key(ConceptKey::from_str(key).unwrap(), message.to_vec())
    }

    fn fixture() -> Corpus {
        Corpus {
            meta: CorpusMeta {
                n: 2,
                k: 2,
                vocab_size: 6,
                max_len: 2,
            },
            records: vec![
                record("1,_", &[1]),
                record("2,_", &[2]),
                record("_,1", &[3, 3]),
                record("_,2", &[4]),
                record("1,1", &[1, 3]),
                record("1,2", &[1, 4]),
                record("2,1", &[2, 3]),
                record("2,2", &[2, 4]),
            ],
        }
    }

    #[test]
    fn message_length_means_are_exact() {
        let stats = message_length_stats(&fixture()).unwrap();
        assert_eq!(stats.mean_by_level[&1], (1.0 + 1.0 + 2.0 + 1.0) / 4.0);
        assert_eq!(stats.mean_by_level[&2], 2.0);
        assert_eq!(stats.overall_mean, 13.0 / 8.0);
    }

    #[test]
    fn empty_and_full_messages() {
        let corpus = Corpus {
            meta: CorpusMeta {
                n: 2,
                k: 2,
                vocab_size: 6,
                max_len: 2,
            },
            records: vec![record("1,_", &[]), record("_,1", &[])],
        };
        let stats = message_length_stats(&corpus).unwrap();
        assert_eq!(stats.overall_mean, 0.0);

        let corpus = Corpus {
            meta: corpus.meta,
            records: vec![record("1,_", &[1, 1]), record("_,1", &[2, 2])],
        };
        assert_eq!(message_length_stats(&corpus).unwrap().overall_mean, 2.0);
    }

    #[test]
    fn occurrence_ranking_is_monotone_at_base_level() {
        let table = symbol_occurrence_by_level(&fixture()).unwrap();
        assert_eq!(table.base_level, 1);
        for pair in table.rows.windows(2) {
            assert!(
                pair[0].mean_by_level[&1] >= pair[1].mean_by_level[&1],
                "ranking must be descending"
            );
        }
        assert!(table.rows.iter().all(|r| r.symbol != EOS));
    }

    #[test]
    fn dedicated_abstraction_symbol_counts_match() {
        // Symbol 5 appears once per irrelevant attribute; with n=2 its mean
        // occurrence at level j is n - j.
        let corpus = Corpus {
            meta: CorpusMeta {
                n: 2,
                k: 2,
                vocab_size: 6,
                max_len: 2,
            },
            records: vec![
                record("1,_", &[1, 5]),
                record("2,_", &[2, 5]),
                record("_,2", &[4, 5]),
                record("1,1", &[1, 3]),
                record("2,2", &[2, 4]),
            ],
        };
        let table = symbol_occurrence_by_level(&corpus).unwrap();
        let row = table.rows.iter().find(|r| r.symbol == 5).unwrap();
        assert_eq!(row.mean_by_level[&1], 1.0); // n - 1
        assert_eq!(row.mean_by_level[&2], 0.0); // n - 2
    }

    #[test]
    fn report_round_trips_through_files() {
        let report = compute_report(&fixture(), 1000).unwrap();
        let dir = std::env::temp_dir().join("hierref-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        write_report_text(&report, &dir.join("metrics.txt")).unwrap();
        write_report_json(&report, &dir.join("metrics.json")).unwrap();
        write_per_level_csv(&report, &dir.join("per_level.csv")).unwrap();

        let text = std::fs::read_to_string(dir.join("metrics.txt")).unwrap();
        assert!(text.contains("effectiveness=1.000000"));
        let json = std::fs::read_to_string(dir.join("metrics.json")).unwrap();
        let parsed: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.nmi, report.nmi);
    }
}
