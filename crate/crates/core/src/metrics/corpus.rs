//! The corpus type shared by all metrics.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::MetricsError;
use crate::concept::{concept_key, Concept, ConceptKey};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorpusMeta {
    pub n: usize,
    pub k: u8,
    /// Full vocabulary size including the end-of-sequence symbol 0.
    pub vocab_size: usize,
    pub max_len: usize,
}

/// One concept/message observation. Messages are already truncated at the
/// first end-of-sequence symbol. The full concept is present when the
/// corpus was produced in-process; corpora loaded from dump files carry
/// only the key.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusRecord {
    pub concept: Option<Concept>,
    pub key: ConceptKey,
    pub message: Vec<u16>,
}

impl CorpusRecord {
    pub fn new(concept: Option<Concept>, message: Vec<u16>) -> Self {
        let key = concept
            .as_ref()
            .map(concept_key)
            .expect("record needs a concept or use from_key");
        CorpusRecord {
            concept,
            key,
            message,
        }
    }

    pub fn from_key(key: ConceptKey, message: Vec<u16>) -> Self {
        CorpusRecord {
            concept: None,
            key,
            message,
        }
    }

    pub fn level(&self) -> usize {
        self.key.level()
    }
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub meta: CorpusMeta,
    pub records: Vec<CorpusRecord>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Abstraction levels present, ascending.
    pub fn levels(&self) -> Vec<usize> {
        let mut levels: Vec<usize> = self.records.iter().map(|r| r.level()).collect();
        levels.sort_unstable();
        levels.dedup();
        levels
    }

    pub fn records_at_level(&self, level: usize) -> impl Iterator<Item = &CorpusRecord> {
        self.records.iter().filter(move |r| r.level() == level)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        for (i, record) in self.records.iter().enumerate() {
            if record.key.len() != self.meta.n {
                return Err(MetricsError::Inconsistent(format!(
                    "record {i}: key has {} entries, expected {}",
                    record.key.len(),
                    self.meta.n
                )));
            }
            if record.message.len() > self.meta.max_len {
                return Err(MetricsError::Inconsistent(format!(
                    "record {i}: message longer than max_len {}",
                    self.meta.max_len
                )));
            }
            if let Some(&bad) = record
                .message
                .iter()
                .find(|&&s| s as usize >= self.meta.vocab_size)
            {
                return Err(MetricsError::Inconsistent(format!(
                    "record {i}: symbol {bad} outside vocabulary of size {}",
                    self.meta.vocab_size
                )));
            }
        }
        Ok(())
    }

    /// Writes the dump file: a `hierref-corpus v1` header, then one
    /// `<concept_key>\t<symbols comma-separated>` line per record.
    pub fn save(&self, path: &Path) -> Result<(), MetricsError> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "hierref-corpus v1")?;
        for record in &self.records {
            let symbols: Vec<String> = record.message.iter().map(|s| s.to_string()).collect();
            writeln!(w, "{}\t{}", record.key, symbols.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a dump file written by [`Corpus::save`]. The dump carries only
    /// keys and messages, so the remaining dimensions come from the caller
    /// (typically a run manifest).
    pub fn load(path: &Path, meta: CorpusMeta) -> Result<Self, MetricsError> {
        let file = File::open(path)?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or(MetricsError::Parse {
                line: 1,
                msg: "empty file".into(),
            })
            .and_then(|(i, r)| r.map(|l| (i, l)).map_err(MetricsError::Io))?;
        if header.trim() != "hierref-corpus v1" {
            return Err(MetricsError::Parse {
                line: 1,
                msg: format!("unsupported corpus header {header:?}"),
            });
        }

        let mut records = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (key_text, msg_text) = line.split_once('\t').ok_or(MetricsError::Parse {
                line: line_no,
                msg: "expected <key>\\t<symbols>".into(),
            })?;
            let key: ConceptKey = key_text.parse().map_err(|e| MetricsError::Parse {
                line: line_no,
                msg: format!("{e}"),
            })?;
            let message = if msg_text.is_empty() {
                Vec::new()
            } else {
                msg_text
                    .split(',')
                    .map(|tok| {
                        tok.parse::<u16>().map_err(|_| MetricsError::Parse {
                            line: line_no,
                            msg: format!("bad symbol {tok:?}"),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?
            };
            records.push(CorpusRecord::from_key(key, message));
        }
        let corpus = Corpus { meta, records };
        corpus.validate()?;
        Ok(corpus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::str::FromStr;

    fn meta() -> CorpusMeta {
        CorpusMeta {
            n: 3,
            k: 4,
            vocab_size: 16,
            max_len: 3,
        }
    }

    fn record(key: &str, message: &[u16]) -> CorpusRecord {
        CorpusRecord::from_key(ConceptKey::from_str(key).unwrap(), message.to_vec())
    }

    #[test]
    fn corpus_file_round_trip() {
        let corpus = Corpus {
            meta: meta(),
            records: vec![
                record("4,_,_", &[3, 3]),
                record("1,2,3", &[5, 12, 11]),
                record("_,_,2", &[]),
            ],
        };
        let dir = std::env::temp_dir().join("hierref-corpus-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("corpus.txt");
        corpus.save(&path).unwrap();
        let loaded = Corpus::load(&path, meta()).unwrap();
        assert_eq!(loaded.records, corpus.records);
    }

    #[test]
    fn load_rejects_foreign_symbols() {
        let dir = std::env::temp_dir().join("hierref-corpus-bad");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("corpus.txt");
        std::fs::write(&path, "hierref-corpus v1\n4,_,_\t99\n").unwrap();
        assert!(matches!(
            Corpus::load(&path, meta()),
            Err(MetricsError::Inconsistent(_))
        ));
    }
}
