//! Empirical entropies over (concept, message) pairs and the derived
//! effectiveness, consistency, and normalized mutual information scores.

use std::collections::BTreeMap;

use super::corpus::{Corpus, CorpusRecord};
use super::MetricsError;
use crate::concept::ConceptKey;

const ZERO_ENTROPY_EPS: f64 = 1e-12;

/// Shannon entropy in bits of an empirical distribution given by counts.
pub fn entropy_bits<I>(counts: I) -> f64
where
    I: IntoIterator<Item = usize>,
{
    let counts: Vec<usize> = counts.into_iter().collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum()
}

/// H(B | A) in bits from joint counts keyed by (a, b).
pub fn conditional_entropy_bits<A, B>(joint: &BTreeMap<(A, B), usize>) -> f64
where
    A: Ord + Clone,
    B: Ord,
{
    let mut marginal_a: BTreeMap<A, usize> = BTreeMap::new();
    for ((a, _), &c) in joint {
        *marginal_a.entry(a.clone()).or_insert(0) += c;
    }
    let h_joint = entropy_bits(joint.values().copied());
    let h_a = entropy_bits(marginal_a.values().copied());
    h_joint - h_a
}

/// Count tables over the empirical joint of concept keys and full messages.
pub struct ConceptMessageTable {
    pub total: usize,
    pub concept_counts: BTreeMap<ConceptKey, usize>,
    pub message_counts: BTreeMap<Vec<u16>, usize>,
    pub joint_counts: BTreeMap<(ConceptKey, Vec<u16>), usize>,
}

impl ConceptMessageTable {
    pub fn from_records<'a, I>(records: I) -> Result<Self, MetricsError>
    where
        I: IntoIterator<Item = &'a CorpusRecord>,
    {
        let mut table = ConceptMessageTable {
            total: 0,
            concept_counts: BTreeMap::new(),
            message_counts: BTreeMap::new(),
            joint_counts: BTreeMap::new(),
        };
        for record in records {
            table.total += 1;
            *table.concept_counts.entry(record.key.clone()).or_insert(0) += 1;
            *table
                .message_counts
                .entry(record.message.clone())
                .or_insert(0) += 1;
            *table
                .joint_counts
                .entry((record.key.clone(), record.message.clone()))
                .or_insert(0) += 1;
        }
        if table.total == 0 {
            return Err(MetricsError::EmptyCorpus);
        }
        Ok(table)
    }

    pub fn h_concepts(&self) -> f64 {
        entropy_bits(self.concept_counts.values().copied())
    }

    pub fn h_messages(&self) -> f64 {
        entropy_bits(self.message_counts.values().copied())
    }

    pub fn h_joint(&self) -> f64 {
        entropy_bits(self.joint_counts.values().copied())
    }

    pub fn h_messages_given_concepts(&self) -> f64 {
        self.h_joint() - self.h_concepts()
    }

    pub fn h_concepts_given_messages(&self) -> f64 {
        self.h_joint() - self.h_messages()
    }

    pub fn mutual_information(&self) -> f64 {
        self.h_messages() - self.h_messages_given_concepts()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EntropyScores {
    pub effectiveness: f64,
    pub consistency: f64,
    pub nmi: f64,
    pub h_concepts: f64,
    pub h_messages: f64,
    pub mutual_information: f64,
}

fn normalized_complement(conditional: f64, marginal: f64) -> Result<f64, MetricsError> {
    if marginal.abs() < ZERO_ENTROPY_EPS {
        if conditional.abs() < ZERO_ENTROPY_EPS {
            Ok(1.0)
        } else {
            Err(MetricsError::Degenerate(
                "zero marginal entropy with nonzero conditional entropy".into(),
            ))
        }
    } else {
        Ok(1.0 - conditional / marginal)
    }
}

/// All entropy scores over an arbitrary record subset.
pub fn entropy_scores_for<'a, I>(records: I) -> Result<EntropyScores, MetricsError>
where
    I: IntoIterator<Item = &'a CorpusRecord>,
{
    let table = ConceptMessageTable::from_records(records)?;
    let h_c = table.h_concepts();
    let h_m = table.h_messages();
    let effectiveness = normalized_complement(table.h_concepts_given_messages(), h_c)?;
    let consistency = normalized_complement(table.h_messages_given_concepts(), h_m)?;
    let nmi = if h_c + h_m < ZERO_ENTROPY_EPS {
        return Err(MetricsError::Degenerate(
            "both marginal entropies are zero".into(),
        ));
    } else {
        table.mutual_information() / (0.5 * (h_c + h_m))
    };
    Ok(EntropyScores {
        effectiveness,
        consistency,
        nmi,
        h_concepts: h_c,
        h_messages: h_m,
        mutual_information: table.mutual_information(),
    })
}

/// 1 - H(C|M) / H(C): how uniquely messages identify concepts.
pub fn effectiveness(corpus: &Corpus) -> Result<f64, MetricsError> {
    entropy_scores_for(&corpus.records).map(|s| s.effectiveness)
}

/// 1 - H(M|C) / H(M): how consistently concepts map to one message.
pub fn consistency(corpus: &Corpus) -> Result<f64, MetricsError> {
    entropy_scores_for(&corpus.records).map(|s| s.consistency)
}

/// I(C; M) normalized by the mean of the marginal entropies.
pub fn nmi(corpus: &Corpus) -> Result<f64, MetricsError> {
    entropy_scores_for(&corpus.records).map(|s| s.nmi)
}
