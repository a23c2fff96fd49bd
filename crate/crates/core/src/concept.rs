//! Objects, relevance vectors, concepts, and their encodings.
//!
//! An object is a vector of `n` attribute values, each in `1..=k`. A concept
//! pairs an object with a binary relevance vector; its extension is every
//! object that matches the relevant attribute values. The irrelevant
//! positions render as `_`, e.g. `(4,3,1)` with relevance `(1,0,0)` denotes
//! the concept `4,_,_`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Marker used when rendering irrelevant positions in text form.
pub const IRRELEVANT: char = '_';

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConceptError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("attribute value {value} outside 1..={k}")]
    ValueOutOfRange { value: u8, k: u8 },
    #[error("relevance vector must mark at least one attribute relevant")]
    AllIrrelevant,
    #[error("parse error: {0}")]
    Parse(String),
}

/// Attribute-value vector; entries are 1-based values in `1..=k`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectVector(pub Vec<u8>);

impl ObjectVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[u8] {
        &self.0
    }

    pub fn validate(&self, n: usize, k: u8) -> Result<(), ConceptError> {
        if self.0.len() != n {
            return Err(ConceptError::DimensionMismatch {
                expected: n,
                got: self.0.len(),
            });
        }
        for &v in &self.0 {
            if v < 1 || v > k {
                return Err(ConceptError::ValueOutOfRange { value: v, k });
            }
        }
        Ok(())
    }
}

impl fmt::Debug for ObjectVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self)
    }
}

impl fmt::Display for ObjectVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for ObjectVector {
    type Err = ConceptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let values = s
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<u8>()
                    .map_err(|_| ConceptError::Parse(format!("bad attribute value {tok:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ObjectVector(values))
    }
}

/// Binary mask over attributes: `true` means the attribute is relevant.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelevanceVector(pub Vec<bool>);

impl RelevanceVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn flags(&self) -> &[bool] {
        &self.0
    }

    pub fn validate(&self, n: usize) -> Result<(), ConceptError> {
        if self.0.len() != n {
            return Err(ConceptError::DimensionMismatch {
                expected: n,
                got: self.0.len(),
            });
        }
        if !self.0.iter().any(|&b| b) {
            return Err(ConceptError::AllIrrelevant);
        }
        Ok(())
    }
}

impl fmt::Debug for RelevanceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self)
    }
}

impl fmt::Display for RelevanceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.0.iter().map(|&b| if b { "1" } else { "0" }).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for RelevanceVector {
    type Err = ConceptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let flags = s
            .split(',')
            .map(|tok| match tok.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(ConceptError::Parse(format!("bad relevance flag {other:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RelevanceVector(flags))
    }
}

/// Number of relevant attributes; larger means more concrete.
pub fn abstraction_level(r: &RelevanceVector) -> usize {
    r.0.iter().filter(|&&b| b).count()
}

/// An object plus the relevance mask declaring which attributes it stands for.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Concept {
    pub object: ObjectVector,
    pub relevance: RelevanceVector,
}

impl Concept {
    pub fn new(object: ObjectVector, relevance: RelevanceVector) -> Self {
        Concept { object, relevance }
    }

    pub fn n(&self) -> usize {
        self.object.len()
    }

    pub fn level(&self) -> usize {
        abstraction_level(&self.relevance)
    }
}

/// True iff `o` matches the concept's object at every relevant position.
pub fn instantiates(o: &ObjectVector, c: &Concept) -> Result<bool, ConceptError> {
    if o.len() != c.object.len() || c.object.len() != c.relevance.len() {
        return Err(ConceptError::DimensionMismatch {
            expected: c.object.len(),
            got: o.len(),
        });
    }
    Ok(o.0
        .iter()
        .zip(&c.object.0)
        .zip(&c.relevance.0)
        .all(|((&ov, &cv), &rel)| !rel || ov == cv))
}

/// Canonical identity of a concept: attribute values at relevant positions,
/// `None` elsewhere. Two concepts that differ only in irrelevant-position
/// values share a key.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptKey(pub Vec<Option<u8>>);

impl ConceptKey {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of relevant positions.
    pub fn level(&self) -> usize {
        self.0.iter().filter(|e| e.is_some()).count()
    }
}

impl fmt::Debug for ConceptKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self)
    }
}

impl fmt::Display for ConceptKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|e| match e {
                Some(v) => v.to_string(),
                None => IRRELEVANT.to_string(),
            })
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for ConceptKey {
    type Err = ConceptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let entries = s
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                if tok.len() == 1 && tok.starts_with(IRRELEVANT) {
                    Ok(None)
                } else {
                    tok.parse::<u8>()
                        .map(Some)
                        .map_err(|_| ConceptError::Parse(format!("bad key entry {tok:?}")))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ConceptKey(entries))
    }
}

/// Masks irrelevant positions of the concept's object.
pub fn concept_key(c: &Concept) -> ConceptKey {
    ConceptKey(
        c.object
            .0
            .iter()
            .zip(&c.relevance.0)
            .map(|(&v, &rel)| if rel { Some(v) } else { None })
            .collect(),
    )
}

/// Per-attribute one-hot encoding over `k + 1` slots, where the extra slot
/// marks abstraction from that attribute. Used by the distance-based metrics.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MetricEncoding(pub Vec<u8>);

impl MetricEncoding {
    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    /// Builds the encoding from a key. Rejects the all-irrelevant key: a
    /// concept with no relevant attribute has no referent to select.
    pub fn from_key(key: &ConceptKey, k: u8) -> Result<Self, ConceptError> {
        if key.level() == 0 {
            return Err(ConceptError::AllIrrelevant);
        }
        let block = k as usize + 1;
        let mut bits = vec![0u8; key.len() * block];
        for (a, entry) in key.0.iter().enumerate() {
            match entry {
                Some(v) => {
                    if *v < 1 || *v > k {
                        return Err(ConceptError::ValueOutOfRange { value: *v, k });
                    }
                    bits[a * block + (*v as usize - 1)] = 1;
                }
                None => bits[a * block + k as usize] = 1,
            }
        }
        Ok(MetricEncoding(bits))
    }

    /// Inverse of [`MetricEncoding::from_key`].
    pub fn to_key(&self, k: u8) -> Result<ConceptKey, ConceptError> {
        let block = k as usize + 1;
        if !self.0.len().is_multiple_of(block) {
            return Err(ConceptError::DimensionMismatch {
                expected: block,
                got: self.0.len(),
            });
        }
        let mut entries = Vec::with_capacity(self.0.len() / block);
        for chunk in self.0.chunks(block) {
            let ones: Vec<usize> = (0..block).filter(|&i| chunk[i] != 0).collect();
            if ones.len() != 1 {
                return Err(ConceptError::Parse(
                    "metric encoding block is not one-hot".into(),
                ));
            }
            entries.push(if ones[0] == k as usize {
                None
            } else {
                Some(ones[0] as u8 + 1)
            });
        }
        Ok(ConceptKey(entries))
    }
}

/// Encodes a concept for the distance-based metrics; see
/// [`MetricEncoding::from_key`].
pub fn encode_for_metrics(c: &Concept, k: u8) -> Result<MetricEncoding, ConceptError> {
    MetricEncoding::from_key(&concept_key(c), k)
}

/// One-hot per attribute block of width `k`; the encoding agents receive.
pub fn object_to_nhot(o: &ObjectVector, k: u8) -> Vec<u8> {
    let mut bits = vec![0u8; o.len() * k as usize];
    for (a, &v) in o.0.iter().enumerate() {
        bits[a * k as usize + (v as usize - 1)] = 1;
    }
    bits
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(values: &[u8]) -> ObjectVector {
        ObjectVector(values.to_vec())
    }

    fn rel(flags: &[u8]) -> RelevanceVector {
        RelevanceVector(flags.iter().map(|&f| f != 0).collect())
    }

    #[test]
    fn abstraction_level_counts_relevant_flags() {
        assert_eq!(abstraction_level(&rel(&[1, 1, 1])), 3);
        assert_eq!(abstraction_level(&rel(&[1, 0, 0])), 1);
        assert_eq!(abstraction_level(&rel(&[1, 0, 1, 0])), 2);
    }

    #[test]
    fn instantiates_checks_relevant_positions_only() {
        let c = Concept::new(obj(&[4, 3, 1]), rel(&[1, 0, 0]));
        assert_eq!(instantiates(&obj(&[4, 2, 2]), &c), Ok(true));
        assert_eq!(instantiates(&obj(&[3, 3, 1]), &c), Ok(false));

        let full = Concept::new(obj(&[4, 3, 1]), rel(&[1, 1, 1]));
        assert_eq!(instantiates(&obj(&[4, 3, 1]), &full), Ok(true));
    }

    #[test]
    fn instantiates_rejects_dimension_mismatch() {
        let c = Concept::new(obj(&[4, 3, 1]), rel(&[1, 0, 0]));
        assert_eq!(
            instantiates(&obj(&[4, 3]), &c),
            Err(ConceptError::DimensionMismatch {
                expected: 3,
                got: 2
            })
        );
    }

    #[test]
    fn concept_key_masks_irrelevant_positions() {
        let key = concept_key(&Concept::new(obj(&[4, 3, 1]), rel(&[1, 0, 0])));
        assert_eq!(key.to_string(), "4,_,_");

        let key = concept_key(&Concept::new(obj(&[4, 3, 1]), rel(&[1, 1, 1])));
        assert_eq!(key.to_string(), "4,3,1");

        let key = concept_key(&Concept::new(obj(&[2, 2]), rel(&[0, 1])));
        assert_eq!(key.to_string(), "_,2");
    }

    #[test]
    fn concept_key_round_trips_through_text() {
        for s in ["4,_,_", "4,3,1", "_,2", "1,_,16"] {
            let key: ConceptKey = s.parse().unwrap();
            assert_eq!(key.to_string(), s);
        }
        assert!("4,x,_".parse::<ConceptKey>().is_err());
    }

    #[test]
    fn metric_encoding_matches_reference_layout() {
        let c = Concept::new(obj(&[4, 3, 1]), rel(&[1, 0, 0]));
        let enc = encode_for_metrics(&c, 4).unwrap();
        assert_eq!(
            enc.bits(),
            &[0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1]
        );

        let c = Concept::new(obj(&[1, 1]), rel(&[1, 1]));
        let enc = encode_for_metrics(&c, 2).unwrap();
        assert_eq!(enc.bits(), &[1, 0, 0, 1, 0, 0]);
    }

    #[test]
    fn metric_encoding_rejects_all_irrelevant() {
        let c = Concept::new(obj(&[2, 1]), rel(&[0, 0]));
        assert_eq!(encode_for_metrics(&c, 2), Err(ConceptError::AllIrrelevant));
    }

    #[test]
    fn metric_encoding_has_one_bit_per_attribute_and_decodes() {
        let c = Concept::new(obj(&[4, 3, 1]), rel(&[1, 0, 1]));
        let enc = encode_for_metrics(&c, 4).unwrap();
        assert_eq!(enc.bits().iter().map(|&b| b as usize).sum::<usize>(), 3);
        assert_eq!(enc.to_key(4).unwrap(), concept_key(&c));
    }

    #[test]
    fn nhot_encoding_is_one_hot_per_block() {
        assert_eq!(
            object_to_nhot(&obj(&[4, 3, 1]), 4),
            vec![0, 0, 0, 1, 0, 0, 1, 0, 1, 0, 0, 0]
        );
        assert_eq!(
            object_to_nhot(&obj(&[1, 1, 1]), 4),
            vec![1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0]
        );
        assert_eq!(object_to_nhot(&obj(&[2]), 2), vec![0, 1]);
    }

    #[test]
    fn distinct_keys_per_level_match_combinatorics() {
        // Distinct keys at level j over n attributes with k values: C(n,j) * k^j.
        fn binom(n: usize, j: usize) -> usize {
            let mut num = 1usize;
            let mut den = 1usize;
            for i in 0..j {
                num *= n - i;
                den *= i + 1;
            }
            num / den
        }

        let (n, k) = (3usize, 3u8);
        let mut keys = std::collections::HashSet::new();
        let mut object = vec![1u8; n];
        loop {
            for mask in 1u32..(1 << n) {
                let flags: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                let c = Concept::new(
                    ObjectVector(object.clone()),
                    RelevanceVector(flags),
                );
                keys.insert(concept_key(&c));
            }
            // next object in lexicographic order
            let mut pos = n;
            while pos > 0 {
                if object[pos - 1] < k {
                    object[pos - 1] += 1;
                    object[pos..].iter_mut().for_each(|v| *v = 1);
                    break;
                }
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
        }

        for level in 1..=n {
            let count = keys.iter().filter(|key| key.level() == level).count();
            let expected = binom(n, level) * (k as usize).pow(level as u32);
            assert_eq!(count, expected, "level {level}");
        }
    }
}
