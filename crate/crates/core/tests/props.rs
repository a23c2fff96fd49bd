//! Property tests for the spec-level invariants.

use hierref_core::concept::{
    concept_key, encode_for_metrics, instantiates, Concept, MetricEncoding, ObjectVector,
    RelevanceVector,
};
use hierref_core::dataset::{sample_target, GenConfig, generate_dataset, SplitId};
use hierref_core::nn::gumbel_softmax_sample;
use hierref_core::RunRng;
use proptest::prelude::*;
use rand::SeedableRng;

fn concept_strategy() -> impl Strategy<Value = (Concept, u8)> {
    (2usize..6, 2u8..6).prop_flat_map(|(n, k)| {
        let values = proptest::collection::vec(1..=k, n);
        let flags = proptest::collection::vec(any::<bool>(), n)
            .prop_filter("at least one relevant", |f| f.iter().any(|&b| b));
        (values, flags).prop_map(move |(values, flags)| {
            (
                Concept::new(ObjectVector(values), RelevanceVector(flags)),
                k,
            )
        })
    })
}

proptest! {
    /// Keys ignore irrelevant-position values entirely.
    #[test]
    fn concept_key_invariant_under_irrelevant_resampling(
        (concept, k) in concept_strategy(),
        reseed in 0u64..1000,
    ) {
        let mut rng = RunRng::seed_from_u64(reseed);
        let other_object = sample_target(&concept.object, &concept.relevance, k, &mut rng);
        let other = Concept::new(other_object, concept.relevance.clone());
        prop_assert_eq!(concept_key(&concept), concept_key(&other));
        prop_assert!(instantiates(&other.object, &concept).unwrap());
    }

    /// The metric encoding has exactly n ones and decodes back to the key.
    #[test]
    fn metric_encoding_round_trips((concept, k) in concept_strategy()) {
        let encoding = encode_for_metrics(&concept, k).unwrap();
        let ones: usize = encoding.bits().iter().map(|&b| b as usize).sum();
        prop_assert_eq!(ones, concept.n());
        let decoded = MetricEncoding::from_key(&concept_key(&concept), k).unwrap();
        prop_assert_eq!(decoded.bits(), encoding.bits());
        prop_assert_eq!(encoding.to_key(k).unwrap(), concept_key(&concept));
    }

    /// Relaxed samples are probability vectors for any finite logits.
    #[test]
    fn gumbel_softmax_outputs_are_probability_vectors(
        logits in proptest::collection::vec(-50.0f64..50.0, 2..12),
        tau in 0.05f64..4.0,
        seed in 0u64..1000,
    ) {
        let mut rng = RunRng::seed_from_u64(seed);
        let y = gumbel_softmax_sample(&logits, tau, &mut rng).unwrap();
        let sum: f64 = y.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(y.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    /// Every sample in every split satisfies the target/distractor contract.
    #[test]
    fn generated_samples_respect_the_concept_contract(seed in 0u64..50) {
        let mut cfg = GenConfig::new(2, 3, seed);
        cfg.samples_per_object_per_level = 2;
        cfg.distractors_per_sample = 4;
        let splits = generate_dataset(&cfg).unwrap();
        for id in SplitId::ALL {
            for sample in splits.split(id) {
                let concept = sample.concept();
                prop_assert!(instantiates(&sample.target, &concept).unwrap());
                prop_assert_eq!(sample.distractors.len(), cfg.distractors_per_sample);
                for d in &sample.distractors {
                    prop_assert!(!instantiates(d, &concept).unwrap());
                }
            }
        }
    }
}
