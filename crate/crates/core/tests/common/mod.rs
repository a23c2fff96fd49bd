//! Shared helpers for the integration tests: chi-square machinery and
//! brute-force metric oracles kept independent of the library's own
//! computation paths.

#![allow(dead_code)]

use std::collections::BTreeMap;

use hierref_core::concept::ConceptKey;
use hierref_core::metrics::{Corpus, CorpusMeta, CorpusRecord};
use hierref_core::RunRng;
use rand::Rng;

/// Critical value of the chi-square distribution at alpha = 0.01 via the
/// Wilson-Hilferty cube approximation (accurate to ~0.1% for dof >= 2).
pub fn chi_square_critical_99(dof: usize) -> f64 {
    let z = 2.3263478740408408_f64; // 99th percentile of the standard normal
    let v = dof as f64;
    v * (1.0 - 2.0 / (9.0 * v) + z * (2.0 / (9.0 * v)).sqrt()).powi(3)
}

pub fn chi_square_stat(observed: &[f64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&o, &e)| (o - e) * (o - e) / e)
        .sum()
}

pub fn key_from(entries: &[Option<u8>]) -> ConceptKey {
    ConceptKey(entries.to_vec())
}

/// Random corpus with at least two distinct keys; levels are always >= 1.
pub fn random_corpus(rng: &mut RunRng, max_records: usize) -> Corpus {
    let n = rng.random_range(2..=4usize);
    let k = rng.random_range(2..=4u8);
    let vocab_size = rng.random_range(5..=10usize);
    let max_len = rng.random_range(2..=4usize);
    let records = rng.random_range(4..=max_records);

    let mut corpus = Corpus {
        meta: CorpusMeta {
            n,
            k,
            vocab_size,
            max_len,
        },
        records: Vec::with_capacity(records),
    };
    loop {
        corpus.records.clear();
        for _ in 0..records {
            let mut entries = vec![None; n];
            // At least one relevant position.
            let forced = rng.random_range(0..n);
            for (i, e) in entries.iter_mut().enumerate() {
                if i == forced || rng.random_range(0..2) == 1 {
                    *e = Some(rng.random_range(1..=k));
                }
            }
            let len = rng.random_range(0..=max_len);
            let message = (0..len)
                .map(|_| rng.random_range(1..vocab_size) as u16)
                .collect();
            corpus
                .records
                .push(CorpusRecord::from_key(key_from(&entries), message));
        }
        let distinct_keys: std::collections::HashSet<_> =
            corpus.records.iter().map(|r| r.key.clone()).collect();
        let distinct_msgs: std::collections::HashSet<_> =
            corpus.records.iter().map(|r| r.message.clone()).collect();
        if distinct_keys.len() >= 2 && distinct_msgs.len() >= 2 {
            return corpus;
        }
    }
}

/// Brute-force reference implementations. Probabilities are materialized
/// explicitly and conditional entropies are computed by direct summation
/// over the conditioning variable, not via joint-minus-marginal.
pub mod oracle {
    use super::*;

    fn prob_table<T: Ord + Clone>(items: impl Iterator<Item = T>) -> Vec<(T, f64)> {
        let mut counts: BTreeMap<T, usize> = BTreeMap::new();
        let mut total = 0usize;
        for item in items {
            *counts.entry(item).or_insert(0) += 1;
            total += 1;
        }
        counts
            .into_iter()
            .map(|(t, c)| (t, c as f64 / total as f64))
            .collect()
    }

    fn entropy<T: Ord + Clone>(items: impl Iterator<Item = T>) -> f64 {
        prob_table(items)
            .into_iter()
            .map(|(_, p)| -p * p.log2())
            .sum()
    }

    /// H(B|A) = sum_a p(a) H(B | A = a)
    fn conditional_entropy<A: Ord + Clone, B: Ord + Clone>(pairs: &[(A, B)]) -> f64 {
        let mut by_a: BTreeMap<A, Vec<B>> = BTreeMap::new();
        for (a, b) in pairs {
            by_a.entry(a.clone()).or_default().push(b.clone());
        }
        let total = pairs.len() as f64;
        by_a.values()
            .map(|bs| bs.len() as f64 / total * entropy(bs.iter().cloned()))
            .sum()
    }

    fn pairs(corpus: &Corpus) -> Vec<(ConceptKey, Vec<u16>)> {
        corpus
            .records
            .iter()
            .map(|r| (r.key.clone(), r.message.clone()))
            .collect()
    }

    pub fn effectiveness(corpus: &Corpus) -> f64 {
        let ps = pairs(corpus);
        let h_c = entropy(ps.iter().map(|(c, _)| c.clone()));
        let swapped: Vec<_> = ps.iter().map(|(c, m)| (m.clone(), c.clone())).collect();
        let h_c_given_m = conditional_entropy(&swapped);
        if h_c == 0.0 {
            1.0
        } else {
            1.0 - h_c_given_m / h_c
        }
    }

    pub fn consistency(corpus: &Corpus) -> f64 {
        let ps = pairs(corpus);
        let h_m = entropy(ps.iter().map(|(_, m)| m.clone()));
        let h_m_given_c = conditional_entropy(&ps);
        if h_m == 0.0 {
            1.0
        } else {
            1.0 - h_m_given_c / h_m
        }
    }

    pub fn nmi(corpus: &Corpus) -> f64 {
        let ps = pairs(corpus);
        let h_c = entropy(ps.iter().map(|(c, _)| c.clone()));
        let h_m = entropy(ps.iter().map(|(_, m)| m.clone()));
        let h_m_given_c = conditional_entropy(&ps);
        (h_m - h_m_given_c) / (0.5 * (h_c + h_m))
    }

    /// I(A;B) by direct summation over the joint support.
    fn mutual_information<A: Ord + Clone, B: Ord + Clone>(pairs: &[(A, B)]) -> f64 {
        let joint = prob_table(pairs.iter().cloned());
        let pa = prob_table(pairs.iter().map(|(a, _)| a.clone()));
        let pb = prob_table(pairs.iter().map(|(_, b)| b.clone()));
        let lookup_a: BTreeMap<A, f64> = pa.into_iter().collect();
        let lookup_b: BTreeMap<B, f64> = pb.into_iter().collect();
        joint
            .into_iter()
            .map(|((a, b), p)| p * (p / (lookup_a[&a] * lookup_b[&b])).log2())
            .sum()
    }

    fn category(key: &ConceptKey, attr: usize) -> usize {
        key.0[attr].map(|v| v as usize).unwrap_or(0)
    }

    pub fn posdis(corpus: &Corpus) -> f64 {
        let max_len = corpus.meta.max_len;
        let n = corpus.meta.n;
        let mut total = 0.0;
        for pos in 0..max_len {
            let symbols: Vec<usize> = corpus
                .records
                .iter()
                .map(|r| r.message.get(pos).copied().unwrap_or(0) as usize)
                .collect();
            let h_s = entropy(symbols.iter().copied());
            if h_s == 0.0 {
                continue;
            }
            let mut mis: Vec<f64> = (0..n)
                .map(|attr| {
                    let ps: Vec<(usize, usize)> = corpus
                        .records
                        .iter()
                        .zip(&symbols)
                        .map(|(r, &s)| (s, category(&r.key, attr)))
                        .collect();
                    mutual_information(&ps)
                })
                .collect();
            mis.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let second = if mis.len() > 1 { mis[1] } else { 0.0 };
            total += (mis[0] - second) / h_s;
        }
        total / max_len as f64
    }

    pub fn bosdis(corpus: &Corpus) -> f64 {
        let n = corpus.meta.n;
        let content = corpus.meta.vocab_size - 1;
        let mut total = 0.0;
        for sym in 1..corpus.meta.vocab_size {
            let counts: Vec<usize> = corpus
                .records
                .iter()
                .map(|r| r.message.iter().filter(|&&s| s as usize == sym).count())
                .collect();
            let h = entropy(counts.iter().copied());
            if h == 0.0 {
                continue;
            }
            let mut mis: Vec<f64> = (0..n)
                .map(|attr| {
                    let ps: Vec<(usize, usize)> = corpus
                        .records
                        .iter()
                        .zip(&counts)
                        .map(|(r, &c)| (c, category(&r.key, attr)))
                        .collect();
                    mutual_information(&ps)
                })
                .collect();
            mis.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let second = if mis.len() > 1 { mis[1] } else { 0.0 };
            total += (mis[0] - second) / h;
        }
        total / content as f64
    }

    /// Same tie rule as the library: MI gaps below 1e-9 keep the lower
    /// symbol index.
    pub fn symbol_redundancy(corpus: &Corpus) -> f64 {
        let n = corpus.meta.n;
        let k = corpus.meta.k;
        let vocab = corpus.meta.vocab_size;
        let mut means = Vec::new();
        for attr in 0..n {
            for value in 1..=k {
                let active: Vec<bool> = corpus
                    .records
                    .iter()
                    .map(|r| r.key.0[attr] == Some(value))
                    .collect();
                if !active.iter().any(|&a| a) {
                    continue;
                }
                let mut best_sym = 1usize;
                let mut best_mi = f64::NEG_INFINITY;
                for sym in 1..vocab {
                    let ps: Vec<(usize, usize)> = corpus
                        .records
                        .iter()
                        .zip(&active)
                        .map(|(r, &a)| {
                            let occurs = r.message.iter().any(|&s| s as usize == sym);
                            (a as usize, occurs as usize)
                        })
                        .collect();
                    let mi = mutual_information(&ps);
                    if mi > best_mi + 1e-9 {
                        best_mi = mi;
                        best_sym = sym;
                    }
                }
                let mut count = 0usize;
                let mut records_active = 0usize;
                for (r, &a) in corpus.records.iter().zip(&active) {
                    if a {
                        records_active += 1;
                        count += r.message.iter().filter(|&&s| s as usize == best_sym).count();
                    }
                }
                means.push(count as f64 / records_active as f64);
            }
        }
        means.iter().sum::<f64>() / means.len() as f64
    }
}

/// Gradient-check battery shared by the dedicated test file and the
/// acceptance suite. Each function returns the maximum relative error
/// between the analytic gradient and central finite differences for one
/// random configuration.
pub mod checks {
    use hierref_core::agents::{
        game_backward, game_forward_with_noise, GameConfig, TrainedPair,
    };
    use hierref_core::concept::{ObjectVector, RelevanceVector};
    use hierref_core::dataset::GameSample;
    use hierref_core::nn::{
        grad_check, gumbel_softmax, gumbel_softmax_backward, sample_gumbel,
        softmax_cross_entropy, Dense, GruCell,
    };
    use hierref_core::RunRng;
    use rand::{Rng, SeedableRng};

    fn random_vec(rng: &mut RunRng, len: usize, scale: f64) -> Vec<f64> {
        (0..len)
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale)
            .collect()
    }

    pub fn dense_check(seed: u64) -> f64 {
        let mut rng = RunRng::seed_from_u64(seed);
        let in_dim = rng.random_range(2..6);
        let out_dim = rng.random_range(2..5);
        let x0 = random_vec(&mut rng, in_dim, 1.0);
        let probe = random_vec(&mut rng, out_dim, 1.0);
        let layer0 = Dense::<f64>::new(in_dim, out_dim, &mut rng);

        let n_w = in_dim * out_dim;
        let mut theta: Vec<f64> = layer0.w.values().to_vec();
        theta.extend_from_slice(layer0.b.values());
        theta.extend_from_slice(&x0);

        let f = |v: &[f64]| {
            let mut layer = layer0.clone();
            layer.w.values_mut().copy_from_slice(&v[..n_w]);
            layer.b.values_mut().copy_from_slice(&v[n_w..n_w + out_dim]);
            let x = &v[n_w + out_dim..];
            let mut y = vec![0.0; out_dim];
            layer.forward(x, &mut y);
            let value: f64 = y.iter().zip(&probe).map(|(a, b)| a * b).sum();
            let mut dx = vec![0.0; in_dim];
            layer.backward(x, &probe, &mut dx);
            let mut grad = layer.w.grad().to_vec();
            grad.extend_from_slice(layer.b.grad());
            grad.extend_from_slice(&dx);
            (value, grad)
        };
        grad_check(f, &theta, 1e-5)
    }

    pub fn gru_check(seed: u64) -> f64 {
        let mut rng = RunRng::seed_from_u64(seed);
        let in_dim = rng.random_range(2..5);
        let hidden = rng.random_range(2..6);
        let cell0 = GruCell::<f64>::new(in_dim, hidden, &mut rng);
        let x0 = random_vec(&mut rng, in_dim, 1.0);
        let h0 = random_vec(&mut rng, hidden, 1.0);
        let probe = random_vec(&mut rng, hidden, 1.0);

        let mut theta = Vec::new();
        {
            let mut cell = cell0.clone();
            for (_, p) in cell.params_mut() {
                theta.extend_from_slice(p.values());
            }
        }
        theta.extend_from_slice(&x0);
        theta.extend_from_slice(&h0);

        let f = |v: &[f64]| {
            let mut cell = cell0.clone();
            let mut offset = 0;
            for (_, p) in cell.params_mut() {
                let len = p.len();
                p.values_mut().copy_from_slice(&v[offset..offset + len]);
                offset += len;
            }
            let x = &v[offset..offset + in_dim];
            let h_prev = &v[offset + in_dim..];
            let mut h = vec![0.0; hidden];
            let cache = cell.forward(x, h_prev, &mut h);
            let value: f64 = h.iter().zip(&probe).map(|(a, b)| a * b).sum();
            let mut dx = vec![0.0; in_dim];
            let mut dh_prev = vec![0.0; hidden];
            cell.backward(&cache, &probe, &mut dx, &mut dh_prev);
            let mut grad = Vec::with_capacity(v.len());
            for (_, p) in cell.params_mut() {
                grad.extend_from_slice(p.grad());
            }
            grad.extend_from_slice(&dx);
            grad.extend_from_slice(&dh_prev);
            (value, grad)
        };
        grad_check(f, &theta, 1e-5)
    }

    pub fn gumbel_softmax_check(seed: u64) -> f64 {
        let mut rng = RunRng::seed_from_u64(seed);
        let len = rng.random_range(3..9);
        let logits = random_vec(&mut rng, len, 2.0);
        let noise: Vec<f64> = sample_gumbel(len, &mut rng);
        let probe = random_vec(&mut rng, len, 1.0);
        let tau = 0.5 + rng.random::<f64>();

        let f = |v: &[f64]| {
            let y = gumbel_softmax(v, &noise, tau).unwrap();
            let value: f64 = y.iter().zip(&probe).map(|(a, b)| a * b).sum();
            let mut dlogits = vec![0.0; v.len()];
            gumbel_softmax_backward(&y, &probe, tau, &mut dlogits);
            (value, dlogits)
        };
        grad_check(f, &logits, 1e-6)
    }

    pub fn cross_entropy_check(seed: u64) -> f64 {
        let mut rng = RunRng::seed_from_u64(seed);
        let len = rng.random_range(3..12);
        let logits = random_vec(&mut rng, len, 3.0);
        let target = rng.random_range(0..len);
        grad_check(|v: &[f64]| softmax_cross_entropy(v, target).unwrap(), &logits, 1e-6)
    }

    pub fn full_game_check(seed: u64) -> f64 {
        let cfg = GameConfig {
            max_len: 2,
            vocab_factor: 1,
            embed_dim: 4,
            hidden_dim: 8,
            ..GameConfig::new(2, 2, 0)
        };
        let sample = GameSample {
            sender_object: ObjectVector(vec![2, 1]),
            relevance: RelevanceVector(vec![true, false]),
            target: ObjectVector(vec![2, 2]),
            distractors: vec![ObjectVector(vec![1, 1]), ObjectVector(vec![1, 2])],
        };
        let mut rng = RunRng::seed_from_u64(seed);
        let mut pair = TrainedPair::<f64>::init(&cfg, &mut rng);
        let noise: Vec<Vec<f64>> = (0..cfg.max_len)
            .map(|_| sample_gumbel(cfg.vocab_size(), &mut rng))
            .collect();
        let target_pos = rng.random_range(0..=sample.distractors.len());
        let tau = 1.1;

        let mut theta = Vec::new();
        pair.for_each_param(&mut |_, p| theta.extend_from_slice(p.values()));

        let mut worker = |v: &[f64]| {
            let mut offset = 0;
            pair.for_each_param(&mut |_, p| {
                let len = p.len();
                p.values_mut().copy_from_slice(&v[offset..offset + len]);
                offset += len;
            });
            let (loss, traces) = game_forward_with_noise(
                &pair.sender,
                &pair.receiver,
                &sample,
                target_pos,
                tau,
                &noise,
            )
            .unwrap();
            pair.zero_grads();
            game_backward(&mut pair.sender, &mut pair.receiver, &traces);
            let mut grad = Vec::with_capacity(v.len());
            pair.for_each_param(&mut |_, p| grad.extend_from_slice(p.grad()));
            (loss, grad)
        };

        let (_, analytic) = worker(&theta);
        let mut x = theta.clone();
        let mut worst = 0.0f64;
        let eps = 1e-5;
        for i in 0..x.len() {
            let orig = x[i];
            x[i] = orig + eps;
            let (fp, _) = worker(&x);
            x[i] = orig - eps;
            let (fm, _) = worker(&x);
            x[i] = orig;
            let numeric = (fp - fm) / (2.0 * eps);
            let denom = (numeric.abs() + analytic[i].abs()).max(1e-6);
            worst = worst.max((numeric - analytic[i]).abs() / denom);
        }
        worst
    }
}

/// Fully positional language over concrete concepts: position j carries
/// attribute j's value through a dedicated symbol range.
pub fn positional_corpus(n: usize, k: u8) -> Corpus {
    let vocab_size = n * k as usize + 1;
    let mut records = Vec::new();
    let mut values = vec![1u8; n];
    loop {
        let key = ConceptKey(values.iter().map(|&v| Some(v)).collect());
        let message: Vec<u16> = values
            .iter()
            .enumerate()
            .map(|(attr, &v)| (attr * k as usize + v as usize) as u16)
            .collect();
        records.push(CorpusRecord::from_key(key, message));
        let mut pos = n;
        while pos > 0 {
            if values[pos - 1] < k {
                values[pos - 1] += 1;
                values[pos..].iter_mut().for_each(|v| *v = 1);
                break;
            }
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
    }
    Corpus {
        meta: CorpusMeta {
            n,
            k,
            vocab_size,
            max_len: n,
        },
        records,
    }
}

/// Corpus with random keys and fully random messages.
pub fn random_message_corpus(
    rng: &mut RunRng,
    records: usize,
    n: usize,
    k: u8,
    vocab_size: usize,
) -> Corpus {
    let mut corpus = Corpus {
        meta: CorpusMeta {
            n,
            k,
            vocab_size,
            max_len: n,
        },
        records: Vec::with_capacity(records),
    };
    for _ in 0..records {
        let mut entries = vec![None; n];
        let forced = rng.random_range(0..n);
        for (i, e) in entries.iter_mut().enumerate() {
            if i == forced || rng.random_range(0..2) == 1 {
                *e = Some(rng.random_range(1..=k));
            }
        }
        let len = rng.random_range(1..=n);
        let message: Vec<u16> = (0..len)
            .map(|_| rng.random_range(1..vocab_size) as u16)
            .collect();
        corpus
            .records
            .push(CorpusRecord::from_key(ConceptKey(entries), message));
    }
    corpus
}
