//! Joint sender/receiver training and evaluation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use super::{
    arrange_candidates, game_backward, game_forward_with_noise, receiver_forward_eval,
    sender_forward_eval, GameConfig, TrainedPair,
};
use crate::dataset::{DatasetSplits, GameSample};
use crate::metrics::{Corpus, CorpusMeta, CorpusRecord};
use crate::nn::{adam_step, sample_gumbel, AdamHyper, NnError};
use crate::{RunRng, Scalar};

#[derive(Clone, Copy, Debug)]
pub struct EpochStats {
    pub epoch: usize,
    pub temperature: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

pub struct TrainOutcome<F: Scalar> {
    pub pair: TrainedPair<F>,
    pub history: Vec<EpochStats>,
}

fn argmax<F: Scalar>(xs: &[F]) -> usize {
    let mut best = 0;
    for i in 1..xs.len() {
        if xs[i] > xs[best] {
            best = i;
        }
    }
    best
}

/// Accuracy and mean loss over a split in evaluation mode (argmax
/// messages, no sampling). The target position cycles deterministically
/// through the candidate slots.
pub fn evaluate_with_loss<F: Scalar>(
    pair: &TrainedPair<F>,
    split: &[GameSample],
) -> Result<(f64, f64), NnError> {
    if split.is_empty() {
        return Err(NnError::EmptySplit);
    }
    let mut correct = 0usize;
    let mut loss_sum = 0.0f64;
    for (i, sample) in split.iter().enumerate() {
        let target_pos = i % (sample.distractors.len() + 1);
        let symbols = sender_forward_eval(&pair.sender, &sample.sender_object, &sample.relevance);
        let candidates = arrange_candidates(sample, target_pos);
        let probs = receiver_forward_eval(&pair.receiver, &symbols, &candidates);
        if argmax(&probs) == target_pos {
            correct += 1;
        }
        loss_sum += -probs[target_pos].as_f64().ln();
    }
    Ok((correct as f64 / split.len() as f64, loss_sum / split.len() as f64))
}

/// Fraction of evaluation rounds where the receiver selects the target.
pub fn evaluate<F: Scalar>(pair: &TrainedPair<F>, split: &[GameSample]) -> Result<f64, NnError> {
    evaluate_with_loss(pair, split).map(|(acc, _)| acc)
}

/// Trains a fresh pair on the dataset's training split.
///
/// Gradients flow through the relaxed messages, so sender and receiver are
/// updated jointly. The run is a pure function of the dataset and config.
pub fn train<F: Scalar>(
    dataset: &DatasetSplits,
    cfg: &GameConfig,
) -> Result<TrainOutcome<F>, NnError> {
    cfg.validate()?;
    if dataset.train.is_empty() {
        return Err(NnError::EmptySplit);
    }
    let mut rng = RunRng::seed_from_u64(cfg.seed);
    let mut pair = TrainedPair::<F>::init(cfg, &mut rng);
    let hyper = AdamHyper::with_lr(cfg.learning_rate);

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut indices: Vec<usize> = (0..dataset.train.len()).collect();

    for epoch in 0..cfg.epochs {
        let tau = cfg.temperature.temperature_at(epoch);
        let tau_f = F::from_f64(tau);
        indices.shuffle(&mut rng);

        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        for (batch_no, batch) in indices.chunks(cfg.batch_size).enumerate() {
            for &idx in batch {
                let sample = &dataset.train[idx];
                let target_pos = rng.random_range(0..=sample.distractors.len());
                let noise: Vec<Vec<F>> = (0..cfg.max_len)
                    .map(|_| sample_gumbel(pair.sender.vocab_size, &mut rng))
                    .collect();
                let (loss, traces) = game_forward_with_noise(
                    &pair.sender,
                    &pair.receiver,
                    sample,
                    target_pos,
                    tau_f,
                    &noise,
                )?;
                let loss = loss.as_f64();
                if !loss.is_finite() {
                    return Err(NnError::NonFiniteLoss {
                        epoch,
                        batch: batch_no,
                    });
                }
                loss_sum += loss;
                if argmax(&traces.probs) == target_pos {
                    correct += 1;
                }
                game_backward(&mut pair.sender, &mut pair.receiver, &traces);
            }
            let scale = 1.0 / batch.len() as f64;
            pair.for_each_param(&mut |_, p| {
                p.scale_grad(scale);
                adam_step(p, &hyper);
                p.zero_grad();
            });
        }

        let train_loss = loss_sum / dataset.train.len() as f64;
        let train_acc = correct as f64 / dataset.train.len() as f64;
        let (val_acc, val_loss) = if dataset.validation.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let (acc, loss) = evaluate_with_loss(&pair, &dataset.validation)?;
            (acc, loss)
        };
        history.push(EpochStats {
            epoch,
            temperature: tau,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
        });
    }

    Ok(TrainOutcome { pair, history })
}

/// Evaluation-mode corpus over a split: one record per sample pairing the
/// concept with the sender's argmax message.
pub fn dump_corpus<F: Scalar>(pair: &TrainedPair<F>, split: &[GameSample]) -> Corpus {
    let records = split
        .iter()
        .map(|sample| {
            let message =
                sender_forward_eval(&pair.sender, &sample.sender_object, &sample.relevance);
            CorpusRecord::new(Some(sample.concept()), message)
        })
        .collect();
    Corpus {
        meta: CorpusMeta {
            n: pair.config.n,
            k: pair.config.k,
            vocab_size: pair.config.vocab_size(),
            max_len: pair.config.max_len,
        },
        records,
    }
}
