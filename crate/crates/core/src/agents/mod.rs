//! Sender and receiver agents and the game forward/backward pass.
//!
//! The sender maps a concept (object n-hot plus relevance flags) to an
//! initial hidden state and unrolls a GRU to emit one symbol distribution
//! per step. During training symbols are relaxed categorical samples and
//! the whole round is differentiable end to end; during evaluation the
//! argmax symbol is taken and generation stops at the end-of-sequence
//! symbol. The receiver runs its own GRU over the message and scores each
//! candidate object by the dot product of its embedding with the final
//! hidden state.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use train::{dump_corpus, evaluate, evaluate_with_loss, train, EpochStats, TrainOutcome};

use rand::Rng;

use crate::concept::{object_to_nhot, ObjectVector, RelevanceVector};
use crate::dataset::GameSample;
use crate::nn::{
    gumbel_softmax, gumbel_softmax_backward, linalg, sample_gumbel, softmax_cross_entropy,
    softmax_in_place, Dense, GruCache, GruCell, NnError, Parameter, TemperatureSchedule,
};
use crate::Scalar;

/// End-of-sequence symbol; content symbols are `1..=content_vocab`.
pub const EOS: u16 = 0;

/// Architecture and training hyperparameters for one sender/receiver pair.
#[derive(Clone, Debug, PartialEq)]
pub struct GameConfig {
    pub n: usize,
    pub k: u8,
    /// Maximum message length; defaults to the attribute count.
    pub max_len: usize,
    /// Multiplier on the minimal content vocabulary `k + 1`.
    pub vocab_factor: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub temperature: TemperatureSchedule,
    pub seed: u64,
}

impl GameConfig {
    pub fn new(n: usize, k: u8, seed: u64) -> Self {
        GameConfig {
            n,
            k,
            max_len: n,
            vocab_factor: 3,
            embed_dim: 128,
            hidden_dim: 256,
            epochs: 300,
            batch_size: 32,
            learning_rate: 0.0005,
            temperature: TemperatureSchedule::default(),
            seed,
        }
    }

    /// Content symbols (excludes the end-of-sequence symbol).
    pub fn content_vocab(&self) -> usize {
        self.vocab_factor * (self.k as usize + 1)
    }

    /// Full vocabulary including the end-of-sequence symbol at index 0.
    pub fn vocab_size(&self) -> usize {
        self.content_vocab() + 1
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let ok = self.n >= 1
            && self.max_len >= 1
            && self.vocab_factor >= 1
            && self.vocab_size() >= self.k as usize + 2
            && self.embed_dim >= 1
            && self.hidden_dim >= 1
            && self.batch_size >= 1;
        if ok {
            Ok(())
        } else {
            Err(NnError::Checkpoint(format!("invalid game config: {self:?}")))
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mode {
    Train,
    Eval,
}

/// A message over the channel: per-step symbol distributions while
/// training, or the argmax symbol sequence truncated at the first
/// end-of-sequence symbol during evaluation.
#[derive(Clone, Debug)]
pub enum Message<F: Scalar> {
    Soft(Vec<Vec<F>>),
    Hard(Vec<u16>),
}

pub struct SenderParams<F: Scalar> {
    pub object_dense: Dense<F>,
    pub relevance_dense: Dense<F>,
    pub merge_dense: Dense<F>,
    pub gru: GruCell<F>,
    /// Symbol embedding table, `vocab_size x embed_dim`.
    pub embedding: Parameter<F>,
    /// Learned step-0 input.
    pub start: Parameter<F>,
    pub out_proj: Dense<F>,
    pub n: usize,
    pub k: u8,
    pub max_len: usize,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

pub struct ReceiverParams<F: Scalar> {
    /// Symbol embedding table, `vocab_size x embed_dim`.
    pub embedding: Parameter<F>,
    pub gru: GruCell<F>,
    /// Object encodings to hidden-sized embeddings.
    pub object_embed: Dense<F>,
    pub n: usize,
    pub k: u8,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

impl<F: Scalar> SenderParams<F> {
    pub fn new<R: Rng>(cfg: &GameConfig, rng: &mut R) -> Self {
        let nk = cfg.n * cfg.k as usize;
        let vocab = cfg.vocab_size();
        SenderParams {
            object_dense: Dense::new(nk, cfg.embed_dim, rng),
            relevance_dense: Dense::new(cfg.n, cfg.embed_dim, rng),
            merge_dense: Dense::new(2 * cfg.embed_dim, cfg.hidden_dim, rng),
            gru: GruCell::new(cfg.embed_dim, cfg.hidden_dim, rng),
            embedding: Parameter::normal(&[vocab, cfg.embed_dim], rng),
            start: Parameter::normal(&[cfg.embed_dim], rng),
            out_proj: Dense::new(cfg.hidden_dim, vocab, rng),
            n: cfg.n,
            k: cfg.k,
            max_len: cfg.max_len,
            vocab_size: vocab,
            embed_dim: cfg.embed_dim,
            hidden_dim: cfg.hidden_dim,
        }
    }

    pub fn for_each_param(&mut self, f: &mut dyn FnMut(String, &mut Parameter<F>)) {
        f("object_dense.w".into(), &mut self.object_dense.w);
        f("object_dense.b".into(), &mut self.object_dense.b);
        f("relevance_dense.w".into(), &mut self.relevance_dense.w);
        f("relevance_dense.b".into(), &mut self.relevance_dense.b);
        f("merge_dense.w".into(), &mut self.merge_dense.w);
        f("merge_dense.b".into(), &mut self.merge_dense.b);
        for (name, p) in self.gru.params_mut() {
            f(format!("gru.{name}"), p);
        }
        f("embedding".into(), &mut self.embedding);
        f("start".into(), &mut self.start);
        f("out_proj.w".into(), &mut self.out_proj.w);
        f("out_proj.b".into(), &mut self.out_proj.b);
    }
}

impl<F: Scalar> ReceiverParams<F> {
    pub fn new<R: Rng>(cfg: &GameConfig, rng: &mut R) -> Self {
        let nk = cfg.n * cfg.k as usize;
        let vocab = cfg.vocab_size();
        ReceiverParams {
            embedding: Parameter::normal(&[vocab, cfg.embed_dim], rng),
            gru: GruCell::new(cfg.embed_dim, cfg.hidden_dim, rng),
            object_embed: Dense::new(nk, cfg.hidden_dim, rng),
            n: cfg.n,
            k: cfg.k,
            vocab_size: vocab,
            embed_dim: cfg.embed_dim,
            hidden_dim: cfg.hidden_dim,
        }
    }

    pub fn for_each_param(&mut self, f: &mut dyn FnMut(String, &mut Parameter<F>)) {
        f("embedding".into(), &mut self.embedding);
        for (name, p) in self.gru.params_mut() {
            f(format!("gru.{name}"), p);
        }
        f("object_embed.w".into(), &mut self.object_embed.w);
        f("object_embed.b".into(), &mut self.object_embed.b);
    }
}

/// A trained sender/receiver pair together with its configuration.
pub struct TrainedPair<F: Scalar> {
    pub sender: SenderParams<F>,
    pub receiver: ReceiverParams<F>,
    pub config: GameConfig,
}

impl<F: Scalar> TrainedPair<F> {
    pub fn init(cfg: &GameConfig, rng: &mut impl Rng) -> Self {
        TrainedPair {
            sender: SenderParams::new(cfg, rng),
            receiver: ReceiverParams::new(cfg, rng),
            config: cfg.clone(),
        }
    }

    pub fn for_each_param(&mut self, f: &mut dyn FnMut(String, &mut Parameter<F>)) {
        self.sender
            .for_each_param(&mut |name, p| f(format!("sender.{name}"), p));
        self.receiver
            .for_each_param(&mut |name, p| f(format!("receiver.{name}"), p));
    }

    pub fn zero_grads(&mut self) {
        self.for_each_param(&mut |_, p| p.zero_grad());
    }
}

pub(crate) fn nhot_f<F: Scalar>(o: &ObjectVector, k: u8) -> Vec<F> {
    object_to_nhot(o, k)
        .into_iter()
        .map(|b| F::from_usize(b as usize))
        .collect()
}

fn relevance_f<F: Scalar>(r: &RelevanceVector) -> Vec<F> {
    r.0.iter()
        .map(|&b| if b { F::one() } else { F::zero() })
        .collect()
}

/// out = probs^T embedding  (probability-weighted average of embedding rows)
fn expect_embed<F: Scalar>(embedding: &[F], probs: &[F], out: &mut [F]) {
    out.iter_mut().for_each(|v| *v = F::zero());
    linalg::matvec_t_acc(embedding, probs, out);
}

struct SenderStep<F: Scalar> {
    cache: GruCache<F>,
    h: Vec<F>,
    y: Vec<F>,
}

pub struct SenderTrace<F: Scalar> {
    x_obj: Vec<F>,
    x_rel: Vec<F>,
    concat: Vec<F>,
    h0: Vec<F>,
    steps: Vec<SenderStep<F>>,
}

impl<F: Scalar> SenderTrace<F> {
    pub fn soft_message(&self) -> Vec<Vec<F>> {
        self.steps.iter().map(|s| s.y.clone()).collect()
    }
}

fn sender_initial_hidden<F: Scalar>(
    params: &SenderParams<F>,
    object: &ObjectVector,
    relevance: &RelevanceVector,
) -> (Vec<F>, Vec<F>, Vec<F>, Vec<F>) {
    let x_obj = nhot_f::<F>(object, params.k);
    let x_rel = relevance_f::<F>(relevance);
    let mut e_obj = vec![F::zero(); params.embed_dim];
    let mut e_rel = vec![F::zero(); params.embed_dim];
    params.object_dense.forward(&x_obj, &mut e_obj);
    params.relevance_dense.forward(&x_rel, &mut e_rel);
    let mut concat = e_obj;
    concat.extend_from_slice(&e_rel);
    let mut h0 = vec![F::zero(); params.hidden_dim];
    params.merge_dense.forward(&concat, &mut h0);
    h0.iter_mut().for_each(|v| *v = v.tanh());
    (x_obj, x_rel, concat, h0)
}

/// Training-mode unroll with injected per-step Gumbel noise. Always
/// produces `max_len` symbol distributions; the end-of-sequence symbol has
/// no stopping effect on relaxed samples.
pub fn sender_forward_train_with_noise<F: Scalar>(
    params: &SenderParams<F>,
    object: &ObjectVector,
    relevance: &RelevanceVector,
    tau: F,
    noise: &[Vec<F>],
) -> Result<SenderTrace<F>, NnError> {
    assert_eq!(noise.len(), params.max_len, "one noise vector per step");
    let (x_obj, x_rel, concat, h0) = sender_initial_hidden(params, object, relevance);

    let mut steps = Vec::with_capacity(params.max_len);
    let mut input = params.start.values().to_vec();
    let mut h_prev = h0.clone();
    for step_noise in noise {
        let mut h = vec![F::zero(); params.hidden_dim];
        let cache = params.gru.forward(&input, &h_prev, &mut h);
        let mut logits = vec![F::zero(); params.vocab_size];
        params.out_proj.forward(&h, &mut logits);
        let y = gumbel_softmax(&logits, step_noise, tau)?;
        let mut next_input = vec![F::zero(); params.embed_dim];
        expect_embed(params.embedding.values(), &y, &mut next_input);
        h_prev = h.clone();
        steps.push(SenderStep { cache, h, y });
        input = next_input;
    }

    Ok(SenderTrace {
        x_obj,
        x_rel,
        concat,
        h0,
        steps,
    })
}

/// Evaluation-mode unroll: greedy argmax symbols, stopping at the first
/// end-of-sequence symbol. Deterministic in the parameters and input.
pub fn sender_forward_eval<F: Scalar>(
    params: &SenderParams<F>,
    object: &ObjectVector,
    relevance: &RelevanceVector,
) -> Vec<u16> {
    let (_, _, _, h0) = sender_initial_hidden(params, object, relevance);
    let mut symbols = Vec::new();
    let mut input = params.start.values().to_vec();
    let mut h_prev = h0;
    for _ in 0..params.max_len {
        let mut h = vec![F::zero(); params.hidden_dim];
        params.gru.forward(&input, &h_prev, &mut h);
        let mut logits = vec![F::zero(); params.vocab_size];
        params.out_proj.forward(&h, &mut logits);
        let sym = argmax(&logits) as u16;
        if sym == EOS {
            break;
        }
        symbols.push(sym);
        let row = sym as usize * params.embed_dim;
        input.copy_from_slice(&params.embedding.values()[row..row + params.embed_dim]);
        h_prev = h;
    }
    symbols
}

/// Produces a message in the requested mode.
pub fn sender_forward<F: Scalar, R: Rng>(
    params: &SenderParams<F>,
    object: &ObjectVector,
    relevance: &RelevanceVector,
    tau: f64,
    rng: &mut R,
    mode: Mode,
) -> Result<Message<F>, NnError> {
    match mode {
        Mode::Train => {
            let noise: Vec<Vec<F>> = (0..params.max_len)
                .map(|_| sample_gumbel(params.vocab_size, rng))
                .collect();
            let trace = sender_forward_train_with_noise(
                params,
                object,
                relevance,
                F::from_f64(tau),
                &noise,
            )?;
            Ok(Message::Soft(trace.soft_message()))
        }
        Mode::Eval => Ok(Message::Hard(sender_forward_eval(
            params, object, relevance,
        ))),
    }
}

pub struct ReceiverTrace<F: Scalar> {
    steps: Vec<GruCache<F>>,
    /// Hidden state after each consumed symbol.
    hs: Vec<Vec<F>>,
    ys: Vec<Vec<F>>,
    cand_inputs: Vec<Vec<F>>,
    cand_embs: Vec<Vec<F>>,
    /// Candidate scores after each consumed symbol.
    scores: Vec<Vec<F>>,
}

fn receiver_scores_from_hidden<F: Scalar>(
    params: &ReceiverParams<F>,
    h_final: &[F],
    candidates: &[&ObjectVector],
) -> (Vec<Vec<F>>, Vec<Vec<F>>, Vec<F>) {
    let mut cand_inputs = Vec::with_capacity(candidates.len());
    let mut cand_embs = Vec::with_capacity(candidates.len());
    let mut scores = Vec::with_capacity(candidates.len());
    for cand in candidates {
        let x = nhot_f::<F>(cand, params.k);
        let mut emb = vec![F::zero(); params.hidden_dim];
        params.object_embed.forward(&x, &mut emb);
        scores.push(linalg::dot(&emb, h_final));
        cand_inputs.push(x);
        cand_embs.push(emb);
    }
    (cand_inputs, cand_embs, scores)
}

/// Training-mode receiver over a soft message. Candidates are scored after
/// every consumed symbol; the game weights those per-step scores by the
/// probability mass of the message ending there.
pub fn receiver_forward_train<F: Scalar>(
    params: &ReceiverParams<F>,
    ys: &[Vec<F>],
    candidates: &[&ObjectVector],
) -> ReceiverTrace<F> {
    let mut cand_inputs = Vec::with_capacity(candidates.len());
    let mut cand_embs: Vec<Vec<F>> = Vec::with_capacity(candidates.len());
    for cand in candidates {
        let x = nhot_f::<F>(cand, params.k);
        let mut emb = vec![F::zero(); params.hidden_dim];
        params.object_embed.forward(&x, &mut emb);
        cand_inputs.push(x);
        cand_embs.push(emb);
    }

    let mut h = vec![F::zero(); params.hidden_dim];
    let mut steps = Vec::with_capacity(ys.len());
    let mut hs = Vec::with_capacity(ys.len());
    let mut scores = Vec::with_capacity(ys.len());
    for y in ys {
        let mut input = vec![F::zero(); params.embed_dim];
        expect_embed(params.embedding.values(), y, &mut input);
        let mut h_next = vec![F::zero(); params.hidden_dim];
        let cache = params.gru.forward(&input, &h, &mut h_next);
        steps.push(cache);
        scores.push(
            cand_embs
                .iter()
                .map(|emb| linalg::dot(emb, &h_next))
                .collect(),
        );
        hs.push(h_next.clone());
        h = h_next;
    }
    ReceiverTrace {
        steps,
        hs,
        ys: ys.to_vec(),
        cand_inputs,
        cand_embs,
        scores,
    }
}

/// Probability that the message ends at each step: the end-of-sequence
/// mass at that step times the mass of not having ended before; the last
/// step absorbs the leftover, so the weights sum to one.
pub fn end_position_weights<F: Scalar>(ys: &[Vec<F>]) -> Vec<F> {
    let len = ys.len();
    let mut weights = vec![F::zero(); len];
    let mut prefix = F::one();
    for (t, y) in ys.iter().enumerate() {
        let e = y[EOS as usize];
        if t + 1 == len {
            weights[t] = prefix;
        } else {
            weights[t] = e * prefix;
            prefix = prefix * (F::one() - e);
        }
    }
    weights
}

/// Evaluation-mode receiver over a hard message; returns selection
/// probabilities over the candidates.
pub fn receiver_forward_eval<F: Scalar>(
    params: &ReceiverParams<F>,
    symbols: &[u16],
    candidates: &[&ObjectVector],
) -> Vec<F> {
    let mut h = vec![F::zero(); params.hidden_dim];
    for &sym in symbols {
        let row = sym as usize * params.embed_dim;
        let input = &params.embedding.values()[row..row + params.embed_dim];
        let mut h_next = vec![F::zero(); params.hidden_dim];
        params.gru.forward(input, &h, &mut h_next);
        h = h_next;
    }
    let (_, _, mut scores) = receiver_scores_from_hidden(params, &h, candidates);
    softmax_in_place(&mut scores);
    scores
}

/// Selection probabilities for a message in either mode. Soft messages
/// yield the end-position-weighted mixture of the per-step selections.
pub fn receiver_forward<F: Scalar>(
    params: &ReceiverParams<F>,
    message: &Message<F>,
    candidates: &[&ObjectVector],
) -> Vec<F> {
    match message {
        Message::Soft(ys) => {
            let trace = receiver_forward_train(params, ys, candidates);
            let weights = end_position_weights(ys);
            let mut probs = vec![F::zero(); candidates.len()];
            for (scores, &w) in trace.scores.iter().zip(&weights) {
                let mut p = scores.clone();
                softmax_in_place(&mut p);
                linalg::axpy(&mut probs, w, &p);
            }
            probs
        }
        Message::Hard(symbols) => receiver_forward_eval(params, symbols, candidates),
    }
}

/// Everything the backward pass needs from one training round.
pub struct GameTraces<F: Scalar> {
    pub sender: SenderTrace<F>,
    receiver: ReceiverTrace<F>,
    /// End-position weights derived from the per-step EOS mass.
    weights: Vec<F>,
    /// Cross-entropy at each end position.
    step_losses: Vec<F>,
    /// End-position-weighted selection probabilities.
    probs: Vec<F>,
    target_pos: usize,
    tau: F,
}

/// Places the target at `target_pos` among the distractors.
pub fn arrange_candidates(sample: &GameSample, target_pos: usize) -> Vec<&ObjectVector> {
    let mut candidates: Vec<&ObjectVector> = Vec::with_capacity(sample.distractors.len() + 1);
    candidates.extend(sample.distractors.iter());
    candidates.insert(target_pos, &sample.target);
    candidates
}

/// Differentiable round with injected noise: sender message, per-step
/// receiver selections, and the cross-entropy against the target position
/// in expectation over the message's end position.
pub fn game_forward_with_noise<F: Scalar>(
    sender: &SenderParams<F>,
    receiver: &ReceiverParams<F>,
    sample: &GameSample,
    target_pos: usize,
    tau: F,
    noise: &[Vec<F>],
) -> Result<(F, GameTraces<F>), NnError> {
    let strace =
        sender_forward_train_with_noise(sender, &sample.sender_object, &sample.relevance, tau, noise)?;
    let ys = strace.soft_message();
    let candidates = arrange_candidates(sample, target_pos);
    let rtrace = receiver_forward_train(receiver, &ys, &candidates);
    let weights = end_position_weights(&ys);

    let mut loss = F::zero();
    let mut step_losses = Vec::with_capacity(rtrace.scores.len());
    let mut probs = vec![F::zero(); candidates.len()];
    for (scores, &w) in rtrace.scores.iter().zip(&weights) {
        let (step_loss, _) = softmax_cross_entropy(scores, target_pos)?;
        loss += w * step_loss;
        step_losses.push(step_loss);
        let mut p = scores.clone();
        softmax_in_place(&mut p);
        linalg::axpy(&mut probs, w, &p);
    }
    Ok((
        loss,
        GameTraces {
            sender: strace,
            receiver: rtrace,
            weights,
            step_losses,
            probs,
            target_pos,
            tau,
        },
    ))
}

/// Backpropagates one round, accumulating parameter gradients.
pub fn game_backward<F: Scalar>(
    sender: &mut SenderParams<F>,
    receiver: &mut ReceiverParams<F>,
    traces: &GameTraces<F>,
) {
    let hidden = receiver.hidden_dim;
    let embed = receiver.embed_dim;
    let steps = traces.receiver.steps.len();

    // Per-step score gradients: w_t * (softmax(scores_t) - onehot(target)).
    // score_t_i = dot(emb_i, h_t), so these feed both the candidate
    // embeddings and the per-step hidden states.
    let mut dh_step: Vec<Vec<F>> = vec![vec![F::zero(); hidden]; steps];
    let mut demb: Vec<Vec<F>> = vec![vec![F::zero(); hidden]; traces.receiver.cand_embs.len()];
    for t in 0..steps {
        let mut p = traces.receiver.scores[t].clone();
        softmax_in_place(&mut p);
        p[traces.target_pos] -= F::one();
        let w = traces.weights[t];
        for (i, &grad_p) in p.iter().enumerate() {
            let ds = w * grad_p;
            linalg::axpy(&mut dh_step[t], ds, &traces.receiver.cand_embs[i]);
            linalg::axpy(&mut demb[i], ds, &traces.receiver.hs[t]);
        }
    }
    for (i, demb_i) in demb.iter().enumerate() {
        receiver
            .object_embed
            .backward_params_only(&traces.receiver.cand_inputs[i], demb_i);
    }

    // Receiver GRU back through time; collect soft-symbol gradients.
    let mut dy_recv: Vec<Vec<F>> = vec![Vec::new(); steps];
    let mut dh_carry = vec![F::zero(); hidden];
    for t in (0..steps).rev() {
        let dh = &mut dh_step[t];
        linalg::axpy(dh, F::one(), &dh_carry);
        let mut dinput = vec![F::zero(); embed];
        let mut dh_prev = vec![F::zero(); hidden];
        receiver
            .gru
            .backward(&traces.receiver.steps[t], dh, &mut dinput, &mut dh_prev);
        dh_carry = dh_prev;

        // input_t = y_t^T E
        let mut dy = vec![F::zero(); receiver.vocab_size];
        linalg::matvec(receiver.embedding.values(), &dinput, &mut dy);
        linalg::outer_acc(
            receiver.embedding.grad_mut(),
            &traces.receiver.ys[t],
            &dinput,
        );
        dy_recv[t] = dy;
    }

    // End-position weights depend on the per-step EOS mass: for
    // t <= L-2, w_t = e_t * prod_{s<t}(1 - e_s); the last step's weight is
    // the leftover prod_{s<L-1}(1 - e_s) and does not depend on e_{L-1}.
    let eos = EOS as usize;
    let e: Vec<F> = traces.receiver.ys.iter().map(|y| y[eos]).collect();
    let partial = |upto: usize, excl: usize| -> F {
        let mut acc = F::one();
        for (s, &es) in e.iter().enumerate().take(upto) {
            if s != excl {
                acc = acc * (F::one() - es);
            }
        }
        acc
    };
    for s in 0..steps {
        let mut de = F::zero();
        if s + 1 < steps {
            de += traces.step_losses[s] * partial(s, steps);
            for (t, &lt) in traces.step_losses.iter().enumerate().skip(s + 1) {
                if t + 1 < steps {
                    de -= lt * e[t] * partial(t, s);
                } else {
                    de -= lt * partial(t, s);
                }
            }
        }
        dy_recv[s][eos] += de;
    }

    // Sender back through time. h gradients arrive from the logits path at
    // the same step and from the recurrence at the following step; y
    // gradients arrive from the receiver and from the next step's input
    // embedding.
    let s_hidden = sender.hidden_dim;
    let s_embed = sender.embed_dim;
    let mut dh_carry = vec![F::zero(); s_hidden];
    let mut dinp_next: Option<Vec<F>> = None;
    for t in (0..traces.sender.steps.len()).rev() {
        let step = &traces.sender.steps[t];
        let mut dy = dy_recv[t].clone();
        if let Some(dinp) = &dinp_next {
            let mut dy_embed = vec![F::zero(); sender.vocab_size];
            linalg::matvec(sender.embedding.values(), dinp, &mut dy_embed);
            for (a, b) in dy.iter_mut().zip(&dy_embed) {
                *a += *b;
            }
            linalg::outer_acc(sender.embedding.grad_mut(), &step.y, dinp);
        }

        let mut dlogits = vec![F::zero(); sender.vocab_size];
        gumbel_softmax_backward(&step.y, &dy, traces.tau, &mut dlogits);
        sender.out_proj.backward(&step.h, &dlogits, &mut dh_carry);

        let mut dinput = vec![F::zero(); s_embed];
        let mut dh_prev = vec![F::zero(); s_hidden];
        sender
            .gru
            .backward(&step.cache, &dh_carry, &mut dinput, &mut dh_prev);
        dh_carry = dh_prev;
        dinp_next = Some(dinput);
    }
    if let Some(dstart) = dinp_next {
        linalg::axpy(sender.start.grad_mut(), F::one(), &dstart);
    }

    // h0 = tanh(merge(concat(e_obj, e_rel)))
    let dh0_pre: Vec<F> = dh_carry
        .iter()
        .zip(&traces.sender.h0)
        .map(|(&d, &h)| d * (F::one() - h * h))
        .collect();
    let mut dconcat = vec![F::zero(); 2 * s_embed];
    sender
        .merge_dense
        .backward(&traces.sender.concat, &dh0_pre, &mut dconcat);
    sender
        .object_dense
        .backward_params_only(&traces.sender.x_obj, &dconcat[..s_embed]);
    sender
        .relevance_dense
        .backward_params_only(&traces.sender.x_rel, &dconcat[s_embed..]);
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

/// One complete round in the requested mode; returns the loss and the
/// receiver's selected candidate index. Training mode samples the target
/// position and channel noise from `rng`; evaluation is deterministic with
/// the target at position `eval_target_pos`.
pub fn play_round<F: Scalar, R: Rng>(
    sender: &SenderParams<F>,
    receiver: &ReceiverParams<F>,
    sample: &GameSample,
    tau: f64,
    rng: &mut R,
    mode: Mode,
    eval_target_pos: usize,
) -> Result<(F, usize, usize), NnError> {
    match mode {
        Mode::Train => {
            let target_pos = rng.random_range(0..=sample.distractors.len());
            let noise: Vec<Vec<F>> = (0..sender.max_len)
                .map(|_| sample_gumbel(sender.vocab_size, rng))
                .collect();
            let (loss, traces) = game_forward_with_noise(
                sender,
                receiver,
                sample,
                target_pos,
                F::from_f64(tau),
                &noise,
            )?;
            Ok((loss, argmax(&traces.probs), target_pos))
        }
        Mode::Eval => {
            let target_pos = eval_target_pos.min(sample.distractors.len());
            let symbols = sender_forward_eval(sender, &sample.sender_object, &sample.relevance);
            let candidates = arrange_candidates(sample, target_pos);
            let probs = receiver_forward_eval(receiver, &symbols, &candidates);
            let (loss, _) = softmax_cross_entropy(
                &probs.iter().map(|&p| p.ln()).collect::<Vec<F>>(),
                target_pos,
            )?;
            Ok((loss, argmax(&probs), target_pos))
        }
    }
}
