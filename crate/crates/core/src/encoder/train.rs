//! Adam, the early-stopping training loop, batch inference and the
//! finite-difference gradient check.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{backprop_into, forward, loss, EncoderParameters, Prediction};
use super::{EncoderError, Hyperparams};
use crate::corpus::{Instance, Label};
use crate::exec::Exec;
use crate::tokens::{to_model_input, InputSequence, Vocabulary};

/// Half-width of the uniform initialization range.
pub const INIT_SCALE: f64 = 0.1;

pub const MIN_TRAINING_INSTANCES: usize = 10;

// Independent ChaCha streams derived from the master seed.
const STREAM_INIT: u64 = 0;
const STREAM_SPLIT: u64 = 1;
const STREAM_EPOCH: u64 = 2;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: EncoderParameters,
    v: EncoderParameters,
}

impl Adam {
    pub fn new(params: &EncoderParameters, learning_rate: f64) -> Self {
        let mut zero = params.clone();
        zero.scale(0.0);
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: zero.clone(),
            v: zero,
        }
    }

    /// One update. Tensors named in `frozen` are left untouched.
    pub fn step(&mut self, params: &mut EncoderParameters, grads: &EncoderParameters, frozen: &[&str]) {
        self.step += 1;
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.epsilon, self.learning_rate);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let grads: Vec<&[f64]> = grads.tensors().into_iter().map(|t| t.data).collect();
        let mut ms: Vec<&mut [f64]> = Vec::new();
        collect_mut(&mut self.m, &mut ms);
        let mut vs: Vec<&mut [f64]> = Vec::new();
        collect_mut(&mut self.v, &mut vs);
        let mut i = 0;
        params.for_each_tensor_mut(|name, theta| {
            let (g, m, v) = (grads[i], &mut ms[i], &mut vs[i]);
            i += 1;
            if frozen.contains(&name) {
                return;
            }
            for k in 0..theta.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                theta[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        });
    }
}

fn collect_mut<'a>(p: &'a mut EncoderParameters, out: &mut Vec<&'a mut [f64]>) {
    let mut refs: Vec<&'a mut [f64]> = vec![
        &mut p.token_embedding.data,
        &mut p.segment_embedding.data,
        &mut p.position_embedding.data,
    ];
    for l in p.layers.iter_mut() {
        refs.push(&mut l.query.data);
        refs.push(&mut l.key.data);
        refs.push(&mut l.value.data);
        refs.push(&mut l.output.data);
        refs.push(&mut l.ln1_scale);
        refs.push(&mut l.ln1_shift);
        refs.push(&mut l.ffn_w1.data);
        refs.push(&mut l.ffn_b1);
        refs.push(&mut l.ffn_w2.data);
        refs.push(&mut l.ffn_b2);
        refs.push(&mut l.ln2_scale);
        refs.push(&mut l.ln2_shift);
    }
    refs.push(&mut p.classifier_weight.data);
    refs.push(&mut p.classifier_bias);
    out.extend(refs);
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-example loss seen during the epoch.
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub train_size: usize,
    pub val_size: usize,
    pub stopped_early: bool,
}

fn input_for(inst: &Instance, vocab: &Vocabulary, hp: &Hyperparams) -> InputSequence {
    to_model_input(&inst.tokens, vocab, hp.max_len, hp.truncate)
}

/// Sum of per-example gradients in index order, divided by the batch size,
/// plus the per-example losses.
fn batch_gradient(
    batch: &[(&InputSequence, Label)],
    params: &EncoderParameters,
    hp: &Hyperparams,
    exec: Exec,
) -> Result<(EncoderParameters, Vec<f64>), EncoderError> {
    let per_example = exec.map(batch, |&(input, label)| {
        let mut g = EncoderParameters::zeros(params.vocab_size(), hp);
        backprop_into(input, label, params, hp, &mut g).map(|l| (l, g))
    });
    let mut total = EncoderParameters::zeros(params.vocab_size(), hp);
    let mut losses = Vec::with_capacity(batch.len());
    for r in per_example {
        let (l, g) = r?;
        total.add_assign(&g);
        losses.push(l);
    }
    total.scale(1.0 / batch.len() as f64);
    Ok((total, losses))
}

/// Trains from a seeded initialization and returns the parameters of the
/// epoch with the best validation accuracy.
pub fn train(
    corpus: &[Instance],
    vocab: &Vocabulary,
    hp: &Hyperparams,
    exec: Exec,
) -> Result<(EncoderParameters, TrainingLog), EncoderError> {
    hp.validate()?;
    if corpus.len() < MIN_TRAINING_INSTANCES {
        return Err(EncoderError::DegenerateCorpus(format!(
            "{} instances, need at least {MIN_TRAINING_INSTANCES}",
            corpus.len()
        )));
    }
    let mut labels = Vec::with_capacity(corpus.len());
    for inst in corpus {
        match inst.label {
            Some(l) => labels.push(l),
            None => {
                return Err(EncoderError::DegenerateCorpus(format!(
                    "instance `{}` is unlabeled",
                    inst.id
                )))
            }
        }
    }
    if !labels.contains(&Label::Clean) || !labels.contains(&Label::Buggy) {
        return Err(EncoderError::DegenerateCorpus("only one class present".into()));
    }

    let inputs: Vec<InputSequence> = corpus.iter().map(|i| input_for(i, vocab, hp)).collect();
    let mut params = EncoderParameters::init(vocab.len(), hp, &mut rng_for(hp.seed, STREAM_INIT), INIT_SCALE);

    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut rng_for(hp.seed, STREAM_SPLIT));
    let val_size = ((corpus.len() as f64 * hp.val_fraction).round() as usize).clamp(1, corpus.len() - 1);
    let (val_idx, train_idx) = order.split_at(val_size);
    let val_idx = val_idx.to_vec();
    let mut train_idx = train_idx.to_vec();

    let mut adam = Adam::new(&params, hp.learning_rate);
    let mut log = TrainingLog {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_accuracy: f64::NEG_INFINITY,
        train_size: train_idx.len(),
        val_size,
        stopped_early: false,
    };
    let mut best = params.clone();
    let mut since_best = 0;

    for epoch in 1..=hp.max_epochs {
        train_idx.shuffle(&mut rng_for(hp.seed, STREAM_EPOCH + epoch as u64));
        let mut loss_sum = 0.0;
        for chunk in train_idx.chunks(hp.batch_size) {
            let batch: Vec<(&InputSequence, Label)> = chunk.iter().map(|&i| (&inputs[i], labels[i])).collect();
            let (grads, losses) = batch_gradient(&batch, &params, hp, exec)?;
            loss_sum += losses.iter().sum::<f64>();
            adam.step(&mut params, &grads, &[]);
        }

        let preds = exec.map(&val_idx, |&i| forward(&inputs[i], &params, hp));
        let mut correct = 0usize;
        for (p, &i) in preds.into_iter().zip(&val_idx) {
            if Prediction::from_probs("", p?).label == labels[i] {
                correct += 1;
            }
        }
        let val_accuracy = correct as f64 / val_idx.len() as f64;
        log.epochs.push(EpochLog {
            epoch,
            train_loss: loss_sum / train_idx.len() as f64,
            val_accuracy,
        });
        if val_accuracy > log.best_val_accuracy {
            log.best_val_accuracy = val_accuracy;
            log.best_epoch = epoch;
            best = params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= hp.patience {
                log.stopped_early = epoch < hp.max_epochs;
                break;
            }
        }
    }
    Ok((best, log))
}

/// Prediction for one instance.
pub fn predict(
    inst: &Instance,
    vocab: &Vocabulary,
    params: &EncoderParameters,
    hp: &Hyperparams,
) -> Result<Prediction, EncoderError> {
    let probs = forward(&input_for(inst, vocab, hp), params, hp)?;
    Ok(Prediction::from_probs(inst.id.clone(), probs))
}

/// Predictions for many instances, in input order.
pub fn predict_batch(
    instances: &[Instance],
    vocab: &Vocabulary,
    params: &EncoderParameters,
    hp: &Hyperparams,
    exec: Exec,
) -> Result<Vec<Prediction>, EncoderError> {
    exec.map(instances, |inst| predict(inst, vocab, params, hp))
        .into_iter()
        .collect()
}

fn mean_loss(batch: &[(InputSequence, Label)], params: &EncoderParameters, hp: &Hyperparams) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|(x, y)| loss(forward(x, params, hp).expect("gradient check forward"), *y))
        .sum();
    total / batch.len() as f64
}

const FD_STEP: f64 = 1e-5;
const REL_FLOOR: f64 = 1e-8;

/// Largest relative error between backpropagated and central-difference
/// gradients of the mean batch loss, over every parameter entry.
pub fn gradient_check(
    params: &EncoderParameters,
    batch: &[(InputSequence, Label)],
    hp: &Hyperparams,
) -> f64 {
    assert!(!batch.is_empty(), "gradient check needs a non-empty batch");
    let mut analytic = EncoderParameters::zeros(params.vocab_size(), hp);
    for (x, y) in batch {
        backprop_into(x, *y, params, hp, &mut analytic).expect("gradient check backprop");
    }
    analytic.scale(1.0 / batch.len() as f64);
    let analytic: Vec<f64> = analytic.tensors().iter().flat_map(|t| t.data.iter().copied()).collect();

    let errors = Exec::default().map_range(analytic.len(), |flat| {
        let at = |delta: f64| {
            let mut p = params.clone();
            let mut offset = 0;
            p.for_each_tensor_mut(|_, data| {
                if (offset..offset + data.len()).contains(&flat) {
                    data[flat - offset] += delta;
                }
                offset += data.len();
            });
            mean_loss(batch, &p, hp)
        };
        let numeric = (at(FD_STEP) - at(-FD_STEP)) / (2.0 * FD_STEP);
        let a = analytic[flat];
        (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR)
    });
    errors.into_iter().fold(0.0, f64::max)
}
