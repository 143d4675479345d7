//! Training: vocabulary handling, per-sentence and per-batch loss with
//! analytic gradients, and the epoch loop with dev-set model selection
//! and early stopping.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decode::{joint_decode, DecodeConfig};
use crate::error::{Result, UnireError};
use crate::eval::strict_eval_corpus;
use crate::label::{render_gold_table, GoldTable, LabelSpace, SentenceAnnotation};
use crate::loss::{loss_entry, loss_imp, loss_sym, LossReport};
use crate::model::{
    apply_dropout_mask, backward, forward, softmax_backward, softmax_cells, softmax_cells_dropped,
    Dropout, ForwardCache, Layout, ModelParams, TrainConfig, UNK_ID,
};
use crate::optim::{optimizer_step, OptimizerState};

/// Token-string to id mapping; id 0 is PAD, id 1 is UNK.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn build(corpus: &[SentenceAnnotation]) -> Self {
        let mut tokens = vec!["<pad>".to_string(), "<unk>".to_string()];
        let mut index: HashMap<String, usize> =
            tokens.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        for ann in corpus {
            for tok in &ann.tokens {
                if !index.contains_key(tok) {
                    index.insert(tok.clone(), tokens.len());
                    tokens.push(tok.clone());
                }
            }
        }
        Vocab { tokens, index }
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        Vocab { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn encode(&self, ann: &SentenceAnnotation) -> Vec<usize> {
        ann.tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Rebuilds the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.tokens.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
    }
}

/// Loss and gradient of one sentence. The entry loss sees the dropped
/// probabilities; the symmetry and implication losses see the clean ones.
pub fn sentence_loss_and_grad(
    params: &ModelParams,
    cache: &ForwardCache,
    gold: &GoldTable,
    ls: &LabelSpace,
    cfg: &TrainConfig,
) -> Result<(LossReport, Vec<f64>)> {
    let p_dropped = softmax_cells_dropped(&cache.scores);
    let (l_entry, mut d_entry, _clamped) = loss_entry(&p_dropped, gold)?;
    apply_dropout_mask(&cache.scores, &mut d_entry);

    let p_clean = softmax_cells(&cache.scores);
    let mut d_prob = vec![0.0; p_clean.values().len()];
    let mut l_sym = 0.0;
    let mut l_imp = 0.0;
    if cfg.use_symmetry_loss {
        let (l, g) = loss_sym(&p_clean, ls);
        l_sym = l;
        for (acc, v) in d_prob.iter_mut().zip(g) {
            *acc += v;
        }
    }
    if cfg.use_implication_loss {
        let (l, g) = loss_imp(&p_clean, ls);
        l_imp = l;
        for (acc, v) in d_prob.iter_mut().zip(g) {
            *acc += v;
        }
    }
    let mut d_logits = softmax_backward(&p_clean, &d_prob);
    for (acc, v) in d_logits.iter_mut().zip(d_entry) {
        *acc += v;
    }
    let grads = backward(params, cache, &d_logits);
    let report = LossReport { l_entry, l_sym, l_imp, total: l_entry + l_sym + l_imp };
    Ok((report, grads))
}

/// Mean loss and gradient over a batch of sentences; dropout draws come
/// from `rng` in sentence order.
pub fn batch_loss_and_grad(
    params: &ModelParams,
    batch: &[(Vec<usize>, GoldTable)],
    ls: &LabelSpace,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(LossReport, Vec<f64>)> {
    if batch.is_empty() {
        return Err(UnireError::InvalidArgument("empty batch".into()));
    }
    let mut total = LossReport::default();
    let mut grads = vec![0.0; params.data.len()];
    for (tokens, gold) in batch {
        let cache = forward(
            params,
            tokens,
            Dropout::On { rate: cfg.logit_dropout_rate, rng },
        )?;
        let (report, g) = sentence_loss_and_grad(params, &cache, gold, ls, cfg)?;
        total.add(&report);
        for (acc, v) in grads.iter_mut().zip(g) {
            *acc += v;
        }
    }
    let scale = 1.0 / batch.len() as f64;
    total.scale(scale);
    for g in &mut grads {
        *g *= scale;
    }
    Ok((total, grads))
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_entry: f64,
    pub l_sym: f64,
    pub l_imp: f64,
    pub dev_ent_f1: f64,
    pub dev_rel_f1: f64,
    pub lr: f64,
}

pub struct TrainOutput {
    pub params: ModelParams,
    pub vocab: Vocab,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev_f1: f64,
}

/// Trains up to `max_epochs`, selecting the checkpoint with the best
/// averaged dev entity/relation F1 and stopping once `patience` epochs
/// pass without improvement.
pub fn train(
    train_set: &[SentenceAnnotation],
    dev_set: &[SentenceAnnotation],
    ls: &LabelSpace,
    cfg: &TrainConfig,
    decode_cfg: &DecodeConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(UnireError::InvalidArgument("empty train or dev split".into()));
    }
    let vocab = Vocab::build(train_set);
    let layout = Layout {
        vocab: vocab.len(),
        d_emb: cfg.d_emb,
        d: cfg.d,
        num_labels: ls.num_labels(),
        mlp_depth: cfg.mlp_depth,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(layout, &mut rng);

    let encoded: Vec<(Vec<usize>, GoldTable)> = train_set
        .iter()
        .map(|ann| Ok((vocab.encode(ann), render_gold_table(ann, ls)?)))
        .collect::<Result<_>>()?;
    let dev_tokens: Vec<Vec<usize>> = dev_set.iter().map(|ann| vocab.encode(ann)).collect();

    let steps_per_epoch = encoded.len().div_ceil(cfg.batch_size);
    let total_steps = steps_per_epoch * cfg.max_epochs;
    let mut state = OptimizerState::new(params.data.len(), total_steps);

    let mut best: Option<(f64, ModelParams, usize)> = None;
    let mut epochs_since_improvement = 0;
    let mut log = Vec::new();
    let mut order: Vec<usize> = (0..encoded.len()).collect();

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = LossReport::default();
        let mut last_lr = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(Vec<usize>, GoldTable)> =
                chunk.iter().map(|&k| encoded[k].clone()).collect();
            let (report, grads) = batch_loss_and_grad(&params, &batch, ls, cfg, &mut rng)?;
            if !report.total.is_finite() {
                return Err(UnireError::Numeric {
                    location: format!("epoch {epoch}"),
                    message: format!("training diverged, loss = {}", report.total),
                });
            }
            last_lr = cfg.learning_rate
                * crate::optim::schedule_factor(state.step, state.total_steps, cfg.warmup_ratio);
            let mut weighted = report;
            weighted.scale(chunk.len() as f64);
            epoch_loss.add(&weighted);
            optimizer_step(&mut params, &grads, &mut state, cfg);
        }
        epoch_loss.scale(1.0 / encoded.len() as f64);

        // Dev evaluation with the joint decoder.
        let preds: Vec<_> = dev_tokens
            .iter()
            .map(|tokens| {
                let cache = forward::<ChaCha8Rng>(&params, tokens, Dropout::Off)?;
                Ok(joint_decode(&softmax_cells(&cache.scores), ls, decode_cfg))
            })
            .collect::<Result<_>>()?;
        let report = strict_eval_corpus(&preds, dev_set, ls)?;
        let dev_ent_f1 = report.entity.f1();
        let dev_rel_f1 = report.relation.f1();
        let dev_avg = 0.5 * (dev_ent_f1 + dev_rel_f1);

        log.push(EpochRecord {
            epoch,
            l_entry: epoch_loss.l_entry,
            l_sym: epoch_loss.l_sym,
            l_imp: epoch_loss.l_imp,
            dev_ent_f1,
            dev_rel_f1,
            lr: last_lr,
        });

        let improved = match &best {
            None => true,
            Some((f1, _, _)) => dev_avg > *f1,
        };
        if improved {
            best = Some((dev_avg, params.clone(), epoch));
            epochs_since_improvement = 0;
        } else {
            epochs_since_improvement += 1;
            if epochs_since_improvement > cfg.patience {
                break;
            }
        }
    }

    let (best_dev_f1, best_params, best_epoch) = best.expect("at least one epoch ran");
    Ok(TrainOutput { params: best_params, vocab, log, best_epoch, best_dev_f1 })
}
