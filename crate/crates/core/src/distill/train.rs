use std::time::Instant;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::data::{iterate_batches, Instance};
use crate::distill::loss::{ctr_term, kd_term, KdSpace};
use crate::error::{config_err, Error, Result};
use crate::metrics::{metrics_from_logits, EvalMetrics};
use crate::model::Model;
use crate::numcore::{adam_step, Grads};

pub const DEFAULT_BATCH_SIZE: usize = 256;
pub const DEFAULT_PATIENCE: usize = 3;
pub const DEFAULT_L2: f64 = 1e-5;
pub const DEFAULT_LR: f64 = 1e-3;

/// Hyperparameters of one training stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Epochs without a validation-AUC improvement before stopping.
    pub patience: usize,
    pub l2: f64,
    /// Seed of the per-epoch shuffling.
    pub seed: u64,
}

impl Default for StageConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            lr: DEFAULT_LR,
            batch_size: DEFAULT_BATCH_SIZE,
            patience: DEFAULT_PATIENCE,
            l2: DEFAULT_L2,
            seed: 0,
        }
    }
}

impl StageConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(config_err(format!(
                "learning rate must be finite and >= 0, got {}",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(config_err("batch size must be at least 1"));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(config_err(format!(
                "L2 weight must be finite and >= 0, got {}",
                self.l2
            )));
        }
        Ok(())
    }
}

/// Training objective of a stage.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// Cross-entropy against the labels.
    Ctr,
    /// `alpha * KD + beta * CTR`, with `teacher_logits[k]` aligned to the
    /// `k`-th training instance.
    Distill {
        teacher_logits: &'a [f64],
        alpha: f64,
        beta: f64,
        space: KdSpace,
    },
}

impl Objective<'_> {
    /// Loss, KD part and derivative for one instance.
    #[inline]
    fn term(&self, position: usize, label: f64, logit: f64) -> (f64, f64, f64) {
        match *self {
            Objective::Ctr => {
                let (l, g) = ctr_term(label, logit);
                (l, 0.0, g)
            }
            Objective::Distill {
                teacher_logits,
                alpha,
                beta,
                space,
            } => {
                let (kd, gk) = kd_term(space, teacher_logits[position], logit);
                let (ctr, gc) = ctr_term(label, logit);
                (alpha * kd + beta * ctr, kd, alpha * gk + beta * gc)
            }
        }
    }

    fn has_kd(&self) -> bool {
        matches!(self, Objective::Distill { .. })
    }
}

/// One line of a stage report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training objective: at epoch 0 it is evaluated at the initial
    /// parameters; afterwards it is accumulated over the epoch's batches.
    pub loss: f64,
    pub val_auc: f64,
    pub val_logloss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kd_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub stage: String,
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters the model holds after the stage (argmax
    /// validation AUC, epoch 0 meaning the starting parameters).
    pub best_epoch: usize,
    pub best_val_auc: f64,
    pub wall_time_s: f64,
}

impl TrainReport {
    /// One JSON object per epoch. Timing is left out so that reruns are
    /// byte-identical.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn final_record(&self) -> &EpochRecord {
        self.records.last().expect("a report has at least the epoch-0 record")
    }
}

fn evaluate_objective(model: &Model, train: &[Instance], objective: &Objective) -> Result<(f64, f64)> {
    let logits = model.logits(train)?;
    let mut loss = 0.0;
    let mut kd = 0.0;
    for (k, (inst, &z)) in train.iter().zip(&logits).enumerate() {
        let (l, kdl, _) = objective.term(k, f64::from(inst.label), z);
        loss += l;
        kd += kdl;
    }
    let n = train.len() as f64;
    Ok((loss / n, kd / n))
}

/// Mean objective over `instances` and its gradient with respect to every
/// parameter (no L2 term). `instances[k]` pairs with teacher logit `k`.
pub fn objective_and_grads(model: &Model, instances: &[Instance], objective: &Objective) -> Result<(f64, Grads)> {
    let mut grads = Grads::zeros_like(&model.params);
    let scale = 1.0 / instances.len() as f64;
    let mut total = 0.0;
    let (mut emb, mut demb) = (Vec::new(), Vec::new());
    for (k, inst) in instances.iter().enumerate() {
        let label = f64::from(inst.label);
        let mut loss = 0.0;
        model.accumulate(
            &inst.indices,
            |z| {
                let (l, _, g) = objective.term(k, label, z);
                loss = l;
                g * scale
            },
            &mut grads,
            &mut emb,
            &mut demb,
        )?;
        total += loss;
    }
    Ok((total * scale, grads))
}

fn check_finite(value: f64, what: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence { param: what.into() })
    }
}

/// Run one training stage with Adam on the model's trainable parameters.
///
/// The optimizer state is reset first. After every epoch the validation AUC
/// is measured; the parameters with the best AUC (including the starting
/// point) are restored at the end. Training stops early after `patience`
/// epochs without improvement.
pub fn train_stage(
    stage: &str,
    model: &mut Model,
    train: &[Instance],
    val: &[Instance],
    objective: &Objective,
    cfg: &StageConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(config_err("training and validation parts must be non-empty"));
    }
    if let Objective::Distill {
        teacher_logits,
        alpha,
        beta,
        ..
    } = objective
    {
        if teacher_logits.len() != train.len() {
            return Err(config_err(format!(
                "{} teacher logits for {} training instances",
                teacher_logits.len(),
                train.len()
            )));
        }
        validate_weights(*alpha, *beta)?;
    }
    let start = Instant::now();
    model.params.reset_optimizer();

    let val_metrics = |m: &Model| -> Result<EvalMetrics> { metrics_from_logits(val, &m.logits(val)?) };
    let (loss0, kd0) = evaluate_objective(model, train, objective)?;
    check_finite(loss0, "loss")?;
    let m0 = val_metrics(model)?;
    let mut records = vec![EpochRecord {
        epoch: 0,
        loss: loss0,
        val_auc: m0.auc,
        val_logloss: m0.logloss,
        kd_loss: objective.has_kd().then_some(kd0),
    }];
    info!(
        "{stage} epoch 0: loss {loss0:.6} val auc {:.5} logloss {:.5}",
        m0.auc, m0.logloss
    );

    let mut best_epoch = 0;
    let mut best_auc = m0.auc;
    let mut best_params = model.params.clone();
    let mut grads = Grads::zeros_like(&model.params);
    let mut losses = vec![0.0; train.len()];
    let mut kds = vec![0.0; train.len()];
    let mut emb = Vec::new();
    let mut demb = Vec::new();

    for epoch in 1..=cfg.epochs {
        let shuffle = cfg.seed.wrapping_mul(1_000_003).wrapping_add(epoch as u64);
        for batch in iterate_batches(train, cfg.batch_size, Some(shuffle)) {
            grads.zero();
            let scale = 1.0 / batch.len() as f64;
            for r in 0..batch.len() {
                let pos = batch.positions[r];
                let label = batch.labels[r];
                let mut term = (0.0, 0.0);
                model.accumulate(
                    batch.row(r),
                    |z| {
                        let (l, kd, g) = objective.term(pos, label, z);
                        term = (l, kd);
                        g * scale
                    },
                    &mut grads,
                    &mut emb,
                    &mut demb,
                )?;
                check_finite(term.0, "loss")?;
                losses[pos] = term.0;
                kds[pos] = term.1;
            }
            grads.add_l2(&model.params, cfg.l2);
            adam_step(&mut model.params, &grads, cfg.lr)?;
        }
        let n = train.len() as f64;
        let loss = losses.iter().sum::<f64>() / n;
        let kd = kds.iter().sum::<f64>() / n;
        let m = val_metrics(model)?;
        records.push(EpochRecord {
            epoch,
            loss,
            val_auc: m.auc,
            val_logloss: m.logloss,
            kd_loss: objective.has_kd().then_some(kd),
        });
        info!(
            "{stage} epoch {epoch}: loss {loss:.6} val auc {:.5} logloss {:.5}",
            m.auc, m.logloss
        );
        if m.auc > best_auc {
            best_auc = m.auc;
            best_epoch = epoch;
            best_params = model.params.clone();
        } else if epoch - best_epoch >= cfg.patience {
            debug!("{stage}: early stop after epoch {epoch}");
            break;
        }
    }
    model.params = best_params;
    Ok(TrainReport {
        stage: stage.into(),
        records,
        best_epoch,
        best_val_auc: best_auc,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

pub(crate) fn validate_weights(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha >= 0.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite()) || (alpha == 0.0 && beta == 0.0) {
        return Err(config_err(format!(
            "loss weights must be finite, non-negative and not both zero (alpha = {alpha}, beta = {beta})"
        )));
    }
    Ok(())
}
