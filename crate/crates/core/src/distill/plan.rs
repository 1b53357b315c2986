use serde::{Deserialize, Serialize};

use crate::data::DatasetSplit;
use crate::distill::loss::KdSpace;
use crate::distill::train::{train_stage, validate_weights, Objective, StageConfig, TrainReport};
use crate::error::{shape_err, Result};
use crate::model::{Model, Teacher};

/// Loss weights and per-stage settings of the distillation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillPlan {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub kd_space: KdSpace,
    pub distill: StageConfig,
    pub finetune: StageConfig,
}

impl Default for DistillPlan {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 10.0,
            kd_space: KdSpace::Logit,
            distill: StageConfig::default(),
            finetune: StageConfig::default(),
        }
    }
}

impl DistillPlan {
    pub fn validate(&self) -> Result<()> {
        validate_weights(self.alpha, self.beta)?;
        self.distill.validate()?;
        self.finetune.validate()
    }
}

/// Train a teacher (or any model) on the CTR loss with all parameters,
/// embeddings included, trainable.
pub fn train_teacher(model: &mut Model, split: &DatasetSplit, cfg: &StageConfig) -> Result<TrainReport> {
    model.params.set_all_trainable(true);
    train_stage("teacher", model, &split.train, &split.validation, &Objective::Ctr, cfg)
}

/// Copy the teacher's embedding tables into the student and freeze them.
pub fn share_embeddings<T: Teacher + ?Sized>(teacher: &T, student: &mut Model) -> Result<()> {
    if teacher.embedding_dim() != student.dim() {
        return Err(shape_err(format!(
            "teacher embedding size {} differs from student embedding size {}",
            teacher.embedding_dim(),
            student.dim()
        )));
    }
    let shared = teacher.shared_embeddings();
    if shared.len() != student.num_fields() {
        return Err(shape_err(format!(
            "teacher has {} embedding tables, student has {} fields",
            shared.len(),
            student.num_fields()
        )));
    }
    for (name, tensor) in shared {
        let current = student.params.get(name)?;
        if current.shape() != tensor.shape() {
            return Err(shape_err(format!(
                "embedding `{name}`: teacher shape {:?}, student shape {:?}",
                tensor.shape(),
                current.shape()
            )));
        }
        student.params.set(name, tensor.clone())?;
    }
    student.params.set_all_trainable(true);
    student.set_embeddings_trainable(false);
    Ok(())
}

/// Distillation stage: the student takes the teacher's embeddings, which stay
/// frozen, and minimizes `alpha * KD + beta * CTR` on the training part.
/// Teacher logits are computed once up front.
pub fn distill_student<T: Teacher + ?Sized>(
    teacher: &T,
    student: &mut Model,
    split: &DatasetSplit,
    plan: &DistillPlan,
) -> Result<TrainReport> {
    plan.validate()?;
    share_embeddings(teacher, student)?;
    let teacher_logits = teacher.teacher_logits(&split.train)?;
    let objective = Objective::Distill {
        teacher_logits: &teacher_logits,
        alpha: plan.alpha,
        beta: plan.beta,
        space: plan.kd_space,
    };
    train_stage(
        "distill",
        student,
        &split.train,
        &split.validation,
        &objective,
        &plan.distill,
    )
}

/// Fine-tuning stage: every parameter is trainable again and the loss is CTR
/// only. With zero epochs the model is returned unchanged.
pub fn finetune_student(student: &mut Model, split: &DatasetSplit, cfg: &StageConfig) -> Result<TrainReport> {
    student.params.set_all_trainable(true);
    train_stage(
        "finetune",
        student,
        &split.train,
        &split.validation,
        &Objective::Ctr,
        cfg,
    )
}
