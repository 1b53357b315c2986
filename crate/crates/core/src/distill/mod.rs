//! Three-stage pipeline: teacher training, distillation into a student with
//! shared frozen embeddings, and fine-tuning.

mod loss;
mod plan;
mod train;

pub use loss::{ctr_loss, ctr_term, kd_loss, kd_loss_in, kd_term, total_loss, KdSpace};
pub use plan::{distill_student, finetune_student, share_embeddings, train_teacher, DistillPlan};
pub use train::{
    objective_and_grads, train_stage, EpochRecord, Objective, StageConfig, TrainReport, DEFAULT_BATCH_SIZE, DEFAULT_L2,
    DEFAULT_LR, DEFAULT_PATIENCE,
};
