//! End-to-end teacher → distill → fine-tune run on an in-memory split.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::DatasetSplit;
use crate::distill::{
    distill_student, finetune_student, kd_loss_in, train_teacher, DistillPlan, StageConfig, TrainReport,
};
use crate::error::Result;
use crate::metrics::{metrics_from_logits, EvalMetrics};
use crate::model::{Model, ModelSpec};

#[derive(Debug, Clone)]
pub struct PipelineSpec {
    pub teacher: ModelSpec,
    pub student: ModelSpec,
    pub field_rows: Vec<usize>,
    pub teacher_stage: StageConfig,
    pub plan: DistillPlan,
    pub teacher_seed: u64,
    pub student_seed: u64,
}

impl PipelineSpec {
    /// Models, stages and seeds of a run configuration for a dataset with
    /// the given embedding-table sizes.
    pub fn from_config(cfg: &RunConfig, field_rows: Vec<usize>) -> Self {
        let m = field_rows.len();
        Self {
            teacher: cfg.teacher_spec(m),
            student: cfg.student_spec(m),
            field_rows,
            teacher_stage: cfg.teacher.stage.clone(),
            plan: cfg.plan.clone(),
            teacher_seed: cfg.teacher_init_seed(),
            student_seed: cfg.student_init_seed(),
        }
    }
}

/// Test-set results of every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub teacher: TrainReport,
    pub distill: TrainReport,
    pub finetune: TrainReport,
    pub teacher_test: EvalMetrics,
    pub distilled_test: EvalMetrics,
    pub finetuned_test: EvalMetrics,
    /// KD loss between teacher and student logits on the test part.
    pub distilled_test_kd: f64,
    pub finetuned_test_kd: f64,
}

impl PipelineReport {
    /// Epoch records of all three stages, each line tagged with its stage.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in [&self.teacher, &self.distill, &self.finetune] {
            for line in r.to_jsonl().lines() {
                out.push_str(&format!("{{\"stage\":\"{}\",\"record\":{line}}}\n", r.stage));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: PipelineReport,
    pub teacher: Model,
    pub distilled: Model,
    pub finetuned: Model,
}

pub fn run_pipeline(spec: &PipelineSpec, split: &DatasetSplit) -> Result<PipelineOutput> {
    let mut teacher = Model::new(spec.teacher.clone(), spec.field_rows.clone(), spec.teacher_seed)?;
    let teacher_report = train_teacher(&mut teacher, split, &spec.teacher_stage)?;

    let mut student = Model::new(spec.student.clone(), spec.field_rows.clone(), spec.student_seed)?;
    let distill_report = distill_student(&teacher, &mut student, split, &spec.plan)?;
    let distilled = student.clone();
    let finetune_report = finetune_student(&mut student, split, &spec.plan.finetune)?;

    let test = &split.test;
    let teacher_logits = teacher.logits(test)?;
    let distilled_logits = distilled.logits(test)?;
    let finetuned_logits = student.logits(test)?;
    let report = PipelineReport {
        teacher: teacher_report,
        distill: distill_report,
        finetune: finetune_report,
        teacher_test: metrics_from_logits(test, &teacher_logits)?,
        distilled_test: metrics_from_logits(test, &distilled_logits)?,
        finetuned_test: metrics_from_logits(test, &finetuned_logits)?,
        distilled_test_kd: kd_loss_in(spec.plan.kd_space, &teacher_logits, &distilled_logits)?,
        finetuned_test_kd: kd_loss_in(spec.plan.kd_space, &teacher_logits, &finetuned_logits)?,
    };
    Ok(PipelineOutput {
        report,
        teacher,
        distilled,
        finetuned: student,
    })
}
