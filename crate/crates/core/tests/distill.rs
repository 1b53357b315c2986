mod common;

use dagfm_core::data::synthetic::{generate_planted, PlantedConfig};
use dagfm_core::data::{split_dataset, DatasetSplit, DEFAULT_RATIOS};
use dagfm_core::distill::{
    distill_student, finetune_student, kd_loss, share_embeddings, train_teacher, DistillPlan, StageConfig,
};
use dagfm_core::interactions::InteractionFn;
use dagfm_core::teachers::CrossNetSpec;
use dagfm_core::{Error, Model, ModelSpec, Teacher};

fn small_split(instances: usize, seed: u64) -> (DatasetSplit, Vec<usize>) {
    let data = generate_planted(&PlantedConfig {
        instances,
        fields: 4,
        vocab_per_field: 8,
        order: 2,
        seed,
        ..PlantedConfig::default()
    })
    .unwrap();
    let rows = data.schema.field_rows();
    (split_dataset(data.instances, DEFAULT_RATIOS, seed).unwrap(), rows)
}

fn stage(epochs: usize, lr: f64) -> StageConfig {
    StageConfig {
        epochs,
        lr,
        batch_size: 64,
        patience: epochs.max(1),
        l2: 0.0,
        seed: 5,
    }
}

fn crossnet(rows: &[usize], seed: u64) -> Model {
    Model::new(
        ModelSpec::CrossNet(CrossNetSpec {
            fields: 4,
            dim: 4,
            depth: 2,
        }),
        rows.to_vec(),
        seed,
    )
    .unwrap()
}

fn outer(rows: &[usize], seed: u64) -> Model {
    Model::new(ModelSpec::dagfm(4, 4, 2, InteractionFn::Outer), rows.to_vec(), seed).unwrap()
}

#[test]
fn teacher_training_lowers_the_training_loss() {
    let (split, rows) = small_split(3000, 1);
    let mut teacher = crossnet(&rows, 1);
    let report = train_teacher(&mut teacher, &split, &stage(5, 1e-2)).unwrap();
    assert_eq!(report.records.len(), 6);
    assert!(report.final_record().loss < report.records[0].loss);
}

#[test]
fn zero_learning_rate_keeps_parameters_and_losses() {
    let (split, rows) = small_split(1000, 2);
    let mut model = crossnet(&rows, 2);
    let before = model.params.clone();
    let report = train_teacher(&mut model, &split, &stage(3, 0.0)).unwrap();
    for p in before.iter() {
        assert!(p.value.bits_eq(model.params.get(&p.name).unwrap()), "{}", p.name);
    }
    let losses: Vec<u64> = report.records.iter().map(|r| r.loss.to_bits()).collect();
    assert!(losses.windows(2).all(|w| w[0] == w[1]), "{losses:?}");
}

#[test]
fn seeded_reruns_produce_identical_reports() {
    let (split, rows) = small_split(1000, 3);
    let run = || {
        let mut model = crossnet(&rows, 3);
        train_teacher(&mut model, &split, &stage(3, 1e-2)).unwrap().to_jsonl()
    };
    assert_eq!(run(), run());
}

#[test]
fn distillation_keeps_shared_embeddings_bitwise_frozen() {
    let (split, rows) = small_split(2000, 4);
    let mut teacher = crossnet(&rows, 4);
    train_teacher(&mut teacher, &split, &stage(2, 1e-2)).unwrap();
    let mut student = outer(&rows, 5);
    let plan = DistillPlan {
        distill: stage(3, 1e-2),
        finetune: stage(0, 1e-2),
        ..DistillPlan::default()
    };
    distill_student(&teacher, &mut student, &split, &plan).unwrap();
    let shared = teacher.shared_embeddings();
    assert_eq!(shared.len(), 4);
    for (name, tensor) in shared {
        assert!(tensor.bits_eq(student.params.get(name).unwrap()), "{name}");
    }
}

#[test]
fn kd_loss_falls_over_the_first_epochs_without_labels() {
    let (split, rows) = small_split(3000, 6);
    let mut teacher = crossnet(&rows, 6);
    train_teacher(&mut teacher, &split, &stage(3, 1e-2)).unwrap();
    let mut student = outer(&rows, 7);
    let plan = DistillPlan {
        alpha: 1.0,
        beta: 0.0,
        distill: stage(3, 1e-2),
        ..DistillPlan::default()
    };
    let report = distill_student(&teacher, &mut student, &split, &plan).unwrap();
    let kd: Vec<f64> = report.records.iter().map(|r| r.kd_loss.unwrap()).collect();
    assert!(kd.windows(2).all(|w| w[1] < w[0]), "{kd:?}");
}

#[test]
fn self_distillation_stays_at_zero_kd() {
    let (split, rows) = small_split(1000, 8);
    let teacher = outer(&rows, 9);
    let mut student = teacher.clone();
    let plan = DistillPlan {
        alpha: 1.0,
        beta: 0.0,
        distill: stage(1, 1e-2),
        ..DistillPlan::default()
    };
    let report = distill_student(&teacher, &mut student, &split, &plan).unwrap();
    assert_eq!(report.records[0].kd_loss, Some(0.0));
    let after = kd_loss(
        &teacher.logits(&split.train).unwrap(),
        &student.logits(&split.train).unwrap(),
    )
    .unwrap();
    assert!(after <= 1e-10, "{after:e}");
}

#[test]
fn mismatched_embedding_size_is_a_shape_error() {
    let (_, rows) = small_split(200, 10);
    let teacher = crossnet(&rows, 10);
    let mut student = Model::new(ModelSpec::dagfm(4, 3, 2, InteractionFn::Outer), rows, 11).unwrap();
    assert!(matches!(share_embeddings(&teacher, &mut student), Err(Error::Shape(_))));
}

#[test]
fn finetuning_with_zero_epochs_is_a_passthrough() {
    let (split, rows) = small_split(500, 12);
    let mut model = outer(&rows, 12);
    let before = model.params.clone();
    let report = finetune_student(&mut model, &split, &stage(0, 1e-2)).unwrap();
    assert_eq!(report.records.len(), 1);
    for p in before.iter() {
        assert!(p.value.bits_eq(model.params.get(&p.name).unwrap()));
    }
}

#[test]
fn finetuning_unfreezes_embeddings() {
    let (split, rows) = small_split(2000, 13);
    let teacher = crossnet(&rows, 13);
    let mut student = outer(&rows, 14);
    share_embeddings(&teacher, &mut student).unwrap();
    let report = finetune_student(&mut student, &split, &stage(1, 1e-2)).unwrap();
    assert_eq!(report.best_epoch, 1);
    assert!(student.params.iter().all(|p| p.trainable));
    for (name, tensor) in teacher.shared_embeddings() {
        assert!(!tensor.bits_eq(student.params.get(name).unwrap()), "{name}");
    }
}
