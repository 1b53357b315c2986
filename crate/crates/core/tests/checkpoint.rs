mod common;

use dagfm_core::checkpoint::{load_checkpoint, save_checkpoint};
use dagfm_core::distill::share_embeddings;
use dagfm_core::interactions::InteractionFn;
use dagfm_core::teachers::CinSpec;
use dagfm_core::{ModelSpec, Teacher};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn loaded_teacher_shares_embeddings_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("teacher.ckpt");
    let teacher = common::randomized_model(ModelSpec::Cin(CinSpec::uniform(3, 4, 2, 5)), 6, 1, 0.3);
    save_checkpoint(&path, &teacher, None).unwrap();
    let loaded = load_checkpoint(&path).unwrap().model;

    let names: Vec<&str> = loaded.shared_embeddings().into_iter().map(|(n, _)| n).collect();
    assert_eq!(names.len(), 3);
    let mut student = dagfm_core::Model::new(ModelSpec::dagfm(3, 4, 2, InteractionFn::Inner), vec![6; 3], 2).unwrap();
    share_embeddings(&loaded, &mut student).unwrap();
    for name in names {
        assert!(teacher
            .params
            .get(name)
            .unwrap()
            .bits_eq(student.params.get(name).unwrap()));
    }
}

#[test]
fn every_model_round_trips_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let instances = common::random_instances(&mut rng, 10, 3, 4);
    for (k, spec) in common::small_specs(&mut rng, 3, 2).into_iter().enumerate() {
        let model = common::randomized_model(spec, 4, k as u64, 0.3);
        let a = dir.path().join(format!("{k}.a"));
        let b = dir.path().join(format!("{k}.b"));
        save_checkpoint(&a, &model, None).unwrap();
        let loaded = load_checkpoint(&a).unwrap().model;
        save_checkpoint(&b, &loaded, None).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(model.logits(&instances).unwrap(), loaded.logits(&instances).unwrap());
    }
}
