//! Acceptance gate. Prints one line per criterion and exits non-zero when a
//! gating criterion fails. Criterion 4 and the optional MovieLens run are
//! reported but do not gate.

mod common;

use std::path::{Path, PathBuf};
use std::time::Instant;

use dagfm_core::config::RunConfig;
use dagfm_core::data::movielens::convert_movielens;
use dagfm_core::data::synthetic::{generate_planted, PlantedConfig};
use dagfm_core::data::{build_vocab, load_instances, split_dataset, DatasetSplit};
use dagfm_core::distill::{kd_loss, kd_loss_in, objective_and_grads, KdSpace, Objective};
use dagfm_core::interactions::{outer_as_kernel, phi_kernel, phi_outer, DagfmSpec, InteractionFn};
use dagfm_core::metrics::{count_flops, instrumented_flops};
use dagfm_core::numcore::grad_check;
use dagfm_core::oracle::{assert_dp_equivalence, outer_kernel_deviation};
use dagfm_core::pipeline::{run_pipeline, PipelineOutput, PipelineSpec};
use dagfm_core::teachers::CinSpec;
use dagfm_core::ModelSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const MOVIELENS_ENV: &str = "DAGFM_MOVIELENS_DIR";
const MOVIELENS_REFERENCE_AUC: f64 = 0.8976;
const FD_STEP: f64 = 1e-4;

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(n: usize, gating: bool, outcome: &Outcome) -> bool {
    let verdict = if outcome.passed { "PASS" } else { "FAIL" };
    let note = if gating { "" } else { " [reported]" };
    println!("criterion {n}: {verdict}{note} | {}", outcome.detail);
    outcome.passed || !gating
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn dp_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for f in InteractionFn::ALL {
        for m in 2..=5 {
            for d in 1..=3 {
                for depth in 1..=3 {
                    let r = assert_dp_equivalence(&DagfmSpec::new(m, d, depth, f), runs).unwrap();
                    worst = worst.max(r.max_deviation);
                    runs += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        passed: worst < 1e-10 && secs < 10.0,
        detail: format!("{runs} configurations, max relative deviation {worst:.2e}, {secs:.2}s"),
    }
}

fn outer_kernel_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut gauss = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let mut phi_worst: f64 = 0.0;
    for case in 0..1000 {
        let d = 1 + case % 8;
        let (a, b, p, q) = (gauss(d), gauss(d), gauss(d), gauss(d));
        let outer = phi_outer(&a, &b, &p, &q).unwrap();
        let kernel = phi_kernel(&a, &b, &outer_as_kernel(&p, &q)).unwrap();
        for (x, y) in outer.iter().zip(&kernel) {
            phi_worst = phi_worst.max((x - y).abs() / y.abs().max(1.0));
        }
    }
    let mut prop_worst: f64 = 0.0;
    for m in 2..=5 {
        for d in 1..=4 {
            for layers in 1..=3 {
                prop_worst =
                    prop_worst.max(outer_kernel_deviation(m, d, layers, (m * 100 + d * 10 + layers) as u64).unwrap());
            }
        }
    }
    Outcome {
        passed: phi_worst <= 1e-12 && prop_worst <= 1e-10,
        detail: format!("1000 edge cases max {phi_worst:.2e}; propagation max {prop_worst:.2e}"),
    }
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: (f64, String) = (0.0, String::new());
    let mut checks = 0;
    for config in 0..20 {
        let m = rng.random_range(2..=4);
        let d = rng.random_range(1..=3);
        let rows = 3;
        let instances = common::random_instances(&mut rng, 4, m, rows);
        let teacher: Vec<f64> = (0..instances.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
        for spec in common::small_specs(&mut rng, m, d) {
            let name = spec.kind_name();
            let model = common::randomized_model(spec, rows, config, 0.5);
            let objective = if config % 2 == 0 {
                Objective::Ctr
            } else {
                Objective::Distill {
                    teacher_logits: &teacher,
                    alpha: 1.0,
                    beta: 10.0,
                    space: KdSpace::Logit,
                }
            };
            let err = grad_check(
                |store| {
                    let mut probe = model.clone();
                    probe.params = store.clone();
                    objective_and_grads(&probe, &instances, &objective)
                },
                &model.params,
                FD_STEP,
            )
            .unwrap();
            checks += 1;
            if err > worst.0 {
                worst = (err, format!("{name} m={m} d={d}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        passed: worst.0 <= 1e-4 && secs < 60.0,
        detail: format!(
            "{checks} checks over 20 configs, max relative error {:.2e} ({}), {secs:.2}s",
            worst.0, worst.1
        ),
    }
}

fn planted_split(cfg: &RunConfig) -> (DatasetSplit, Vec<usize>) {
    let data = generate_planted(&PlantedConfig {
        seed: cfg.seed,
        ..PlantedConfig::default()
    })
    .unwrap();
    let rows = data.schema.field_rows();
    (split_dataset(data.instances, cfg.split, cfg.seed).unwrap(), rows)
}

fn distillation_run() -> (PipelineOutput, DatasetSplit, f64) {
    let cfg = RunConfig::load(&data_dir().join("planted.cfg")).unwrap();
    let start = Instant::now();
    let (split, rows) = planted_split(&cfg);
    let out = run_pipeline(&PipelineSpec::from_config(&cfg, rows), &split).unwrap();
    (out, split, start.elapsed().as_secs_f64())
}

fn distillation(out: &PipelineOutput, split: &DatasetSplit, secs: f64) -> Outcome {
    let r = &out.report;
    let (teacher, distilled, finetuned) = (r.teacher_test.auc, r.distilled_test.auc, r.finetuned_test.auc);
    let train_kd = kd_loss(
        &out.teacher.logits(&split.train).unwrap(),
        &out.distilled.logits(&split.train).unwrap(),
    )
    .unwrap();
    let test_prob_kd = kd_loss_in(
        KdSpace::Probability,
        &out.teacher.logits(&split.test).unwrap(),
        &out.distilled.logits(&split.test).unwrap(),
    )
    .unwrap();
    let a = distilled >= teacher - 0.005;
    let b = finetuned >= distilled - 0.002;
    let c = train_kd <= 1e-2;
    let mark = |ok: bool| if ok { "ok" } else { "miss" };
    Outcome {
        passed: a && b && c && secs < 1200.0,
        detail: format!(
            "(a) {} teacher {teacher:.4} distilled {distilled:.4}; (b) {} finetuned {finetuned:.4}; \
             (c) {} kd train {train_kd:.2e} test {:.2e} (probability space {test_prob_kd:.2e}); {secs:.0}s",
            mark(a),
            mark(b),
            mark(c),
            r.distilled_test_kd,
        ),
    }
}

fn efficiency_ratio() -> Outcome {
    let cin = count_flops(&ModelSpec::Cin(CinSpec::uniform(39, 16, 3, 200))).unwrap();
    let dag = count_flops(&ModelSpec::dagfm(39, 16, 3, InteractionFn::Inner)).unwrap();
    let ratio = cin as f64 / dag as f64;
    Outcome {
        passed: ratio >= 10.0,
        detail: format!("CIN {cin} / DAGFM-inner {dag} = {ratio:.1}"),
    }
}

fn flops_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for m in 2..=5 {
        for d in 1..=4 {
            let instance = common::random_instances(&mut rng, 1, m, 3).remove(0);
            for spec in common::small_specs(&mut rng, m, d) {
                let model = common::randomized_model(spec.clone(), 3, 1, 0.3);
                let closed = count_flops(&spec).unwrap();
                let counted = instrumented_flops(&model, &instance).unwrap().total();
                compared += 1;
                if closed != counted {
                    mismatches.push(format!("{} m={m} d={d}: {closed} vs {counted}", spec.kind_name()));
                }
            }
        }
    }
    Outcome {
        passed: mismatches.is_empty(),
        detail: format!(
            "{compared} models compared, {} mismatches {mismatches:?}",
            mismatches.len()
        ),
    }
}

fn movielens(dir: &Path) -> Outcome {
    let start = Instant::now();
    let work = tempfile::tempdir().unwrap();
    let csv = work.path().join("movielens.csv");
    let stats = convert_movielens(dir, &csv, false).unwrap();
    let cfg = RunConfig::load(&data_dir().join("movielens.cfg")).unwrap();
    let schema = build_vocab(&csv, cfg.min_freq).unwrap();
    let instances = load_instances(&csv, &schema).unwrap();
    let split = split_dataset(instances, cfg.split, cfg.seed).unwrap();
    let out = run_pipeline(&PipelineSpec::from_config(&cfg, schema.field_rows()), &split).unwrap();
    let auc = out.report.finetuned_test.auc;
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        passed: (auc - MOVIELENS_REFERENCE_AUC).abs() <= 0.03 && secs <= 3600.0,
        detail: format!(
            "{} instances, fine-tuned test AUC {auc:.4} vs reference {MOVIELENS_REFERENCE_AUC}, {secs:.0}s",
            stats.rows_written
        ),
    }
}

fn main() {
    let mut ok = true;
    ok &= report(1, true, &dp_equivalence());
    ok &= report(2, true, &outer_kernel_identity());
    ok &= report(3, true, &gradient_suite());

    let (first, split, secs) = distillation_run();
    ok &= report(4, false, &distillation(&first, &split, secs));
    ok &= report(5, true, &efficiency_ratio());
    ok &= report(6, true, &flops_exactness());

    match std::env::var_os(MOVIELENS_ENV) {
        Some(dir) => ok &= report(7, false, &movielens(Path::new(&dir))),
        None => println!("criterion 7: SKIP [reported] | set {MOVIELENS_ENV} to a MovieLens-1M directory to run"),
    }

    let (second, _, _) = distillation_run();
    let (a, b) = (first.report.to_jsonl(), second.report.to_jsonl());
    ok &= report(
        8,
        true,
        &Outcome {
            passed: a == b,
            detail: format!("{} epoch records, reruns byte-identical: {}", a.lines().count(), a == b),
        },
    );

    if !ok {
        std::process::exit(1);
    }
}
