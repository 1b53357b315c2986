//! Teacher → distill → fine-tune on planted third-order data.
//!
//! ```text
//! cargo run --release -p dagfm-core --example synthetic -- [config] [instances]
//! ```

use std::path::PathBuf;

use dagfm_core::config::RunConfig;
use dagfm_core::data::split_dataset;
use dagfm_core::data::synthetic::{generate_planted, PlantedConfig};
use dagfm_core::distill::kd_loss;
use dagfm_core::pipeline::{run_pipeline, PipelineSpec};

fn main() -> dagfm_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().map_or_else(
        || PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/planted.cfg"),
        PathBuf::from,
    );
    let instances = args.next().map_or(200_000, |s| s.parse().expect("instance count"));
    let cfg = RunConfig::load(&config)?;

    let data = generate_planted(&PlantedConfig {
        instances,
        seed: cfg.seed,
        ..PlantedConfig::default()
    })?;
    let field_rows = data.schema.field_rows();
    let split = split_dataset(data.instances, cfg.split, cfg.seed)?;

    let start = std::time::Instant::now();
    let out = run_pipeline(&PipelineSpec::from_config(&cfg, field_rows), &split)?;
    print!("{}", out.report.to_jsonl());
    let r = &out.report;
    let train_kd = kd_loss(&out.teacher.logits(&split.train)?, &out.distilled.logits(&split.train)?)?;
    println!("teacher   {:?}", r.teacher_test);
    println!(
        "distilled {:?} test kd {:.3e} train kd {train_kd:.3e}",
        r.distilled_test, r.distilled_test_kd
    );
    println!("finetuned {:?}", r.finetuned_test);
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
