use dagfm_core::interactions::InteractionFn;
use dagfm_core::metrics::bench_latency;
use dagfm_core::teachers::CinSpec;
use dagfm_core::{Model, ModelSpec};

fn median_us(spec: ModelSpec, iterations: usize) -> f64 {
    let m = spec.fields();
    let model = Model::new(spec, vec![10; m], 1).unwrap();
    bench_latency(&model, iterations).unwrap().median
}

#[test]
fn dagfm_student_is_faster_than_cin_teacher() {
    let cin = median_us(ModelSpec::Cin(CinSpec::uniform(39, 16, 3, 200)), 5);
    let dag = median_us(ModelSpec::dagfm(39, 16, 3, InteractionFn::Inner), 50);
    assert!(dag < cin, "DAGFM {dag}us vs CIN {cin}us");
}

#[test]
fn kernel_latency_grows_faster_in_d_than_outer() {
    let growth = |f: InteractionFn| {
        let small = median_us(ModelSpec::dagfm(10, 16, 3, f), 300);
        let large = median_us(ModelSpec::dagfm(10, 32, 3, f), 300);
        large / small
    };
    let (kernel, outer) = (growth(InteractionFn::Kernel), growth(InteractionFn::Outer));
    println!("doubling d: kernel x{kernel:.2}, outer x{outer:.2}");
    assert!(kernel > 2.5, "kernel x{kernel:.2}");
    assert!(outer < 2.6, "outer x{outer:.2}");
    assert!(kernel > 1.3 * outer, "kernel x{kernel:.2} vs outer x{outer:.2}");
}
