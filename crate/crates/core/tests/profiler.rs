use gnnbench::graph::{generate_dataset, GeneratorConfig};
use gnnbench::model::{init_params, ModelConfig};
use gnnbench::profiler::{rank_kernels, time_breakdown, Category, CostModel, OpKind, Timer, Trace};
use gnnbench::roofline::{default_catalog, emit_roofline, BoundClass};
use gnnbench::train::{data_parallel_epoch, prepare_dataset, Profiling, TrainConfig, TrainState};

fn trace(timer: Timer, workers: usize) -> Trace {
    let graphs = generate_dataset(&GeneratorConfig::desk(), 4).unwrap();
    let cfg = TrainConfig { epochs: 1, workers, ..TrainConfig::default() };
    let data = prepare_dataset::<f32>(&graphs, &cfg).unwrap();
    let mut state = TrainState::new(init_params(&ModelConfig::default()).unwrap(), &cfg);
    let mut t = Trace::default();
    let prof = Profiling { timer, ..Profiling::default() };
    data_parallel_epoch(&mut state, &data.examples, &cfg, &prof, &mut t).unwrap();
    t
}

#[test]
fn kernels_carry_scoped_names() {
    let t = trace(Timer::Wall, 1);
    let names: std::collections::BTreeSet<&str> = t.records.iter().map(|r| r.op.as_str()).collect();
    for want in [
        "encoder.node.layer0/matmul",
        "encoder.edge/concat",
        "interaction.node/unsorted_segment_sum",
        "interaction.edge/gather_rows",
        "interaction.edge.layer1/relu",
        "decoder.layer2/matmul",
        "decoder/sigmoid",
        "bce_loss",
        "interaction.node/unsorted_segment_sum_grad",
        "interaction.edge/gather_rows_grad",
        "optimizer/adam",
    ] {
        assert!(names.contains(want), "missing {want}");
    }
    let steps: std::collections::BTreeSet<u64> = t.records.iter().map(|r| r.step).collect();
    assert_eq!(steps.len(), 4);
}

#[test]
fn every_category_appears() {
    let t = trace(Timer::Wall, 1);
    let tb = time_breakdown(&t).unwrap();
    for kind in [OpKind::MatMul, OpKind::SegmentSum, OpKind::ConcatSlice, OpKind::Elementwise] {
        assert!(tb.fraction(Category::forward(kind)) > 0.0, "{kind:?}");
        assert!(tb.fraction(Category::backward(kind)) > 0.0, "{kind:?} grad");
    }
    assert!(tb.fraction(Category::forward(OpKind::Optimizer)) > 0.0);
    assert!(tb.grad_fraction() > 0.3);
}

#[test]
fn matmul_leads_the_cpu_breakdown() {
    // On this engine the scatter loops are cheap next to dense products, so
    // matmul work (forward or backward) tops the breakdown.
    let t = trace(Timer::Wall, 1);
    let tb = time_breakdown(&t).unwrap();
    assert_eq!(tb.fractions[0].0.kind, OpKind::MatMul, "{}", tb.render());
}

#[test]
fn replicas_are_labelled() {
    let sim = Timer::Simulated(CostModel { flops_per_s: 1e11, bytes_per_s: 2e10, interconnect_bytes_per_s: Some(1e9) });
    let t = trace(sim, 2);
    let replicas: std::collections::BTreeSet<u32> = t.records.iter().map(|r| r.replica).collect();
    assert_eq!(replicas.into_iter().collect::<Vec<_>>(), [0, 1]);
    assert!(t.records.iter().any(|r| r.op == "allreduce" && r.duration_s > 1e-9));
}

#[test]
fn gnn_roofline_on_v100() {
    let t = trace(Timer::Wall, 1);
    let d = &default_catalog()[0];
    let r = emit_roofline(&t, d, (5, 20)).unwrap();
    let ranking = rank_kernels(&t).unwrap();
    let zero: Vec<&str> = ranking.kernels.iter().filter(|k| k.flops == 0).map(|k| k.name.as_str()).collect();
    assert_eq!(r.zero_ai.len(), zero.len());
    assert!(zero.iter().any(|n| n.ends_with("/concat")));
    for p in &r.points {
        if p.kernel.ends_with("/unsorted_segment_sum") || p.kernel.ends_with("/gather_rows_grad") {
            assert_eq!(p.class, BoundClass::MemoryBound, "{}", p.kernel);
        }
        assert!(p.attainable <= d.peak_flops);
    }
}
