//! Runs the same short training as W replicas with batch 1 and as one
//! worker with batch W, checks that the parameters agree bit for bit and
//! prints the strong-scaling summary.
//!
//! `cargo run --release --example data_parallel -- [workers]`

use gnnbench::graph::{generate_dataset, GeneratorConfig};
use gnnbench::model::{init_params, ModelConfig, ModelParams};
use gnnbench::profiler::Trace;
use gnnbench::train::{data_parallel_epoch, prepare_dataset, render_scaling, strong_scaling_report, Profiling, TrainConfig, TrainState};

fn run(cfg: &TrainConfig, graphs: &[gnnbench::graph::EventGraph]) -> gnnbench::Result<(ModelParams<f32>, f64, f64)> {
    let data = prepare_dataset::<f32>(graphs, cfg)?;
    println!(
        "workers {} batch {}: padded to {:?} nodes, {} truncated",
        cfg.workers,
        cfg.batch_size,
        data.padding.as_ref().map(|p| p.target_nodes()),
        data.truncated
    );
    let mut state = TrainState::new(init_params(&ModelConfig::default())?, cfg);
    let mut trace = Trace::default();
    let prof = Profiling { trace_steps: Some(0), ..Profiling::default() };
    let ep = data_parallel_epoch(&mut state, &data.examples, cfg, &prof, &mut trace)?;
    Ok((state.params, ep.scaling.serial_seconds, ep.scaling.parallel_seconds))
}

fn main() -> gnnbench::Result<()> {
    let w: usize = std::env::args().nth(1).map_or(2, |a| a.parse().expect("integer worker count"));
    let graphs = generate_dataset(&GeneratorConfig::desk(), 8 * w)?;
    let base = TrainConfig { epochs: 1, ..TrainConfig::default() };

    let (replicas, serial, parallel) = run(&TrainConfig { workers: w, ..base.clone() }, &graphs)?;
    let (batched, _, _) = run(&TrainConfig { batch_size: w, ..base }, &graphs)?;
    println!("parameters bitwise equal: {}", replicas.bit_eq(&batched));

    print!("{}", render_scaling(&strong_scaling_report(&[(1, serial), (w, parallel)])?));
    Ok(())
}
