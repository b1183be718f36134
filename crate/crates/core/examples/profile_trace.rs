//! Profiles one training epoch of the default network and prints the time
//! breakdown per kernel category, the kernel ranking and the zero-AI share.
//!
//! `cargo run --release --example profile_trace -- [events]`

use gnnbench::graph::{generate_dataset, GeneratorConfig};
use gnnbench::model::{init_params, ModelConfig};
use gnnbench::profiler::{rank_kernels, time_breakdown, zero_ai_report, Trace};
use gnnbench::train::{prepare_dataset, train_epoch, Profiling, TrainConfig, TrainState};

fn main() -> gnnbench::Result<()> {
    let events: usize = std::env::args().nth(1).map_or(20, |a| a.parse().expect("integer event count"));
    let graphs = generate_dataset(&GeneratorConfig::desk(), events)?;
    let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
    let data = prepare_dataset::<f32>(&graphs, &cfg)?;
    let mut state = TrainState::new(init_params(&ModelConfig::default())?, &cfg);
    let mut trace = Trace::default();
    let report = train_epoch(&mut state, &data.examples, &cfg, &Profiling::default(), &mut trace)?;
    trace.meta.wall_s = Some(report.seconds);

    println!("{} records over {} steps, {:.2} s\n", trace.records.len(), report.steps, report.seconds);
    print!("{}", time_breakdown(&trace)?.render());
    println!();
    print!("{}", rank_kernels(&trace)?.render(15));
    println!();
    print!("{}", zero_ai_report(&trace)?.render());
    Ok(())
}
