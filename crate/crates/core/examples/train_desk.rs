//! Trains the default network on a desk-scale synthetic dataset and prints
//! per-epoch loss, validation AUC and latency.
//!
//! `cargo run --release --example train_desk -- [events] [epochs]`

use gnnbench::graph::{generate_dataset, GeneratorConfig};
use gnnbench::model::{init_params, ModelConfig};
use gnnbench::profiler::Trace;
use gnnbench::train::{fit, prepare_dataset, Example, Profiling, TrainConfig, TrainState};

fn main() -> gnnbench::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let events = args.next().unwrap_or(200);
    let epochs = args.next().unwrap_or(20);

    let graphs = generate_dataset(&GeneratorConfig::desk(), events)?;
    let split = events * 4 / 5;
    let cfg = TrainConfig { epochs, ..Default::default() };
    let train = prepare_dataset::<f32>(&graphs[..split], &cfg)?;
    let val: Vec<Example<f32>> = graphs[split..].iter().map(Example::from_graph).collect();

    let mut state = TrainState::new(init_params(&ModelConfig::default())?, &cfg);
    let mut trace = Trace::default();
    fit(&mut state, &train.examples, &val, &cfg, &Profiling::off(), &mut trace, |ep, _| {
        let r = &ep.report;
        println!(
            "epoch {:>3}  loss {:.4}  val auc {:.4}  {:.2} s",
            r.epoch,
            r.loss,
            r.auc.unwrap_or(f64::NAN),
            r.seconds
        );
        Ok(())
    })?;
    Ok(())
}
