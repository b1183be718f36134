//! Places a profiled epoch under the V100 roofline, writes the SVG plot and
//! prints cost and energy per epoch for every catalog device.
//!
//! `cargo run --release --example roofline_economics -- [out.svg]`

use gnnbench::graph::{generate_dataset, GeneratorConfig};
use gnnbench::model::{init_params, ModelConfig};
use gnnbench::profiler::{MemLevel, Trace};
use gnnbench::roofline::{default_catalog, economics_table, emit_roofline, render_economics, render_svg, ridge_point};
use gnnbench::train::{prepare_dataset, train_epoch, Profiling, TrainConfig, TrainState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "roofline_v100_hbm.svg".into());
    let graphs = generate_dataset(&GeneratorConfig::desk(), 8)?;
    let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
    let data = prepare_dataset::<f32>(&graphs, &cfg)?;
    let mut state = TrainState::new(init_params(&ModelConfig::default())?, &cfg);
    let mut trace = Trace::default();
    train_epoch(&mut state, &data.examples, &cfg, &Profiling::default(), &mut trace)?;

    let catalog = default_catalog();
    let v100 = &catalog[0];
    println!("V100 ridge point: {:.3} FLOP/B", ridge_point(v100, MemLevel::Hbm)?);
    let roof = emit_roofline(&trace, v100, (5, 20))?;
    for p in roof.points.iter().take(8) {
        println!("  {:<40} AI {:>8.3}  {}", p.kernel, p.ai, p.class);
    }
    println!("  ... {} points, {} zero-AI kernels off the plot", roof.points.len(), roof.zero_ai.len());
    std::fs::write(&out, render_svg(&roof, MemLevel::Hbm)?)?;
    println!("wrote {out}\n");

    let devices: Vec<_> = catalog.iter().collect();
    print!("{}", render_economics(&economics_table(&[1800.0, 3600.0], &devices)?));
    Ok(())
}
