//! Builds the default interaction network, prints its parameter report and
//! scores the edges of one synthetic event.
//!
//! `cargo run --example gnn_forward`

use gnnbench::graph::{generate_event, GeneratorConfig};
use gnnbench::model::{forward, init_params, param_report, ModelConfig};
use gnnbench::train::auc;

fn main() -> gnnbench::Result<()> {
    let params = init_params::<f32>(&ModelConfig::default())?;
    print!("{}", param_report(&params));

    let g = generate_event(&GeneratorConfig::desk())?;
    let scores = forward(&params, &g)?;
    let s: Vec<f64> = scores.data().iter().map(|&v| v as f64).collect();
    let mean = |label: u8| {
        let v: Vec<f64> = s.iter().zip(g.edge_labels()).filter(|(_, &l)| l == label).map(|(x, _)| *x).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    println!("\n{} edges scored", s.len());
    println!("mean score: true {:.4}, fake {:.4}", mean(1), mean(0));
    println!("untrained AUC {:.4}", auc(&s, g.edge_labels(), g.edge_valid())?);
    Ok(())
}
