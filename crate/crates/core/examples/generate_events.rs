//! Generates a desk-scale synthetic dataset, prints the size distribution and
//! the pad sizes that the 0.99 quantile would select.
//!
//! `cargo run --example generate_events -- [events] [particles]`

use gnnbench::graph::{generate_dataset, generate_event_with_truth, size_histogram, GeneratorConfig, PaddingSpec};

fn main() -> gnnbench::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let events = args.next().unwrap_or(200);
    let cfg = GeneratorConfig {
        particles_per_event: args.next().unwrap_or(10),
        ..GeneratorConfig::desk()
    };
    let graphs = generate_dataset(&cfg, events)?;
    print!("{}", size_histogram(&graphs)?.render());

    let pad = PaddingSpec::from_dataset(&graphs, 0.99)?;
    println!("pad to {} nodes, {} edges", pad.target_nodes(), pad.target_edges());

    let ev = generate_event_with_truth(&cfg)?;
    let g = &ev.graph;
    println!("\nfirst event: {} hits, {} candidate edges, {} true", g.num_nodes(), g.num_edges(), g.num_true_edges());
    let x = g.node_features().data();
    for e in 0..5.min(g.num_edges()) {
        let (s, r) = (g.senders()[e], g.receivers()[e]);
        println!(
            "  edge {e}: layer {} (r {:6.1}, phi {:+.3}) -> layer {} (r {:6.1}, phi {:+.3})  label {}",
            ev.layer[s], x[3 * s], x[3 * s + 1], ev.layer[r], x[3 * r], x[3 * r + 1], g.edge_labels()[e]
        );
    }
    Ok(())
}
