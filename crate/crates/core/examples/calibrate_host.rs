//! Measures this machine's matmul throughput and streaming bandwidth and
//! prints the resulting device entry, ready to append to a catalog.
//!
//! `cargo run --release --example calibrate_host -- [tdp_watts]`

use gnnbench::profiler::MemLevel;
use gnnbench::roofline::{calibrate_host, ridge_point};

fn main() -> gnnbench::Result<()> {
    let tdp: f64 = std::env::args().nth(1).map_or(65.0, |a| a.parse().expect("watts"));
    let host = calibrate_host(tdp);
    println!("peak {:.2} GFLOP/s, bandwidth {:.2} GB/s, ridge {:.2} FLOP/B",
        host.peak_flops / 1e9,
        host.bandwidth.hbm.unwrap_or(f64::NAN) / 1e9,
        ridge_point(&host, MemLevel::Hbm)?
    );
    println!("{}", serde_json::to_string_pretty(&host).expect("device serializes"));
    Ok(())
}
