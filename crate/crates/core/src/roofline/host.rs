use std::hint::black_box;
use std::time::Instant;

use super::{Bandwidth, DeviceSpec};
use crate::tensor::{kernels, Tensor};

/// Measures this host's f32 matmul throughput and streaming bandwidth so a
/// trace recorded here can be placed under a roof that actually applies.
/// Durations of a few hundred milliseconds; results are noisy.
pub fn calibrate_host(tdp_watts: f64) -> DeviceSpec {
    DeviceSpec {
        name: "host".into(),
        architecture: Some(format!("{} {}", std::env::consts::OS, std::env::consts::ARCH)),
        chips: 1,
        peak_flops: measure_peak_flops(),
        precision: Some("fp32, measured".into()),
        memory_gib: None,
        bandwidth: Bandwidth {
            hbm: Some(measure_bandwidth()),
            ..Bandwidth::default()
        },
        price: Some(0.0),
        tdp: tdp_watts,
    }
}

fn measure_peak_flops() -> f64 {
    let n = 256;
    let a = Tensor::<f32>::full(&[n, n], 0.5);
    let b = Tensor::<f32>::full(&[n, n], 0.25);
    let mut best = 0.0f64;
    for _ in 0..5 {
        let t0 = Instant::now();
        black_box(kernels::matmul(black_box(&a), black_box(&b)).expect("square"));
        let dt = t0.elapsed().as_secs_f64();
        best = best.max(2.0 * (n * n * n) as f64 / dt);
    }
    best
}

fn measure_bandwidth() -> f64 {
    let len = 8 << 20;
    let src = vec![1.0f32; len];
    let mut dst = vec![0.0f32; len];
    let mut best = 0.0f64;
    for _ in 0..5 {
        let t0 = Instant::now();
        dst.copy_from_slice(black_box(&src));
        black_box(&mut dst);
        let dt = t0.elapsed().as_secs_f64();
        // one read plus one write per element
        best = best.max((2 * len * 4) as f64 / dt);
    }
    best
}
