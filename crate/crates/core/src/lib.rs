//! Instrumented track-finding graph neural network benchmark.
//!
//! The crate trains an encoder / interaction-network / decoder edge
//! classifier on synthetic detector events with its own small tensor engine.
//! Every kernel is counted (FLOPs, modeled bytes per memory level, duration)
//! so training runs can be analyzed the way accelerator profiles are: kernel
//! rankings, time breakdowns, FLOP utilization, zero-arithmetic-intensity
//! kernels, roofline placement, and cost and energy per epoch.

pub mod cli;
pub mod error;
pub mod graph;
pub mod model;
pub mod profiler;
pub mod roofline;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
