//! Per-op instrumentation and the reports built from it: kernel ranking,
//! time breakdown by category, FLOP utilization and zero-AI analysis.
//!
//! Durations measured on a desk-scale host are noisy; tests assert on FLOPs
//! and counts only.

mod record;
mod report;
mod trace;

pub use record::{
    ByteModel, Category, CostModel, LevelBytes, MemLevel, OpKind, OpRecord, Recorder, Stopwatch,
    Timer, MIN_DURATION_S,
};
pub use report::{
    flop_utilization, rank_kernels, time_breakdown, zero_ai_report, KernelRanking, KernelStats,
    RankGroup, TimeBreakdown, ZeroAiReport,
};
pub use trace::{host_description, Trace, TraceMeta};

/// Formats a fraction as a percentage with one decimal, e.g. `0.987 -> "98.7%"`.
pub fn percent(fraction: f64) -> String {
    format!("{:.1}%", fraction * 100.0)
}
