use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    MatMul,
    SegmentSum,
    ConcatSlice,
    Elementwise,
    Optimizer,
    Other,
}

impl OpKind {
    pub const ALL: [OpKind; 6] = [
        OpKind::MatMul,
        OpKind::SegmentSum,
        OpKind::ConcatSlice,
        OpKind::Elementwise,
        OpKind::Optimizer,
        OpKind::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::MatMul => "matmul",
            OpKind::SegmentSum => "segment-sum",
            OpKind::ConcatSlice => "concat-slice",
            OpKind::Elementwise => "elementwise",
            OpKind::Optimizer => "optimizer",
            OpKind::Other => "other",
        }
    }
}

/// Operation category; `grad` marks work done during back-propagation and is
/// rendered with a `-grad` suffix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Category {
    pub kind: OpKind,
    pub grad: bool,
}

impl Category {
    pub const fn forward(kind: OpKind) -> Self {
        Category { kind, grad: false }
    }

    pub const fn backward(kind: OpKind) -> Self {
        Category { kind, grad: true }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.as_str())?;
        if self.grad {
            f.write_str("-grad")?;
        }
        Ok(())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (base, grad) = match s.strip_suffix("-grad") {
            Some(b) => (b, true),
            None => (s, false),
        };
        OpKind::ALL
            .into_iter()
            .find(|k| k.as_str() == base)
            .map(|kind| Category { kind, grad })
            .ok_or_else(|| Error::Data(format!("unknown op category `{s}`")))
    }
}

impl From<Category> for String {
    fn from(c: Category) -> String {
        c.to_string()
    }
}

impl TryFrom<String> for Category {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemLevel {
    L1,
    L2,
    Hbm,
}

impl MemLevel {
    pub const ALL: [MemLevel; 3] = [MemLevel::L1, MemLevel::L2, MemLevel::Hbm];

    pub fn as_str(self) -> &'static str {
        match self {
            MemLevel::L1 => "l1",
            MemLevel::L2 => "l2",
            MemLevel::Hbm => "hbm",
        }
    }
}

impl fmt::Display for MemLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Modeled bytes moved at each memory level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelBytes {
    pub l1: u64,
    pub l2: u64,
    pub hbm: u64,
}

impl LevelBytes {
    pub fn get(&self, level: MemLevel) -> u64 {
        match level {
            MemLevel::L1 => self.l1,
            MemLevel::L2 => self.l2,
            MemLevel::Hbm => self.hbm,
        }
    }
}

/// Per-level reuse factors applied to an op's base traffic (inputs read once
/// plus output written once).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ByteModel {
    pub l1: f64,
    pub l2: f64,
    pub hbm: f64,
}

impl Default for ByteModel {
    fn default() -> Self {
        ByteModel {
            l1: 1.0,
            l2: 1.0,
            hbm: 1.0,
        }
    }
}

impl ByteModel {
    pub fn apply(&self, base: u64) -> LevelBytes {
        let scale = |f: f64| (base as f64 * f).round() as u64;
        LevelBytes {
            l1: scale(self.l1),
            l2: scale(self.l2),
            hbm: scale(self.hbm),
        }
    }
}

/// Analytic duration model used instead of the host clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub flops_per_s: f64,
    pub bytes_per_s: f64,
    /// All-reduce link bandwidth; `None` models a free interconnect.
    pub interconnect_bytes_per_s: Option<f64>,
}

impl CostModel {
    pub fn duration(&self, flops: u64, hbm_bytes: u64) -> f64 {
        let t = flops as f64 / self.flops_per_s + hbm_bytes as f64 / self.bytes_per_s;
        t.max(MIN_DURATION_S)
    }

    pub fn transfer(&self, bytes: u64) -> f64 {
        self.interconnect_bytes_per_s
            .map_or(0.0, |bw| bytes as f64 / bw)
    }
}

/// Smallest duration a record can carry.
pub const MIN_DURATION_S: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum Timer {
    /// Monotonic host clock around every kernel.
    #[default]
    Wall,
    Simulated(CostModel),
}

/// One executed operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpRecord {
    pub op: String,
    pub category: Category,
    pub flops: u64,
    pub bytes: LevelBytes,
    pub duration_s: f64,
    pub step: u64,
    #[serde(default)]
    pub replica: u32,
}

/// Pending wall-clock measurement.
pub struct Stopwatch(Option<Instant>);

/// Collects [`OpRecord`]s for one replica.
#[derive(Debug, Clone)]
pub struct Recorder {
    timer: Timer,
    byte_model: ByteModel,
    enabled: bool,
    step: u64,
    replica: u32,
    records: Vec<OpRecord>,
}

impl Default for Recorder {
    fn default() -> Self {
        Recorder::new(Timer::Wall, ByteModel::default())
    }
}

impl Recorder {
    pub fn new(timer: Timer, byte_model: ByteModel) -> Self {
        Recorder {
            timer,
            byte_model,
            enabled: true,
            step: 0,
            replica: 0,
            records: Vec::new(),
        }
    }

    /// A recorder that drops everything.
    pub fn disabled() -> Self {
        Recorder {
            enabled: false,
            ..Recorder::default()
        }
    }

    pub fn timer(&self) -> Timer {
        self.timer
    }

    pub fn byte_model(&self) -> ByteModel {
        self.byte_model
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn set_enabled(&mut self, enabled: bool) {
        self.enabled = enabled;
    }

    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn set_replica(&mut self, replica: u32) {
        self.replica = replica;
    }

    pub fn start(&self) -> Stopwatch {
        match (self.enabled, self.timer) {
            (true, Timer::Wall) => Stopwatch(Some(Instant::now())),
            _ => Stopwatch(None),
        }
    }

    /// Closes a measurement opened by [`Recorder::start`] and stores the record.
    pub fn finish(&mut self, sw: Stopwatch, op: &str, category: Category, flops: u64, base_bytes: u64) {
        if !self.enabled {
            return;
        }
        let bytes = self.byte_model.apply(base_bytes);
        let duration_s = match (self.timer, sw.0) {
            (Timer::Simulated(cost), _) => cost.duration(flops, bytes.hbm),
            (Timer::Wall, Some(t0)) => t0.elapsed().as_secs_f64().max(MIN_DURATION_S),
            (Timer::Wall, None) => MIN_DURATION_S,
        };
        self.push(OpRecord {
            op: op.to_string(),
            category,
            flops,
            bytes,
            duration_s,
            step: self.step,
            replica: self.replica,
        });
    }

    /// Stores an externally timed record (e.g. a measured all-reduce).
    pub fn push(&mut self, record: OpRecord) {
        if self.enabled {
            self.records.push(record);
        }
    }

    pub fn records(&self) -> &[OpRecord] {
        &self.records
    }

    pub fn take_records(&mut self) -> Vec<OpRecord> {
        std::mem::take(&mut self.records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_round_trips_through_text() {
        for kind in OpKind::ALL {
            for c in [Category::forward(kind), Category::backward(kind)] {
                assert_eq!(c.to_string().parse::<Category>().unwrap(), c);
            }
        }
        assert_eq!(Category::backward(OpKind::SegmentSum).to_string(), "segment-sum-grad");
        assert!("fused".parse::<Category>().is_err());
    }

    #[test]
    fn byte_model_scales_each_level() {
        let m = ByteModel {
            l1: 4.0,
            l2: 2.0,
            hbm: 1.0,
        };
        assert_eq!(m.apply(100), LevelBytes { l1: 400, l2: 200, hbm: 100 });
    }

    #[test]
    fn simulated_durations_are_positive() {
        let cost = CostModel {
            flops_per_s: 1e9,
            bytes_per_s: 1e9,
            interconnect_bytes_per_s: None,
        };
        assert_eq!(cost.duration(0, 0), MIN_DURATION_S);
        assert!((cost.duration(1_000_000_000, 0) - 1.0).abs() < 1e-12);
    }
}
