use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::OpRecord;
use crate::error::{Error, Result};
use crate::tensor::DType;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub config_hash: Option<String>,
    #[serde(default)]
    pub host: String,
    #[serde(default)]
    pub dtype: Option<DType>,
    /// Wall time covering the traced steps; idle time is this minus the
    /// summed record durations.
    #[serde(default)]
    pub wall_s: Option<f64>,
    /// Full per-epoch latencies of the run that produced the trace.
    #[serde(default)]
    pub epoch_seconds: Vec<f64>,
}

/// Ordered operation records plus run metadata.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub meta: TraceMeta,
    pub records: Vec<OpRecord>,
}

impl Trace {
    pub fn new(meta: TraceMeta) -> Self {
        Trace {
            meta,
            records: Vec::new(),
        }
    }

    pub fn from_records(records: Vec<OpRecord>) -> Self {
        Trace {
            meta: TraceMeta::default(),
            records,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends records from several replicas. The result is ordered by step,
    /// then replica, then arrival order within a replica, so the merged trace
    /// does not depend on replica scheduling.
    pub fn merge_replicas(&mut self, per_replica: Vec<Vec<OpRecord>>) {
        let mut incoming: Vec<OpRecord> = per_replica.into_iter().flatten().collect();
        incoming.sort_by_key(|r| (r.step, r.replica));
        self.records.extend(incoming);
    }

    pub fn total_duration(&self) -> f64 {
        self.records.iter().map(|r| r.duration_s).sum()
    }

    pub fn total_flops(&self) -> u64 {
        self.records.iter().map(|r| r.flops).sum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("trace serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let trace: Trace = serde_json::from_str(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            if !(r.duration_s > 0.0 && r.duration_s.is_finite()) {
                return Err(Error::Data(format!(
                    "record {i} ({}) has non-positive duration {}",
                    r.op, r.duration_s
                )));
            }
        }
        Ok(())
    }
}

pub fn host_description() -> String {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{}-{} ({} hardware threads)",
        std::env::consts::OS,
        std::env::consts::ARCH,
        threads
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiler::{Category, LevelBytes, OpKind};

    fn rec(op: &str, step: u64, replica: u32) -> OpRecord {
        OpRecord {
            op: op.into(),
            category: Category::forward(OpKind::Other),
            flops: 0,
            bytes: LevelBytes::default(),
            duration_s: 1e-6,
            step,
            replica,
        }
    }

    #[test]
    fn merge_orders_by_step_then_replica() {
        let mut t = Trace::default();
        t.merge_replicas(vec![
            vec![rec("a0", 0, 0), rec("a1", 0, 0), rec("a2", 1, 0)],
            vec![rec("b0", 0, 1), rec("b1", 1, 1)],
        ]);
        let names: Vec<_> = t.records.iter().map(|r| r.op.as_str()).collect();
        assert_eq!(names, ["a0", "a1", "b0", "a2", "b1"]);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.trace");
        let mut t = Trace::from_records(vec![rec("x", 3, 1)]);
        t.meta.wall_s = Some(0.5);
        t.save(&path).unwrap();
        assert_eq!(Trace::load(&path).unwrap(), t);
    }
}
