use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use super::{percent, Category, LevelBytes, MemLevel, Trace};
use crate::error::{Error, Result};
use crate::roofline::DeviceSpec;

fn non_empty(trace: &Trace, what: &str) -> Result<()> {
    if trace.is_empty() {
        return Err(Error::Usage(format!("{what} needs a non-empty trace")));
    }
    Ok(())
}

/// Aggregate of all records sharing one op name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelStats {
    pub name: String,
    pub category: Category,
    pub calls: usize,
    pub duration_s: f64,
    pub flops: u64,
    pub bytes: LevelBytes,
    pub duration_share: f64,
    pub flops_share: f64,
}

/// Position of a kernel in the duration ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RankGroup {
    Top5,
    Top6To20,
    Rest,
}

impl RankGroup {
    /// Group of the kernel at 0-based `rank`, for boundaries `(first, second)`.
    pub fn for_rank(rank: usize, bounds: (usize, usize)) -> Self {
        if rank < bounds.0 {
            RankGroup::Top5
        } else if rank < bounds.1 {
            RankGroup::Top6To20
        } else {
            RankGroup::Rest
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RankGroup::Top5 => "top5",
            RankGroup::Top6To20 => "top6-20",
            RankGroup::Rest => "rest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelRanking {
    pub kernels: Vec<KernelStats>,
    pub total_duration_s: f64,
    pub total_flops: u64,
}

/// Groups records by op name and sorts by total duration, longest first;
/// ties go to the lexicographically smaller name.
pub fn rank_kernels(trace: &Trace) -> Result<KernelRanking> {
    non_empty(trace, "kernel ranking")?;
    let mut groups: BTreeMap<&str, KernelStats> = BTreeMap::new();
    for r in &trace.records {
        let k = groups.entry(&r.op).or_insert_with(|| KernelStats {
            name: r.op.clone(),
            category: r.category,
            calls: 0,
            duration_s: 0.0,
            flops: 0,
            bytes: LevelBytes::default(),
            duration_share: 0.0,
            flops_share: 0.0,
        });
        k.calls += 1;
        k.duration_s += r.duration_s;
        k.flops += r.flops;
        k.bytes.l1 += r.bytes.l1;
        k.bytes.l2 += r.bytes.l2;
        k.bytes.hbm += r.bytes.hbm;
    }
    let mut kernels: Vec<KernelStats> = groups.into_values().collect();
    let total_duration_s: f64 = kernels.iter().map(|k| k.duration_s).sum();
    let total_flops: u64 = kernels.iter().map(|k| k.flops).sum();
    for k in &mut kernels {
        k.duration_share = k.duration_s / total_duration_s;
        k.flops_share = if total_flops == 0 {
            0.0
        } else {
            k.flops as f64 / total_flops as f64
        };
    }
    kernels.sort_by(|a, b| {
        b.duration_s
            .total_cmp(&a.duration_s)
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(KernelRanking {
        kernels,
        total_duration_s,
        total_flops,
    })
}

impl KernelRanking {
    pub fn top_flops_share(&self, k: usize) -> f64 {
        self.kernels.iter().take(k).map(|s| s.flops_share).sum()
    }

    pub fn top_duration_share(&self, k: usize) -> f64 {
        self.kernels.iter().take(k).map(|s| s.duration_share).sum()
    }

    pub fn render(&self, top_n: usize) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>4}  {:<44} {:<18} {:>7} {:>12} {:>8} {:>8}",
            "rank", "kernel", "category", "calls", "time [s]", "time", "flops"
        );
        for (i, k) in self.kernels.iter().take(top_n).enumerate() {
            let _ = writeln!(
                s,
                "{:>4}  {:<44} {:<18} {:>7} {:>12.6e} {:>8} {:>8}",
                i + 1,
                k.name,
                k.category.to_string(),
                k.calls,
                k.duration_s,
                percent(k.duration_share),
                percent(k.flops_share)
            );
        }
        let n = self.kernels.len().min(3);
        let _ = writeln!(
            s,
            "top-{n} kernels: {} of total FLOPs, {} of total time",
            percent(self.top_flops_share(n)),
            percent(self.top_duration_share(n))
        );
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("rank,kernel,category,calls,duration_s,flops,duration_share,flops_share\n");
        for (i, k) in self.kernels.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{:e},{},{:e},{:e}",
                i + 1,
                k.name,
                k.category,
                k.calls,
                k.duration_s,
                k.flops,
                k.duration_share,
                k.flops_share
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeBreakdown {
    /// Sum of record durations.
    pub busy_s: f64,
    /// Wall time covering the records, when the trace carries it.
    pub wall_s: Option<f64>,
    /// Fraction of busy time per category; sums to 1.
    pub fractions: Vec<(Category, f64)>,
}

pub fn time_breakdown(trace: &Trace) -> Result<TimeBreakdown> {
    non_empty(trace, "time breakdown")?;
    let mut per: BTreeMap<Category, f64> = BTreeMap::new();
    for r in &trace.records {
        *per.entry(r.category).or_default() += r.duration_s;
    }
    let busy_s: f64 = per.values().sum();
    let mut fractions: Vec<(Category, f64)> =
        per.into_iter().map(|(c, d)| (c, d / busy_s)).collect();
    fractions.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(TimeBreakdown {
        busy_s,
        wall_s: trace.meta.wall_s,
        fractions,
    })
}

impl TimeBreakdown {
    pub fn fraction(&self, c: Category) -> f64 {
        self.fractions
            .iter()
            .find(|(k, _)| *k == c)
            .map_or(0.0, |(_, f)| *f)
    }

    /// Share of busy time spent in back-propagation kernels.
    pub fn grad_fraction(&self) -> f64 {
        self.fractions
            .iter()
            .filter(|(c, _)| c.grad)
            .map(|(_, f)| f)
            .sum()
    }

    /// Wall time not covered by any record, as a fraction of wall time.
    pub fn idle_fraction(&self) -> Option<f64> {
        self.wall_s
            .filter(|&w| w > 0.0)
            .map(|w| ((w - self.busy_s) / w).max(0.0))
    }

    /// Fractions of wall time with an `idle` pseudo-category; falls back to
    /// busy-time fractions when no wall time is known.
    pub fn with_idle(&self) -> Vec<(String, f64)> {
        let mut rows: Vec<(String, f64)> = Vec::new();
        match (self.idle_fraction(), self.wall_s) {
            (Some(idle), Some(w)) => {
                let busy_scale = if w > self.busy_s { self.busy_s / w } else { 1.0 };
                rows.extend(
                    self.fractions
                        .iter()
                        .map(|(c, f)| (c.to_string(), f * busy_scale)),
                );
                rows.push(("idle".to_string(), idle));
            }
            _ => rows.extend(self.fractions.iter().map(|(c, f)| (c.to_string(), *f))),
        }
        rows
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (name, f) in self.with_idle() {
            let _ = writeln!(s, "  {:<22} {:>7}", name, percent(f));
        }
        let _ = writeln!(
            s,
            "  back-propagation share of busy time: {}",
            percent(self.grad_fraction())
        );
        s
    }
}

/// Achieved FLOP rate over the traced records divided by the device peak.
/// Values above 1 indicate the device spec understates the executing host
/// and are returned unclamped.
pub fn flop_utilization(trace: &Trace, device: &DeviceSpec) -> Result<f64> {
    let duration = trace.total_duration();
    if duration.is_nan() || duration <= 0.0 {
        return Err(Error::Usage(
            "FLOP utilization needs a trace with positive total duration".into(),
        ));
    }
    Ok(trace.total_flops() as f64 / duration / device.peak_flops)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroAiReport {
    pub kernels: usize,
    pub zero_ai_kernels: Vec<String>,
    pub count_share: f64,
    pub duration_share: f64,
    pub byte_share: BTreeMap<MemLevel, f64>,
}

/// Share of kernels, time and traffic taken by kernels that perform no
/// floating-point work (pure data movement).
pub fn zero_ai_report(trace: &Trace) -> Result<ZeroAiReport> {
    let ranking = rank_kernels(trace)?;
    let zero: Vec<&super::KernelStats> = ranking.kernels.iter().filter(|k| k.flops == 0).collect();
    let mut byte_share = BTreeMap::new();
    for level in MemLevel::ALL {
        let total: u64 = ranking.kernels.iter().map(|k| k.bytes.get(level)).sum();
        let part: u64 = zero.iter().map(|k| k.bytes.get(level)).sum();
        byte_share.insert(
            level,
            if total == 0 { 0.0 } else { part as f64 / total as f64 },
        );
    }
    Ok(ZeroAiReport {
        kernels: ranking.kernels.len(),
        zero_ai_kernels: zero.iter().map(|k| k.name.clone()).collect(),
        count_share: zero.len() as f64 / ranking.kernels.len() as f64,
        duration_share: zero.iter().map(|k| k.duration_share).sum(),
        byte_share,
    })
}

impl ZeroAiReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "zero-AI kernels: {} of {} ({}), {} of total time",
            self.zero_ai_kernels.len(),
            self.kernels,
            percent(self.count_share),
            percent(self.duration_share)
        );
        let levels: Vec<String> = self
            .byte_share
            .iter()
            .map(|(l, f)| format!("{} {}", l.as_str().to_uppercase(), percent(*f)))
            .collect();
        let _ = writeln!(s, "zero-AI share of data transactions: {}", levels.join(", "));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiler::{OpKind, OpRecord};

    fn rec(op: &str, kind: OpKind, flops: u64, dur: f64) -> OpRecord {
        OpRecord {
            op: op.into(),
            category: Category::forward(kind),
            flops,
            bytes: LevelBytes { l1: 10, l2: 10, hbm: 10 },
            duration_s: dur,
            step: 0,
            replica: 0,
        }
    }

    #[test]
    fn single_op_has_full_share() {
        let t = Trace::from_records(vec![rec("mm", OpKind::MatMul, 8, 0.2)]);
        let r = rank_kernels(&t).unwrap();
        assert_eq!(r.kernels.len(), 1);
        assert_eq!(r.kernels[0].duration_share, 1.0);
    }

    #[test]
    fn shares_three_to_one() {
        let t = Trace::from_records(vec![
            rec("b", OpKind::MatMul, 1, 1.0),
            rec("a", OpKind::MatMul, 1, 3.0),
        ]);
        let r = rank_kernels(&t).unwrap();
        assert_eq!(r.kernels[0].name, "a");
        assert_eq!(r.kernels[0].duration_share, 0.75);
        assert_eq!(r.kernels[1].duration_share, 0.25);
    }

    #[test]
    fn ties_break_by_name() {
        let t = Trace::from_records(vec![
            rec("zeta", OpKind::Other, 0, 1.0),
            rec("alpha", OpKind::Other, 0, 1.0),
        ]);
        let r = rank_kernels(&t).unwrap();
        assert_eq!(r.kernels[0].name, "alpha");
    }

    #[test]
    fn empty_trace_is_usage_error() {
        let t = Trace::default();
        assert!(matches!(rank_kernels(&t), Err(Error::Usage(_))));
        assert!(matches!(time_breakdown(&t), Err(Error::Usage(_))));
        assert!(matches!(zero_ai_report(&t), Err(Error::Usage(_))));
    }

    #[test]
    fn breakdown_quarters() {
        let kinds = [OpKind::MatMul, OpKind::SegmentSum, OpKind::ConcatSlice, OpKind::Elementwise];
        let t = Trace::from_records(kinds.iter().map(|&k| rec(k.as_str(), k, 0, 0.5)).collect());
        let b = time_breakdown(&t).unwrap();
        for k in kinds {
            assert_eq!(b.fraction(Category::forward(k)), 0.25);
        }
    }

    #[test]
    fn idle_pseudo_category() {
        let mut t = Trace::from_records(vec![rec("mm", OpKind::MatMul, 1, 0.8)]);
        t.meta.wall_s = Some(1.0);
        let b = time_breakdown(&t).unwrap();
        let rows = b.with_idle();
        let total: f64 = rows.iter().map(|r| r.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((b.idle_fraction().unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn no_zero_flop_ops_gives_zero_shares() {
        let t = Trace::from_records(vec![rec("mm", OpKind::MatMul, 5, 1.0)]);
        let z = zero_ai_report(&t).unwrap();
        assert_eq!(z.count_share, 0.0);
        assert_eq!(z.duration_share, 0.0);
        assert!(z.byte_share.values().all(|&v| v == 0.0));
    }
}
