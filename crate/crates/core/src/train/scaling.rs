use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

/// Modeled strong scaling of one data-parallel epoch. The serial time
/// charges every replica's gradient work plus one update per replica slice
/// to a single worker; the parallel time charges each step its slowest
/// replica, the all-reduce and one update.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingSummary {
    pub workers: usize,
    pub steps: usize,
    pub serial_seconds: f64,
    pub parallel_seconds: f64,
    pub allreduce_seconds: f64,
    pub speedup: f64,
    pub efficiency: f64,
}

impl ScalingSummary {
    pub(crate) fn start(workers: usize) -> Self {
        ScalingSummary {
            workers,
            steps: 0,
            serial_seconds: 0.0,
            parallel_seconds: 0.0,
            allreduce_seconds: 0.0,
            speedup: 0.0,
            efficiency: 0.0,
        }
    }

    pub(crate) fn add_step(&mut self, compute: &[f64], allreduce_s: f64, update_s: f64) {
        self.steps += 1;
        self.serial_seconds += compute.iter().map(|c| c + update_s).sum::<f64>();
        self.parallel_seconds += compute.iter().copied().fold(0.0, f64::max) + allreduce_s + update_s;
        self.allreduce_seconds += allreduce_s;
    }

    pub(crate) fn finish(mut self) -> Self {
        if self.parallel_seconds > 0.0 {
            self.speedup = self.serial_seconds / self.parallel_seconds;
            self.efficiency = self.speedup / self.workers as f64;
        }
        self
    }

    /// `(1, T1)` and `(W, TW)` in the shape [`strong_scaling_report`] takes.
    pub fn runs(&self) -> Vec<(usize, f64)> {
        if self.workers == 1 {
            vec![(1, self.parallel_seconds)]
        } else {
            vec![(1, self.serial_seconds), (self.workers, self.parallel_seconds)]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub workers: usize,
    pub seconds: f64,
    pub speedup: f64,
    pub efficiency: f64,
}

/// Speedup `T(1) / T(W)` and efficiency `speedup / W` per run.
pub fn strong_scaling_report(runs: &[(usize, f64)]) -> Result<Vec<ScalingRow>> {
    let base = runs
        .iter()
        .find(|r| r.0 == 1)
        .ok_or_else(|| Error::Usage("strong scaling needs a single-worker baseline".into()))?
        .1;
    let mut rows = Vec::with_capacity(runs.len());
    for &(workers, seconds) in runs {
        if workers == 0 || !(seconds > 0.0 && seconds.is_finite()) {
            return Err(Error::Usage(format!("invalid run ({workers} workers, {seconds} s)")));
        }
        let speedup = base / seconds;
        rows.push(ScalingRow { workers, seconds, speedup, efficiency: speedup / workers as f64 });
    }
    Ok(rows)
}

pub fn render_scaling(rows: &[ScalingRow]) -> String {
    let mut s = String::from("workers  seconds       speedup  efficiency\n");
    for r in rows {
        let _ = writeln!(s, "{:>7}  {:<12.6e}  {:>7.3}  {:>10.3}", r.workers, r.seconds, r.speedup, r.efficiency);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_examples() {
        let rows = strong_scaling_report(&[(1, 100.0), (2, 50.0), (4, 40.0)]).unwrap();
        assert_eq!((rows[1].speedup, rows[1].efficiency), (2.0, 1.0));
        assert_eq!((rows[2].speedup, rows[2].efficiency), (2.5, 0.625));
        assert!(strong_scaling_report(&[(2, 1.0)]).is_err());
        assert!(render_scaling(&rows).contains("0.625"));
    }

    #[test]
    fn uniform_free_steps_scale_perfectly() {
        let mut s = ScalingSummary::start(4);
        for _ in 0..3 {
            s.add_step(&[0.5; 4], 0.0, 0.25);
        }
        let s = s.finish();
        assert!((s.efficiency - 1.0).abs() < 1e-12);
        let mut skew = ScalingSummary::start(2);
        skew.add_step(&[1.0, 0.5], 0.0, 0.0);
        assert_eq!(skew.finish().efficiency, 0.75);
    }
}
