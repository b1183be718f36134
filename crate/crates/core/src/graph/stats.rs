use std::fmt::Write;

use serde::Serialize;

use super::{quantile_pad_size, EventGraph};
use crate::error::{Error, Result};

const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeSummary {
    pub mean: f64,
    pub min: usize,
    pub max: usize,
    pub p50: usize,
    pub p90: usize,
    pub p99: usize,
}

impl SizeSummary {
    fn of(sizes: &[usize]) -> Result<Self> {
        let q = |f| quantile_pad_size(sizes, f);
        Ok(SizeSummary {
            mean: sizes.iter().sum::<usize>() as f64 / sizes.len() as f64,
            min: *sizes.iter().min().ok_or_else(|| Error::Usage("no sizes".into()))?,
            max: *sizes.iter().max().expect("non-empty"),
            p50: q(0.5)?,
            p90: q(0.9)?,
            p99: q(0.99)?,
        })
    }
}

/// Per-event (nodes, edges) counts with summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeStats {
    pub sizes: Vec<(usize, usize)>,
    pub nodes: SizeSummary,
    pub edges: SizeSummary,
}

pub fn size_histogram(events: &[EventGraph]) -> Result<SizeStats> {
    if events.is_empty() {
        return Err(Error::Usage("size histogram of an empty dataset".into()));
    }
    let sizes: Vec<_> = events.iter().map(|g| (g.num_valid_nodes(), g.num_valid_edges())).collect();
    let n: Vec<_> = sizes.iter().map(|s| s.0).collect();
    let e: Vec<_> = sizes.iter().map(|s| s.1).collect();
    Ok(SizeStats { nodes: SizeSummary::of(&n)?, edges: SizeSummary::of(&e)?, sizes })
}

impl SizeStats {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("event,nodes,edges\n");
        for (i, (n, e)) in self.sizes.iter().enumerate() {
            let _ = writeln!(s, "{i},{n},{e}");
        }
        s
    }

    /// Text summary with one bar histogram each for nodes and edges.
    pub fn render(&self) -> String {
        let mut s = format!("events: {}\n", self.sizes.len());
        for (label, sum, pick) in [
            ("nodes", &self.nodes, 0usize),
            ("edges", &self.edges, 1usize),
        ] {
            let _ = writeln!(
                s,
                "{label}: mean {:.1}, min {}, p50 {}, p90 {}, p99 {}, max {}",
                sum.mean, sum.min, sum.p50, sum.p90, sum.p99, sum.max
            );
            let values: Vec<usize> = self.sizes.iter().map(|v| if pick == 0 { v.0 } else { v.1 }).collect();
            s.push_str(&bars(&values, sum.min, sum.max));
        }
        s
    }
}

fn bars(values: &[usize], min: usize, max: usize) -> String {
    let span = (max - min).max(1);
    let bins = HISTOGRAM_BINS.min(span + 1);
    let mut counts = vec![0usize; bins];
    for &v in values {
        counts[((v - min) * bins / (span + 1)).min(bins - 1)] += 1;
    }
    let peak = counts.iter().copied().max().unwrap_or(1).max(1);
    let mut s = String::new();
    for (b, &c) in counts.iter().enumerate() {
        let lo = min + b * (span + 1) / bins;
        let _ = writeln!(s, "  {lo:>8} | {:<40} {c}", "#".repeat(c * 40 / peak));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_event, GeneratorConfig};

    fn ring(n: usize) -> EventGraph {
        let x = crate::tensor::Tensor::zeros(&[n, 3]);
        let s: Vec<usize> = (0..n - 1).collect();
        let r: Vec<usize> = (1..n).collect();
        EventGraph::new(x, s, r, vec![0; n - 1]).unwrap()
    }

    #[test]
    fn means() {
        let one = size_histogram(&[ring(100)]).unwrap();
        assert_eq!((one.nodes.mean, one.edges.mean), (100.0, 99.0));
        let two = size_histogram(&[ring(100), ring(200)]).unwrap();
        assert_eq!(two.nodes.mean, 150.0);
        assert!(two.render().contains("events: 2"));
        assert!(size_histogram(&[]).is_err());
    }

    #[test]
    fn generated_counts_are_exact() {
        let c = GeneratorConfig { particles_per_event: 10, layers: 10, false_edge_factor: 0.0, size_jitter: 0.0, ..Default::default() };
        let s = size_histogram(&[generate_event(&c).unwrap()]).unwrap();
        assert_eq!(s.sizes, vec![(100, 90)]);
    }
}
