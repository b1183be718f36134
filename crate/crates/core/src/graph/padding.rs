use serde::{Deserialize, Serialize};

use super::{EventGraph, NODE_FEATURES};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Nearest-rank quantile: the value at 1-based rank `ceil(q * n)` of the
/// sorted sizes, so the result is always one of the inputs.
pub fn quantile_pad_size(sizes: &[usize], q: f64) -> Result<usize> {
    if sizes.is_empty() {
        return Err(Error::Usage("quantile of an empty size list".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Usage(format!("quantile {q} outside (0, 1]")));
    }
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    // the epsilon keeps q*n = 99.00000000000001 at rank 99
    let rank = ((q * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    Ok(sorted[rank - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaddingSpec {
    target_nodes: usize,
    target_edges: usize,
    quantile: f64,
}

impl PaddingSpec {
    pub fn new(target_nodes: usize, target_edges: usize, quantile: f64) -> Result<Self> {
        if !(quantile > 0.0 && quantile <= 1.0) {
            return Err(Error::Config(format!("pad quantile {quantile} outside (0, 1]")));
        }
        if target_edges > 0 && target_nodes == 0 {
            return Err(Error::Config("padded edges need at least one node to attach to".into()));
        }
        Ok(PaddingSpec { target_nodes, target_edges, quantile })
    }

    /// Targets at the `quantile` of the valid node and edge counts.
    pub fn from_dataset(graphs: &[EventGraph], quantile: f64) -> Result<Self> {
        let n: Vec<_> = graphs.iter().map(|g| g.num_valid_nodes()).collect();
        let e: Vec<_> = graphs.iter().map(|g| g.num_valid_edges()).collect();
        let (tn, te) = (quantile_pad_size(&n, quantile)?, quantile_pad_size(&e, quantile)?);
        Self::new(tn.max(1), te, quantile)
    }

    pub fn target_nodes(&self) -> usize {
        self.target_nodes
    }

    pub fn target_edges(&self) -> usize {
        self.target_edges
    }

    pub fn quantile(&self) -> f64 {
        self.quantile
    }
}

/// What truncation removed from one graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Truncation {
    pub nodes_dropped: usize,
    pub edges_dropped: usize,
}

impl Truncation {
    pub fn any(&self) -> bool {
        self.nodes_dropped > 0 || self.edges_dropped > 0
    }
}

/// Pads `g` to the spec's sizes with zero nodes and masked edges that
/// attach to the last node. Oversize graphs lose their highest-index nodes
/// (and every edge touching them), then their highest-index edges.
pub fn pad_graph(g: &EventGraph, spec: &PaddingSpec) -> Result<(EventGraph, Truncation)> {
    let (tn, te) = (spec.target_nodes, spec.target_edges);
    let mut trunc = Truncation::default();
    let keep_nodes = g.num_nodes().min(tn);
    trunc.nodes_dropped = g.num_nodes() - keep_nodes;

    let mut feats = g.node_features().data()[..keep_nodes * NODE_FEATURES].to_vec();
    feats.resize(tn * NODE_FEATURES, 0.0);
    let mut node_valid = g.node_valid()[..keep_nodes].to_vec();
    node_valid.resize(tn, false);

    let (mut s, mut r, mut y, mut m) = (Vec::with_capacity(te), Vec::with_capacity(te), Vec::with_capacity(te), Vec::with_capacity(te));
    let mut dropped_by_nodes = 0;
    for i in 0..g.num_edges() {
        let (a, b) = (g.senders()[i], g.receivers()[i]);
        if a >= keep_nodes || b >= keep_nodes {
            dropped_by_nodes += 1;
            continue;
        }
        s.push(a);
        r.push(b);
        y.push(g.edge_labels()[i]);
        m.push(g.edge_valid()[i]);
    }
    trunc.edges_dropped = dropped_by_nodes + s.len().saturating_sub(te);
    s.truncate(te);
    r.truncate(te);
    y.truncate(te);
    m.truncate(te);
    let sink = tn.saturating_sub(1);
    s.resize(te, sink);
    r.resize(te, sink);
    y.resize(te, 0);
    m.resize(te, false);

    let out = EventGraph::with_masks(Tensor::new(vec![tn, NODE_FEATURES], feats)?, s, r, y, node_valid, m)?;
    Ok((out, trunc))
}

/// Pads every graph; returns the padded graphs and how many were truncated.
pub fn pad_dataset(graphs: &[EventGraph], spec: &PaddingSpec) -> Result<(Vec<EventGraph>, usize)> {
    let mut truncated = 0;
    let mut out = Vec::with_capacity(graphs.len());
    for g in graphs {
        let (p, t) = pad_graph(g, spec)?;
        truncated += t.any() as usize;
        out.push(p);
    }
    Ok((out, truncated))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> EventGraph {
        let x = Tensor::from_rows(&[vec![1.0, 0.0, 1.0], vec![2.0, 0.5, 2.0], vec![3.0, 1.0, 3.0]]).unwrap();
        EventGraph::new(x, vec![0, 1], vec![1, 2], vec![1, 1]).unwrap()
    }

    #[test]
    fn nearest_rank_quantile() {
        let sizes: Vec<usize> = (1..=100).map(|i| i * 10).collect();
        assert_eq!(quantile_pad_size(&sizes, 0.99).unwrap(), 990);
        assert_eq!(quantile_pad_size(&sizes, 1.0).unwrap(), 1000);
        assert_eq!(quantile_pad_size(&[7], 0.3).unwrap(), 7);
        assert!(quantile_pad_size(&[], 0.5).is_err());
        assert!(quantile_pad_size(&[1], 0.0).is_err());
    }

    #[test]
    fn pads_with_masks() {
        let (p, t) = pad_graph(&small(), &PaddingSpec::new(5, 4, 1.0).unwrap()).unwrap();
        assert!(!t.any());
        assert_eq!(p.node_valid(), &[true, true, true, false, false]);
        assert_eq!(p.edge_valid(), &[true, true, false, false]);
        assert_eq!(&p.senders()[2..], &[4, 4]);
        assert_eq!(&p.receivers()[2..], &[4, 4]);
        assert_eq!(&p.node_features().data()[9..], &[0.0; 6]);
    }

    #[test]
    fn exact_spec_is_identity() {
        let g = small();
        let (p, _) = pad_graph(&g, &PaddingSpec::new(3, 2, 1.0).unwrap()).unwrap();
        assert_eq!(p, g);
    }

    #[test]
    fn truncates_oversize() {
        let (p, t) = pad_graph(&small(), &PaddingSpec::new(2, 2, 0.5).unwrap()).unwrap();
        assert_eq!(t, Truncation { nodes_dropped: 1, edges_dropped: 1 });
        assert_eq!(p.num_nodes(), 2);
        assert_eq!(p.edge_valid(), &[true, false]);
        let (p, t) = pad_graph(&small(), &PaddingSpec::new(3, 1, 0.5).unwrap()).unwrap();
        assert_eq!(t.edges_dropped, 1);
        assert_eq!(p.num_edges(), 1);
    }
}
