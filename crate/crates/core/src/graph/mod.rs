//! Event graphs: hits as nodes, directed candidate connections as edges,
//! binary truth labels, plus the synthetic generator, size statistics,
//! quantile padding and on-disk format.

mod generator;
mod io;
mod padding;
mod stats;

pub use generator::{generate_dataset, generate_event, generate_event_with_truth, GeneratedEvent, GeneratorConfig};
pub use io::{event_from_json, event_to_json, read_dataset, read_event, write_dataset, write_event, DatasetManifest};
pub use padding::{pad_dataset, pad_graph, quantile_pad_size, PaddingSpec, Truncation};
pub use stats::{size_histogram, SizeStats, SizeSummary};

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Width of a node feature row: cylindrical `(r [mm], phi [rad], z [mm])`.
pub const NODE_FEATURES: usize = 3;

/// One collision event. Edges point from a sender hit to a receiver hit.
/// Padded graphs carry validity masks; unpadded graphs have all-true masks.
#[derive(Debug, Clone, PartialEq)]
pub struct EventGraph {
    node_features: Tensor<f32>,
    senders: Arc<[usize]>,
    receivers: Arc<[usize]>,
    edge_labels: Vec<u8>,
    node_valid: Vec<bool>,
    edge_valid: Vec<bool>,
}

impl EventGraph {
    /// An unpadded graph; every node and edge is valid.
    pub fn new(
        node_features: Tensor<f32>,
        senders: Vec<usize>,
        receivers: Vec<usize>,
        edge_labels: Vec<u8>,
    ) -> Result<Self> {
        let n = node_features.shape().first().copied().unwrap_or(0);
        let e = senders.len();
        Self::with_masks(node_features, senders, receivers, edge_labels, vec![true; n], vec![true; e])
    }

    pub fn with_masks(
        node_features: Tensor<f32>,
        senders: Vec<usize>,
        receivers: Vec<usize>,
        edge_labels: Vec<u8>,
        node_valid: Vec<bool>,
        edge_valid: Vec<bool>,
    ) -> Result<Self> {
        let g = EventGraph {
            node_features,
            senders: senders.into(),
            receivers: receivers.into(),
            edge_labels,
            node_valid,
            edge_valid,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Data(m));
        let shape = self.node_features.shape();
        if shape.len() != 2 || shape[1] != NODE_FEATURES {
            return bad(format!("node features must be [N, 3], got {shape:?}"));
        }
        let n = shape[0];
        let e = self.senders.len();
        if self.receivers.len() != e || self.edge_labels.len() != e || self.edge_valid.len() != e {
            return bad(format!(
                "edge arrays disagree: {} senders, {} receivers, {} labels, {} masks",
                e,
                self.receivers.len(),
                self.edge_labels.len(),
                self.edge_valid.len()
            ));
        }
        if self.node_valid.len() != n {
            return bad(format!("{} node masks for {} nodes", self.node_valid.len(), n));
        }
        for i in 0..e {
            let (s, r) = (self.senders[i], self.receivers[i]);
            if s >= n || r >= n {
                return bad(format!("edge {i} ({s} -> {r}) leaves the {n}-node graph"));
            }
            if self.edge_labels[i] > 1 {
                return bad(format!("edge {i} has label {}", self.edge_labels[i]));
            }
            if self.edge_valid[i] && s == r {
                return bad(format!("edge {i} is a self loop on node {s}"));
            }
            if !self.edge_valid[i] && self.edge_labels[i] != 0 {
                return bad(format!("padded edge {i} carries a true label"));
            }
        }
        for (i, row) in self.node_features.data().chunks(NODE_FEATURES).enumerate() {
            let phi = row[1] as f64;
            if !(-PI..=PI).contains(&phi) || row.iter().any(|v| !v.is_finite()) {
                return bad(format!("node {i} has invalid coordinates {row:?}"));
            }
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.node_valid.len()
    }

    pub fn num_edges(&self) -> usize {
        self.senders.len()
    }

    pub fn node_features(&self) -> &Tensor<f32> {
        &self.node_features
    }

    pub fn senders(&self) -> &Arc<[usize]> {
        &self.senders
    }

    pub fn receivers(&self) -> &Arc<[usize]> {
        &self.receivers
    }

    pub fn edge_labels(&self) -> &[u8] {
        &self.edge_labels
    }

    pub fn node_valid(&self) -> &[bool] {
        &self.node_valid
    }

    pub fn edge_valid(&self) -> &[bool] {
        &self.edge_valid
    }

    pub fn is_padded(&self) -> bool {
        self.edge_valid.iter().any(|v| !v) || self.node_valid.iter().any(|v| !v)
    }

    pub fn num_valid_nodes(&self) -> usize {
        self.node_valid.iter().filter(|&&v| v).count()
    }

    pub fn num_valid_edges(&self) -> usize {
        self.edge_valid.iter().filter(|&&v| v).count()
    }

    pub fn num_true_edges(&self) -> usize {
        self.edge_labels.iter().filter(|&&l| l == 1).count()
    }

    /// The same graph with edges reordered so that new edge `i` is old edge
    /// `perm[i]`.
    pub fn permute_edges(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_edges() {
            return Err(Error::Usage("edge permutation has the wrong length".into()));
        }
        let pick = |v: &[usize]| perm.iter().map(|&p| v[p]).collect::<Vec<_>>();
        Self::with_masks(
            self.node_features.clone(),
            pick(&self.senders),
            pick(&self.receivers),
            perm.iter().map(|&p| self.edge_labels[p]).collect(),
            self.node_valid.clone(),
            perm.iter().map(|&p| self.edge_valid[p]).collect(),
        )
    }

    /// Relabels nodes so that old node `i` becomes node `perm[i]`.
    pub fn relabel_nodes(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        if perm.len() != n {
            return Err(Error::Usage("node permutation has the wrong length".into()));
        }
        let mut feats = vec![0f32; n * NODE_FEATURES];
        let mut valid = vec![false; n];
        let src = self.node_features.data();
        for (old, &new) in perm.iter().enumerate() {
            feats[new * NODE_FEATURES..(new + 1) * NODE_FEATURES]
                .copy_from_slice(&src[old * NODE_FEATURES..(old + 1) * NODE_FEATURES]);
            valid[new] = self.node_valid[old];
        }
        Self::with_masks(
            Tensor::new(vec![n, NODE_FEATURES], feats)?,
            self.senders.iter().map(|&s| perm[s]).collect(),
            self.receivers.iter().map(|&r| perm[r]).collect(),
            self.edge_labels.clone(),
            valid,
            self.edge_valid.clone(),
        )
    }
}

/// Disjoint union of several graphs into one; node indices of later graphs
/// are shifted by the node counts before them.
pub fn batch_graphs(graphs: &[&EventGraph]) -> Result<EventGraph> {
    if let [single] = graphs {
        return Ok((*single).clone());
    }
    let mut feats = Vec::new();
    let (mut senders, mut receivers, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    let (mut node_valid, mut edge_valid) = (Vec::new(), Vec::new());
    let mut offset = 0;
    for g in graphs {
        feats.extend_from_slice(g.node_features.data());
        senders.extend(g.senders.iter().map(|s| s + offset));
        receivers.extend(g.receivers.iter().map(|r| r + offset));
        labels.extend_from_slice(&g.edge_labels);
        node_valid.extend_from_slice(&g.node_valid);
        edge_valid.extend_from_slice(&g.edge_valid);
        offset += g.num_nodes();
    }
    EventGraph::with_masks(
        Tensor::new(vec![offset, NODE_FEATURES], feats)?,
        senders,
        receivers,
        labels,
        node_valid,
        edge_valid,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> EventGraph {
        let x = Tensor::from_rows(&[vec![30.0, 0.1, 1.0], vec![130.0, 0.12, 2.0], vec![230.0, 0.5, 3.0]]).unwrap();
        EventGraph::new(x, vec![0, 1], vec![1, 2], vec![1, 0]).unwrap()
    }

    #[test]
    fn rejects_invariant_violations() {
        let x = Tensor::<f32>::zeros(&[2, 3]);
        assert!(EventGraph::new(x.clone(), vec![0], vec![2], vec![1]).is_err());
        assert!(EventGraph::new(x.clone(), vec![0], vec![0], vec![1]).is_err());
        assert!(EventGraph::new(x.clone(), vec![0], vec![1], vec![2]).is_err());
        let bad_phi = Tensor::from_rows(&[vec![1.0, 4.0, 0.0]]).unwrap();
        assert!(EventGraph::new(bad_phi, vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn batching_offsets_indices() {
        let g = tiny();
        let b = batch_graphs(&[&g, &g]).unwrap();
        assert_eq!(b.num_nodes(), 6);
        assert_eq!(&b.senders()[..], &[0, 1, 3, 4]);
        assert_eq!(&b.receivers()[..], &[1, 2, 4, 5]);
        assert_eq!(b.edge_labels(), &[1, 0, 1, 0]);
    }

    #[test]
    fn relabel_and_permute_keep_structure() {
        let g = tiny();
        let r = g.relabel_nodes(&[2, 0, 1]).unwrap();
        assert_eq!(&r.senders()[..], &[2, 0]);
        assert_eq!(r.node_features().data()[0], 130.0);
        let p = g.permute_edges(&[1, 0]).unwrap();
        assert_eq!(p.edge_labels(), &[0, 1]);
    }
}
