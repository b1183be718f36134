//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use gnnbench::graph::EventGraph;
use gnnbench::model::{Mlp, ModelConfig, ModelParams, Nonlinearity};
use gnnbench::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rows = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A graph with detector-like coordinates, no self loops and both label
/// classes present.
pub fn random_graph(rng: &mut ChaCha8Rng, nodes: usize, edges: usize) -> EventGraph {
    assert!(nodes >= 2 && edges >= 2);
    let mut feats = Vec::with_capacity(nodes * 3);
    for _ in 0..nodes {
        feats.push(rng.random_range(30.0f32..1000.0));
        feats.push(rng.random_range(-3.1f32..3.1));
        feats.push(rng.random_range(-1000.0f32..1000.0));
    }
    let mut senders = Vec::with_capacity(edges);
    let mut receivers = Vec::with_capacity(edges);
    for _ in 0..edges {
        let s = rng.random_range(0..nodes);
        let mut r = rng.random_range(0..nodes - 1);
        if r >= s {
            r += 1;
        }
        senders.push(s);
        receivers.push(r);
    }
    let mut labels: Vec<u8> = (0..edges).map(|_| rng.random_range(0..2u8)).collect();
    labels[0] = 1;
    labels[1] = 0;
    let x = Tensor::new(vec![nodes, 3], feats).unwrap();
    EventGraph::new(x, senders, receivers, labels).unwrap()
}

fn tensor_rows(t: &Tensor<f64>) -> Rows {
    let (r, c) = (t.shape()[0], t.shape()[1]);
    (0..r).map(|i| t.data()[i * c..(i + 1) * c].to_vec()).collect()
}

fn act(v: f64, nl: Nonlinearity) -> f64 {
    match nl {
        Nonlinearity::Relu => v.max(0.0),
        Nonlinearity::Tanh => v.tanh(),
    }
}

/// `x @ W + b`, activated, one row at a time.
fn dense(x: &Rows, w: &Tensor<f64>, b: &Tensor<f64>, nl: Option<Nonlinearity>) -> Rows {
    let w = tensor_rows(w);
    let out = b.data().len();
    x.iter()
        .map(|row| {
            assert_eq!(row.len(), w.len());
            (0..out)
                .map(|j| {
                    let mut acc = b.data()[j];
                    for (k, xk) in row.iter().enumerate() {
                        acc += xk * w[k][j];
                    }
                    nl.map_or(acc, |nl| act(acc, nl))
                })
                .collect()
        })
        .collect()
}

fn mlp(x: &Rows, m: &Mlp<f64>, nl: Nonlinearity, activated: usize) -> Rows {
    let mut h = x.clone();
    for (i, l) in m.layers.iter().enumerate() {
        h = dense(&h, &l.weight, &l.bias, (i < activated).then_some(nl));
    }
    h
}

fn cat(parts: &[&[f64]]) -> Vec<f64> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

/// Straight-line forward pass: edge scores for every edge of `g`.
pub fn oracle_forward(p: &ModelParams<f64>, g: &EventGraph) -> Vec<f64> {
    let cfg = &p.config;
    let nl = cfg.nonlinearity;
    let feats = g.node_features().data();
    let x: Rows = (0..g.num_nodes())
        .map(|i| (0..3).map(|f| feats[i * 3 + f] as f64 * cfg.input_scale[f]).collect())
        .collect();
    let (s, r) = (g.senders(), g.receivers());
    let mut node = mlp(&x, &p.encoder_node, nl, usize::MAX);
    let edge_in: Rows = (0..g.num_edges()).map(|e| cat(&[&x[s[e]], &x[r[e]]])).collect();
    let mut edge = mlp(&edge_in, &p.encoder_edge, nl, usize::MAX);
    for it in 0..cfg.iterations {
        let block = &p.interaction[if cfg.share_interaction_weights { 0 } else { it }];
        let width = edge.first().map_or(cfg.latent(), Vec::len);
        let mut agg = vec![vec![0.0; width]; g.num_nodes()];
        for e in 0..g.num_edges() {
            if g.edge_valid()[e] {
                for (a, v) in agg[r[e]].iter_mut().zip(&edge[e]) {
                    *a += v;
                }
            }
        }
        let node_in: Rows = node.iter().zip(&agg).map(|(n, a)| cat(&[n, a])).collect();
        node = mlp(&node_in, &block.node, nl, usize::MAX);
        let edge_in: Rows = (0..g.num_edges()).map(|e| cat(&[&edge[e], &node[s[e]], &node[r[e]]])).collect();
        edge = mlp(&edge_in, &block.edge, nl, usize::MAX);
    }
    let hidden = p.decoder.layers.len() - 1;
    mlp(&edge, &p.decoder, nl, hidden)
        .into_iter()
        .map(|row| 1.0 / (1.0 + (-row[0]).exp()))
        .collect()
}

/// Mean clamped cross-entropy over valid edges.
pub fn oracle_loss(scores: &[f64], g: &EventGraph) -> f64 {
    let (mut total, mut n) = (0.0, 0usize);
    for (e, &score) in scores.iter().enumerate() {
        if !g.edge_valid()[e] {
            continue;
        }
        let p = score.clamp(1e-7, 1.0 - 1e-7);
        let y = g.edge_labels()[e] as f64;
        total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        n += 1;
    }
    total / n as f64
}

/// Every trainable shape, enumerated from the configuration alone.
pub fn declared_shapes(cfg: &ModelConfig) -> Vec<Vec<usize>> {
    let mut shapes = Vec::new();
    let mut push_mlp = |input: usize, outs: &[usize]| {
        let mut fan_in = input;
        for &o in outs {
            shapes.push(vec![fan_in, o]);
            shapes.push(vec![o]);
            fan_in = o;
        }
    };
    let h = &cfg.hidden_sizes;
    let latent = *h.last().unwrap();
    push_mlp(3, h);
    push_mlp(6, h);
    let blocks = match (cfg.iterations, cfg.share_interaction_weights) {
        (0, _) => 0,
        (_, true) => 1,
        (n, false) => n,
    };
    for _ in 0..blocks {
        push_mlp(2 * latent, h);
        push_mlp(3 * latent, h);
    }
    let mut head = h.clone();
    head.push(1);
    push_mlp(latent, &head);
    shapes
}

#[derive(Debug, Clone, Copy)]
pub struct FdCheck {
    pub checked: usize,
    pub max_abs: f64,
    pub max_rel: f64,
    pub failures: usize,
}

/// Agreement rule: absolute error within `abs_tol` or relative error within
/// `rel_tol`.
pub fn within(analytic: f64, numeric: f64, rel_tol: f64, abs_tol: f64) -> bool {
    let err = (analytic - numeric).abs();
    err <= abs_tol || err <= rel_tol * analytic.abs().max(numeric.abs())
}

impl FdCheck {
    pub fn new() -> Self {
        FdCheck { checked: 0, max_abs: 0.0, max_rel: 0.0, failures: 0 }
    }

    pub fn add(&mut self, analytic: f64, numeric: f64, rel_tol: f64, abs_tol: f64) {
        let err = (analytic - numeric).abs();
        let scale = analytic.abs().max(numeric.abs());
        self.checked += 1;
        self.max_abs = self.max_abs.max(err);
        if scale > 0.0 {
            self.max_rel = self.max_rel.max(err / scale);
        }
        if !within(analytic, numeric, rel_tol, abs_tol) {
            self.failures += 1;
        }
    }

    pub fn merge(&mut self, other: FdCheck) {
        self.checked += other.checked;
        self.max_abs = self.max_abs.max(other.max_abs);
        self.max_rel = self.max_rel.max(other.max_rel);
        self.failures += other.failures;
    }
}

/// Central difference of `f` at `x` along coordinate `i`.
pub fn central_diff(f: &mut impl FnMut(&[f64]) -> f64, x: &mut [f64], i: usize, h: f64) -> f64 {
    let x0 = x[i];
    x[i] = x0 + h;
    let up = f(x);
    x[i] = x0 - h;
    let down = f(x);
    x[i] = x0;
    (up - down) / (2.0 * h)
}
