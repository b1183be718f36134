use std::sync::Arc;

use super::params::{InteractionBlock, Linear, Mlp};
use super::{ModelConfig, ModelParams, Nonlinearity};
use crate::error::{Error, Result};
use crate::graph::EventGraph;
use crate::profiler::Recorder;
use crate::tensor::{Element, Gradients, Tape, Tensor, Var};

/// A graph converted for the tape: features in the working dtype, shared
/// index vectors, and a `[E, 1]` validity column when any edge is padding.
#[derive(Debug, Clone)]
pub struct GraphInputs<T> {
    pub nodes: Tensor<T>,
    pub senders: Arc<[usize]>,
    pub receivers: Arc<[usize]>,
    pub edge_mask: Option<Tensor<T>>,
}

impl<T: Element> GraphInputs<T> {
    pub fn from_graph(g: &EventGraph) -> Self {
        let edge_mask = g.edge_valid().iter().any(|v| !v).then(|| {
            let m = g.edge_valid().iter().map(|&v| if v { T::one() } else { T::zero() }).collect();
            Tensor::new(vec![g.num_edges(), 1], m).expect("mask shape")
        });
        GraphInputs {
            nodes: g.node_features().cast(),
            senders: g.senders().clone(),
            receivers: g.receivers().clone(),
            edge_mask,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.shape()[0]
    }
}

type BoundMlp = Vec<(Var, Var)>;

/// [`ModelParams`] placed on a tape.
#[derive(Debug, Clone)]
pub struct BoundParams {
    encoder_node: BoundMlp,
    encoder_edge: BoundMlp,
    interaction: Vec<(BoundMlp, BoundMlp)>,
    decoder: BoundMlp,
}

impl BoundParams {
    /// Binds every tensor as a differentiable parameter.
    pub fn bind<T: Element>(tape: &mut Tape<T>, params: &ModelParams<T>) -> Self {
        Self::bind_with(tape, params, |t, x| t.param(x))
    }

    /// Binds every tensor as a constant.
    pub fn bind_constant<T: Element>(tape: &mut Tape<T>, params: &ModelParams<T>) -> Self {
        Self::bind_with(tape, params, |t, x| t.leaf(x))
    }

    fn bind_with<T: Element>(
        tape: &mut Tape<T>,
        params: &ModelParams<T>,
        mut put: impl FnMut(&mut Tape<T>, Tensor<T>) -> Var,
    ) -> Self {
        let mut mlp = |tape: &mut Tape<T>, m: &Mlp<T>| -> BoundMlp {
            m.layers.iter().map(|l| (put(tape, l.weight.clone()), put(tape, l.bias.clone()))).collect()
        };
        BoundParams {
            encoder_node: mlp(tape, &params.encoder_node),
            encoder_edge: mlp(tape, &params.encoder_edge),
            interaction: params
                .interaction
                .iter()
                .map(|InteractionBlock { node, edge }| (mlp(tape, node), mlp(tape, edge)))
                .collect(),
            decoder: mlp(tape, &params.decoder),
        }
    }

    /// Vars in [`ModelParams::named_tensors`] order.
    pub fn vars(&self) -> Vec<Var> {
        let mlps = [&self.encoder_node, &self.encoder_edge]
            .into_iter()
            .chain(self.interaction.iter().flat_map(|(n, e)| [n, e]))
            .chain(std::iter::once(&self.decoder));
        mlps.flat_map(|m| m.iter().flat_map(|&(w, b)| [w, b])).collect()
    }

    /// Gradients in [`ModelParams::named_tensors`] order; parameters the
    /// loss did not touch get zeros.
    pub fn gradients<T: Element>(&self, grads: &mut Gradients<T>, params: &ModelParams<T>) -> Vec<Tensor<T>> {
        self.vars()
            .into_iter()
            .zip(params.named_tensors())
            .map(|(v, (_, t))| grads.take(v).unwrap_or_else(|| Tensor::zeros(t.shape())))
            .collect()
    }
}

fn activate<T: Element>(tape: &mut Tape<T>, x: Var, nl: Nonlinearity) -> Result<Var> {
    match nl {
        Nonlinearity::Relu => tape.relu(x),
        Nonlinearity::Tanh => tape.tanh(x),
    }
}

/// Linear layers with the activation after each of the first `activated`.
fn mlp<T: Element>(tape: &mut Tape<T>, layers: &[(Var, Var)], mut x: Var, nl: Nonlinearity, activated: usize) -> Result<Var> {
    for (i, &(w, b)) in layers.iter().enumerate() {
        x = tape.scoped(&format!("layer{i}"), |tape| -> Result<Var> {
            let h = tape.matmul(x, w)?;
            let h = tape.add(h, b)?;
            if i < activated {
                activate(tape, h, nl)
            } else {
                Ok(h)
            }
        })?;
    }
    Ok(x)
}

fn encode_on<T: Element>(
    tape: &mut Tape<T>,
    bound: &BoundParams,
    cfg: &ModelConfig,
    g: &GraphInputs<T>,
) -> Result<(Var, Var)> {
    tape.scoped("encoder", |tape| {
        let x = tape.leaf(g.nodes.clone());
        let scale = tape.leaf(Tensor::from_f64(&[3], &cfg.input_scale)?);
        let x = tape.mul(x, scale)?;
        let node = tape.scoped("node", |t| mlp(t, &bound.encoder_node, x, cfg.nonlinearity, usize::MAX))?;
        let edge = tape.scoped("edge", |t| -> Result<Var> {
            let s = t.gather_rows(x, g.senders.clone())?;
            let r = t.gather_rows(x, g.receivers.clone())?;
            let e = t.concat(&[s, r], 1)?;
            mlp(t, &bound.encoder_edge, e, cfg.nonlinearity, usize::MAX)
        })?;
        Ok((node, edge))
    })
}

#[allow(clippy::too_many_arguments)]
fn interaction_on<T: Element>(
    tape: &mut Tape<T>,
    block: &(BoundMlp, BoundMlp),
    cfg: &ModelConfig,
    node: Var,
    edge: Var,
    senders: &Arc<[usize]>,
    receivers: &Arc<[usize]>,
    mask: Option<Var>,
) -> Result<(Var, Var)> {
    let n = tape.value(node).shape()[0];
    let node = tape.scoped("node", |t| -> Result<Var> {
        let msg = match mask {
            Some(m) => t.mul(edge, m)?,
            None => edge,
        };
        let agg = t.unsorted_segment_sum(msg, receivers.clone(), n)?;
        let x = t.concat(&[node, agg], 1)?;
        mlp(t, &block.0, x, cfg.nonlinearity, usize::MAX)
    })?;
    let edge = tape.scoped("edge", |t| -> Result<Var> {
        let s = t.gather_rows(node, senders.clone())?;
        let r = t.gather_rows(node, receivers.clone())?;
        let x = t.concat(&[edge, s, r], 1)?;
        mlp(t, &block.1, x, cfg.nonlinearity, usize::MAX)
    })?;
    Ok((node, edge))
}

/// Records the full network on `tape` and returns edge scores `[E]`.
pub fn forward_on_tape<T: Element>(
    tape: &mut Tape<T>,
    bound: &BoundParams,
    cfg: &ModelConfig,
    g: &GraphInputs<T>,
) -> Result<Var> {
    let (mut node, mut edge) = encode_on(tape, bound, cfg, g)?;
    let mask = g.edge_mask.clone().map(|m| tape.leaf(m));
    for it in 0..cfg.iterations {
        let block = if cfg.share_interaction_weights { 0 } else { it };
        let block = bound
            .interaction
            .get(block)
            .ok_or_else(|| Error::Config(format!("no interaction block for iteration {it}")))?;
        let name = if cfg.share_interaction_weights { "interaction".to_string() } else { format!("interaction{it}") };
        (node, edge) = tape.scoped(&name, |t| interaction_on(t, block, cfg, node, edge, &g.senders, &g.receivers, mask))?;
    }
    tape.scoped("decoder", |t| -> Result<Var> {
        let hidden = bound.decoder.len() - 1;
        let logits = mlp(t, &bound.decoder, edge, cfg.nonlinearity, hidden)?;
        let p = t.sigmoid(logits)?;
        let e = t.value(p).shape()[0];
        t.reshape(p, &[e])
    })
}

fn eager_tape<T: Element>() -> Tape<T> {
    Tape::with_recorder(Recorder::disabled())
}

/// Node latents `[N, latent]` and edge latents `[E, latent]`.
pub fn encode<T: Element>(params: &ModelParams<T>, g: &EventGraph) -> Result<(Tensor<T>, Tensor<T>)> {
    let mut tape = eager_tape();
    let bound = BoundParams::bind_constant(&mut tape, params);
    let (n, e) = encode_on(&mut tape, &bound, &params.config, &GraphInputs::from_graph(g))?;
    Ok((tape.value(n).clone(), tape.value(e).clone()))
}

/// One update with the first interaction block, no edge masking.
pub fn interaction_step<T: Element>(
    params: &ModelParams<T>,
    node_latent: &Tensor<T>,
    edge_latent: &Tensor<T>,
    senders: &[usize],
    receivers: &[usize],
) -> Result<(Tensor<T>, Tensor<T>)> {
    let block = params.interaction.first().ok_or_else(|| Error::Config("model has no interaction block".into()))?;
    let mut tape = eager_tape();
    let put = |tape: &mut Tape<T>, m: &Mlp<T>| -> BoundMlp {
        m.layers.iter().map(|Linear { weight, bias }| (tape.leaf(weight.clone()), tape.leaf(bias.clone()))).collect()
    };
    let bound = (put(&mut tape, &block.node), put(&mut tape, &block.edge));
    let n = tape.leaf(node_latent.clone());
    let e = tape.leaf(edge_latent.clone());
    let (s, r): (Arc<[usize]>, Arc<[usize]>) = (senders.into(), receivers.into());
    let (n, e) = interaction_on(&mut tape, &bound, &params.config, n, e, &s, &r, None)?;
    Ok((tape.value(n).clone(), tape.value(e).clone()))
}

/// Edge scores in (0, 1), one per edge including padded ones.
pub fn forward<T: Element>(params: &ModelParams<T>, g: &EventGraph) -> Result<Tensor<T>> {
    let mut tape = eager_tape();
    let bound = BoundParams::bind_constant(&mut tape, params);
    let out = forward_on_tape(&mut tape, &bound, &params.config, &GraphInputs::from_graph(g))?;
    Ok(tape.value(out).clone())
}
