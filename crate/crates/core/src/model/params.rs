use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::graph::NODE_FEATURES;
use crate::tensor::{DType, Element, Tensor};

/// Trainable parameter count of the published reference network.
pub const REFERENCE_PARAM_COUNT: usize = 132_291;

/// `x W + b` with `W: [in, out]`.
#[derive(Debug, Clone)]
pub struct Linear<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Element> Linear<T> {
    /// Xavier-uniform weights, zero bias.
    fn init(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w = (0..fan_in * fan_out).map(|_| T::from_f64(rng.random_range(-bound..=bound))).collect();
        Linear {
            weight: Tensor::new(vec![fan_in, fan_out], w).expect("shape matches"),
            bias: Tensor::zeros(&[fan_out]),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn fan_out(&self) -> usize {
        self.weight.shape()[1]
    }
}

#[derive(Debug, Clone)]
pub struct Mlp<T> {
    pub layers: Vec<Linear<T>>,
}

impl<T: Element> Mlp<T> {
    fn init(input: usize, sizes: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let mut layers = Vec::with_capacity(sizes.len());
        let mut fan_in = input;
        for &s in sizes {
            layers.push(Linear::init(fan_in, s, rng));
            fan_in = s;
        }
        Mlp { layers }
    }
}

/// One node MLP and one edge MLP.
#[derive(Debug, Clone)]
pub struct InteractionBlock<T> {
    pub node: Mlp<T>,
    pub edge: Mlp<T>,
}

#[derive(Debug, Clone)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    pub encoder_node: Mlp<T>,
    pub encoder_edge: Mlp<T>,
    /// One entry when weights are shared, otherwise one per iteration.
    pub interaction: Vec<InteractionBlock<T>>,
    /// Hidden layers followed by a width-1 head (no activation on the head).
    pub decoder: Mlp<T>,
}

impl<T: Element> ModelParams<T> {
    /// Every tensor with its dotted name, in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        push_named(&mut out, "encoder.node", &self.encoder_node);
        push_named(&mut out, "encoder.edge", &self.encoder_edge);
        for (b, block) in self.interaction.iter().enumerate() {
            push_named(&mut out, &format!("interaction.{b}.node"), &block.node);
            push_named(&mut out, &format!("interaction.{b}.edge"), &block.edge);
        }
        push_named(&mut out, "decoder", &self.decoder);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        let mlps = [&mut self.encoder_node, &mut self.encoder_edge]
            .into_iter()
            .chain(self.interaction.iter_mut().flat_map(|b| [&mut b.node, &mut b.edge]))
            .chain(std::iter::once(&mut self.decoder));
        for m in mlps {
            for l in &mut m.layers {
                out.push(&mut l.weight);
                out.push(&mut l.bias);
            }
        }
        out
    }

    pub fn cast<U: Element>(&self) -> ModelParams<U> {
        let mlp = |m: &Mlp<T>| Mlp {
            layers: m
                .layers
                .iter()
                .map(|l| Linear { weight: l.weight.cast(), bias: l.bias.cast() })
                .collect(),
        };
        ModelParams {
            config: self.config.clone(),
            encoder_node: mlp(&self.encoder_node),
            encoder_edge: mlp(&self.encoder_edge),
            interaction: self.interaction.iter().map(|b| InteractionBlock { node: mlp(&b.node), edge: mlp(&b.edge) }).collect(),
            decoder: mlp(&self.decoder),
        }
    }

    /// Bitwise equality of every tensor.
    pub fn bit_eq(&self, other: &Self) -> bool {
        let (a, b) = (self.named_tensors(), other.named_tensors());
        a.len() == b.len() && a.iter().zip(&b).all(|((na, ta), (nb, tb))| na == nb && ta.bit_eq(tb))
    }
}

fn push_named<'a, T>(out: &mut Vec<(String, &'a Tensor<T>)>, prefix: &str, m: &'a Mlp<T>) {
    for (i, l) in m.layers.iter().enumerate() {
        out.push((format!("{prefix}.{i}.weight"), &l.weight));
        out.push((format!("{prefix}.{i}.bias"), &l.bias));
    }
}

/// Deterministic initialization from `cfg.seed`.
pub fn init_params<T: Element>(cfg: &ModelConfig) -> Result<ModelParams<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h = &cfg.hidden_sizes;
    let latent = cfg.latent();
    let encoder_node = Mlp::init(NODE_FEATURES, h, &mut rng);
    let encoder_edge = Mlp::init(cfg.edge_input.width(NODE_FEATURES), h, &mut rng);
    let interaction = (0..cfg.interaction_blocks())
        .map(|_| InteractionBlock {
            node: Mlp::init(2 * latent, h, &mut rng),
            edge: Mlp::init(3 * latent, h, &mut rng),
        })
        .collect();
    let mut head = h.clone();
    head.push(1);
    let decoder = Mlp::init(latent, &head, &mut rng);
    Ok(ModelParams { config: cfg.clone(), encoder_node, encoder_edge, interaction, decoder })
}

pub fn count_params<T: Element>(params: &ModelParams<T>) -> usize {
    params.named_tensors().iter().map(|(_, t)| t.numel()).sum()
}

/// Parameter counts per component next to the reference count.
pub fn param_report<T: Element>(params: &ModelParams<T>) -> String {
    let mut groups: Vec<(String, usize)> = Vec::new();
    for (name, t) in params.named_tensors() {
        let group = name.rsplitn(3, '.').nth(2).unwrap_or(&name).to_string();
        match groups.last_mut() {
            Some((g, n)) if *g == group => *n += t.numel(),
            _ => groups.push((group, t.numel())),
        }
    }
    let total = count_params(params);
    let cfg = &params.config;
    let mut s = String::new();
    for (g, n) in &groups {
        let _ = writeln!(s, "{g:<24} {n:>9}");
    }
    let _ = writeln!(s, "{:<24} {total:>9}", "total");
    let _ = writeln!(s, "{:<24} {REFERENCE_PARAM_COUNT:>9}", "reference model");
    let delta = total as i64 - REFERENCE_PARAM_COUNT as i64;
    let _ = writeln!(s, "{:<24} {delta:>+9}", "delta");
    let _ = writeln!(
        s,
        "architecture: hidden {:?}, {} iterations ({} interaction block{}), edge encoder input {} = raw endpoint features, decoder {:?} -> 1",
        cfg.hidden_sizes,
        cfg.iterations,
        cfg.interaction_blocks(),
        if cfg.interaction_blocks() == 1 { "" } else { "s" },
        cfg.edge_input.width(NODE_FEATURES),
        cfg.hidden_sizes,
    );
    let _ = writeln!(
        s,
        "the reference network's encoder/decoder input widths and weight sharing are not published, so the delta is not attributed to a single layer"
    );
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// On-disk form of [`ModelParams`]. Values are stored as f64, which holds
/// every f32 exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub dtype: DType,
    #[serde(default)]
    pub epoch: Option<usize>,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_params<T: Element>(params: &ModelParams<T>, epoch: Option<usize>) -> Self {
        Checkpoint {
            config: params.config.clone(),
            dtype: T::DTYPE,
            epoch,
            tensors: params
                .named_tensors()
                .into_iter()
                .map(|(name, t)| NamedTensor { name, shape: t.shape().to_vec(), data: t.to_f64_vec() })
                .collect(),
        }
    }

    pub fn into_params<T: Element>(self) -> Result<ModelParams<T>> {
        if self.dtype != T::DTYPE {
            return Err(Error::Data(format!("checkpoint holds {} tensors, expected {}", self.dtype, T::DTYPE)));
        }
        let mut params = init_params::<T>(&self.config)?;
        let expected: Vec<(String, Vec<usize>)> =
            params.named_tensors().iter().map(|(n, t)| (n.clone(), t.shape().to_vec())).collect();
        if expected.len() != self.tensors.len() {
            return Err(Error::Data(format!("checkpoint has {} tensors, config needs {}", self.tensors.len(), expected.len())));
        }
        for ((slot, (name, shape)), saved) in params.tensors_mut().into_iter().zip(expected).zip(self.tensors) {
            if saved.name != name || saved.shape != shape {
                return Err(Error::Data(format!("checkpoint tensor {} {:?} where {} {:?} was expected", saved.name, saved.shape, name, shape)));
            }
            *slot = Tensor::from_f64(&shape, &saved.data)?;
        }
        Ok(params)
    }
}

pub fn save_checkpoint<T: Element>(path: &Path, params: &ModelParams<T>, epoch: Option<usize>) -> Result<()> {
    let text = serde_json::to_string(&Checkpoint::from_params(params, epoch)).expect("checkpoint serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Element>(path: &Path) -> Result<ModelParams<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), source: e })?;
    ck.into_params()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_control_init() {
        let c = ModelConfig::default();
        let a = init_params::<f32>(&c).unwrap();
        assert!(a.bit_eq(&init_params(&c).unwrap()));
        let b = init_params::<f32>(&ModelConfig { seed: 1, ..c }).unwrap();
        assert!(!a.bit_eq(&b));
    }

    #[test]
    fn weights_within_xavier_bound_and_biases_zero() {
        let p = init_params::<f64>(&ModelConfig::default()).unwrap();
        for (name, t) in p.named_tensors() {
            if name.ends_with("bias") {
                assert!(t.data().iter().all(|&v| v == 0.0), "{name}");
            } else {
                let (i, o) = (t.shape()[0], t.shape()[1]);
                let bound = (6.0 / (i + o) as f64).sqrt();
                assert!(t.data().iter().all(|v| v.abs() <= bound), "{name}");
            }
        }
    }

    #[test]
    fn single_layer_count() {
        let c = ModelConfig { hidden_sizes: vec![128], iterations: 0, ..Default::default() };
        let p = init_params::<f32>(&c).unwrap();
        assert_eq!(p.encoder_node.layers[0].weight.numel() + p.encoder_node.layers[0].bias.numel(), 512);
    }

    #[test]
    fn unshared_blocks() {
        let c = ModelConfig { share_interaction_weights: false, iterations: 3, ..Default::default() };
        let p = init_params::<f32>(&c).unwrap();
        assert_eq!(p.interaction.len(), 3);
        let shared = init_params::<f32>(&ModelConfig { iterations: 3, ..Default::default() }).unwrap();
        assert_eq!(count_params(&p) - count_params(&shared), 2 * (24_768 + 32_960));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let p = init_params::<f32>(&ModelConfig { seed: 9, ..Default::default() }).unwrap();
        save_checkpoint(&path, &p, Some(3)).unwrap();
        let back: ModelParams<f32> = load_checkpoint(&path).unwrap();
        assert!(back.bit_eq(&p));
        assert!(load_checkpoint::<f64>(&path).is_err());
    }

    #[test]
    fn report_mentions_reference() {
        let p = init_params::<f32>(&ModelConfig::default()).unwrap();
        let r = param_report(&p);
        assert!(r.contains("92289") && r.contains("132291") && r.contains("-40002"), "{r}");
    }
}
