//! Edge-classifying graph network: an encoder lifts hits and hit pairs to
//! latent vectors, an interaction block updates nodes and then edges a
//! fixed number of times, and a decoder turns edge latents into scores.

mod config;
mod network;
mod params;

pub use config::{EdgeInput, ModelConfig, Nonlinearity};
pub use network::{
    encode, forward, forward_on_tape, interaction_step, BoundParams, GraphInputs,
};
pub use params::{
    count_params, init_params, load_checkpoint, param_report, save_checkpoint, Checkpoint, Linear,
    Mlp, ModelParams, REFERENCE_PARAM_COUNT,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_event, pad_graph, EventGraph, GeneratorConfig, PaddingSpec};
    use crate::tensor::Tensor;

    fn small_cfg() -> ModelConfig {
        ModelConfig { hidden_sizes: vec![16, 8], iterations: 3, seed: 4, ..Default::default() }
    }

    fn event(seed: u64) -> EventGraph {
        let c = GeneratorConfig { particles_per_event: 4, layers: 5, seed, size_jitter: 0.0, ..Default::default() };
        generate_event(&c).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0))
    }

    #[test]
    fn zero_features_give_zero_latents() {
        let g = EventGraph::new(Tensor::zeros(&[3, 3]), vec![0, 1], vec![1, 2], vec![1, 0]).unwrap();
        for nl in [Nonlinearity::Relu, Nonlinearity::Tanh] {
            let p = init_params::<f64>(&ModelConfig { nonlinearity: nl, ..Default::default() }).unwrap();
            let (n, e) = encode(&p, &g).unwrap();
            assert!(n.data().iter().chain(e.data()).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn edgeless_graph_shapes() {
        let g = EventGraph::new(Tensor::from_rows(&[vec![30.0, 0.2, 4.0]]).unwrap(), vec![], vec![], vec![]).unwrap();
        let p = init_params::<f32>(&ModelConfig::default()).unwrap();
        let (n, e) = encode(&p, &g).unwrap();
        assert_eq!((n.shape(), e.shape()), (&[1, 64][..], &[0, 64][..]));
        let (n2, _) = interaction_step(&p, &n, &e, &[], &[]).unwrap();
        assert_eq!(n2.shape(), &[1, 64]);
        assert_eq!(forward(&p, &g).unwrap().shape(), &[0]);
    }

    #[test]
    fn scores_are_probabilities_and_deterministic() {
        let p = init_params::<f32>(&ModelConfig::default()).unwrap();
        let g = event(1);
        let s = forward(&p, &g).unwrap();
        assert_eq!(s.shape(), &[g.num_edges()]);
        assert!(s.data().iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(forward(&p, &g).unwrap().bit_eq(&s));
    }

    #[test]
    fn edge_permutation_equivariance() {
        let p = init_params::<f64>(&small_cfg()).unwrap();
        let g = event(2);
        let e = g.num_edges();
        let perm: Vec<usize> = (0..e).map(|i| (i * 7 + 3) % e).collect();
        let base = forward(&p, &g).unwrap().to_f64_vec();
        let moved = forward(&p, &g.permute_edges(&perm).unwrap()).unwrap().to_f64_vec();
        let expected: Vec<f64> = perm.iter().map(|&i| base[i]).collect();
        assert!(close(&moved, &expected, 1e-12));
    }

    #[test]
    fn node_relabel_equivariance() {
        let p = init_params::<f64>(&small_cfg()).unwrap();
        let g = event(3);
        let n = g.num_nodes();
        let perm: Vec<usize> = (0..n).map(|i| (n - 1 - i + 5) % n).collect();
        let a = forward(&p, &g).unwrap().to_f64_vec();
        let b = forward(&p, &g.relabel_nodes(&perm).unwrap()).unwrap().to_f64_vec();
        assert!(close(&a, &b, 1e-12));
    }

    #[test]
    fn zero_iterations_is_decoder_of_encoding() {
        let cfg = ModelConfig { iterations: 0, ..small_cfg() };
        let p = init_params::<f64>(&cfg).unwrap();
        assert!(p.interaction.is_empty());
        let g = event(4);
        let (_, e) = encode(&p, &g).unwrap();
        let mut h = e;
        let last = p.decoder.layers.len() - 1;
        for (i, l) in p.decoder.layers.iter().enumerate() {
            h = crate::tensor::kernels::matmul(&h, &l.weight).unwrap();
            let width = l.fan_out();
            for (j, v) in h.data_mut().iter_mut().enumerate() {
                *v += l.bias.data()[j % width];
                if i < last {
                    *v = v.max(0.0);
                }
            }
        }
        let expected: Vec<f64> = h.data().iter().map(|&z| 1.0 / (1.0 + (-z).exp())).collect();
        assert!(close(&forward(&p, &g).unwrap().to_f64_vec(), &expected, 1e-12));
    }

    #[test]
    fn padding_does_not_change_valid_scores() {
        let p = init_params::<f32>(&ModelConfig::default()).unwrap();
        let g = event(5);
        let spec = PaddingSpec::new(g.num_nodes() + 3, g.num_edges() + 11, 1.0).unwrap();
        let (padded, _) = pad_graph(&g, &spec).unwrap();
        let a = forward(&p, &g).unwrap();
        let b = forward(&p, &padded).unwrap();
        assert_eq!(a.data(), &b.data()[..g.num_edges()]);
    }

    #[test]
    fn default_count() {
        let p = init_params::<f32>(&ModelConfig::default()).unwrap();
        assert_eq!(count_params(&p), 92_289);
    }
}
