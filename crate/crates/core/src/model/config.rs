use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    #[default]
    Relu,
    Tanh,
}

/// What the edge encoder sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeInput {
    /// Raw sender features followed by raw receiver features.
    #[default]
    EndpointConcat,
}

impl EdgeInput {
    pub fn width(self, node_features: usize) -> usize {
        match self {
            EdgeInput::EndpointConcat => 2 * node_features,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_sizes: Vec<usize>,
    /// Interaction updates per forward pass. Zero skips the block
    /// entirely (decoder directly on the encoding).
    pub iterations: usize,
    pub nonlinearity: Nonlinearity,
    pub edge_input: EdgeInput,
    pub share_interaction_weights: bool,
    pub seed: u64,
    /// Per-feature multipliers applied to `(r, phi, z)` before the encoder.
    pub input_scale: [f64; 3],
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_sizes: vec![128, 64],
            iterations: 8,
            nonlinearity: Nonlinearity::Relu,
            edge_input: EdgeInput::EndpointConcat,
            share_interaction_weights: true,
            seed: 0,
            input_scale: [1e-3, std::f64::consts::FRAC_1_PI, 1e-3],
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::Config("hidden_sizes must be non-empty and positive".into()));
        }
        if self.input_scale.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("input_scale must be finite".into()));
        }
        Ok(())
    }

    /// Width of node and edge latents.
    pub fn latent(&self) -> usize {
        *self.hidden_sizes.last().expect("validated")
    }

    /// Distinct interaction blocks held in the parameters.
    pub fn interaction_blocks(&self) -> usize {
        match (self.iterations, self.share_interaction_weights) {
            (0, _) => 0,
            (_, true) => 1,
            (n, false) => n,
        }
    }
}
