//! Parametric toy detector: helix-like charged tracks crossing concentric
//! cylindrical layers in a solenoid field, plus geometrically plausible
//! fake connections between neighbouring hits of different particles.

use std::collections::HashSet;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{EventGraph, NODE_FEATURES};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const INNER_RADIUS_MM: f64 = 32.0;
const OUTER_RADIUS_MM: f64 = 932.0;
const FIELD_T: f64 = 2.0;
const PT_RANGE_GEV: (f64, f64) = (1.0, 10.0);
const COT_THETA_MAX: f64 = 1.5;
const Z0_SIGMA_MM: f64 = 50.0;
/// Candidates on the next layer considered on each side of the
/// closest-in-phi hit when drawing a fake edge.
const FAKE_WINDOW: usize = 3;
const FAKE_ATTEMPTS_PER_EDGE: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub particles_per_event: usize,
    /// Hits per particle, one per layer.
    pub layers: usize,
    pub false_edge_factor: f64,
    /// Spatial jitter in mm applied to every hit (phi jitter is this
    /// distance divided by the radius).
    pub noise: f64,
    /// Relative spread of the per-event particle count, uniform in
    /// `[1 - size_jitter, 1 + size_jitter]`.
    #[serde(default)]
    pub size_jitter: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    /// Full scale: 50,000 hits and 225,000 edges (45,000 true) per event.
    fn default() -> Self {
        GeneratorConfig {
            particles_per_event: 5000,
            layers: 10,
            false_edge_factor: 4.0,
            noise: 0.1,
            size_jitter: 0.1,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    /// Desk scale: about 100 hits and 450 edges per event.
    pub fn desk() -> Self {
        GeneratorConfig { particles_per_event: 10, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles_per_event < 1 {
            return Err(Error::Config("particles_per_event must be at least 1".into()));
        }
        if self.layers < 2 {
            return Err(Error::Config("layers must be at least 2".into()));
        }
        if !(self.false_edge_factor >= 0.0 && self.false_edge_factor.is_finite()) {
            return Err(Error::Config("false_edge_factor must be a finite value >= 0".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config("noise must be a finite value >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.size_jitter) {
            return Err(Error::Config("size_jitter must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn layer_radius(&self, layer: usize) -> f64 {
        INNER_RADIUS_MM + (OUTER_RADIUS_MM - INNER_RADIUS_MM) * layer as f64 / (self.layers - 1) as f64
    }

    /// Expected (nodes, edges, true edges) per event.
    pub fn expected_sizes(&self) -> (f64, f64, f64) {
        let p = self.particles_per_event as f64;
        let n = p * self.layers as f64;
        let t = p * (self.layers - 1) as f64;
        (n, t * (1.0 + self.false_edge_factor), t)
    }
}

/// A generated event plus the truth it was built from.
#[derive(Debug, Clone)]
pub struct GeneratedEvent {
    pub graph: EventGraph,
    pub particle: Vec<usize>,
    pub layer: Vec<usize>,
}

pub fn generate_event(cfg: &GeneratorConfig) -> Result<EventGraph> {
    Ok(generate_event_with_truth(cfg)?.graph)
}

pub fn generate_event_with_truth(cfg: &GeneratorConfig) -> Result<GeneratedEvent> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let particles = if cfg.size_jitter > 0.0 {
        let f = 1.0 + cfg.size_jitter * rng.random_range(-1.0..=1.0);
        ((cfg.particles_per_event as f64 * f).round() as usize).max(1)
    } else {
        cfg.particles_per_event
    };
    let layers = cfg.layers;
    let n = particles * layers;
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let z0_dist = Normal::new(0.0, Z0_SIGMA_MM).expect("z0 spread");

    let mut feats = Vec::with_capacity(n * NODE_FEATURES);
    let mut particle = Vec::with_capacity(n);
    let mut layer = Vec::with_capacity(n);
    for p in 0..particles {
        let (lo, hi) = PT_RANGE_GEV;
        let pt = lo * (hi / lo).powf(rng.random::<f64>());
        let charge = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let phi0 = rng.random_range(-PI..PI);
        let cot = rng.random_range(-COT_THETA_MAX..COT_THETA_MAX);
        let z0 = z0_dist.sample(&mut rng);
        // transverse radius of curvature in mm
        let radius = pt / (0.3 * FIELD_T) * 1000.0;
        for l in 0..layers {
            let r = cfg.layer_radius(l) + cfg.noise * noise.sample(&mut rng);
            let half_angle = (r / (2.0 * radius)).clamp(-1.0, 1.0).asin();
            let phi = wrap_phi(phi0 - charge * half_angle + cfg.noise * noise.sample(&mut rng) / r);
            let z = z0 + 2.0 * radius * half_angle * cot + cfg.noise * noise.sample(&mut rng);
            feats.extend_from_slice(&[r as f32, clamp_phi32(phi), z as f32]);
            particle.push(p);
            layer.push(l);
        }
    }

    let hit = |p: usize, l: usize| p * layers + l;
    let mut edges: Vec<(usize, usize, u8)> = Vec::new();
    let mut seen = HashSet::new();
    for p in 0..particles {
        for l in 0..layers - 1 {
            edges.push((hit(p, l), hit(p, l + 1), 1));
            seen.insert((hit(p, l), hit(p, l + 1)));
        }
    }

    let true_edges = edges.len();
    let wanted = (cfg.false_edge_factor * true_edges as f64).round() as usize;
    if wanted > 0 && particles > 1 {
        // hits of each layer sorted by phi
        let by_layer: Vec<Vec<(f32, usize)>> = (0..layers)
            .map(|l| {
                let mut v: Vec<(f32, usize)> = (0..particles).map(|p| (feats[hit(p, l) * 3 + 1], p)).collect();
                v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                v
            })
            .collect();
        let mut made = 0;
        let mut attempts = 0;
        while made < wanted && attempts < wanted * FAKE_ATTEMPTS_PER_EDGE {
            attempts += 1;
            let l = rng.random_range(0..layers - 1);
            let p = rng.random_range(0..particles);
            let phi = feats[hit(p, l) * 3 + 1];
            let next = &by_layer[l + 1];
            let centre = next.partition_point(|&(x, _)| x < phi);
            let offset = rng.random_range(0..=2 * FAKE_WINDOW) as isize - FAKE_WINDOW as isize;
            let k = (centre as isize + offset).rem_euclid(next.len() as isize) as usize;
            let q = next[k].1;
            if q == p {
                continue;
            }
            let (s, r) = (hit(p, l), hit(q, l + 1));
            if seen.insert((s, r)) {
                edges.push((s, r, 0));
                made += 1;
            }
        }
    }
    edges.shuffle(&mut rng);

    let graph = EventGraph::new(
        Tensor::new(vec![n, NODE_FEATURES], feats)?,
        edges.iter().map(|e| e.0).collect(),
        edges.iter().map(|e| e.1).collect(),
        edges.iter().map(|e| e.2).collect(),
    )?;
    Ok(GeneratedEvent { graph, particle, layer })
}

/// `count` independent events; event `i` draws from a seed derived from
/// `cfg.seed` and `i`.
pub fn generate_dataset(cfg: &GeneratorConfig, count: usize) -> Result<Vec<EventGraph>> {
    (0..count)
        .map(|i| generate_event(&GeneratorConfig { seed: event_seed(cfg.seed, i as u64), ..cfg.clone() }))
        .collect()
}

fn event_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn wrap_phi(phi: f64) -> f64 {
    (phi + PI).rem_euclid(2.0 * PI) - PI
}

// `PI as f32` rounds up past pi, so clamp to the f32 just below it
fn clamp_phi32(phi: f64) -> f32 {
    let max = f32::from_bits((PI as f32).to_bits() - 1);
    (phi as f32).clamp(-max, max)
}
