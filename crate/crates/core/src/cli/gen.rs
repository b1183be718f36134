use std::fs;
use std::path::PathBuf;

use super::RunManifest;
use crate::error::{Error, Result};
use crate::graph::{generate_dataset, size_histogram, write_dataset, GeneratorConfig, SizeStats};

#[derive(Debug, clap::Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 200)]
    pub events: usize,
    /// Fraction of the full-scale particle count (5000) per event.
    #[arg(long, default_value_t = 0.002)]
    pub scale: f64,
    /// Particles per event; overrides --scale.
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub layers: usize,
    #[arg(long, default_value_t = 4.0)]
    pub false_factor: f64,
    /// Hit position jitter in mm.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Relative spread of the particle count between events.
    #[arg(long, default_value_t = 0.1)]
    pub jitter: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl GenArgs {
    fn config(&self) -> Result<GeneratorConfig> {
        let particles = match self.particles {
            Some(p) => p,
            None => {
                if !(self.scale > 0.0 && self.scale.is_finite()) {
                    return Err(Error::Usage("--scale must be positive".into()));
                }
                ((GeneratorConfig::default().particles_per_event as f64 * self.scale).round() as usize).max(1)
            }
        };
        let cfg = GeneratorConfig {
            particles_per_event: particles,
            layers: self.layers,
            false_edge_factor: self.false_factor,
            noise: self.noise,
            size_jitter: self.jitter,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(a: &GenArgs, argv: &[String]) -> Result<SizeStats> {
    if a.events == 0 {
        return Err(Error::Usage("--events must be at least 1".into()));
    }
    let cfg = a.config()?;
    let graphs = generate_dataset(&cfg, a.events)?;
    let written = write_dataset(&a.out, &cfg, &graphs)?;
    let stats = size_histogram(&graphs)?;
    let csv = a.out.join("sizes.csv");
    let txt = a.out.join("sizes.txt");
    fs::write(&csv, stats.to_csv()).map_err(|e| Error::io(&csv, e))?;
    fs::write(&txt, stats.render()).map_err(|e| Error::io(&txt, e))?;
    print!("{}", stats.render());
    println!("wrote {} events to {}", graphs.len(), a.out.display());

    let config = serde_json::json!({ "generator": cfg, "events": a.events });
    let mut m = RunManifest::new("gen", argv, Some(a.seed), config);
    for p in written.iter().chain([&csv, &txt]) {
        m.output(p, false)?;
    }
    m.save(&a.out.join("run_manifest.json"))?;
    Ok(stats)
}
