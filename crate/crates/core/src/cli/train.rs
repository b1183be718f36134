use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{sha256_json, RunManifest};
use crate::error::{Error, Result};
use crate::graph::read_dataset;
use crate::model::{init_params, save_checkpoint, ModelConfig, Nonlinearity};
use crate::profiler::{host_description, ByteModel, CostModel, Timer, Trace, TraceMeta};
use crate::tensor::DType;
use crate::train::{
    fit, prepare_dataset, render_scaling, strong_scaling_report, Example, OptimizerKind, Profiling, TrainConfig,
    TrainLog, TrainState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TimerArg {
    Wall,
    Simulated,
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    /// Graphs per worker per step.
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = 0.99)]
    pub pad_quantile: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value = "adam")]
    pub optimizer: OptimizerKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trailing fraction of the dataset held out for validation AUC.
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Output directory for checkpoints, scaling table and run manifest.
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    /// Trace file; defaults to OUT/trace.json.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Per-epoch JSON-lines log; defaults to OUT/train.log.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Steps per epoch kept in the trace (all when omitted).
    #[arg(long)]
    pub trace_steps: Option<usize>,
    /// Also write a checkpoint every K epochs.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Hidden layer widths of every MLP.
    #[arg(long, value_delimiter = ',', default_value = "128,64")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    pub iterations: usize,
    #[arg(long, value_enum, default_value = "relu")]
    pub nonlinearity: NonlinearityArg,
    /// Separate weights for every interaction iteration.
    #[arg(long)]
    pub unshared: bool,
    #[arg(long, value_enum, default_value = "wall")]
    pub timer: TimerArg,
    /// Simulated compute rate in FLOP/s.
    #[arg(long, default_value_t = 1e11)]
    pub sim_flops: f64,
    /// Simulated memory bandwidth in bytes/s.
    #[arg(long, default_value_t = 2e10)]
    pub sim_bandwidth: f64,
    /// Simulated all-reduce bandwidth in bytes/s (free when omitted).
    #[arg(long)]
    pub sim_interconnect: Option<f64>,
    /// Reuse factors applied to base traffic at l1, l2, hbm.
    #[arg(long, value_delimiter = ',', default_value = "1,1,1")]
    pub byte_model: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum NonlinearityArg {
    Relu,
    Tanh,
}

fn profiling(a: &TrainArgs) -> Result<Profiling> {
    let [l1, l2, hbm] = a.byte_model[..] else {
        return Err(Error::Usage("--byte-model takes three factors: l1,l2,hbm".into()));
    };
    let timer = match a.timer {
        TimerArg::Wall => Timer::Wall,
        TimerArg::Simulated => {
            if !(a.sim_flops > 0.0 && a.sim_bandwidth > 0.0) || a.sim_interconnect.is_some_and(|b| b <= 0.0) {
                return Err(Error::Usage("simulated rates must be positive".into()));
            }
            Timer::Simulated(CostModel {
                flops_per_s: a.sim_flops,
                bytes_per_s: a.sim_bandwidth,
                interconnect_bytes_per_s: a.sim_interconnect,
            })
        }
    };
    Ok(Profiling { enabled: true, timer, byte_model: ByteModel { l1, l2, hbm }, trace_steps: a.trace_steps })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn run(a: &TrainArgs, argv: &[String]) -> Result<()> {
    if !(0.0..1.0).contains(&a.val_fraction) {
        return Err(Error::Usage("--val-fraction must lie in [0, 1)".into()));
    }
    let prof = profiling(a)?;
    let (data_manifest, graphs) = read_dataset(&a.data)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        learning_rate: a.lr,
        workers: a.workers,
        optimizer: a.optimizer,
        seed: a.seed,
        pad_quantile: a.pad_quantile,
    };
    cfg.validate()?;
    let model_cfg = ModelConfig {
        hidden_sizes: a.hidden.clone(),
        iterations: a.iterations,
        nonlinearity: match a.nonlinearity {
            NonlinearityArg::Relu => Nonlinearity::Relu,
            NonlinearityArg::Tanh => Nonlinearity::Tanh,
        },
        share_interaction_weights: !a.unshared,
        seed: a.seed,
        ..Default::default()
    };

    let n_val = (graphs.len() as f64 * a.val_fraction).floor() as usize;
    let (train_graphs, val_graphs) = graphs.split_at(graphs.len() - n_val);
    let data = prepare_dataset::<f32>(train_graphs, &cfg)?;
    // with no held-out split the metric falls back to the training graphs
    let val: Vec<Example<f32>> =
        if val_graphs.is_empty() { train_graphs.iter().map(Example::from_graph).collect() } else { val_graphs.iter().map(Example::from_graph).collect() };
    let positives: usize = val.iter().map(|e| e.labels.iter().zip(&e.mask).filter(|(&l, &m)| m && l == 1).count()).sum();
    let valid: usize = val.iter().map(|e| e.mask.iter().filter(|&&m| m).count()).sum();
    if positives == 0 || positives == valid {
        return Err(Error::UndefinedMetric(format!(
            "validation edges are single-class ({positives} of {valid} true); AUC is undefined"
        )));
    }
    match &data.padding {
        Some(spec) => println!(
            "padding to q={}: {} nodes, {} edges; {} of {} graphs truncated",
            spec.quantile(),
            spec.target_nodes(),
            spec.target_edges(),
            data.truncated,
            train_graphs.len()
        ),
        None => println!("padding: off (one graph per step)"),
    }

    create_dir(&a.out)?;
    let trace_path = a.trace.clone().unwrap_or_else(|| a.out.join("trace.json"));
    let log_path = a.log.clone().unwrap_or_else(|| a.out.join("train.log"));
    let mut log = TrainLog::create(&log_path)?;
    let mut state = TrainState::new(init_params::<f32>(&model_cfg)?, &cfg);
    let mut trace = Trace::default();
    let mut checkpoints = Vec::new();
    let mut scaling_rows = String::new();
    let out_dir = a.out.clone();
    let every = a.checkpoint_every;
    let epochs = fit(&mut state, &data.examples, &val, &cfg, &prof, &mut trace, |ep, st| {
        let r = &ep.report;
        log.write(r)?;
        println!(
            "epoch {:>3}  loss {:.5}  auc {:.5}  {:.3} s",
            r.epoch,
            r.loss,
            r.auc.unwrap_or(f64::NAN),
            r.seconds
        );
        let rows = strong_scaling_report(&ep.scaling.runs())?;
        let _ = writeln!(scaling_rows, "epoch {}\n{}", r.epoch, render_scaling(&rows));
        if every.is_some_and(|k| k > 0 && r.epoch % k == 0) {
            let p = out_dir.join(format!("checkpoint_epoch{:03}.json", r.epoch));
            save_checkpoint(&p, &st.params, Some(r.epoch))?;
            checkpoints.push(p);
        }
        Ok(())
    })?;

    let final_ckpt = a.out.join("checkpoint.json");
    save_checkpoint(&final_ckpt, &state.params, Some(state.epoch))?;
    let scaling_path = a.out.join("scaling.txt");
    fs::write(&scaling_path, &scaling_rows).map_err(|e| Error::io(&scaling_path, e))?;

    let config = serde_json::json!({
        "train": cfg,
        "model": model_cfg,
        "generator": data_manifest.generator,
        "val_fraction": a.val_fraction,
        "padding": data.padding,
        "truncated": data.truncated,
        "timer": prof.timer,
        "byte_model": prof.byte_model,
        "trace_steps": prof.trace_steps,
    });
    let simulated = matches!(prof.timer, Timer::Simulated(_));
    trace.meta = TraceMeta {
        seed: Some(a.seed),
        config_hash: Some(sha256_json(&config)),
        host: host_description(),
        dtype: Some(DType::F32),
        wall_s: (!simulated).then(|| epochs.iter().map(|e| e.report.traced_seconds).sum()),
        epoch_seconds: epochs
            .iter()
            .map(|e| if simulated { e.scaling.parallel_seconds } else { e.report.seconds })
            .collect(),
    };
    trace.save(&trace_path)?;

    let mut m = RunManifest::new("train", argv, Some(a.seed), config);
    m.input(&a.data);
    m.output(&final_ckpt, false)?;
    for p in &checkpoints {
        m.output(p, false)?;
    }
    m.output(&log_path, true)?;
    m.output(&trace_path, true)?;
    m.output(&scaling_path, true)?;
    m.save(&a.out.join("run_manifest.json"))?;
    println!("trace: {} records -> {}", trace.records.len(), trace_path.display());

    Ok(())
}
