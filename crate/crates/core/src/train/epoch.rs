use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::auc;
use super::optim::{Optimizer, OptimizerKind};
use super::scaling::ScalingSummary;
use crate::error::{Error, Result};
use crate::graph::{pad_dataset, EventGraph, PaddingSpec};
use crate::model::{forward_on_tape, BoundParams, GraphInputs, ModelParams};
use crate::profiler::{ByteModel, Category, OpKind, OpRecord, Recorder, Timer, Trace, MIN_DURATION_S};
use crate::tensor::{binary_cross_entropy, Element, Tape, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Graphs per worker per step.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub workers: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Quantile of node and edge counts that graphs are padded to when a
    /// step holds more than one graph.
    pub pad_quantile: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 1,
            learning_rate: 1e-3,
            workers: 1,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            pad_quantile: 0.99,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.batch_size < 1 || self.workers < 1 {
            return Err(Error::Config("epochs, batch_size and workers must all be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be a finite value >= 0".into()));
        }
        if !(self.pad_quantile > 0.0 && self.pad_quantile <= 1.0) {
            return Err(Error::Config(format!("pad_quantile {} outside (0, 1]", self.pad_quantile)));
        }
        Ok(())
    }

    /// Graphs consumed by one optimizer step across all workers.
    pub fn graphs_per_step(&self) -> usize {
        self.batch_size * self.workers
    }

    /// Steps holding several graphs need uniform shapes.
    pub fn needs_padding(&self) -> bool {
        self.graphs_per_step() > 1
    }
}

/// What gets recorded while training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profiling {
    pub enabled: bool,
    pub timer: Timer,
    pub byte_model: ByteModel,
    /// Steps per epoch whose records are kept in the trace; `None` keeps all.
    pub trace_steps: Option<usize>,
}

impl Default for Profiling {
    fn default() -> Self {
        Profiling { enabled: true, timer: Timer::Wall, byte_model: ByteModel::default(), trace_steps: None }
    }
}

impl Profiling {
    pub fn off() -> Self {
        Profiling { enabled: false, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if !self.enabled && matches!(self.timer, Timer::Simulated(_)) {
            return Err(Error::Config("a simulated timer needs profiling enabled".into()));
        }
        Ok(())
    }

    fn recorder(&self, replica: u32) -> Recorder {
        let mut r = Recorder::new(self.timer, self.byte_model);
        r.set_enabled(self.enabled);
        r.set_replica(replica);
        r
    }
}

/// One graph ready for the tape.
#[derive(Debug, Clone)]
pub struct Example<T> {
    pub inputs: GraphInputs<T>,
    pub labels: Vec<u8>,
    targets: Vec<T>,
    pub mask: Vec<bool>,
}

impl<T: Element> Example<T> {
    pub fn from_graph(g: &EventGraph) -> Self {
        Example {
            inputs: GraphInputs::from_graph(g),
            labels: g.edge_labels().to_vec(),
            targets: g.edge_labels().iter().map(|&l| T::from_f64(l as f64)).collect(),
            mask: g.edge_valid().to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PreparedData<T> {
    pub examples: Vec<Example<T>>,
    pub padding: Option<PaddingSpec>,
    /// Graphs that lost nodes or edges to the pad size.
    pub truncated: usize,
}

/// Converts graphs for training, padding them to the configured quantile
/// when a step holds more than one graph.
pub fn prepare_dataset<T: Element>(graphs: &[EventGraph], cfg: &TrainConfig) -> Result<PreparedData<T>> {
    cfg.validate()?;
    if graphs.is_empty() {
        return Err(Error::Usage("empty training set".into()));
    }
    if !cfg.needs_padding() {
        return Ok(PreparedData { examples: graphs.iter().map(Example::from_graph).collect(), padding: None, truncated: 0 });
    }
    let spec = PaddingSpec::from_dataset(graphs, cfg.pad_quantile)?;
    let (padded, truncated) = pad_dataset(graphs, &spec)?;
    Ok(PreparedData { examples: padded.iter().map(Example::from_graph).collect(), padding: Some(spec), truncated })
}

/// Parameters with optimizer state and progress counters.
#[derive(Debug, Clone)]
pub struct TrainState<T> {
    pub params: ModelParams<T>,
    pub optimizer: Optimizer<T>,
    pub epoch: usize,
    pub step: u64,
}

impl<T: Element> TrainState<T> {
    pub fn new(params: ModelParams<T>, cfg: &TrainConfig) -> Self {
        TrainState { params, optimizer: Optimizer::new(cfg.optimizer, cfg.learning_rate), epoch: 0, step: 0 }
    }
}

/// Dataset indices per step; within a step worker `w` takes entries
/// `w * batch .. (w + 1) * batch`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    pub steps: Vec<Vec<usize>>,
    /// Graphs left over after the last full step.
    pub dropped: usize,
}

pub fn step_plan(dataset: usize, cfg: &TrainConfig, epoch: usize) -> Result<StepPlan> {
    if cfg.workers > dataset {
        return Err(Error::Usage(format!("{} workers for {} graphs", cfg.workers, dataset)));
    }
    let per_step = cfg.graphs_per_step();
    if per_step > dataset {
        return Err(Error::Usage(format!("a step needs {per_step} graphs but the dataset has {dataset}")));
    }
    let mut order: Vec<usize> = (0..dataset).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    order.shuffle(&mut rng);
    let steps = order.chunks_exact(per_step).map(<[usize]>::to_vec).collect();
    Ok(StepPlan { steps, dropped: dataset % per_step })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    /// Mean training loss over steps.
    pub loss: f64,
    pub val_loss: Option<f64>,
    pub auc: Option<f64>,
    /// Wall time of the training steps.
    pub seconds: f64,
    pub step_seconds: Vec<f64>,
    pub steps: usize,
    pub dropped: usize,
    /// Wall time of the steps whose records were kept.
    pub traced_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkerReport {
    pub worker: usize,
    pub graphs: usize,
    pub loss: f64,
    pub compute_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ParallelEpoch {
    pub report: EpochReport,
    pub workers: Vec<WorkerReport>,
    pub scaling: ScalingSummary,
}

/// CPU time consumed by the calling thread.
fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid out-pointer for the duration of the call.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

/// Elementwise mean, summing in slice order.
fn mean_in_order<T: Element>(mut lists: Vec<Vec<Tensor<T>>>) -> Vec<Tensor<T>> {
    let n = lists.len();
    let mut acc = lists.remove(0);
    for other in lists {
        for (a, b) in acc.iter_mut().zip(other) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x = *x + *y;
            }
        }
    }
    if n > 1 {
        let div = T::from_f64(n as f64);
        for a in &mut acc {
            for x in a.data_mut() {
                *x = *x / div;
            }
        }
    }
    acc
}

fn numel<T: Element>(ts: &[Tensor<T>]) -> u64 {
    ts.iter().map(|t| t.numel() as u64).sum()
}

/// Loss and parameter gradients of one graph.
pub fn example_gradients<T: Element>(
    params: &ModelParams<T>,
    ex: &Example<T>,
    recorder: Recorder,
) -> Result<(f64, Vec<Tensor<T>>, Recorder)> {
    let mut tape = Tape::with_recorder(recorder);
    let bound = BoundParams::bind(&mut tape, params);
    let scores = forward_on_tape(&mut tape, &bound, &params.config, &ex.inputs)?;
    let loss = tape.bce_loss(scores, &ex.targets, &ex.mask)?;
    let value = tape.value(loss).data()[0].as_f64();
    let mut grads = tape.backward(loss)?;
    let grads = bound.gradients(&mut grads, params);
    Ok((value, grads, tape.into_recorder()))
}

struct WorkerStep<T> {
    grads: Vec<Tensor<T>>,
    loss_sum: f64,
    recorder: Recorder,
    compute_s: f64,
}

fn worker_step<T: Element>(params: &ModelParams<T>, batch: &[&Example<T>], mut recorder: Recorder) -> Result<WorkerStep<T>> {
    let cpu0 = thread_cpu_seconds();
    let first = recorder.records().len();
    let mut lists = Vec::with_capacity(batch.len());
    let mut loss_sum = 0.0;
    for ex in batch {
        let (loss, grads, rec) = example_gradients(params, ex, recorder)?;
        recorder = rec;
        loss_sum += loss;
        lists.push(grads);
    }
    if lists.len() > 1 {
        let sw = recorder.start();
        let count = lists.len() as u64;
        let p = numel(&lists[0]);
        let grads = mean_in_order(lists);
        let esize = T::DTYPE.size_bytes() as u64;
        recorder.finish(sw, "batch_mean", Category::backward(OpKind::Elementwise), count * p, (count + 1) * p * esize);
        lists = vec![grads];
    }
    let compute_s = match recorder.timer() {
        Timer::Simulated(_) => recorder.records()[first..].iter().map(|r| r.duration_s).sum(),
        Timer::Wall => thread_cpu_seconds() - cpu0,
    };
    Ok(WorkerStep { grads: lists.pop().expect("non-empty batch"), loss_sum, recorder, compute_s })
}

/// Single-worker epoch.
pub fn train_epoch<T: Element>(
    state: &mut TrainState<T>,
    data: &[Example<T>],
    cfg: &TrainConfig,
    profiling: &Profiling,
    trace: &mut Trace,
) -> Result<EpochReport> {
    let cfg = TrainConfig { workers: 1, ..cfg.clone() };
    Ok(data_parallel_epoch(state, data, &cfg, profiling, trace)?.report)
}

/// Synchronous data-parallel epoch with `cfg.workers` replicas. Each step
/// every replica computes the mean gradient of its slice, the replica
/// gradients are averaged in worker order, and every replica applies the
/// same update to its own copy of the parameters.
pub fn data_parallel_epoch<T: Element>(
    state: &mut TrainState<T>,
    data: &[Example<T>],
    cfg: &TrainConfig,
    profiling: &Profiling,
    trace: &mut Trace,
) -> Result<ParallelEpoch> {
    cfg.validate()?;
    profiling.validate()?;
    let w = cfg.workers;
    let plan = step_plan(data.len(), cfg, state.epoch)?;
    let mut replicas: Vec<(ModelParams<T>, Optimizer<T>)> =
        (0..w).map(|_| (state.params.clone(), state.optimizer.clone())).collect();
    let mut recorders: Vec<Recorder> = (0..w).map(|r| profiling.recorder(r as u32)).collect();
    let mut workers: Vec<WorkerReport> =
        (0..w).map(|worker| WorkerReport { worker, graphs: 0, loss: 0.0, compute_seconds: 0.0 }).collect();
    let mut scaling = ScalingSummary::start(w);
    let mut step_seconds = Vec::with_capacity(plan.steps.len());
    let mut traced_seconds = 0.0;
    let mut loss_total = 0.0;

    for (local, step) in plan.steps.iter().enumerate() {
        let t0 = Instant::now();
        let keep = profiling.enabled && profiling.trace_steps.is_none_or(|k| local < k);
        for r in &mut recorders {
            r.set_step(state.step);
        }
        let slices: Vec<Vec<&Example<T>>> =
            step.chunks(cfg.batch_size).map(|c| c.iter().map(|&i| &data[i]).collect()).collect();
        let outputs: Vec<Result<WorkerStep<T>>> = if w == 1 {
            vec![worker_step(&replicas[0].0, &slices[0], std::mem::take(&mut recorders[0]))]
        } else {
            let taken: Vec<Recorder> = recorders.iter_mut().map(std::mem::take).collect();
            std::thread::scope(|s| {
                let handles: Vec<_> = slices
                    .iter()
                    .zip(&replicas)
                    .zip(taken)
                    .map(|((slice, (params, _)), rec)| s.spawn(move || worker_step(params, slice, rec)))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("replica thread panicked")).collect()
            })
        };
        let mut grads = Vec::with_capacity(w);
        let mut compute = Vec::with_capacity(w);
        let mut step_loss = 0.0;
        for (i, out) in outputs.into_iter().enumerate() {
            let out = out?;
            recorders[i] = out.recorder;
            workers[i].graphs += slices[i].len();
            workers[i].loss += out.loss_sum;
            workers[i].compute_seconds += out.compute_s;
            step_loss += out.loss_sum;
            compute.push(out.compute_s);
            grads.push(out.grads);
        }
        loss_total += step_loss / step.len() as f64;

        let allreduce_s = if w > 1 {
            let p = numel(&grads[0]);
            let esize = T::DTYPE.size_bytes() as u64;
            let wall0 = Instant::now();
            let avg = mean_in_order(grads);
            let measured = wall0.elapsed().as_secs_f64();
            let ring_bytes = 2 * (w as u64 - 1) * p * esize / w as u64;
            let duration_s = match profiling.timer {
                Timer::Simulated(cost) => cost.transfer(ring_bytes),
                Timer::Wall => measured,
            };
            recorders[0].push(OpRecord {
                op: "allreduce".into(),
                category: Category::forward(OpKind::Other),
                flops: w as u64 * p,
                bytes: profiling.byte_model.apply((w as u64 + 1) * p * esize),
                duration_s: duration_s.max(MIN_DURATION_S),
                step: state.step,
                replica: 0,
            });
            grads = vec![avg];
            duration_s
        } else {
            0.0
        };
        let avg = grads.pop().expect("one averaged gradient");

        let mut update_s: f64 = 0.0;
        for ((params, opt), rec) in replicas.iter_mut().zip(&mut recorders) {
            let first = rec.records().len();
            let cpu0 = thread_cpu_seconds();
            opt.apply(params, &avg, rec)?;
            let u = match profiling.timer {
                Timer::Simulated(_) => rec.records()[first..].iter().map(|r| r.duration_s).sum(),
                Timer::Wall => thread_cpu_seconds() - cpu0,
            };
            update_s = update_s.max(u);
        }
        scaling.add_step(&compute, allreduce_s, update_s);

        let elapsed = t0.elapsed().as_secs_f64();
        step_seconds.push(elapsed);
        for rec in &mut recorders {
            let records = rec.take_records();
            if keep {
                trace.records.extend(records);
            }
        }
        if keep {
            traced_seconds += elapsed;
        }
        state.step += 1;
    }

    let first = &replicas[0].0;
    if replicas.iter().any(|(p, _)| !p.bit_eq(first)) {
        return Err(Error::Data("replicas diverged after the all-reduce".into()));
    }
    let (params, optimizer) = replicas.swap_remove(0);
    state.params = params;
    state.optimizer = optimizer;
    state.epoch += 1;
    for wr in &mut workers {
        if wr.graphs > 0 {
            wr.loss /= wr.graphs as f64;
        }
    }
    let steps = plan.steps.len();
    let report = EpochReport {
        epoch: state.epoch,
        loss: loss_total / steps as f64,
        val_loss: None,
        auc: None,
        seconds: step_seconds.iter().sum(),
        step_seconds,
        steps,
        dropped: plan.dropped,
        traced_seconds,
    };
    Ok(ParallelEpoch { report, workers, scaling: scaling.finish() })
}

/// Pooled validation metrics over every valid edge of `data`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub loss: f64,
    pub auc: f64,
}

pub fn evaluate<T: Element>(params: &ModelParams<T>, data: &[Example<T>]) -> Result<Evaluation> {
    let (mut scores, mut labels, mut mask, mut targets) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for ex in data {
        let mut tape = Tape::with_recorder(Recorder::disabled());
        let bound = BoundParams::bind_constant(&mut tape, params);
        let s = forward_on_tape(&mut tape, &bound, &params.config, &ex.inputs)?;
        scores.extend_from_slice(tape.value(s).data());
        labels.extend_from_slice(&ex.labels);
        targets.extend_from_slice(&ex.targets);
        mask.extend_from_slice(&ex.mask);
    }
    let loss = binary_cross_entropy(&scores, &targets, &mask)?.as_f64();
    let scores: Vec<f64> = scores.iter().map(|s| s.as_f64()).collect();
    Ok(Evaluation { loss, auc: auc(&scores, &labels, &mask)? })
}

/// Runs `cfg.epochs` epochs, evaluating on `validation` after each one
/// when it is non-empty. `on_epoch` sees every report as it is produced.
pub fn fit<T: Element>(
    state: &mut TrainState<T>,
    train: &[Example<T>],
    validation: &[Example<T>],
    cfg: &TrainConfig,
    profiling: &Profiling,
    trace: &mut Trace,
    mut on_epoch: impl FnMut(&ParallelEpoch, &TrainState<T>) -> Result<()>,
) -> Result<Vec<ParallelEpoch>> {
    let mut out = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut epoch = data_parallel_epoch(state, train, cfg, profiling, trace)?;
        if !validation.is_empty() {
            let ev = evaluate(&state.params, validation)?;
            epoch.report.val_loss = Some(ev.loss);
            epoch.report.auc = Some(ev.auc);
        }
        on_epoch(&epoch, state)?;
        out.push(epoch);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_dataset, pad_graph, GeneratorConfig};
    use crate::model::{init_params, ModelConfig};
    use crate::profiler::CostModel;

    fn graphs(n: usize) -> Vec<EventGraph> {
        let c = GeneratorConfig { particles_per_event: 4, layers: 5, ..GeneratorConfig::desk() };
        generate_dataset(&c, n).unwrap()
    }

    fn model() -> ModelParams<f32> {
        init_params(&ModelConfig { hidden_sizes: vec![16, 8], iterations: 2, ..Default::default() }).unwrap()
    }

    fn run(cfg: &TrainConfig, graphs: &[EventGraph], prof: &Profiling) -> (TrainState<f32>, ParallelEpoch) {
        let data = prepare_dataset::<f32>(graphs, cfg).unwrap();
        let mut st = TrainState::new(model(), cfg);
        let mut trace = Trace::default();
        let ep = data_parallel_epoch(&mut st, &data.examples, cfg, prof, &mut trace).unwrap();
        (st, ep)
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let cfg = TrainConfig { learning_rate: 0.0, ..Default::default() };
        let (st, _) = run(&cfg, &graphs(3), &Profiling::off());
        assert!(st.params.bit_eq(&model()));
    }

    #[test]
    fn plan_shards_and_drops() {
        let cfg = TrainConfig { batch_size: 2, workers: 2, ..Default::default() };
        let p = step_plan(10, &cfg, 0).unwrap();
        assert_eq!((p.steps.len(), p.dropped), (2, 2));
        assert_eq!(p, step_plan(10, &cfg, 0).unwrap());
        assert_ne!(p, step_plan(10, &cfg, 1).unwrap());
        assert!(step_plan(1, &TrainConfig { workers: 2, ..Default::default() }, 0).is_err());
    }

    #[test]
    fn workers_match_large_batch_bitwise() {
        let g = graphs(6);
        let prof = Profiling::off();
        let (single, _) = run(&TrainConfig { batch_size: 2, ..Default::default() }, &g, &prof);
        let (pair, ep) = run(&TrainConfig { workers: 2, ..Default::default() }, &g, &prof);
        assert!(single.params.bit_eq(&pair.params));
        assert_eq!(ep.workers.iter().map(|w| w.graphs).sum::<usize>(), 6);
    }

    #[test]
    fn epoch_time_is_sum_of_steps() {
        let (_, ep) = run(&TrainConfig::default(), &graphs(4), &Profiling::default());
        assert_eq!(ep.report.seconds, ep.report.step_seconds.iter().sum::<f64>());
        assert!(ep.report.seconds > 0.0);
        assert_eq!(ep.report.steps, 4);
    }

    #[test]
    fn simulated_uniform_replicas_scale_perfectly() {
        let cost = CostModel { flops_per_s: 1e12, bytes_per_s: 1e11, interconnect_bytes_per_s: None };
        let prof = Profiling { timer: Timer::Simulated(cost), ..Default::default() };
        let (_, ep) = run(&TrainConfig { workers: 4, ..Default::default() }, &graphs(8), &prof);
        assert!((ep.scaling.efficiency - 1.0).abs() < 1e-9, "{:?}", ep.scaling);
        let slow = CostModel { interconnect_bytes_per_s: Some(1e6), ..cost };
        let prof = Profiling { timer: Timer::Simulated(slow), ..Default::default() };
        let (_, ep) = run(&TrainConfig { workers: 4, ..Default::default() }, &graphs(8), &prof);
        assert!(ep.scaling.efficiency < 1.0);
    }

    #[test]
    fn trace_window_limits_records() {
        let mut trace = Trace::default();
        let cfg = TrainConfig::default();
        let data = prepare_dataset::<f32>(&graphs(4), &cfg).unwrap();
        let mut st = TrainState::new(model(), &cfg);
        let prof = Profiling { trace_steps: Some(1), ..Default::default() };
        data_parallel_epoch(&mut st, &data.examples, &cfg, &prof, &mut trace).unwrap();
        assert!(!trace.records.is_empty());
        assert!(trace.records.iter().all(|r| r.step == 0));
    }

    #[test]
    fn padding_leaves_loss_and_gradients() {
        let g = &graphs(1)[0];
        let spec = PaddingSpec::new(g.num_nodes() + 4, g.num_edges() + 9, 1.0).unwrap();
        let (p, _) = pad_graph(g, &spec).unwrap();
        let params = model().cast::<f64>();
        let (la, ga, _) = example_gradients(&params, &Example::from_graph(g), Recorder::disabled()).unwrap();
        let (lb, gb, _) = example_gradients(&params, &Example::from_graph(&p), Recorder::disabled()).unwrap();
        assert!((la - lb).abs() <= 1e-12 * la.abs());
        for (a, b) in ga.iter().zip(&gb) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-6));
            }
        }
    }

    #[test]
    fn loss_falls_on_one_graph() {
        let cfg = TrainConfig { learning_rate: 1e-2, ..Default::default() };
        let data = prepare_dataset::<f32>(&graphs(1), &cfg).unwrap();
        let mut st = TrainState::new(model(), &cfg);
        let mut losses = Vec::new();
        for _ in 0..30 {
            let r = train_epoch(&mut st, &data.examples, &cfg, &Profiling::off(), &mut Trace::default()).unwrap();
            losses.push(r.loss);
        }
        assert!(losses.windows(2).skip(3).all(|w| w[1] <= w[0]), "{losses:?}");
        assert!(losses[29] < losses[0]);
    }
}
