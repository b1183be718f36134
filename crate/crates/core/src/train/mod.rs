//! Loss, metrics, the epoch loop, synchronous data parallelism and
//! strong-scaling accounting.

mod epoch;
mod log;
mod metrics;
mod optim;
mod scaling;

pub use epoch::{
    data_parallel_epoch, evaluate, example_gradients, fit, prepare_dataset, step_plan, train_epoch, EpochReport,
    Evaluation, Example, ParallelEpoch, PreparedData, Profiling, StepPlan, TrainConfig, TrainState, WorkerReport,
};
pub use log::{read_log, LogLine, TrainLog};
pub use metrics::{auc, bce_loss};
pub use optim::{Optimizer, OptimizerKind, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use scaling::{render_scaling, strong_scaling_report, ScalingRow, ScalingSummary};
