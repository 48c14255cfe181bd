//! Victim GNNs and the evaluation harness.
//!
//! Victims are trained normally on a downstream task and then frozen: an
//! attack only changes the graph they are evaluated on. Accuracy is the mean
//! 0/1 correctness over attacked targets, and the drop it suffers is reported
//! relative to the unattacked accuracy.

mod bench;
mod model;
mod split;
mod train;

pub(crate) use bench::parallel_map;

pub use bench::{
    attack_node, run_benchmark, AttackReport, BenchmarkOutcome, BenchmarkSpec, CellRecord, TargetRecord, TimingRecord,
};
pub use model::{mean_aggregate, Encoder, Query, SageLayer, Sample, Task, VictimKind, VictimModel};
pub use split::{build_task_data, SplitSpec, TaskData};
pub use train::{
    accuracy, drop_in_accuracy, evaluate_batch, evaluate_target, train_victim, TrainedVictim, VictimConfig,
};
