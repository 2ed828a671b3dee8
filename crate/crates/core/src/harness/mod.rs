//! Synthetic tasks, image metrics and seeded experiment tables.

mod experiment;
mod metrics;
mod task;

pub use experiment::{
    fmt_num, run_experiment, run_seed, sweep, to_csv, Experiment, ExperimentResult, MetricRow, PhantomRecord,
    RunRecord, SweepParam, CSV_HEADER, DATA_RANGE,
};
pub use metrics::{psnr, ssim, ssim_window_size, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};
pub use task::{make_task, phantom, Task, TaskKind, TaskSpec, CT_CORRUPT_CG_ITERS};
