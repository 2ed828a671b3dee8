use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use super::metrics::{psnr, ssim};
use super::task::{make_task, Task, TaskKind, TaskSpec};
use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::linop::LinearOperator;
use crate::par::{map_indexed, Parallelism};
use crate::samplers::{reverse_run, ReverseInputs, SamplerConfig, SamplerKind, Trajectory};
use crate::schedule::{GridDensity, NoiseSchedule, TimeGrid};
use crate::tensor::{mix_seed, norm2, SeededRng, Tensor};

/// Phantoms live in `[0, 1]`.
pub const DATA_RANGE: f64 = 1.0;

pub const CSV_HEADER: &str =
    "task,sampler,N,p,k_y,k_E,T,phantom_index,seed,psnr_db,ssim,data_residual,wall_ms";

#[derive(Clone, Debug)]
pub struct Experiment {
    pub task: TaskSpec,
    pub samplers: Vec<SamplerConfig>,
    pub n_phantoms: usize,
    pub schedule: Arc<NoiseSchedule>,
    pub parallelism: Parallelism,
    pub grid_density: GridDensity,
    /// Record wall-clock milliseconds per run; otherwise `wall_ms` is 0 so
    /// that tables stay byte-reproducible.
    pub timing: bool,
    pub keep_outputs: bool,
    pub keep_trajectories: bool,
}

impl Experiment {
    pub fn new(task: TaskSpec, samplers: Vec<SamplerConfig>, n_phantoms: usize, schedule: Arc<NoiseSchedule>) -> Self {
        Self {
            task,
            samplers,
            n_phantoms,
            schedule,
            parallelism: Parallelism::default(),
            grid_density: GridDensity::default(),
            timing: false,
            keep_outputs: false,
            keep_trajectories: false,
        }
    }

    pub fn with_parallelism(mut self, mode: Parallelism) -> Self {
        self.parallelism = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        if self.samplers.is_empty() {
            return Err(Error::invalid("experiment needs at least one sampler config"));
        }
        if self.n_phantoms == 0 {
            return Err(Error::invalid("experiment needs at least one phantom"));
        }
        for c in &self.samplers {
            c.validate()?;
        }
        Ok(())
    }

    /// Seed of the task built for phantom `index`.
    pub fn phantom_seed(&self, index: usize) -> u64 {
        mix_seed(self.task.phantom_seed, index as u64)
    }
}

/// A phantom's task and denoiser, or why they could not be built.
type Prepared = std::result::Result<(Task, Arc<dyn Denoiser>), String>;

/// Seed of the reverse run of `config` on phantom `index`.
pub fn run_seed(config: &SamplerConfig, index: usize) -> u64 {
    mix_seed(config.seed, index as u64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub task: TaskKind,
    pub sampler: SamplerKind,
    pub steps: usize,
    pub cg_iters: usize,
    pub k_y: f64,
    pub k_e_scale: f64,
    pub regularizer: &'static str,
    /// `None` for rows averaged over phantoms.
    pub phantom_index: Option<usize>,
    pub seed: u64,
    pub psnr_db: f64,
    pub ssim: f64,
    /// `|A x - y| / |y|`.
    pub data_residual: f64,
    pub wall_ms: f64,
    pub error: Option<String>,
}

impl MetricRow {
    fn blank(task: TaskKind, config: &SamplerConfig, phantom_index: Option<usize>, seed: u64) -> Self {
        Self {
            task,
            sampler: config.kind,
            steps: config.steps,
            cg_iters: config.cg_iters,
            k_y: config.k_y,
            k_e_scale: config.k_e_scale,
            regularizer: config.regularizer.label(),
            phantom_index,
            seed,
            psnr_db: f64::NAN,
            ssim: f64::NAN,
            data_residual: f64::NAN,
            wall_ms: 0.0,
            error: None,
        }
    }

    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    pub fn csv_line(&self) -> String {
        let index = match self.phantom_index {
            Some(i) => i.to_string(),
            None => "mean".to_string(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.task,
            self.sampler,
            self.steps,
            self.cg_iters,
            fmt_num(self.k_y),
            fmt_num(self.k_e_scale),
            self.regularizer,
            index,
            self.seed,
            fmt_num(self.psnr_db),
            fmt_num(self.ssim),
            fmt_num(self.data_residual),
            fmt_num(self.wall_ms),
        )
    }
}

/// Shortest round-trip decimal; `inf`, `-inf` and `nan` for the specials.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v}")
    }
}

pub fn to_csv<'a>(rows: impl IntoIterator<Item = &'a MetricRow>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_line());
    }
    out
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub row: MetricRow,
    pub output: Option<Tensor>,
    pub trajectory: Option<Trajectory>,
}

#[derive(Clone, Debug)]
pub struct PhantomRecord {
    pub index: usize,
    pub x_true: Tensor,
    pub x_corrupt: Tensor,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    /// One record per (sampler config, phantom), config-major.
    pub runs: Vec<RunRecord>,
    /// One row per sampler config, averaged over phantoms.
    pub cells: Vec<MetricRow>,
    /// Filled when the experiment keeps outputs.
    pub phantoms: Vec<PhantomRecord>,
}

impl ExperimentResult {
    pub fn rows(&self) -> impl Iterator<Item = &MetricRow> {
        self.runs.iter().map(|r| &r.row)
    }

    pub fn errors(&self) -> impl Iterator<Item = &MetricRow> {
        self.rows().filter(|r| r.failed())
    }
}

fn relative_residual(op: &dyn LinearOperator, x: &Tensor, y: &Tensor) -> Result<f64> {
    let r = op.apply(x)?.sub(y)?;
    let ny = norm2(y);
    Ok(if ny > 0.0 { norm2(&r) / ny } else { norm2(&r) })
}

fn mean_row(config: &SamplerConfig, task: TaskKind, rows: &[&MetricRow]) -> MetricRow {
    let mut out = MetricRow::blank(task, config, None, config.seed);
    if let Some(bad) = rows.iter().find(|r| r.failed()) {
        out.error = bad.error.clone();
        return out;
    }
    let n = rows.len() as f64;
    let avg = |f: fn(&MetricRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
    out.psnr_db = avg(|r| r.psnr_db);
    out.ssim = avg(|r| r.ssim);
    out.data_residual = avg(|r| r.data_residual);
    out.wall_ms = avg(|r| r.wall_ms);
    out
}

/// Runs every sampler config on every phantom. `denoiser_factory` is called
/// once per phantom. Failures are recorded in the affected rows.
pub fn run_experiment<F>(experiment: &Experiment, denoiser_factory: F) -> Result<ExperimentResult>
where
    F: Fn(&Task) -> Result<Arc<dyn Denoiser>> + Sync,
{
    experiment.validate()?;
    let n_ph = experiment.n_phantoms;
    let mode = experiment.parallelism;
    let prepared: Vec<Prepared> = map_indexed(n_ph, mode, |i| {
        let mut rng = SeededRng::new(experiment.phantom_seed(i));
        let task = make_task(&experiment.task, &mut rng).map_err(|e| format!("task setup: {e}"))?;
        let den = denoiser_factory(&task).map_err(|e| format!("denoiser setup: {e}"))?;
        Ok((task, den))
    });
    let grids: Vec<TimeGrid> =
        experiment.samplers.iter().map(|c| TimeGrid::quadratic_with(c.steps, experiment.grid_density)).collect::<Result<_>>()?;

    let kind = experiment.task.kind;
    let runs: Vec<RunRecord> = map_indexed(experiment.samplers.len() * n_ph, mode, |job| {
        let (ci, pi) = (job / n_ph, job % n_ph);
        let config = experiment.samplers[ci].clone().with_seed(run_seed(&experiment.samplers[ci], pi));
        let mut row = MetricRow::blank(kind, &config, Some(pi), config.seed);
        let (task, den) = match &prepared[pi] {
            Ok(p) => p,
            Err(msg) => {
                row.error = Some(msg.clone());
                return RunRecord {
                    row,
                    output: None,
                    trajectory: None,
                };
            }
        };
        let mut attempt = || -> Result<(Tensor, Trajectory)> {
            let inputs = ReverseInputs {
                x_corrupt: task.x_corrupt.clone(),
                y: task.y.clone(),
                op: task.op.clone(),
            };
            let start = Instant::now();
            let traj = reverse_run(den.as_ref(), &inputs, &config, &experiment.schedule, &grids[ci])?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            let x = traj.output.clone();
            row.psnr_db = psnr(&x, &task.x_true, DATA_RANGE)?;
            row.ssim = ssim(&x, &task.x_true, DATA_RANGE)?;
            row.data_residual = relative_residual(task.op.as_ref(), &x, &task.y)?;
            if experiment.timing {
                row.wall_ms = ms;
            }
            Ok((x, traj))
        };
        match attempt() {
            Ok((x, traj)) => RunRecord {
                row,
                output: experiment.keep_outputs.then_some(x),
                trajectory: experiment.keep_trajectories.then_some(traj),
            },
            Err(e) => {
                row.psnr_db = f64::NAN;
                row.ssim = f64::NAN;
                row.data_residual = f64::NAN;
                row.error = Some(e.to_string());
                RunRecord {
                    row,
                    output: None,
                    trajectory: None,
                }
            }
        }
    });

    let cells = experiment
        .samplers
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let rows: Vec<&MetricRow> = runs[ci * n_ph..(ci + 1) * n_ph].iter().map(|r| &r.row).collect();
            mean_row(c, kind, &rows)
        })
        .collect();
    let phantoms = if experiment.keep_outputs {
        prepared
            .iter()
            .enumerate()
            .filter_map(|(index, p)| {
                p.as_ref().ok().map(|(t, _)| PhantomRecord {
                    index,
                    x_true: t.x_true.clone(),
                    x_corrupt: t.x_corrupt.clone(),
                })
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ExperimentResult { runs, cells, phantoms })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    KY,
    KE,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::KY => "k_y",
            SweepParam::KE => "k_E",
        }
    }

    pub fn apply(self, config: &SamplerConfig, value: f64) -> SamplerConfig {
        let mut c = config.clone();
        match self {
            SweepParam::KY => c.k_y = value,
            SweepParam::KE => c.k_e_scale = value,
        }
        c
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "k_y" | "ky" => Ok(SweepParam::KY),
            "k_e" | "ke" => Ok(SweepParam::KE),
            _ => Err(Error::invalid(format!("unknown sweep parameter `{s}` (expected k_y or k_E)"))),
        }
    }
}

/// Varies one MESB weight over `values` with everything else taken from the
/// experiment's single sampler config. Returns the full result, whose
/// `cells` hold one averaged row per value.
pub fn sweep<F>(experiment: &Experiment, param: SweepParam, values: &[f64], denoiser_factory: F) -> Result<ExperimentResult>
where
    F: Fn(&Task) -> Result<Arc<dyn Denoiser>> + Sync,
{
    if values.is_empty() {
        return Err(Error::invalid("sweep needs at least one value"));
    }
    if let Some(v) = values.iter().find(|v| v.is_nan() || **v < 0.0) {
        return Err(Error::invalid(format!("sweep values must be >= 0, got {v}")));
    }
    let base = match experiment.samplers.as_slice() {
        [c] if c.kind == SamplerKind::Mesb => c,
        [c] => return Err(Error::invalid(format!("sweeps vary MESB weights; got a {} config", c.kind))),
        _ => return Err(Error::invalid("sweep needs exactly one base sampler config")),
    };
    let mut exp = experiment.clone();
    exp.samplers = values.iter().map(|&v| param.apply(base, v)).collect();
    run_experiment(&exp, denoiser_factory)
}
