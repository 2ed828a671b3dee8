//! Plain-text run configuration.
//!
//! ```text
//! # comment
//! [task]
//! kind = deblur_gauss
//! size = 32
//!
//! [sampler]
//! kind = mesb
//! k_y = inf
//! ```
//!
//! Keys are matched case-insensitively. Unknown sections or keys are errors
//! that carry the file name and line number.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::denoise::{Denoiser, ExternalDenoiser, GaussianAnalyticDenoiser, OracleDenoiser};
use crate::error::{Error, Result};
use crate::harness::{Experiment, Task, TaskKind, TaskSpec};
use crate::samplers::{Regularizer, SamplerConfig, SamplerKind};
use crate::schedule::{GridDensity, NoiseSchedule, DEFAULT_BETA_MAX, DEFAULT_BETA_MIN};
use crate::tensor::Tensor;

pub const DEFAULT_DENOISER_TIMEOUT_MS: u64 = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub enum PriorMean {
    /// Centre the prior on each task's corrupt image.
    Corrupt,
    Constant(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum DenoiserSpec {
    GaussianAnalytic { mean: PriorMean, variance: f64 },
    Oracle,
    External { command: String, timeout_ms: u64 },
}

impl DenoiserSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            DenoiserSpec::GaussianAnalytic { .. } => "gaussian_analytic",
            DenoiserSpec::Oracle => "oracle",
            DenoiserSpec::External { .. } => "external",
        }
    }

    pub fn build(&self, task: &Task, schedule: &Arc<NoiseSchedule>) -> Result<Arc<dyn Denoiser>> {
        Ok(match self {
            DenoiserSpec::GaussianAnalytic { mean, variance } => {
                let mu0 = match mean {
                    PriorMean::Corrupt => task.x_corrupt.clone(),
                    PriorMean::Constant(m) => Tensor::from_vec(vec![*m])?,
                };
                Arc::new(GaussianAnalyticDenoiser::new(mu0, *variance, schedule.clone())?)
            }
            DenoiserSpec::Oracle => Arc::new(OracleDenoiser::new(task.x_true.clone(), (**schedule).clone())),
            DenoiserSpec::External { command, timeout_ms } => Arc::new(ExternalDenoiser::new(command, *timeout_ms)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    pub directory: PathBuf,
    pub emit_trajectory: bool,
    pub timing: bool,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub task: TaskSpec,
    pub n_phantoms: usize,
    pub sampler: SamplerConfig,
    pub beta_min: f64,
    pub beta_max: f64,
    pub grid_density: GridDensity,
    pub denoiser: DenoiserSpec,
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn schedule(&self) -> Result<Arc<NoiseSchedule>> {
        Ok(Arc::new(NoiseSchedule::symmetric(self.beta_min, self.beta_max)?))
    }

    pub fn experiment(&self) -> Result<Experiment> {
        let mut e = Experiment::new(self.task.clone(), vec![self.sampler.clone()], self.n_phantoms, self.schedule()?);
        e.grid_density = self.grid_density;
        e.timing = self.output.timing;
        e.keep_outputs = true;
        e.keep_trajectories = self.output.emit_trajectory;
        Ok(e)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: cannot read config: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        Parser::new(origin).run(text)
    }
}

/// Parses a number where `inf` stands for positive infinity.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    match s.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Some(f64::INFINITY),
        "nan" | "-inf" | "-infinity" => None,
        _ => s.parse::<f64>().ok().filter(|v| v.is_finite()),
    }
}

/// Comma-separated list of numbers, e.g. `1,4,16,inf`.
pub fn parse_number_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| parse_number(v).ok_or_else(|| Error::Config(format!("`{}` is not a number", v.trim()))))
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Task,
    Sampler,
    Denoiser,
    Output,
}

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Task => "task",
            Section::Sampler => "sampler",
            Section::Denoiser => "denoiser",
            Section::Output => "output",
        }
    }
}

#[derive(Default)]
struct Raw {
    task_kind: Option<TaskKind>,
    size: Option<usize>,
    noise_percent: Option<f64>,
    blur_sigma: Option<f64>,
    sr_factor: Option<usize>,
    inpaint_keep: Option<f64>,
    ct_views: Option<usize>,
    ct_detectors: Option<usize>,
    phantom_seed: Option<u64>,
    n_phantoms: Option<usize>,

    sampler_kind: Option<SamplerKind>,
    steps: Option<usize>,
    cg_iters: Option<usize>,
    k_y: Option<f64>,
    k_e: Option<f64>,
    regularizer: Option<Regularizer>,
    alpha: Option<f64>,
    stochastic: Option<bool>,
    seed: Option<u64>,
    cg_tol: Option<f64>,
    beta_min: Option<f64>,
    beta_max: Option<f64>,
    grid_density: Option<GridDensity>,

    denoiser_kind: Option<String>,
    prior_mean: Option<PriorMean>,
    prior_var: Option<f64>,
    command: Option<String>,
    timeout_ms: Option<u64>,

    directory: Option<PathBuf>,
    emit_trajectory: Option<bool>,
    timing: Option<bool>,
}

struct Parser<'a> {
    origin: &'a str,
    line: usize,
}

impl<'a> Parser<'a> {
    fn new(origin: &'a str) -> Self {
        Self { origin, line: 0 }
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Config(format!("{}:{}: {msg}", self.origin, self.line))
    }

    fn number(&self, key: &str, v: &str) -> Result<f64> {
        parse_number(v).ok_or_else(|| self.err(format!("`{key}` expects a number or inf, got `{v}`")))
    }

    fn finite(&self, key: &str, v: &str) -> Result<f64> {
        let x = self.number(key, v)?;
        if x.is_infinite() {
            return Err(self.err(format!("`{key}` must be finite")));
        }
        Ok(x)
    }

    fn integer<T: std::str::FromStr>(&self, key: &str, v: &str) -> Result<T> {
        v.parse::<T>()
            .map_err(|_| self.err(format!("`{key}` expects a non-negative integer, got `{v}`")))
    }

    fn boolean(&self, key: &str, v: &str) -> Result<bool> {
        match v.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(self.err(format!("`{key}` expects true or false, got `{v}`"))),
        }
    }

    fn set<T>(&self, slot: &mut Option<T>, key: &str, value: T) -> Result<()> {
        if slot.is_some() {
            return Err(self.err(format!("duplicate key `{key}`")));
        }
        *slot = Some(value);
        Ok(())
    }

    fn run(mut self, text: &str) -> Result<RunConfig> {
        let mut raw = Raw::default();
        let mut section: Option<Section> = None;
        for (i, line) in text.lines().enumerate() {
            self.line = i + 1;
            let line = match line.find('#') {
                Some(p) => &line[..p],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| self.err(format!("malformed section header `{line}`")))?
                    .trim()
                    .to_ascii_lowercase();
                section = Some(match name.as_str() {
                    "task" => Section::Task,
                    "sampler" => Section::Sampler,
                    "denoiser" => Section::Denoiser,
                    "output" => Section::Output,
                    _ => return Err(self.err(format!("unknown section [{name}]"))),
                });
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| self.err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section.ok_or_else(|| self.err(format!("key `{key}` appears before any section")))?;
            self.assign(&mut raw, sec, key, value)?;
        }
        self.line = 0;
        self.finish(raw)
    }

    fn assign(&self, raw: &mut Raw, sec: Section, key: &str, v: &str) -> Result<()> {
        let k = key.to_ascii_lowercase();
        match (sec, k.as_str()) {
            (Section::Task, "kind") => {
                let kind = v.parse().map_err(|e: Error| self.err(e))?;
                self.set(&mut raw.task_kind, key, kind)
            }
            (Section::Task, "size") => self.set(&mut raw.size, key, self.integer(key, v)?),
            (Section::Task, "noise_percent") => self.set(&mut raw.noise_percent, key, self.finite(key, v)?),
            (Section::Task, "blur_sigma") => self.set(&mut raw.blur_sigma, key, self.finite(key, v)?),
            (Section::Task, "sr_factor") => self.set(&mut raw.sr_factor, key, self.integer(key, v)?),
            (Section::Task, "inpaint_keep") => self.set(&mut raw.inpaint_keep, key, self.finite(key, v)?),
            (Section::Task, "ct_views") => self.set(&mut raw.ct_views, key, self.integer(key, v)?),
            (Section::Task, "ct_detectors") => self.set(&mut raw.ct_detectors, key, self.integer(key, v)?),
            (Section::Task, "phantom_seed") => self.set(&mut raw.phantom_seed, key, self.integer(key, v)?),
            (Section::Task, "n_phantoms") => self.set(&mut raw.n_phantoms, key, self.integer(key, v)?),

            (Section::Sampler, "kind") => {
                let kind = v.parse().map_err(|e: Error| self.err(e))?;
                self.set(&mut raw.sampler_kind, key, kind)
            }
            (Section::Sampler, "n") => self.set(&mut raw.steps, key, self.integer(key, v)?),
            (Section::Sampler, "p") => self.set(&mut raw.cg_iters, key, self.integer(key, v)?),
            (Section::Sampler, "k_y") => self.set(&mut raw.k_y, key, self.number(key, v)?),
            (Section::Sampler, "k_e") => self.set(&mut raw.k_e, key, self.finite(key, v)?),
            (Section::Sampler, "t") => {
                let r = match v.to_ascii_lowercase().as_str() {
                    "none" | "0" => Regularizer::None,
                    "laplacian" => Regularizer::Laplacian,
                    _ => return Err(self.err(format!("`{key}` expects none or laplacian, got `{v}`"))),
                };
                self.set(&mut raw.regularizer, key, r)
            }
            (Section::Sampler, "alpha") => self.set(&mut raw.alpha, key, self.finite(key, v)?),
            (Section::Sampler, "stochastic") => self.set(&mut raw.stochastic, key, self.boolean(key, v)?),
            (Section::Sampler, "seed") => self.set(&mut raw.seed, key, self.integer(key, v)?),
            (Section::Sampler, "cg_tol") => self.set(&mut raw.cg_tol, key, self.finite(key, v)?),
            (Section::Sampler, "beta_min") => self.set(&mut raw.beta_min, key, self.finite(key, v)?),
            (Section::Sampler, "beta_max") => self.set(&mut raw.beta_max, key, self.finite(key, v)?),
            (Section::Sampler, "grid") => {
                let d = match v.to_ascii_lowercase().as_str() {
                    "quadratic" | "near_zero" => GridDensity::NearZero,
                    "near_one" => GridDensity::NearOne,
                    _ => return Err(self.err(format!("`{key}` expects near_zero or near_one, got `{v}`"))),
                };
                self.set(&mut raw.grid_density, key, d)
            }

            (Section::Denoiser, "kind") => self.set(&mut raw.denoiser_kind, key, v.to_ascii_lowercase()),
            (Section::Denoiser, "prior_mean") => {
                let m = if v.eq_ignore_ascii_case("corrupt") {
                    PriorMean::Corrupt
                } else {
                    PriorMean::Constant(self.finite(key, v)?)
                };
                self.set(&mut raw.prior_mean, key, m)
            }
            (Section::Denoiser, "prior_var") => self.set(&mut raw.prior_var, key, self.finite(key, v)?),
            (Section::Denoiser, "command") => self.set(&mut raw.command, key, v.to_string()),
            (Section::Denoiser, "timeout_ms") => self.set(&mut raw.timeout_ms, key, self.integer(key, v)?),

            (Section::Output, "directory") => self.set(&mut raw.directory, key, PathBuf::from(v)),
            (Section::Output, "emit_trajectory") => self.set(&mut raw.emit_trajectory, key, self.boolean(key, v)?),
            (Section::Output, "timing") => self.set(&mut raw.timing, key, self.boolean(key, v)?),

            _ => Err(self.err(format!("unknown key `{key}` in [{}]", sec.name()))),
        }
    }

    fn finish(&self, raw: Raw) -> Result<RunConfig> {
        let missing = |what: &str| Error::Config(format!("{}: missing required key {what}", self.origin));
        let kind = raw.task_kind.ok_or_else(|| missing("[task] kind"))?;
        let mut task = TaskSpec::new(kind, raw.size.unwrap_or(32));
        if let Some(v) = raw.noise_percent {
            task.noise_percent = v;
        }
        if let Some(v) = raw.blur_sigma {
            task.blur_sigma = v;
        }
        if let Some(v) = raw.sr_factor {
            task.sr_factor = v;
        }
        if let Some(v) = raw.inpaint_keep {
            task.inpaint_keep = v;
        }
        if let Some(v) = raw.ct_views {
            task.ct_views = v;
        }
        if let Some(v) = raw.ct_detectors {
            task.ct_detectors = v;
        }
        task.phantom_seed = raw.phantom_seed.unwrap_or(0);
        let wrap = |e: Error| Error::Config(format!("{}: {e}", self.origin));
        task.validate().map_err(wrap)?;
        let n_phantoms = raw.n_phantoms.unwrap_or(1);
        if n_phantoms == 0 {
            return Err(Error::Config(format!("{}: [task] n_phantoms must be at least 1", self.origin)));
        }

        let skind = raw.sampler_kind.ok_or_else(|| missing("[sampler] kind"))?;
        let mut sampler = SamplerConfig::new(skind, raw.steps.unwrap_or(10));
        if let Some(v) = raw.cg_iters {
            sampler.cg_iters = v;
        }
        if let Some(v) = raw.k_y {
            sampler.k_y = v;
        }
        if let Some(v) = raw.k_e {
            sampler.k_e_scale = v;
        }
        if let Some(v) = raw.regularizer {
            sampler.regularizer = v;
        }
        if let Some(v) = raw.alpha {
            sampler.alpha = v;
        }
        if let Some(v) = raw.stochastic {
            sampler.stochastic = v;
        }
        if let Some(v) = raw.cg_tol {
            sampler.cg_tol = v;
        }
        sampler.seed = raw.seed.unwrap_or(0);
        sampler.validate().map_err(wrap)?;
        let beta_min = raw.beta_min.unwrap_or(DEFAULT_BETA_MIN);
        let beta_max = raw.beta_max.unwrap_or(DEFAULT_BETA_MAX);
        NoiseSchedule::symmetric(beta_min, beta_max).map_err(wrap)?;

        let denoiser = match raw.denoiser_kind.as_deref().unwrap_or("gaussian_analytic") {
            "gaussian_analytic" => {
                if raw.command.is_some() || raw.timeout_ms.is_some() {
                    return Err(Error::Config(format!(
                        "{}: command/timeout_ms only apply to the external denoiser",
                        self.origin
                    )));
                }
                let variance = raw.prior_var.unwrap_or(0.01);
                if !(variance > 0.0) {
                    return Err(Error::Config(format!("{}: [denoiser] prior_var must be positive", self.origin)));
                }
                DenoiserSpec::GaussianAnalytic {
                    mean: raw.prior_mean.unwrap_or(PriorMean::Corrupt),
                    variance,
                }
            }
            "oracle" => DenoiserSpec::Oracle,
            "external" => DenoiserSpec::External {
                command: raw.command.ok_or_else(|| missing("[denoiser] command"))?,
                timeout_ms: raw.timeout_ms.unwrap_or(DEFAULT_DENOISER_TIMEOUT_MS),
            },
            other => {
                return Err(Error::Config(format!(
                    "{}: unknown denoiser kind `{other}` (expected gaussian_analytic, oracle or external)",
                    self.origin
                )))
            }
        };

        Ok(RunConfig {
            task,
            n_phantoms,
            sampler,
            beta_min,
            beta_max,
            grid_density: raw.grid_density.unwrap_or_default(),
            denoiser,
            output: OutputSpec {
                directory: raw.directory.unwrap_or_else(|| PathBuf::from("out")),
                emit_trajectory: raw.emit_trajectory.unwrap_or(false),
                timing: raw.timing.unwrap_or(false),
            },
        })
    }
}
