use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{cg_solve, CgOptions};
use crate::linop::{BlockDownsample, GaussianBlur, LinearOperator, Mask, NearestUpsample, SharedOperator, ToyRadon};
use crate::tensor::{SeededRng, Tensor};

/// CG iterations for the least-squares starting image of the CT task.
pub const CT_CORRUPT_CG_ITERS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TaskKind {
    DeblurGauss,
    SrBlock,
    Inpaint,
    CtToy,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [TaskKind::DeblurGauss, TaskKind::SrBlock, TaskKind::Inpaint, TaskKind::CtToy];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::DeblurGauss => "deblur_gauss",
            TaskKind::SrBlock => "sr_block",
            TaskKind::Inpaint => "inpaint",
            TaskKind::CtToy => "ct_toy",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown task `{s}` (expected deblur_gauss, sr_block, inpaint or ct_toy)")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Images are `size x size`.
    pub size: usize,
    /// Noise standard deviation as a percentage of `max |A x_true|`.
    pub noise_percent: f64,
    pub blur_sigma: f64,
    pub sr_factor: usize,
    /// Fraction of pixels observed by the inpainting mask.
    pub inpaint_keep: f64,
    pub ct_views: usize,
    pub ct_detectors: usize,
    pub phantom_seed: u64,
}

impl TaskSpec {
    pub fn new(kind: TaskKind, size: usize) -> Self {
        Self {
            kind,
            size,
            noise_percent: 0.0,
            blur_sigma: 1.5,
            sr_factor: 4,
            inpaint_keep: 0.3,
            ct_views: 16,
            ct_detectors: size + size / 2,
            phantom_seed: 0,
        }
    }

    pub fn with_noise(mut self, percent: f64) -> Self {
        self.noise_percent = percent;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.phantom_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 4 {
            return Err(Error::invalid(format!("image size must be at least 4, got {}", self.size)));
        }
        if !self.noise_percent.is_finite() || self.noise_percent < 0.0 {
            return Err(Error::invalid(format!("noise_percent must be >= 0, got {}", self.noise_percent)));
        }
        match self.kind {
            TaskKind::DeblurGauss if !(self.blur_sigma > 0.0) => Err(Error::invalid("blur sigma must be positive")),
            TaskKind::SrBlock if self.sr_factor < 2 || !self.size.is_multiple_of(self.sr_factor) => Err(Error::invalid(format!(
                "sr factor {} must be >= 2 and divide size {}",
                self.sr_factor, self.size
            ))),
            TaskKind::Inpaint if !(self.inpaint_keep > 0.0 && self.inpaint_keep <= 1.0) => {
                Err(Error::invalid("inpaint_keep must lie in (0, 1]"))
            }
            TaskKind::CtToy if self.size < 8 || self.ct_views == 0 || self.ct_detectors == 0 => {
                Err(Error::invalid("CT task needs size >= 8 and positive views and detectors"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Task {
    pub x_true: Tensor,
    pub y: Tensor,
    pub x_corrupt: Tensor,
    pub op: SharedOperator,
    /// Standard deviation of the added measurement noise.
    pub noise_sigma: f64,
}

/// Piecewise-constant ellipses plus smooth Gaussian bumps, clipped to `[0, 1]`.
pub fn phantom(size: usize, rng: &mut SeededRng) -> Result<Tensor> {
    let n = size as f64;
    struct Ellipse {
        cy: f64,
        cx: f64,
        ry: f64,
        rx: f64,
        cos: f64,
        sin: f64,
        value: f64,
    }
    let count = 3 + rng.index(4);
    let ellipses: Vec<Ellipse> = (0..count)
        .map(|i| {
            let big = i == 0;
            let (lo, hi) = if big { (0.3, 0.45) } else { (0.06, 0.22) };
            let angle = rng.uniform_range(0.0, std::f64::consts::PI);
            Ellipse {
                cy: n * if big { rng.uniform_range(0.45, 0.55) } else { rng.uniform_range(0.25, 0.75) },
                cx: n * if big { rng.uniform_range(0.45, 0.55) } else { rng.uniform_range(0.25, 0.75) },
                ry: n * rng.uniform_range(lo, hi),
                rx: n * rng.uniform_range(lo, hi),
                cos: angle.cos(),
                sin: angle.sin(),
                value: if big { rng.uniform_range(0.3, 0.5) } else { rng.uniform_range(-0.2, 0.5) },
            }
        })
        .collect();
    let bumps: Vec<(f64, f64, f64, f64)> = (0..2)
        .map(|_| {
            (
                n * rng.uniform_range(0.2, 0.8),
                n * rng.uniform_range(0.2, 0.8),
                n * rng.uniform_range(0.08, 0.2),
                rng.uniform_range(-0.15, 0.15),
            )
        })
        .collect();
    Tensor::from_fn(&[size, size], |i| {
        let (r, c) = ((i / size) as f64 + 0.5, (i % size) as f64 + 0.5);
        let mut v = 0.0;
        for e in &ellipses {
            let (dy, dx) = (r - e.cy, c - e.cx);
            let u = (dx * e.cos + dy * e.sin) / e.rx;
            let w = (-dx * e.sin + dy * e.cos) / e.ry;
            if u * u + w * w <= 1.0 {
                v += e.value;
            }
        }
        for &(by, bx, width, amp) in &bumps {
            let d2 = (r - by).powi(2) + (c - bx).powi(2);
            v += amp * (-d2 / (2.0 * width * width)).exp();
        }
        v.clamp(0.0, 1.0)
    })
}

fn build_operator(spec: &TaskSpec, rng: &mut SeededRng) -> Result<SharedOperator> {
    let shape = [spec.size, spec.size];
    Ok(match spec.kind {
        TaskKind::DeblurGauss => Arc::new(GaussianBlur::new(&shape, spec.blur_sigma)?),
        TaskKind::SrBlock => Arc::new(BlockDownsample::new(&shape, spec.sr_factor)?),
        TaskKind::Inpaint => {
            let total = spec.size * spec.size;
            let keep = ((total as f64 * spec.inpaint_keep).round() as usize).clamp(1, total);
            // partial Fisher-Yates gives a uniform subset
            let mut idx: Vec<usize> = (0..total).collect();
            for i in 0..keep {
                let j = i + rng.index(total - i);
                idx.swap(i, j);
            }
            let mut kept = idx[..keep].to_vec();
            kept.sort_unstable();
            Arc::new(Mask::new(&shape, kept)?)
        }
        TaskKind::CtToy => Arc::new(ToyRadon::new(spec.size, spec.ct_views, spec.ct_detectors)?),
    })
}

/// Builds `(x_true, y, x_corrupt, A)`. Everything random is drawn from `rng`
/// in a fixed order: phantom, operator (inpainting mask), noise.
pub fn make_task(spec: &TaskSpec, rng: &mut SeededRng) -> Result<Task> {
    spec.validate()?;
    let x_true = phantom(spec.size, rng)?;
    let op = build_operator(spec, rng)?;
    let clean = op.apply(&x_true)?;
    let noise_sigma = spec.noise_percent / 100.0 * clean.max_abs();
    let y = if noise_sigma > 0.0 {
        let mut y = clean.clone();
        y.add_scaled(noise_sigma, &Tensor::gaussian(clean.shape(), rng)?)?;
        y
    } else {
        clean
    };
    let x_corrupt = match spec.kind {
        TaskKind::DeblurGauss => y.clone().reshape(x_true.shape())?,
        TaskKind::SrBlock => {
            let small = [spec.size / spec.sr_factor, spec.size / spec.sr_factor];
            NearestUpsample::new(&small, spec.sr_factor)?.apply(&y)?
        }
        TaskKind::Inpaint => op.adjoint(&y)?,
        TaskKind::CtToy => {
            let rhs = op.adjoint(&y)?;
            let x0 = Tensor::zeros(x_true.shape())?;
            let opts = CgOptions::new(CT_CORRUPT_CG_ITERS).with_tolerance(0.0);
            cg_solve(|x: &Tensor| op.normal(x), &rhs, &x0, &opts)?.solution
        }
    };
    Ok(Task {
        x_true,
        y,
        x_corrupt,
        op,
        noise_sigma,
    })
}
