//! Forward bridge sampling and the reverse samplers: I2SB, Project, CDDB,
//! CDDB-deep and MESB.

mod bridge;
mod reverse;
mod updates;

use std::fmt;
use std::str::FromStr;

pub use bridge::{ddpm_posterior_sample, forward_sample};
pub use reverse::{i2sb_reverse, reverse_run, ReverseInputs, StepRecord, Trajectory};
pub use updates::{
    cddb_deep_update, cddb_update, extrapolation_target, mesb_update, project_update, step_length_for_noise,
    MesbSystem,
};

use crate::error::{Error, Result};
use crate::linalg::DEFAULT_RESIDUAL_TOL;
use crate::linop::SharedOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    I2sb,
    Project,
    Cddb,
    CddbDeep,
    Mesb,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 5] = [
        SamplerKind::I2sb,
        SamplerKind::Project,
        SamplerKind::Cddb,
        SamplerKind::CddbDeep,
        SamplerKind::Mesb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::I2sb => "i2sb",
            SamplerKind::Project => "project",
            SamplerKind::Cddb => "cddb",
            SamplerKind::CddbDeep => "cddb_deep",
            SamplerKind::Mesb => "mesb",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown sampler `{s}` (expected i2sb, project, cddb, cddb_deep or mesb)")))
    }
}

/// Source of the `T^T T` term in the MESB system.
#[derive(Clone, Debug, Default)]
pub enum Regularizer {
    #[default]
    None,
    /// Periodic 5-point Laplacian Gram sized to the image.
    Laplacian,
    /// Any symmetric positive semidefinite operator on image space.
    Gram(SharedOperator),
}

impl Regularizer {
    pub fn label(&self) -> &'static str {
        match self {
            Regularizer::None => "none",
            Regularizer::Laplacian => "laplacian",
            Regularizer::Gram(_) => "custom",
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Regularizer::None)
    }
}

#[derive(Clone, Debug)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Number of generative steps `N`.
    pub steps: usize,
    /// CG iterations per step `p`.
    pub cg_iters: usize,
    /// Data weight; `f64::INFINITY` selects the projection route.
    pub k_y: f64,
    /// `k_E`, giving the per-step `k_e = k_E sigma_n^2 sigma_bar_n^2 / sigma_N^4`.
    pub k_e_scale: f64,
    pub regularizer: Regularizer,
    /// CDDB and CDDB-deep step length.
    pub alpha: f64,
    /// Add the posterior noise in each reverse step.
    pub stochastic: bool,
    pub seed: u64,
    pub cg_tol: f64,
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind, steps: usize) -> Self {
        Self {
            kind,
            steps,
            cg_iters: 5,
            k_y: 0.0,
            k_e_scale: 0.0,
            regularizer: Regularizer::None,
            alpha: 0.5,
            stochastic: true,
            seed: 0,
            cg_tol: DEFAULT_RESIDUAL_TOL,
        }
    }

    pub fn mesb(steps: usize, k_y: f64, k_e_scale: f64) -> Self {
        Self {
            k_y,
            k_e_scale,
            ..Self::new(SamplerKind::Mesb, steps)
        }
    }

    pub fn with_cg_iters(mut self, p: usize) -> Self {
        self.cg_iters = p;
        self
    }

    pub fn with_regularizer(mut self, r: Regularizer) -> Self {
        self.regularizer = r;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn deterministic(mut self) -> Self {
        self.stochastic = false;
        self
    }

    pub fn with_stochastic(mut self, on: bool) -> Self {
        self.stochastic = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("N must be at least 1"));
        }
        if self.cg_iters == 0 {
            return Err(Error::invalid("p must be at least 1"));
        }
        if self.k_y.is_nan() || self.k_y < 0.0 {
            return Err(Error::invalid(format!("k_y must be >= 0, got {}", self.k_y)));
        }
        if !self.k_e_scale.is_finite() || self.k_e_scale < 0.0 {
            return Err(Error::invalid(format!("k_E must be finite and >= 0, got {}", self.k_e_scale)));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::invalid(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if !(self.cg_tol >= 0.0) {
            return Err(Error::invalid("CG tolerance must be >= 0"));
        }
        if self.kind == SamplerKind::Mesb && self.k_y.is_infinite() && !self.regularizer.is_none() {
            return Err(Error::invalid("k_y = inf needs T = none"));
        }
        Ok(())
    }
}
