use super::updates::{gram_operator, mesb_update_with};
use super::{cddb_deep_update, cddb_update, ddpm_posterior_sample, project_update, SamplerConfig, SamplerKind};
use crate::denoise::{x0_hat, Conditioning, Denoiser};
use crate::error::{Error, Result};
use crate::linop::{LinearOperator, SharedOperator};
use crate::schedule::{NoiseSchedule, TimeGrid};
use crate::tensor::{norm2, SeededRng, Tensor};

/// Measurement-side inputs of a reverse run.
#[derive(Clone, Debug)]
pub struct ReverseInputs {
    pub x_corrupt: Tensor,
    pub y: Tensor,
    pub op: SharedOperator,
}

#[derive(Clone, Debug)]
pub struct StepRecord {
    pub n: usize,
    pub t: f64,
    pub x0_hat: Tensor,
    pub x0_new: Tensor,
    /// Relative residual of the step's CG solve, for samplers that run one.
    pub cg_residual: Option<f64>,
    /// `|| A x0_new - y ||` when a measurement is available.
    pub data_residual: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Steps in execution order, `n = N` first.
    pub steps: Vec<StepRecord>,
    pub output: Tensor,
}

/// Plain I2SB reverse process started from `x_corrupt`.
pub fn i2sb_reverse(
    denoiser: &dyn Denoiser,
    x_corrupt: &Tensor,
    config: &SamplerConfig,
    schedule: &NoiseSchedule,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    if config.kind != SamplerKind::I2sb {
        return Err(Error::invalid(format!("i2sb_reverse called with a {} config", config.kind)));
    }
    check_common(config, grid)?;
    run(denoiser, x_corrupt, None, config, schedule, grid)
}

/// Runs the configured sampler. Every step evaluates the denoiser's
/// endpoint estimate, applies the sampler's correction and then draws from
/// the DDPM posterior.
pub fn reverse_run(
    denoiser: &dyn Denoiser,
    inputs: &ReverseInputs,
    config: &SamplerConfig,
    schedule: &NoiseSchedule,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    check_common(config, grid)?;
    inputs.x_corrupt.check_shape(inputs.op.shape_in())?;
    inputs.y.check_shape(inputs.op.shape_out())?;
    if config.kind == SamplerKind::CddbDeep && !denoiser.has_vjp() {
        return Err(Error::Capability(format!(
            "CDDB-deep needs a denoiser with vector-Jacobian products; `{}` has none",
            denoiser.name()
        )));
    }
    run(
        denoiser,
        &inputs.x_corrupt,
        Some((inputs.op.as_ref(), &inputs.y)),
        config,
        schedule,
        grid,
    )
}

fn check_common(config: &SamplerConfig, grid: &TimeGrid) -> Result<()> {
    config.validate()?;
    if grid.steps() != config.steps {
        return Err(Error::invalid(format!(
            "time grid has {} steps but N = {}",
            grid.steps(),
            config.steps
        )));
    }
    Ok(())
}

fn run(
    denoiser: &dyn Denoiser,
    x_corrupt: &Tensor,
    data: Option<(&dyn LinearOperator, &Tensor)>,
    config: &SamplerConfig,
    schedule: &NoiseSchedule,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    let gram = if config.kind == SamplerKind::Mesb {
        gram_operator(&config.regularizer, x_corrupt.shape())?
    } else {
        None
    };
    let mut cond = Conditioning::new(x_corrupt.clone());
    if let Some((_, y)) = data {
        cond = cond.with_measurement(y.clone());
    }
    let mut rng = SeededRng::new(config.seed);
    let mut x = x_corrupt.clone();
    let mut steps = Vec::with_capacity(config.steps);

    for n in (1..=config.steps).rev() {
        let t = grid.t(n);
        let mut step = || -> Result<(StepRecord, Tensor)> {
            let xh = x0_hat(denoiser, &x, t, &cond, schedule)?;
            let (x0_new, cg_residual) = match (config.kind, data) {
                (SamplerKind::I2sb, _) => (xh.clone(), None),
                (_, None) => return Err(Error::invalid(format!("{} needs a measurement", config.kind))),
                (SamplerKind::Project, Some((a, y))) => {
                    let (v, r) = project_update(&xh, y, a, config.cg_iters, config.cg_tol)?;
                    (v, Some(r))
                }
                (SamplerKind::Cddb, Some((a, y))) => (cddb_update(&xh, y, a, config.alpha)?, None),
                (SamplerKind::CddbDeep, Some((a, y))) => (
                    cddb_deep_update(&x, t, &cond, denoiser, &xh, y, a, config.alpha)?,
                    None,
                ),
                (SamplerKind::Mesb, Some((a, y))) => {
                    let (v, r) =
                        mesb_update_with(&x, &xh, x_corrupt, y, a, gram.as_deref(), config, schedule, grid, n)?;
                    (v, Some(r))
                }
            };
            let data_residual = match data {
                Some((a, y)) => Some(norm2(&a.apply(&x0_new)?.sub(y)?)),
                None => None,
            };
            if !x0_new.is_finite() {
                return Err(Error::invalid("estimate became non-finite"));
            }
            let next = ddpm_posterior_sample(&x0_new, &x, n, grid, schedule, &mut rng, config.stochastic)?;
            let record = StepRecord {
                n,
                t,
                x0_hat: xh,
                x0_new,
                cg_residual,
                data_residual,
            };
            Ok((record, next))
        };
        let (record, next) = step().map_err(|e| Error::SamplerStep {
            step: n,
            source: Box::new(e),
        })?;
        steps.push(record);
        x = next;
    }
    Ok(Trajectory { steps, output: x })
}
