use std::sync::Arc;

use super::{Regularizer, SamplerConfig};
use crate::denoise::{Conditioning, Denoiser};
use crate::error::{Error, Result};
use crate::linalg::{cg_solve, CgOptions};
use crate::linop::{LaplacianGram, LinearOperator, SharedOperator};
use crate::schedule::{NoiseSchedule, TimeGrid};
use crate::tensor::Tensor;

/// The MESB normal equations
///
/// ```text
/// [(1 + k_e) I + T^T T + k_y A^T A] X = (I + T^T T) x0_hat + k_e X_0e + k_y A^T y
/// ```
///
/// Terms with a zero weight are skipped entirely, so `k_e = k_y = 0`, `T = 0`
/// gives exactly the identity.
#[derive(Clone, Copy)]
pub struct MesbSystem<'a> {
    pub a: &'a dyn LinearOperator,
    pub gram: Option<&'a dyn LinearOperator>,
    pub k_e: f64,
    pub k_y: f64,
}

impl MesbSystem<'_> {
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let mut out = if self.k_e == 0.0 {
            x.clone()
        } else {
            x.scale(1.0 + self.k_e)
        };
        if let Some(g) = self.gram {
            out.add_scaled(1.0, &g.apply(x)?)?;
        }
        if self.k_y != 0.0 {
            out.add_scaled(self.k_y, &self.a.normal(x)?)?;
        }
        Ok(out)
    }

    pub fn rhs(&self, x0_hat: &Tensor, x0_e: &Tensor, y: &Tensor) -> Result<Tensor> {
        let mut b = x0_hat.clone();
        if let Some(g) = self.gram {
            b.add_scaled(1.0, &g.apply(x0_hat)?)?;
        }
        if self.k_e != 0.0 {
            b.add_scaled(self.k_e, x0_e)?;
        }
        if self.k_y != 0.0 {
            b.add_scaled(self.k_y, &self.a.adjoint(y)?)?;
        }
        Ok(b)
    }
}

/// `X_0e = (sigma_N^2 x_n - sigma_n^2 x_corrupt) / sigma_bar_n^2`, the
/// endpoint that the bridge mean through `x_n` and `x_corrupt` implies.
/// Where `sigma_bar_n = 0` this is `x_corrupt`.
pub fn extrapolation_target(
    x_n: &Tensor,
    x_corrupt: &Tensor,
    n: usize,
    grid: &TimeGrid,
    schedule: &NoiseSchedule,
) -> Result<Tensor> {
    check_step(n, grid)?;
    x_n.check_same_shape(x_corrupt)?;
    let t = grid.t(n);
    let sb2 = schedule.sigma_bar2(t)?;
    if sb2 <= 0.0 {
        return Ok(x_corrupt.clone());
    }
    let s2 = schedule.sigma2(t)?;
    let s2_end = schedule.sigma2(grid.t(grid.steps()))?;
    let (c_n, c_c) = (s2_end / sb2, s2 / sb2);
    x_n.zip_map(x_corrupt, |xn, xc| c_n * xn - c_c * xc)
}

/// Per-step `k_e = k_E sigma_n^2 sigma_bar_n^2 / sigma_N^4`.
pub(crate) fn step_k_e(k_e_scale: f64, n: usize, grid: &TimeGrid, schedule: &NoiseSchedule) -> Result<f64> {
    if k_e_scale == 0.0 {
        return Ok(0.0);
    }
    let t = grid.t(n);
    let s2_end = schedule.sigma2(grid.t(grid.steps()))?;
    Ok(k_e_scale * schedule.sigma2(t)? * schedule.sigma_bar2(t)? / (s2_end * s2_end))
}

pub(crate) fn gram_operator(reg: &Regularizer, shape: &[usize]) -> Result<Option<SharedOperator>> {
    match reg {
        Regularizer::None => Ok(None),
        Regularizer::Laplacian => Ok(Some(Arc::new(LaplacianGram::new(shape)?))),
        Regularizer::Gram(op) => {
            if op.shape_in() != shape || op.shape_out() != shape {
                return Err(Error::shape(shape, op.shape_in()));
            }
            Ok(Some(Arc::clone(op)))
        }
    }
}

fn check_step(n: usize, grid: &TimeGrid) -> Result<()> {
    if n == 0 || n > grid.steps() {
        return Err(Error::invalid(format!("step {n} outside 1..={}", grid.steps())));
    }
    Ok(())
}

/// MESB correction of `x0_hat` at step `n`. Returns the new estimate and
/// the relative residual of the final CG iterate.
///
/// `k_y = inf` is the constrained limit: with `T = 0` the blend
/// `(x0_hat + k_e X_0e)/(1 + k_e)` is projected onto `A X = y`.
#[allow(clippy::too_many_arguments)]
pub fn mesb_update(
    x_n: &Tensor,
    x0_hat: &Tensor,
    x_corrupt: &Tensor,
    y: &Tensor,
    a: &dyn LinearOperator,
    config: &SamplerConfig,
    schedule: &NoiseSchedule,
    grid: &TimeGrid,
    n: usize,
) -> Result<(Tensor, f64)> {
    check_step(n, grid)?;
    let gram = gram_operator(&config.regularizer, x0_hat.shape())?;
    mesb_update_with(x_n, x0_hat, x_corrupt, y, a, gram.as_deref(), config, schedule, grid, n)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn mesb_update_with(
    x_n: &Tensor,
    x0_hat: &Tensor,
    x_corrupt: &Tensor,
    y: &Tensor,
    a: &dyn LinearOperator,
    gram: Option<&dyn LinearOperator>,
    config: &SamplerConfig,
    schedule: &NoiseSchedule,
    grid: &TimeGrid,
    n: usize,
) -> Result<(Tensor, f64)> {
    let k_e = step_k_e(config.k_e_scale, n, grid, schedule)?;
    let x0_e = if k_e != 0.0 {
        Some(extrapolation_target(x_n, x_corrupt, n, grid, schedule)?)
    } else {
        None
    };

    if config.k_y.is_infinite() {
        if gram.is_some() {
            return Err(Error::invalid("k_y = inf is only defined with T = none"));
        }
        let target = match &x0_e {
            Some(e) => x0_hat.zip_map(e, |h, e| (h + k_e * e) / (1.0 + k_e))?,
            None => x0_hat.clone(),
        };
        return project_update(&target, y, a, config.cg_iters, config.cg_tol);
    }

    let system = MesbSystem {
        a,
        gram,
        k_e,
        k_y: config.k_y,
    };
    let rhs = system.rhs(x0_hat, x0_e.as_ref().unwrap_or(x0_hat), y)?;
    let opts = CgOptions::new(config.cg_iters).with_tolerance(config.cg_tol);
    let out = cg_solve(|x: &Tensor| system.apply(x), &rhs, x0_hat, &opts)?;
    Ok((out.solution, out.residual))
}

/// `x0_hat + A^T z` with `z` the `p`-step CG solve of `A A^T z = y - A x0_hat`
/// from zero. Returns the estimate and the relative CG residual.
pub fn project_update(x0_hat: &Tensor, y: &Tensor, a: &dyn LinearOperator, p: usize, tol: f64) -> Result<(Tensor, f64)> {
    let rhs = y.sub(&a.apply(x0_hat)?)?;
    let z0 = Tensor::zeros(y.shape())?;
    let opts = CgOptions::new(p).with_tolerance(tol);
    let out = cg_solve(|z: &Tensor| a.apply(&a.adjoint(z)?), &rhs, &z0, &opts)?;
    if out.iterations == 0 {
        return Ok((x0_hat.clone(), out.residual));
    }
    let mut x = x0_hat.clone();
    x.add_scaled(1.0, &a.adjoint(&out.solution)?)?;
    Ok((x, out.residual))
}

/// `x0_hat + alpha A^T (y - A x0_hat)`.
pub fn cddb_update(x0_hat: &Tensor, y: &Tensor, a: &dyn LinearOperator, alpha: f64) -> Result<Tensor> {
    if !(alpha >= 0.0) {
        return Err(Error::invalid(format!("alpha must be >= 0, got {alpha}")));
    }
    let r = y.sub(&a.apply(x0_hat)?)?;
    let mut x = x0_hat.clone();
    if alpha != 0.0 {
        x.add_scaled(alpha, &a.adjoint(&r)?)?;
    }
    Ok(x)
}

/// `x0_hat - alpha grad_{x_n} || A x0_hat(x_n) - y ||^2`, with the gradient
/// taken through the denoiser's vector-Jacobian product.
#[allow(clippy::too_many_arguments)]
pub fn cddb_deep_update(
    x_n: &Tensor,
    t_n: f64,
    cond: &Conditioning,
    denoiser: &dyn Denoiser,
    x0_hat: &Tensor,
    y: &Tensor,
    a: &dyn LinearOperator,
    alpha: f64,
) -> Result<Tensor> {
    if !denoiser.has_vjp() {
        return Err(Error::Capability(format!(
            "CDDB-deep needs a denoiser with vector-Jacobian products; `{}` has none",
            denoiser.name()
        )));
    }
    let r = a.apply(x0_hat)?.sub(y)?;
    let v = a.adjoint(&r)?.scale(2.0);
    let g = denoiser.vjp(x_n, t_n, cond, &v)?;
    g.check_same_shape(x0_hat)?;
    let mut x = x0_hat.clone();
    if alpha != 0.0 {
        x.add_scaled(-alpha, &g)?;
    }
    Ok(x)
}

/// Step length `sigma_t^2 / (2 sigma^2)` that makes the CDDB-deep update a
/// posterior-gradient step for measurement noise variance `sigma^2`.
pub fn step_length_for_noise(sigma_t2: f64, noise_var: f64) -> Result<f64> {
    if !(noise_var > 0.0) || !(sigma_t2 >= 0.0) {
        return Err(Error::invalid("step length needs sigma_t^2 >= 0 and a positive noise variance"));
    }
    Ok(sigma_t2 / (2.0 * noise_var))
}
