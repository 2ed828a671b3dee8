use crate::error::{Error, Result};
use crate::schedule::{NoiseSchedule, TimeGrid};
use crate::tensor::{SeededRng, Tensor};

/// Draws `X_t ~ N((sb2 X_0 + s2 X_1)/S, s2 sb2/S I)` for `0 < t < 1`.
pub fn forward_sample(
    x0: &Tensor,
    x1: &Tensor,
    t: f64,
    schedule: &NoiseSchedule,
    rng: &mut SeededRng,
) -> Result<Tensor> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid(format!("forward sampling needs 0 < t < 1, got {t}")));
    }
    x0.check_same_shape(x1)?;
    let s2 = schedule.sigma2(t)?;
    let sb2 = schedule.sigma_bar2(t)?;
    let total = s2 + sb2;
    let (a, b) = (sb2 / total, s2 / total);
    let sd = (s2 * sb2 / total).sqrt();
    let x0s = x0.as_slice();
    let x1s = x1.as_slice();
    Tensor::from_fn(x0.shape(), |i| a * x0s[i] + b * x1s[i] + sd * rng.standard_normal())
}

/// One reverse step `X_n -> X_{n-1}` from the DDPM posterior given the
/// endpoint estimate `x0_in`. At `n = 1` this returns `x0_in` unchanged.
pub fn ddpm_posterior_sample(
    x0_in: &Tensor,
    x_n: &Tensor,
    n: usize,
    grid: &TimeGrid,
    schedule: &NoiseSchedule,
    rng: &mut SeededRng,
    stochastic: bool,
) -> Result<Tensor> {
    if n == 0 || n > grid.steps() {
        return Err(Error::invalid(format!("step {n} outside 1..={}", grid.steps())));
    }
    x0_in.check_same_shape(x_n)?;
    if n == 1 {
        return Ok(x0_in.clone());
    }
    let (t_prev, t_n) = (grid.t(n - 1), grid.t(n));
    let a2 = schedule.alpha2(t_prev, t_n)?;
    let s2 = schedule.sigma2(t_prev)?;
    let denom = a2 + s2;
    let (wa, wb) = (a2 / denom, s2 / denom);
    let x0s = x0_in.as_slice();
    let xns = x_n.as_slice();
    if stochastic {
        let sd = (s2 * a2 / denom).sqrt();
        Tensor::from_fn(x_n.shape(), |i| wa * x0s[i] + wb * xns[i] + sd * rng.standard_normal())
    } else {
        Tensor::from_fn(x_n.shape(), |i| wa * x0s[i] + wb * xns[i])
    }
}
