use std::sync::Arc;

use super::{check_query_time, Conditioning, Denoiser};
use crate::error::{Error, Result};
use crate::schedule::NoiseSchedule;
use crate::tensor::Tensor;

/// Exact posterior-mean denoiser for a Gaussian prior `X_0 ~ N(mu0, s0sq I)`.
///
/// Given the bridge marginal `X_t | X_0, X_1 ~ N(a X_0 + b X_1, v I)` with
/// `a = sb2/S`, `b = s2/S`, `v = s2 sb2/S` (`s2 = sigma_t^2`,
/// `sb2 = sigma_bar_t^2`, `S = s2 + sb2`), the posterior mean is
///
/// ```text
/// E[X_0 | X_t, X_1] = (mu0/s0sq + (X_t - b X_1)/s2) / (1/s0sq + sb2/(S s2))
/// ```
///
/// which uses `a/v = 1/s2` and `a^2/v = sb2/(S s2)` so that it stays finite at
/// `t = 1`. The map `X_t -> mean` is affine with slope
/// [`GaussianAnalyticDenoiser::gain`], so the VJP is a scalar multiple.
#[derive(Clone, Debug)]
pub struct GaussianAnalyticDenoiser {
    mu0: Tensor,
    s0sq: f64,
    schedule: Arc<NoiseSchedule>,
}

impl GaussianAnalyticDenoiser {
    /// `mu0` either matches the image shape or holds a single value that is
    /// broadcast.
    pub fn new(mu0: Tensor, s0sq: f64, schedule: Arc<NoiseSchedule>) -> Result<Self> {
        if !(s0sq > 0.0) || !s0sq.is_finite() {
            return Err(Error::invalid(format!("prior variance must be positive, got {s0sq}")));
        }
        if !mu0.is_finite() {
            return Err(Error::invalid("prior mean has non-finite entries"));
        }
        Ok(Self { mu0, s0sq, schedule })
    }

    pub fn constant_prior(mu: f64, s0sq: f64, schedule: Arc<NoiseSchedule>) -> Result<Self> {
        Self::new(Tensor::from_vec(vec![mu])?, s0sq, schedule)
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    /// `d mean / d X_t`.
    pub fn gain(&self, t: f64) -> Result<f64> {
        let (s2, sb2) = self.variances(t)?;
        Ok((1.0 / s2) / self.precision(s2, sb2))
    }

    fn variances(&self, t: f64) -> Result<(f64, f64)> {
        check_query_time(t)?;
        Ok((self.schedule.sigma2(t)?, self.schedule.sigma_bar2(t)?))
    }

    fn precision(&self, s2: f64, sb2: f64) -> f64 {
        1.0 / self.s0sq + sb2 / ((s2 + sb2) * s2)
    }

    fn prior_mean(&self, i: usize) -> f64 {
        let m = self.mu0.as_slice();
        if m.len() == 1 {
            m[0]
        } else {
            m[i]
        }
    }

    fn check_prior_shape(&self, x: &Tensor) -> Result<()> {
        if self.mu0.len() != 1 {
            self.mu0.check_same_shape(x)?;
        }
        Ok(())
    }

    pub fn posterior_mean(&self, x_t: &Tensor, t: f64, x1: &Tensor) -> Result<Tensor> {
        self.check_prior_shape(x_t)?;
        x1.check_same_shape(x_t)?;
        let (s2, sb2) = self.variances(t)?;
        let b = s2 / (s2 + sb2);
        let prec = self.precision(s2, sb2);
        let xt = x_t.as_slice();
        let x1s = x1.as_slice();
        Tensor::from_fn(x_t.shape(), |i| {
            (self.prior_mean(i) / self.s0sq + (xt[i] - b * x1s[i]) / s2) / prec
        })
    }
}

impl Denoiser for GaussianAnalyticDenoiser {
    fn predict_eps(&self, x_t: &Tensor, t: f64, cond: &Conditioning) -> Result<Tensor> {
        let mean = self.posterior_mean(x_t, t, &cond.x_corrupt)?;
        let sigma = self.schedule.sigma2(t)?.sqrt();
        x_t.zip_map(&mean, |x, m| (x - m) / sigma)
    }

    fn predict_x0(&self, x_t: &Tensor, t: f64, cond: &Conditioning, _schedule: &NoiseSchedule) -> Result<Tensor> {
        self.posterior_mean(x_t, t, &cond.x_corrupt)
    }

    fn has_vjp(&self) -> bool {
        true
    }

    fn vjp(&self, x_t: &Tensor, t: f64, _cond: &Conditioning, v: &Tensor) -> Result<Tensor> {
        v.check_same_shape(x_t)?;
        Ok(v.scale(self.gain(t)?))
    }

    fn name(&self) -> &str {
        "gaussian_analytic"
    }
}
