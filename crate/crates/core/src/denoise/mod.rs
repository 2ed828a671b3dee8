//! The noise-prediction interface `eps(X_t, t, conditioning)` and its
//! implementations.
//!
//! A denoiser predicts `eps` such that `X_t - sigma_t * eps` estimates the
//! clean endpoint `X_0` of the bridge. [`x0_hat`] performs that conversion.

mod analytic;
mod external;
mod loss;
mod oracle;
pub mod protocol;

pub use analytic::GaussianAnalyticDenoiser;
pub use external::ExternalDenoiser;
pub use loss::{bridge_matching_loss, bridge_matching_loss_at, LossEstimate};
pub use oracle::OracleDenoiser;

use crate::error::{Error, Result};
use crate::schedule::NoiseSchedule;
use crate::tensor::Tensor;

/// Side information handed to every denoiser call.
#[derive(Clone, Debug)]
pub struct Conditioning {
    pub x_corrupt: Tensor,
    /// Measurement, for denoisers that want it. Never required.
    pub measurement: Option<Tensor>,
}

impl Conditioning {
    pub fn new(x_corrupt: Tensor) -> Self {
        Self {
            x_corrupt,
            measurement: None,
        }
    }

    pub fn with_measurement(mut self, y: Tensor) -> Self {
        self.measurement = Some(y);
        self
    }
}

pub trait Denoiser: Send + Sync {
    fn predict_eps(&self, x_t: &Tensor, t: f64, cond: &Conditioning) -> Result<Tensor>;

    /// Whether [`Denoiser::vjp`] is available.
    fn has_vjp(&self) -> bool {
        false
    }

    /// `J^T v` for the Jacobian `J` of `X_t -> x0_hat(X_t)`.
    fn vjp(&self, _x_t: &Tensor, _t: f64, _cond: &Conditioning, _v: &Tensor) -> Result<Tensor> {
        Err(Error::Capability(format!(
            "{} does not provide vector-Jacobian products",
            self.name()
        )))
    }

    /// `X_t - sigma_t * eps`. Implementations with a closed-form mean may
    /// return it directly.
    fn predict_x0(&self, x_t: &Tensor, t: f64, cond: &Conditioning, schedule: &NoiseSchedule) -> Result<Tensor> {
        let eps = self.predict_eps(x_t, t, cond)?;
        eps.check_same_shape(x_t)?;
        let sigma = schedule.sigma2(t)?.sqrt();
        let mut out = x_t.clone();
        out.add_scaled(-sigma, &eps)?;
        Ok(out)
    }

    fn name(&self) -> &str;
}

/// Expected clean image `X_t - sigma_t * eps(X_t, t)`. `t = 0` is rejected.
pub fn x0_hat(
    denoiser: &dyn Denoiser,
    x_t: &Tensor,
    t: f64,
    cond: &Conditioning,
    schedule: &NoiseSchedule,
) -> Result<Tensor> {
    check_query_time(t)?;
    cond.x_corrupt.check_same_shape(x_t)?;
    let out = denoiser.predict_x0(x_t, t, cond, schedule)?;
    out.check_same_shape(x_t)?;
    Ok(out)
}

pub(crate) fn check_query_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::invalid(format!("denoiser queried at t={t}; need 0 < t <= 1")));
    }
    Ok(())
}
