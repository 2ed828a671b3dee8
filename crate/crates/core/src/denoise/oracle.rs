use super::{check_query_time, Conditioning, Denoiser};
use crate::error::Result;
use crate::schedule::NoiseSchedule;
use crate::tensor::Tensor;

/// Test double that always knows the clean image.
#[derive(Clone, Debug)]
pub struct OracleDenoiser {
    x0: Tensor,
    schedule: NoiseSchedule,
}

impl OracleDenoiser {
    pub fn new(x0_true: Tensor, schedule: NoiseSchedule) -> Self {
        Self {
            x0: x0_true,
            schedule,
        }
    }
}

impl Denoiser for OracleDenoiser {
    fn predict_eps(&self, x_t: &Tensor, t: f64, _cond: &Conditioning) -> Result<Tensor> {
        check_query_time(t)?;
        let sigma = self.schedule.sigma2(t)?.sqrt();
        x_t.zip_map(&self.x0, |x, x0| (x - x0) / sigma)
    }

    fn predict_x0(&self, x_t: &Tensor, t: f64, _cond: &Conditioning, _schedule: &NoiseSchedule) -> Result<Tensor> {
        check_query_time(t)?;
        x_t.check_same_shape(&self.x0)?;
        Ok(self.x0.clone())
    }

    fn has_vjp(&self) -> bool {
        true
    }

    fn vjp(&self, x_t: &Tensor, _t: f64, _cond: &Conditioning, v: &Tensor) -> Result<Tensor> {
        v.check_same_shape(x_t)?;
        Tensor::zeros(v.shape())
    }

    fn name(&self) -> &str {
        "oracle"
    }
}
