use super::{Conditioning, Denoiser};
use crate::error::{Error, Result};
use crate::samplers::forward_sample;
use crate::schedule::{NoiseSchedule, TimeGrid};
use crate::tensor::{norm2, SeededRng, Tensor};

/// Monte-Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: usize,
}

impl LossEstimate {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / n).sqrt(),
            draws: samples.len(),
        }
    }
}

/// `E || eps(X_t, t) - (X_t - X_0)/sigma_t ||` with the pair drawn uniformly
/// from `pairs`, `t` uniform over the positive times of `grid` and `X_t`
/// drawn from the bridge marginal. `X_1` is passed as the conditioning.
pub fn bridge_matching_loss(
    denoiser: &dyn Denoiser,
    pairs: &[(Tensor, Tensor)],
    schedule: &NoiseSchedule,
    grid: &TimeGrid,
    n_draws: usize,
    rng: &mut SeededRng,
) -> Result<LossEstimate> {
    if pairs.is_empty() {
        return Err(Error::invalid("loss needs at least one (X_0, X_1) pair"));
    }
    if n_draws == 0 {
        return Err(Error::invalid("loss needs at least one draw"));
    }
    let times = &grid.times()[1..];
    let mut samples = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let (x0, x1) = &pairs[rng.index(pairs.len())];
        let t = times[rng.index(times.len())];
        samples.push(one_draw(denoiser, x0, x1, t, schedule, rng)?);
    }
    Ok(LossEstimate::from_samples(&samples))
}

/// Same objective for a single pair at a fixed `t`.
pub fn bridge_matching_loss_at(
    denoiser: &dyn Denoiser,
    pair: (&Tensor, &Tensor),
    t: f64,
    schedule: &NoiseSchedule,
    n_draws: usize,
    rng: &mut SeededRng,
) -> Result<LossEstimate> {
    if n_draws == 0 {
        return Err(Error::invalid("loss needs at least one draw"));
    }
    let samples = (0..n_draws)
        .map(|_| one_draw(denoiser, pair.0, pair.1, t, schedule, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(LossEstimate::from_samples(&samples))
}

fn one_draw(
    denoiser: &dyn Denoiser,
    x0: &Tensor,
    x1: &Tensor,
    t: f64,
    schedule: &NoiseSchedule,
    rng: &mut SeededRng,
) -> Result<f64> {
    let x_t = if t < 1.0 {
        forward_sample(x0, x1, t, schedule, rng)?
    } else {
        x1.clone()
    };
    let sigma = schedule.sigma2(t)?.sqrt();
    let eps = denoiser.predict_eps(&x_t, t, &Conditioning::new(x1.clone()))?;
    let target = x_t.zip_map(x0, |x, x0| (x - x0) / sigma)?;
    Ok(norm2(&eps.sub(&target)?))
}
