//! Numerical checks of the bridge construction: the closed-form potentials
//! against their PDEs, the drift identity, CDDB versus the exact
//! least-squares update, and the two forms of the MESB linear system.

mod equivalence;
mod pde;
mod suite;
mod theorem2;

pub use equivalence::{formulation_equivalence_check, EquivalenceReport};
pub use pde::{
    log_psi, log_psi_hat_component, psi_hat_component_pde_residual, psi_pde_residual, PdeGridSpec, PdeLevel,
    PdeResidualReport,
};
pub use suite::{
    run_check, CheckOutcome, CHECK_NAMES, EQUIVALENCE_TOL, GRAD_TOL, PDE_ORDER, PDE_ORDER_TOL, THEOREM2_TOL,
};
pub use theorem2::{theorem2_check, Theorem2Report};

use crate::error::{Error, Result};
use crate::schedule::NoiseSchedule;
use crate::tensor::{SeededRng, Tensor};

pub const GRAD_PROBES: usize = 16;
pub const GRAD_FD_STEP: f64 = 1e-5;

/// `-(x - x_corrupt) / sigma_bar_t^2`.
pub fn grad_log_psi(x: &Tensor, x_corrupt: &Tensor, t: f64, schedule: &NoiseSchedule) -> Result<Tensor> {
    let v = schedule.sigma_bar2(t)?;
    x.zip_map(x_corrupt, |x, c| -(x - c) / v)
}

fn log_psi_tensor(x: &[f64], c: &[f64], v: f64) -> f64 {
    let sq: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
    -sq / (2.0 * v) - 0.5 * x.len() as f64 * (2.0 * std::f64::consts::PI * v).ln()
}

/// Largest relative deviation between [`grad_log_psi`] and central
/// differences of `log N(x; x_corrupt, sigma_bar_t^2 I)` over
/// [`GRAD_PROBES`] random `x` around `x_corrupt`.
pub fn grad_log_psi_check(x_corrupt: &Tensor, t: f64, schedule: &NoiseSchedule, seed: u64) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid(format!("need 0 < t < 1, got {t}")));
    }
    let v = schedule.sigma_bar2(t)?;
    let sd = v.sqrt();
    let c = x_corrupt.as_slice();
    let mut rng = SeededRng::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..GRAD_PROBES {
        // offsets of 0.5 to 3 standard deviations keep every component of
        // the gradient away from zero
        let x = Tensor::from_fn(x_corrupt.shape(), |i| {
            let mag = rng.uniform_range(0.5, 3.0) * sd;
            let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            c[i] + sign * mag
        })?;
        let g = grad_log_psi(&x, x_corrupt, t, schedule)?;
        let mut probe = x.clone().into_vec();
        for i in 0..probe.len() {
            let x_i = probe[i];
            probe[i] = x_i + GRAD_FD_STEP;
            let up = log_psi_tensor(&probe, c, v);
            probe[i] = x_i - GRAD_FD_STEP;
            let down = log_psi_tensor(&probe, c, v);
            probe[i] = x_i;
            let fd = (up - down) / (2.0 * GRAD_FD_STEP);
            let exact = g.as_slice()[i];
            worst = worst.max((fd - exact).abs() / exact.abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule() -> NoiseSchedule {
        NoiseSchedule::symmetric(1e-4, 0.15).unwrap()
    }

    #[test]
    fn drift_matches_finite_differences() {
        let s = schedule();
        let xc = Tensor::from_vec(vec![0.2, -0.4, 0.9, 0.0]).unwrap();
        for t in [0.1, 0.5, 0.9] {
            let err = grad_log_psi_check(&xc, t, &s, 17).unwrap();
            assert!(err <= 1e-6, "t={t}: {err}");
        }
        assert!(grad_log_psi_check(&xc, 1.0, &s, 0).is_err());
    }

    #[test]
    fn drift_vanishes_at_center() {
        let s = schedule();
        let xc = Tensor::from_vec(vec![0.3, 0.1]).unwrap();
        assert_eq!(grad_log_psi(&xc, &xc, 0.4, &s).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn doubling_variance_halves_drift() {
        let base = NoiseSchedule::from_fn(101, |_| 0.1).unwrap();
        let doubled = NoiseSchedule::from_fn(101, |_| 0.2).unwrap();
        let xc = Tensor::from_vec(vec![0.0]).unwrap();
        let x = Tensor::from_vec(vec![0.5]).unwrap();
        let a = grad_log_psi(&x, &xc, 0.3, &base).unwrap().as_slice()[0];
        let b = grad_log_psi(&x, &xc, 0.3, &doubled).unwrap().as_slice()[0];
        assert!((a - 2.0 * b).abs() < 1e-12);
    }
}
