use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::schedule::NoiseSchedule;

/// Evaluation box and coarsest finite-difference steps. Each further level
/// halves both steps; the evaluation points stay fixed.
#[derive(Clone, Debug)]
pub struct PdeGridSpec {
    pub t_min: f64,
    pub t_max: f64,
    /// Points span `center +- x_half_width`.
    pub x_half_width: f64,
    pub h_x: f64,
    pub h_t: f64,
    pub levels: usize,
    pub points_t: usize,
    pub points_x: usize,
}

impl Default for PdeGridSpec {
    fn default() -> Self {
        Self {
            t_min: 0.1,
            t_max: 0.4,
            x_half_width: 0.5,
            h_x: 0.05,
            h_t: 0.04,
            levels: 3,
            points_t: 9,
            points_x: 9,
        }
    }
}

impl PdeGridSpec {
    fn validate(&self) -> Result<()> {
        if self.levels < 3 {
            return Err(Error::invalid("convergence order needs at least 3 refinement levels"));
        }
        if self.points_t < 2 || self.points_x < 2 {
            return Err(Error::invalid("need at least 2 evaluation points per axis"));
        }
        if !(self.h_x > 0.0 && self.h_t > 0.0 && self.x_half_width > 0.0) {
            return Err(Error::invalid("steps and box width must be positive"));
        }
        if !(self.t_min < self.t_max) {
            return Err(Error::invalid(format!("empty t range [{}, {}]", self.t_min, self.t_max)));
        }
        if self.t_min - self.h_t <= 0.0 || self.t_max + self.h_t >= 1.0 {
            return Err(Error::invalid(format!(
                "t range [{}, {}] with step {} touches the endpoints of [0, 1]",
                self.t_min, self.t_max, self.h_t
            )));
        }
        Ok(())
    }

    fn points(&self, center: f64) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(self.points_t * self.points_x);
        for i in 0..self.points_t {
            let t = self.t_min + (self.t_max - self.t_min) * i as f64 / (self.points_t - 1) as f64;
            for j in 0..self.points_x {
                let u = -1.0 + 2.0 * j as f64 / (self.points_x - 1) as f64;
                pts.push((center + self.x_half_width * u, t));
            }
        }
        pts
    }
}

#[derive(Clone, Debug)]
pub struct PdeLevel {
    pub h_x: f64,
    pub h_t: f64,
    pub max_residual: f64,
}

#[derive(Clone, Debug)]
pub struct PdeResidualReport {
    pub levels: Vec<PdeLevel>,
    /// `log2` ratio of consecutive max residuals.
    pub orders: Vec<f64>,
    /// Order observed between the two finest levels.
    pub order: f64,
}

impl PdeResidualReport {
    pub fn finest_residual(&self) -> f64 {
        self.levels.last().map_or(f64::NAN, |l| l.max_residual)
    }

    /// Every consecutive order lies within `target +- tol`.
    pub fn order_within(&self, target: f64, tol: f64) -> bool {
        !self.orders.is_empty() && self.orders.iter().all(|o| (o - target).abs() <= tol)
    }
}

/// Log-domain residual of `d_t psi = sign * beta/2 * psi_xx` at `(x, t)`:
/// `d_t log psi - sign * beta/2 * (d_xx log psi + (d_x log psi)^2)`.
fn residual_at(
    log_psi: &dyn Fn(f64, f64) -> Result<f64>,
    beta: f64,
    sign: f64,
    x: f64,
    t: f64,
    h_x: f64,
    h_t: f64,
) -> Result<f64> {
    let dt = (log_psi(x, t + h_t)? - log_psi(x, t - h_t)?) / (2.0 * h_t);
    let c = log_psi(x, t)?;
    let (lp, lm) = (log_psi(x + h_x, t)?, log_psi(x - h_x, t)?);
    let dx = (lp - lm) / (2.0 * h_x);
    let dxx = (lp - 2.0 * c + lm) / (h_x * h_x);
    Ok(dt - sign * 0.5 * beta * (dxx + dx * dx))
}

fn report(
    log_psi: &dyn Fn(f64, f64) -> Result<f64>,
    sign: f64,
    center: f64,
    schedule: &NoiseSchedule,
    spec: &PdeGridSpec,
) -> Result<PdeResidualReport> {
    spec.validate()?;
    let points = spec.points(center);
    let mut levels = Vec::with_capacity(spec.levels);
    for level in 0..spec.levels {
        let scale = 0.5f64.powi(level as i32);
        let (h_x, h_t) = (spec.h_x * scale, spec.h_t * scale);
        let mut worst: f64 = 0.0;
        for &(x, t) in &points {
            let r = residual_at(log_psi, schedule.beta(t)?, sign, x, t, h_x, h_t)?;
            worst = worst.max(r.abs());
        }
        levels.push(PdeLevel {
            h_x,
            h_t,
            max_residual: worst,
        });
    }
    let orders: Vec<f64> = levels
        .windows(2)
        .map(|w| (w[0].max_residual / w[1].max_residual).log2())
        .collect();
    let order = *orders.last().expect("at least 3 levels");
    Ok(PdeResidualReport { levels, orders, order })
}

/// `log N(x; x_corrupt, sigma_bar_t^2)`.
pub fn log_psi(x: f64, t: f64, x_corrupt: f64, schedule: &NoiseSchedule) -> Result<f64> {
    let v = schedule.sigma_bar2(t)?;
    Ok(-(x - x_corrupt).powi(2) / (2.0 * v) - 0.5 * (2.0 * PI * v).ln())
}

/// `log (C N(x; x0, sigma_t^2))`.
pub fn log_psi_hat_component(x: f64, t: f64, x0: f64, log_c: f64, schedule: &NoiseSchedule) -> Result<f64> {
    let v = schedule.sigma2(t)?;
    Ok(log_c - (x - x0).powi(2) / (2.0 * v) - 0.5 * (2.0 * PI * v).ln())
}

/// Finite-difference residual of `d_t Psi = -beta/2 Psi_xx` for the Gaussian
/// `Psi = N(x; x_corrupt, sigma_bar_t^2)`.
pub fn psi_pde_residual(x_corrupt: f64, schedule: &NoiseSchedule, spec: &PdeGridSpec) -> Result<PdeResidualReport> {
    let f = |x: f64, t: f64| log_psi(x, t, x_corrupt, schedule);
    report(&f, -1.0, x_corrupt, schedule, spec)
}

/// Same for the forward-heat solution `C N(x; x0, sigma_t^2)` of
/// `d_t Psi_hat = beta/2 Psi_hat_xx`.
pub fn psi_hat_component_pde_residual(
    x0: f64,
    log_c: f64,
    schedule: &NoiseSchedule,
    spec: &PdeGridSpec,
) -> Result<PdeResidualReport> {
    let f = |x: f64, t: f64| log_psi_hat_component(x, t, x0, log_c, schedule);
    report(&f, 1.0, x0, schedule, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule() -> NoiseSchedule {
        NoiseSchedule::symmetric(1e-4, 0.15).unwrap()
    }

    #[test]
    fn second_order_convergence() {
        let s = schedule();
        let spec = PdeGridSpec::default();
        let r = psi_pde_residual(0.3, &s, &spec).unwrap();
        assert!(r.order_within(2.0, 0.3), "{r:?}");
        let r = psi_hat_component_pde_residual(-0.2, 0.0, &s, &spec).unwrap();
        assert!(r.order_within(2.0, 0.3), "{r:?}");
    }

    #[test]
    fn gradient_vanishes_at_center() {
        let s = schedule();
        let h = 1e-4;
        let d = (log_psi(0.7 + h, 0.3, 0.7, &s).unwrap() - log_psi(0.7 - h, 0.3, 0.7, &s).unwrap()) / (2.0 * h);
        assert!(d.abs() <= 1e-8);
    }

    #[test]
    fn frozen_schedule_has_no_residual() {
        let s = NoiseSchedule::from_fn(1001, |t| if (0.3..=0.7).contains(&t) { 0.0 } else { 0.1 }).unwrap();
        let spec = PdeGridSpec {
            t_min: 0.35,
            t_max: 0.65,
            ..PdeGridSpec::default()
        };
        let r = psi_pde_residual(0.0, &s, &spec).unwrap();
        assert!(r.finest_residual() <= 1e-10, "{r:?}");
        assert!(r.levels.iter().all(|l| l.max_residual <= 1e-10));
    }

    #[test]
    fn constant_factor_cancels() {
        let s = schedule();
        let spec = PdeGridSpec::default();
        let a = psi_hat_component_pde_residual(0.1, 0.0, &s, &spec).unwrap();
        let b = psi_hat_component_pde_residual(0.1, 12.5, &s, &spec).unwrap();
        for (la, lb) in a.levels.iter().zip(&b.levels) {
            assert!((la.max_residual - lb.max_residual).abs() <= 1e-6 * la.max_residual.max(1e-12));
        }
    }

    #[test]
    fn symmetric_schedule_balances_at_midpoint() {
        let s = schedule();
        assert!((s.sigma2(0.5).unwrap() - s.sigma_bar2(0.5).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn endpoints_rejected() {
        let s = schedule();
        for (lo, hi) in [(0.0, 0.4), (0.6, 1.0), (0.5, 0.5)] {
            let spec = PdeGridSpec {
                t_min: lo,
                t_max: hi,
                ..PdeGridSpec::default()
            };
            assert!(matches!(psi_pde_residual(0.0, &s, &spec), Err(Error::InvalidArgument(_))));
        }
        let spec = PdeGridSpec {
            levels: 2,
            ..PdeGridSpec::default()
        };
        assert!(psi_pde_residual(0.0, &s, &spec).is_err());
    }
}
