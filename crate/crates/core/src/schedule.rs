//! Diffusion-rate schedule `beta(t)` on `[0, 1]`, its accumulated variances,
//! and the discrete generative time grids.
//!
//! `beta` is tabulated on a uniform base grid and treated as the piecewise
//! linear interpolant of that table. The prefix table stores the trapezoid
//! integral at the nodes (exact for the interpolant), and between nodes
//! `sigma2` integrates the linear piece in closed form. This keeps
//! `d sigma2 / dt == beta(t)` exactly, which the PDE residual checks rely on.

use crate::error::{Error, Result};

/// 1000 intervals, so `t = 0.5` is a node and the peak is tabulated exactly.
pub const DEFAULT_BASE_POINTS: usize = 1001;
pub const DEFAULT_BETA_MIN: f64 = 1e-4;
pub const DEFAULT_BETA_MAX: f64 = 0.15;

#[derive(Clone, Debug)]
pub struct NoiseSchedule {
    beta: Vec<f64>,
    prefix: Vec<f64>,
    step: f64,
}

impl NoiseSchedule {
    /// Tabulates `beta` at `n_base` uniformly spaced points on `[0, 1]`.
    pub fn from_fn(n_base: usize, beta: impl Fn(f64) -> f64) -> Result<Self> {
        if n_base < 2 {
            return Err(Error::invalid("schedule needs at least 2 base points"));
        }
        let step = 1.0 / (n_base - 1) as f64;
        let table: Vec<f64> = (0..n_base)
            .map(|i| beta(if i == n_base - 1 { 1.0 } else { i as f64 * step }))
            .collect();
        if let Some(bad) = table.iter().find(|b| !b.is_finite() || **b < 0.0) {
            return Err(Error::invalid(format!("beta must be finite and nonnegative, got {bad}")));
        }
        let mut prefix = Vec::with_capacity(n_base);
        prefix.push(0.0);
        for i in 1..n_base {
            prefix.push(prefix[i - 1] + 0.5 * step * (table[i - 1] + table[i]));
        }
        if prefix[n_base - 1] <= 0.0 {
            return Err(Error::invalid("schedule accumulates zero variance over [0, 1]"));
        }
        Ok(Self {
            beta: table,
            prefix,
            step,
        })
    }

    /// Triangular profile: `beta_min` at both ends, `beta_max` at `t = 0.5`.
    pub fn symmetric(beta_min: f64, beta_max: f64) -> Result<Self> {
        Self::symmetric_with_resolution(beta_min, beta_max, DEFAULT_BASE_POINTS)
    }

    pub fn symmetric_with_resolution(beta_min: f64, beta_max: f64, n_base: usize) -> Result<Self> {
        if !(beta_min > 0.0 && beta_max >= beta_min && beta_max.is_finite()) {
            return Err(Error::invalid(format!(
                "need 0 < beta_min <= beta_max, got beta_min={beta_min}, beta_max={beta_max}"
            )));
        }
        Self::from_fn(n_base, |t| {
            let d = 1.0 - 2.0 * (t - 0.5).abs();
            beta_min + (beta_max - beta_min) * d
        })
    }

    pub fn base_points(&self) -> usize {
        self.beta.len()
    }

    fn check_t(t: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("time {t} outside [0, 1]")));
        }
        Ok(())
    }

    fn cell(&self, t: f64) -> (usize, f64) {
        let last = self.beta.len() - 2;
        let i = ((t / self.step).floor() as usize).min(last);
        (i, t - i as f64 * self.step)
    }

    pub fn beta(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        let (i, s) = self.cell(t);
        let w = s / self.step;
        Ok((1.0 - w) * self.beta[i] + w * self.beta[i + 1])
    }

    /// `integral_0^t beta`.
    pub fn sigma2(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        if t == 1.0 {
            return Ok(self.total());
        }
        let (i, s) = self.cell(t);
        let slope = (self.beta[i + 1] - self.beta[i]) / self.step;
        Ok(self.prefix[i] + self.beta[i] * s + 0.5 * slope * s * s)
    }

    /// `integral_t^1 beta`.
    pub fn sigma_bar2(&self, t: f64) -> Result<f64> {
        Ok(self.total() - self.sigma2(t)?)
    }

    /// `integral_{t_a}^{t_b} beta`, for `t_a < t_b`.
    pub fn alpha2(&self, t_a: f64, t_b: f64) -> Result<f64> {
        if t_a >= t_b {
            return Err(Error::invalid(format!("alpha2 needs t_a < t_b, got {t_a} >= {t_b}")));
        }
        Ok(self.sigma2(t_b)? - self.sigma2(t_a)?)
    }

    /// `sigma2(1)`.
    pub fn total(&self) -> f64 {
        self.prefix[self.prefix.len() - 1]
    }
}

/// Which end of `[0, 1]` the quadratic grid packs its steps into.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GridDensity {
    #[default]
    NearZero,
    NearOne,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::invalid("time grid needs at least two points"));
        }
        if times[0] != 0.0 || times[times.len() - 1] != 1.0 {
            return Err(Error::invalid("time grid must start at 0 and end at 1"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("time grid must be strictly increasing"));
        }
        Ok(Self { times })
    }

    /// `t_n = (n / N)^2`.
    pub fn quadratic(steps: usize) -> Result<Self> {
        Self::quadratic_with(steps, GridDensity::NearZero)
    }

    pub fn quadratic_with(steps: usize, density: GridDensity) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("time grid needs N >= 1"));
        }
        let nn = (steps * steps) as f64;
        let times = (0..=steps)
            .map(|n| match density {
                GridDensity::NearZero => (n * n) as f64 / nn,
                GridDensity::NearOne => {
                    let m = steps - n;
                    1.0 - (m * m) as f64 / nn
                }
            })
            .collect();
        Self::from_times(times)
    }

    pub fn uniform(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("time grid needs N >= 1"));
        }
        let mut times: Vec<f64> = (0..=steps).map(|n| n as f64 / steps as f64).collect();
        times[steps] = 1.0;
        Self::from_times(times)
    }

    /// Number of generative steps `N`.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t(&self, n: usize) -> f64 {
        self.times[n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> NoiseSchedule {
        NoiseSchedule::symmetric(DEFAULT_BETA_MIN, DEFAULT_BETA_MAX).unwrap()
    }

    #[test]
    fn peak_and_symmetry() {
        let s = reference();
        assert!((s.beta(0.5).unwrap() - 0.15).abs() < 1e-15);
        assert!((s.beta(0.25).unwrap() - s.beta(0.75).unwrap()).abs() < 1e-12);
        let even = NoiseSchedule::symmetric_with_resolution(1e-4, 0.15, 1000).unwrap();
        assert!((even.beta(0.5).unwrap() - 0.15).abs() < 1e-3);
    }

    #[test]
    fn total_variance_matches_triangle_area() {
        // oracle: fine trapezoid on the analytic profile
        let f = |t: f64| 1e-4 + (0.15 - 1e-4) * (1.0 - 2.0 * (t - 0.5f64).abs());
        let m = 200_000;
        let h = 1.0 / m as f64;
        let quad: f64 = (0..m).map(|i| 0.5 * h * (f(i as f64 * h) + f((i + 1) as f64 * h))).sum();
        assert!((quad - 0.07505).abs() < 1e-8);
        assert!((reference().total() - quad).abs() < 1e-6);
    }

    #[test]
    fn endpoints_and_alpha() {
        let s = reference();
        assert_eq!(s.sigma2(0.0).unwrap(), 0.0);
        assert_eq!(s.sigma_bar2(1.0).unwrap(), 0.0);
        assert_eq!(s.alpha2(0.0, 1.0).unwrap(), s.sigma2(1.0).unwrap());
        assert!(s.sigma2(-0.1).is_err());
        assert!(s.sigma2(1.5).is_err());
        assert!(s.alpha2(0.5, 0.5).is_err());
    }

    #[test]
    fn telescoping_and_additivity() {
        let s = reference();
        let grid = TimeGrid::quadratic(37).unwrap();
        let total: f64 = grid
            .times()
            .windows(2)
            .map(|w| s.alpha2(w[0], w[1]).unwrap())
            .sum();
        assert!((total - s.total()).abs() < 1e-12);
        for &t in grid.times() {
            let r = s.sigma2(t).unwrap() + s.sigma_bar2(t).unwrap() - s.total();
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn sigma2_monotone_and_derivative_is_beta() {
        let s = reference();
        let mut prev = 0.0;
        for i in 0..=5000 {
            let t = i as f64 / 5000.0;
            let v = s.sigma2(t).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        for &t in &[0.013, 0.2, 0.4567, 0.8] {
            let h = 1e-7;
            let fd = (s.sigma2(t + h).unwrap() - s.sigma2(t - h).unwrap()) / (2.0 * h);
            assert!((fd - s.beta(t).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn refinement_is_second_order() {
        let beta = |t: f64| 0.1 + 0.05 * (3.0 * t).sin();
        let exact = |t: f64| 0.1 * t + 0.05 * (1.0 - (3.0 * t).cos()) / 3.0;
        let t = 0.7;
        let errs: Vec<f64> = [251usize, 501, 1001]
            .iter()
            .map(|&n| {
                let s = NoiseSchedule::from_fn(n, beta).unwrap();
                (s.sigma2(t).unwrap() - exact(t)).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.3, "errors {errs:?}");
        }
    }

    #[test]
    fn quadratic_grids() {
        assert_eq!(TimeGrid::quadratic(2).unwrap().times(), &[0.0, 0.25, 1.0]);
        assert_eq!(TimeGrid::quadratic(10).unwrap().t(1), 0.01);
        assert_eq!(TimeGrid::quadratic(1).unwrap().times(), &[0.0, 1.0]);
        assert!(TimeGrid::quadratic(0).is_err());
        let g = TimeGrid::quadratic_with(4, GridDensity::NearOne).unwrap();
        assert_eq!(g.times(), &[0.0, 0.4375, 0.75, 0.9375, 1.0]);
        assert!(TimeGrid::from_times(vec![0.0, 0.5, 0.5, 1.0]).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(NoiseSchedule::symmetric(0.0, 0.15).is_err());
        assert!(NoiseSchedule::symmetric(0.2, 0.15).is_err());
        assert!(NoiseSchedule::symmetric(-1.0, 0.15).is_err());
    }
}
