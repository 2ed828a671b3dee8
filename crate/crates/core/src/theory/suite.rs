//! Named checks with fixed inputs and tolerances, as run by `mesb verify`.

use std::sync::Arc;

use super::{
    formulation_equivalence_check, grad_log_psi_check, psi_hat_component_pde_residual, psi_pde_residual,
    theorem2_check, PdeGridSpec, PdeResidualReport,
};
use crate::error::{Error, Result};
use crate::linop::{BlockDownsample, GaussianBlur, LinearOperator, Mask, Scaled};
use crate::schedule::NoiseSchedule;
use crate::tensor::{SeededRng, Tensor};

pub const CHECK_NAMES: [&str; 5] = ["psi_pde", "psi_hat_pde", "grad_log_psi", "theorem2", "equivalence"];

pub const PDE_ORDER: f64 = 2.0;
pub const PDE_ORDER_TOL: f64 = 0.3;
pub const GRAD_TOL: f64 = 1e-6;
pub const THEOREM2_TOL: f64 = 1e-10;
pub const EQUIVALENCE_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub lines: Vec<String>,
    pub passed: bool,
}

fn pde_lines(report: &PdeResidualReport, lines: &mut Vec<String>) -> bool {
    for (i, l) in report.levels.iter().enumerate() {
        lines.push(format!("  level {i}: h_t={:.4e} h_x={:.4e} max|residual|={:.6e}", l.h_t, l.h_x, l.max_residual));
    }
    let ok = report.order_within(PDE_ORDER, PDE_ORDER_TOL);
    lines.push(format!(
        "  observed order {:.4} (pairwise {:?}); target {PDE_ORDER} +/- {PDE_ORDER_TOL}",
        report.order, report.orders
    ));
    ok
}

pub fn run_check(name: &str, schedule: &NoiseSchedule) -> Result<CheckOutcome> {
    let mut lines = Vec::new();
    let (name, passed) = match name {
        "psi_pde" => {
            let r = psi_pde_residual(0.3, schedule, &PdeGridSpec::default())?;
            lines.push("Psi(x, t) for x_corrupt = 0.3".into());
            ("psi_pde", pde_lines(&r, &mut lines))
        }
        "psi_hat_pde" => {
            let r = psi_hat_component_pde_residual(-0.2, 0.0, schedule, &PdeGridSpec::default())?;
            lines.push("Psi_hat component for x0 = -0.2".into());
            ("psi_hat_pde", pde_lines(&r, &mut lines))
        }
        "grad_log_psi" => {
            let xc = Tensor::from_fn(&[8], |i| 0.1 * i as f64 - 0.3)?;
            let mut ok = true;
            for (k, t) in [0.1, 0.5, 0.9].into_iter().enumerate() {
                let err = grad_log_psi_check(&xc, t, schedule, k as u64)?;
                ok &= err <= GRAD_TOL;
                lines.push(format!("  t={t}: max relative error {err:.3e} (tol {GRAD_TOL:e})"));
            }
            ("grad_log_psi", ok)
        }
        "theorem2" => {
            let mut rng = SeededRng::new(2);
            let kept: Vec<usize> = (0..64).filter(|i| i % 3 != 1).collect();
            let mask: Arc<dyn LinearOperator> = Arc::new(Mask::new(&[8, 8], kept)?);
            let down: Arc<dyn LinearOperator> =
                Arc::new(Scaled::new(Arc::new(BlockDownsample::new(&[8, 8], 2)?), 0.5)?);
            let mut ok = true;
            for (label, op) in [("mask", &mask), ("scaled block downsample", &down)] {
                for k in [0.1, 1.0, 10.0] {
                    let x = Tensor::gaussian(op.shape_in(), &mut rng)?;
                    let y = Tensor::gaussian(op.shape_out(), &mut rng)?;
                    let r = theorem2_check(op.as_ref(), k, &x, &y)?;
                    ok &= r.discrepancy <= THEOREM2_TOL;
                    lines.push(format!(
                        "  {label}, k={k}: alpha0={:.6} alpha={:.6} relative discrepancy {:.3e}",
                        r.alpha0, r.alpha, r.discrepancy
                    ));
                }
            }
            let blur = GaussianBlur::new(&[8, 8], 1.0)?;
            let x = Tensor::gaussian(&[8, 8], &mut rng)?;
            let y = Tensor::gaussian(&[8, 8], &mut rng)?;
            match theorem2_check(&blur, 1.0, &x, &y) {
                Err(Error::Precondition(m)) => lines.push(format!("  gaussian blur rejected: {m}")),
                Err(e) => return Err(e),
                Ok(_) => {
                    ok = false;
                    lines.push("  gaussian blur was NOT rejected".into());
                }
            }
            ("theorem2", ok)
        }
        "equivalence" => {
            let mut ok = true;
            for i in 0..10u64 {
                let dim = 16 + (i as usize * 48) / 9;
                let r = formulation_equivalence_check(dim, schedule, i)?;
                ok &= r.worst() <= EQUIVALENCE_TOL;
                lines.push(format!(
                    "  d={dim} n={} k_y={:.4} k_e={:.4}: dense {:.3e}, cg {:.3e}",
                    r.step, r.k_y, r.k_e, r.dense_discrepancy, r.cg_discrepancy
                ));
            }
            ("equivalence", ok)
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown check `{other}`; available: {}",
                CHECK_NAMES.join(", ")
            )))
        }
    };
    Ok(CheckOutcome { name, lines, passed })
}
