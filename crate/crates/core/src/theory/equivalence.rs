use crate::error::{Error, Result};
use crate::linalg::{cg_solve, CgOptions, DenseMatrix};
use crate::linop::DenseOperator;
use crate::samplers::{extrapolation_target, MesbSystem};
use crate::schedule::{NoiseSchedule, TimeGrid};
use crate::tensor::{SeededRng, Tensor};

#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    pub dim: usize,
    pub step: usize,
    pub sigma_x2: f64,
    pub sigma_y2: f64,
    pub k_e: f64,
    pub k_y: f64,
    /// Dense solve of the posterior form versus dense solve of the
    /// optimization form, relative.
    pub dense_discrepancy: f64,
    /// Matrix-free CG on the optimization form versus the dense posterior
    /// solve, relative.
    pub cg_discrepancy: f64,
}

impl EquivalenceReport {
    pub fn worst(&self) -> f64 {
        self.dense_discrepancy.max(self.cg_discrepancy)
    }
}

fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut SeededRng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| scale * rng.standard_normal()).collect();
    DenseMatrix::from_vec(rows, cols, data).expect("sized")
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// Builds a random instance of size `dim` and solves the MESB update in two
/// parameterizations:
///
/// * posterior form with `Sigma_X^{-1} = (I + T^T T)/sigma_x2`:
///   `M X = x_n - (s_n/s_N) x_c + s_n Sigma_X^{-1} x0_hat + (s_n/sigma_y2) A^T y`,
///   `M = (1 - s_n/s_N) I + s_n Sigma_X^{-1} + (s_n/sigma_y2) A^T A`;
/// * optimization form with `k_y = sigma_x2/sigma_y2` and
///   `k_e = sb_n sigma_x2 / (s_n s_N)`.
pub fn formulation_equivalence_check(
    dim: usize,
    schedule: &NoiseSchedule,
    seed: u64,
) -> Result<EquivalenceReport> {
    if dim < 2 {
        return Err(Error::invalid("equivalence check needs dim >= 2"));
    }
    let mut rng = SeededRng::new(seed);
    let steps = 20;
    let grid = TimeGrid::quadratic(steps)?;
    let step = 1 + rng.index(steps - 1);
    let t = grid.t(step);
    let s_n = schedule.sigma2(t)?;
    let sb_n = schedule.sigma_bar2(t)?;
    let s_end = schedule.sigma2(grid.t(steps))?;

    let sigma_x2 = rng.uniform_range(0.5, 2.0);
    let sigma_y2 = rng.uniform_range(0.05, 1.0);
    let rows = dim / 2;
    let a = random_matrix(rows, dim, 1.0 / (dim as f64).sqrt(), &mut rng);
    let tm = random_matrix(dim, dim, 0.3 / (dim as f64).sqrt(), &mut rng);
    let gram = tm.transpose().matmul(&tm)?;
    let ata = a.transpose().matmul(&a)?;

    let x_n = Tensor::gaussian(&[dim], &mut rng)?;
    let x_c = Tensor::gaussian(&[dim], &mut rng)?;
    let x0_hat = Tensor::gaussian(&[dim], &mut rng)?;
    let y = Tensor::gaussian(&[rows], &mut rng)?;
    let aty = a.transpose().matvec(y.as_slice());

    // posterior form
    let sigma_inv = DenseMatrix::identity(dim).add_scaled(1.0, &gram)?.scaled(1.0 / sigma_x2);
    let m = DenseMatrix::identity(dim)
        .scaled(1.0 - s_n / s_end)
        .add_scaled(s_n, &sigma_inv)?
        .add_scaled(s_n / sigma_y2, &ata)?;
    let prior_term = sigma_inv.matvec(x0_hat.as_slice());
    let rhs: Vec<f64> = (0..dim)
        .map(|i| {
            x_n.as_slice()[i] - (s_n / s_end) * x_c.as_slice()[i]
                + s_n * prior_term[i]
                + (s_n / sigma_y2) * aty[i]
        })
        .collect();
    let posterior = m.cholesky_solve(&rhs)?;

    // optimization form, dense
    let k_y = sigma_x2 / sigma_y2;
    let k_e = sb_n * sigma_x2 / (s_n * s_end);
    let x0_e = extrapolation_target(&x_n, &x_c, step, &grid, schedule)?;
    let m_opt = DenseMatrix::identity(dim)
        .scaled(1.0 + k_e)
        .add_scaled(1.0, &gram)?
        .add_scaled(k_y, &ata)?;
    let gx = gram.matvec(x0_hat.as_slice());
    let rhs_opt: Vec<f64> = (0..dim)
        .map(|i| x0_hat.as_slice()[i] + gx[i] + k_e * x0_e.as_slice()[i] + k_y * aty[i])
        .collect();
    let optimization = m_opt.cholesky_solve(&rhs_opt)?;

    // optimization form, matrix-free CG as the sampler runs it
    let a_op = DenseOperator::new(a);
    let g_op = DenseOperator::new(gram);
    let system = MesbSystem {
        a: &a_op,
        gram: Some(&g_op),
        k_e,
        k_y,
    };
    let b = system.rhs(&x0_hat, &x0_e, &y)?;
    let opts = CgOptions::new(4 * dim).with_tolerance(1e-14);
    let cg = cg_solve(|x: &Tensor| system.apply(x), &b, &x0_hat, &opts)?;

    let dense_discrepancy = rel(&optimization, &posterior);
    let cg_discrepancy = rel(cg.solution.as_slice(), &posterior);
    Ok(EquivalenceReport {
        dim,
        step,
        sigma_x2,
        sigma_y2,
        k_e,
        k_y,
        dense_discrepancy,
        cg_discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_forms_agree() {
        let s = NoiseSchedule::symmetric(1e-4, 0.15).unwrap();
        for (i, dim) in [16, 24, 40, 64].into_iter().enumerate() {
            let r = formulation_equivalence_check(dim, &s, i as u64).unwrap();
            assert!(r.worst() <= 1e-8, "{r:?}");
        }
    }
}
