use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::linop::{partial_isometry_check, LinearOperator};
use crate::samplers::cddb_update;
use crate::tensor::{norm2, Tensor};

const MAX_UNKNOWNS: usize = 256;
const ISOMETRY_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Theorem2Report {
    pub alpha0: f64,
    pub alpha: f64,
    pub cddb: Tensor,
    pub minimizer: Tensor,
    /// `|cddb - minimizer| / |minimizer|`.
    pub discrepancy: f64,
}

/// Compares the CDDB step with `alpha = alpha0 k / (alpha0 + k)` against the
/// dense minimizer of `|X - x0_hat|^2 + k |A X - y|^2`.
///
/// `A` must satisfy `A = alpha0 A A^T A` and have full row rank; whichever
/// fails first is named in the returned precondition error.
pub fn theorem2_check(a: &dyn LinearOperator, k: f64, x0_hat: &Tensor, y: &Tensor) -> Result<Theorem2Report> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!("k must be positive and finite, got {k}")));
    }
    let n = a.dim_in();
    if n > MAX_UNKNOWNS {
        return Err(Error::invalid(format!("dense check limited to {MAX_UNKNOWNS} unknowns, got {n}")));
    }
    x0_hat.check_shape(a.shape_in())?;
    y.check_shape(a.shape_out())?;

    let alpha0 = partial_isometry_check(a, ISOMETRY_TOL)?.ok_or_else(|| {
        Error::Precondition("A is not a scaled partial isometry (no alpha0 with A = alpha0 A A^T A)".into())
    })?;
    let dense = DenseMatrix::from_operator(a)?;
    let gram_rows = dense.matmul(&dense.transpose())?;
    if gram_rows.cholesky(RANK_TOL).is_none() {
        return Err(Error::Precondition("A does not have full row rank (A A^T is singular)".into()));
    }

    let alpha = alpha0 * k / (alpha0 + k);
    let cddb = cddb_update(x0_hat, y, a, alpha)?;

    let normal = DenseMatrix::identity(n).add_scaled(k, &dense.transpose().matmul(&dense)?)?;
    let mut rhs = vec![0.0; n];
    dense.matvec_transpose_into(y.as_slice(), &mut rhs);
    for (r, x) in rhs.iter_mut().zip(x0_hat.as_slice()) {
        *r = x + k * *r;
    }
    let minimizer = Tensor::new(a.shape_in().to_vec(), normal.cholesky_solve(&rhs)?)?;
    let scale = norm2(&minimizer);
    let diff = norm2(&cddb.sub(&minimizer)?);
    let discrepancy = if scale > 0.0 { diff / scale } else { diff };
    Ok(Theorem2Report {
        alpha0,
        alpha,
        cddb,
        minimizer,
        discrepancy,
    })
}
