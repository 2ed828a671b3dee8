use super::LinearOperator;
use crate::error::Result;
use crate::tensor::{dot, norm2, SeededRng, Tensor};

pub const PARTIAL_ISOMETRY_PROBES: usize = 32;
const PROBE_SEED: u64 = 0x7a11_0b5e;

/// Worst relative defect `|<Ax, y> - <x, A^T y>| / (|Ax| |y|)` over random pairs.
pub fn adjoint_mismatch(op: &dyn LinearOperator, pairs: usize, rng: &mut SeededRng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let x = Tensor::gaussian(op.shape_in(), rng)?;
        let y = Tensor::gaussian(op.shape_out(), rng)?;
        let ax = op.apply(&x)?;
        let aty = op.adjoint(&y)?;
        let lhs = dot(&ax, &y)?;
        let rhs = dot(&x, &aty)?;
        let scale = (norm2(&ax) * norm2(&y)).max(norm2(&x) * norm2(&aty));
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    Ok(worst)
}

/// Estimates `alpha0` with `A = alpha0 * A A^T A` from random probes.
///
/// `alpha0` is the least-squares fit of `Ax ~ alpha0 * A A^T A x` over all
/// probes; it is returned only if every probe then satisfies
/// `|Ax - alpha0 A A^T A x| <= tolerance * |Ax|`.
pub fn partial_isometry_check(op: &dyn LinearOperator, tolerance: f64) -> Result<Option<f64>> {
    let mut rng = SeededRng::new(PROBE_SEED);
    let mut probes = Vec::with_capacity(PARTIAL_ISOMETRY_PROBES);
    let (mut num, mut den) = (0.0, 0.0);
    for _ in 0..PARTIAL_ISOMETRY_PROBES {
        let x = Tensor::gaussian(op.shape_in(), &mut rng)?;
        let ax = op.apply(&x)?;
        let w = op.apply(&op.adjoint(&ax)?)?;
        num += dot(&ax, &w)?;
        den += dot(&w, &w)?;
        probes.push((ax, w));
    }
    if den <= 0.0 || num <= 0.0 {
        return Ok(None);
    }
    let alpha0 = num / den;
    for (ax, w) in &probes {
        let mut r = ax.clone();
        r.add_scaled(-alpha0, w)?;
        if norm2(&r) > tolerance * norm2(ax) {
            return Ok(None);
        }
    }
    Ok(Some(alpha0))
}
