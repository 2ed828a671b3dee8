use crate::error::{Error, Result};
use crate::tensor::{dot, norm2, Tensor};

pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug)]
pub struct CgOptions {
    pub max_iters: usize,
    /// Stop once `|b - M x| / |b|` drops to this.
    pub residual_tol: f64,
    /// Probe `<Mu, v> = <u, Mv>` before iterating.
    pub check_symmetry: bool,
}

impl CgOptions {
    pub fn new(max_iters: usize) -> Self {
        Self {
            max_iters,
            residual_tol: DEFAULT_RESIDUAL_TOL,
            check_symmetry: false,
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.residual_tol = tol;
        self
    }

    pub fn with_symmetry_check(mut self) -> Self {
        self.check_symmetry = true;
        self
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub solution: Tensor,
    pub iterations: usize,
    /// Relative residual of the returned iterate.
    pub residual: f64,
    /// Relative residual after each iteration, starting with the initial guess.
    pub history: Vec<f64>,
}

/// Plain (unpreconditioned) conjugate gradients for `M x = b` from `x0`.
///
/// Runs at most `max_iters` iterations and returns the last iterate. A
/// non-positive curvature `<d, M d>` aborts with
/// [`Error::OperatorContract`] naming the iterate.
pub fn cg_solve<F>(op: F, rhs: &Tensor, x0: &Tensor, opts: &CgOptions) -> Result<CgOutcome>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    if opts.max_iters == 0 {
        return Err(Error::invalid("CG needs at least one iteration"));
    }
    rhs.check_same_shape(x0)?;
    let b_norm = norm2(rhs);
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };

    let mut x = x0.clone();
    let mx = op(&x)?;
    mx.check_same_shape(rhs)?;
    let mut r = rhs.sub(&mx)?;
    let mut rr = dot(&r, &r)?;
    let mut history = vec![rr.sqrt() / scale];

    if opts.check_symmetry {
        check_symmetry(&op, &r)?;
    }

    if rr.sqrt() / scale <= opts.residual_tol {
        return Ok(CgOutcome {
            solution: x,
            iterations: 0,
            residual: history[0],
            history,
        });
    }

    let mut d = r.clone();
    let mut iterations = 0;
    for k in 0..opts.max_iters {
        let q = op(&d)?;
        let curvature = dot(&d, &q)?;
        if !(curvature > 0.0) || !curvature.is_finite() {
            return Err(Error::OperatorContract {
                iterate: k,
                reason: format!("<d, M d> = {curvature:e} is not positive"),
            });
        }
        let step = rr / curvature;
        x.add_scaled(step, &d)?;
        r.add_scaled(-step, &q)?;
        let rr_next = dot(&r, &r)?;
        iterations = k + 1;
        history.push(rr_next.sqrt() / scale);
        if rr_next.sqrt() / scale <= opts.residual_tol {
            break;
        }
        let beta = rr_next / rr;
        rr = rr_next;
        d = d.scale(beta);
        d.add_scaled(1.0, &r)?;
    }
    Ok(CgOutcome {
        residual: *history.last().unwrap_or(&0.0),
        solution: x,
        iterations,
        history,
    })
}

fn check_symmetry<F>(op: &F, r: &Tensor) -> Result<()>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let u = Tensor::from_fn(r.shape(), |i| ((i as f64 + 1.0) * 0.7548776662).fract() - 0.5)?;
    let v = Tensor::from_fn(r.shape(), |i| ((i as f64 + 1.0) * 0.5698402910).fract() - 0.5)?;
    let mu = op(&u)?;
    let mv = op(&v)?;
    let lhs = dot(&mu, &v)?;
    let rhs = dot(&u, &mv)?;
    let scale = (norm2(&mu) * norm2(&v)).max(norm2(&u) * norm2(&mv));
    if (lhs - rhs).abs() > 1e-8 * scale {
        return Err(Error::OperatorContract {
            iterate: 0,
            reason: format!("operator is not symmetric: <Mu,v>={lhs:e}, <u,Mv>={rhs:e}"),
        });
    }
    Ok(())
}
