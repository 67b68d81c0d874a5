//! Preconditioned conjugate gradient and BiCGSTAB.
//!
//! Both solvers measure convergence by the norm of the preconditioned
//! residual relative to the preconditioned initial residual. Breakdown and
//! stagnation come back in the [`SolveReport`] so callers can retry with a
//! different method; `Err` is reserved for malformed inputs.

use super::{axpy, dot, norm2, CsrMatrix, Preconditioner, SolveReport};
use crate::{Error, Result};

/// Inner products at or below this magnitude count as breakdown.
pub const BREAKDOWN_EPS: f64 = 1e-30;

fn check_dims(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.n_rows(), got: a.n_cols() });
    }
    if b.len() != a.n_rows() {
        return Err(Error::DimensionMismatch { expected: a.n_rows(), got: b.len() });
    }
    if let Some(x0) = x0 {
        if x0.len() != a.n_rows() {
            return Err(Error::DimensionMismatch { expected: a.n_rows(), got: x0.len() });
        }
    }
    Ok(())
}

fn final_report(iterations: usize, rel: f64, rtol: f64, reason: Option<String>) -> SolveReport {
    SolveReport {
        iterations,
        relative_residual: rel,
        converged: reason.is_none() && rel <= rtol,
        breakdown_reason: reason,
    }
}

/// Conjugate gradient for symmetric positive-definite systems.
///
/// Indefiniteness of the operator (p·Ap ≤ 0) or of the preconditioner
/// (z·r ≤ 0) is reported as a breakdown, not an error.
pub fn cg(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    pc: &dyn Preconditioner,
    rtol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    check_dims(a, b, x0)?;
    let n = a.n_rows();
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);

    let mut r = b.to_vec();
    if x0.is_some() {
        let ax = a.spmv(&x);
        for (ri, ai) in r.iter_mut().zip(&ax) {
            *ri -= ai;
        }
    }
    let mut z = pc.apply(&r);
    let z0_norm = norm2(&z);
    if z0_norm == 0.0 {
        return Ok((x, final_report(0, 0.0, rtol, None)));
    }

    let mut rho = dot(&r, &z);
    if rho <= 0.0 {
        let reason = format!("nonpositive preconditioned inner product z.r = {rho:e}");
        return Ok((x, final_report(0, 1.0, rtol, Some(reason))));
    }
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rel = 1.0;

    for k in 1..=max_iter {
        a.spmv_into(&p, &mut q);
        let pq = dot(&p, &q);
        if pq.abs() < BREAKDOWN_EPS || pq < 0.0 {
            let reason = format!("indefinite operator: p.Ap = {pq:e} at iteration {k}");
            return Ok((x, final_report(k, rel, rtol, Some(reason))));
        }
        let alpha = rho / pq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);

        pc.apply_to(&r, &mut z);
        rel = norm2(&z) / z0_norm;
        if rel <= rtol {
            return Ok((x, final_report(k, rel, rtol, None)));
        }

        let rho_next = dot(&r, &z);
        if rho_next <= 0.0 {
            let reason =
                format!("nonpositive preconditioned inner product z.r = {rho_next:e} at iteration {k}");
            return Ok((x, final_report(k, rel, rtol, Some(reason))));
        }
        let beta = rho_next / rho;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        rho = rho_next;
    }
    Ok((x, final_report(max_iter, rel, rtol, None)))
}

/// BiCGSTAB for general nonsingular systems.
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    pc: &dyn Preconditioner,
    rtol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    check_dims(a, b, x0)?;
    let n = a.n_rows();
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);

    let mut r = b.to_vec();
    if x0.is_some() {
        let ax = a.spmv(&x);
        for (ri, ai) in r.iter_mut().zip(&ax) {
            *ri -= ai;
        }
    }
    let z0_norm = norm2(&pc.apply(&r));
    if z0_norm == 0.0 {
        return Ok((x, final_report(0, 0.0, rtol, None)));
    }

    let r_shadow = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut rel = 1.0;

    for k in 1..=max_iter {
        let rho_next = dot(&r_shadow, &r);
        if rho_next.abs() < BREAKDOWN_EPS {
            let reason = format!("rho breakdown: rhat.r = {rho_next:e} at iteration {k}");
            return Ok((x, final_report(k, rel, rtol, Some(reason))));
        }
        let beta = (rho_next / rho) * (alpha / omega);
        rho = rho_next;
        for ((pi, ri), vi) in p.iter_mut().zip(&r).zip(&v) {
            *pi = ri + beta * (*pi - omega * vi);
        }

        let p_hat = pc.apply(&p);
        a.spmv_into(&p_hat, &mut v);
        let denom = dot(&r_shadow, &v);
        if denom.abs() < BREAKDOWN_EPS {
            let reason = format!("alpha breakdown: rhat.Ap = {denom:e} at iteration {k}");
            return Ok((x, final_report(k, rel, rtol, Some(reason))));
        }
        alpha = rho / denom;

        // s = r - alpha v, with an early exit when s alone already meets
        // the tolerance.
        let mut s = r.clone();
        axpy(-alpha, &v, &mut s);
        let s_hat = pc.apply(&s);
        let s_rel = norm2(&s_hat) / z0_norm;
        if s_rel <= rtol {
            axpy(alpha, &p_hat, &mut x);
            return Ok((x, final_report(k, s_rel, rtol, None)));
        }

        let t = a.spmv(&s_hat);
        let tt = dot(&t, &t);
        if tt.abs() < BREAKDOWN_EPS {
            let reason = format!("omega breakdown: t.t = {tt:e} at iteration {k}");
            return Ok((x, final_report(k, s_rel, rtol, Some(reason))));
        }
        omega = dot(&t, &s) / tt;

        axpy(alpha, &p_hat, &mut x);
        axpy(omega, &s_hat, &mut x);
        r = s;
        axpy(-omega, &t, &mut r);

        let z = pc.apply(&r);
        rel = norm2(&z) / z0_norm;
        if rel <= rtol {
            return Ok((x, final_report(k, rel, rtol, None)));
        }
        if omega.abs() < BREAKDOWN_EPS {
            let reason = format!("omega breakdown: omega = {omega:e} at iteration {k}");
            return Ok((x, final_report(k, rel, rtol, Some(reason))));
        }
    }
    Ok((x, final_report(max_iter, rel, rtol, None)))
}
