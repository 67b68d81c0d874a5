//! Stationary smoothers and spectral estimation for multigrid.

use super::{CsrMatrix, dot, norm2};
use crate::{Error, Result};

/// Multiplier applied to the raw largest-eigenvalue estimate before it is
/// handed to Chebyshev smoothing; an underestimated upper bound can make
/// the smoothed operator indefinite.
pub const LAMBDA_SAFETY_FACTOR: f64 = 1.1;

/// Ratio between the upper Chebyshev bound and the lower edge of the
/// smoothing band [lambda_max / ratio, lambda_max].
pub const CHEBYSHEV_EIG_RATIO: f64 = 30.0;

fn checked_inv_diag(a: &CsrMatrix) -> Result<Vec<f64>> {
    a.diagonal()
        .into_iter()
        .enumerate()
        .map(|(i, d)| if d == 0.0 { Err(Error::ZeroDiagonal(i)) } else { Ok(1.0 / d) })
        .collect()
}

/// Damped Jacobi: x += omega D^{-1} (b - Ax), `sweeps` times with
/// omega = 1.
pub fn jacobi_smoother(a: &CsrMatrix, x: &mut [f64], b: &[f64], sweeps: usize) -> Result<()> {
    let inv_diag = checked_inv_diag(a)?;
    let mut r = vec![0.0; b.len()];
    for _ in 0..sweeps {
        a.spmv_into(x, &mut r);
        for ((xi, (&ri, &bi)), &di) in x.iter_mut().zip(r.iter().zip(b)).zip(&inv_diag) {
            *xi += (bi - ri) * di;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDirection {
    Forward,
    Backward,
}

/// One in-place Gauss-Seidel sweep in the given direction.
pub fn gauss_seidel_sweep(
    a: &CsrMatrix,
    x: &mut [f64],
    b: &[f64],
    direction: SweepDirection,
) -> Result<()> {
    let n = a.n_rows();
    let rows: Box<dyn Iterator<Item = usize>> = match direction {
        SweepDirection::Forward => Box::new(0..n),
        SweepDirection::Backward => Box::new((0..n).rev()),
    };
    for i in rows {
        let (cols, vals) = a.row(i);
        let mut diag = 0.0;
        let mut acc = b[i];
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                diag = v;
            } else {
                acc -= v * x[j];
            }
        }
        if diag == 0.0 {
            return Err(Error::ZeroDiagonal(i));
        }
        x[i] = acc / diag;
    }
    Ok(())
}

/// `sweeps` forward Gauss-Seidel sweeps.
pub fn gauss_seidel_smoother(a: &CsrMatrix, x: &mut [f64], b: &[f64], sweeps: usize) -> Result<()> {
    for _ in 0..sweeps {
        gauss_seidel_sweep(a, x, b, SweepDirection::Forward)?;
    }
    Ok(())
}

/// Chebyshev polynomial smoother on the diagonally scaled operator,
/// damping the band [lambda_max / eig_ratio, lambda_max].
///
/// Degree 0 degenerates to a single Richardson step x += (b - Ax) /
/// lambda_max without diagonal scaling.
#[derive(Debug, Clone)]
pub struct ChebyshevSmoother {
    inv_diag: Vec<f64>,
    lambda_max: f64,
    lambda_min: f64,
    degree: usize,
}

impl ChebyshevSmoother {
    /// `lambda_max` must bound the spectrum of D^{-1}A from above (use
    /// [`estimate_lambda_max`], which bakes in a safety factor).
    pub fn new(a: &CsrMatrix, lambda_max: f64, eig_ratio: f64, degree: usize) -> Result<Self> {
        if !(lambda_max > 0.0) {
            return Err(Error::NonPositiveEigenEstimate(lambda_max));
        }
        if !(eig_ratio >= 1.0) {
            return Err(Error::InvalidConfig(format!("eigenvalue ratio {eig_ratio} must be >= 1")));
        }
        Ok(ChebyshevSmoother {
            inv_diag: checked_inv_diag(a)?,
            lambda_max,
            lambda_min: lambda_max / eig_ratio,
            degree,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Runs the smoother in place: `degree` operator applications of the
    /// three-term Chebyshev recurrence.
    pub fn apply(&self, a: &CsrMatrix, x: &mut [f64], b: &[f64]) {
        let n = x.len();
        let mut r = vec![0.0; n];
        a.spmv_into(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }

        if self.degree == 0 {
            let step = 1.0 / self.lambda_max;
            for (xi, ri) in x.iter_mut().zip(&r) {
                *xi += step * ri;
            }
            return;
        }

        let theta = 0.5 * (self.lambda_max + self.lambda_min);
        let delta = 0.5 * (self.lambda_max - self.lambda_min);
        let sigma = theta / delta;
        let mut rho_old = 1.0 / sigma;

        let mut z: Vec<f64> = r.iter().zip(&self.inv_diag).map(|(ri, di)| ri * di).collect();
        let mut d: Vec<f64> = z.iter().map(|zi| zi / theta).collect();
        let mut ad = vec![0.0; n];

        for k in 1..=self.degree {
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += di;
            }
            if k == self.degree {
                break;
            }
            a.spmv_into(&d, &mut ad);
            for (ri, adi) in r.iter_mut().zip(&ad) {
                *ri -= adi;
            }
            for ((zi, ri), inv) in z.iter_mut().zip(&r).zip(&self.inv_diag) {
                *zi = ri * inv;
            }
            let rho = 1.0 / (2.0 * sigma - rho_old);
            for (di, zi) in d.iter_mut().zip(&z) {
                *di = rho * rho_old * *di + (2.0 * rho / delta) * zi;
            }
            rho_old = rho;
        }
    }
}

/// Free-function form of the Chebyshev smoother.
pub fn chebyshev_smoother(
    a: &CsrMatrix,
    lambda_max: f64,
    degree: usize,
    x: &mut [f64],
    b: &[f64],
) -> Result<()> {
    ChebyshevSmoother::new(a, lambda_max, CHEBYSHEV_EIG_RATIO, degree).map(|s| s.apply(a, x, b))
}

/// Largest eigenvalue of D^{-1}A (or of A when `scale_by_diagonal` is
/// false) estimated by Lanczos iteration, multiplied by
/// [`LAMBDA_SAFETY_FACTOR`].
///
/// The start vector is a fixed pseudo-random sequence, so the estimate is
/// deterministic.
pub fn estimate_lambda_max(a: &CsrMatrix, scale_by_diagonal: bool, iters: usize) -> Result<f64> {
    let n = a.n_rows();
    if n == 0 || iters == 0 {
        return Err(Error::NonPositiveEigenEstimate(0.0));
    }
    // Work with the symmetric similarity D^{-1/2} A D^{-1/2}, which shares
    // its spectrum with D^{-1}A.
    let inv_sqrt_diag: Option<Vec<f64>> = if scale_by_diagonal {
        Some(
            a.diagonal()
                .into_iter()
                .enumerate()
                .map(|(i, d)| {
                    if d <= 0.0 {
                        Err(Error::ZeroDiagonal(i))
                    } else {
                        Ok(1.0 / d.sqrt())
                    }
                })
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };
    let op = |x: &[f64], y: &mut [f64], tmp: &mut Vec<f64>| {
        match &inv_sqrt_diag {
            Some(s) => {
                tmp.clear();
                tmp.extend(x.iter().zip(s).map(|(xi, si)| xi * si));
                a.spmv_into(tmp, y);
                for (yi, si) in y.iter_mut().zip(s) {
                    *yi *= si;
                }
            }
            None => a.spmv_into(x, y),
        }
    };

    let mut v = pseudo_random_unit(n);
    let mut v_prev = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut tmp = Vec::with_capacity(n);
    let mut alphas = Vec::with_capacity(iters);
    let mut betas = Vec::with_capacity(iters);
    let mut beta = 0.0;

    for _ in 0..iters.min(n) {
        op(&v, &mut w, &mut tmp);
        let alpha = dot(&v, &w);
        alphas.push(alpha);
        for ((wi, vi), pi) in w.iter_mut().zip(&v).zip(&v_prev) {
            *wi -= alpha * vi + beta * pi;
        }
        beta = norm2(&w);
        if beta < 1e-14 {
            break;
        }
        betas.push(beta);
        std::mem::swap(&mut v_prev, &mut v);
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / beta;
        }
    }
    betas.truncate(alphas.len().saturating_sub(1));

    let raw = tridiagonal_lambda_max(&alphas, &betas);
    if !(raw > 0.0) {
        return Err(Error::NonPositiveEigenEstimate(raw));
    }
    Ok(raw * LAMBDA_SAFETY_FACTOR)
}

fn pseudo_random_unit(n: usize) -> Vec<f64> {
    let mut state = 0x9E3779B97F4A7C15u64;
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            // splitmix64 step
            state = state.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z ^= z >> 31;
            (z as f64 / u64::MAX as f64) - 0.5
        })
        .collect();
    let nrm = norm2(&v);
    for vi in &mut v {
        *vi /= nrm;
    }
    v
}

/// Largest eigenvalue of a symmetric tridiagonal matrix by Sturm-count
/// bisection.
fn tridiagonal_lambda_max(alphas: &[f64], betas: &[f64]) -> f64 {
    let m = alphas.len();
    if m == 0 {
        return 0.0;
    }
    if m == 1 {
        return alphas[0];
    }
    // Gershgorin bounds.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let r = if i > 0 { betas[i - 1].abs() } else { 0.0 }
            + if i < m - 1 { betas[i].abs() } else { 0.0 };
        lo = lo.min(alphas[i] - r);
        hi = hi.max(alphas[i] + r);
    }
    // Count of eigenvalues below x via the Sturm sequence.
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut d = alphas[0] - x;
        if d < 0.0 {
            count += 1;
        }
        for i in 1..m {
            let off = betas[i - 1] * betas[i - 1];
            let denom = if d.abs() < 1e-300 { 1e-300_f64.copysign(d) } else { d };
            d = alphas[i] - x - off / denom;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let (mut lo, mut hi) = (lo, hi + 1e-12 * hi.abs().max(1.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(mid) == m {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}
