//! Levenberg–Marquardt nonlinear least squares with a finite-difference
//! Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative change of the objective below which the fit is converged.
    pub ftol: f64,
    /// Relative parameter step below which the fit is converged.
    pub xtol: f64,
    /// Relative finite-difference step.
    pub diff_step: f64,
    pub initial_lambda: f64,
    /// Multiply the covariance by χ²/(n − p).
    pub scale_covariance: bool,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            ftol: 1e-10,
            xtol: 1e-10,
            diff_step: 1e-6,
            initial_lambda: 1e-3,
            scale_covariance: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LmResult {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Σ r².
    pub chi2: f64,
    pub covariance: DMatrix<f64>,
    pub iterations: usize,
}

impl LmResult {
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.params.len()).map(|i| self.covariance[(i, i)].max(0.0).sqrt()).collect()
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Central-difference Jacobian of `f` at `p`.
pub fn jacobian<F>(f: &F, p: &[f64], rel_step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let base = f(p)?;
    let m = base.len();
    let n = p.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut q = p.to_vec();
    for j in 0..n {
        let h = rel_step * p[j].abs().max(1.0);
        q[j] = p[j] + h;
        let up = f(&q)?;
        q[j] = p[j] - h;
        let dn = f(&q)?;
        q[j] = p[j];
        for i in 0..m {
            jac[(i, j)] = (up[i] - dn[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Minimize Σ f(p)². `f` returns already-weighted residuals.
pub fn levenberg_marquardt<F>(f: F, p0: &[f64], opts: &LmOptions) -> Result<LmResult>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = p0.len();
    let mut p = p0.to_vec();
    let mut r = f(&p)?;
    let m = r.len();
    if m < n {
        return Err(Error::Underdetermined { needed: n, got: m });
    }
    let mut cost = sum_sq(&r);
    let mut lambda = opts.initial_lambda;
    let mut converged = cost == 0.0;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let jac = jacobian(&f, &p, opts.diff_step)?;
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &rv;
        let diag: Vec<f64> = (0..n).map(|i| jtj[(i, i)].max(1e-300)).collect();

        let mut improved = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * diag[i];
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let tr = match f(&trial) {
                Ok(v) => v,
                Err(_) => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let tc = sum_sq(&tr);
            if tc.is_finite() && tc <= cost {
                let rel_f = (cost - tc) / cost.max(f64::MIN_POSITIVE);
                let rel_x = step
                    .iter()
                    .zip(p.iter())
                    .map(|(s, x)| s.abs() / (x.abs() + opts.xtol))
                    .fold(0.0, f64::max);
                p = trial;
                r = tr;
                cost = tc;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                if rel_f < opts.ftol || rel_x < opts.xtol || cost == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                break;
            }
        }
        if !improved {
            // no downhill step exists at machine precision: stationary point
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            reason: format!("objective {cost:.6e} still decreasing; last iterate {p:?}"),
        });
    }

    let jac = jacobian(&f, &p, opts.diff_step)?;
    let jtj = jac.transpose() * &jac;
    let inv = checked_inverse(&jtj)?;
    let dof = (m - n).max(1) as f64;
    let covariance = if opts.scale_covariance && m > n { inv * (cost / dof) } else { inv };
    Ok(LmResult { params: p, residuals: r, chi2: cost, covariance, iterations })
}

/// Inverse of a normal matrix, rejecting (near-)singular directions after
/// unit-diagonal scaling.
fn checked_inverse(jtj: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = jtj.nrows();
    let mut d = Vec::with_capacity(n);
    for i in 0..n {
        let v = jtj[(i, i)];
        if !(v > 0.0) {
            return Err(Error::Unidentifiable(format!("parameter {i} does not affect the residuals")));
        }
        d.push(1.0 / v.sqrt());
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| jtj[(i, j)] * d[i] * d[j]);
    let eig = scaled.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < 1e-12 {
        return Err(Error::Unidentifiable(format!("normal matrix singular (scaled eigenvalue {min:.2e})")));
    }
    let inv = scaled.try_inverse().ok_or_else(|| Error::Unidentifiable("singular normal matrix".into()))?;
    Ok(DMatrix::from_fn(n, n, |i, j| inv[(i, j)] * d[i] * d[j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_matches_normal_equations() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 * x - 2.0 + 0.1 * (x * 7.0).sin()).collect();
        let f = |p: &[f64]| Ok(xs.iter().zip(&ys).map(|(x, y)| p[0] * x + p[1] - y).collect());
        let res = levenberg_marquardt(f, &[0.0, 0.0], &LmOptions::default()).unwrap();
        let a = DMatrix::from_fn(xs.len(), 2, |i, j| if j == 0 { xs[i] } else { 1.0 });
        let b = DVector::from_column_slice(&ys);
        let exact = (a.transpose() * &a).try_inverse().unwrap() * a.transpose() * b;
        assert!((res.params[0] - exact[0]).abs() < 1e-8);
        assert!((res.params[1] - exact[1]).abs() < 1e-8);
    }

    #[test]
    fn rosenbrock_minimum() {
        let f = |p: &[f64]| Ok(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]]);
        let res = levenberg_marquardt(f, &[-1.2, 1.0], &LmOptions::default()).unwrap();
        assert!((res.params[0] - 1.0).abs() < 1e-6);
        assert!((res.params[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn underdetermined_rejected() {
        let f = |p: &[f64]| Ok(vec![p[0] + p[1]]);
        assert!(matches!(
            levenberg_marquardt(f, &[0.0, 0.0], &LmOptions::default()),
            Err(Error::Underdetermined { .. })
        ));
    }

    #[test]
    fn degenerate_direction_is_unidentifiable() {
        let f = |p: &[f64]| Ok(vec![p[0] + p[1] - 1.0, 2.0 * (p[0] + p[1]) - 2.0, 3.0 * (p[0] + p[1]) - 3.0]);
        assert!(matches!(
            levenberg_marquardt(f, &[0.0, 0.0], &LmOptions::default()),
            Err(Error::Unidentifiable(_))
        ));
    }
}
