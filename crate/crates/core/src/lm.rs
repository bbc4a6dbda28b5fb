//! Levenberg–Marquardt nonlinear least squares with parameter covariance.
//!
//! Small dense problems only (a handful of parameters): the convergence-model
//! fit and the per-window Lorentzian fits. Jacobians are forward-difference.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Outcome of a least-squares fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// Best-fit parameters.
    pub params: Vec<f64>,
    /// 1σ parameter uncertainties from the covariance at the optimum.
    pub sigma: Vec<f64>,
    /// Full covariance matrix, row major.
    pub covariance: Vec<Vec<f64>>,
    /// Root-mean-square residual at the optimum.
    pub residual_rms: f64,
    pub iterations: usize,
}

/// Solves `A x = b` in place by Gaussian elimination with partial pivoting.
/// Returns `None` for a numerically singular system.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-300 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let l = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= l * a[k][j];
            }
            b[i] -= l * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in i + 1..n {
            acc -= a[i][j] * x[j];
        }
        x[i] = acc / a[i][i];
    }
    Some(x)
}

/// Inverts a small symmetric matrix by Gauss–Jordan. `None` if singular.
fn invert_dense(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut aug: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a[i].clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| aug[i][k].abs().total_cmp(&aug[j][k].abs()))?;
        if aug[p][k].abs() < 1e-300 {
            return None;
        }
        aug.swap(k, p);
        let d = aug[k][k];
        for v in aug[k].iter_mut() {
            *v /= d;
        }
        for i in 0..n {
            if i == k {
                continue;
            }
            let l = aug[i][k];
            if l == 0.0 {
                continue;
            }
            for j in 0..2 * n {
                aug[i][j] -= l * aug[k][j];
            }
        }
    }
    Some(aug.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Minimizes `½ ‖r(x)‖²` starting from `x0`.
///
/// `residuals(x, out)` fills `out` (length `m`) with the residual vector.
/// Converges when the relative step drops below `step_tol`; errors with
/// [`Error::FitDiverged`] after `max_iter` iterations.
pub fn levenberg_marquardt<F>(
    residuals: F,
    x0: &[f64],
    m: usize,
    max_iter: usize,
    step_tol: f64,
) -> Result<FitResult>
where
    F: Fn(&[f64], &mut [f64]),
{
    let p = x0.len();
    if m < p {
        return Err(Error::InsufficientData { needed: p, got: m });
    }
    let mut x = x0.to_vec();
    let mut r = vec![0.0; m];
    residuals(&x, &mut r);
    let mut ssr: f64 = r.iter().map(|v| v * v).sum();
    if !ssr.is_finite() {
        return Err(Error::InvalidInput("residuals not finite at the start point"));
    }

    let mut lambda = 1e-3;
    let mut jac = vec![vec![0.0; p]; m];
    let mut r_trial = vec![0.0; m];
    let mut iterations = 0;

    let fill_jacobian = |x: &[f64], r: &[f64], jac: &mut Vec<Vec<f64>>| {
        let mut xh = x.to_vec();
        let mut rh = vec![0.0; m];
        for j in 0..p {
            let h = f64::EPSILON.sqrt() * (x[j].abs() + f64::EPSILON.sqrt());
            xh[j] = x[j] + h;
            let h_actual = xh[j] - x[j];
            residuals(&xh, &mut rh);
            for i in 0..m {
                jac[i][j] = (rh[i] - r[i]) / h_actual;
            }
            xh[j] = x[j];
        }
    };

    for iter in 0..max_iter {
        iterations = iter + 1;
        fill_jacobian(&x, &r, &mut jac);
        // Normal equations J'J and J'r.
        let mut jtj = vec![vec![0.0; p]; p];
        let mut jtr = vec![0.0; p];
        for i in 0..m {
            for a in 0..p {
                jtr[a] += jac[i][a] * r[i];
                for b in a..p {
                    jtj[a][b] += jac[i][a] * jac[i][b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                jtj[a][b] = jtj[b][a];
            }
        }

        let mut accepted = false;
        for _ in 0..30 {
            let mut damped = jtj.clone();
            for a in 0..p {
                damped[a][a] += lambda * jtj[a][a].max(1e-300);
            }
            let Some(step) = solve_dense(damped, jtr.clone()) else {
                lambda *= 10.0;
                continue;
            };
            let x_trial: Vec<f64> = x.iter().zip(&step).map(|(xi, si)| xi - si).collect();
            residuals(&x_trial, &mut r_trial);
            let ssr_trial: f64 = r_trial.iter().map(|v| v * v).sum();
            if ssr_trial.is_finite() && ssr_trial <= ssr {
                let step_size: f64 = step
                    .iter()
                    .zip(&x)
                    .map(|(s, xi)| (s / (xi.abs() + 1e-300)).powi(2))
                    .sum::<f64>()
                    .sqrt();
                x = x_trial;
                core::mem::swap(&mut r, &mut r_trial);
                let ssr_drop = ssr - ssr_trial;
                ssr = ssr_trial;
                lambda = (lambda / 3.0).max(1e-14);
                accepted = true;
                if step_size < step_tol || ssr_drop <= 1e-30 * ssr.max(1e-300) {
                    return finish(residuals, x, r, ssr, m, p, iterations);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // Damping saturated: treat the current point as the optimum if the
            // gradient is already negligible, otherwise report divergence.
            let grad: f64 = jtr.iter().map(|v| v * v).sum::<f64>().sqrt();
            if grad <= 1e-12 * (1.0 + ssr) {
                return finish(residuals, x, r, ssr, m, p, iterations);
            }
            return Err(Error::FitDiverged { iterations });
        }
    }
    Err(Error::FitDiverged { iterations })
}

fn finish<F>(
    residuals: F,
    x: Vec<f64>,
    r: Vec<f64>,
    ssr: f64,
    m: usize,
    p: usize,
    iterations: usize,
) -> Result<FitResult>
where
    F: Fn(&[f64], &mut [f64]),
{
    // Covariance = s² (J'J)^{-1} with s² the residual variance.
    let mut jac = vec![vec![0.0; p]; m];
    let mut xh = x.clone();
    let mut rh = vec![0.0; m];
    for j in 0..p {
        let h = f64::EPSILON.sqrt() * (x[j].abs() + f64::EPSILON.sqrt());
        xh[j] = x[j] + h;
        let h_actual = xh[j] - x[j];
        residuals(&xh, &mut rh);
        for i in 0..m {
            jac[i][j] = (rh[i] - r[i]) / h_actual;
        }
        xh[j] = x[j];
    }
    let mut jtj = vec![vec![0.0; p]; p];
    for i in 0..m {
        for a in 0..p {
            for b in a..p {
                jtj[a][b] += jac[i][a] * jac[i][b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            jtj[a][b] = jtj[b][a];
        }
    }
    let s2 = if m > p { ssr / (m - p) as f64 } else { 0.0 };
    let covariance = match invert_dense(&jtj) {
        Some(inv) => inv
            .into_iter()
            .map(|row| row.into_iter().map(|v| v * s2).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        None => vec![vec![f64::INFINITY; p]; p],
    };
    let sigma = (0..p).map(|i| covariance[i][i].max(0.0).sqrt()).collect();
    Ok(FitResult {
        params: x,
        sigma,
        covariance,
        residual_rms: (ssr / m as f64).sqrt(),
        iterations,
    })
}
