//! Banded symmetric-definite generalized eigensolver.
//!
//! Solves `K w = λ M w` for a symmetric pentadiagonal stiffness matrix `K`
//! and a positive diagonal mass matrix `M`, returning the lowest eigenpairs.
//! `M^{-1/2} K M^{-1/2}` keeps the bandwidth, so the problem reduces to a
//! standard symmetric pentadiagonal one solved by Sturm-count bisection
//! (inertia of the LDLᵀ factorization) plus banded inverse iteration.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

const KL: usize = 2;
const KU_FILLED: usize = 4; // upper bandwidth after partial pivoting
const W: usize = KL + KU_FILLED + 1; // stored row width, columns i-2 .. i+4

/// Symmetric pentadiagonal matrix: main diagonal and two off-diagonals.
struct Penta {
    d0: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Penta {
    fn n(&self) -> usize {
        self.d0.len()
    }

    /// Number of eigenvalues strictly below `sigma` (Sturm count via the
    /// inertia of the LDLᵀ factorization of `A − σI`, no pivoting; near-zero
    /// pivots are pushed to `−pivmin` as in the LAPACK bisection kernels).
    fn count_below(&self, sigma: f64, pivmin: f64) -> usize {
        let n = self.n();
        let mut a0: Vec<f64> = self.d0.iter().map(|v| v - sigma).collect();
        let mut a1 = self.d1.clone();
        let mut count = 0usize;
        for i in 0..n {
            let mut d = a0[i];
            if d.abs() < pivmin {
                d = -pivmin;
            }
            if d < 0.0 {
                count += 1;
            }
            if i + 1 < n {
                let l1 = a1[i] / d;
                a0[i + 1] -= l1 * a1[i];
                if i + 2 < n {
                    let l2 = self.d2[i] / d;
                    a1[i + 1] -= l1 * self.d2[i];
                    a0[i + 2] -= l2 * self.d2[i];
                }
            }
        }
        count
    }

    /// y = A x
    fn mul(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let mut acc = self.d0[i] * x[i];
            if i >= 1 {
                acc += self.d1[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.d1[i] * x[i + 1];
            }
            if i >= 2 {
                acc += self.d2[i - 2] * x[i - 2];
            }
            if i + 2 < n {
                acc += self.d2[i] * x[i + 2];
            }
            y[i] = acc;
        }
    }
}

/// Banded LU with partial pivoting of `A − σI` for the pentadiagonal `A`.
/// Row `i` stores columns `i−2 .. i+4` (fill from pivoting stays within two
/// extra superdiagonals).
struct BandLu {
    n: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
    mults: Vec<[f64; 2]>,
}

impl BandLu {
    fn idx(i: usize, j: isize) -> Option<usize> {
        let off = j - i as isize + KL as isize;
        if (0..W as isize).contains(&off) {
            Some(i * W + off as usize)
        } else {
            None
        }
    }

    fn factor(a: &Penta, sigma: f64) -> Self {
        let n = a.n();
        let mut data = vec![0.0; n * W];
        for i in 0..n {
            data[Self::idx(i, i as isize).unwrap()] = a.d0[i] - sigma;
            if i + 1 < n {
                data[Self::idx(i, i as isize + 1).unwrap()] = a.d1[i];
                data[Self::idx(i + 1, i as isize).unwrap()] = a.d1[i];
            }
            if i + 2 < n {
                data[Self::idx(i, i as isize + 2).unwrap()] = a.d2[i];
                data[Self::idx(i + 2, i as isize).unwrap()] = a.d2[i];
            }
        }
        let mut pivots = vec![0usize; n];
        let mut mults = vec![[0.0; 2]; n];
        for k in 0..n {
            let last_row = (k + KL).min(n - 1);
            let mut p = k;
            let mut best = data[Self::idx(k, k as isize).unwrap()].abs();
            for r in k + 1..=last_row {
                let v = data[Self::idx(r, k as isize).unwrap()].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            pivots[k] = p;
            let last_col = (k + KU_FILLED).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let ik = Self::idx(k, j as isize).unwrap();
                    let ip = Self::idx(p, j as isize).unwrap();
                    data.swap(ik, ip);
                }
            }
            let mut d = data[Self::idx(k, k as isize).unwrap()];
            if d == 0.0 {
                // Singular pivot (exact shift); nudge to keep the solve finite.
                d = f64::MIN_POSITIVE.max(1e-300);
                data[Self::idx(k, k as isize).unwrap()] = d;
            }
            for r in k + 1..=last_row {
                let l = data[Self::idx(r, k as isize).unwrap()] / d;
                mults[k][r - k - 1] = l;
                for j in k + 1..=last_col {
                    let v = data[Self::idx(k, j as isize).unwrap()];
                    if let Some(ir) = Self::idx(r, j as isize) {
                        data[ir] -= l * v;
                    }
                }
            }
        }
        Self {
            n,
            data,
            pivots,
            mults,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let last_row = (k + KL).min(n - 1);
            for r in k + 1..=last_row {
                b[r] -= self.mults[k][r - k - 1] * b[k];
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            let last_col = (i + KU_FILLED).min(n - 1);
            for j in i + 1..=last_col {
                acc -= self.data[Self::idx(i, j as isize).unwrap()] * b[j];
            }
            b[i] = acc / self.data[Self::idx(i, i as isize).unwrap()];
        }
    }
}

/// Lowest `count` eigenpairs `(λ, w)` of `K w = λ M w`.
///
/// `d0`, `d1`, `d2` are the diagonals of the symmetric pentadiagonal `K`;
/// `m` is the diagonal of `M` (all entries > 0).
pub fn lowest_eigenpairs(
    d0: &[f64],
    d1: &[f64],
    d2: &[f64],
    m: &[f64],
    count: usize,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = d0.len();
    if n < 3 || d1.len() != n - 1 || d2.len() != n - 2 || m.len() != n {
        return Err(Error::InvalidInput("inconsistent band dimensions"));
    }
    if count > n {
        return Err(Error::InvalidInput("more eigenpairs requested than unknowns"));
    }
    if m.iter().any(|v| *v <= 0.0) {
        return Err(Error::InvalidInput("mass matrix must be positive"));
    }

    // B = M^{-1/2} K M^{-1/2}, same bandwidth.
    let inv_sqrt: Vec<f64> = m.iter().map(|v| 1.0 / v.sqrt()).collect();
    let b = Penta {
        d0: (0..n).map(|i| d0[i] * inv_sqrt[i] * inv_sqrt[i]).collect(),
        d1: (0..n - 1).map(|i| d1[i] * inv_sqrt[i] * inv_sqrt[i + 1]).collect(),
        d2: (0..n - 2).map(|i| d2[i] * inv_sqrt[i] * inv_sqrt[i + 2]).collect(),
    };

    // Gershgorin bound and a pivot floor for the Sturm counts.
    let mut hi = 0.0f64;
    let mut norm = 0.0f64;
    for i in 0..n {
        let mut radius = 0.0;
        if i >= 1 {
            radius += b.d1[i - 1].abs();
        }
        if i + 1 < n {
            radius += b.d1[i].abs();
        }
        if i >= 2 {
            radius += b.d2[i - 2].abs();
        }
        if i + 2 < n {
            radius += b.d2[i].abs();
        }
        hi = hi.max(b.d0[i] + radius);
        norm = norm.max(b.d0[i].abs() + radius);
    }
    let pivmin = norm * 1e-300_f64.max(f64::EPSILON * f64::EPSILON);
    let rel_tol = 1e-12;

    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        // λ_k is the (k+1)-th smallest: bisect on the Sturm count.
        let mut lo = 0.0f64;
        let mut up = hi;
        for _ in 0..200 {
            let mid = 0.5 * (lo + up);
            if mid <= lo || mid >= up || (up - lo) <= rel_tol * mid.abs() {
                break;
            }
            if b.count_below(mid, pivmin) > k {
                up = mid;
            } else {
                lo = mid;
            }
        }
        let lambda = 0.5 * (lo + up);
        if !lambda.is_finite() {
            return Err(Error::Convergence("bisection produced a non-finite eigenvalue"));
        }

        // Inverse iteration at a slightly offset shift. The Sturm counts on a
        // pentadiagonal factorization are only good to a few digits of the
        // matrix norm, so the eigenvalue itself is taken from the Rayleigh
        // quotient of the converged vector (accurate to residual²/gap).
        let shift = lambda * (1.0 + 1e-10) + norm * 1e-15;
        let lu = BandLu::factor(&b, shift);
        let mut v: Vec<f64> = (0..n)
            .map(|i| if i % 2 == 0 { 1.0 } else { -0.8 })
            .collect();
        let mut r = vec![0.0; n];
        let mut best_res = f64::INFINITY;
        let mut best_rq = lambda;
        let mut best_v: Vec<f64> = Vec::new();
        for _ in 0..30 {
            lu.solve(&mut v);
            let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !nrm.is_finite() || nrm == 0.0 {
                return Err(Error::Convergence("inverse iteration broke down"));
            }
            for x in v.iter_mut() {
                *x /= nrm;
            }
            b.mul(&v, &mut r);
            let rq: f64 = r.iter().zip(&v).map(|(ri, vi)| ri * vi).sum();
            let res = r
                .iter()
                .zip(&v)
                .map(|(ri, vi)| (ri - rq * vi) * (ri - rq * vi))
                .sum::<f64>()
                .sqrt();
            if res < best_res {
                best_res = res;
                best_rq = rq;
                best_v = v.clone();
            }
            if res <= 1e-13 * norm {
                break;
            }
        }
        if best_res > 1e-10 * norm.max(lambda.abs()) {
            return Err(Error::Convergence("inverse iteration did not reach tolerance"));
        }
        // Back to the generalized problem: w = M^{-1/2} v.
        let w: Vec<f64> = best_v.iter().zip(&inv_sqrt).map(|(vi, s)| vi * s).collect();
        out.push((best_rq, w));
    }
    Ok(out)
}
