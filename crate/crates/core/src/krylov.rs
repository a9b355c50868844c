//! Restarted, right-preconditioned GMRES for the bordered systems.

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy)]
pub struct GmresInfo<T> {
    pub iterations: usize,
    /// Final residual relative to the right-hand side (Euclidean norm).
    pub residual: T,
}

fn norm2<T: Real>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

/// Solves `A x = b` with `x` holding the initial guess. `apply(x, y)` sets
/// `y = A x` and `precond(r, z)` sets `z ≈ A⁻¹ r`. The true residual is
/// recomputed at each restart.
pub fn gmres<T: Real>(
    mut apply: impl FnMut(&[T], &mut [T]),
    mut precond: impl FnMut(&[T], &mut [T]),
    b: &[T],
    x: &mut [T],
    tol: T,
    restart: usize,
    max_iter: usize,
) -> Result<GmresInfo<T>> {
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(GmresInfo { iterations: 0, residual: T::zero() });
    }
    let m = restart.max(1);
    let mut r = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(m + 1);
    let mut hess = vec![vec![T::zero(); m]; m + 1];
    let mut cs = vec![T::zero(); m];
    let mut sn = vec![T::zero(); m];
    let mut g = vec![T::zero(); m + 1];
    let mut total = 0;

    loop {
        apply(x, &mut w);
        for i in 0..n {
            r[i] = b[i] - w[i];
        }
        let beta = norm2(&r);
        let rel = beta / bnorm;
        if rel <= tol {
            return Ok(GmresInfo { iterations: total, residual: rel });
        }
        if total >= max_iter {
            return Err(Error::LinearSolve { iterations: total, residual: rel.f64() });
        }
        basis.clear();
        basis.push(r.iter().map(|&v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = T::zero());
        g[0] = beta;
        let mut k = 0;
        while k < m && total < max_iter {
            precond(&basis[k], &mut z);
            apply(&z, &mut w);
            for (i, q) in basis.iter().enumerate() {
                let hik: T = w.iter().zip(q).map(|(&a, &b)| a * b).sum();
                hess[i][k] = hik;
                for (wj, &qj) in w.iter_mut().zip(q) {
                    *wj -= hik * qj;
                }
            }
            let hn = norm2(&w);
            hess[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * hess[i][k] + sn[i] * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = t;
            }
            let (a, bb) = (hess[k][k], hess[k + 1][k]);
            let d = a.hypot(bb);
            if d == T::zero() {
                cs[k] = T::one();
                sn[k] = T::zero();
            } else {
                cs[k] = a / d;
                sn[k] = bb / d;
            }
            hess[k][k] = d;
            hess[k + 1][k] = T::zero();
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            total += 1;
            k += 1;
            let est = g[k].abs() / bnorm;
            if est <= tol * T::lit(0.5) || hn <= T::epsilon() * beta {
                break;
            }
            basis.push(w.iter().map(|&v| v / hn).collect());
        }
        let mut y = vec![T::zero(); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= hess[i][j] * y[j];
            }
            y[i] = if hess[i][i] != T::zero() { s / hess[i][i] } else { T::zero() };
        }
        let mut upd = vec![T::zero(); n];
        for (j, q) in basis.iter().take(k).enumerate() {
            for (u, &qj) in upd.iter_mut().zip(q) {
                *u += y[j] * qj;
            }
        }
        precond(&upd, &mut z);
        for i in 0..n {
            x[i] += z[i];
        }
        if !rel.is_finite() {
            return Err(Error::LinearSolve { iterations: total, residual: f64::NAN });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_nonsymmetric_tridiagonal() {
        let n = 200;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = 3.0 * x[i] - 1.2 * l - 0.7 * r;
            }
        };
        let b: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
        let mut x = vec![0.0; n];
        let info = gmres(apply, |r, z| z.copy_from_slice(r), &b, &mut x, 1e-12, 30, 2000).unwrap();
        assert!(info.residual <= 1e-12);
        let mut y = vec![0.0; n];
        apply(&x, &mut y);
        let err = y.iter().zip(&b).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn zero_rhs() {
        let mut x = vec![1.0; 3];
        let info = gmres(|a: &[f64], y: &mut [f64]| y.copy_from_slice(a), |r, z| z.copy_from_slice(r), &[0.0; 3], &mut x, 1e-10, 5, 10).unwrap();
        assert_eq!(info.iterations, 0);
        assert_eq!(x, vec![0.0; 3]);
    }
}
