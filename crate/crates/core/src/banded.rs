//! Direct solvers for symmetric banded matrices.

use crate::error::{Error, Result};
use crate::real::Real;

/// Symmetric matrix with half-bandwidth `p`, stored as the lower band.
#[derive(Debug, Clone)]
pub struct SymBand<T> {
    n: usize,
    p: usize,
    data: Vec<T>,
}

impl<T: Real> SymBand<T> {
    pub fn zeros(n: usize, p: usize) -> Self {
        SymBand { n, p, data: vec![T::zero(); n * (p + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.p
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.p);
        i * (self.p + 1) + (j + self.p - i)
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.p {
            T::zero()
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Sets `(i, j)` and its mirror.
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        assert!(i - j <= self.p, "entry outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add_diag(&mut self, i: usize, v: T) {
        let k = self.idx(i, i);
        self.data[k] += v;
    }

    pub fn mul(&self, x: &[T], y: &mut [T]) {
        for i in 0..self.n {
            let mut s = T::zero();
            let lo = i.saturating_sub(self.p);
            let hi = (i + self.p).min(self.n - 1);
            for j in lo..=hi {
                s += self.get(i, j) * x[j];
            }
            y[i] = s;
        }
    }

    /// Max-row-sum norm.
    pub fn norm_inf(&self) -> T {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.p);
                let hi = (i + self.p).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j).abs()).sum::<T>()
            })
            .fold(T::zero(), T::max)
    }

    /// Lower bound for the smallest eigenvalue by Gershgorin discs.
    pub fn gershgorin_lower(&self) -> T {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.p);
                let hi = (i + self.p).min(self.n - 1);
                let off: T = (lo..=hi).filter(|&j| j != i).map(|j| self.get(i, j).abs()).sum();
                self.get(i, i) - off
            })
            .fold(T::infinity(), T::min)
    }

    pub fn shifted(&self, sigma: T) -> Self {
        let mut s = self.clone();
        for i in 0..self.n {
            s.add_diag(i, -sigma);
        }
        s
    }
}

/// Banded Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct BandCholesky<T> {
    n: usize,
    p: usize,
    l: Vec<T>,
}

impl<T: Real> BandCholesky<T> {
    /// Fails with [`Error::Indefinite`] at the first non-positive pivot, which
    /// certifies that `A` is not positive definite.
    pub fn factor(a: &SymBand<T>) -> Result<Self> {
        let (n, p) = (a.n, a.p);
        let w = p + 1;
        let mut l = a.data.clone();
        for i in 0..n {
            let lo = i.saturating_sub(p);
            for j in lo..=i {
                let mut s = l[i * w + (j + p - i)];
                let klo = lo.max(j.saturating_sub(p));
                for k in klo..j {
                    s -= l[i * w + (k + p - i)] * l[j * w + (k + p - j)];
                }
                if j == i {
                    if !(s > T::zero()) {
                        return Err(Error::Indefinite { pivot: i, value: s.f64() });
                    }
                    l[i * w + p] = s.sqrt();
                } else {
                    l[i * w + (j + p - i)] = s / l[j * w + p];
                }
            }
        }
        Ok(BandCholesky { n, p, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let (n, p, w) = (self.n, self.p, self.p + 1);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(p)..i {
                s -= self.l[i * w + (k + p - i)] * b[k];
            }
            b[i] = s / self.l[i * w + p];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..=(i + p).min(n - 1) {
                s -= self.l[k * w + (i + p - k)] * b[k];
            }
            b[i] = s / self.l[i * w + p];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Banded LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct BandLu<T> {
    n: usize,
    p: usize,
    u: Vec<T>,
    mult: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Real> BandLu<T> {
    pub fn factor(a: &SymBand<T>) -> Result<Self> {
        let (n, p) = (a.n, a.p);
        let w = 3 * p + 1;
        let mut u = vec![T::zero(); n * w];
        for i in 0..n {
            for j in i.saturating_sub(p)..=(i + p).min(n - 1) {
                u[i * w + (j + p - i)] = a.get(i, j);
            }
        }
        let at = |i: usize, j: usize| i * w + (j + p - i);
        let mut mult = vec![T::zero(); n * p.max(1)];
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last = (k + p).min(n - 1);
            let mut r = k;
            let mut best = u[at(k, k)].abs();
            for i in k + 1..=last {
                let v = u[at(i, k)].abs();
                if v > best {
                    best = v;
                    r = i;
                }
            }
            if !(best > T::zero()) {
                return Err(Error::Singular(k));
            }
            piv[k] = r;
            let cmax = (k + 2 * p).min(n - 1);
            if r != k {
                for j in k..=cmax {
                    let (a1, a2) = (at(k, j), at(r, j));
                    u.swap(a1, a2);
                }
            }
            let d = u[at(k, k)];
            for i in k + 1..=last {
                let m = u[at(i, k)] / d;
                mult[k * p + (i - k - 1)] = m;
                u[at(i, k)] = T::zero();
                if m != T::zero() {
                    for j in k + 1..=cmax {
                        let t = u[at(k, j)];
                        u[at(i, j)] -= m * t;
                    }
                }
            }
        }
        Ok(BandLu { n, p, u, mult, piv })
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let (n, p) = (self.n, self.p);
        let w = 3 * p + 1;
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            for i in k + 1..=(k + p).min(n - 1) {
                b[i] -= self.mult[k * p + (i - k - 1)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + 2 * p).min(n - 1) {
                s -= self.u[k * w + (j + p - k)] * b[j];
            }
            b[k] = s / self.u[k * w + p];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
