//! The discrete Dirichlet Laplacian, linear solves and principal eigenpairs.

use crate::banded::{BandCholesky, BandLu, SymBand};
use crate::error::{Error, Result};
use crate::mesh::{Grid, ScalarField, OUTSIDE};
use crate::quotient::ProblemParams;
use crate::real::Real;

/// `−Δ_h + diag(d)` on a grid.
#[derive(Debug, Clone)]
pub struct DiscreteOperator<'g, T> {
    grid: &'g Grid<T>,
    diag: Option<Vec<T>>,
}

impl<'g, T: Real> DiscreteOperator<'g, T> {
    pub fn laplacian(grid: &'g Grid<T>) -> Self {
        DiscreteOperator { grid, diag: None }
    }

    pub fn with_diagonal(grid: &'g Grid<T>, diag: Vec<T>) -> Result<Self> {
        if diag.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: diag.len() });
        }
        Ok(DiscreteOperator { grid, diag: Some(diag) })
    }

    /// Adds `c·Id`.
    pub fn shifted(&self, c: T) -> Self {
        let diag = match &self.diag {
            Some(d) => d.iter().map(|&x| x + c).collect(),
            None => vec![c; self.grid.len()],
        };
        DiscreteOperator { grid: self.grid, diag: Some(diag) }
    }

    pub fn grid(&self) -> &'g Grid<T> {
        self.grid
    }

    pub fn diagonal(&self) -> Option<&[T]> {
        self.diag.as_deref()
    }

    pub(crate) fn apply_raw(&self, u: &[T], out: &mut [T]) {
        laplacian_raw(self.grid, u, out);
        if let Some(d) = &self.diag {
            for ((o, &di), &ui) in out.iter_mut().zip(d).zip(u) {
                *o += di * ui;
            }
        }
    }

    pub fn apply(&self, u: &ScalarField<T>) -> Result<ScalarField<T>> {
        self.grid.check(u)?;
        let mut out = vec![T::zero(); u.len()];
        self.apply_raw(u.values(), &mut out);
        Ok(self.grid.wrap(out))
    }

    /// Assembled banded matrix.
    pub fn assemble(&self) -> SymBand<T> {
        let g = self.grid;
        let mut a = SymBand::zeros(g.len(), g.bandwidth());
        let ih = g.inv_h2();
        let axes = g.dim();
        for k in 0..g.len() {
            let e = g.neighbors(k);
            let mut d = T::zero();
            for ax in 0..axes {
                d += (T::one() + T::one()) * ih[ax];
                for &m in &e[2 * ax..2 * ax + 2] {
                    if m != OUTSIDE && m < k {
                        a.set(k, m, -ih[ax]);
                    }
                }
            }
            if let Some(dg) = &self.diag {
                d += dg[k];
            }
            a.set(k, k, d);
        }
        a
    }

    pub fn cholesky(&self) -> Result<BandCholesky<T>> {
        BandCholesky::factor(&self.assemble())
    }

    pub fn lu(&self) -> Result<BandLu<T>> {
        BandLu::factor(&self.assemble())
    }
}

pub(crate) fn laplacian_raw<T: Real>(grid: &Grid<T>, u: &[T], out: &mut [T]) {
    let ih = grid.inv_h2();
    let two = T::one() + T::one();
    let axes = grid.dim();
    for k in 0..u.len() {
        let e = grid.neighbors(k);
        let mut s = T::zero();
        for ax in 0..axes {
            let l = if e[2 * ax] == OUTSIDE { T::zero() } else { u[e[2 * ax]] };
            let r = if e[2 * ax + 1] == OUTSIDE { T::zero() } else { u[e[2 * ax + 1]] };
            s += (two * u[k] - l - r) * ih[ax];
        }
        out[k] = s;
    }
}

/// `−Δ_h u` with zero Dirichlet closure.
pub fn apply_laplacian<T: Real>(grid: &Grid<T>, u: &ScalarField<T>) -> Result<ScalarField<T>> {
    DiscreteOperator::laplacian(grid).apply(u)
}

/// Solves `A x = b` for positive definite `A` by banded Cholesky with
/// iterative refinement; the relative residual must reach `tol`.
pub fn solve<T: Real>(a: &DiscreteOperator<'_, T>, b: &ScalarField<T>, tol: T) -> Result<ScalarField<T>> {
    let g = a.grid();
    g.check(b)?;
    let chol = a.cholesky()?;
    let x = refine(a, &chol, b.values(), tol)?;
    Ok(g.wrap(x))
}

pub(crate) fn refine<T: Real>(a: &DiscreteOperator<'_, T>, chol: &BandCholesky<T>, b: &[T], tol: T) -> Result<Vec<T>> {
    let g = a.grid();
    let bn = g.nrm(b);
    let mut x = chol.solve(b);
    if bn == T::zero() {
        return Ok(x);
    }
    let mut r = vec![T::zero(); b.len()];
    let mut rel = T::infinity();
    for it in 0..4 {
        a.apply_raw(&x, &mut r);
        for (ri, &bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        rel = g.nrm(&r) / bn;
        if rel <= tol {
            return Ok(x);
        }
        if it < 3 {
            chol.solve_in_place(&mut r);
            for (xi, &ci) in x.iter_mut().zip(&r) {
                *xi += ci;
            }
        }
    }
    Err(Error::LinearSolve { iterations: 4, residual: rel.f64() })
}

/// An eigenpair `A φ = μ φ` with `‖φ‖ = 1`.
#[derive(Debug, Clone)]
pub struct Eigenpair<T> {
    pub value: T,
    pub vector: ScalarField<T>,
    /// Achieved `‖Aφ − μφ‖`.
    pub residual: T,
    pub iterations: usize,
    /// A shift certified to lie below the spectrum.
    pub lower_shift: T,
}

#[derive(Debug, Clone)]
pub struct EigenOptions<T> {
    /// Starting vector; a positive constant when absent.
    pub guess: Option<Vec<T>>,
    /// Candidate shift below the smallest eigenvalue; verified before use.
    pub shift_hint: Option<T>,
    pub max_iter: Option<usize>,
}

impl<T> Default for EigenOptions<T> {
    fn default() -> Self {
        EigenOptions { guess: None, shift_hint: None, max_iter: None }
    }
}

/// Smallest eigenpair by shifted inverse iteration. The residual target is
/// capped below by the rounding floor `~1e2·ε·‖A‖`; once the residual stalls
/// there the pair is returned with the achieved residual.
pub fn smallest_eigenpair<T: Real>(a: &DiscreteOperator<'_, T>, tol: T) -> Result<Eigenpair<T>> {
    smallest_eigenpair_with(a, tol, &EigenOptions::default())
}

pub fn smallest_eigenpair_with<T: Real>(
    a: &DiscreteOperator<'_, T>,
    tol: T,
    opts: &EigenOptions<T>,
) -> Result<Eigenpair<T>> {
    let g = a.grid();
    let n = g.len();
    let band = a.assemble();
    let anorm = band.norm_inf();
    let floor = T::lit(100.0) * T::epsilon() * anorm;
    let max_iter = opts.max_iter.unwrap_or(500);

    let mut sigma = band.gershgorin_lower() - T::lit(1e-8) * anorm;
    let mut chol = None;
    if let Some(hint) = opts.shift_hint {
        if hint > sigma {
            if let Ok(c) = BandCholesky::factor(&band.shifted(hint)) {
                sigma = hint;
                chol = Some(c);
            }
        }
    }
    let mut chol = match chol {
        Some(c) => c,
        None => {
            let mut tries = 0;
            loop {
                match BandCholesky::factor(&band.shifted(sigma)) {
                    Ok(c) => break c,
                    Err(_) if tries < 60 => {
                        sigma = sigma - (sigma.abs() + anorm * T::lit(1e-6));
                        tries += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    };

    let mut x: Vec<T> = match &opts.guess {
        Some(v) if v.len() == n => v.clone(),
        _ => vec![T::one(); n],
    };
    let xn = g.nrm(&x);
    if !(xn > T::zero()) {
        x = vec![T::one(); n];
    }
    let xn = g.nrm(&x);
    x.iter_mut().for_each(|v| *v /= xn);

    let mut ax = vec![T::zero(); n];
    let mut history: Vec<T> = Vec::new();
    for it in 1..=max_iter {
        chol.solve_in_place(&mut x);
        let xn = g.nrm(&x);
        if !(xn.is_finite() && xn > T::zero()) {
            return Err(Error::Eigen { iterations: it, residual: f64::NAN });
        }
        x.iter_mut().for_each(|v| *v /= xn);
        band.mul(&x, &mut ax);
        let rho = g.dot(&ax, &x);
        let r = residual_norm(g, &ax, &x, rho);
        history.push(r);
        let stalled = r <= floor && history.len() >= 4 && {
            let k = history.len();
            r > history[k - 4] * T::lit(0.5)
        };
        if r <= tol || stalled || r == T::zero() {
            fix_sign(&mut x);
            return Ok(Eigenpair { value: rho, vector: g.wrap(x), residual: r, iterations: it, lower_shift: sigma });
        }
        let gap = rho - sigma;
        if gap > T::lit(4.0) * r {
            let cand = rho - (r + r).max(floor);
            if cand > sigma {
                if let Ok(c) = BandCholesky::factor(&band.shifted(cand)) {
                    sigma = cand;
                    chol = c;
                }
            }
        }
    }
    Err(Error::Eigen { iterations: max_iter, residual: history.last().copied().unwrap_or(T::nan()).f64() })
}

/// Second eigenvalue by inverse iteration deflated against `first`,
/// finished with a few Rayleigh-quotient steps.
pub fn second_eigenvalue<T: Real>(a: &DiscreteOperator<'_, T>, first: &Eigenpair<T>, tol: T) -> Result<Eigenpair<T>> {
    let g = a.grid();
    let n = g.len();
    let band = a.assemble();
    let anorm = band.norm_inf();
    let floor = T::lit(100.0) * T::epsilon() * anorm;
    let phi = first.vector.values();
    let deflate = |x: &mut [T]| {
        let c = g.dot(x, phi);
        for (xi, &p) in x.iter_mut().zip(phi) {
            *xi -= c * p;
        }
    };
    let chol = BandCholesky::factor(&band.shifted(first.lower_shift))?;
    // Start from a deterministic field that is not symmetric about any axis.
    let mut x: Vec<T> = (0..n)
        .map(|k| {
            let [px, py] = g.coords(k);
            (px * T::lit(3.1) + py * T::lit(1.7)).sin() + T::lit(0.3) * (px * T::lit(7.3) - py * T::lit(2.9)).cos()
        })
        .collect();
    deflate(&mut x);
    let mut ax = vec![T::zero(); n];
    let mut rho = T::zero();
    let mut r = T::infinity();
    let mut iterations = 0;
    for _ in 0..400 {
        iterations += 1;
        chol.solve_in_place(&mut x);
        deflate(&mut x);
        let xn = g.nrm(&x);
        x.iter_mut().for_each(|v| *v /= xn);
        band.mul(&x, &mut ax);
        rho = g.dot(&ax, &x);
        r = residual_norm(g, &ax, &x, rho);
        if r <= tol.max(floor) || r <= T::lit(1e-4) * (rho - first.value).abs() {
            break;
        }
    }
    for _ in 0..8 {
        if r <= tol.max(floor) {
            break;
        }
        let Ok(lu) = BandLu::factor(&band.shifted(rho)) else { break };
        iterations += 1;
        lu.solve_in_place(&mut x);
        deflate(&mut x);
        let xn = g.nrm(&x);
        if !(xn.is_finite() && xn > T::zero()) {
            break;
        }
        x.iter_mut().for_each(|v| *v /= xn);
        band.mul(&x, &mut ax);
        rho = g.dot(&ax, &x);
        r = residual_norm(g, &ax, &x, rho);
    }
    fix_sign(&mut x);
    Ok(Eigenpair { value: rho, vector: g.wrap(x), residual: r, iterations, lower_shift: first.lower_shift })
}

fn residual_norm<T: Real>(g: &Grid<T>, ax: &[T], x: &[T], rho: T) -> T {
    (g.weight() * ax.iter().zip(x).map(|(&a, &b)| (a - rho * b) * (a - rho * b)).sum::<T>()).sqrt()
}

fn fix_sign<T: Real>(x: &mut [T]) {
    let mut best = T::zero();
    for &v in x.iter() {
        if v.abs() > best.abs() {
            best = v;
        }
    }
    if best < T::zero() {
        x.iter_mut().for_each(|v| *v = -*v);
    }
}

/// `F_u(u, λ) = −Δ_h − diag(λ q u^{q−1} + γ u^{γ−1})`.
pub fn linearization<'g, T: Real>(
    grid: &'g Grid<T>,
    u: &ScalarField<T>,
    lambda: T,
    params: &ProblemParams<T>,
) -> Result<DiscreteOperator<'g, T>> {
    grid.check(u)?;
    if let Some((index, value)) = u.first_nonpositive() {
        return Err(Error::NonPositive { index, value: value.f64() });
    }
    let d = potential(u.values(), lambda, params).into_iter().map(|p| -p).collect();
    DiscreteOperator::with_diagonal(grid, d)
}

/// `λ q u^{q−1} + γ u^{γ−1}` nodewise; `u` must be positive.
pub(crate) fn potential<T: Real>(u: &[T], lambda: T, p: &ProblemParams<T>) -> Vec<T> {
    let (q, gm) = (p.q(), p.gamma());
    u.iter()
        .map(|&x| lambda * q * x.powf(q - T::one()) + gm * x.powf(gm - T::one()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Shape;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn mu(h: f64) -> f64 {
        (2.0 - 2.0 * (PI * h).cos()) / (h * h)
    }

    #[test]
    fn sine_is_discrete_eigenvector_1d() {
        let g = Grid::<f64>::interval(1.0, 99).unwrap();
        let s = g.sample(|x, _| (PI * x).sin());
        let ls = apply_laplacian(&g, &s).unwrap();
        let m = mu(g.h()[0]);
        for (a, b) in ls.values().iter().zip(s.values()) {
            assert!((a - m * b).abs() < 1e-12 * m);
        }
        assert_eq!(apply_laplacian(&g, &g.zeros()).unwrap(), g.zeros());
    }

    #[test]
    fn sine_is_discrete_eigenvector_2d() {
        let g = Grid::<f64>::masked_2d(&Shape::Rectangle { width: 1.0, height: 1.0 }, 32).unwrap();
        let s = g.sample(|x, y| (PI * x).sin() * (PI * y).sin());
        let ls = apply_laplacian(&g, &s).unwrap();
        let m = 2.0 * mu(g.h()[0]);
        for (a, b) in ls.values().iter().zip(s.values()) {
            assert!((a - m * b).abs() < 1e-11 * m);
        }
    }

    #[test]
    fn solve_recovers_sine() {
        let g = Grid::<f64>::interval(1.0, 99).unwrap();
        let s = g.sample(|x, _| (PI * x).sin());
        let b = s.scale(mu(g.h()[0]));
        let x = solve(&DiscreteOperator::laplacian(&g), &b, 1e-12).unwrap();
        for (a, e) in x.values().iter().zip(s.values()) {
            assert!((a - e).abs() < 1e-10);
        }
        let z = solve(&DiscreteOperator::laplacian(&g), &g.zeros(), 1e-12).unwrap();
        assert_eq!(z, g.zeros());
    }

    #[test]
    fn solve_rejects_indefinite_shift() {
        let g = Grid::<f64>::interval(1.0, 99).unwrap();
        let a = DiscreteOperator::laplacian(&g).shifted(-2.0 * mu(g.h()[0]));
        assert!(matches!(solve(&a, &g.constant(1.0), 1e-10), Err(Error::Indefinite { .. })));
    }

    #[test]
    fn principal_eigenpair_1d() {
        let g = Grid::<f64>::interval(1.0, 99).unwrap();
        let e = smallest_eigenpair(&DiscreteOperator::laplacian(&g), 1e-10).unwrap();
        assert_relative_eq!(e.value, mu(g.h()[0]), max_relative = 1e-12);
        assert!(e.residual <= 1e-10);
        let s = g.sample(|x, _| (PI * x).sin());
        let sn = s.scale(1.0 / g.norm(&s).unwrap());
        for (a, b) in e.vector.values().iter().zip(sn.values()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_relative_eq!(g.norm(&e.vector).unwrap(), 1.0, max_relative = 1e-13);
    }

    #[test]
    fn principal_eigenpair_square_and_shift() {
        let g = Grid::<f64>::masked_2d(&Shape::Rectangle { width: 1.0, height: 1.0 }, 24).unwrap();
        let lap = DiscreteOperator::laplacian(&g);
        let e = smallest_eigenpair(&lap, 1e-9).unwrap();
        assert_relative_eq!(e.value, 2.0 * mu(g.h()[0]), max_relative = 1e-12);
        assert!((e.value - 2.0 * PI * PI).abs() < 0.05);
        let es = smallest_eigenpair(&lap.shifted(3.5), 1e-9).unwrap();
        assert_relative_eq!(es.value, e.value + 3.5, max_relative = 1e-12);
        let e2 = second_eigenvalue(&lap, &e, 1e-8).unwrap();
        let h = g.h()[0];
        let m2 = (2.0 - 2.0 * (2.0 * PI * h).cos()) / (h * h);
        assert_relative_eq!(e2.value, mu(h) + m2, max_relative = 1e-9);
    }

    #[test]
    fn linearization_constant_field() {
        let g = Grid::<f64>::interval(1.0, 20).unwrap();
        let p = ProblemParams::new(0.5, 3.0).unwrap();
        let op = linearization(&g, &g.constant(1.0), 1.0, &p).unwrap();
        for &d in op.diagonal().unwrap() {
            assert_relative_eq!(d, -3.5);
        }
        let mut u = vec![1.0; 20];
        u[4] = 0.0;
        let u = g.field(u).unwrap();
        assert!(matches!(linearization(&g, &u, 1.0, &p), Err(Error::NonPositive { index: 4, .. })));
    }
}
