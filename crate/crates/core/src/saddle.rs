//! Saddle search for `λ(u, v)` over pairs of positive unit fields.
//!
//! Both modes precondition gradients with the Dirichlet Laplacian, which
//! makes the steps comparable across mesh sizes: the Riesz representative of
//! a weighted-L² gradient in the energy inner product is `(−Δ_h)⁻¹ g`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::banded::BandCholesky;
use crate::error::{Error, Result};
use crate::laplace::{laplacian_raw, smallest_eigenpair, DiscreteOperator};
use crate::mesh::{Grid, ScalarField};
use crate::quotient::{Problem, ProblemParams};
use crate::real::Real;

/// Nodes are clamped to this value after each step.
pub const POSITIVITY_FLOOR: f64 = 1e-14;
/// Fraction of clamped nodes that counts as positivity loss.
pub const POSITIVITY_LOSS_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaddleMode {
    /// Simultaneous extragradient with a shared adaptive step.
    Extragradient,
    /// Line-search ascent in `u`, then a damped descent step in `v`.
    Alternating,
}

#[derive(Debug, Clone, Copy)]
pub struct SaddleConfig<T> {
    pub mode: SaddleMode,
    /// Bound on both weighted-L² gradient norms.
    pub tol: T,
    pub max_iter: usize,
    /// Number of random starts for [`saddle_multistart`].
    pub restarts: usize,
    /// Initial step (extragradient) or v-step fraction (alternating).
    pub step: T,
    /// Relative energy-norm radius of the trust regions in [`minimax_gap`].
    pub gap_radius: T,
    /// Inner iterations per side for [`minimax_gap`].
    pub gap_iters: usize,
    pub seed: u64,
}

impl<T: Real> Default for SaddleConfig<T> {
    fn default() -> Self {
        SaddleConfig {
            mode: SaddleMode::Extragradient,
            tol: T::lit(1e-8),
            max_iter: 5000,
            restarts: 10,
            step: T::lit(0.5),
            gap_radius: T::lit(1e-5),
            gap_iters: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SaddleResult<T> {
    pub u_star: ScalarField<T>,
    pub v_star: ScalarField<T>,
    pub lambda_star: T,
    pub grad_u_norm: T,
    pub grad_v_norm: T,
    pub gap_estimate: T,
    pub iterations: usize,
    pub converged: bool,
    /// `λ` after every accepted iteration.
    pub history: Vec<T>,
    /// Alternating mode only: `(start, after u-phase, after v-phase)` per sweep.
    pub phases: Vec<(T, T, T)>,
}

struct Eval<T> {
    lambda: T,
    gu: Vec<T>,
    gv: Vec<T>,
    nu: T,
    nv: T,
}

struct Search<'a, 'g, T> {
    pb: Problem<'g, T>,
    chol: &'a BandCholesky<T>,
}

impl<T: Real> Search<'_, '_, T> {
    fn grid(&self) -> &Grid<T> {
        self.pb.grid()
    }

    fn eval(&self, u: &[T], v: &[T]) -> Option<Eval<T>> {
        let p = self.pb.pairings_raw(u, v);
        let t = p.t_opt(self.pb.params()).ok()?;
        let lambda = p.lambda(self.pb.params()).ok()?;
        if !(lambda.is_finite() && t.is_finite()) {
            return None;
        }
        let gu = self.pb.grad_u_raw(u, v, t, &p);
        let gv = self.pb.grad_v_raw(u, t, &p);
        let g = self.grid();
        let (nu, nv) = (g.nrm(&gu), g.nrm(&gv));
        (nu.is_finite() && nv.is_finite()).then_some(Eval { lambda, gu, gv, nu, nv })
    }

    fn lambda(&self, u: &[T], v: &[T]) -> Option<T> {
        let p = self.pb.pairings_raw(u, v);
        p.lambda(self.pb.params()).ok().filter(|l| l.is_finite())
    }

    fn precond(&self, g: &[T]) -> Vec<T> {
        self.chol.solve(g)
    }

    fn energy(&self, x: &[T]) -> T {
        let mut lx = vec![T::zero(); x.len()];
        laplacian_raw(self.grid(), x, &mut lx);
        self.grid().dot(&lx, x).max(T::zero()).sqrt()
    }

    /// `x + s·d`, clamped to the floor and normalized.
    fn step(&self, x: &[T], d: &[T], s: T) -> Result<Vec<T>> {
        let floor = T::lit(POSITIVITY_FLOOR);
        let mut hits = 0usize;
        let mut y: Vec<T> = x
            .iter()
            .zip(d)
            .map(|(&a, &b)| {
                let z = a + s * b;
                if z > floor {
                    z
                } else {
                    hits += 1;
                    floor
                }
            })
            .collect();
        normalize_checked(self.grid(), &mut y, hits)?;
        Ok(y)
    }
}

fn normalize_checked<T: Real>(g: &Grid<T>, y: &mut [T], hits: usize) -> Result<()> {
    let fraction = hits as f64 / y.len() as f64;
    if fraction > POSITIVITY_LOSS_FRACTION {
        return Err(Error::PositivityLoss { fraction });
    }
    let n = g.nrm(y);
    if !(n.is_finite() && n > T::zero()) {
        return Err(Error::PositivityLoss { fraction: 1.0 });
    }
    y.iter_mut().for_each(|x| *x /= n);
    Ok(())
}

fn unit_positive<T: Real>(g: &Grid<T>, f: &ScalarField<T>) -> Result<Vec<T>> {
    g.check(f)?;
    let floor = T::lit(POSITIVITY_FLOOR);
    let mut hits = 0;
    let mut y: Vec<T> = f
        .values()
        .iter()
        .map(|&x| {
            if x > floor {
                x
            } else {
                hits += 1;
                floor
            }
        })
        .collect();
    normalize_checked(g, &mut y, hits)?;
    Ok(y)
}

/// Principal eigenvector of `−Δ_h`, unit-normalized and positive.
pub fn principal_field<T: Real>(grid: &Grid<T>) -> Result<ScalarField<T>> {
    let tol = T::lit(1e-10).max(T::epsilon().sqrt() * T::lit(1e-2));
    Ok(smallest_eigenpair(&DiscreteOperator::laplacian(grid), tol)?.vector)
}

/// Smoothed positive random field `(−Δ_h)⁻¹(ξ + 0.1)`, `ξ ~ U(0,1)` per node,
/// unit-normalized. Such fields satisfy `−Δ_h u > 0`.
pub fn random_positive_field<T: Real, R: Rng>(grid: &Grid<T>, rng: &mut R) -> Result<ScalarField<T>> {
    let chol = DiscreteOperator::laplacian(grid).cholesky()?;
    Ok(random_positive_with(grid, &chol, rng))
}

pub(crate) fn random_positive_with<T: Real, R: Rng>(grid: &Grid<T>, chol: &BandCholesky<T>, rng: &mut R) -> ScalarField<T> {
    let noise: Vec<T> = (0..grid.len()).map(|_| T::lit(rng.gen::<f64>() + 0.1)).collect();
    let mut x = chol.solve(&noise);
    let n = grid.nrm(&x);
    x.iter_mut().for_each(|v| *v /= n);
    grid.wrap(x)
}

/// Saddle search from `u₀ = v₀ = φ₁`.
pub fn saddle_search<T: Real>(grid: &Grid<T>, params: &ProblemParams<T>, config: &SaddleConfig<T>) -> Result<SaddleResult<T>> {
    let phi = principal_field(grid)?;
    saddle_search_from(grid, params, config, &phi, &phi)
}

/// `restarts` searches from seeded random positive fields, run in parallel.
/// Results are returned in seed order.
pub fn saddle_multistart<T: Real>(
    grid: &Grid<T>,
    params: &ProblemParams<T>,
    config: &SaddleConfig<T>,
) -> Result<Vec<SaddleResult<T>>> {
    let chol = DiscreteOperator::laplacian(grid).cholesky()?;
    let starts: Vec<(ScalarField<T>, ScalarField<T>)> = (0..config.restarts)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(k as u64));
            let u = random_positive_with(grid, &chol, &mut rng);
            let v = random_positive_with(grid, &chol, &mut rng);
            (u, v)
        })
        .collect();
    starts
        .par_iter()
        .map(|(u, v)| saddle_search_from(grid, params, config, u, v))
        .collect()
}

pub fn saddle_search_from<T: Real>(
    grid: &Grid<T>,
    params: &ProblemParams<T>,
    config: &SaddleConfig<T>,
    u0: &ScalarField<T>,
    v0: &ScalarField<T>,
) -> Result<SaddleResult<T>> {
    let chol = DiscreteOperator::laplacian(grid).cholesky()?;
    let s = Search { pb: Problem::new(grid, *params), chol: &chol };
    let u = unit_positive(grid, u0)?;
    let v = unit_positive(grid, v0)?;
    let mut res = match config.mode {
        SaddleMode::Extragradient => extragradient(&s, config, u, v)?,
        SaddleMode::Alternating => alternating(&s, config, u, v)?,
    };
    res.gap_estimate = gap_impl(&s, res.u_star.values(), res.v_star.values(), config.gap_radius, config.gap_iters)?;
    Ok(res)
}

fn finish<T: Real>(
    s: &Search<'_, '_, T>,
    u: Vec<T>,
    v: Vec<T>,
    e: &Eval<T>,
    iterations: usize,
    converged: bool,
    history: Vec<T>,
    phases: Vec<(T, T, T)>,
) -> SaddleResult<T> {
    let g = s.grid();
    SaddleResult {
        u_star: g.wrap(u),
        v_star: g.wrap(v),
        lambda_star: e.lambda,
        grad_u_norm: e.nu,
        grad_v_norm: e.nv,
        gap_estimate: T::nan(),
        iterations,
        converged,
        history,
        phases,
    }
}

fn outside<T: Real>() -> Error {
    Error::OutsideCone(T::nan().f64())
}

fn extragradient<T: Real>(s: &Search<'_, '_, T>, cfg: &SaddleConfig<T>, mut u: Vec<T>, mut v: Vec<T>) -> Result<SaddleResult<T>> {
    let g = s.grid();
    let mut e = s.eval(&u, &v).ok_or_else(outside::<T>)?;
    let dual = |e: &Eval<T>| -> T {
        let pu = s.precond(&e.gu);
        let pv = s.precond(&e.gv);
        (g.dot(&e.gu, &pu) + g.dot(&e.gv, &pv)).max(T::zero()).sqrt()
    };
    let mut merit = dual(&e);
    let mut eta = cfg.step;
    let eta_max = cfg.step;
    let eta_min = T::lit(1e-8);
    let mut streak = 0;
    let mut history = vec![e.lambda];
    let mut it = 0;
    while it < cfg.max_iter {
        if e.nu <= cfg.tol && e.nv <= cfg.tol {
            return Ok(finish(s, u, v, &e, it, true, history, vec![]));
        }
        it += 1;
        let trial = (|| -> Result<Option<(Vec<T>, Vec<T>, Eval<T>)>> {
            let du = s.precond(&e.gu);
            let dv = s.precond(&e.gv);
            let uh = s.step(&u, &du, eta)?;
            let vh = s.step(&v, &dv, -eta)?;
            let Some(eh) = s.eval(&uh, &vh) else { return Ok(None) };
            let du = s.precond(&eh.gu);
            let dv = s.precond(&eh.gv);
            let un = s.step(&u, &du, eta)?;
            let vn = s.step(&v, &dv, -eta)?;
            Ok(s.eval(&un, &vn).map(|en| (un, vn, en)))
        })();
        let accepted = match trial {
            Ok(Some((un, vn, en))) => {
                let m = dual(&en);
                if m <= merit * T::lit(1.2) {
                    streak = if m < merit { streak + 1 } else { 0 };
                    u = un;
                    v = vn;
                    e = en;
                    merit = m;
                    history.push(e.lambda);
                    true
                } else {
                    false
                }
            }
            Ok(None) | Err(Error::PositivityLoss { .. }) => false,
            Err(err) => return Err(err),
        };
        if accepted {
            if streak >= 4 {
                eta = (eta + eta).min(eta_max);
                streak = 0;
            }
        } else {
            eta = eta * T::lit(0.5);
            streak = 0;
            if eta < eta_min {
                break;
            }
        }
    }
    let converged = e.nu <= cfg.tol && e.nv <= cfg.tol;
    Ok(finish(s, u, v, &e, it, converged, history, vec![]))
}

fn alternating<T: Real>(s: &Search<'_, '_, T>, cfg: &SaddleConfig<T>, mut u: Vec<T>, mut v: Vec<T>) -> Result<SaddleResult<T>> {
    let g = s.grid();
    let mut e = s.eval(&u, &v).ok_or_else(outside::<T>)?;
    let mut history = vec![e.lambda];
    let mut phases = Vec::new();
    let mut alpha = T::one();
    let mut beta = cfg.step;
    let mut it = 0;
    let armijo = T::lit(1e-4);
    while it < cfg.max_iter {
        if e.nu <= cfg.tol && e.nv <= cfg.tol {
            return Ok(finish(s, u, v, &e, it, true, history, phases));
        }
        it += 1;
        let start = e.lambda;
        // u-phase: backtracking ascent until the u-gradient is small
        for _ in 0..20 {
            if e.nu <= cfg.tol * T::lit(0.1) {
                break;
            }
            let d = s.precond(&e.gu);
            let slope = g.dot(&e.gu, &d);
            let mut a = (alpha + alpha).min(T::lit(4.0));
            let mut moved = false;
            for _ in 0..30 {
                if let Ok(un) = s.step(&u, &d, a) {
                    if let Some(l) = s.lambda(&un, &v) {
                        if l >= e.lambda + armijo * a * slope {
                            if let Some(en) = s.eval(&un, &v) {
                                u = un;
                                e = en;
                                moved = true;
                                break;
                            }
                        }
                    }
                }
                a = a * T::lit(0.5);
            }
            if !moved {
                break;
            }
            alpha = a;
        }
        let mid = e.lambda;
        // v-phase: fixed fraction, halved until λ does not increase
        let d = s.precond(&e.gv);
        let mut b = beta;
        let mut stepped = false;
        for _ in 0..30 {
            if let Ok(vn) = s.step(&v, &d, -b) {
                if let Some(l) = s.lambda(&u, &vn) {
                    if l <= e.lambda {
                        if let Some(en) = s.eval(&u, &vn) {
                            v = vn;
                            e = en;
                            stepped = true;
                            break;
                        }
                    }
                }
            }
            b = b * T::lit(0.5);
        }
        beta = if stepped { (b + b).min(cfg.step) } else { b };
        phases.push((start, mid, e.lambda));
        history.push(e.lambda);
        if !stepped && mid == start {
            break;
        }
    }
    let converged = e.nu <= cfg.tol && e.nv <= cfg.tol;
    Ok(finish(s, u, v, &e, it, converged, history, phases))
}

/// `sup λ(·, v) − inf λ(u, ·)` over energy-norm balls of relative radius
/// `radius` around `u` and `v`, each approximated by `iters` projected
/// preconditioned gradient steps. Nonnegative by construction.
pub fn minimax_gap<T: Real>(
    grid: &Grid<T>,
    params: &ProblemParams<T>,
    u: &ScalarField<T>,
    v: &ScalarField<T>,
    radius: T,
    iters: usize,
) -> Result<T> {
    let chol = DiscreteOperator::laplacian(grid).cholesky()?;
    let s = Search { pb: Problem::new(grid, *params), chol: &chol };
    let u = unit_positive(grid, u)?;
    let v = unit_positive(grid, v)?;
    gap_impl(&s, &u, &v, radius, iters)
}

fn gap_impl<T: Real>(s: &Search<'_, '_, T>, u: &[T], v: &[T], radius: T, iters: usize) -> Result<T> {
    let center = s.lambda(u, v).ok_or_else(outside::<T>)?;
    let hi = ball_extremum(s, u, v, radius, iters, true)?;
    let lo = ball_extremum(s, u, v, radius, iters, false)?;
    Ok((hi.max(center) - lo.min(center)).max(T::zero()))
}

fn ball_extremum<T: Real>(s: &Search<'_, '_, T>, u: &[T], v: &[T], radius: T, iters: usize, ascend_u: bool) -> Result<T> {
    let center = if ascend_u { u } else { v };
    let r = radius * s.energy(center);
    let sign = if ascend_u { T::one() } else { -T::one() };
    let value = |x: &[T]| if ascend_u { s.lambda(x, v) } else { s.lambda(u, x) };
    let project = |y: &mut Vec<T>| -> bool {
        let diff: Vec<T> = y.iter().zip(center).map(|(&a, &b)| a - b).collect();
        let dn = s.energy(&diff);
        if dn > r {
            let f = r / dn;
            for (yi, (&c, &d)) in y.iter_mut().zip(center.iter().zip(&diff)) {
                *yi = c + f * d;
            }
        }
        y.iter().all(|&z| z > T::zero())
    };
    let mut x = center.to_vec();
    let mut best = value(&x).ok_or_else(outside::<T>)?;
    for _ in 0..iters {
        let e = if ascend_u { s.eval(&x, v) } else { s.eval(u, &x) };
        let Some(e) = e else { break };
        let grad = if ascend_u { &e.gu } else { &e.gv };
        let d = s.precond(grad);
        let dn = s.energy(&d);
        if !(dn > T::zero()) {
            break;
        }
        let mut a = r / dn;
        let mut improved = false;
        for _ in 0..20 {
            let mut y: Vec<T> = x.iter().zip(&d).map(|(&xi, &di)| xi + sign * a * di).collect();
            if project(&mut y) {
                if let Some(l) = value(&y) {
                    if sign * (l - best) > T::zero() {
                        best = l;
                        x = y;
                        improved = true;
                        break;
                    }
                }
            }
            a = a * T::lit(0.5);
        }
        if !improved {
            break;
        }
    }
    Ok(best)
}

/// `sup_{s>0} (λ₁ s − s^γ)/s^q`; the maximizer is bracketed and located by
/// bisection on the sign of the derivative.
pub fn upper_bound_from_eigenvalue<T: Real>(lambda1: T, params: &ProblemParams<T>) -> T {
    let (q, g) = (params.q(), params.gamma());
    let one = T::one();
    let f = |s: T| lambda1 * s.powf(one - q) - s.powf(g - q);
    let df = |s: T| (one - q) * lambda1 * s.powf(-q) - (g - q) * s.powf(g - q - one);
    let mut lo = one;
    while df(lo) <= T::zero() {
        lo = lo * T::lit(0.5);
    }
    let mut hi = one;
    while df(hi) >= T::zero() {
        hi = hi + hi;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if df(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    f((lo * hi).sqrt())
}

/// Upper bound `K ≥ λ*` from the principal eigenvalue of `−Δ_h`.
pub fn upper_bound_via_phi1<T: Real>(grid: &Grid<T>, params: &ProblemParams<T>) -> Result<T> {
    let tol = T::lit(1e-10).max(T::epsilon().sqrt() * T::lit(1e-2));
    let e = smallest_eigenpair(&DiscreteOperator::laplacian(grid), tol)?;
    Ok(upper_bound_from_eigenvalue(e.value, params))
}
