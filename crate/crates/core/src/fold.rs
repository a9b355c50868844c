//! Newton on the bordered fold system, stability classification and the
//! nonexistence probe.

use crate::branches::{monotone_iteration, MonotoneConfig, MonotoneReport, MonotoneStatus};
use crate::error::{Error, Result};
use crate::krylov::gmres;
use crate::laplace::{laplacian_raw, linearization, potential, second_eigenvalue, smallest_eigenpair_with, DiscreteOperator, EigenOptions};
use crate::mesh::{Grid, ScalarField};
use crate::quotient::{Problem, ProblemParams};
use crate::real::Real;
use crate::saddle::principal_field;

#[derive(Debug, Clone, Copy)]
pub struct FoldConfig<T> {
    /// Bound on ‖F‖, ‖F_u v‖ and |⟨v,v⟩ − 1|.
    pub tol: T,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Relative residual for the inner GMRES solves.
    pub linear_tol: T,
    pub eig_tol: T,
}

impl<T: Real> Default for FoldConfig<T> {
    fn default() -> Self {
        FoldConfig {
            tol: T::lit(1e-8),
            max_iter: 50,
            max_halvings: 30,
            linear_tol: T::lit(1e-11),
            eig_tol: T::lit(1e-10),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FoldPoint<T> {
    pub u_star: ScalarField<T>,
    pub v_star: ScalarField<T>,
    pub lambda_star: T,
    pub residual_f: T,
    pub residual_fu_v: T,
    pub residual_norm: T,
    /// Smallest eigenvalue of `F_u(u*, λ*)`.
    pub eig_min: T,
    /// Second eigenvalue of `F_u(u*, λ*)`.
    pub eig_second: T,
    pub newton_iters: usize,
    pub converged: bool,
    /// Combined residual before every iteration and at the end.
    pub history: Vec<T>,
}

/// Residual and exact Jacobian of `[F(u,λ); F_u(u,λ)v; ⟨v,v⟩ − 1]`.
#[derive(Debug, Clone, Copy)]
pub struct FoldSystem<'g, T> {
    pb: Problem<'g, T>,
}

/// Components `(F, F_u v, ⟨v,v⟩ − 1)`.
pub type FoldResidual<T> = (Vec<T>, Vec<T>, T);

impl<'g, T: Real> FoldSystem<'g, T> {
    pub fn new(grid: &'g Grid<T>, params: ProblemParams<T>) -> Self {
        FoldSystem { pb: Problem::new(grid, params) }
    }

    fn grid(&self) -> &'g Grid<T> {
        self.pb.grid()
    }

    pub fn residual(&self, u: &[T], v: &[T], lambda: T) -> FoldResidual<T> {
        let g = self.grid();
        let f = self.pb.residual_raw(u, lambda);
        let pot = potential(u, lambda, self.pb.params());
        let mut fv = vec![T::zero(); v.len()];
        laplacian_raw(g, v, &mut fv);
        for ((o, &p), &x) in fv.iter_mut().zip(&pot).zip(v) {
            *o -= p * x;
        }
        (f, fv, g.dot(v, v) - T::one())
    }

    /// `J(u,v,λ)·(du, dv, dλ)`.
    pub fn jacobian_apply(&self, u: &[T], v: &[T], lambda: T, du: &[T], dv: &[T], dl: T) -> FoldResidual<T> {
        let c = Coefficients::new(u, v, lambda, self.pb.params());
        c.apply(self.grid(), du, dv, dl)
    }

    pub fn norms(&self, r: &FoldResidual<T>) -> (T, T, T) {
        let g = self.grid();
        (g.nrm(&r.0), g.nrm(&r.1), r.2.abs())
    }
}

/// Nodewise coefficients of the fold Jacobian at a point.
struct Coefficients<T> {
    /// `λq u^{q−1} + γ u^{γ−1}`
    pot: Vec<T>,
    /// `−u^q`
    f_l: Vec<T>,
    /// `−(λq(q−1)u^{q−2} + γ(γ−1)u^{γ−2})·v`
    g_uv: Vec<T>,
    /// `−q u^{q−1} v`
    f_lv: Vec<T>,
    wv2: Vec<T>,
}

impl<T: Real> Coefficients<T> {
    fn new(u: &[T], v: &[T], lambda: T, p: &ProblemParams<T>) -> Self {
        let (q, gm) = (p.q(), p.gamma());
        let one = T::one();
        let n = u.len();
        let mut c = Coefficients {
            pot: Vec::with_capacity(n),
            f_l: Vec::with_capacity(n),
            g_uv: Vec::with_capacity(n),
            f_lv: Vec::with_capacity(n),
            wv2: Vec::with_capacity(n),
        };
        for (&x, &y) in u.iter().zip(v) {
            let xq1 = x.powf(q - one);
            let xg1 = x.powf(gm - one);
            c.pot.push(lambda * q * xq1 + gm * xg1);
            c.f_l.push(-(x.powf(q)));
            c.g_uv.push(-(lambda * q * (q - one) * xq1 / x + gm * (gm - one) * xg1 / x) * y);
            c.f_lv.push(-q * xq1 * y);
            c.wv2.push(y + y);
        }
        c
    }

    fn apply(&self, g: &Grid<T>, du: &[T], dv: &[T], dl: T) -> FoldResidual<T> {
        let n = du.len();
        let mut r1 = vec![T::zero(); n];
        let mut r2 = vec![T::zero(); n];
        laplacian_raw(g, du, &mut r1);
        laplacian_raw(g, dv, &mut r2);
        for i in 0..n {
            r1[i] += -self.pot[i] * du[i] + self.f_l[i] * dl;
            r2[i] += self.g_uv[i] * du[i] - self.pot[i] * dv[i] + self.f_lv[i] * dl;
        }
        let r3 = g.weight() * self.wv2.iter().zip(dv).map(|(&a, &b)| a * b).sum::<T>();
        (r1, r2, r3)
    }
}

fn check_positive<T: Real>(grid: &Grid<T>, f: &ScalarField<T>) -> Result<()> {
    grid.check(f)?;
    match f.first_nonpositive() {
        Some((index, value)) => Err(Error::NonPositive { index, value: value.f64() }),
        None => Ok(()),
    }
}

/// Newton iteration on the fold system from `(u₀, v₀, λ₀)` with default settings.
pub fn fold_newton<T: Real>(
    u0: &ScalarField<T>,
    v0: &ScalarField<T>,
    lambda0: T,
    grid: &Grid<T>,
    params: &ProblemParams<T>,
    tol: T,
) -> Result<FoldPoint<T>> {
    let cfg = FoldConfig { tol, ..FoldConfig::default() };
    fold_newton_with(u0, v0, lambda0, grid, params, &cfg)
}

/// Newton on the bordered system. Each step solves the exact Jacobian system
/// by GMRES, right-preconditioned with the block lower-triangular operator
/// `[[−Δ, 0, 0], [F_uu[v], −Δ, 0], [0, 0, 1]]`, in unknowns rescaled by `√w`
/// so that Euclidean norms match weighted norms.
pub fn fold_newton_with<T: Real>(
    u0: &ScalarField<T>,
    v0: &ScalarField<T>,
    lambda0: T,
    grid: &Grid<T>,
    params: &ProblemParams<T>,
    cfg: &FoldConfig<T>,
) -> Result<FoldPoint<T>> {
    check_positive(grid, u0)?;
    grid.check(v0)?;
    if !(lambda0 > T::zero()) {
        return Err(Error::InvalidParams(format!("λ₀ must be positive, got {lambda0}")));
    }
    let sys = FoldSystem::new(grid, *params);
    let n = grid.len();
    let sw = grid.weight().sqrt();
    let chol = DiscreteOperator::laplacian(grid).cholesky()?;

    let mut u = u0.values().to_vec();
    let vn = grid.nrm(v0.values());
    let mut v: Vec<T> = v0.values().iter().map(|&x| x / vn).collect();
    let mut lambda = lambda0;

    let merit = |r: &FoldResidual<T>| {
        let (a, b, c) = sys.norms(r);
        (a * a + b * b + c * c).sqrt()
    };
    let done = |r: &FoldResidual<T>| {
        let (a, b, c) = sys.norms(r);
        a <= cfg.tol && b <= cfg.tol && c <= cfg.tol
    };

    let mut r = sys.residual(&u, &v, lambda);
    let mut m = merit(&r);
    let mut history = vec![m];
    let mut iters = 0;
    let mut converged = done(&r);
    // one extra step after the tolerance is met, kept only on a tenfold decrease
    let mut polish = converged;
    while (!converged || !polish) && iters < cfg.max_iter {
        if converged {
            polish = true;
        }
        iters += 1;
        let c = Coefficients::new(&u, &v, lambda, params);
        // scaled right-hand side −S_r·r
        let mut b = Vec::with_capacity(2 * n + 1);
        b.extend(r.0.iter().map(|&x| -x * sw));
        b.extend(r.1.iter().map(|&x| -x * sw));
        b.push(-r.2);
        let apply = |x: &[T], y: &mut [T]| {
            let du: Vec<T> = x[..n].iter().map(|&a| a / sw).collect();
            let dv: Vec<T> = x[n..2 * n].iter().map(|&a| a / sw).collect();
            let (a1, a2, a3) = c.apply(grid, &du, &dv, x[2 * n]);
            for i in 0..n {
                y[i] = a1[i] * sw;
                y[n + i] = a2[i] * sw;
            }
            y[2 * n] = a3;
        };
        let precond = |x: &[T], z: &mut [T]| {
            let z1 = chol.solve(&x[..n]);
            let mut rhs: Vec<T> = x[n..2 * n].to_vec();
            for i in 0..n {
                rhs[i] -= c.g_uv[i] * z1[i];
            }
            let z2 = chol.solve(&rhs);
            z[..n].copy_from_slice(&z1);
            z[n..2 * n].copy_from_slice(&z2);
            z[2 * n] = x[2 * n];
        };
        let mut x = vec![T::zero(); 2 * n + 1];
        let lin_tol = cfg.linear_tol.max(T::epsilon() * T::lit(100.0));
        match gmres(apply, precond, &b, &mut x, lin_tol, 80, 800) {
            Ok(_) => {}
            Err(Error::LinearSolve { residual, .. }) if residual < 1e-6 => {}
            Err(e) => return Err(e),
        }
        let du: Vec<T> = x[..n].iter().map(|&a| a / sw).collect();
        let dv: Vec<T> = x[n..2 * n].iter().map(|&a| a / sw).collect();
        let dl = x[2 * n];

        let mut alpha = T::one();
        let mut accepted = false;
        for _ in 0..=cfg.max_halvings {
            let un: Vec<T> = u.iter().zip(&du).map(|(&a, &d)| a + alpha * d).collect();
            if un.iter().all(|&z| z > T::zero()) {
                let vn: Vec<T> = v.iter().zip(&dv).map(|(&a, &d)| a + alpha * d).collect();
                let ln = lambda + alpha * dl;
                let rn = sys.residual(&un, &vn, ln);
                let mn = merit(&rn);
                let better = if converged { mn * T::lit(10.0) <= m } else { mn < m || done(&rn) };
                if mn.is_finite() && better {
                    u = un;
                    v = vn;
                    lambda = ln;
                    r = rn;
                    m = mn;
                    accepted = true;
                    break;
                }
            }
            alpha = alpha * T::lit(0.5);
        }
        if !accepted && converged {
            break;
        }
        if !accepted {
            if u.iter().zip(&du).any(|(&a, &d)| a + alpha * d <= T::zero()) {
                return Err(Error::PositivityLoss { fraction: 0.0 });
            }
            break;
        }
        history.push(m);
        converged = done(&r);
    }

    if v.iter().copied().sum::<T>() < T::zero() {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let (rf, rfv, rn) = sys.norms(&r);
    let u_star = grid.wrap(u);
    let v_star = grid.wrap(v);
    let op = linearization(grid, &u_star, lambda, params)?;
    let opts = EigenOptions { guess: Some(v_star.values().to_vec()), shift_hint: None, max_iter: None };
    let e1 = smallest_eigenpair_with(&op, cfg.eig_tol, &opts)?;
    let e2 = second_eigenvalue(&op, &e1, T::lit(1e-8).max(cfg.eig_tol))?;
    Ok(FoldPoint {
        u_star,
        v_star,
        lambda_star: lambda,
        residual_f: rf,
        residual_fu_v: rfv,
        residual_norm: rn,
        eig_min: e1.value,
        eig_second: e2.value,
        newton_iters: iters,
        converged,
        history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    /// λ₁ > tol
    Stable,
    /// |λ₁| ≤ tol
    Marginal,
    /// λ₁ < −tol
    Unstable,
}

impl Stability {
    pub fn from_eigenvalue<T: Real>(l1: T, tol: T) -> Self {
        if l1 > tol {
            Stability::Stable
        } else if l1 < -tol {
            Stability::Unstable
        } else {
            Stability::Marginal
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Marginal => "marginal",
            Stability::Unstable => "unstable",
        }
    }
}

/// Default band for [`Stability::Marginal`].
pub const STABILITY_TOL: f64 = 1e-6;

/// Principal eigenvalue of the linearization and the stability flag.
pub fn classify_stability<T: Real>(u: &ScalarField<T>, lambda: T, grid: &Grid<T>, params: &ProblemParams<T>) -> Result<(T, Stability)> {
    classify_stability_tol(u, lambda, grid, params, T::lit(STABILITY_TOL))
}

pub fn classify_stability_tol<T: Real>(
    u: &ScalarField<T>,
    lambda: T,
    grid: &Grid<T>,
    params: &ProblemParams<T>,
    tol: T,
) -> Result<(T, Stability)> {
    let op = linearization(grid, u, lambda, params)?;
    let opts = EigenOptions { guess: Some(u.values().to_vec()), shift_hint: None, max_iter: None };
    let e = smallest_eigenpair_with(&op, T::lit(1e-10), &opts)?;
    Ok((e.value, Stability::from_eigenvalue(e.value, tol)))
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome<T> {
    pub u: ScalarField<T>,
    pub converged: bool,
    pub iterations: usize,
    pub residual: T,
}

/// Damped Newton for `F(u, λ) = 0` at fixed `λ`, keeping `u` positive.
/// Stops at `‖F‖ ≤ tol`, on stagnation, or when the sup-norm exceeds `cap`.
pub fn newton_solve<T: Real>(
    u0: &ScalarField<T>,
    lambda: T,
    grid: &Grid<T>,
    params: &ProblemParams<T>,
    tol: T,
    max_iter: usize,
) -> Result<NewtonOutcome<T>> {
    check_positive(grid, u0)?;
    let pb = Problem::new(grid, *params);
    let mut u = u0.values().to_vec();
    let mut r = pb.residual_raw(&u, lambda);
    let mut m = grid.nrm(&r);
    let cap = T::lit(1e8);
    for it in 0..max_iter {
        if m <= tol {
            return Ok(NewtonOutcome { u: grid.wrap(u), converged: true, iterations: it, residual: m });
        }
        let op = linearization(grid, &grid.wrap(u.clone()), lambda, params)?;
        let lu = match op.lu() {
            Ok(lu) => lu,
            Err(_) => break,
        };
        let mut d: Vec<T> = r.iter().map(|&x| -x).collect();
        lu.solve_in_place(&mut d);
        let mut alpha = T::one();
        let mut ok = false;
        for _ in 0..=30 {
            let un: Vec<T> = u.iter().zip(&d).map(|(&a, &b)| a + alpha * b).collect();
            if un.iter().all(|&z| z > T::zero()) {
                let rn = pb.residual_raw(&un, lambda);
                let mn = grid.nrm(&rn);
                if mn.is_finite() && mn < m {
                    // A full step that only halves the error, as at a double
                    // root, is retried at twice the length.
                    let mut best = (un, rn, mn);
                    if alpha == T::one() && mn * T::lit(2.0) > m {
                        let u2: Vec<T> = u.iter().zip(&d).map(|(&a, &b)| a + (b + b)).collect();
                        if u2.iter().all(|&z| z > T::zero()) {
                            let r2 = pb.residual_raw(&u2, lambda);
                            let m2 = grid.nrm(&r2);
                            if m2 < best.2 {
                                best = (u2, r2, m2);
                            }
                        }
                    }
                    (u, r, m) = best;
                    ok = true;
                    break;
                }
            }
            alpha = alpha * T::lit(0.5);
        }
        if !ok || u.iter().any(|&x| x > cap) {
            return Ok(NewtonOutcome { u: grid.wrap(u), converged: false, iterations: it + 1, residual: m });
        }
    }
    let converged = m <= tol;
    Ok(NewtonOutcome { u: grid.wrap(u), converged, iterations: max_iter, residual: m })
}

#[derive(Debug, Clone, Copy)]
pub struct ProbeConfig<T> {
    pub monotone: MonotoneConfig<T>,
    /// Sup-norm amplitudes of the `c·φ₁` Newton starts.
    pub amplitudes: [T; 6],
    pub newton_tol: T,
    pub newton_max_iter: usize,
}

impl<T: Real> Default for ProbeConfig<T> {
    fn default() -> Self {
        ProbeConfig {
            monotone: MonotoneConfig::default(),
            amplitudes: [0.25, 0.5, 1.0, 2.0, 4.0, 8.0].map(T::lit),
            newton_tol: T::lit(1e-9),
            newton_max_iter: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProbeReport<T> {
    pub lambda: T,
    pub monotone: MonotoneReport<T>,
    /// Positive solutions reached by Newton, one per start that converged.
    pub newton_solutions: Vec<ScalarField<T>>,
    pub newton_attempts: usize,
    pub found: bool,
    /// Smallest solution found, by sup-norm.
    pub solution: Option<ScalarField<T>>,
}

/// Searches for a positive solution at `λ`: monotone iteration from `εφ₁`,
/// then Newton from `c·φ₁` for each configured amplitude and from the last
/// monotone iterate.
pub fn nonexistence_probe<T: Real>(lambda: T, grid: &Grid<T>, params: &ProblemParams<T>, cfg: &ProbeConfig<T>) -> Result<ProbeReport<T>> {
    if !(lambda > T::zero()) {
        return Err(Error::InvalidParams(format!("λ must be positive, got {lambda}")));
    }
    let monotone = monotone_iteration(lambda, grid, params, &cfg.monotone)?;
    let phi = principal_field(grid)?;
    let ps = phi.sup_norm();
    let mut starts: Vec<ScalarField<T>> = cfg.amplitudes.iter().map(|&c| phi.scale(c / ps)).collect();
    let last = match monotone.status {
        MonotoneStatus::BlowUp => None,
        _ => Some(monotone.u.clone()),
    };
    if let Some(u) = &last {
        if u.min() > T::zero() {
            starts.push(u.clone());
        }
    }
    let mut sols = Vec::new();
    let attempts = starts.len();
    for s in &starts {
        let out = newton_solve(s, lambda, grid, params, cfg.newton_tol, cfg.newton_max_iter)?;
        if out.converged && out.u.min() > T::zero() {
            // Newton is only linear at a singular root (λ at the fold), so keep
            // going to the rounding floor.
            let fine = newton_solve(&out.u, lambda, grid, params, T::zero(), cfg.newton_max_iter)?;
            sols.push(if fine.residual < out.residual && fine.u.min() > T::zero() { fine.u } else { out.u });
        }
    }
    let mut found_fields: Vec<&ScalarField<T>> = sols.iter().collect();
    if monotone.status == MonotoneStatus::Converged {
        found_fields.push(&monotone.u);
    }
    // the lowest solution; copies of it within 1e-4 are told apart by residual
    let pb = Problem::new(grid, *params);
    let res = |f: &ScalarField<T>| grid.nrm(&pb.residual_raw(f.values(), lambda));
    let low = found_fields.iter().map(|f| f.sup_norm()).fold(T::infinity(), T::min);
    let solution = found_fields
        .iter()
        .filter(|f| f.sup_norm() <= low * (T::one() + T::lit(1e-4)))
        .min_by(|a, b| res(a).partial_cmp(&res(b)).unwrap_or(std::cmp::Ordering::Equal))
        .map(|f| (*f).clone());
    Ok(ProbeReport {
        lambda,
        found: solution.is_some(),
        monotone,
        newton_solutions: sols,
        newton_attempts: attempts,
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saddle::{saddle_search, SaddleConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize) -> (Grid<f64>, ProblemParams<f64>) {
        (Grid::interval(1.0, n).unwrap(), ProblemParams::new(0.5, 3.0).unwrap())
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (g, p) = setup(30);
        let sys = FoldSystem::new(&g, p);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<f64> = (0..30).map(|i| 0.5 + ((i as f64 + 1.0) / 31.0 * 3.0).sin() + 0.1 * rng.gen::<f64>()).collect();
        let v: Vec<f64> = (0..30).map(|_| 0.2 + rng.gen::<f64>()).collect();
        let lam = 7.0;
        for _ in 0..10 {
            let du: Vec<f64> = (0..30).map(|_| rng.gen::<f64>() - 0.5).collect();
            let dv: Vec<f64> = (0..30).map(|_| rng.gen::<f64>() - 0.5).collect();
            let dl = rng.gen::<f64>() - 0.5;
            let e = 1e-6;
            let shift = |s: f64| {
                let uu: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + s * b).collect();
                let vv: Vec<f64> = v.iter().zip(&dv).map(|(a, b)| a + s * b).collect();
                sys.residual(&uu, &vv, lam + s * dl)
            };
            let (p1, m1) = (shift(e), shift(-e));
            let j = sys.jacobian_apply(&u, &v, lam, &du, &dv, dl);
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for i in 0..30 {
                for (fd, an) in [((p1.0[i] - m1.0[i]) / (2.0 * e), j.0[i]), ((p1.1[i] - m1.1[i]) / (2.0 * e), j.1[i])] {
                    num = num.max((fd - an).abs());
                    den = den.max(an.abs());
                }
            }
            let fd3 = (p1.2 - m1.2) / (2.0 * e);
            assert!(num <= 1e-5 * den, "rel err {}", num / den);
            assert!((fd3 - j.2).abs() <= 1e-5 * j.2.abs().max(1.0));
        }
    }

    #[test]
    fn fold_from_saddle_seed() {
        let (g, p) = setup(64);
        let sr = saddle_search(&g, &p, &SaddleConfig { tol: 1e-3, ..Default::default() }).unwrap();
        let fp = fold_newton(&sr.u_star, &sr.v_star, sr.lambda_star, &g, &p, 1e-9).unwrap();
        assert!(fp.converged);
        assert!(fp.residual_f <= 1e-9 && fp.residual_fu_v <= 1e-9 && fp.residual_norm <= 1e-9);
        assert!(fp.u_star.min() > 0.0 && fp.v_star.min() > 0.0);
        assert!((g.norm(&fp.v_star).unwrap() - 1.0).abs() < 1e-9);
        assert!(fp.eig_min.abs() <= 1e-8 * fp.eig_second);
        let uq = fp.u_star.map(|x| x.sqrt());
        assert!(g.inner(&uq, &fp.v_star).unwrap() > 0.0);
        let (l1, st) = classify_stability(&fp.u_star, fp.lambda_star, &g, &p).unwrap();
        assert!(l1.abs() < 1e-8);
        assert_eq!(st, Stability::Marginal);
    }

    #[test]
    fn rejects_bad_starts() {
        let (g, p) = setup(16);
        let u = g.constant(1.0);
        let bad = g.sample(|x, _| x - 0.5);
        assert!(matches!(fold_newton(&bad, &u, 5.0, &g, &p, 1e-9), Err(Error::NonPositive { .. })));
        assert!(fold_newton(&u, &u, -1.0, &g, &p, 1e-9).is_err());
        assert!(nonexistence_probe(0.0, &g, &p, &ProbeConfig::default()).is_err());
    }

    #[test]
    fn stability_bands() {
        assert_eq!(Stability::from_eigenvalue(1e-3, 1e-6), Stability::Stable);
        assert_eq!(Stability::from_eigenvalue(-1e-3, 1e-6), Stability::Unstable);
        assert_eq!(Stability::from_eigenvalue(1e-9, 1e-6), Stability::Marginal);
        assert_eq!(Stability::Marginal.as_str(), "marginal");
    }

    #[test]
    fn newton_keeps_a_solution() {
        let (g, p) = setup(40);
        let u = crate::branches::minimal_solution(4.0, &g, &p, 1e-11).unwrap();
        let out = newton_solve(&u, 4.0, &g, &p, 1e-9, 20).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 1);
    }
}
