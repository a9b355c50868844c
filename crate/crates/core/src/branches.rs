//! Minimal branch by monotone iteration, pseudo-arclength continuation through
//! the fold, and crossing counts at fixed λ.

use std::fmt::Write as _;

use crate::banded::BandCholesky;
use crate::error::{Error, Result};
use crate::fold::{fold_newton_with, newton_solve, FoldConfig, FoldPoint, Stability, STABILITY_TOL};
use crate::krylov::gmres;
use crate::laplace::{linearization, potential, smallest_eigenpair_with, DiscreteOperator, EigenOptions};
use crate::mesh::{Grid, ScalarField};
use crate::quotient::{Problem, ProblemParams};
use crate::real::Real;
use crate::saddle::{principal_field, upper_bound_via_phi1};

#[derive(Debug, Clone, Copy)]
pub struct MonotoneConfig<T> {
    /// Stop when `‖u_{k+1} − u_k‖_∞ ≤ tol`.
    pub tol: T,
    pub max_iter: usize,
    pub blow_up_cap: T,
    /// Start `εφ₁`; `None` means `1e-6 / sup φ₁`.
    pub epsilon: Option<T>,
    /// Finish with Newton at fixed λ from the last iterate.
    pub polish: bool,
    pub shift: ShiftRule,
}

/// Choice of `M` in `(−Δ + M)u_{k+1} = M u_k + f(u_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftRule {
    /// `M = 0`. `f` is increasing on `u > 0`, so the map is already
    /// order-preserving and this gives the fastest contraction.
    Zero,
    /// `M ≥ max f'(u_k)`, refreshed with a 25% margin whenever exceeded.
    MaxDerivative,
}

impl<T: Real> Default for MonotoneConfig<T> {
    fn default() -> Self {
        MonotoneConfig { tol: T::lit(1e-10), max_iter: 200_000, blow_up_cap: T::lit(1e8), epsilon: None, polish: true, shift: ShiftRule::Zero }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotoneStatus {
    Converged,
    /// Sup-norm passed the cap.
    BlowUp,
    /// Iteration cap reached below the blow-up cap.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct MonotoneReport<T> {
    pub status: MonotoneStatus,
    /// Last iterate (polished when converged and polishing is on).
    pub u: ScalarField<T>,
    pub iterations: usize,
    pub epsilon: T,
    pub sup_norm: T,
    /// Last sup-norm increment.
    pub last_step: T,
    /// Largest nodewise decrease seen between consecutive iterates; zero up
    /// to rounding for an order-preserving update.
    pub max_decrease: T,
    /// Residual `‖F(u, λ)‖` of the returned field.
    pub residual: T,
}

/// Monotone iteration `(−Δ + M)u_{k+1} = M u_k + λu_k^q + u_k^γ` from `εφ₁`,
/// with `M` set by [`ShiftRule`]. Iterates are nodewise nondecreasing.
pub fn monotone_iteration<T: Real>(
    lambda: T,
    grid: &Grid<T>,
    params: &ProblemParams<T>,
    cfg: &MonotoneConfig<T>,
) -> Result<MonotoneReport<T>> {
    if !(lambda > T::zero()) {
        return Err(Error::InvalidParams(format!("λ must be positive, got {lambda}")));
    }
    let phi = principal_field(grid)?;
    let ps = phi.sup_norm();
    let mut eps = cfg.epsilon.unwrap_or(T::lit(1e-6) / ps);
    for _ in 0..60 {
        if subsolution_check(&phi.scale(eps), lambda, grid, params) {
            break;
        }
        eps = eps * T::lit(0.5);
    }
    match monotone_run(lambda, grid, params, cfg, &phi, eps) {
        Err(Error::NonFinite { .. }) => monotone_run(lambda, grid, params, cfg, &phi, eps * T::lit(0.5)),
        r => r,
    }
}

fn monotone_run<T: Real>(
    lambda: T,
    grid: &Grid<T>,
    params: &ProblemParams<T>,
    cfg: &MonotoneConfig<T>,
    phi: &ScalarField<T>,
    eps: T,
) -> Result<MonotoneReport<T>> {
    let pb = Problem::new(grid, *params);
    let (q, gm) = (params.q(), params.gamma());
    let mut u: Vec<T> = phi.values().iter().map(|&x| x * eps).collect();
    let margin = T::lit(1.25);
    let mut m_cur = T::zero();
    let mut chol: Option<BandCholesky<T>> = None;
    let mut max_dec = T::zero();
    let mut last = T::infinity();
    let mut prev = T::infinity();
    let mut status = MonotoneStatus::Stalled;
    let mut iters = 0;
    while iters < cfg.max_iter {
        iters += 1;
        let need = match cfg.shift {
            ShiftRule::Zero => T::zero(),
            ShiftRule::MaxDerivative => potential(&u, lambda, params).iter().copied().fold(T::zero(), T::max),
        };
        if !need.is_finite() {
            return Err(Error::NonFinite { index: 0 });
        }
        if chol.is_none() || need > m_cur {
            m_cur = need * margin;
            chol = Some(DiscreteOperator::laplacian(grid).shifted(m_cur).cholesky()?);
        }
        let rhs: Vec<T> = u.iter().map(|&x| m_cur * x + lambda * x.powf(q) + x.powf(gm)).collect();
        let next = chol.as_ref().map(|c| c.solve(&rhs)).unwrap_or_default();
        let mut step = T::zero();
        let mut sup = T::zero();
        for (&a, &b) in u.iter().zip(&next) {
            let d = b - a;
            if -d > max_dec {
                max_dec = -d;
            }
            step = step.max(d.abs());
            sup = sup.max(b.abs());
        }
        debug_assert!(max_dec <= T::lit(1e-9) * sup.max(T::one()), "monotone iteration decreased by {max_dec}");
        u = next;
        prev = last;
        last = step;
        if !sup.is_finite() || sup > cfg.blow_up_cap {
            status = MonotoneStatus::BlowUp;
            break;
        }
        if step <= cfg.tol {
            status = MonotoneStatus::Converged;
            break;
        }
    }
    let mut residual = grid.nrm(&pb.residual_raw(&u, lambda));
    if status == MonotoneStatus::Converged && cfg.polish {
        let start = grid.wrap(u.clone());
        let out = newton_solve(&start, lambda, grid, params, T::epsilon(), 8)?;
        // The remaining distance to the limit is about step/(1 − ρ) with ρ the
        // observed contraction; a Newton result further away than that is a
        // different solution and is rejected.
        let rho = if prev.is_finite() && prev > T::zero() { (last / prev).min(T::lit(0.999_999)) } else { T::lit(0.5) };
        let reach = T::lit(10.0) * last / (T::one() - rho) + T::lit(1e-9) * start.sup_norm();
        let moved = out.u.values().iter().zip(&u).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        if out.residual < residual && moved <= reach {
            u = out.u.into_values();
            residual = out.residual;
        }
    }
    let u = grid.wrap(u);
    let sup_norm = u.sup_norm();
    Ok(MonotoneReport { status, u, iterations: iters, epsilon: eps, sup_norm, last_step: last, max_decrease: max_dec, residual })
}

/// Stable minimal solution at `λ`. Blow-up or stalling is
/// [`Error::Newton`] carrying the no-solution diagnostic.
pub fn minimal_solution<T: Real>(lambda: T, grid: &Grid<T>, params: &ProblemParams<T>, tol: T) -> Result<ScalarField<T>> {
    let cfg = MonotoneConfig { tol, ..MonotoneConfig::default() };
    let r = monotone_iteration(lambda, grid, params, &cfg)?;
    match r.status {
        MonotoneStatus::Converged => Ok(r.u),
        MonotoneStatus::BlowUp => Err(Error::Newton(format!(
            "no solution at λ = {lambda}: monotone iterates blew up (sup-norm {:e} after {} iterations)",
            r.sup_norm.f64(),
            r.iterations
        ))),
        MonotoneStatus::Stalled => Err(Error::Newton(format!(
            "monotone iteration at λ = {lambda} did not settle in {} iterations (last step {:e})",
            r.iterations,
            r.last_step.f64()
        ))),
    }
}

/// Whether `F(u, λ) ≤ 0` at every node, up to `1e-12` of the local stencil
/// magnitude.
pub fn subsolution_check<T: Real>(u: &ScalarField<T>, lambda: T, grid: &Grid<T>, params: &ProblemParams<T>) -> bool {
    if grid.check(u).is_err() || u.values().iter().any(|&x| x < T::zero()) {
        return false;
    }
    let vals = u.values();
    let pb = Problem::new(grid, *params);
    let r = pb.residual_raw(vals, lambda);
    let ih = grid.inv_h2();
    let (q, gm) = (params.q(), params.gamma());
    let slack = T::lit(1e-12);
    (0..grid.len()).all(|i| {
        let x = vals[i];
        let mut mag = x.abs() * T::lit(2.0) * (ih[0] + if grid.dim() == 2 { ih[1] } else { T::zero() });
        for (k, &j) in grid.neighbors(i).iter().enumerate() {
            if j != crate::mesh::OUTSIDE {
                mag += vals[j].abs() * ih[k / 2];
            }
        }
        mag += lambda * x.powf(q) + x.powf(gm);
        r[i] <= slack * mag + T::min_positive_value()
    })
}

#[derive(Debug, Clone, Copy)]
pub struct BranchConfig<T> {
    /// Arclength steps are multiples of a scale set by the φ₁ upper bound on λ*.
    pub ds_init: T,
    pub ds_min: T,
    pub ds_max: T,
    pub max_steps: usize,
    /// Stop once λ falls below this value on a descending leg.
    pub lambda_stop: Option<T>,
    pub sup_norm_max: T,
    pub corrector_tol: T,
    pub corrector_max_iter: usize,
    /// Largest turning angle (radians) between consecutive secants.
    pub max_angle: T,
    pub refine_fold: bool,
    pub stability_tol: T,
    pub fold: FoldConfig<T>,
}

impl<T: Real> Default for BranchConfig<T> {
    fn default() -> Self {
        BranchConfig {
            ds_init: T::lit(1e-2),
            ds_min: T::lit(1e-4),
            ds_max: T::lit(1e-1),
            max_steps: 2000,
            lambda_stop: None,
            sup_norm_max: T::lit(1e4),
            corrector_tol: T::lit(1e-9),
            corrector_max_iter: 12,
            max_angle: T::lit(0.35),
            refine_fold: true,
            stability_tol: T::lit(STABILITY_TOL),
            fold: FoldConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BranchSample<T> {
    pub s: T,
    pub lambda: T,
    pub u: ScalarField<T>,
    pub sup_norm: T,
    pub l2_norm: T,
    pub eig_min: T,
    pub stability: Stability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Turn {
    /// λ increases into the fold and decreases after it.
    Left,
    /// λ decreases into the fold and increases after it.
    Right,
}

#[derive(Debug, Clone)]
pub struct FoldCrossing<T> {
    /// Index of the refined sample in `samples`.
    pub index: usize,
    pub s: T,
    pub lambda: T,
    pub turn: Turn,
    /// Bordered Newton started from the refined point.
    pub certified: Option<FoldPoint<T>>,
}

#[derive(Debug, Clone)]
pub struct BranchCurve<T> {
    pub samples: Vec<BranchSample<T>>,
    pub folds: Vec<FoldCrossing<T>>,
    /// Arclength metric note.
    pub direction: &'static str,
    /// Why tracing stopped early, if it did.
    pub truncated: Option<String>,
    /// Arclength unit actually used.
    pub scale: T,
    pub ds_max: T,
}

impl<T: Real> BranchCurve<T> {
    pub fn fold(&self) -> Option<&FoldCrossing<T>> {
        self.folds.iter().find(|f| f.turn == Turn::Left)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("s,lambda,sup_norm,l2_norm,eig_min,stability\n");
        for p in &self.samples {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                p.s.f64(),
                p.lambda.f64(),
                p.sup_norm.f64(),
                p.l2_norm.f64(),
                p.eig_min.f64(),
                p.stability.as_str()
            );
        }
        s
    }
}

const DIRECTION: &str = "pseudo-arclength in (u, λ) with ds² = ‖du‖² + dλ², λ increasing at the start";

/// Continuation of the solution curve through `(u, λ)`.
struct Tracer<'a, 'g, T> {
    grid: &'g Grid<T>,
    params: &'a ProblemParams<T>,
    pb: Problem<'g, T>,
    chol: BandCholesky<T>,
    cfg: &'a BranchConfig<T>,
}

struct Point<T> {
    u: Vec<T>,
    lambda: T,
}

impl<'a, 'g, T: Real> Tracer<'a, 'g, T> {
    fn dist(&self, a: &Point<T>, b: &Point<T>) -> T {
        let du: Vec<T> = a.u.iter().zip(&b.u).map(|(&x, &y)| x - y).collect();
        let dl = a.lambda - b.lambda;
        (self.grid.dot(&du, &du) + dl * dl).sqrt()
    }

    /// Newton onto `F = 0` within the hyperplane `⟨τ, z − p⟩ = 0`.
    fn correct(&self, p: &Point<T>, tu: &[T], tl: T) -> Option<(Point<T>, usize)> {
        let grid = self.grid;
        let n = grid.len();
        let sw = grid.weight().sqrt();
        let mut u = p.u.clone();
        let mut lambda = p.lambda;
        if u.iter().any(|&x| x <= T::zero()) || !(lambda > T::zero()) {
            return None;
        }
        for it in 0..self.cfg.corrector_max_iter {
            let f = self.pb.residual_raw(&u, lambda);
            let du0: Vec<T> = u.iter().zip(&p.u).map(|(&a, &b)| a - b).collect();
            let g = grid.dot(tu, &du0) + tl * (lambda - p.lambda);
            let fnorm = grid.nrm(&f);
            if !fnorm.is_finite() {
                return None;
            }
            if fnorm <= self.cfg.corrector_tol && g.abs() <= self.cfg.corrector_tol {
                return Some((Point { u, lambda }, it));
            }
            let pot = potential(&u, lambda, self.params);
            let fl: Vec<T> = u.iter().map(|&x| -(x.powf(self.params.q()))).collect();
            let mut b: Vec<T> = f.iter().map(|&x| -x * sw).collect();
            b.push(-g);
            let apply = |x: &[T], y: &mut [T]| {
                let mut lap = vec![T::zero(); n];
                let du: Vec<T> = x[..n].iter().map(|&a| a / sw).collect();
                crate::laplace::laplacian_raw(grid, &du, &mut lap);
                let dl = x[n];
                let mut c = T::zero();
                for i in 0..n {
                    y[i] = (lap[i] - pot[i] * du[i] + fl[i] * dl) * sw;
                    c += tu[i] * x[i];
                }
                y[n] = c * sw + tl * dl;
            };
            let precond = |x: &[T], z: &mut [T]| {
                let z1 = self.chol.solve(&x[..n]);
                z[..n].copy_from_slice(&z1);
                z[n] = x[n];
            };
            let mut x = vec![T::zero(); n + 1];
            let tol = T::lit(1e-11).max(T::epsilon() * T::lit(100.0));
            match gmres(apply, precond, &b, &mut x, tol, 80, 800) {
                Ok(_) => {}
                Err(Error::LinearSolve { residual, .. }) if residual < 1e-6 => {}
                Err(_) => return None,
            }
            for i in 0..n {
                u[i] += x[i] / sw;
            }
            lambda += x[n];
            if u.iter().any(|&v| v <= T::zero()) || !(lambda > T::zero()) {
                return None;
            }
        }
        let f = self.pb.residual_raw(&u, lambda);
        if grid.nrm(&f) <= self.cfg.corrector_tol {
            Some((Point { u, lambda }, self.cfg.corrector_max_iter))
        } else {
            None
        }
    }

    fn eig(&self, pt: &Point<T>, guess: Option<&[T]>) -> Result<(T, ScalarField<T>)> {
        let u = self.grid.wrap(pt.u.clone());
        let op = linearization(self.grid, &u, pt.lambda, self.params)?;
        let opts = EigenOptions { guess: guess.map(|g| g.to_vec()), shift_hint: None, max_iter: None };
        let e = smallest_eigenpair_with(&op, T::lit(1e-10), &opts)?;
        Ok((e.value, e.vector))
    }

    fn sample(&self, s: T, pt: &Point<T>, eig: T) -> BranchSample<T> {
        let u = self.grid.wrap(pt.u.clone());
        BranchSample {
            s,
            lambda: pt.lambda,
            sup_norm: u.sup_norm(),
            l2_norm: self.grid.nrm(&pt.u),
            eig_min: eig,
            stability: Stability::from_eigenvalue(eig, self.cfg.stability_tol),
            u,
        }
    }
}

/// Pseudo-arclength continuation from a converged solution `(u, λ)`, first in
/// the direction of increasing λ. Steps are `ds·K` with `K` the φ₁ upper
/// bound on λ*. Sign changes of the principal eigenvalue are refined by
/// bisection along the secant and certified with the bordered Newton.
pub fn continue_branch<T: Real>(
    u0: &ScalarField<T>,
    lambda0: T,
    grid: &Grid<T>,
    params: &ProblemParams<T>,
    cfg: &BranchConfig<T>,
) -> Result<BranchCurve<T>> {
    grid.check(u0)?;
    if let Some((index, value)) = u0.first_nonpositive() {
        return Err(Error::NonPositive { index, value: value.f64() });
    }
    let pb = Problem::new(grid, *params);
    let r0 = grid.nrm(&pb.residual_raw(u0.values(), lambda0));
    if r0 > T::lit(1e-6) {
        return Err(Error::Newton(format!("start is not a solution: ‖F‖ = {r0:e}")));
    }
    let scale = upper_bound_via_phi1(grid, params)?;
    let tr = Tracer { grid, params, pb, chol: DiscreteOperator::laplacian(grid).cholesky()?, cfg };
    let ds_min = cfg.ds_min * scale;
    let ds_max = cfg.ds_max * scale;
    let mut ds = (cfg.ds_init * scale).clamp(ds_min, ds_max);

    // initial tangent: F_u du/dλ = u^q
    let start = {
        let u = u0.values().to_vec();
        match tr.correct(&Point { u: u.clone(), lambda: lambda0 }, &vec![T::zero(); u.len()], T::one()) {
            Some((p, _)) => p,
            None => Point { u, lambda: lambda0 },
        }
    };
    let op = linearization(grid, &grid.wrap(start.u.clone()), start.lambda, params)?;
    let mut dudl: Vec<T> = start.u.iter().map(|&x| x.powf(params.q())).collect();
    op.lu()?.solve_in_place(&mut dudl);
    let tn = (grid.dot(&dudl, &dudl) + T::one()).sqrt();
    let mut tu: Vec<T> = dudl.iter().map(|&x| x / tn).collect();
    let mut tl = T::one() / tn;

    let (e0, mut evec) = tr.eig(&start, None)?;
    let mut samples = vec![tr.sample(T::zero(), &start, e0)];
    let mut folds: Vec<FoldCrossing<T>> = Vec::new();
    let mut cur = start;
    let mut s = T::zero();
    let mut easy = 0;
    let mut truncated = None;
    let cos_max = cfg.max_angle.cos();

    for _ in 0..cfg.max_steps {
        let mut accepted = None;
        while ds >= ds_min {
            let pred = Point {
                u: cur.u.iter().zip(&tu).map(|(&a, &t)| a + ds * t).collect(),
                lambda: cur.lambda + ds * tl,
            };
            if let Some((p, it)) = tr.correct(&pred, &tu, tl) {
                let chord = tr.dist(&p, &cur);
                let nu: Vec<T> = p.u.iter().zip(&cur.u).map(|(&a, &b)| (a - b) / chord).collect();
                let nl = (p.lambda - cur.lambda) / chord;
                let cosang = grid.dot(&nu, &tu) + nl * tl;
                if chord <= ds_max && chord <= T::lit(1.5) * ds && cosang >= cos_max {
                    accepted = Some((p, it, chord, nu, nl));
                    break;
                }
            }
            ds = ds * T::lit(0.5);
            easy = 0;
        }
        let Some((p, it, chord, nu, nl)) = accepted else {
            truncated = Some(format!("corrector failed at λ = {:e} with step below {:e}", cur.lambda.f64(), ds_min.f64()));
            break;
        };
        let (e, v) = tr.eig(&p, Some(evec.values()))?;
        let prev_e = samples.last().map(|x| x.eig_min).unwrap_or(e);
        let prev_tl = tl;
        let s_new = s + chord;

        if cfg.refine_fold && prev_e.signum() != e.signum() && prev_e != T::zero() {
            let crossing = refine_crossing(&tr, &cur, &p, prev_e, evec.values())?;
            let (fp, fe, fv, sigma) = crossing;
            let turn = if prev_tl > T::zero() { Turn::Left } else { Turn::Right };
            let certified = {
                let uf = grid.wrap(fp.u.clone());
                let vf = if fv.values().iter().copied().sum::<T>() < T::zero() { fv.scale(-T::one()) } else { fv.clone() };
                fold_newton_with(&uf, &vf, fp.lambda, grid, params, &cfg.fold).ok()
            };
            samples.push(tr.sample(s + sigma, &fp, fe));
            folds.push(FoldCrossing { index: samples.len() - 1, s: s + sigma, lambda: fp.lambda, turn, certified });
        }
        s = s_new;
        samples.push(tr.sample(s, &p, e));
        evec = v;
        tu = nu;
        tl = nl;
        let sup = p.u.iter().copied().fold(T::zero(), T::max);
        cur = p;
        if it <= 3 {
            easy += 1;
            if easy >= 4 {
                ds = (ds * T::lit(2.0)).min(ds_max);
                easy = 0;
            }
        } else {
            easy = 0;
        }
        if sup > cfg.sup_norm_max {
            break;
        }
        let stop = cfg.lambda_stop.unwrap_or(lambda0);
        if tl < T::zero() && cur.lambda < stop {
            break;
        }
    }
    if samples.len() > 1 && truncated.is_none() && samples.len() >= cfg.max_steps {
        truncated = Some(format!("step cap {} reached", cfg.max_steps));
    }
    Ok(BranchCurve { samples, folds, direction: DIRECTION, truncated, scale, ds_max })
}

type Crossing<T> = (Point<T>, T, ScalarField<T>, T);

/// Bisection on the sign of the principal eigenvalue along the secant from
/// `a` to `b`, each trial corrected orthogonally to the secant.
fn refine_crossing<T: Real>(tr: &Tracer<'_, '_, T>, a: &Point<T>, b: &Point<T>, ea: T, guess: &[T]) -> Result<Crossing<T>> {
    let len = tr.dist(a, b);
    let tu: Vec<T> = b.u.iter().zip(&a.u).map(|(&x, &y)| (x - y) / len).collect();
    let tl = (b.lambda - a.lambda) / len;
    let (mut lo, mut hi) = (T::zero(), len);
    let mut best: Option<Crossing<T>> = None;
    let mut g = guess.to_vec();
    for _ in 0..60 {
        let mid = (lo + hi) * T::lit(0.5);
        let pred = Point { u: a.u.iter().zip(&tu).map(|(&x, &t)| x + mid * t).collect(), lambda: a.lambda + mid * tl };
        let Some((p, _)) = tr.correct(&pred, &tu, tl) else {
            break;
        };
        let (e, v) = tr.eig(&p, Some(&g))?;
        g = v.values().to_vec();
        if e.signum() == ea.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        best = Some((p, e, v, mid));
        if hi - lo <= T::lit(1e-9) * len || e == T::zero() {
            break;
        }
    }
    best.ok_or_else(|| Error::Newton("corrector failed during fold refinement".into()))
}

#[derive(Debug, Clone)]
pub struct CrossingSolution<T> {
    pub s: T,
    pub sup_norm: T,
    pub l2_norm: T,
    pub eig_min: T,
    pub stability: Stability,
}

#[derive(Debug, Clone)]
pub struct CertificateReport<T> {
    pub lambda: T,
    pub count: usize,
    pub solutions: Vec<CrossingSolution<T>>,
    /// Smallest L² distance in norm between reported solutions.
    pub separation: Option<T>,
}

/// Relative distance in λ from a refined fold within which the level counts
/// as tangent when the samples miss it.
pub const TANGENCY_LEVEL: f64 = 1e-8;

/// Crossings of the sampled curve with the level `λ`, linearly interpolated.
/// Crossings whose L² norms differ by less than `tol` are merged (tangency).
pub fn two_solution_certificate<T: Real>(lambda: T, curve: &BranchCurve<T>, tol: T) -> CertificateReport<T> {
    let mut sols: Vec<CrossingSolution<T>> = Vec::new();
    let lerp = |a: T, b: T, t: T| a + (b - a) * t;
    for w in curve.samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let (da, db) = (a.lambda - lambda, b.lambda - lambda);
        if da * db > T::zero() || (da == T::zero() && db == T::zero()) {
            continue;
        }
        let t = if da == db { T::zero() } else { da / (da - db) };
        let eig = lerp(a.eig_min, b.eig_min, t);
        let c = CrossingSolution {
            s: lerp(a.s, b.s, t),
            sup_norm: lerp(a.sup_norm, b.sup_norm, t),
            l2_norm: lerp(a.l2_norm, b.l2_norm, t),
            eig_min: eig,
            stability: Stability::from_eigenvalue(eig, T::lit(STABILITY_TOL)),
        };
        if let Some(last) = sols.last_mut() {
            if (last.l2_norm - c.l2_norm).abs() < tol {
                // keep the point nearer the tangency
                if c.eig_min.abs() < last.eig_min.abs() {
                    *last = c;
                }
                continue;
            }
        }
        sols.push(c);
    }
    if sols.is_empty() {
        let level = T::lit(TANGENCY_LEVEL) * lambda.abs();
        if let Some(f) = curve.folds.iter().find(|f| (f.lambda - lambda).abs() <= level) {
            let p = &curve.samples[f.index];
            sols.push(CrossingSolution {
                s: p.s,
                sup_norm: p.sup_norm,
                l2_norm: p.l2_norm,
                eig_min: p.eig_min,
                stability: Stability::from_eigenvalue(p.eig_min, T::lit(STABILITY_TOL)),
            });
        }
    }
    let mut separation: Option<T> = None;
    for i in 0..sols.len() {
        for j in i + 1..sols.len() {
            let d = (sols[i].l2_norm - sols[j].l2_norm).abs();
            separation = Some(separation.map_or(d, |x| x.min(d)));
        }
    }
    CertificateReport { lambda, count: sols.len(), solutions: sols, separation }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize) -> (Grid<f64>, ProblemParams<f64>) {
        (Grid::interval(1.0, n).unwrap(), ProblemParams::new(0.5, 3.0).unwrap())
    }

    #[test]
    fn subsolutions() {
        let (g, p) = setup(64);
        let phi = principal_field(&g).unwrap();
        let phi = phi.scale(1.0 / phi.sup_norm());
        assert!(subsolution_check(&phi.scale(1e-6), 4.5, &g, &p));
        // amplitude one: the linear part dominates at the peak
        assert!(!subsolution_check(&phi, 4.5, &g, &p));
        let u = minimal_solution(4.5, &g, &p, 1e-12).unwrap();
        assert!(subsolution_check(&u, 4.5, &g, &p));
        assert!(!subsolution_check(&g.sample(|x, _| x - 0.5), 4.5, &g, &p));
    }

    #[test]
    fn monotone_report() {
        let (g, p) = setup(64);
        let r = monotone_iteration(6.0, &g, &p, &MonotoneConfig::default()).unwrap();
        assert_eq!(r.status, MonotoneStatus::Converged);
        assert_eq!(r.max_decrease, 0.0);
        assert!(r.residual < 1e-9);
        let m = MonotoneConfig { shift: ShiftRule::MaxDerivative, tol: 1e-9, ..MonotoneConfig::default() };
        let s = monotone_iteration(6.0, &g, &p, &m).unwrap();
        assert_eq!(s.status, MonotoneStatus::Converged);
        assert!(s.iterations > r.iterations);
        let d = s.u.values().iter().zip(r.u.values()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(d < 1e-8);
        let b = monotone_iteration(12.0, &g, &p, &MonotoneConfig::default()).unwrap();
        assert_eq!(b.status, MonotoneStatus::BlowUp);
        assert!(b.sup_norm > 1e8);
        assert!(minimal_solution(12.0, &g, &p, 1e-10).is_err());
    }

    fn parabola() -> BranchCurve<f64> {
        let g = Grid::<f64>::interval(1.0, 4).unwrap();
        let samples = (0..=20)
            .map(|k| {
                let s = k as f64 * 0.1;
                let e = 1.0 - s;
                BranchSample {
                    s,
                    lambda: 1.0 - (s - 1.0) * (s - 1.0),
                    u: g.constant(s + 0.1),
                    sup_norm: s + 0.1,
                    l2_norm: s + 0.1,
                    eig_min: e,
                    stability: Stability::from_eigenvalue(e, 1e-6),
                }
            })
            .collect();
        BranchCurve {
            samples,
            folds: vec![FoldCrossing { index: 10, s: 1.0, lambda: 1.0, turn: Turn::Left, certified: None }],
            direction: DIRECTION,
            truncated: None,
            scale: 1.0,
            ds_max: 0.1,
        }
    }

    #[test]
    fn certificate_counts() {
        let c = parabola();
        let r = two_solution_certificate(0.75, &c, 1e-3);
        assert_eq!(r.count, 2);
        assert!((r.solutions[0].s - 0.5).abs() < 0.01 && (r.solutions[1].s - 1.5).abs() < 0.01);
        assert_eq!(r.solutions[0].stability, Stability::Stable);
        assert_eq!(r.solutions[1].stability, Stability::Unstable);
        assert!(r.separation.unwrap() > 0.9);
        let t = two_solution_certificate(1.0, &c, 1e-3);
        assert_eq!(t.count, 1);
        assert_eq!(t.solutions[0].stability, Stability::Marginal);
        assert_eq!(two_solution_certificate(1.0 + 1e-10, &c, 1e-3).count, 1);
        assert_eq!(two_solution_certificate(1.1, &c, 1e-3).count, 0);
    }

    #[test]
    fn csv_layout() {
        let csv = parabola().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("s,lambda,sup_norm,l2_norm,eig_min,stability"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 6);
        assert_eq!(first[0].parse::<f64>().unwrap(), 0.0);
        assert_eq!(first[5], "stable");
        assert_eq!(csv.lines().count(), 22);
        assert!(!csv.contains('\r'));
    }
}
