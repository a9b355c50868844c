//! Discretization-free fold values: the 1D time map and radial shooting on a
//! disk.

use std::collections::BinaryHeap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::quotient::ProblemParams;
use crate::real::Real;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Gauss–Kronrod 7/15 rule on `[a, b]`: (Kronrod value, |K − G|).
fn gk15<T: Real>(f: &mut impl FnMut(T) -> T, a: T, b: T) -> (T, T) {
    let c = (a + b) * T::lit(0.5);
    let h = (b - a) * T::lit(0.5);
    let fc = f(c);
    let mut k = fc * T::lit(WGK[7]);
    let mut g = fc * T::lit(WG[3]);
    for j in 0..7 {
        let x = h * T::lit(XGK[j]);
        let s = f(c - x) + f(c + x);
        k += s * T::lit(WGK[j]);
        if j % 2 == 1 {
            g += s * T::lit(WG[j / 2]);
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Piece<T> {
    a: T,
    b: T,
    value: T,
    err: T,
}

impl<T: PartialOrd> PartialEq for Piece<T> {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl<T: PartialOrd> Eq for Piece<T> {}
impl<T: PartialOrd> PartialOrd for Piece<T> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: PartialOrd> Ord for Piece<T> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.partial_cmp(&o.err).unwrap_or(std::cmp::Ordering::Equal)
    }
}

/// Globally adaptive G7K15 quadrature: bisects the piece with the largest
/// error estimate until the summed estimate is below `tol·max(1, |I|)`.
pub fn integrate<T: Real>(mut f: impl FnMut(T) -> T, a: T, b: T, tol: T) -> Result<T> {
    let max_pieces = 4000;
    let (v, e) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, err: e });
    let (mut total, mut err) = (v, e);
    let floor = T::epsilon() * T::lit(50.0);
    while err > tol.max(floor) * total.abs().max(T::one()) {
        if heap.len() >= max_pieces {
            return Err(Error::Quadrature { estimate: total.f64(), error: err.f64() });
        }
        let Some(p) = heap.pop() else { break };
        let m = (p.a + p.b) * T::lit(0.5);
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        if !(v1 + v2).is_finite() {
            return Err(Error::Quadrature { estimate: f64::NAN, error: f64::NAN });
        }
        heap.push(Piece { a: p.a, b: m, value: v1, err: e1 });
        heap.push(Piece { a: m, b: p.b, value: v2, err: e2 });
        // resum to keep rounding from accumulating in the running totals
        total = heap.iter().map(|p| p.value).sum();
        err = heap.iter().map(|p| p.err).sum();
    }
    Ok(total)
}

/// `1 − sin(θ)^p` for `θ = π/2 − 2τ`, accurate as `τ → 0`.
fn one_minus_sin_pow<T: Real>(d: T, p: T) -> T {
    // 1 − sin θ = 2 sin²(π/4 − θ/2) = 2d²
    -(p * (-(d * d + d * d)).ln_1p()).exp_m1()
}

/// Half-length `T(ρ, λ)` of a positive symmetric solution of
/// `−u″ = λu^q + u^γ` with maximum `ρ`, as `∫₀^{π/2}` after `s = ρ sin θ`.
pub fn time_map<T: Real>(rho: T, lambda: T, params: &ProblemParams<T>, quad_tol: T) -> Result<T> {
    if !(rho > T::zero()) || !(lambda >= T::zero()) {
        return Err(Error::InvalidParams(format!("time map needs ρ > 0 and λ ≥ 0, got ρ = {rho}, λ = {lambda}")));
    }
    let (q1, g1) = (params.q() + T::one(), params.gamma() + T::one());
    let a = lambda * rho.powf(q1) / q1;
    let b = rho.powf(g1) / g1;
    let two = T::lit(2.0);
    let quarter = T::FRAC_PI_4();
    let limit = rho / (lambda * rho.powf(q1) + rho.powf(g1)).sqrt();
    let f = |theta: T| {
        let d = (quarter - theta / two).sin();
        if d == T::zero() {
            return limit;
        }
        let cos = two * d * (quarter - theta / two).cos();
        let gap = a * one_minus_sin_pow(d, q1) + b * one_minus_sin_pow(d, g1);
        rho * cos / (two * gap).sqrt()
    };
    integrate(f, T::zero(), T::FRAC_PI_2(), quad_tol)
}

#[derive(Debug, Clone)]
pub struct TimeMapTable<T> {
    /// `(ρ, λ, T)` over the ρ scan at `λ = lambda_star_oracle`.
    pub rows: Vec<(T, T, T)>,
    pub lambda_star_oracle: T,
    pub rho_at_fold: T,
}

impl<T: Real> TimeMapTable<T> {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rho,lambda,T\n");
        for (r, l, t) in &self.rows {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", r.f64(), l.f64(), t.f64());
        }
        s
    }
}

/// Maximum of `g` over `[lo, hi]` on a log scale: a coarse scan followed by
/// golden-section refinement. Returns `(argmax, max)`.
fn log_max<T: Real>(mut g: impl FnMut(T) -> Result<T>, lo: T, hi: T, samples: usize) -> Result<(T, T)> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let step = (lhi - llo) / T::usize(samples - 1);
    let mut vals = Vec::with_capacity(samples);
    for k in 0..samples {
        vals.push(g((llo + step * T::usize(k)).exp())?);
    }
    let k = (0..samples).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
    let mut a = llo + step * T::usize(k.saturating_sub(1));
    let mut b = llo + step * T::usize((k + 1).min(samples - 1));
    let r = T::lit(0.618_033_988_749_894_9);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = g(x1.exp())?;
    let mut f2 = g(x2.exp())?;
    let stop = T::lit(1e-9).max(T::epsilon().sqrt() * T::lit(4.0));
    while b - a > stop {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = g(x2.exp())?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = g(x1.exp())?;
        }
    }
    let best = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    let best = if vals[k] > best.1 { ((llo + step * T::usize(k)), vals[k]) } else { best };
    Ok((best.0.exp(), best.1))
}

/// Right end of the ρ scan: grown geometrically until `g(ρ) < target` there
/// and past the interior maximum.
fn scan_end<T: Real>(mut g: impl FnMut(T) -> Result<T>, lo: T, target: T) -> Result<T> {
    let mut hi = T::one().max(lo * T::lit(10.0));
    let mut prev = g(lo)?;
    for _ in 0..200 {
        let v = g(hi)?;
        if v < target && v < prev {
            return Ok(hi);
        }
        prev = v;
        hi = hi * T::lit(2.0);
    }
    Err(Error::Bracket("no ρ with T(ρ) below L/2 up to the scan cap".into()))
}

const RHO_MIN: f64 = 1e-4;
const SCAN: usize = 81;

/// Maximum over ρ of the time map at `λ`: `(ρ_max, T_max)`.
pub fn time_map_max<T: Real>(lambda: T, half: T, params: &ProblemParams<T>, quad_tol: T) -> Result<(T, T)> {
    let g = |r: T| time_map(r, lambda, params, quad_tol);
    let lo = T::lit(RHO_MIN);
    let hi = scan_end(g, lo, half)?;
    log_max(g, lo, hi, SCAN)
}

/// Roots in ρ of `T(ρ, λ) = L/2` on the scan range.
pub fn time_map_roots<T: Real>(length: T, lambda: T, params: &ProblemParams<T>, quad_tol: T) -> Result<Vec<T>> {
    let half = length * T::lit(0.5);
    let g = |r: T| time_map(r, lambda, params, quad_tol).map(|t| t - half);
    let lo = T::lit(RHO_MIN);
    let hi = scan_end(|r| time_map(r, lambda, params, quad_tol), lo, half)?;
    sign_change_roots(g, lo, hi, 400)
}

fn sign_change_roots<T: Real>(mut g: impl FnMut(T) -> Result<T>, lo: T, hi: T, samples: usize) -> Result<Vec<T>> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let step = (lhi - llo) / T::usize(samples - 1);
    let mut roots = Vec::new();
    let mut xa = llo;
    let mut fa = g(lo)?;
    for k in 1..samples {
        let xb = llo + step * T::usize(k);
        let fb = g(xb.exp())?;
        if fa * fb < T::zero() {
            let (mut a, mut b, mut va) = (xa, xb, fa);
            for _ in 0..100 {
                let m = (a + b) * T::lit(0.5);
                let vm = g(m.exp())?;
                if vm * va > T::zero() {
                    a = m;
                    va = vm;
                } else {
                    b = m;
                }
                if b - a <= T::epsilon() * T::lit(8.0) {
                    break;
                }
            }
            roots.push(((a + b) * T::lit(0.5)).exp());
        }
        xa = xb;
        fa = fb;
    }
    Ok(roots)
}

/// Bisection on λ for the largest value where `max_ρ S(ρ, λ) ≥ target`,
/// `S` decreasing in λ.
fn bisect_lambda<T: Real>(mut m: impl FnMut(T) -> Result<(T, T)>, target: T, tol: T) -> Result<(T, T)> {
    let mut lo = T::one();
    let mut hi = T::one();
    let mut n = 0;
    while m(lo)?.1 < target {
        lo = lo * T::lit(0.5);
        n += 1;
        if n > 200 {
            return Err(Error::Bracket("no λ > 0 admits a solution".into()));
        }
    }
    n = 0;
    while m(hi)?.1 >= target {
        hi = hi * T::lit(2.0);
        n += 1;
        if n > 200 {
            return Err(Error::Bracket("solutions persist at every tested λ".into()));
        }
    }
    if lo == hi {
        lo = hi * T::lit(0.5);
    }
    while hi - lo > tol * hi {
        let mid = (lo + hi) * T::lit(0.5);
        if m(mid)?.1 >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = (lo + hi) * T::lit(0.5);
    Ok((lam, m(lam)?.0))
}

/// Fold value on the interval `(0, L)`: bisection on λ for the level where
/// the maximum of the time map over ρ equals `L/2`.
pub fn lambda_star_1d<T: Real>(length: T, params: &ProblemParams<T>, tol: T) -> Result<TimeMapTable<T>> {
    lambda_star_1d_with(length, params, tol, T::lit(1e-13))
}

pub fn lambda_star_1d_with<T: Real>(length: T, params: &ProblemParams<T>, tol: T, quad_tol: T) -> Result<TimeMapTable<T>> {
    if !(length > T::zero()) {
        return Err(Error::InvalidParams(format!("interval length must be positive, got {length}")));
    }
    let half = length * T::lit(0.5);
    let (lam, rho) = bisect_lambda(|l| time_map_max(l, half, params, quad_tol), half, tol)?;
    let lo = T::lit(RHO_MIN);
    let hi = scan_end(|r| time_map(r, lam, params, quad_tol), lo, half)?;
    let (llo, lhi) = (lo.ln(), hi.ln());
    let rows = (0..SCAN)
        .map(|k| {
            let r = (llo + (lhi - llo) * T::usize(k) / T::usize(SCAN - 1)).exp();
            time_map(r, lam, params, quad_tol).map(|t| (r, lam, t))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TimeMapTable { rows, lambda_star_oracle: lam, rho_at_fold: rho })
}

/// One Dormand–Prince 5(4) step for `y = (u, u′)` of the radial equation.
fn dopri_step<T: Real>(r: T, y: [T; 2], h: T, rhs: &impl Fn(T, [T; 2]) -> [T; 2]) -> ([T; 2], [T; 2]) {
    let c = |x: f64| T::lit(x);
    let add = |y: [T; 2], ks: &[([T; 2], f64)]| {
        let mut o = y;
        for (k, a) in ks {
            o[0] += h * c(*a) * k[0];
            o[1] += h * c(*a) * k[1];
        }
        o
    };
    let k1 = rhs(r, y);
    let k2 = rhs(r + h * c(0.2), add(y, &[(k1, 0.2)]));
    let k3 = rhs(r + h * c(0.3), add(y, &[(k1, 3.0 / 40.0), (k2, 9.0 / 40.0)]));
    let k4 = rhs(r + h * c(0.8), add(y, &[(k1, 44.0 / 45.0), (k2, -56.0 / 15.0), (k3, 32.0 / 9.0)]));
    let k5 = rhs(
        r + h * c(8.0 / 9.0),
        add(y, &[(k1, 19372.0 / 6561.0), (k2, -25360.0 / 2187.0), (k3, 64448.0 / 6561.0), (k4, -212.0 / 729.0)]),
    );
    let k6 = rhs(
        r + h,
        add(y, &[(k1, 9017.0 / 3168.0), (k2, -355.0 / 33.0), (k3, 46732.0 / 5247.0), (k4, 49.0 / 176.0), (k5, -5103.0 / 18656.0)]),
    );
    let y5 = add(y, &[(k1, 35.0 / 384.0), (k3, 500.0 / 1113.0), (k4, 125.0 / 192.0), (k5, -2187.0 / 6784.0), (k6, 11.0 / 84.0)]);
    let k7 = rhs(r + h, y5);
    let e = [
        (71.0 / 57600.0, 0),
        (-71.0 / 16695.0, 2),
        (71.0 / 1920.0, 3),
        (-17253.0 / 339200.0, 4),
        (22.0 / 525.0, 5),
        (-1.0 / 40.0, 6),
    ];
    let ks = [k1, k2, k3, k4, k5, k6, k7];
    let mut err = [T::zero(); 2];
    for (comp, out) in err.iter_mut().enumerate() {
        *out = (e.iter().map(|&(w, i)| c(w) * ks[i][comp]).sum::<T>() * h).abs();
    }
    (y5, err)
}

/// First zero `r₀(ρ, λ)` of the radial solution with `u(0) = ρ`, `u′(0) = 0`.
pub fn first_zero<T: Real>(rho: T, lambda: T, params: &ProblemParams<T>, tol: T) -> Result<T> {
    let (q, gm) = (params.q(), params.gamma());
    let src = move |u: T| {
        let p = u.max(T::zero());
        lambda * p.powf(q) + p.powf(gm)
    };
    let rhs = move |r: T, y: [T; 2]| [y[1], -src(y[0]) - y[1] / r];
    let f0 = src(rho);
    // length on which u halves, from the series
    let scale = (rho / f0).sqrt();
    let mut r = scale * T::lit(1e-4);
    let mut y = [rho - f0 * r * r / T::lit(4.0), -f0 * r / T::lit(2.0)];
    let mut h = r;
    let rtol = tol.max(T::epsilon() * T::lit(100.0));
    for _ in 0..200_000 {
        let (yn, err) = dopri_step(r, y, h, &rhs);
        let ratio = (err[0] / (rtol * rho)).max(err[1] * scale / (rtol * rho));
        if ratio <= T::one() {
            if yn[0] <= T::zero() {
                // bisection on the step length from the accepted state
                let (mut a, mut b) = (T::zero(), h);
                for _ in 0..200 {
                    let m = (a + b) * T::lit(0.5);
                    let (ym, _) = dopri_step(r, y, m, &rhs);
                    if ym[0] > T::zero() {
                        a = m;
                    } else {
                        b = m;
                    }
                    if b - a <= T::epsilon() * r * T::lit(4.0) {
                        break;
                    }
                }
                return Ok(r + (a + b) * T::lit(0.5));
            }
            if yn[1] >= T::zero() {
                return Err(Error::Ode(format!("radial solution turned before reaching zero (ρ = {rho}, λ = {lambda})")));
            }
            r += h;
            y = yn;
        }
        let fac = if ratio == T::zero() { T::lit(5.0) } else { (T::lit(0.9) * ratio.powf(T::lit(-0.2))).min(T::lit(5.0)).max(T::lit(0.2)) };
        h = h * fac;
    }
    Err(Error::Ode("step limit reached".into()))
}

/// Fold value on the disk of the given radius by radial shooting: the
/// largest λ at which `max_ρ r₀(ρ, λ) ≥ R`.
pub fn lambda_star_disk<T: Real>(radius: T, params: &ProblemParams<T>, tol: T) -> Result<T> {
    if !(radius > T::zero()) {
        return Err(Error::InvalidParams(format!("radius must be positive, got {radius}")));
    }
    let ode_tol = T::lit(1e-12);
    let m = |l: T| {
        let g = |r: T| first_zero(r, l, params, ode_tol);
        let lo = T::lit(RHO_MIN);
        let hi = scan_end(g, lo, radius)?;
        log_max(g, lo, hi, SCAN)
    };
    Ok(bisect_lambda(m, radius, tol)?.0)
}

/// `(ρ, r₀)` samples at fixed λ for inspecting the fold in the radial problem.
pub fn disk_scan<T: Real>(lambda: T, params: &ProblemParams<T>, rho: &[T]) -> Result<Vec<(T, T)>> {
    rho.iter().map(|&r| first_zero(r, lambda, params, T::lit(1e-12)).map(|z| (r, z))).collect()
}
