//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use fqfold::branches::{continue_branch, minimal_solution, two_solution_certificate, BranchConfig};
use fqfold::fold::{classify_stability, fold_newton, nonexistence_probe, ProbeConfig, Stability};
use fqfold::oracle::lambda_star_1d;
use fqfold::saddle::{random_positive_field, saddle_multistart, saddle_search, upper_bound_via_phi1, SaddleConfig};
use fqfold::{Field64, Grid64, Params64, Problem, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// λ* on (0, 1) for q = 0.5, γ = 3 from the time-map oracle.
const LAMBDA_STAR_ORACLE: f64 = 9.045_635_364_563_7;

type Outcome = (bool, String);

fn params() -> Params64 {
    Params64::new(0.5, 3.0).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn unit_square(res: usize) -> Grid64 {
    Grid64::masked_2d(&Shape::Rectangle { width: 1.0, height: 1.0 }, res).unwrap()
}

fn c1_oracle_1d() -> Outcome {
    let t = Instant::now();
    let p = params();
    let tab = lambda_star_1d(1.0, &p, 1e-13).unwrap();
    let g = Grid64::interval(1.0, 512).unwrap();
    let sr = saddle_search(&g, &p, &SaddleConfig::default()).unwrap();
    let e = rel(sr.lambda_star, LAMBDA_STAR_ORACLE);
    let drift = rel(tab.lambda_star_oracle, LAMBDA_STAR_ORACLE);
    let dt = t.elapsed();
    (
        sr.converged && e <= 1e-3 && drift <= 1e-11 && dt <= Duration::from_secs(60),
        format!(
            "saddle {:.10} vs oracle {:.12} (live {:.12}): rel {:.2e} <= 1e-3, {:.2?} <= 60 s",
            sr.lambda_star, LAMBDA_STAR_ORACLE, tab.lambda_star_oracle, e, dt
        ),
    )
}

struct Square {
    saddle: f64,
    fold: fqfold::fold::FoldPoint<f64>,
    branch: Option<f64>,
    elapsed: Duration,
}

fn square_run() -> Square {
    let t = Instant::now();
    let p = params();
    let g = unit_square(64);
    let sr = saddle_search(&g, &p, &SaddleConfig::default()).unwrap();
    let fold = fold_newton(&sr.u_star, &sr.v_star, sr.lambda_star, &g, &p, 1e-9).unwrap();
    let l0 = 0.25 * sr.lambda_star;
    let u0 = minimal_solution(l0, &g, &p, 1e-11).unwrap();
    let curve = continue_branch(&u0, l0, &g, &p, &BranchConfig::default()).unwrap();
    Square { saddle: sr.lambda_star, fold, branch: curve.fold().map(|f| f.lambda), elapsed: t.elapsed() }
}

fn c2_three_methods(sq: &Square) -> Outcome {
    let Some(b) = sq.branch else {
        return (false, "continuation found no fold".into());
    };
    let vals = [sq.saddle, sq.fold.lambda_star, b];
    let hi = vals.iter().copied().fold(f64::MIN, f64::max);
    let lo = vals.iter().copied().fold(f64::MAX, f64::min);
    let spread = (hi - lo) / hi;
    (
        sq.fold.converged && spread <= 1e-6 && sq.elapsed <= Duration::from_secs(300),
        format!(
            "saddle {:.12}, fold {:.12}, continuation {:.12}: spread {:.2e} <= 1e-6, {:.2?} <= 5 min",
            vals[0], vals[1], vals[2], spread, sq.elapsed
        ),
    )
}

fn c3_certificate(sq: &Square) -> Outcome {
    let p = params();
    let g = Grid64::interval(1.0, 256).unwrap();
    let sr = saddle_search(&g, &p, &SaddleConfig { tol: 1e-3, ..Default::default() }).unwrap();
    let f1 = fold_newton(&sr.u_star, &sr.v_star, sr.lambda_star, &g, &p, 1e-9).unwrap();
    let mut ok = true;
    let mut msg = Vec::new();
    for (name, f) in [("1D n=256", &f1), ("square 64", &sq.fold)] {
        let ratio = f.eig_min.abs() / f.eig_second;
        let sign = f.v_star.min() * f.v_star.max() > 0.0;
        ok &= f.converged && ratio <= 1e-8 && sign;
        msg.push(format!("{name}: |eig_min|/eig_2 = {ratio:.2e}, v* sign {}", if sign { "constant" } else { "mixed" }));
    }
    (ok, msg.join("; "))
}

fn c4_two_branches() -> Outcome {
    let p = params();
    let g = Grid64::interval(1.0, 256).unwrap();
    let sr = saddle_search(&g, &p, &SaddleConfig::default()).unwrap();
    let ls = sr.lambda_star;
    let l0 = 0.25 * ls;
    let u0 = minimal_solution(l0, &g, &p, 1e-11).unwrap();
    let curve = continue_branch(&u0, l0, &g, &p, &BranchConfig::default()).unwrap();
    let below = two_solution_certificate(0.95 * ls, &curve, 1e-3);
    let above = two_solution_certificate(1.05 * ls, &curve, 1e-3);
    let probe = nonexistence_probe(1.05 * ls, &g, &p, &ProbeConfig::default()).unwrap();
    let flags: Vec<Stability> = below.solutions.iter().map(|s| s.stability).collect();
    let ok = below.count == 2 && flags == [Stability::Stable, Stability::Unstable] && above.count == 0 && !probe.found;
    (
        ok,
        format!(
            "0.95λ*: {} solutions {:?}; 1.05λ*: certificate {}, probe found {}",
            below.count, flags, above.count, probe.found
        ),
    )
}

fn c5_minimal_branch() -> Outcome {
    let p = params();
    let g = Grid64::interval(1.0, 256).unwrap();
    let ls = saddle_search(&g, &p, &SaddleConfig::default()).unwrap().lambda_star;
    let mut worst = f64::INFINITY;
    let mut all = true;
    for k in 0..10 {
        let lam = (0.05 + 0.1 * k as f64) * ls;
        match minimal_solution(lam, &g, &p, 1e-11) {
            Ok(u) => {
                let (l1, _) = classify_stability(&u, lam, &g, &p).unwrap();
                worst = worst.min(l1);
                all &= l1 >= -1e-10;
            }
            Err(_) => all = false,
        }
    }
    (all, format!("λ = 0.05λ*..0.95λ* (10 values): all converged {all}, min λ₁ = {worst:.4e} >= -1e-10"))
}

fn weighted_lambda(pb: &Problem<'_, f64>, u: &Field64, v: &Field64) -> f64 {
    pb.lambda_scaled(u, v).unwrap().value
}

fn random_field(g: &Grid64, rng: &mut ChaCha8Rng) -> Field64 {
    let s = 10f64.powf(rng.gen_range(-2.0..2.0));
    random_positive_field(g, rng).unwrap().scale(s)
}

fn c6_quasi_structure() -> Outcome {
    let p = params();
    let g = Grid64::interval(1.0, 64).unwrap();
    let pb = Problem::new(&g, p);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut convex_fail, mut concave_fail, mut ray_fail) = (0, 0, 0);
    let mut margin = f64::INFINITY;
    for _ in 0..1000 {
        let (u, v1, v2) = (random_field(&g, &mut rng), random_field(&g, &mut rng), random_field(&g, &mut rng));
        let a: f64 = rng.gen_range(0.05..0.95);
        let mix = v1.zip_map(&v2, |x, y| (1.0 - a) * x + a * y).unwrap();
        let hi = weighted_lambda(&pb, &u, &v1).max(weighted_lambda(&pb, &u, &v2));
        if weighted_lambda(&pb, &u, &mix) > hi * (1.0 + 1e-12) {
            convex_fail += 1;
        }
    }
    for _ in 0..1000 {
        let (u1, u2, v) = (random_field(&g, &mut rng), random_field(&g, &mut rng), random_field(&g, &mut rng));
        let a: f64 = rng.gen_range(0.05..0.95);
        let mix = u1.zip_map(&u2, |x, y| (1.0 - a) * x + a * y).unwrap();
        let lo = weighted_lambda(&pb, &u1, &v).min(weighted_lambda(&pb, &u2, &v));
        let m = weighted_lambda(&pb, &mix, &v);
        margin = margin.min((m - lo) / lo);
        if m <= lo {
            concave_fail += 1;
        }
    }
    for _ in 0..1000 {
        let (u, v) = (random_field(&g, &mut rng), random_field(&g, &mut rng));
        let s = 10f64.powf(rng.gen_range(-2.0..2.0));
        let (a, b) = (weighted_lambda(&pb, &u, &v), weighted_lambda(&pb, &u.scale(s), &v));
        if rel(b, a) > 1e-12 {
            ray_fail += 1;
        }
    }
    (
        convex_fail + concave_fail + ray_fail == 0,
        format!(
            "1000 trials each: quasi-convex in v {convex_fail} fails, strict quasi-concave in u {concave_fail} fails (min margin {margin:.2e}), rays {ray_fail} fails"
        ),
    )
}

fn c7_homogeneity() -> Outcome {
    let p = params();
    let g = Grid64::interval(1.0, 128).unwrap();
    let pb = Problem::new(&g, p);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut hom = 0.0f64;
    let mut env = 0.0f64;
    let mut over = f64::MIN;
    for _ in 0..20 {
        let (u, v) = (random_field(&g, &mut rng), random_field(&g, &mut rng));
        let ev = pb.lambda_scaled(&u, &v).unwrap();
        let lam = ev.value;
        for s in [0.1, 2.0, 10.0] {
            hom = hom.max(rel(weighted_lambda(&pb, &u.scale(s), &v), lam));
            hom = hom.max(rel(weighted_lambda(&pb, &u, &v.scale(s)), lam));
        }
        // R(tu, v) on 200 log-spaced t in [t*/10, 10t*], then golden-section
        // refinement inside the bracket of the best scan point
        let r = |t: f64| pb.rayleigh(&u.scale(t), &v).unwrap();
        let ts: Vec<f64> = (0..200).map(|k| ev.t_opt * 10f64.powf(-1.0 + 2.0 * k as f64 / 199.0)).collect();
        let vals: Vec<f64> = ts.iter().map(|&t| r(t)).collect();
        let k = (0..200).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
        over = over.max((vals[k] - lam) / lam);
        let (mut a, mut b) = (ts[k.saturating_sub(1)], ts[(k + 1).min(199)]);
        let gr = 0.618_033_988_749_895;
        while b - a > 1e-12 * b {
            let (x1, x2) = (b - gr * (b - a), a + gr * (b - a));
            if r(x1) < r(x2) {
                a = x1;
            } else {
                b = x2;
            }
        }
        env = env.max(rel(r(0.5 * (a + b)), lam));
    }
    (
        hom <= 1e-12 && env <= 1e-10 && over <= 1e-10,
        format!("homogeneity rel {hom:.2e} <= 1e-12; scan max exceeds λ by {over:.2e}; refined scan max vs λ rel {env:.2e} <= 1e-10"),
    )
}

fn c8_gradients() -> Outcome {
    let p = params();
    let g = Grid64::interval(1.0, 64).unwrap();
    let pb = Problem::new(&g, p);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let u = random_field(&g, &mut rng);
    let v = random_field(&g, &mut rng);
    let mut worst = [0.0f64; 4];
    for _ in 0..20 {
        let d = g.field((0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        // keep the perturbed fields positive
        let e = 1e-5 * u.min().min(v.min()) / d.sup_norm();
        let plus = |f: &Field64, s: f64| f.zip_map(&d, |a, b| a + s * b).unwrap();
        let checks: [(Field64, Box<dyn Fn(f64) -> f64>); 4] = [
            (pb.grad_rayleigh_u(&u, &v).unwrap(), Box::new(|s| pb.rayleigh(&plus(&u, s), &v).unwrap())),
            (pb.grad_rayleigh_v(&u, &v).unwrap(), Box::new(|s| pb.rayleigh(&u, &plus(&v, s)).unwrap())),
            (pb.grad_lambda_u(&u, &v).unwrap(), Box::new(|s| weighted_lambda(&pb, &plus(&u, s), &v))),
            (pb.grad_lambda_v(&u, &v).unwrap(), Box::new(|s| weighted_lambda(&pb, &u, &plus(&v, s)))),
        ];
        for (k, (grad, f)) in checks.iter().enumerate() {
            let fd = (f(e) - f(-e)) / (2.0 * e);
            let an = g.inner(grad, &d).unwrap();
            let scale = g.norm(grad).unwrap() * g.norm(&d).unwrap();
            worst[k] = worst[k].max((fd - an).abs() / scale);
        }
    }
    let ok = worst.iter().all(|&w| w <= 1e-6);
    (ok, format!("max rel err (grad R_u, R_v, λ_u, λ_v) = {:.2e} {:.2e} {:.2e} {:.2e} <= 1e-6", worst[0], worst[1], worst[2], worst[3]))
}

fn c9_uniqueness() -> Outcome {
    let p = params();
    let g = unit_square(64);
    let rs = saddle_multistart(&g, &p, &SaddleConfig { seed: 9, restarts: 10, ..Default::default() }).unwrap();
    let normed = |f: &Field64| f.scale(1.0 / g.norm(f).unwrap());
    let base = normed(&rs[0].u_star);
    let mut dl = 0.0f64;
    let mut du = 0.0f64;
    let mut conv = true;
    for r in &rs {
        conv &= r.converged;
        dl = dl.max(rel(r.lambda_star, rs[0].lambda_star));
        let diff = normed(&r.u_star).zip_map(&base, |a, b| a - b).unwrap();
        du = du.max(g.norm(&diff).unwrap());
    }
    (
        rs.len() == 10 && conv && dl <= 1e-6 && du <= 1e-4,
        format!("{} random starts: all converged {conv}, λ* spread {dl:.2e} <= 1e-6, normalized u* spread {du:.2e} <= 1e-4", rs.len()),
    )
}

fn c10_convergence() -> Outcome {
    let p = params();
    let ns = [64usize, 128, 256, 512];
    let hs: Vec<f64> = ns.iter().map(|&n| 1.0 / (n as f64 + 1.0)).collect();
    let ls: Vec<f64> = ns
        .iter()
        .map(|&n| saddle_search(&Grid64::interval(1.0, n).unwrap(), &p, &SaddleConfig { tol: 1e-10, ..Default::default() }).unwrap().lambda_star)
        .collect();
    let mut orders = Vec::new();
    let mut ext = 0.0;
    for k in 0..2 {
        let (h1, h2, h3) = (hs[k], hs[k + 1], hs[k + 2]);
        let target = (ls[k] - ls[k + 1]) / (ls[k + 1] - ls[k + 2]);
        let f = |q: f64| (h1.powf(q) - h2.powf(q)) / (h2.powf(q) - h3.powf(q)) - target;
        let (mut a, mut b) = (0.1, 6.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(a) * f(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        let q = 0.5 * (a + b);
        orders.push(q);
        ext = ls[k + 2] + (ls[k + 2] - ls[k + 1]) * h3.powf(q) / (h2.powf(q) - h3.powf(q));
    }
    let e = rel(ext, LAMBDA_STAR_ORACLE);
    let ok = orders.iter().all(|&q| (1.5..=2.5).contains(&q)) && e <= 1e-3;
    (ok, format!("orders {:.3} {:.3} in [1.5, 2.5]; extrapolated {ext:.10}, rel to oracle {e:.2e} <= 1e-3", orders[0], orders[1]))
}

fn c11_upper_bound() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    let mut case = |name: String, g: Grid64, p: Params64| {
        let k = upper_bound_via_phi1(&g, &p).unwrap();
        let l = saddle_search(&g, &p, &SaddleConfig::default()).unwrap().lambda_star;
        ok &= l <= k;
        lines.push(format!("{name} {l:.4}<={k:.4}"));
    };
    for n in [64, 128, 256, 512] {
        case(format!("1D n={n}"), Grid64::interval(1.0, n).unwrap(), params());
    }
    for gm in [2.0, 4.0] {
        case(format!("1D γ={gm}"), Grid64::interval(1.0, 128).unwrap(), Params64::new(0.5, gm).unwrap());
    }
    case("1D L=2".into(), Grid64::interval(2.0, 128).unwrap(), params());
    case("square 32".into(), unit_square(32), params());
    case("rect 2x1".into(), Grid64::masked_2d(&Shape::Rectangle { width: 2.0, height: 1.0 }, 32).unwrap(), params());
    case("disk R=0.5".into(), Grid64::masked_2d(&Shape::Disk { radius: 0.5 }, 48).unwrap(), params());
    (ok, lines.join(", "))
}

fn main() {
    let t = Instant::now();
    let square = catch_unwind(square_run).ok();
    let sq = square.as_ref();
    let missing = || (false, "square 64 pipeline panicked".to_string());
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("oracle agreement (1D)", Box::new(c1_oracle_1d)),
        ("three-method agreement (2D)", Box::new(move || sq.map_or_else(missing, c2_three_methods))),
        ("fold certificate", Box::new(move || sq.map_or_else(missing, c3_certificate))),
        ("two-branch structure", Box::new(c4_two_branches)),
        ("stable minimal branch", Box::new(c5_minimal_branch)),
        ("quasi-structure suite", Box::new(c6_quasi_structure)),
        ("homogeneity and envelope", Box::new(c7_homogeneity)),
        ("gradient checks", Box::new(c8_gradients)),
        ("uniqueness of the saddle", Box::new(c9_uniqueness)),
        ("grid convergence", Box::new(c10_convergence)),
        ("upper bound", Box::new(c11_upper_bound)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (ok, detail) = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !ok {
            failed += 1;
        }
        println!("criterion {:>2} {} {name}: {detail}", i + 1, if ok { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of {} passed in {:.2?}", criteria.len() - failed, criteria.len(), t.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
