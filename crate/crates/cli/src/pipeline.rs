//! Method pipelines behind the `run`, `crosscheck` and `sweep` commands.

use std::fmt::Write as _;
use std::path::PathBuf;

use fqfold::branches::{continue_branch, minimal_solution, BranchConfig};
use fqfold::fold::{classify_stability, fold_newton, nonexistence_probe, ProbeConfig};
use fqfold::oracle::{lambda_star_1d, lambda_star_disk};
use fqfold::saddle::{saddle_multistart, upper_bound_via_phi1, SaddleConfig, SaddleResult};
use fqfold::{linearization, smallest_eigenpair, Grid64, Params64, Problem};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{ConfigError, Domain, Method, RunConfig, SweepKind};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Method(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Method(m) => write!(f, "method failed: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Method(_) => 1,
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<fqfold::Error> for RunError {
    fn from(e: fqfold::Error) -> Self {
        RunError::Method(e.to_string())
    }
}

/// A result record plus any extra files to write next to it.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub record: Value,
    pub files: Vec<(String, String)>,
}

struct Ctx {
    cfg: RunConfig,
    grid: Grid64,
    params: Params64,
}

impl Ctx {
    fn new(cfg: &RunConfig) -> Result<Self, RunError> {
        cfg.validate()?;
        Ok(Ctx { cfg: cfg.clone(), grid: cfg.grid()?, params: cfg.params()? })
    }

    fn hash(&self) -> String {
        format!("{:016x}", self.grid.id())
    }

    fn base(&self, method: &str) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("method".into(), json!(method));
        m.insert("grid_hash".into(), json!(self.hash()));
        m.insert("nodes".into(), json!(self.grid.len()));
        m.insert("config".into(), self.cfg.to_json());
        m.insert("warnings".into(), json!(self.params.warnings()));
        m
    }

    fn saddle(&self) -> Result<SaddleResult<f64>, RunError> {
        let sc = SaddleConfig { tol: self.cfg.saddle_tol, restarts: self.cfg.restarts, seed: self.cfg.seed, ..Default::default() };
        let runs = saddle_multistart(&self.grid, &self.params, &sc)?;
        runs.into_iter()
            .fold(None, |best: Option<SaddleResult<f64>>, r| match best {
                Some(b) if b.converged && (!r.converged || b.grad_u_norm + b.grad_v_norm <= r.grad_u_norm + r.grad_v_norm) => Some(b),
                _ => Some(r),
            })
            .ok_or_else(|| RunError::Method("no saddle search was run".into()))
    }
}

fn put(m: &mut Map<String, Value>, pairs: &[(&str, Value)]) {
    for (k, v) in pairs {
        m.insert((*k).into(), v.clone());
    }
}

fn saddle_record(ctx: &Ctx, sr: &SaddleResult<f64>) -> Result<Map<String, Value>, RunError> {
    let g = &ctx.grid;
    let pb = Problem::new(g, ctx.params);
    let q = pb.lambda_scaled(&sr.u_star, &sr.v_star)?;
    let u = sr.u_star.scale(q.t_opt);
    let rf = g.norm(&pb.residual(&u, sr.lambda_star)?)?;
    let op = linearization(g, &u, sr.lambda_star, &ctx.params)?;
    let fv = op.apply(&sr.v_star)?;
    let rfv = g.norm(&fv)? / g.norm(&sr.v_star)?;
    let e = smallest_eigenpair(&op, 1e-10)?;
    let k = upper_bound_via_phi1(g, &ctx.params)?;
    let mut m = ctx.base("saddle");
    put(
        &mut m,
        &[
            ("lambda_star", json!(sr.lambda_star)),
            ("residual_F", json!(rf)),
            ("residual_Fu_v", json!(rfv)),
            ("eig_min", json!(e.value)),
            ("iterations", json!(sr.iterations)),
            ("converged", json!(sr.converged)),
            ("grad_u_norm", json!(sr.grad_u_norm)),
            ("grad_v_norm", json!(sr.grad_v_norm)),
            ("gap_estimate", json!(sr.gap_estimate)),
            ("upper_bound", json!(k)),
        ],
    );
    Ok(m)
}

fn run_saddle(ctx: &Ctx) -> Result<Outcome, RunError> {
    let sr = ctx.saddle()?;
    Ok(Outcome { record: Value::Object(saddle_record(ctx, &sr)?), files: vec![] })
}

fn run_fold(ctx: &Ctx) -> Result<(Outcome, f64), RunError> {
    let sr = ctx.saddle()?;
    let fp = fold_newton(&sr.u_star, &sr.v_star, sr.lambda_star, &ctx.grid, &ctx.params, ctx.cfg.fold_tol)?;
    if !fp.converged {
        return Err(RunError::Method(format!(
            "bordered Newton stopped after {} iterations with residuals {:e}, {:e}",
            fp.newton_iters, fp.residual_f, fp.residual_fu_v
        )));
    }
    let mut m = ctx.base("fold");
    put(
        &mut m,
        &[
            ("lambda_star", json!(fp.lambda_star)),
            ("residual_F", json!(fp.residual_f)),
            ("residual_Fu_v", json!(fp.residual_fu_v)),
            ("eig_min", json!(fp.eig_min)),
            ("eig_second", json!(fp.eig_second)),
            ("iterations", json!(fp.newton_iters)),
            ("residual_history", json!(fp.history)),
        ],
    );
    Ok((Outcome { record: Value::Object(m), files: vec![] }, fp.lambda_star))
}

fn run_branch(ctx: &Ctx) -> Result<(Outcome, f64), RunError> {
    let sr = ctx.saddle()?;
    let l0 = ctx.cfg.branch_start * sr.lambda_star;
    let u0 = minimal_solution(l0, &ctx.grid, &ctx.params, 1e-11)?;
    let bc = BranchConfig { max_steps: ctx.cfg.branch_max_steps, ..Default::default() };
    let curve = continue_branch(&u0, l0, &ctx.grid, &ctx.params, &bc)?;
    let csv = curve.to_csv();
    let fold = curve.fold().ok_or_else(|| RunError::Method(format!("continuation found no fold ({:?})", curve.truncated)))?;
    let sample = &curve.samples[fold.index];
    let (rf, rfv) = fold.certified.as_ref().map_or((Value::Null, Value::Null), |c| (json!(c.residual_f), json!(c.residual_fu_v)));
    let mut m = ctx.base("branch");
    put(
        &mut m,
        &[
            ("lambda_star", json!(fold.lambda)),
            ("residual_F", rf),
            ("residual_Fu_v", rfv),
            ("eig_min", json!(sample.eig_min)),
            ("iterations", json!(curve.samples.len())),
            ("certified_lambda_star", json!(fold.certified.as_ref().map(|c| c.lambda_star))),
            ("folds", json!(curve.folds.len())),
            ("truncated", json!(curve.truncated)),
            ("curve", json!(ctx.cfg.curve)),
        ],
    );
    Ok((Outcome { record: Value::Object(m), files: vec![(ctx.cfg.curve.clone(), csv)] }, fold.lambda))
}

fn run_oracle(ctx: &Ctx) -> Result<(Outcome, f64), RunError> {
    let mut m = ctx.base("oracle");
    let mut files = vec![];
    let lam = match ctx.cfg.domain {
        Domain::Interval { length } => {
            let t = lambda_star_1d(length, &ctx.params, ctx.cfg.oracle_tol)?;
            files.push(("timemap.csv".to_string(), t.to_csv()));
            m.insert("rho_at_fold".into(), json!(t.rho_at_fold));
            t.lambda_star_oracle
        }
        Domain::Disk { radius } => lambda_star_disk(radius, &ctx.params, ctx.cfg.oracle_tol)?,
        _ => return Err(RunError::Method("the oracle covers interval and disk domains only".into())),
    };
    put(
        &mut m,
        &[
            ("lambda_star", json!(lam)),
            ("residual_F", Value::Null),
            ("residual_Fu_v", Value::Null),
            ("eig_min", Value::Null),
            ("iterations", Value::Null),
        ],
    );
    Ok((Outcome { record: Value::Object(m), files }, lam))
}

fn run_crosscheck(ctx: &Ctx) -> Result<Outcome, RunError> {
    let sr = ctx.saddle()?;
    let saddle = saddle_record(ctx, &sr)?;
    let mut rows: Vec<(String, f64, Value)> = vec![("saddle".into(), sr.lambda_star, Value::Object(saddle))];
    let (fold, lf) = run_fold(ctx)?;
    rows.push(("fold".into(), lf, fold.record));
    let (branch, lb) = run_branch(ctx)?;
    let files = branch.files.clone();
    rows.push(("branch".into(), lb, branch.record));
    if matches!(ctx.cfg.domain, Domain::Interval { .. } | Domain::Disk { .. }) {
        let (oracle, lo) = run_oracle(ctx)?;
        rows.push(("oracle".into(), lo, oracle.record));
    }
    let hi = rows.iter().map(|r| r.1).fold(f64::MIN, f64::max);
    let lo = rows.iter().map(|r| r.1).fold(f64::MAX, f64::min);
    let spread = (hi - lo) / hi;
    let table: Vec<Value> = rows
        .iter()
        .map(|(name, l, _)| json!({"method": name, "lambda_star": l, "rel_to_saddle": (l - sr.lambda_star) / sr.lambda_star}))
        .collect();
    let mut m = ctx.base("crosscheck");
    let first = rows[0].2.clone();
    put(
        &mut m,
        &[
            ("lambda_star", json!(sr.lambda_star)),
            ("residual_F", first["residual_F"].clone()),
            ("residual_Fu_v", first["residual_Fu_v"].clone()),
            ("eig_min", first["eig_min"].clone()),
            ("iterations", first["iterations"].clone()),
            ("agreement", json!(table)),
            ("max_rel_spread", json!(spread)),
            ("runs", Value::Array(rows.into_iter().map(|r| r.2).collect())),
        ],
    );
    Ok(Outcome { record: Value::Object(m), files })
}

/// Runs the configured method.
pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let ctx = Ctx::new(cfg)?;
    match cfg.method {
        Method::Saddle => run_saddle(&ctx),
        Method::Fold => run_fold(&ctx).map(|r| r.0),
        Method::Branch => run_branch(&ctx).map(|r| r.0),
        Method::Oracle => run_oracle(&ctx).map(|r| r.0),
        Method::Crosscheck => run_crosscheck(&ctx),
    }
}

/// Independent probes over λ values, or fold values over γ values.
pub fn sweep(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let ctx = Ctx::new(cfg)?;
    if cfg.sweep_values.is_empty() {
        return Err(RunError::Config(ConfigError { line: None, message: "sweep needs `sweep_values`".into() }));
    }
    let mut csv = String::new();
    let rows: Vec<Value> = match cfg.sweep {
        SweepKind::Lambda => {
            let res: Vec<_> = cfg
                .sweep_values
                .par_iter()
                .map(|&l| -> Result<Value, RunError> {
                    let r = nonexistence_probe(l, &ctx.grid, &ctx.params, &ProbeConfig::default())?;
                    let (sup, eig, st) = match &r.solution {
                        Some(u) => {
                            let (e, s) = classify_stability(u, l, &ctx.grid, &ctx.params)?;
                            (json!(u.sup_norm()), json!(e), json!(s.as_str()))
                        }
                        None => (Value::Null, Value::Null, Value::Null),
                    };
                    Ok(json!({"lambda": l, "found": r.found, "solutions": r.newton_solutions.len(), "sup_norm": sup, "eig_min": eig, "stability": st}))
                })
                .collect();
            let rows = res.into_iter().collect::<Result<Vec<_>, _>>()?;
            csv.push_str("lambda,found,sup_norm,eig_min,stability\n");
            for r in &rows {
                let f = |v: &Value| v.as_f64().map_or(String::new(), |x| format!("{x:.16e}"));
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    f(&r["lambda"]),
                    r["found"],
                    f(&r["sup_norm"]),
                    f(&r["eig_min"]),
                    r["stability"].as_str().unwrap_or("")
                );
            }
            rows
        }
        SweepKind::Gamma => {
            let res: Vec<_> = cfg
                .sweep_values
                .par_iter()
                .map(|&gm| -> Result<Value, RunError> {
                    let mut c = cfg.clone();
                    c.gamma = gm;
                    let sub = Ctx::new(&c)?;
                    let sr = sub.saddle()?;
                    let k = upper_bound_via_phi1(&sub.grid, &sub.params)?;
                    Ok(json!({"gamma": gm, "lambda_star": sr.lambda_star, "upper_bound": k, "converged": sr.converged}))
                })
                .collect();
            let rows = res.into_iter().collect::<Result<Vec<_>, _>>()?;
            csv.push_str("gamma,lambda_star,upper_bound\n");
            for r in &rows {
                let f = |v: &Value| v.as_f64().map_or(String::new(), |x| format!("{x:.16e}"));
                let _ = writeln!(csv, "{},{},{}", f(&r["gamma"]), f(&r["lambda_star"]), f(&r["upper_bound"]));
            }
            rows
        }
    };
    let mut m = ctx.base("sweep");
    put(
        &mut m,
        &[
            ("lambda_star", Value::Null),
            ("residual_F", Value::Null),
            ("residual_Fu_v", Value::Null),
            ("eig_min", Value::Null),
            ("iterations", json!(rows.len())),
            ("rows", json!(rows)),
        ],
    );
    Ok(Outcome { record: Value::Object(m), files: vec![("sweep.csv".into(), csv)] })
}

/// Writes the record and extra files under the configured output directory.
pub fn write(cfg: &RunConfig, outcome: &Outcome) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&cfg.out)?;
    let mut written = Vec::new();
    let rec = cfg.out.join(&cfg.record);
    std::fs::write(&rec, serde_json::to_string_pretty(&outcome.record).unwrap_or_default() + "\n")?;
    written.push(rec);
    for (name, body) in &outcome.files {
        let p = cfg.out.join(name);
        std::fs::write(&p, body)?;
        written.push(p);
    }
    Ok(written)
}

/// Record for a failed method, carrying the diagnostic and the config.
pub fn failure_record(cfg: &RunConfig, e: &RunError) -> Value {
    json!({"method": cfg.method.name(), "error": e.to_string(), "config": cfg.to_json()})
}
