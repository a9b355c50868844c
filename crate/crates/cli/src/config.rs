//! Flat `key = value` run configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use fqfold::{Grid64, Mask, Params64, Shape};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Interval { length: f64 },
    Rectangle { width: f64, height: f64 },
    Disk { radius: f64 },
    Bitmap { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Saddle,
    Fold,
    Branch,
    Oracle,
    Crosscheck,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Saddle => "saddle",
            Method::Fold => "fold",
            Method::Branch => "branch",
            Method::Oracle => "oracle",
            Method::Crosscheck => "crosscheck",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Lambda,
    Gamma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: Domain,
    pub resolution: usize,
    pub q: f64,
    pub gamma: f64,
    pub method: Method,
    pub saddle_tol: f64,
    pub fold_tol: f64,
    pub oracle_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Start of the continuation as a fraction of the saddle value.
    pub branch_start: f64,
    pub branch_max_steps: usize,
    pub sweep: SweepKind,
    /// λ values, or γ values for a γ sweep.
    pub sweep_values: Vec<f64>,
    pub out: PathBuf,
    pub record: String,
    pub curve: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: Domain::Interval { length: 1.0 },
            resolution: 256,
            q: 0.5,
            gamma: 3.0,
            method: Method::Saddle,
            saddle_tol: 1e-8,
            fold_tol: 1e-9,
            oracle_tol: 1e-12,
            restarts: 1,
            seed: 0,
            branch_start: 0.25,
            branch_max_steps: 2000,
            sweep: SweepKind::Lambda,
            sweep_values: Vec::new(),
            out: PathBuf::from("."),
            record: "result.json".into(),
            curve: "branch.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError { line, message: message.into() }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| err(Some(line), format!("`{key}` expects a number, got `{v}`")))
}

impl RunConfig {
    /// Parses config text; relative bitmap paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        let mut kind = "interval".to_string();
        let (mut length, mut width, mut height, mut radius) = (1.0, 1.0, 1.0, 0.5);
        let mut bitmap: Option<PathBuf> = None;
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| err(Some(line), format!("expected `key = value`, got `{body}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(err(Some(line), format!("duplicate key `{k}`")));
            }
            match k {
                "domain" => kind = v.to_string(),
                "length" => length = num(line, k, v)?,
                "width" => width = num(line, k, v)?,
                "height" => height = num(line, k, v)?,
                "radius" => radius = num(line, k, v)?,
                "bitmap" => bitmap = Some(base.join(v)),
                "resolution" => c.resolution = num(line, k, v)?,
                "q" => c.q = num(line, k, v)?,
                "gamma" => c.gamma = num(line, k, v)?,
                "method" => {
                    c.method = match v {
                        "saddle" => Method::Saddle,
                        "fold" => Method::Fold,
                        "branch" => Method::Branch,
                        "oracle" => Method::Oracle,
                        "crosscheck" => Method::Crosscheck,
                        _ => return Err(err(Some(line), format!("unknown method `{v}`"))),
                    }
                }
                "tol" | "saddle_tol" => c.saddle_tol = num(line, k, v)?,
                "fold_tol" => c.fold_tol = num(line, k, v)?,
                "oracle_tol" => c.oracle_tol = num(line, k, v)?,
                "restarts" => c.restarts = num(line, k, v)?,
                "seed" => c.seed = num(line, k, v)?,
                "branch_start" => c.branch_start = num(line, k, v)?,
                "branch_max_steps" => c.branch_max_steps = num(line, k, v)?,
                "sweep" => {
                    c.sweep = match v {
                        "lambda" => SweepKind::Lambda,
                        "gamma" => SweepKind::Gamma,
                        _ => return Err(err(Some(line), format!("unknown sweep `{v}` (lambda | gamma)"))),
                    }
                }
                "sweep_values" => {
                    c.sweep_values = v
                        .split(',')
                        .map(|s| s.trim())
                        .filter(|s| !s.is_empty())
                        .map(|s| num(line, k, s))
                        .collect::<Result<_, _>>()?
                }
                "out" => c.out = PathBuf::from(v),
                "record" => c.record = v.to_string(),
                "curve" => c.curve = v.to_string(),
                _ => return Err(err(Some(line), format!("unknown key `{k}`"))),
            }
        }
        c.domain = match kind.as_str() {
            "interval" => Domain::Interval { length },
            "rectangle" => Domain::Rectangle { width, height },
            "disk" => Domain::Disk { radius },
            "bitmap" => Domain::Bitmap { path: bitmap.ok_or_else(|| err(None, "domain = bitmap needs `bitmap = PATH`"))? },
            _ => return Err(err(None, format!("unknown domain `{kind}` (interval | rectangle | disk | bitmap)"))),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| err(None, format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn dimension(&self) -> usize {
        match self.domain {
            Domain::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Problem parameters; violated hypotheses are config errors.
    pub fn params(&self) -> Result<Params64, ConfigError> {
        Params64::new(self.q, self.gamma)
            .and_then(|p| p.with_dimension(self.dimension()))
            .map_err(|e| err(None, e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params()?;
        let positive = |name: &str, v: f64| if v > 0.0 && v.is_finite() { Ok(()) } else { Err(err(None, format!("`{name}` must be positive, got {v}"))) };
        match &self.domain {
            Domain::Interval { length } => positive("length", *length)?,
            Domain::Rectangle { width, height } => {
                positive("width", *width)?;
                positive("height", *height)?
            }
            Domain::Disk { radius } => positive("radius", *radius)?,
            Domain::Bitmap { .. } => {}
        }
        for (n, v) in [("tol", self.saddle_tol), ("fold_tol", self.fold_tol), ("oracle_tol", self.oracle_tol)] {
            positive(n, v)?;
        }
        if !(self.branch_start > 0.0 && self.branch_start < 1.0) {
            return Err(err(None, format!("`branch_start` must lie in (0, 1), got {}", self.branch_start)));
        }
        if self.restarts == 0 {
            return Err(err(None, "`restarts` must be at least 1"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid64, ConfigError> {
        let g = match &self.domain {
            Domain::Interval { length } => Grid64::interval(*length, self.resolution),
            Domain::Rectangle { width, height } => Grid64::masked_2d(&Shape::Rectangle { width: *width, height: *height }, self.resolution),
            Domain::Disk { radius } => Grid64::masked_2d(&Shape::Disk { radius: *radius }, self.resolution),
            Domain::Bitmap { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| err(None, format!("cannot read bitmap {}: {e}", path.display())))?;
                let mask = Mask::parse(&text).map_err(|e| err(None, e.to_string()))?;
                Grid64::masked_2d(&Shape::Bitmap(mask), self.resolution)
            }
        };
        g.map_err(|e| err(None, e.to_string()))
    }

    /// Every resolved setting, for the audit trail in result records.
    pub fn to_json(&self) -> Value {
        let domain = match &self.domain {
            Domain::Interval { length } => json!({"kind": "interval", "length": length}),
            Domain::Rectangle { width, height } => json!({"kind": "rectangle", "width": width, "height": height}),
            Domain::Disk { radius } => json!({"kind": "disk", "radius": radius}),
            Domain::Bitmap { path } => json!({"kind": "bitmap", "path": path.display().to_string()}),
        };
        json!({
            "domain": domain,
            "resolution": self.resolution,
            "q": self.q,
            "gamma": self.gamma,
            "method": self.method.name(),
            "tol": self.saddle_tol,
            "fold_tol": self.fold_tol,
            "oracle_tol": self.oracle_tol,
            "restarts": self.restarts,
            "seed": self.seed,
            "branch_start": self.branch_start,
            "branch_max_steps": self.branch_max_steps,
            "sweep": match self.sweep { SweepKind::Lambda => "lambda", SweepKind::Gamma => "gamma" },
            "sweep_values": self.sweep_values,
            "out": self.out.display().to_string(),
            "record": self.record,
            "curve": self.curve,
        })
    }
}
