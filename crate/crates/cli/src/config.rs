//! Run configuration: a sectioned TOML file validated key by key.
//!
//! Required keys are `model.n`, `model.d`, `model.a0`, `model.a`,
//! `grid.extents`, `grid.cells`, `time.horizon` and `time.dt`; everything
//! else has a default. [`RunConfig::render`] writes every key explicitly, so
//! `parse(render(c)) == c`.

use std::collections::BTreeMap;
use std::fmt;

use skt_core::entropy::{CutoffProfile, CutoffSpec};
use skt_core::solver::{ManufacturedSolution, NewtonOptions};
use skt_core::{Field, Grid, ModelSpec, ReactionSpec, Sampling};
use toml::{Table, Value};

/// A configuration problem, pinned to a dotted key and, when it can be found,
/// the source line.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn at(key: &str, message: impl Into<String>) -> Self {
        ConfigError {
            key: Some(key.to_string()),
            line: None,
            message: message.into(),
        }
    }

    fn missing(key: &str) -> Self {
        ConfigError::at(key, "missing required key")
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.key) {
            (Some(l), Some(k)) => write!(f, "line {l}: {k}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "{k}: {}", self.message),
            (None, None) => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Debug, PartialEq)]
pub enum ReactionConfig {
    Zero,
    Logistic {
        beta: Vec<f64>,
        gamma: Vec<Vec<f64>>,
    },
    LinearRelaxation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub n: usize,
    pub d: usize,
    pub a0: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub pi: Vec<f64>,
    pub lambda: Vec<f64>,
    /// One drift vector of length `d` per species.
    pub b: Vec<Vec<f64>>,
    pub reaction: ReactionConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub extents: Vec<f64>,
    pub cells: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeConfig {
    pub horizon: f64,
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_iters: usize,
    pub newton_halvings: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutoffConfig {
    pub k: u32,
    pub l: f64,
    pub m: f64,
    pub eps: f64,
    pub profile: CutoffProfile,
}

/// Initial data `mean_i + amplitude_i prod_a cos(pi x_a / extent_a)`; the
/// same parameters define the manufactured reference.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialConfig {
    pub mean: Vec<f64>,
    pub amplitude: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeModeConfig {
    Manufactured,
    FineProxy,
}

impl ProbeModeConfig {
    pub fn name(self) -> &'static str {
        match self {
            ProbeModeConfig::Manufactured => "manufactured",
            ProbeModeConfig::FineProxy => "fine_proxy",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSection {
    pub mode: ProbeModeConfig,
    pub refinement: usize,
    pub perturbation: f64,
    /// Fixed series tolerance; derived from a half-resolution run when absent.
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditSection {
    /// Defaults to `[0, time.horizon]`.
    pub window: Option<(f64, f64)>,
    /// Refinement factors for the residual convergence study; empty for none.
    pub refinements: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingConfig {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
    pub box_radius: f64,
    pub m0_max: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: Option<String>,
    pub cadence: usize,
}

/// One sweep coordinate value.
#[derive(Clone, Debug, PartialEq)]
pub enum SweepValue {
    Int(i64),
    Float(f64),
    Str(String),
}

impl SweepValue {
    fn to_value(&self) -> Value {
        match self {
            SweepValue::Int(i) => Value::Integer(*i),
            SweepValue::Float(x) => Value::Float(*x),
            SweepValue::Str(s) => Value::String(s.clone()),
        }
    }

    /// Numbers before strings; numbers by value, strings lexically.
    pub fn cmp_lex(&self, other: &SweepValue) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        let num = |v: &SweepValue| match v {
            SweepValue::Int(i) => Some(*i as f64),
            SweepValue::Float(x) => Some(*x),
            SweepValue::Str(_) => None,
        };
        match (num(self), num(other), self, other) {
            (Some(a), Some(b), _, _) => a.total_cmp(&b),
            (Some(_), None, _, _) => Ordering::Less,
            (None, Some(_), _, _) => Ordering::Greater,
            (_, _, SweepValue::Str(a), SweepValue::Str(b)) => a.cmp(b),
            _ => Ordering::Equal,
        }
    }
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Int(i) => write!(f, "{i}"),
            SweepValue::Float(x) => write!(f, "{x:?}"),
            SweepValue::Str(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub cutoff: CutoffConfig,
    pub initial: InitialConfig,
    pub probe: ProbeSection,
    pub audit: AuditSection,
    pub sampling: SamplingConfig,
    pub output: OutputConfig,
    /// Dotted key to the values it takes.
    pub sweep: BTreeMap<String, Vec<SweepValue>>,
}

const SECTIONS: [&str; 10] = [
    "model", "grid", "time", "cutoff", "initial", "probe", "audit", "sampling", "output", "sweep",
];

/// Typed access to one table with dotted-key diagnostics.
struct Section<'a> {
    name: &'a str,
    table: Option<&'a Table>,
}

impl<'a> Section<'a> {
    fn key(&self, k: &str) -> String {
        if self.name.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.name)
        }
    }

    fn get(&self, k: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(k))
    }

    fn check_known(&self, known: &[&str]) -> CResult<()> {
        if let Some(t) = self.table {
            for k in t.keys() {
                if !known.contains(&k.as_str()) {
                    return Err(ConfigError::at(&self.key(k), "unknown key"));
                }
            }
        }
        Ok(())
    }

    fn f64_opt(&self, k: &str) -> CResult<Option<f64>> {
        self.get(k).map(|v| as_f64(v, &self.key(k))).transpose()
    }
    fn f64(&self, k: &str) -> CResult<f64> {
        self.f64_opt(k)?
            .ok_or_else(|| ConfigError::missing(&self.key(k)))
    }
    fn f64_or(&self, k: &str, d: f64) -> CResult<f64> {
        Ok(self.f64_opt(k)?.unwrap_or(d))
    }

    fn uint_opt(&self, k: &str) -> CResult<Option<u64>> {
        self.get(k).map(|v| as_uint(v, &self.key(k))).transpose()
    }
    fn uint(&self, k: &str) -> CResult<u64> {
        self.uint_opt(k)?
            .ok_or_else(|| ConfigError::missing(&self.key(k)))
    }
    fn uint_or(&self, k: &str, d: u64) -> CResult<u64> {
        Ok(self.uint_opt(k)?.unwrap_or(d))
    }

    fn str_or(&self, k: &str, d: &str) -> CResult<String> {
        match self.get(k) {
            None => Ok(d.to_string()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(ConfigError::at(&self.key(k), "expected a string")),
        }
    }

    fn vec_opt(&self, k: &str) -> CResult<Option<Vec<f64>>> {
        self.get(k).map(|v| as_vec(v, &self.key(k))).transpose()
    }
    fn vec(&self, k: &str) -> CResult<Vec<f64>> {
        self.vec_opt(k)?
            .ok_or_else(|| ConfigError::missing(&self.key(k)))
    }

    fn matrix_opt(&self, k: &str) -> CResult<Option<Vec<Vec<f64>>>> {
        self.get(k)
            .map(|v| {
                let key = self.key(k);
                match v {
                    Value::Array(rows) => rows.iter().map(|r| as_vec(r, &key)).collect(),
                    _ => Err(ConfigError::at(&key, "expected an array of arrays")),
                }
            })
            .transpose()
    }
}

fn as_f64(v: &Value, key: &str) -> CResult<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(ConfigError::at(key, "expected a number")),
    }
}

fn as_uint(v: &Value, key: &str) -> CResult<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(ConfigError::at(key, "expected a nonnegative integer")),
    }
}

fn as_vec(v: &Value, key: &str) -> CResult<Vec<f64>> {
    match v {
        Value::Array(xs) => xs.iter().map(|x| as_f64(x, key)).collect(),
        _ => Err(ConfigError::at(key, "expected an array of numbers")),
    }
}

fn sub<'a>(root: &'a Table, name: &'a str) -> CResult<Section<'a>> {
    match root.get(name) {
        None => Ok(Section { name, table: None }),
        Some(Value::Table(t)) => Ok(Section {
            name,
            table: Some(t),
        }),
        Some(_) => Err(ConfigError::at(name, "expected a table")),
    }
}

/// 1-based line of `key` (dotted) in `src`, tracking `[section]` headers.
fn locate(src: &str, key: &str) -> Option<usize> {
    let (section, leaf) = match key.rsplit_once('.') {
        Some((s, l)) => (s, l),
        None => ("", key),
    };
    let mut current = String::new();
    let mut header_line = None;
    for (no, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim().to_string();
            if current == key {
                header_line = Some(no + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim().trim_matches('"') == leaf {
                    return Some(no + 1);
                }
            }
        }
    }
    header_line
}

impl RunConfig {
    /// Parses and validates; errors carry the dotted key and source line.
    pub fn parse(src: &str) -> CResult<RunConfig> {
        let root: Table = src.parse().map_err(|e: toml::de::Error| {
            let line = e
                .span()
                .map(|s| src[..s.start.min(src.len())].lines().count().max(1));
            ConfigError {
                key: None,
                line,
                message: e.message().trim().to_string(),
            }
        })?;
        Self::from_table(&root).map_err(|mut e| {
            if let Some(k) = &e.key {
                e.line = locate(src, k);
            }
            e
        })
    }

    pub fn from_table(root: &Table) -> CResult<RunConfig> {
        for k in root.keys() {
            if k != "seed" && !SECTIONS.contains(&k.as_str()) {
                return Err(ConfigError::at(k, "unknown key"));
            }
        }
        let top = Section {
            name: "",
            table: Some(root),
        };
        let seed = top.uint_or("seed", 0)?;

        let m = sub(root, "model")?;
        m.check_known(&["n", "d", "a0", "a", "pi", "lambda", "b", "reaction"])?;
        let n = m.uint("n")? as usize;
        let d = m.uint("d")? as usize;
        let a0 = m.vec("a0")?;
        let a = m
            .matrix_opt("a")?
            .ok_or_else(|| ConfigError::missing("model.a"))?;
        let pi = m.vec_opt("pi")?.unwrap_or_else(|| vec![1.0; n]);
        let lambda = m.vec_opt("lambda")?.unwrap_or_else(|| vec![0.0; n]);
        let b = m.matrix_opt("b")?.unwrap_or_else(|| vec![vec![0.0; d]; n]);
        let r = match m.get("reaction") {
            None => Section {
                name: "model.reaction",
                table: None,
            },
            Some(Value::Table(t)) => Section {
                name: "model.reaction",
                table: Some(t),
            },
            Some(_) => return Err(ConfigError::at("model.reaction", "expected a table")),
        };
        let reaction = match r.str_or("kind", "zero")?.as_str() {
            "zero" => {
                r.check_known(&["kind"])?;
                ReactionConfig::Zero
            }
            "logistic" => {
                r.check_known(&["kind", "beta", "gamma"])?;
                ReactionConfig::Logistic {
                    beta: r.vec("beta")?,
                    gamma: r
                        .matrix_opt("gamma")?
                        .ok_or_else(|| ConfigError::missing("model.reaction.gamma"))?,
                }
            }
            "linear_relaxation" => {
                r.check_known(&["kind"])?;
                ReactionConfig::LinearRelaxation
            }
            other => {
                return Err(ConfigError::at(
                    "model.reaction.kind",
                    format!("unknown reaction '{other}' (zero, logistic, linear_relaxation)"),
                ))
            }
        };
        let model = ModelConfig {
            n,
            d,
            a0,
            a,
            pi,
            lambda,
            b,
            reaction,
        };

        let g = sub(root, "grid")?;
        g.check_known(&["extents", "cells"])?;
        let extents = g.vec("extents")?;
        let cells = match g.get("cells") {
            None => return Err(ConfigError::missing("grid.cells")),
            Some(Value::Array(xs)) => xs
                .iter()
                .map(|x| as_uint(x, "grid.cells").map(|c| c as usize))
                .collect::<CResult<_>>()?,
            Some(_) => {
                return Err(ConfigError::at(
                    "grid.cells",
                    "expected an array of integers",
                ))
            }
        };
        let grid = GridConfig { extents, cells };

        let t = sub(root, "time")?;
        t.check_known(&[
            "horizon",
            "dt",
            "newton_tol",
            "newton_iters",
            "newton_halvings",
        ])?;
        let nd = NewtonOptions::default();
        let time = TimeConfig {
            horizon: t.f64("horizon")?,
            dt: t.f64("dt")?,
            newton_tol: t.f64_or("newton_tol", nd.tol)?,
            newton_iters: t.uint_or("newton_iters", nd.max_iter as u64)? as usize,
            newton_halvings: t.uint_or("newton_halvings", nd.max_halvings as u64)? as usize,
        };

        let c = sub(root, "cutoff")?;
        c.check_known(&["k", "l", "m", "eps", "profile"])?;
        let profile_name = c.str_or("profile", CutoffProfile::Bump.name())?;
        let profile = CutoffProfile::from_name(&profile_name).ok_or_else(|| {
            ConfigError::at(
                "cutoff.profile",
                format!("unknown profile '{profile_name}'"),
            )
        })?;
        let k = c.uint_or("k", 3)?;
        let cutoff = CutoffConfig {
            k: u32::try_from(k).map_err(|_| ConfigError::at("cutoff.k", "out of range"))?,
            l: c.f64_or("l", 10.0)?,
            m: c.f64_or("m", 20.0)?,
            eps: c.f64_or("eps", 0.1)?,
            profile,
        };

        let i = sub(root, "initial")?;
        i.check_known(&["mean", "amplitude"])?;
        let initial = InitialConfig {
            mean: i.vec_opt("mean")?.unwrap_or_else(|| vec![1.0; n]),
            amplitude: i.vec_opt("amplitude")?.unwrap_or_else(|| vec![0.0; n]),
        };

        let p = sub(root, "probe")?;
        p.check_known(&["mode", "refinement", "perturbation", "tolerance"])?;
        let mode = match p.str_or("mode", "manufactured")?.as_str() {
            "manufactured" => ProbeModeConfig::Manufactured,
            "fine_proxy" => ProbeModeConfig::FineProxy,
            other => {
                return Err(ConfigError::at(
                    "probe.mode",
                    format!("unknown mode '{other}' (manufactured, fine_proxy)"),
                ))
            }
        };
        let probe = ProbeSection {
            mode,
            refinement: p.uint_or("refinement", 2)? as usize,
            perturbation: p.f64_or("perturbation", 0.0)?,
            tolerance: p.f64_opt("tolerance")?,
        };

        let au = sub(root, "audit")?;
        au.check_known(&["window", "refinements"])?;
        let window = match au.vec_opt("window")? {
            None => None,
            Some(w) if w.len() == 2 => Some((w[0], w[1])),
            Some(_) => return Err(ConfigError::at("audit.window", "expected [start, end]")),
        };
        let refinements = match au.get("refinements") {
            None => Vec::new(),
            Some(Value::Array(xs)) => xs
                .iter()
                .map(|x| as_uint(x, "audit.refinements").map(|r| r as usize))
                .collect::<CResult<_>>()?,
            Some(_) => {
                return Err(ConfigError::at(
                    "audit.refinements",
                    "expected an array of integers",
                ))
            }
        };
        let audit = AuditSection {
            window,
            refinements,
        };

        let s = sub(root, "sampling")?;
        s.check_known(&["count", "lo", "hi", "box_radius", "m0_max"])?;
        let sd = Sampling::default();
        let sampling = SamplingConfig {
            count: s.uint_or("count", sd.count as u64)? as usize,
            lo: s.f64_or("lo", sd.lo)?,
            hi: s.f64_or("hi", sd.hi)?,
            box_radius: s.f64_or("box_radius", sd.box_radius)?,
            m0_max: s.uint_or("m0_max", sd.m0_search_max)?,
        };

        let o = sub(root, "output")?;
        o.check_known(&["dir", "cadence"])?;
        let output = OutputConfig {
            dir: match o.get("dir") {
                None => None,
                Some(Value::String(s)) => Some(s.clone()),
                Some(_) => return Err(ConfigError::at("output.dir", "expected a string")),
            },
            cadence: o.uint_or("cadence", 1)? as usize,
        };

        let mut sweep = BTreeMap::new();
        if let Some(sw) = sub(root, "sweep")?.table {
            for (key, v) in sw {
                let full = format!("sweep.{key}");
                let Value::Array(xs) = v else {
                    return Err(ConfigError::at(&full, "expected an array of values"));
                };
                if xs.is_empty() {
                    return Err(ConfigError::at(&full, "sweep coordinate has no values"));
                }
                let vals = xs
                    .iter()
                    .map(|x| match x {
                        Value::Integer(i) => Ok(SweepValue::Int(*i)),
                        Value::Float(f) => Ok(SweepValue::Float(*f)),
                        Value::String(s) => Ok(SweepValue::Str(s.clone())),
                        _ => Err(ConfigError::at(
                            &full,
                            "sweep values must be numbers or strings",
                        )),
                    })
                    .collect::<CResult<Vec<_>>>()?;
                let target = key.split_once('.');
                if !matches!(target, Some((sec, _)) if SECTIONS[..9].contains(&sec)) {
                    return Err(ConfigError::at(
                        &full,
                        "sweep keys must be dotted, e.g. \"cutoff.k\"",
                    ));
                }
                sweep.insert(key.clone(), vals);
            }
        }

        let cfg = RunConfig {
            seed,
            model,
            grid,
            time,
            cutoff,
            initial,
            probe,
            audit,
            sampling,
            output,
            sweep,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every field against the preconditions of the code that uses it.
    pub fn validate(&self) -> CResult<()> {
        if self.seed > i64::MAX as u64 {
            return Err(ConfigError::at(
                "seed",
                "must fit in a signed 64-bit integer",
            ));
        }
        let m = &self.model;
        let n = m.n;
        if n == 0 {
            return Err(ConfigError::at("model.n", "must be at least 1"));
        }
        if m.d != 1 && m.d != 2 {
            return Err(ConfigError::at("model.d", "must be 1 or 2"));
        }
        let len = |key: &str, len: usize, want: usize| {
            if len != want {
                Err(ConfigError::at(
                    key,
                    format!("expected {want} entries, found {len}"),
                ))
            } else {
                Ok(())
            }
        };
        len("model.a0", m.a0.len(), n)?;
        len("model.a", m.a.len(), n)?;
        for row in &m.a {
            len("model.a", row.len(), n)?;
        }
        len("model.pi", m.pi.len(), n)?;
        len("model.lambda", m.lambda.len(), n)?;
        len("model.b", m.b.len(), n)?;
        for row in &m.b {
            len("model.b", row.len(), m.d)?;
        }
        fn nonneg<'a>(key: &str, mut xs: impl Iterator<Item = &'a f64>) -> CResult<()> {
            if xs.all(|x| x.is_finite() && *x >= 0.0) {
                Ok(())
            } else {
                Err(ConfigError::at(
                    key,
                    "entries must be finite and nonnegative",
                ))
            }
        }
        nonneg("model.a0", m.a0.iter())?;
        nonneg("model.a", m.a.iter().flatten())?;
        if !m.pi.iter().all(|p| p.is_finite() && *p > 0.0) {
            return Err(ConfigError::at("model.pi", "entries must be positive"));
        }
        if !m
            .lambda
            .iter()
            .chain(m.b.iter().flatten())
            .all(|x| x.is_finite())
        {
            return Err(ConfigError::at("model.lambda", "entries must be finite"));
        }
        if let ReactionConfig::Logistic { beta, gamma } = &m.reaction {
            len("model.reaction.beta", beta.len(), n)?;
            len("model.reaction.gamma", gamma.len(), n)?;
            for row in gamma {
                len("model.reaction.gamma", row.len(), n)?;
            }
            nonneg("model.reaction.gamma", gamma.iter().flatten())?;
        }

        len("grid.extents", self.grid.extents.len(), m.d)?;
        len("grid.cells", self.grid.cells.len(), m.d)?;
        if !self.grid.extents.iter().all(|e| e.is_finite() && *e > 0.0) {
            return Err(ConfigError::at("grid.extents", "extents must be positive"));
        }
        if self.grid.cells.iter().any(|c| *c < 2) {
            return Err(ConfigError::at("grid.cells", "at least 2 cells per axis"));
        }

        let t = &self.time;
        if !(t.horizon.is_finite() && t.horizon >= 0.0) {
            return Err(ConfigError::at(
                "time.horizon",
                "must be finite and nonnegative",
            ));
        }
        if !(t.dt.is_finite() && t.dt > 0.0) {
            return Err(ConfigError::at("time.dt", "must be positive"));
        }
        if !(t.newton_tol.is_finite() && t.newton_tol > 0.0) {
            return Err(ConfigError::at("time.newton_tol", "must be positive"));
        }
        if t.newton_iters == 0 {
            return Err(ConfigError::at("time.newton_iters", "must be at least 1"));
        }

        let c = &self.cutoff;
        if c.k < 3 {
            return Err(ConfigError::at("cutoff.k", "must be at least 3"));
        }
        if !(c.l.is_finite() && c.l > 0.0) {
            return Err(ConfigError::at("cutoff.l", "must be positive"));
        }
        if !(c.m.is_finite() && c.m > c.l) {
            return Err(ConfigError::at("cutoff.m", "must exceed cutoff.l"));
        }
        if !(c.eps > 0.0 && c.eps < 0.5) {
            return Err(ConfigError::at("cutoff.eps", "must lie in (0, 1/2)"));
        }

        len("initial.mean", self.initial.mean.len(), n)?;
        len("initial.amplitude", self.initial.amplitude.len(), n)?;
        for (mean, amp) in self.initial.mean.iter().zip(&self.initial.amplitude) {
            if !(mean.is_finite() && amp.is_finite() && *mean > amp.abs()) {
                return Err(ConfigError::at(
                    "initial.amplitude",
                    "each mean must exceed |amplitude| so the data stay positive",
                ));
            }
        }

        let p = &self.probe;
        if p.refinement == 0 {
            return Err(ConfigError::at("probe.refinement", "must be at least 1"));
        }
        if !(p.perturbation.is_finite() && p.perturbation > -1.0) {
            return Err(ConfigError::at("probe.perturbation", "must exceed -1"));
        }
        if let Some(tol) = p.tolerance {
            if !(tol.is_finite() && tol >= 0.0) {
                return Err(ConfigError::at("probe.tolerance", "must be nonnegative"));
            }
        }

        if let Some((a, b)) = self.audit.window {
            if !(a >= 0.0 && b > a) {
                return Err(ConfigError::at("audit.window", "needs 0 <= start < end"));
            }
            if b > t.horizon * (1.0 + 1e-12) {
                return Err(ConfigError::at(
                    "audit.window",
                    format!("end {b} exceeds time.horizon {}", t.horizon),
                ));
            }
        }
        if self.audit.refinements.contains(&0) {
            return Err(ConfigError::at(
                "audit.refinements",
                "factors must be positive",
            ));
        }

        let s = &self.sampling;
        if s.count == 0 {
            return Err(ConfigError::at("sampling.count", "must be at least 1"));
        }
        if !(s.lo > 0.0 && s.hi.is_finite() && s.lo <= s.hi) {
            return Err(ConfigError::at(
                "sampling.lo",
                "range must satisfy 0 < lo <= hi",
            ));
        }
        if !(s.box_radius.is_finite() && s.box_radius > 0.0) {
            return Err(ConfigError::at("sampling.box_radius", "must be positive"));
        }
        if self.output.cadence == 0 {
            return Err(ConfigError::at("output.cadence", "must be at least 1"));
        }
        Ok(())
    }

    pub fn to_table(&self) -> Table {
        fn arr(xs: &[f64]) -> Value {
            Value::Array(xs.iter().map(|x| Value::Float(*x)).collect())
        }
        fn mat(xs: &[Vec<f64>]) -> Value {
            Value::Array(xs.iter().map(|r| arr(r)).collect())
        }
        fn uarr(xs: &[usize]) -> Value {
            Value::Array(xs.iter().map(|x| Value::Integer(*x as i64)).collect())
        }
        fn table(entries: Vec<(&str, Value)>) -> Value {
            Value::Table(
                entries
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
            )
        }
        let m = &self.model;
        let reaction = match &m.reaction {
            ReactionConfig::Zero => table(vec![("kind", Value::String("zero".into()))]),
            ReactionConfig::LinearRelaxation => {
                table(vec![("kind", Value::String("linear_relaxation".into()))])
            }
            ReactionConfig::Logistic { beta, gamma } => table(vec![
                ("kind", Value::String("logistic".into())),
                ("beta", arr(beta)),
                ("gamma", mat(gamma)),
            ]),
        };
        let mut root = Table::new();
        root.insert("seed".into(), Value::Integer(self.seed as i64));
        root.insert(
            "model".into(),
            table(vec![
                ("n", Value::Integer(m.n as i64)),
                ("d", Value::Integer(m.d as i64)),
                ("a0", arr(&m.a0)),
                ("a", mat(&m.a)),
                ("pi", arr(&m.pi)),
                ("lambda", arr(&m.lambda)),
                ("b", mat(&m.b)),
                ("reaction", reaction),
            ]),
        );
        root.insert(
            "grid".into(),
            table(vec![
                ("extents", arr(&self.grid.extents)),
                ("cells", uarr(&self.grid.cells)),
            ]),
        );
        let t = &self.time;
        root.insert(
            "time".into(),
            table(vec![
                ("horizon", Value::Float(t.horizon)),
                ("dt", Value::Float(t.dt)),
                ("newton_tol", Value::Float(t.newton_tol)),
                ("newton_iters", Value::Integer(t.newton_iters as i64)),
                ("newton_halvings", Value::Integer(t.newton_halvings as i64)),
            ]),
        );
        let c = &self.cutoff;
        root.insert(
            "cutoff".into(),
            table(vec![
                ("k", Value::Integer(c.k as i64)),
                ("l", Value::Float(c.l)),
                ("m", Value::Float(c.m)),
                ("eps", Value::Float(c.eps)),
                ("profile", Value::String(c.profile.name().into())),
            ]),
        );
        root.insert(
            "initial".into(),
            table(vec![
                ("mean", arr(&self.initial.mean)),
                ("amplitude", arr(&self.initial.amplitude)),
            ]),
        );
        let p = &self.probe;
        let mut probe = vec![
            ("mode", Value::String(p.mode.name().into())),
            ("refinement", Value::Integer(p.refinement as i64)),
            ("perturbation", Value::Float(p.perturbation)),
        ];
        if let Some(tol) = p.tolerance {
            probe.push(("tolerance", Value::Float(tol)));
        }
        root.insert("probe".into(), table(probe));
        let mut audit = vec![("refinements", uarr(&self.audit.refinements))];
        if let Some((a, b)) = self.audit.window {
            audit.push(("window", arr(&[a, b])));
        }
        root.insert("audit".into(), table(audit));
        let s = &self.sampling;
        root.insert(
            "sampling".into(),
            table(vec![
                ("count", Value::Integer(s.count as i64)),
                ("lo", Value::Float(s.lo)),
                ("hi", Value::Float(s.hi)),
                ("box_radius", Value::Float(s.box_radius)),
                ("m0_max", Value::Integer(s.m0_max as i64)),
            ]),
        );
        let mut output = vec![("cadence", Value::Integer(self.output.cadence as i64))];
        if let Some(d) = &self.output.dir {
            output.push(("dir", Value::String(d.clone())));
        }
        root.insert("output".into(), table(output));
        if !self.sweep.is_empty() {
            let sw: Table = self
                .sweep
                .iter()
                .map(|(k, vs)| {
                    (
                        k.clone(),
                        Value::Array(vs.iter().map(SweepValue::to_value).collect()),
                    )
                })
                .collect();
            root.insert("sweep".into(), Value::Table(sw));
        }
        root
    }

    pub fn render(&self) -> String {
        self.to_table().to_string()
    }

    /// Copy with `key` (dotted, `section.field`) replaced by `value`.
    pub fn with_override(&self, key: &str, value: &SweepValue) -> CResult<RunConfig> {
        let mut root = self.to_table();
        root.remove("sweep");
        let (section, field) = key
            .split_once('.')
            .ok_or_else(|| ConfigError::at(key, "expected section.field"))?;
        let Some(Value::Table(t)) = root.get_mut(section) else {
            return Err(ConfigError::at(key, "unknown section"));
        };
        t.insert(field.to_string(), value.to_value());
        RunConfig::from_table(&root)
    }

    pub fn model_spec(&self) -> CResult<ModelSpec> {
        let m = &self.model;
        let wrap =
            |key: &'static str| move |e: skt_core::Error| ConfigError::at(key, e.to_string());
        let reaction = match &m.reaction {
            ReactionConfig::Zero => ReactionSpec::Zero,
            ReactionConfig::LinearRelaxation => ReactionSpec::linear_relaxation(&m.lambda),
            ReactionConfig::Logistic { beta, gamma } => {
                ReactionSpec::logistic(beta.clone(), gamma.clone())
                    .map_err(wrap("model.reaction"))?
            }
        };
        ModelSpec::new(m.d, m.a0.clone(), m.a.clone())
            .map_err(wrap("model.a"))?
            .with_weights(m.pi.clone(), m.lambda.clone())
            .map_err(wrap("model.pi"))?
            .with_drift(m.b.clone())
            .map_err(wrap("model.b"))?
            .with_reaction(reaction)
            .map_err(wrap("model.reaction"))
    }

    pub fn grid(&self) -> CResult<Grid> {
        Grid::new(self.grid.extents.clone(), self.grid.cells.clone())
            .map_err(|e| ConfigError::at("grid.cells", e.to_string()))
    }

    pub fn cutoff_spec(&self) -> CResult<CutoffSpec> {
        let c = &self.cutoff;
        CutoffSpec::new(c.k, c.l, c.m, c.eps, c.profile)
            .map_err(|e| ConfigError::at("cutoff", e.to_string()))
    }

    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.time.newton_tol,
            max_iter: self.time.newton_iters,
            max_halvings: self.time.newton_halvings,
        }
    }

    pub fn sampling(&self) -> CResult<Sampling> {
        let s = &self.sampling;
        let out = Sampling {
            count: s.count,
            lo: s.lo,
            hi: s.hi,
            seed: self.seed,
            box_radius: s.box_radius,
            m0_search_max: s.m0_max,
        };
        out.validate()
            .map_err(|e| ConfigError::at("sampling", e.to_string()))?;
        Ok(out)
    }

    /// The closed-form reference built from the `initial` section.
    pub fn manufactured(&self, spec: &ModelSpec) -> CResult<ManufacturedSolution> {
        ManufacturedSolution::new(
            spec,
            &self.grid.extents,
            &self.initial.mean,
            &self.initial.amplitude,
        )
        .map_err(|e| ConfigError::at("initial", e.to_string()))
    }

    /// Initial data on `grid`: the manufactured profile at `t = 0`.
    pub fn initial_field(&self, grid: &Grid) -> CResult<Field> {
        let (mean, amp) = (&self.initial.mean, &self.initial.amplitude);
        let ext = &self.grid.extents;
        Field::from_fn(grid.clone(), self.model.n, |x, o| {
            let shape: f64 = x
                .iter()
                .zip(ext)
                .map(|(xa, l)| (std::f64::consts::PI * xa / l).cos())
                .product();
            for i in 0..o.len() {
                o[i] = mean[i] + amp[i] * shape;
            }
        })
        .map_err(|e| ConfigError::at("initial", e.to_string()))
    }

    pub fn window(&self) -> (f64, f64) {
        self.audit.window.unwrap_or((0.0, self.time.horizon))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
[model]
n = 2
d = 1
a0 = [1, 1]
a = [[1.0, 0.5], [0.5, 1.0]]

[grid]
extents = [1.0]
cells = [16]

[time]
horizon = 0.1
dt = 0.01
"#;

    #[test]
    fn defaults_and_round_trip() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.model.pi, vec![1.0, 1.0]);
        assert_eq!(c.cutoff.k, 3);
        assert_eq!(c.probe.mode, ProbeModeConfig::Manufactured);
        assert_eq!(RunConfig::parse(&c.render()).unwrap(), c);
    }

    #[test]
    fn missing_key_is_named() {
        let src = MINIMAL.replace("cells = [16]\n", "");
        let e = RunConfig::parse(&src).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("grid.cells"));
        assert!(e.to_string().contains("grid.cells"));
    }

    #[test]
    fn bad_value_points_at_line() {
        let src = MINIMAL.replace("dt = 0.01", "dt = -1.0");
        let e = RunConfig::parse(&src).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("time.dt"));
        assert_eq!(e.line, Some(14));
        let e = RunConfig::parse("[model\nn = 1").unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = RunConfig::parse(&format!("{MINIMAL}\n[cutoff]\nkk = 3\n")).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("cutoff.kk"));
    }

    #[test]
    fn window_past_horizon_is_rejected() {
        let src = format!("{MINIMAL}\n[audit]\nwindow = [0.0, 0.5]\n");
        assert_eq!(
            RunConfig::parse(&src).unwrap_err().key.as_deref(),
            Some("audit.window")
        );
    }

    #[test]
    fn overrides_and_sweep_order() {
        let src = format!("{MINIMAL}\n[sweep]\n\"cutoff.k\" = [10, 3]\n\"cutoff.profile\" = [\"smoothstep\", \"bump\"]\n");
        let c = RunConfig::parse(&src).unwrap();
        assert_eq!(RunConfig::parse(&c.render()).unwrap(), c);
        let o = c.with_override("cutoff.k", &SweepValue::Int(10)).unwrap();
        assert_eq!(o.cutoff.k, 10);
        assert!(o.sweep.is_empty());
        assert!(c.with_override("cutoff.k", &SweepValue::Int(2)).is_err());
        assert_eq!(
            SweepValue::Int(3).cmp_lex(&SweepValue::Float(2.5)),
            std::cmp::Ordering::Greater
        );
    }
}
