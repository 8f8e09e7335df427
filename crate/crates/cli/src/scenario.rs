//! Scenario files: a JSON document naming the wavefunction pair, the
//! detector center and one experiment.
//!
//! Parsing collects every problem it finds instead of stopping at the first.

use std::fmt;
use std::path::PathBuf;

use coincidence_core::limits::{Schedule, MAX_START_FRACTION};
use coincidence_core::quadrature::Interval;
use coincidence_core::{Spwf, Statistics, DEFAULT_REL_TOL};
use serde_json::{json, Map, Value};
use thiserror::Error;

/// Largest |overlap| accepted as orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario is not valid JSON: {0}")]
    Syntax(String),
    #[error("{} validation error(s):\n  - {}", .0.len(), .0.join("\n  - "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// One state has a node at `x0`, the other does not.
    Node,
    /// Neither state vanishes at `x0`.
    Regular,
}

impl Regime {
    pub fn tag(self) -> &'static str {
        match self {
            Regime::Node => "node",
            Regime::Regular => "regular",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn tag(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Half-width of the detectors in a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaSpec {
    Absolute(f64),
    /// Multiple of the pair's shortest length scale.
    OverLambda(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub a_values: Vec<f64>,
    pub delta: DeltaSpec,
}

/// Nested windows `[x0 - h, x0 + h]` with `h = start * 2^-i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub start: f64,
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    RatioSweep(SweepSpec),
    EventRatioSweep(SweepSpec),
    LimitOrder(Schedule),
    MeanDensityCheck(WindowSpec),
}

impl Experiment {
    pub fn tag(&self) -> &'static str {
        match self {
            Experiment::RatioSweep(_) => "ratio_sweep",
            Experiment::EventRatioSweep(_) => "event_ratio_sweep",
            Experiment::LimitOrder(_) => "limit_order",
            Experiment::MeanDensityCheck(_) => "mean_density_check",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: Option<String>,
    pub experiment: Experiment,
    pub psi1: Spwf,
    pub psi2: Spwf,
    pub x0: f64,
    pub regime: Option<Regime>,
    pub statistics: Vec<Statistics>,
    pub rel_tol: f64,
    pub allow_non_orthogonal: bool,
    pub output: OutputSpec,
}

impl Scenario {
    /// Shortest length scale of the pair; `None` if both are local models.
    pub fn length_scale(&self) -> Option<f64> {
        match (self.psi1.length_scale(), self.psi2.length_scale()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Statistics selected for the experiment, with per-experiment defaults.
    pub fn selected_statistics(&self) -> Vec<Statistics> {
        if !self.statistics.is_empty() {
            return self.statistics.clone();
        }
        match self.experiment {
            Experiment::EventRatioSweep(_) => Statistics::ALL.to_vec(),
            _ => vec![Statistics::Boson, Statistics::Fermion],
        }
    }

    /// Echo in the same layout the parser reads.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        if let Some(name) = &self.name {
            m.insert("name".into(), json!(name));
        }
        m.insert("experiment".into(), json!(self.experiment.tag()));
        m.insert("psi1".into(), serde_json::to_value(self.psi1).expect("spwf serializes"));
        m.insert("psi2".into(), serde_json::to_value(self.psi2).expect("spwf serializes"));
        m.insert("x0".into(), json!(self.x0));
        if let Some(regime) = self.regime {
            m.insert("regime".into(), json!(regime.tag()));
        }
        if !self.statistics.is_empty() {
            m.insert("statistics".into(), json!(self.statistics.iter().map(|s| s.tag()).collect::<Vec<_>>()));
        }
        m.insert("rel_tol".into(), json!(self.rel_tol));
        m.insert("allow_non_orthogonal".into(), json!(self.allow_non_orthogonal));
        match &self.experiment {
            Experiment::RatioSweep(s) | Experiment::EventRatioSweep(s) => {
                let mut sw = Map::new();
                sw.insert("a_values".into(), json!(s.a_values));
                match s.delta {
                    DeltaSpec::Absolute(d) => sw.insert("delta".into(), json!(d)),
                    DeltaSpec::OverLambda(d) => sw.insert("delta_over_lambda".into(), json!(d)),
                };
                m.insert("sweep".into(), Value::Object(sw));
            }
            Experiment::LimitOrder(s) => {
                m.insert("schedule".into(), serde_json::to_value(s).expect("schedule serializes"));
            }
            Experiment::MeanDensityCheck(w) => {
                m.insert("windows".into(), json!({"start": w.start, "levels": w.levels}));
            }
        }
        let mut out = Map::new();
        if let Some(p) = &self.output.path {
            out.insert("path".into(), json!(p.to_string_lossy()));
        }
        if let Some(f) = self.output.format {
            out.insert("format".into(), json!(f.tag()));
        }
        if !out.is_empty() {
            m.insert("output".into(), Value::Object(out));
        }
        Value::Object(m)
    }
}

const TOP_KEYS: &[&str] = &[
    "name",
    "experiment",
    "psi1",
    "psi2",
    "x0",
    "regime",
    "statistics",
    "rel_tol",
    "allow_non_orthogonal",
    "sweep",
    "schedule",
    "windows",
    "output",
];

struct Collector {
    errors: Vec<String>,
}

impl Collector {
    fn push(&mut self, msg: impl Into<String>) {
        self.errors.push(msg.into());
    }

    fn number(&mut self, obj: &Map<String, Value>, key: &str, ctx: &str) -> Option<f64> {
        match obj.get(key) {
            None => {
                self.push(format!("{ctx}{key}: missing"));
                None
            }
            Some(v) => self.as_number(v, &format!("{ctx}{key}")),
        }
    }

    fn as_number(&mut self, v: &Value, path: &str) -> Option<f64> {
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.push(format!("{path}: expected a finite number, got {v}"));
                None
            }
        }
    }

    fn count(&mut self, obj: &Map<String, Value>, key: &str, ctx: &str) -> Option<usize> {
        match obj.get(key) {
            None => {
                self.push(format!("{ctx}{key}: missing"));
                None
            }
            Some(v) => match v.as_u64() {
                Some(n) => Some(n as usize),
                None => {
                    self.push(format!("{ctx}{key}: expected a non-negative integer, got {v}"));
                    None
                }
            },
        }
    }

    fn object<'a>(&mut self, v: Option<&'a Value>, path: &str) -> Option<&'a Map<String, Value>> {
        match v {
            None => {
                self.push(format!("{path}: missing"));
                None
            }
            Some(Value::Object(m)) => Some(m),
            Some(other) => {
                self.push(format!("{path}: expected an object, got {other}"));
                None
            }
        }
    }

    fn unknown_keys(&mut self, obj: &Map<String, Value>, allowed: &[&str], ctx: &str) {
        for k in obj.keys() {
            if !allowed.contains(&k.as_str()) {
                self.push(format!("{ctx}{k}: unknown key"));
            }
        }
    }
}

fn parse_spwf(c: &mut Collector, v: Option<&Value>, path: &str) -> Option<Spwf> {
    let v = v.or_else(|| {
        c.push(format!("{path}: missing"));
        None
    })?;
    match serde_json::from_value::<Spwf>(v.clone()) {
        Ok(psi) => Some(psi),
        Err(e) => {
            c.push(format!("{path}: {e}"));
            None
        }
    }
}

fn parse_sweep(c: &mut Collector, v: Option<&Value>) -> Option<SweepSpec> {
    let obj = c.object(v, "sweep")?;
    c.unknown_keys(obj, &["a_values", "delta", "delta_over_lambda"], "sweep.");
    let a_values = match obj.get("a_values") {
        Some(Value::Array(items)) if !items.is_empty() => {
            let parsed: Vec<Option<f64>> =
                items.iter().enumerate().map(|(i, v)| c.as_number(v, &format!("sweep.a_values[{i}]"))).collect();
            let parsed: Option<Vec<f64>> = parsed.into_iter().collect();
            if let Some(vals) = &parsed {
                if let Some(bad) = vals.iter().find(|a| **a < 0.0) {
                    c.push(format!("sweep.a_values: values must be >= 0, got {bad}"));
                }
            }
            parsed
        }
        Some(other) => {
            c.push(format!("sweep.a_values: expected a non-empty array of numbers, got {other}"));
            None
        }
        None => {
            c.push("sweep.a_values: missing");
            None
        }
    };
    let delta = match (obj.get("delta"), obj.get("delta_over_lambda")) {
        (Some(_), Some(_)) => {
            c.push("sweep: give either delta or delta_over_lambda, not both");
            None
        }
        (Some(v), None) => c.as_number(v, "sweep.delta").map(DeltaSpec::Absolute),
        (None, Some(v)) => c.as_number(v, "sweep.delta_over_lambda").map(DeltaSpec::OverLambda),
        (None, None) => {
            c.push("sweep: one of delta or delta_over_lambda is required");
            None
        }
    };
    if let Some(DeltaSpec::Absolute(d) | DeltaSpec::OverLambda(d)) = delta {
        if d <= 0.0 {
            c.push(format!("sweep: detector half-width must be > 0, got {d}"));
        }
    }
    Some(SweepSpec { a_values: a_values?, delta: delta? })
}

fn parse_schedule(c: &mut Collector, v: Option<&Value>) -> Option<Schedule> {
    let obj = c.object(v, "schedule")?;
    c.unknown_keys(obj, &["start", "samples", "factor", "inner_fraction"], "schedule.");
    let start = c.number(obj, "start", "schedule.");
    let samples = c.count(obj, "samples", "schedule.");
    let factor = obj.get("factor").map(|v| c.as_number(v, "schedule.factor"));
    let inner = obj.get("inner_fraction").map(|v| c.as_number(v, "schedule.inner_fraction"));
    let mut s = Schedule::new(start?, samples?);
    if let Some(f) = factor {
        s.factor = f?;
    }
    if let Some(f) = inner {
        s.inner_fraction = f?;
    }
    if let Err(e) = s.validate() {
        c.push(format!("schedule: {e}"));
    }
    Some(s)
}

fn parse_windows(c: &mut Collector, v: Option<&Value>) -> Option<WindowSpec> {
    let obj = c.object(v, "windows")?;
    c.unknown_keys(obj, &["start", "levels"], "windows.");
    let start = c.number(obj, "start", "windows.");
    let levels = c.count(obj, "levels", "windows.");
    if let Some(s) = start {
        if s <= 0.0 {
            c.push(format!("windows.start: must be > 0, got {s}"));
        }
    }
    if let Some(l) = levels {
        if l < 3 {
            c.push(format!("windows.levels: need at least 3 nested windows, got {l}"));
        }
    }
    Some(WindowSpec { start: start?, levels: levels? })
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
    let Value::Object(root) = doc else {
        return Err(ScenarioError::Invalid(vec!["scenario must be a JSON object".into()]));
    };
    let mut c = Collector { errors: Vec::new() };
    c.unknown_keys(&root, TOP_KEYS, "");

    let name = match root.get("name") {
        None => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(other) => {
            c.push(format!("name: expected a string, got {other}"));
            None
        }
    };
    let psi1 = parse_spwf(&mut c, root.get("psi1"), "psi1");
    let psi2 = parse_spwf(&mut c, root.get("psi2"), "psi2");
    let x0 = c.number(&root, "x0", "");

    let regime = match root.get("regime").map(|v| v.as_str()) {
        None => None,
        Some(Some("node")) => Some(Regime::Node),
        Some(Some("regular")) => Some(Regime::Regular),
        Some(_) => {
            c.push(format!("regime: expected \"node\" or \"regular\", got {}", root["regime"]));
            None
        }
    };

    let statistics = match root.get("statistics") {
        None => vec![],
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .filter_map(|(i, v)| match v.as_str().map(str::parse::<Statistics>) {
                Some(Ok(s)) => Some(s),
                Some(Err(e)) => {
                    c.push(format!("statistics[{i}]: {e}"));
                    None
                }
                None => {
                    c.push(format!("statistics[{i}]: expected a string, got {v}"));
                    None
                }
            })
            .collect(),
        Some(other) => {
            c.push(format!("statistics: expected an array, got {other}"));
            vec![]
        }
    };

    let rel_tol = match root.get("rel_tol") {
        None => Some(DEFAULT_REL_TOL),
        Some(v) => c.as_number(v, "rel_tol"),
    };
    if let Some(t) = rel_tol {
        if !(1e-14..=1e-2).contains(&t) {
            c.push(format!("rel_tol: must lie in [1e-14, 1e-2], got {t}"));
        }
    }

    let allow_non_orthogonal = match root.get("allow_non_orthogonal") {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(other) => {
            c.push(format!("allow_non_orthogonal: expected a boolean, got {other}"));
            false
        }
    };

    let experiment = match root.get("experiment").map(|v| v.as_str()) {
        Some(Some("ratio_sweep")) => parse_sweep(&mut c, root.get("sweep")).map(Experiment::RatioSweep),
        Some(Some("event_ratio_sweep")) => parse_sweep(&mut c, root.get("sweep")).map(Experiment::EventRatioSweep),
        Some(Some("limit_order")) => parse_schedule(&mut c, root.get("schedule")).map(Experiment::LimitOrder),
        Some(Some("mean_density_check")) => {
            parse_windows(&mut c, root.get("windows")).map(Experiment::MeanDensityCheck)
        }
        Some(_) => {
            c.push(format!(
                "experiment: expected one of ratio_sweep, event_ratio_sweep, limit_order, mean_density_check, got {}",
                root["experiment"]
            ));
            None
        }
        None => {
            c.push("experiment: missing");
            None
        }
    };
    if let Some(exp) = &experiment {
        let used = match exp {
            Experiment::RatioSweep(_) | Experiment::EventRatioSweep(_) => "sweep",
            Experiment::LimitOrder(_) => "schedule",
            Experiment::MeanDensityCheck(_) => "windows",
        };
        for key in ["sweep", "schedule", "windows"] {
            if key != used && root.contains_key(key) {
                c.push(format!("{key}: not used by experiment {}", exp.tag()));
            }
        }
        if matches!(exp, Experiment::RatioSweep(_) | Experiment::LimitOrder(_))
            && statistics.contains(&Statistics::Distinguishable)
        {
            c.push("statistics: dis is the denominator of every ratio here; list only bos and/or fer");
        }
    }

    let output = match root.get("output") {
        None => OutputSpec::default(),
        Some(v) => match c.object(Some(v), "output") {
            Some(obj) => {
                c.unknown_keys(obj, &["path", "format"], "output.");
                let path = match obj.get("path") {
                    None => None,
                    Some(Value::String(s)) => Some(PathBuf::from(s)),
                    Some(other) => {
                        c.push(format!("output.path: expected a string, got {other}"));
                        None
                    }
                };
                let format = match obj.get("format") {
                    None => None,
                    Some(v) => match v.as_str().and_then(Format::parse) {
                        Some(f) => Some(f),
                        None => {
                            c.push(format!("output.format: expected \"csv\" or \"json\", got {v}"));
                            None
                        }
                    },
                };
                OutputSpec { path, format }
            }
            None => OutputSpec::default(),
        },
    };

    if let (Some(psi1), Some(psi2)) = (psi1, psi2) {
        check_pair(&mut c, &psi1, &psi2, allow_non_orthogonal);
        if let (Some(exp), Some(x0)) = (&experiment, x0) {
            check_extent(&mut c, &psi1, &psi2, exp, x0);
        }
    }

    if !c.errors.is_empty() {
        return Err(ScenarioError::Invalid(c.errors));
    }
    Ok(Scenario {
        name,
        experiment: experiment.expect("checked"),
        psi1: psi1.expect("checked"),
        psi2: psi2.expect("checked"),
        x0: x0.expect("checked"),
        regime,
        statistics,
        rel_tol: rel_tol.expect("checked"),
        allow_non_orthogonal,
        output,
    })
}

/// Overlap of two catalog states over the hull of their natural domains.
pub fn pair_overlap(psi1: &Spwf, psi2: &Spwf) -> Option<f64> {
    let (d1, d2) = (psi1.natural_domain()?, psi2.natural_domain()?);
    let hull = Interval::new(d1.lo().min(d2.lo()), d1.hi().max(d2.hi())).ok()?;
    psi1.overlap(psi2, hull).ok().map(|z| z.norm())
}

fn check_pair(c: &mut Collector, psi1: &Spwf, psi2: &Spwf, allow_non_orthogonal: bool) {
    if let Some(ov) = pair_overlap(psi1, psi2) {
        if ov >= ORTHOGONALITY_TOL && !allow_non_orthogonal {
            c.push(format!(
                "non-orthogonal pair: |<psi1|psi2>| = {ov:.3e} >= {ORTHOGONALITY_TOL:e}; set allow_non_orthogonal to override"
            ));
        }
    }
}

fn check_extent(c: &mut Collector, psi1: &Spwf, psi2: &Spwf, exp: &Experiment, x0: f64) {
    let scale = match (psi1.length_scale(), psi2.length_scale()) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let Some(scale) = scale else {
        if let Experiment::RatioSweep(SweepSpec { delta: DeltaSpec::OverLambda(_), .. })
        | Experiment::EventRatioSweep(SweepSpec { delta: DeltaSpec::OverLambda(_), .. }) = exp
        {
            c.push("sweep.delta_over_lambda: local models carry no length scale; give delta instead");
        }
        return;
    };
    let limit = MAX_START_FRACTION * scale;
    let largest = match exp {
        Experiment::RatioSweep(s) | Experiment::EventRatioSweep(s) => match s.delta {
            DeltaSpec::Absolute(d) => Some(("sweep delta", d)),
            DeltaSpec::OverLambda(f) => Some(("sweep delta", f * scale)),
        },
        Experiment::LimitOrder(s) => Some(("schedule start", s.start)),
        Experiment::MeanDensityCheck(w) => Some(("windows start", w.start)),
    };
    if let Some((what, v)) = largest {
        if v > limit * (1.0 + 1e-12) {
            c.push(format!(
                "{what} = {v:e} violates the narrow-detector condition: must be <= {MAX_START_FRACTION} x lambda = {limit:e}"
            ));
        }
    }
    if !x0.is_finite() {
        c.push("x0: must be finite");
    }
}
