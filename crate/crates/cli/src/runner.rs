//! Executes a parsed scenario and writes its table plus a run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use coincidence_core::limits::{
    estimate_limit, fitted_order, sweep_ratio_curve, LimitEstimate, LimitProtocol, RatioScenario, RatioSelector,
    SweepPoint,
};
use coincidence_core::quadrature::{mean_density, Interval};
use coincidence_core::{Spwf, Statistics};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::scenario::{pair_overlap, DeltaSpec, Experiment, Format, Regime, Scenario, SweepSpec, WindowSpec};
use crate::table::{Cell, Table};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] coincidence_core::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Converged = 0,
    Failed = 1,
    Partial = 2,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Computed results, before anything touches the filesystem.
#[derive(Debug, Clone)]
pub struct Execution {
    pub table: Table,
    /// Replaces the row array in JSON output when present.
    pub json: Option<Value>,
    pub warnings: Vec<String>,
}

impl Execution {
    pub fn status(&self) -> ExitStatus {
        if self.table.all_converged() {
            ExitStatus::Converged
        } else {
            ExitStatus::Partial
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.table.to_csv(),
            Format::Json => {
                let v = self.json.clone().unwrap_or_else(|| self.table.to_json());
                let mut s = serde_json::to_string_pretty(&v).expect("json renders");
                s.push('\n');
                s
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: ExitStatus,
    pub output_path: PathBuf,
    pub manifest_path: PathBuf,
    pub warnings: Vec<String>,
}

fn vanishes_at(psi: &Spwf, x0: f64) -> bool {
    if psi.evaluate(x0).norm() == 0.0 {
        return true;
    }
    let Some(scale) = psi.length_scale() else { return false };
    let Ok(near) = Interval::centered(x0, 0.1 * scale) else { return false };
    psi.find_nodes(near).iter().any(|n| (n - x0).abs() <= 1e-9 * scale)
}

/// Regime implied by the states at `x0`: `None` when both vanish there.
pub fn detect_regime(psi1: &Spwf, psi2: &Spwf, x0: f64) -> Option<Regime> {
    match (vanishes_at(psi1, x0), vanishes_at(psi2, x0)) {
        (false, false) => Some(Regime::Regular),
        (true, false) | (false, true) => Some(Regime::Node),
        (true, true) => None,
    }
}

/// Non-fatal findings recorded in the manifest.
pub fn warnings(s: &Scenario) -> Vec<String> {
    let mut out = Vec::new();
    let detected = detect_regime(&s.psi1, &s.psi2, s.x0);
    match (s.regime, detected) {
        (Some(declared), Some(found)) if declared != found => out.push(format!(
            "declared regime {} but the states at x0 = {} look {}",
            declared.tag(),
            s.x0,
            found.tag()
        )),
        (Some(declared), None) => out.push(format!(
            "declared regime {} but both states vanish at x0 = {}",
            declared.tag(),
            s.x0
        )),
        _ => {}
    }
    if s.allow_non_orthogonal {
        if let Some(ov) = pair_overlap(&s.psi1, &s.psi2) {
            if ov >= crate::scenario::ORTHOGONALITY_TOL {
                out.push(format!(
                    "non-orthogonal pair (|<psi1|psi2>| = {ov:.3e}); the joint densities assume orthogonal states"
                ));
            }
        }
    }
    out
}

fn resolve_delta(s: &Scenario, sweep: &SweepSpec) -> f64 {
    match sweep.delta {
        DeltaSpec::Absolute(d) => d,
        DeltaSpec::OverLambda(f) => f * s.length_scale().expect("validated: catalog pair has a length scale"),
    }
}

fn ratio_scenario(s: &Scenario, selector: RatioSelector) -> RatioScenario {
    RatioScenario::new(s.psi1, s.psi2, s.x0, selector).with_rel_tol(s.rel_tol)
}

fn combine_sweeps(
    a_values: &[f64],
    delta: f64,
    curves: &[(String, Vec<SweepPoint>)],
    with_probabilities: bool,
) -> Table {
    let mut columns = vec!["a".to_string()];
    columns.extend(curves.iter().map(|(name, _)| name.clone()));
    columns.extend(["error", "converged", "delta", "eta"].map(String::from));
    if with_probabilities {
        columns.push("p_dis".into());
        columns.extend(curves.iter().map(|(name, _)| format!("p_{}", &name[6..9])));
    }
    let mut table = Table::new(columns);
    for (i, &a) in a_values.iter().enumerate() {
        let points: Vec<&SweepPoint> = curves.iter().map(|(_, c)| &c[i]).collect();
        let error = points.iter().map(|p| p.error).fold(0.0, f64::max);
        let converged = points.iter().all(|p| p.converged);
        let mut row: Vec<Cell> = vec![a.into()];
        row.extend(points.iter().map(|p| Cell::from(p.ratio)));
        row.extend([error.into(), converged.into(), delta.into(), (a * delta).into()]);
        if with_probabilities {
            row.push(points.first().map_or(f64::NAN, |p| p.denominator).into());
            row.extend(points.iter().map(|p| Cell::from(p.numerator)));
        }
        table.push(row, converged);
    }
    table
}

fn run_ratio_sweep(s: &Scenario, sweep: &SweepSpec) -> Result<Execution, RunError> {
    let delta = resolve_delta(s, sweep);
    let mut curves = Vec::new();
    for stat in s.selected_statistics() {
        let selector = RatioSelector::Statistics { numerator: stat, denominator: Statistics::Distinguishable };
        let points = sweep_ratio_curve(&ratio_scenario(s, selector), &sweep.a_values, delta)?;
        curves.push((format!("ratio_{}_dis", stat.tag()), points));
    }
    Ok(Execution {
        table: combine_sweeps(&sweep.a_values, delta, &curves, true),
        json: None,
        warnings: warnings(s),
    })
}

fn run_event_sweep(s: &Scenario, sweep: &SweepSpec) -> Result<Execution, RunError> {
    let delta = resolve_delta(s, sweep);
    let mut curves = Vec::new();
    for stat in s.selected_statistics() {
        let points = sweep_ratio_curve(&ratio_scenario(s, RatioSelector::Event { statistics: stat }), &sweep.a_values, delta)?;
        curves.push((format!("event_ratio_{}", stat.tag()), points));
    }
    Ok(Execution {
        table: combine_sweeps(&sweep.a_values, delta, &curves, false),
        json: None,
        warnings: warnings(s),
    })
}

fn protocol_tag(p: LimitProtocol) -> &'static str {
    match p {
        LimitProtocol::EtaFirst => "eta_first",
        LimitProtocol::DeltaFirst => "delta_first",
        LimitProtocol::FixedRatio { .. } => "fixed_ratio",
    }
}

fn run_limit_order(s: &Scenario, schedule: &coincidence_core::Schedule) -> Result<Execution, RunError> {
    let protocols = [LimitProtocol::EtaFirst, LimitProtocol::DeltaFirst];
    let stats = s.selected_statistics();
    let mut estimates: Vec<(LimitProtocol, Statistics, LimitEstimate)> = Vec::new();
    for protocol in protocols {
        for &stat in &stats {
            let selector = RatioSelector::Statistics { numerator: stat, denominator: Statistics::Distinguishable };
            let est = estimate_limit(&ratio_scenario(s, selector), protocol, schedule)?;
            estimates.push((protocol, stat, est));
        }
    }

    let mut table = Table::new([
        "protocol",
        "statistics",
        "ratio_to_dis",
        "extrapolation_error",
        "converged",
        "samples",
        "fitted_order",
    ]);
    let mut summary = Map::new();
    let mut details = Vec::new();
    for (protocol, stat, est) in &estimates {
        let order = fitted_order(&est.sequence, est.value).unwrap_or(f64::NAN);
        table.push(
            vec![
                protocol_tag(*protocol).into(),
                stat.tag().into(),
                est.value.into(),
                est.extrapolation_error.into(),
                est.converged.into(),
                est.sequence.len().into(),
                order.into(),
            ],
            est.converged,
        );
        summary
            .entry(protocol_tag(*protocol))
            .or_insert_with(|| Value::Object(Map::new()))
            .as_object_mut()
            .expect("object")
            .insert(stat.tag().into(), json_number(est.value));
        details.push(json!({
            "protocol": protocol_tag(*protocol),
            "statistics": stat.tag(),
            "value": json_number(est.value),
            "extrapolation_error": json_number(est.extrapolation_error),
            "converged": est.converged,
            "fitted_order": json_number(order),
            "sequence": est.sequence.iter().map(|p| json!({
                "parameter": json_number(p.parameter),
                "ratio": json_number(p.ratio),
                "error": json_number(p.error),
                "converged": p.converged,
            })).collect::<Vec<_>>(),
        }));
    }
    summary.insert("estimates".into(), Value::Array(details));
    Ok(Execution { table, json: Some(Value::Object(summary)), warnings: warnings(s) })
}

fn json_number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn run_mean_density(s: &Scenario, windows: &WindowSpec) -> Result<Execution, RunError> {
    let psi = s.psi1;
    let x0 = s.x0;
    let reference = psi.evaluate(x0).norm_sqr();
    let mut table =
        Table::new(["level", "half_width", "mean", "reference", "abs_diff_prev", "diff_ratio", "error", "converged"]);
    let mut prev_mean: Option<f64> = None;
    let mut prev_diff: Option<f64> = None;
    for level in 0..windows.levels {
        let h = windows.start * 0.5f64.powi(level as i32);
        let window = Interval::centered(0.0, h)?;
        let q = mean_density(|u| psi.evaluate_near(x0, u).norm_sqr(), window, s.rel_tol)?;
        let diff = prev_mean.map(|m| (q.value - m).abs());
        let ratio = match (prev_diff, diff) {
            (Some(p), Some(d)) => p / d,
            _ => f64::NAN,
        };
        table.push(
            vec![
                level.into(),
                h.into(),
                q.value.into(),
                reference.into(),
                diff.unwrap_or(f64::NAN).into(),
                ratio.into(),
                q.abs_error_estimate.into(),
                q.converged.into(),
            ],
            q.converged,
        );
        prev_mean = Some(q.value);
        prev_diff = diff;
    }
    Ok(Execution { table, json: None, warnings: warnings(s) })
}

/// Runs the scenario's experiment on the current thread pool.
pub fn execute(s: &Scenario) -> Result<Execution, RunError> {
    match &s.experiment {
        Experiment::RatioSweep(sweep) => run_ratio_sweep(s, sweep),
        Experiment::EventRatioSweep(sweep) => run_event_sweep(s, sweep),
        Experiment::LimitOrder(schedule) => run_limit_order(s, schedule),
        Experiment::MeanDensityCheck(w) => run_mean_density(s, w),
    }
}

/// Runs on a pool of `jobs` workers (all cores when `None`).
pub fn execute_with_jobs(s: &Scenario, jobs: Option<usize>) -> Result<Execution, RunError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| RunError::Pool(e.to_string()))?;
    pool.install(|| execute(s))
}

pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn default_output(s: &Scenario, scenario_path: &Path, format: Format) -> PathBuf {
    let stem = s
        .name
        .clone()
        .or_else(|| scenario_path.file_stem().map(|x| x.to_string_lossy().into_owned()))
        .unwrap_or_else(|| s.experiment.tag().to_string());
    PathBuf::from(format!("{stem}.{}", format.tag()))
}

pub fn manifest(s: &Scenario, exec: &Execution, output: &Path, format: Format, jobs: Option<usize>) -> Value {
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    json!({
        "tool": "coincidence-lab",
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": coincidence_core::VERSION,
        "timestamp_unix": timestamp,
        "scenario": s.to_json(),
        "output": {"path": output.to_string_lossy(), "format": format.tag()},
        "jobs": jobs,
        "convergence": {
            "rows": exec.table.rows.len(),
            "converged_rows": exec.table.converged.iter().filter(|c| **c).count(),
            "flagged_rows": exec.table.flagged_rows(),
        },
        "warnings": exec.warnings,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), RunError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, contents).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

/// Executes the scenario and writes the table and its manifest.
pub fn run(s: &Scenario, scenario_path: &Path, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let format = opts.format.or(s.output.format).unwrap_or(Format::Csv);
    let output_path = opts
        .out
        .clone()
        .or_else(|| s.output.path.clone())
        .unwrap_or_else(|| default_output(s, scenario_path, format));
    let exec = execute_with_jobs(s, opts.jobs)?;
    write(&output_path, &exec.render(format))?;
    let manifest_path = manifest_path_for(&output_path);
    let m = manifest(s, &exec, &output_path, format, opts.jobs);
    write(&manifest_path, &(serde_json::to_string_pretty(&m).expect("manifest renders") + "\n"))?;
    Ok(RunOutcome { status: exec.status(), output_path, manifest_path, warnings: exec.warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regime_detection() {
        let b2 = Spwf::box_state(2, 1.0).unwrap();
        let b1 = Spwf::box_state(1, 1.0).unwrap();
        assert_eq!(detect_regime(&b2, &b1, 0.5), Some(Regime::Node));
        assert_eq!(detect_regime(&b2, &b1, 0.25), Some(Regime::Regular));
        let b4 = Spwf::box_state(4, 1.0).unwrap();
        assert_eq!(detect_regime(&b2, &b4, 0.5), None);
    }

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(manifest_path_for(Path::new("out/fig2.csv")), PathBuf::from("out/fig2.csv.manifest.json"));
    }
}
