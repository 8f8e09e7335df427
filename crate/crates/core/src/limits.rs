//! Limit protocols for shrinking detector geometries.
//!
//! Three paths to the point-detector limit are supported: merge the
//! detectors first (`eta -> 0`, then `delta -> 0`), shrink them first
//! (`delta -> 0`, then `eta -> 0`), or shrink along `eta = a * delta`. Every
//! ratio sampled along a geometric schedule is an even function of the
//! shrinking parameter, so the sequence is extrapolated to zero with
//! polynomial (Richardson) extrapolation in the squared parameter.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{event_ratio, statistics_ratio, CoincidenceEvent, DetectorPair, RatioValue};
use crate::error::{Error, Result};
use crate::jointdensity::{JointDensity, Statistics};
use crate::spwf::Spwf;

/// Successive extrapolants closer than this count as converged.
pub const CONVERGENCE_TOL: f64 = 1e-6;
/// Largest allowed start value of a schedule, as a fraction of the shortest
/// wavefunction length scale.
pub const MAX_START_FRACTION: f64 = 1e-2;
/// Smallest allowed window half-width, as a fraction of that length scale.
pub const MIN_WIDTH_FRACTION: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum LimitProtocol {
    /// `eta -> 0` at fixed `delta`, then `delta -> 0`.
    EtaFirst,
    /// `delta -> 0` at fixed `eta`, then `eta -> 0`.
    DeltaFirst,
    /// `eta = a * delta -> 0`.
    FixedRatio { a: f64 },
}

/// Which ratio of coincidence probabilities to follow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RatioSelector {
    /// `P_numerator(LeftRight) / P_denominator(LeftRight)`.
    Statistics { numerator: Statistics, denominator: Statistics },
    /// `P(LeftRight) / P(SameEither)` for one statistics.
    Event { statistics: Statistics },
}

/// A wavefunction pair at a detector center together with the ratio to probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioScenario {
    pub psi1: Spwf,
    pub psi2: Spwf,
    pub x0: f64,
    pub selector: RatioSelector,
    pub rel_tol: f64,
}

impl RatioScenario {
    pub fn new(psi1: Spwf, psi2: Spwf, x0: f64, selector: RatioSelector) -> Self {
        Self { psi1, psi2, x0, selector, rel_tol: crate::DEFAULT_REL_TOL }
    }

    pub fn with_rel_tol(self, rel_tol: f64) -> Self {
        Self { rel_tol, ..self }
    }

    /// Shortest length scale of the two states; `None` when both are local
    /// models.
    pub fn length_scale(&self) -> Option<f64> {
        match (self.psi1.length_scale(), self.psi2.length_scale()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    pub fn ratio_at(&self, g: &DetectorPair) -> Result<RatioValue> {
        let jd = |s| JointDensity::new(self.psi1, self.psi2, s);
        match self.selector {
            RatioSelector::Statistics { numerator, denominator } => {
                statistics_ratio(&jd(numerator), &jd(denominator), g, CoincidenceEvent::LeftRight, self.rel_tol)
            }
            RatioSelector::Event { statistics } => event_ratio(&jd(statistics), g, self.rel_tol),
        }
    }

    /// Refuses geometries that leave the narrow-detector regime of catalog
    /// states.
    fn check_extent(&self, largest: f64, smallest: f64) -> Result<()> {
        if let Some(scale) = self.length_scale() {
            if largest > MAX_START_FRACTION * scale * (1.0 + 1e-12) {
                return Err(Error::InvalidSchedule(format!(
                    "schedule start {largest} exceeds {MAX_START_FRACTION} x length scale {scale}"
                )));
            }
            if smallest < MIN_WIDTH_FRACTION * scale {
                return Err(Error::InvalidSchedule(format!(
                    "window half-width {smallest} below {MIN_WIDTH_FRACTION} x length scale {scale}"
                )));
            }
        }
        Ok(())
    }
}

/// Geometric sequence `start * factor^i`, `i < samples`. Iterated protocols
/// start their inner sequence at `outer * inner_fraction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub start: f64,
    pub samples: usize,
    #[serde(default = "default_factor")]
    pub factor: f64,
    #[serde(default = "default_inner_fraction")]
    pub inner_fraction: f64,
}

fn default_factor() -> f64 {
    0.5
}

fn default_inner_fraction() -> f64 {
    0.25
}

impl Schedule {
    pub fn new(start: f64, samples: usize) -> Self {
        Self { start, samples, factor: default_factor(), inner_fraction: default_inner_fraction() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.start > 0.0) {
            return Err(Error::InvalidSchedule(format!("start must be finite and > 0, got {}", self.start)));
        }
        if self.samples < 6 {
            return Err(Error::InvalidSchedule(format!("need at least 6 samples, got {}", self.samples)));
        }
        if !(self.factor > 0.0 && self.factor < 1.0) {
            return Err(Error::InvalidSchedule(format!("factor must lie in (0, 1), got {}", self.factor)));
        }
        if !(self.inner_fraction > 0.0 && self.inner_fraction <= 1.0) {
            return Err(Error::InvalidSchedule(format!(
                "inner_fraction must lie in (0, 1], got {}",
                self.inner_fraction
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        self.scaled(self.start)
    }

    fn scaled(&self, start: f64) -> Vec<f64> {
        (0..self.samples).map(|i| start * self.factor.powi(i as i32)).collect()
    }

    fn last(&self, start: f64) -> f64 {
        start * self.factor.powi(self.samples as i32 - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSample {
    /// Value of the outer (or only) shrinking parameter.
    pub parameter: f64,
    pub ratio: f64,
    /// Quadrature error for direct samples, extrapolation error for inner
    /// limits.
    pub error: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub value: f64,
    pub sequence: Vec<LimitSample>,
    pub extrapolation_error: f64,
    pub converged: bool,
}

/// Result of extrapolating a sequence to zero parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolation {
    pub value: f64,
    pub error: f64,
    /// Extrapolants using the first 1, 2, ... samples.
    pub diagonal: Vec<f64>,
}

/// Polynomial extrapolation in `h^2` to `h = 0` (Neville's scheme).
///
/// The reported value is the extrapolant whose change from its predecessor
/// is smallest; that change is the error estimate.
pub fn richardson(params: &[f64], values: &[f64]) -> Extrapolation {
    assert_eq!(params.len(), values.len());
    let n = values.len();
    if n == 0 {
        return Extrapolation { value: f64::NAN, error: f64::INFINITY, diagonal: vec![] };
    }
    let t: Vec<f64> = params.iter().map(|h| h * h).collect();
    let mut prev_row: Vec<f64> = Vec::with_capacity(n);
    let mut diagonal = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(i + 1);
        row.push(values[i]);
        for k in 1..=i {
            let a = row[k - 1];
            let b = prev_row[k - 1];
            row.push(a + t[i] * (a - b) / (t[i - k] - t[i]));
        }
        diagonal.push(row[i]);
        prev_row = row;
    }
    if n == 1 {
        return Extrapolation { value: diagonal[0], error: f64::INFINITY, diagonal };
    }
    let (best, error) = (1..n)
        .map(|k| (k, (diagonal[k] - diagonal[k - 1]).abs()))
        .fold((n - 1, f64::INFINITY), |acc, (k, e)| if e.is_finite() && e < acc.1 { (k, e) } else { acc });
    Extrapolation { value: diagonal[best], error, diagonal }
}

fn extrapolate_samples(samples: &[LimitSample]) -> (f64, f64, bool) {
    let good: Vec<&LimitSample> = samples.iter().take_while(|s| s.ratio.is_finite()).collect();
    if good.len() < 3 {
        let last = good.last().map_or(f64::NAN, |s| s.ratio);
        return (last, f64::INFINITY, false);
    }
    let params: Vec<f64> = good.iter().map(|s| s.parameter).collect();
    let values: Vec<f64> = good.iter().map(|s| s.ratio).collect();
    let ex = richardson(&params, &values);
    let complete = good.len() == samples.len() && good.iter().all(|s| s.converged);
    (ex.value, ex.error, complete && ex.error < CONVERGENCE_TOL)
}

fn direct_sample(scn: &RatioScenario, parameter: f64, g: Result<DetectorPair>) -> LimitSample {
    match g.and_then(|g| scn.ratio_at(&g)) {
        Ok(r) => LimitSample { parameter, ratio: r.value, error: r.error, converged: r.converged },
        Err(_) => LimitSample { parameter, ratio: f64::NAN, error: f64::INFINITY, converged: false },
    }
}

/// Estimates the limit of the selected ratio along `protocol`.
pub fn estimate_limit(scn: &RatioScenario, protocol: LimitProtocol, schedule: &Schedule) -> Result<LimitEstimate> {
    schedule.validate()?;
    let x0 = scn.x0;
    match protocol {
        LimitProtocol::FixedRatio { a } => {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::InvalidSchedule(format!("ratio a must be finite and >= 0, got {a}")));
            }
            scn.check_extent(schedule.start * a.max(1.0), schedule.last(schedule.start))?;
            let sequence: Vec<LimitSample> = schedule
                .values()
                .into_par_iter()
                .map(|delta| direct_sample(scn, delta, DetectorPair::with_ratio(x0, a, delta)))
                .collect();
            let (value, extrapolation_error, converged) = extrapolate_samples(&sequence);
            Ok(LimitEstimate { value, sequence, extrapolation_error, converged })
        }
        LimitProtocol::EtaFirst | LimitProtocol::DeltaFirst => {
            let eta_first = protocol == LimitProtocol::EtaFirst;
            let outer = schedule.values();
            let inner_start = schedule.start * schedule.inner_fraction;
            let smallest_width = if eta_first {
                schedule.last(schedule.start)
            } else {
                schedule.last(schedule.last(inner_start))
            };
            scn.check_extent(schedule.start, smallest_width)?;

            let grid: Vec<(usize, f64)> = outer
                .iter()
                .enumerate()
                .flat_map(|(i, &o)| schedule.scaled(o * schedule.inner_fraction).into_iter().map(move |v| (i, v)))
                .collect();
            let raw: Vec<(usize, LimitSample)> = grid
                .into_par_iter()
                .map(|(i, inner)| {
                    let o = outer[i];
                    let g = if eta_first {
                        DetectorPair::new(x0, inner, o)
                    } else {
                        DetectorPair::new(x0, o, inner)
                    };
                    (i, direct_sample(scn, inner, g))
                })
                .collect();

            let sequence: Vec<LimitSample> = outer
                .iter()
                .enumerate()
                .map(|(i, &o)| {
                    let inner: Vec<LimitSample> =
                        raw.iter().filter(|(k, _)| *k == i).map(|(_, s)| *s).collect();
                    let (ratio, error, converged) = extrapolate_samples(&inner);
                    LimitSample { parameter: o, ratio, error, converged }
                })
                .collect();
            let (value, outer_error, outer_converged) = extrapolate_samples(&sequence);
            let inner_error = sequence.iter().map(|s| s.error).fold(0.0, f64::max);
            Ok(LimitEstimate {
                value,
                extrapolation_error: outer_error + inner_error,
                converged: outer_converged && inner_error < CONVERGENCE_TOL,
                sequence,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub a: f64,
    pub eta: f64,
    pub delta: f64,
    pub ratio: f64,
    pub error: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub converged: bool,
}

/// One ratio per `a` at fixed `delta`, with `eta = a * delta`. Failed
/// points come back with a NaN ratio and `converged = false`.
pub fn sweep_ratio_curve(scn: &RatioScenario, a_values: &[f64], delta: f64) -> Result<Vec<SweepPoint>> {
    if let Some(bad) = a_values.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::InvalidSchedule(format!("a values must be finite and >= 0, got {bad}")));
    }
    if let Some(scale) = scn.length_scale() {
        if delta > MAX_START_FRACTION * scale * (1.0 + 1e-12) {
            return Err(Error::InvalidSchedule(format!(
                "delta {delta} exceeds {MAX_START_FRACTION} x length scale {scale}"
            )));
        }
    }
    Ok(a_values
        .par_iter()
        .map(|&a| {
            let eta = a * delta;
            match DetectorPair::with_ratio(scn.x0, a, delta).and_then(|g| scn.ratio_at(&g)) {
                Ok(r) => SweepPoint {
                    a,
                    eta,
                    delta,
                    ratio: r.value,
                    error: r.error,
                    numerator: r.numerator.value,
                    denominator: r.denominator.value,
                    converged: r.converged,
                },
                Err(_) => SweepPoint {
                    a,
                    eta,
                    delta,
                    ratio: f64::NAN,
                    error: f64::INFINITY,
                    numerator: f64::NAN,
                    denominator: f64::NAN,
                    converged: false,
                },
            }
        })
        .collect())
}

/// Closed-form a-dependences of the node-case ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum AsymptoticModel {
    /// `1 / (1 + 3a^2)`: bosons over distinguishable.
    BosonOverDistinguishable,
    /// `2 - 1 / (1 + 3a^2)`: fermions over distinguishable.
    FermionOverDistinguishable,
    /// `1 / (1 + 6a^2)`: boson split-window over same-window.
    BosonEvent,
    /// `1 + 6a^2`: fermion split-window over same-window.
    FermionEvent,
    Constant { value: f64 },
}

impl AsymptoticModel {
    pub fn eval(&self, a: f64) -> f64 {
        let a2 = a * a;
        match *self {
            AsymptoticModel::BosonOverDistinguishable => 1.0 / (1.0 + 3.0 * a2),
            AsymptoticModel::FermionOverDistinguishable => 2.0 - 1.0 / (1.0 + 3.0 * a2),
            AsymptoticModel::BosonEvent => 1.0 / (1.0 + 6.0 * a2),
            AsymptoticModel::FermionEvent => 1.0 + 6.0 * a2,
            AsymptoticModel::Constant { value } => value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub max_abs_deviation: f64,
    pub max_rel_deviation: f64,
    pub points_used: usize,
}

/// Largest deviation of the converged sweep points from `model`.
pub fn fit_asymptotic(points: &[SweepPoint], model: AsymptoticModel) -> Result<FitReport> {
    let used: Vec<&SweepPoint> = points.iter().filter(|p| p.converged && p.ratio.is_finite()).collect();
    if used.len() < 4 {
        return Err(Error::InsufficientPoints(used.len()));
    }
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    for p in &used {
        let expected = model.eval(p.a);
        let dev = (p.ratio - expected).abs();
        max_abs = max_abs.max(dev);
        max_rel = max_rel.max(dev / expected.abs());
    }
    Ok(FitReport { max_abs_deviation: max_abs, max_rel_deviation: max_rel, points_used: used.len() })
}

/// Deviations below this (relative to the limit) are rounding noise and
/// carry no convergence order.
const ORDER_NOISE_FLOOR: f64 = 1e-12;

/// Least-squares slope of `ln|ratio - limit|` against `ln(parameter)`:
/// the empirical order at which the sequence approaches `limit`. `None` when
/// fewer than two samples stand above the noise floor.
pub fn fitted_order(samples: &[LimitSample], limit: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.ratio.is_finite() && s.parameter > 0.0)
        .map(|s| (s.parameter.ln(), (s.ratio - limit).abs()))
        .filter(|(_, d)| *d > ORDER_NOISE_FLOOR * limit.abs().max(1.0))
        .map(|(x, d)| (x, d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
