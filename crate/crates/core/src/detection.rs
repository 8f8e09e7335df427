//! Detector geometry, coincidence probabilities and the ratios built from
//! them.
//!
//! All window integrals run in coordinates local to the common detector
//! center `x0`, so that half-widths many decades below `x0` keep their
//! precision.

use std::cell::Cell;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jointdensity::{JointDensity, Statistics};
use crate::quadrature::{integrate_2d_with, Interval, QuadratureResult, Rectangle, Tolerance};

/// Two equal detectors centered at `x0 - eta` and `x0 + eta`, each of
/// half-width `delta`. The windows overlap when `eta < delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorPair {
    pub x0: f64,
    pub eta: f64,
    pub delta: f64,
}

impl DetectorPair {
    pub fn new(x0: f64, eta: f64, delta: f64) -> Result<Self> {
        if !x0.is_finite() {
            return Err(Error::InvalidGeometry(format!("x0 must be finite, got {x0}")));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidGeometry(format!("eta must be finite and >= 0, got {eta}")));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidGeometry(format!("delta must be finite and > 0, got {delta}")));
        }
        Ok(Self { x0, eta, delta })
    }

    /// Geometry on the path `eta = a * delta`.
    pub fn with_ratio(x0: f64, a: f64, delta: f64) -> Result<Self> {
        Self::new(x0, a * delta, delta)
    }

    /// Separation-to-width ratio `eta / delta`.
    pub fn a(&self) -> f64 {
        self.eta / self.delta
    }

    /// Left window relative to `x0`.
    pub fn left_local(&self) -> Interval {
        Interval::new(-self.eta - self.delta, -self.eta + self.delta).expect("validated geometry")
    }

    /// Right window relative to `x0`.
    pub fn right_local(&self) -> Interval {
        Interval::new(self.eta - self.delta, self.eta + self.delta).expect("validated geometry")
    }

    pub fn left_window(&self) -> Interval {
        Interval::centered(self.x0 - self.eta, self.delta).expect("validated geometry")
    }

    pub fn right_window(&self) -> Interval {
        Interval::centered(self.x0 + self.eta, self.delta).expect("validated geometry")
    }

    pub fn windows_overlap(&self) -> bool {
        self.eta < self.delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoincidenceEvent {
    /// One particle in each window; both coordinate orderings counted.
    LeftRight,
    LeftLeft,
    RightRight,
    /// Both particles in the same window, either one.
    SameEither,
}

impl CoincidenceEvent {
    pub const ALL: [CoincidenceEvent; 4] = [
        CoincidenceEvent::LeftRight,
        CoincidenceEvent::LeftLeft,
        CoincidenceEvent::RightRight,
        CoincidenceEvent::SameEither,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            CoincidenceEvent::LeftRight => "left_right",
            CoincidenceEvent::LeftLeft => "left_left",
            CoincidenceEvent::RightRight => "right_right",
            CoincidenceEvent::SameEither => "same_either",
        }
    }
}

impl fmt::Display for CoincidenceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Unnormalized probability of a coincidence event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceProbability {
    pub value: f64,
    pub statistics: Statistics,
    pub event: CoincidenceEvent,
    pub geometry: DetectorPair,
    pub quadrature_error: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// A ratio of two coincidence probabilities with its propagated error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioValue {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub numerator: CoincidenceProbability,
    pub denominator: CoincidenceProbability,
}

/// Integral of the joint density over `sx × sy`, both given relative to `x0`.
///
/// Boson and fermion densities are differences of terms of the size of the
/// distinguishable density, so their rounding noise scales with it. Their
/// integrals are therefore converged to `rel_tol` relative to themselves or
/// to the distinguishable integral over the same rectangle, whichever is
/// looser.
pub fn window_integral(
    jd: &JointDensity,
    x0: f64,
    sx: Interval,
    sy: Interval,
    rel_tol: f64,
) -> Result<QuadratureResult> {
    let mut tol = Tolerance::relative(rel_tol);
    if jd.statistics != Statistics::Distinguishable {
        let dis = raw_window_integral(&jd.with_statistics(Statistics::Distinguishable), x0, sx, sy, tol)?;
        tol = tol.with_abs(rel_tol * dis.value.abs());
    }
    raw_window_integral(jd, x0, sx, sy, tol)
}

fn raw_window_integral(
    jd: &JointDensity,
    x0: f64,
    sx: Interval,
    sy: Interval,
    tol: Tolerance,
) -> Result<QuadratureResult> {
    let failure: Cell<Option<Error>> = Cell::new(None);
    let integrand = |u1: f64, u2: f64| match jd.try_evaluate_near(x0, u1, u2) {
        Ok(v) => v,
        Err(e) => {
            failure.set(Some(e));
            0.0
        }
    };
    let result = integrate_2d_with(integrand, Rectangle::new(sx, sy), tol)?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(result),
    }
}

fn accumulate(a: QuadratureResult, b: QuadratureResult) -> QuadratureResult {
    QuadratureResult {
        value: a.value + b.value,
        abs_error_estimate: a.abs_error_estimate + b.abs_error_estimate,
        evaluations: a.evaluations + b.evaluations,
        converged: a.converged && b.converged,
    }
}

pub fn coincidence_probability(
    jd: &JointDensity,
    g: &DetectorPair,
    ev: CoincidenceEvent,
    rel_tol: f64,
) -> Result<CoincidenceProbability> {
    let (left, right) = (g.left_local(), g.right_local());
    let q = match ev {
        CoincidenceEvent::LeftRight => {
            // R×L equals L×R by exchange symmetry of the joint density
            let once = window_integral(jd, g.x0, left, right, rel_tol)?;
            QuadratureResult {
                value: 2.0 * once.value,
                abs_error_estimate: 2.0 * once.abs_error_estimate,
                ..once
            }
        }
        CoincidenceEvent::LeftLeft => window_integral(jd, g.x0, left, left, rel_tol)?,
        CoincidenceEvent::RightRight => window_integral(jd, g.x0, right, right, rel_tol)?,
        CoincidenceEvent::SameEither => accumulate(
            window_integral(jd, g.x0, left, left, rel_tol)?,
            window_integral(jd, g.x0, right, right, rel_tol)?,
        ),
    };
    Ok(CoincidenceProbability {
        value: q.value,
        statistics: jd.statistics,
        event: ev,
        geometry: *g,
        quadrature_error: q.abs_error_estimate,
        converged: q.converged,
        evaluations: q.evaluations,
    })
}

fn ratio(numerator: CoincidenceProbability, denominator: CoincidenceProbability) -> Result<RatioValue> {
    if !(denominator.value > 10.0 * denominator.quadrature_error) {
        return Err(Error::DenominatorZero { value: denominator.value, error: denominator.quadrature_error });
    }
    let value = numerator.value / denominator.value;
    let error = (numerator.quadrature_error + value.abs() * denominator.quadrature_error) / denominator.value;
    Ok(RatioValue {
        value,
        error,
        converged: numerator.converged && denominator.converged,
        numerator,
        denominator,
    })
}

/// `P_num(ev) / P_den(ev)` for two statistics over the same pair of states.
pub fn statistics_ratio(
    jd_num: &JointDensity,
    jd_den: &JointDensity,
    g: &DetectorPair,
    ev: CoincidenceEvent,
    rel_tol: f64,
) -> Result<RatioValue> {
    if jd_num.psi1 != jd_den.psi1 || jd_num.psi2 != jd_den.psi2 {
        return Err(Error::InvalidGeometry("ratio numerator and denominator must share psi1 and psi2".into()));
    }
    let num = coincidence_probability(jd_num, g, ev, rel_tol)?;
    let den = coincidence_probability(jd_den, g, ev, rel_tol)?;
    ratio(num, den)
}

/// `P(one in each window) / P(both in the same window)` for one statistics.
pub fn event_ratio(jd: &JointDensity, g: &DetectorPair, rel_tol: f64) -> Result<RatioValue> {
    let num = coincidence_probability(jd, g, CoincidenceEvent::LeftRight, rel_tol)?;
    let den = coincidence_probability(jd, g, CoincidenceEvent::SameEither, rel_tol)?;
    ratio(num, den)
}
