//! Fixed-order Gauss-Legendre panels with globally adaptive bisection.
//!
//! Every panel estimate is the sum over its two halves (1D) or four quadrants
//! (2D); the discrepancy against the single-panel rule is the local error
//! estimate. The panel with the largest estimate is split until the summed
//! estimate drops below `max(rel * |value|, abs)` or the remaining
//! discrepancy is at the rounding level of the integrand.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes per panel (per axis in 2D).
pub const PANEL_ORDER: usize = 16;
/// Deepest bisection level before a panel is reported as non-converged.
pub const MAX_DEPTH: u32 = 60;
const MAX_PANELS_1D: usize = 4096;
const MAX_PANELS_2D: usize = 2048;
const ABS_FLOOR: f64 = 1e-300;
const ROUNDOFF: f64 = 50.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok(Self { lo, hi })
        } else {
            Err(Error::InvalidInterval { lo, hi })
        }
    }

    /// Interval `[center - half_width, center + half_width]`.
    pub fn centered(center: f64, half_width: f64) -> Result<Self> {
        Self::new(center - half_width, center + half_width)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn halves(&self) -> (Self, Self) {
        let mid = self.midpoint();
        (Self { lo: self.lo, hi: mid }, Self { lo: mid, hi: self.hi })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub sx: Interval,
    pub sy: Interval,
}

impl Rectangle {
    pub fn new(sx: Interval, sy: Interval) -> Self {
        Self { sx, sy }
    }

    pub fn area(&self) -> f64 {
        self.sx.width() * self.sy.width()
    }

    fn quadrants(&self) -> [Self; 4] {
        let (x0, x1) = self.sx.halves();
        let (y0, y1) = self.sy.halves();
        [
            Self::new(x0, y0),
            Self::new(x1, y0),
            Self::new(x0, y1),
            Self::new(x1, y1),
        ]
    }
}

/// Accept once the error estimate is below `max(rel * |value|, abs)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Self { rel, abs: 0.0 }
    }

    pub fn with_abs(self, abs: f64) -> Self {
        Self { abs, ..self }
    }

    fn check(&self) -> Result<()> {
        check_tolerance(self.rel)?;
        if self.abs.is_finite() && self.abs >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidTolerance(self.abs))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl QuadratureResult {
    fn scaled(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            abs_error_estimate: self.abs_error_estimate * factor.abs(),
            ..self
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER))
}

fn check_tolerance(rel_tol: f64) -> Result<()> {
    if (1e-14..=1e-2).contains(&rel_tol) {
        Ok(())
    } else {
        Err(Error::InvalidTolerance(rel_tol))
    }
}

/// (value, sum of |w f|)
fn panel_1d<F: Fn(f64) -> f64>(f: &F, s: &Interval) -> (f64, f64) {
    let (nodes, weights) = panel_rule();
    let half = 0.5 * s.width();
    let mid = s.midpoint();
    let mut sum = 0.0;
    let mut abs = 0.0;
    for (t, w) in nodes.iter().zip(weights) {
        let v = w * f(mid + half * t);
        sum += v;
        abs += v.abs();
    }
    (sum * half, abs * half)
}

fn panel_2d<F: Fn(f64, f64) -> f64>(f: &F, r: &Rectangle) -> (f64, f64) {
    let (nodes, weights) = panel_rule();
    let hx = 0.5 * r.sx.width();
    let hy = 0.5 * r.sy.width();
    let mx = r.sx.midpoint();
    let my = r.sy.midpoint();
    let mut sum = 0.0;
    let mut abs = 0.0;
    for (tx, wx) in nodes.iter().zip(weights) {
        let x = mx + hx * tx;
        let mut row = 0.0;
        let mut row_abs = 0.0;
        for (ty, wy) in nodes.iter().zip(weights) {
            let v = wy * f(x, my + hy * ty);
            row += v;
            row_abs += v.abs();
        }
        sum += wx * row;
        abs += wx * row_abs;
    }
    let jac = hx * hy;
    (sum * jac, abs * jac)
}

#[derive(Debug, Clone, Copy)]
struct Panel<R> {
    region: R,
    depth: u32,
    value: f64,
    raw: f64,
    resabs: f64,
}

impl<R> Panel<R> {
    fn error(&self) -> f64 {
        self.raw + ROUNDOFF * self.resabs
    }
}

/// Shared driver: `estimate` turns a region into (value, discrepancy, sum|wf|),
/// `split` yields its children.
fn adaptive<R: Copy, E, S>(
    root: R,
    tol: Tolerance,
    max_panels: usize,
    evals_per_panel: usize,
    estimate: E,
    split: S,
) -> QuadratureResult
where
    E: Fn(&R) -> (f64, f64, f64),
    S: Fn(&R) -> Vec<R>,
{
    let make = |region: R, depth: u32| {
        let (value, raw, resabs) = estimate(&region);
        Panel { region, depth, value, raw, resabs }
    };
    let mut panels = vec![make(root, 0)];
    let mut evaluations = evals_per_panel;
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(Panel::error).sum();
        let raw: f64 = panels.iter().map(|p| p.raw).sum();
        let resabs: f64 = panels.iter().map(|p| p.resabs).sum();
        let target = (tol.rel * value.abs()).max(tol.abs).max(ABS_FLOOR);
        if error <= target || raw <= ROUNDOFF * resabs {
            return QuadratureResult { value, abs_error_estimate: error, evaluations, converged: true };
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error().total_cmp(&b.1.error()))
            .expect("at least one panel");
        if panels[worst].depth >= MAX_DEPTH || panels.len() >= max_panels {
            return QuadratureResult { value, abs_error_estimate: error, evaluations, converged: false };
        }
        let parent = panels.swap_remove(worst);
        for child in split(&parent.region) {
            panels.push(make(child, parent.depth + 1));
            evaluations += evals_per_panel;
        }
    }
}

/// Adaptive 1D integral of `f` over `s`.
///
/// Non-convergence (depth 60 or the panel budget) is reported through
/// `converged = false` with the best available value.
pub fn integrate_1d<F: Fn(f64) -> f64>(f: F, s: Interval, rel_tol: f64) -> Result<QuadratureResult> {
    integrate_1d_with(f, s, Tolerance::relative(rel_tol))
}

/// [`integrate_1d`] with an absolute error floor as well.
pub fn integrate_1d_with<F: Fn(f64) -> f64>(f: F, s: Interval, tol: Tolerance) -> Result<QuadratureResult> {
    tol.check()?;
    Ok(adaptive(
        s,
        tol,
        MAX_PANELS_1D,
        3 * PANEL_ORDER,
        |s| {
            let (one, _) = panel_1d(&f, s);
            let (a, b) = s.halves();
            let (va, ra) = panel_1d(&f, &a);
            let (vb, rb) = panel_1d(&f, &b);
            let two = va + vb;
            (two, (two - one).abs(), ra + rb)
        },
        |s| {
            let (a, b) = s.halves();
            vec![a, b]
        },
    ))
}

/// Adaptive tensor-product integral of `f(x, y)` over `r`.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(f: F, r: Rectangle, rel_tol: f64) -> Result<QuadratureResult> {
    integrate_2d_with(f, r, Tolerance::relative(rel_tol))
}

/// [`integrate_2d`] with an absolute error floor as well.
pub fn integrate_2d_with<F: Fn(f64, f64) -> f64>(f: F, r: Rectangle, tol: Tolerance) -> Result<QuadratureResult> {
    tol.check()?;
    Ok(adaptive(
        r,
        tol,
        MAX_PANELS_2D,
        5 * PANEL_ORDER * PANEL_ORDER,
        |r| {
            let (one, _) = panel_2d(&f, r);
            let mut fine = 0.0;
            let mut abs = 0.0;
            for q in r.quadrants() {
                let (v, a) = panel_2d(&f, &q);
                fine += v;
                abs += a;
            }
            (fine, (fine - one).abs(), abs)
        },
        |r| r.quadrants().to_vec(),
    ))
}

/// Integral over `s` divided by its width. The returned value and error are
/// both per unit length.
pub fn mean_density<F: Fn(f64) -> f64>(f: F, s: Interval, rel_tol: f64) -> Result<QuadratureResult> {
    Ok(integrate_1d(f, s, rel_tol)?.scaled(1.0 / s.width()))
}

/// Integral over `r` divided by its area.
pub fn mean_density_2d<F: Fn(f64, f64) -> f64>(f: F, r: Rectangle, rel_tol: f64) -> Result<QuadratureResult> {
    Ok(integrate_2d(f, r, rel_tol)?.scaled(1.0 / r.area()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn rule_weights_sum_to_two() {
        let (nodes, weights) = gauss_legendre(PANEL_ORDER);
        let total: f64 = weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        // odd rule has the origin as a node
        let (n5, _) = gauss_legendre(5);
        assert_eq!(n5[2], 0.0);
    }

    #[test]
    fn single_panel_exact_through_degree_31() {
        let s = Interval::new(-0.3, 1.7).unwrap();
        for degree in 0..=31 {
            let (v, _) = panel_1d(&|x: f64| x.powi(degree), &s);
            let exact = (1.7f64.powi(degree + 1) - (-0.3f64).powi(degree + 1)) / (degree + 1) as f64;
            assert!(rel(v, exact) < 1e-13, "degree {degree}: {v} vs {exact}");
        }
    }

    #[test]
    fn constant_over_unit_interval() {
        let r = integrate_1d(|_| 1.0, Interval::new(0.0, 1.0).unwrap(), 1e-10).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
        assert!(r.converged);
        assert!(r.evaluations > 0);
    }

    #[test]
    fn shifted_square_window() {
        // antiderivative u^3/3
        let (eta, delta) = (1.0, 0.1);
        let s = Interval::new(-eta - delta, -eta + delta).unwrap();
        let r = integrate_1d(|u| u * u, s, 1e-10).unwrap();
        let exact = 2.0 * delta * (eta * eta + delta * delta / 3.0);
        assert!(rel(r.value, exact) < 1e-13);
        assert!(rel(r.value, 0.200_666_666_666_666_67) < 1e-13);
    }

    #[test]
    fn linear_window() {
        let s = Interval::new(0.4, 0.6).unwrap();
        let r = integrate_1d(|u| u, s, 1e-10).unwrap();
        assert!(rel(r.value, 0.1) < 1e-13);
    }

    #[test]
    fn unit_square() {
        let sq = Interval::new(0.0, 1.0).unwrap();
        let r = integrate_2d(|_, _| 1.0, Rectangle::new(sq, sq), 1e-10).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn separable_window_products() {
        let (eta, delta) = (0.01, 0.01);
        let left = Interval::centered(-eta, delta).unwrap();
        let right = Interval::centered(eta, delta).unwrap();
        let r = Rectangle::new(left, right);
        let q = integrate_2d(|u, v| 0.5 * (u * u + v * v), r, 1e-10).unwrap();
        assert!(rel(q.value, 5.333_333_333_333_333e-8) < 1e-12, "{}", q.value);
        let q = integrate_2d(|u, v| u * v, r, 1e-10).unwrap();
        assert!(rel(q.value, -4e-8) < 1e-12, "{}", q.value);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Interval::new(f64::NAN, 1.0).is_err());
        let s = Interval::new(0.0, 1.0).unwrap();
        assert!(matches!(integrate_1d(|x| x, s, 1e-15), Err(Error::InvalidTolerance(_))));
        assert!(matches!(integrate_1d(|x| x, s, 0.1), Err(Error::InvalidTolerance(_))));
    }

    #[test]
    fn singular_integrand_flags_non_convergence() {
        let s = Interval::new(0.0, 1.0).unwrap();
        let r = integrate_1d(|x| if x > 0.0 { 1.0 / x } else { 0.0 }, s, 1e-10).unwrap();
        assert!(!r.converged);
        assert!(r.abs_error_estimate > 0.0);
    }

    #[test]
    fn oscillatory_integrand_needs_refinement() {
        let s = Interval::new(0.0, 10.0).unwrap();
        let r = integrate_1d(|x| (20.0 * x).sin(), s, 1e-12).unwrap();
        let exact = (1.0 - 200f64.cos()) / 20.0;
        assert!(r.converged);
        assert!((r.value - exact).abs() < 1e-12);
        assert!(r.evaluations > 3 * PANEL_ORDER);
    }

    #[test]
    fn mean_of_constant() {
        let s = Interval::new(-3.0, 5.0).unwrap();
        let m = mean_density(|_| 2.5, s, 1e-10).unwrap();
        assert!((m.value - 2.5).abs() < 1e-14);
        let r = Rectangle::new(s, Interval::new(1.0, 1.5).unwrap());
        let m = mean_density_2d(|_, _| 2.5, r, 1e-10).unwrap();
        assert!((m.value - 2.5).abs() < 1e-14);
    }
}
