//! Single-particle wavefunctions.
//!
//! Catalog families (box, oscillator, real plane wave) are normalized and
//! orthonormal within a family. The two local models are first-order Taylor
//! forms around a point and only make sense inside detector windows.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_1d, Interval};

const OVERLAP_REL_TOL: f64 = 1e-12;
const NODE_TOL: f64 = 1e-12;

/// Raw parameter record. Use [`Spwf`] for a validated wavefunction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// `sqrt(2/L) sin(n pi x / L)` on `[0, L]`, zero outside.
    Box { n: u32, length: f64 },
    /// n-th Hermite-Gaussian with width `sigma`, centered at the origin.
    Oscillator { n: u32, sigma: f64 },
    /// `sqrt(2/L) cos(k x + phase)` on a periodic box of length `L`.
    Plane { k: f64, phase: f64, length: f64 },
    /// `amplitude + slope (x - x0)`, with `amplitude != 0`.
    LocalRegular { amplitude: Complex64, slope: Complex64, x0: f64 },
    /// `derivative (x - x0)`, with `derivative != 0`.
    LocalNode { derivative: Complex64, x0: f64 },
}

/// A validated single-particle wavefunction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Family", into = "Family")]
pub struct Spwf {
    family: Family,
    /// Integer number of periods in the box, for plane waves only.
    periods: u32,
}

impl TryFrom<Family> for Spwf {
    type Error = Error;

    fn try_from(family: Family) -> Result<Self> {
        Spwf::new(family)
    }
}

impl From<Spwf> for Family {
    fn from(psi: Spwf) -> Self {
        psi.family
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidWavefunction(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn finite_complex(name: &str, c: Complex64) -> Result<()> {
    if c.re.is_finite() && c.im.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidWavefunction(format!("{name} must be finite, got {c}")))
    }
}

impl Spwf {
    pub fn new(family: Family) -> Result<Self> {
        let mut periods = 0;
        match family {
            Family::Box { n, length } => {
                if n == 0 {
                    return Err(Error::InvalidWavefunction("box quantum number must be >= 1".into()));
                }
                positive("length", length)?;
            }
            Family::Oscillator { sigma, .. } => positive("sigma", sigma)?,
            Family::Plane { k, phase, length } => {
                positive("length", length)?;
                positive("k", k)?;
                if !phase.is_finite() {
                    return Err(Error::InvalidWavefunction(format!("phase must be finite, got {phase}")));
                }
                let m = k * length / (2.0 * PI);
                let rounded = m.round();
                if rounded < 1.0 || (m - rounded).abs() > 1e-9 * rounded {
                    return Err(Error::InvalidWavefunction(format!(
                        "plane wave k*L/(2 pi) = {m} is not a positive integer; the state is not normalized on its box"
                    )));
                }
                periods = rounded as u32;
            }
            Family::LocalRegular { amplitude, slope, x0 } => {
                finite_complex("amplitude", amplitude)?;
                finite_complex("slope", slope)?;
                if amplitude == Complex64::new(0.0, 0.0) {
                    return Err(Error::InvalidWavefunction("local_regular amplitude must be nonzero".into()));
                }
                if !x0.is_finite() {
                    return Err(Error::InvalidWavefunction("x0 must be finite".into()));
                }
            }
            Family::LocalNode { derivative, x0 } => {
                finite_complex("derivative", derivative)?;
                if derivative == Complex64::new(0.0, 0.0) {
                    return Err(Error::InvalidWavefunction("local_node derivative must be nonzero".into()));
                }
                if !x0.is_finite() {
                    return Err(Error::InvalidWavefunction("x0 must be finite".into()));
                }
            }
        }
        Ok(Self { family, periods })
    }

    pub fn box_state(n: u32, length: f64) -> Result<Self> {
        Self::new(Family::Box { n, length })
    }

    pub fn oscillator(n: u32, sigma: f64) -> Result<Self> {
        Self::new(Family::Oscillator { n, sigma })
    }

    /// Plane wave with `periods` full wavelengths in the box.
    pub fn plane(periods: u32, phase: f64, length: f64) -> Result<Self> {
        Self::new(Family::Plane { k: 2.0 * PI * periods as f64 / length, phase, length })
    }

    pub fn local_regular(amplitude: Complex64, slope: Complex64, x0: f64) -> Result<Self> {
        Self::new(Family::LocalRegular { amplitude, slope, x0 })
    }

    pub fn local_node(derivative: Complex64, x0: f64) -> Result<Self> {
        Self::new(Family::LocalNode { derivative, x0 })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::Box { .. } => "box",
            Family::Oscillator { .. } => "oscillator",
            Family::Plane { .. } => "plane",
            Family::LocalRegular { .. } => "local_regular",
            Family::LocalNode { .. } => "local_node",
        }
    }

    pub fn is_catalog(&self) -> bool {
        !matches!(self.family, Family::LocalRegular { .. } | Family::LocalNode { .. })
    }

    /// Smallest length scale of the state: `L/n` for box states,
    /// `sigma/sqrt(2n+1)` for oscillator states, the wavelength for plane
    /// waves. `None` for local models, which carry no scale.
    pub fn length_scale(&self) -> Option<f64> {
        match self.family {
            Family::Box { n, length } => Some(length / n as f64),
            Family::Oscillator { n, sigma } => Some(sigma / (2.0 * n as f64 + 1.0).sqrt()),
            Family::Plane { k, .. } => Some(2.0 * PI / k),
            _ => None,
        }
    }

    /// Domain over which the catalog state carries (essentially) all of its
    /// probability.
    pub fn natural_domain(&self) -> Option<Interval> {
        match self.family {
            Family::Box { length, .. } | Family::Plane { length, .. } => Interval::new(0.0, length).ok(),
            Family::Oscillator { n, sigma } => {
                let reach = ((2.0 * n as f64 + 1.0).sqrt() + 12.0) * sigma;
                Interval::new(-reach, reach).ok()
            }
            _ => None,
        }
    }

    /// Amplitude at `x`.
    pub fn evaluate(&self, x: f64) -> Complex64 {
        self.evaluate_near(x, 0.0)
    }

    /// Amplitude at `origin + offset`, computed so that a small `offset`
    /// keeps its full relative precision even when `origin` is large or sits
    /// on a node.
    pub fn evaluate_near(&self, origin: f64, offset: f64) -> Complex64 {
        match self.family {
            Family::Box { n, length } => {
                let x = origin + offset;
                if !(0.0..=length).contains(&x) {
                    return Complex64::new(0.0, 0.0);
                }
                let scale = n as f64 / length;
                let v = sin_pi_sum(scale * origin, scale * offset);
                Complex64::new((2.0 / length).sqrt() * v, 0.0)
            }
            Family::Oscillator { n, sigma } => {
                let xi = (origin + offset) / sigma;
                Complex64::new(hermite_function(n, xi) / sigma.sqrt(), 0.0)
            }
            Family::Plane { phase, length, .. } => {
                let scale = 2.0 * self.periods as f64 / length;
                let v = cos_pi_sum(scale * origin + phase / PI, scale * offset);
                Complex64::new((2.0 / length).sqrt() * v, 0.0)
            }
            Family::LocalRegular { amplitude, slope, x0 } => amplitude + slope * ((origin - x0) + offset),
            Family::LocalNode { derivative, x0 } => derivative * ((origin - x0) + offset),
        }
    }

    /// `∫ conj(psi_a) psi_b` over `domain`.
    pub fn overlap(&self, other: &Spwf, domain: Interval) -> Result<Complex64> {
        for psi in [self, other] {
            if !psi.is_catalog() {
                return Err(Error::NonNormalizable(format!(
                    "{} is a local model and has no overlap integral",
                    psi.family_name()
                )));
            }
        }
        // Box and plane states are smooth only inside [0, L]; split at the
        // support edges so no panel straddles a kink.
        let mut cuts = vec![domain.lo()];
        for psi in [self, other] {
            if let Family::Box { length, .. } = psi.family {
                for edge in [0.0, length] {
                    if edge > domain.lo() && edge < domain.hi() {
                        cuts.push(edge);
                    }
                }
            }
        }
        cuts.push(domain.hi());
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let mut total = Complex64::new(0.0, 0.0);
        for w in cuts.windows(2) {
            let piece = Interval::new(w[0], w[1])?;
            let integrand = |x: f64| self.evaluate(x).conj() * other.evaluate(x);
            let re = integrate_1d(|x| integrand(x).re, piece, OVERLAP_REL_TOL)?;
            let im = integrate_1d(|x| integrand(x).im, piece, OVERLAP_REL_TOL)?;
            total += Complex64::new(re.value, im.value);
        }
        Ok(total)
    }

    /// Sign-change zeros of the (real) amplitude inside `domain`, ascending,
    /// each bracketed to 1e-12.
    pub fn find_nodes(&self, domain: Interval) -> Vec<f64> {
        match self.family {
            Family::LocalNode { x0, .. } => return if domain.contains(x0) { vec![x0] } else { vec![] },
            Family::LocalRegular { .. } => return vec![],
            _ => {}
        }
        let scale = self.length_scale().unwrap_or(domain.width());
        let cells = ((40.0 * domain.width() / scale).ceil() as usize).clamp(2000, 1_000_000);
        let g = |x: f64| self.evaluate(x).re;
        let step = domain.width() / cells as f64;
        let grid: Vec<f64> = (0..=cells)
            .map(|i| if i == cells { domain.hi() } else { domain.lo() + i as f64 * step })
            .collect();
        let values: Vec<f64> = grid.iter().map(|&x| g(x)).collect();

        let mut nodes = Vec::new();
        for i in 0..cells {
            let (a, b) = (grid[i], grid[i + 1]);
            let (fa, fb) = (values[i], values[i + 1]);
            if fa == 0.0 {
                // interior exact zeros only; a zero on the domain edge is not a sign change inside
                if i > 0 && values[i - 1] != 0.0 && fb != 0.0 && values[i - 1].signum() != fb.signum() {
                    nodes.push(a);
                }
                continue;
            }
            if fb != 0.0 && fa.signum() != fb.signum() {
                nodes.push(bisect(&g, a, b, fa));
            }
        }
        nodes
    }
}

fn bisect<G: Fn(f64) -> f64>(g: &G, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    while hi - lo > NODE_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = g(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `sin(pi t)` with exact zeros at integers and exact ±1 at half-integers.
pub(crate) fn sin_pi(t: f64) -> f64 {
    // reduce to r in [-1, 1]
    let r = t - 2.0 * (0.5 * t).round();
    let (sign, r) = if r < 0.0 { (-1.0, -r) } else { (1.0, r) };
    // sin(pi r) = sin(pi (1 - r)) for r in [0, 1]
    let r = if r > 0.5 { 1.0 - r } else { r };
    let v = if r <= 0.25 { (PI * r).sin() } else { (PI * (0.5 - r)).cos() };
    sign * v
}

pub(crate) fn cos_pi(t: f64) -> f64 {
    sin_pi(t + 0.5)
}

/// `sin(pi (base + small))` without forming `base + small`.
fn sin_pi_sum(base: f64, small: f64) -> f64 {
    if small == 0.0 {
        return sin_pi(base);
    }
    sin_pi(base) * cos_pi(small) + cos_pi(base) * sin_pi(small)
}

fn cos_pi_sum(base: f64, small: f64) -> f64 {
    if small == 0.0 {
        return cos_pi(base);
    }
    cos_pi(base) * cos_pi(small) - sin_pi(base) * sin_pi(small)
}

/// Normalized Hermite function `H_n(xi) exp(-xi^2/2) / sqrt(2^n n! sqrt(pi))`
/// by the three-term recurrence on the normalized functions themselves.
fn hermite_function(n: u32, xi: f64) -> f64 {
    let phi0 = PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    if n == 0 {
        return phi0;
    }
    let mut prev = phi0;
    let mut cur = 2f64.sqrt() * xi * phi0;
    for k in 1..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * xi * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}
