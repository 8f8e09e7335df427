//! Two-particle joint densities for distinguishable particles, bosons and
//! fermions built from two single-particle wavefunctions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spwf::Spwf;

/// Negative values above this fraction of the density scale are treated as
/// rounding and clamped to zero.
pub const NEGATIVE_ROUNDING_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Statistics {
    #[serde(rename = "dis")]
    Distinguishable,
    #[serde(rename = "bos")]
    Boson,
    #[serde(rename = "fer")]
    Fermion,
}

impl Statistics {
    pub const ALL: [Statistics; 3] = [Statistics::Distinguishable, Statistics::Boson, Statistics::Fermion];

    pub fn tag(self) -> &'static str {
        match self {
            Statistics::Distinguishable => "dis",
            Statistics::Boson => "bos",
            Statistics::Fermion => "fer",
        }
    }
}

impl fmt::Display for Statistics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Statistics {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dis" => Ok(Statistics::Distinguishable),
            "bos" => Ok(Statistics::Boson),
            "fer" => Ok(Statistics::Fermion),
            other => Err(format!("unknown statistics {other:?} (expected dis, bos or fer)")),
        }
    }
}

/// `p_j(x) = |psi_j(x)|^2`
pub fn single_pdf(psi: &Spwf, x: f64) -> f64 {
    psi.evaluate(x).norm_sqr()
}

/// Exchange cross-term `Re{psi1(x1) psi1*(x2) psi2(x1) psi2*(x2)}`.
///
/// This is the full term added to (bosons) or subtracted from (fermions) the
/// distinguishable density; the factor 1/2 in front of the bracket has
/// already cancelled the 2 in front of `Re`.
pub fn interference_term(psi1: &Spwf, psi2: &Spwf, x1: f64, x2: f64) -> f64 {
    cross_term(psi1.evaluate(x1) * psi2.evaluate(x1), psi1.evaluate(x2) * psi2.evaluate(x2))
}

/// `Re{a conj(b)}` written so that swapping the arguments is bit-identical.
fn cross_term(a: num_complex::Complex64, b: num_complex::Complex64) -> f64 {
    a.re * b.re + a.im * b.im
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointDensity {
    pub psi1: Spwf,
    pub psi2: Spwf,
    pub statistics: Statistics,
}

/// The two pieces every joint density is assembled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityParts {
    pub distinguishable: f64,
    pub interference: f64,
}

impl DensityParts {
    pub fn combine(&self, statistics: Statistics) -> Result<f64> {
        let raw = match statistics {
            Statistics::Distinguishable => return Ok(self.distinguishable),
            Statistics::Boson => self.distinguishable + self.interference,
            Statistics::Fermion => self.distinguishable - self.interference,
        };
        if raw >= 0.0 {
            return Ok(raw);
        }
        let scale = self.distinguishable + self.interference.abs();
        if -raw <= NEGATIVE_ROUNDING_TOL * scale {
            Ok(0.0)
        } else {
            Err(Error::NegativeDensity { value: raw, scale })
        }
    }
}

impl JointDensity {
    pub fn new(psi1: Spwf, psi2: Spwf, statistics: Statistics) -> Self {
        Self { psi1, psi2, statistics }
    }

    pub fn with_statistics(&self, statistics: Statistics) -> Self {
        Self { statistics, ..*self }
    }

    pub fn parts(&self, x1: f64, x2: f64) -> DensityParts {
        assemble(self.psi1.evaluate(x1), self.psi2.evaluate(x1), self.psi1.evaluate(x2), self.psi2.evaluate(x2))
    }

    /// Density pieces at `(origin + u1, origin + u2)` in window-local
    /// coordinates.
    pub fn parts_near(&self, origin: f64, u1: f64, u2: f64) -> DensityParts {
        let a1 = self.psi1.evaluate_near(origin, u1);
        let a2 = self.psi2.evaluate_near(origin, u1);
        let b1 = self.psi1.evaluate_near(origin, u2);
        let b2 = self.psi2.evaluate_near(origin, u2);
        assemble(a1, a2, b1, b2)
    }

    /// Joint density at `(x1, x2)`; errors only if cancellation produced a
    /// negative value larger than rounding can explain.
    pub fn try_evaluate(&self, x1: f64, x2: f64) -> Result<f64> {
        self.parts(x1, x2).combine(self.statistics)
    }

    pub fn try_evaluate_near(&self, origin: f64, u1: f64, u2: f64) -> Result<f64> {
        self.parts_near(origin, u1, u2).combine(self.statistics)
    }

    /// Joint density at `(x1, x2)`.
    ///
    /// # Panics
    /// On a negative density beyond rounding, which would mean the amplitudes
    /// are inconsistent.
    pub fn evaluate(&self, x1: f64, x2: f64) -> f64 {
        self.try_evaluate(x1, x2).expect("joint density internally inconsistent")
    }
}

fn assemble(
    a1: num_complex::Complex64,
    a2: num_complex::Complex64,
    b1: num_complex::Complex64,
    b2: num_complex::Complex64,
) -> DensityParts {
    // p1(x1) p2(x2) + p1(x2) p2(x1); the sum is symmetric under x1 <-> x2
    let direct = a1.norm_sqr() * b2.norm_sqr();
    let swapped = b1.norm_sqr() * a2.norm_sqr();
    DensityParts {
        distinguishable: 0.5 * (direct + swapped),
        interference: cross_term(a1 * a2, b1 * b2),
    }
}
