pub mod detection;
pub mod error;
pub mod jointdensity;
pub mod limits;
pub mod quadrature;
pub mod spwf;

pub use detection::{CoincidenceEvent, CoincidenceProbability, DetectorPair};
pub use error::Error;
pub use jointdensity::{JointDensity, Statistics};
pub use limits::{LimitEstimate, LimitProtocol, RatioSelector, Schedule};
pub use quadrature::{Interval, QuadratureResult, Rectangle};
pub use spwf::Spwf;

/// Default relative tolerance for every window integral.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
