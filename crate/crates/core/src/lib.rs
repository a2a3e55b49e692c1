//! Least-squares moment matching for linear and nonlinear SISO systems.
//!
//! The crate reduces a system driven by a linear signal generator to a model
//! whose steady-state response matches the system's moments in the weighted
//! least-squares sense, with a priori bounds on the steady-state error.

pub mod builtin;
pub mod error;
pub mod generator;
pub mod linalg;
pub mod linear;
pub mod poly;
pub mod series;
pub mod sim;

pub use error::{Condition, Error, Result, Which};
pub use generator::{CanonicalForm, InterpolationSpec, SignalGenerator};
pub use linalg::{Mat, Row, Spectrum, Vector, C64};
pub use linear::{MomentSet, ReducedModel, ReductionParams, StateSpace};
pub use poly::PolyMap;
pub use series::{NonlinearReducedModel, PolyVectorField};
pub use sim::{SimConfig, Trajectory};
