//! Generalized δ-shock reliability model.
//!
//! A system receives shocks whose inter-arrival gaps `Z` are i.i.d. with law
//! `F`. A gap is *potentially lethal* when `Z ≤ δ`, where a fresh threshold
//! `δ ~ G` is drawn for every gap. The system tolerates `k − 1` lethal gaps
//! and fails at the `k`-th; `W` is the failure time.
//!
//! The crate provides:
//!
//! * [`distributions`]: arrival and threshold laws, sampling, weighted
//!   Laplace integrals `∫ e^{-st} f(t) w(t) dt` with `w ∈ {G, Ḡ}`.
//! * [`model`]: the shock model, lethality probability, conditional gap
//!   densities, the negative-binomial shock count and the failure moments.
//! * [`laplace`]: the failure-time transform and its numerical inversion
//!   (Euler-accelerated Fourier series).
//! * [`closed_form`]: exact results for exponential and uniform arrivals
//!   with a constant threshold.
//! * [`normal`]: the normal approximation and its error diagnostics.
//! * [`simulator`]: a seeded, chunked Monte Carlo engine whose output does
//!   not depend on the worker count.
//!
//! The `parallel` feature (on by default) runs simulation chunks and grid
//! inversions on rayon; without it every path runs sequentially and gives
//! bit-identical results.

pub mod closed_form;
pub mod distributions;
mod error;
pub mod exec;
pub mod laplace;
pub mod model;
pub mod normal;
mod piecewise;
pub mod quad;
pub mod rng;
pub mod simulator;
pub mod stats;

pub use crate::error::{Error, Result};

pub use crate::closed_form::{ExpConstParams, UnifConstParams, UniformVarianceAudit};
pub use crate::distributions::{ArrivalLaw, ThresholdLaw, Weight};
pub use crate::laplace::{InversionConfig, InversionPoint, TransformEvaluator};
pub use crate::model::{MomentSummary, ShockModel};
pub use crate::normal::{ApproxError, NormalApprox, Reference};
pub use crate::simulator::{FailureRecord, SimulationConfig, SimulationReport};
