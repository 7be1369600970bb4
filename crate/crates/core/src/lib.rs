//! Simulation engines for long-horizon approximation error studies.
//!
//! The crate couples a stochastic process to an approximation of it with
//! shared Brownian increments and tracks the squared distance over time:
//!
//! * [`averaging`] — a slow-fast pair against its averaged equation,
//! * [`discretization`] — ULA / UBU / unadjusted HMC chains against exact or
//!   fine-grid references,
//! * [`meanfield`] — an interacting particle system against i.i.d. copies of
//!   its nonlinear limit,
//! * [`counterexample`] — a time-inhomogeneous perturbation whose error does
//!   not flatten out, as a negative control.
//!
//! [`metrics`] holds the shared distance, regression and plateau statistics;
//! [`rng`] and [`grid`] provide deterministic splittable noise streams so that
//! every result is a pure function of (configuration, master seed).

pub mod averaging;
pub mod counterexample;
pub mod curve;
pub mod discretization;
pub mod error;
pub mod grid;
pub mod integrators;
pub mod meanfield;
pub mod metrics;
pub(crate) mod parallel;
pub mod rng;

pub use curve::{CurveMeta, ErrorCurve, FloorCheck};
pub use error::{CoreError, Result};
pub use metrics::RateFit;
pub use rng::{make_stream, RngStream, StreamId};
