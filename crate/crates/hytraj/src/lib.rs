//! Hybrid trajectories with state-triggered jumps: simulation, a non-peaking
//! distance between trajectory pairs, and piecewise-quadratic Lyapunov
//! certificates for tracking controllers.
//!
//! The crate is organised around the plant class with affine flow and jump
//! maps and a half-hyperplane jump set:
//!
//! * [`system`] / [`domain`] / [`sim`] — plant data, hybrid time domains,
//!   event-located simulation and dwell-time analytics;
//! * [`distance`] — the jump-aware distance between two states, its closed
//!   forms for the second-order mechanical examples, and a brute-force
//!   projection oracle;
//! * [`combined`] — joint simulation of two trajectories on one combined
//!   hybrid time domain with jump attribution;
//! * [`lyapunov`] — piecewise quadratic certificates: jump/flow matrix
//!   conditions, sub-level constants, class-K bounds, dwell-time verdicts and
//!   runtime monitoring;
//! * [`tracking`] — the switching tracking controller and closed-loop runs;
//! * [`models`] — the bouncing-ball and dissipative-oscillator scenarios with
//!   their certified designs.

pub mod combined;
pub mod distance;
pub mod domain;
pub mod error;
pub mod lyapunov;
pub mod models;
pub mod ode;
pub mod sim;
pub mod system;
pub mod tracking;

pub use error::{Error, Result};
