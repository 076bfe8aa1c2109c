//! Delayed-feedback stabilizer design for linear retarded equations with a
//! single delay.
//!
//! The crate assigns a real characteristic root of maximal (or prescribed)
//! multiplicity by choosing the free coefficients of
//!
//! ```text
//! delta(s) = s^n + sum_k a_k s^k + exp(-s tau) sum_k b_k s^k,
//! ```
//!
//! then corroborates that this root is the rightmost one by locating all
//! roots in a rectangle, simulates the closed loop with an explicit Euler
//! scheme, and sweeps the delay to study how the multiple root splits.
//!
//! ```
//! use delaymid::mid_solver::classic_mid;
//!
//! let design = classic_mid(1, 0, -2.0, 1.0).unwrap();
//! assert!((design.qp.a()[0] - 1.0).abs() < 1e-12);
//! assert!((design.qp.b()[0] - (-2.0f64).exp()).abs() < 1e-12);
//! ```

pub mod error;
pub mod mid_solver;
pub mod quasipoly;
pub mod rootfinder;
pub mod sensitivity;
pub mod simulator;

pub use error::{Error, ErrorEnvelope, Result};
pub use mid_solver::{classic_mid, control_oriented_mid, ControlSpec, FixedVariable, MidDesign, MidMode};
pub use quasipoly::{ComplexPoint, Quasipolynomial};
pub use rootfinder::{check_dominance, count_roots, find_roots, Rectangle, Root, RootSet};
pub use sensitivity::{delay_sweep, SensitivitySweep};
pub use simulator::{simulate, InitialCondition, Trajectory};
