//! Online stabilization of unknown, disturbed linear time-varying systems.
//!
//! The controller never identifies the plant. Each observed transition carves
//! a slab of consistent parameter matrices out of a known ambient box, and a
//! work-function chasing rule picks one hypothesis model per step by
//! Monte-Carlo estimation of a functional Steiner point. A
//! certainty-equivalent LQR gain is synthesized for whatever hypothesis the
//! chase lands on.
//!
//! Module map:
//! - [`param`]: the hypothesis type `[A B]` and its flat-vector view.
//! - [`control`]: discrete Riccati / Lyapunov solvers and spectral radius.
//! - [`conic`]: a narrow second-order cone programming interface.
//! - [`geometry`]: half-space sets, membership, projection, Chebyshev center.
//! - [`chase`]: work functions, Fenchel conjugates, Steiner-point selection,
//!   and the offline-optimal oracle.
//! - [`sim`]: plants, disturbance generators, controllers, closed-loop runner.

pub mod chase;
pub mod conic;
pub mod control;
pub mod geometry;
pub mod param;
pub mod reference;
pub mod sim;
