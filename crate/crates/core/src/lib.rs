//! Numerical laboratory for the similarity boundary-layer equation
//!
//! ```text
//! f''' + f f'' - beta f'^2 = 0,    f'(inf) = 0
//! ```
//!
//! The crate integrates the equation, shoots on the free initial datum of the
//! two classical boundary-condition families, classifies the resulting
//! solutions, and checks the power-law behaviour `|f(t)| ~ c t^(1/(1-beta))`
//! of unbounded solutions together with the identities that accompany it.
//! The planar system obtained from the blow-up coordinates
//! `u = f'/f^2`, `v = f''/f^3`, `ds = f dt` is analysed in [`blowup`].

// `!(a < b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod dopri;
mod fd;

pub mod asymptotics;
pub mod blowup;
pub mod classify;
pub mod error;
pub mod ode;
pub mod report;
pub mod shoot;
pub mod trajectory;
pub mod verify;

pub use classify::{classify, ClassTag, SolutionClass, Thresholds};
pub use error::{LabError, Result};
pub use ode::{exact_solution, integrate, residual, rhs, EventSpec, OdeState, Params};
pub use trajectory::{Component, Event, EventKind, Termination, Trajectory};
