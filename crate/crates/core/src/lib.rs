//! Numerical toolkit for semitoric integrable systems.

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod fibration;
pub mod geom;
pub mod inverse;
pub mod io;
pub mod ode;
pub mod polygon;
pub mod quantum;
pub mod selftest;
pub mod singularity;
pub mod systems;
pub mod taylor;

pub use error::{Error, Result};
pub use geom::{PhasePoint, TangentVector, Value};
pub use systems::{ModelKind, ModelSpec, ModelSystem};
