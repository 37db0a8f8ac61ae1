//! Inexact accelerated Newton proximal extragradient method for composite
//! convex minimization `min g(x) + h(x)`.

pub mod error;
pub mod numerics;
pub mod problem;
pub mod synth;
pub mod oracle;
pub mod ans;
pub mod linesearch;
pub mod io;
pub mod driver;
pub mod verify;

pub use error::{Error, ErrorClass, Result};
