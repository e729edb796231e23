//! Numerical toolkit for pseudo-differential operators on the torus and on
//! truncated Euclidean boxes.

pub mod certify;
pub mod error;
pub mod littlewood_paley;
pub mod metrics;
pub mod quantize;
pub mod symbol;
pub mod torus;

pub use error::{Error, Result};
