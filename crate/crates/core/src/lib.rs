//! Finite-volume solver for reaction-diffusion systems on a domain split by a
//! flat membrane, with Kedem-Katchalsky transmission conditions.
pub mod elliptic;
pub mod error;
pub mod field;
pub mod linalg;
pub mod mesh;
pub mod reactions;

pub use error::{Error, Result};
pub use field::{Field, MultiField};
pub mod monitors;
pub mod parabolic;
pub mod experiments;
pub mod cli;
