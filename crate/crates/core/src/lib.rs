pub mod constraints;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod formula;
pub mod glm;
pub mod linalg;
pub mod model;
pub mod ols;
pub mod penalized;
pub mod simulation;

pub use error::{Error, ErrorKind, Result};
