//! Product measures on bipartite quantum systems, their extension to
//! operators, and the complete-positivity and time-orientation analysis that
//! separates quantum states from operators that are merely positive on
//! product states.

pub mod bell;
pub mod contexts;
pub mod dilation;
pub mod error;
pub mod fixtures;
pub mod jordan;
pub mod measures;
pub mod operator;
pub mod random;

pub use error::{Error, Result};
