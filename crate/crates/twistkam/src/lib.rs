//! Weak KAM machinery for exact twist maps on the cylinder: generating
//! functions, discrete Lax-Oleinik operators, effective interaction solves,
//! and the singular dynamics of the optimal forward map.

pub mod cli;
pub mod config;
pub mod error;
pub mod generating;
pub mod grid;
pub mod lax_oleinik;
pub mod singular;
pub mod weak_kam;

pub use error::{Result, TwistError};
pub use generating::{CohomologyClass, Family, GeneratingFunction};
pub use grid::GridFunction;
