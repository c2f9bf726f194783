//! Numerical laboratory for smooth solitary waves of the Degasperis–Procesi
//! equation with linear dispersion,
//!
//! ```text
//! u_t + ∂x(½u² + p∗(3/2 u² + 2k u)) = 0,    p(x) = ½e^{-|x|},
//! ```
//!
//! on a periodic truncation of the line.

// `!(x > 0.0)` is used throughout to reject NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod evolution;
pub mod io;
pub mod linops;
pub mod profile;
pub mod spectral;
pub mod stability;

pub use error::{Error, Result};
pub use spectral::{Field, Grid, SymbolId};
