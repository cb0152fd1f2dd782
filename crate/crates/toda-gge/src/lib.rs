//! Numerical laboratory for the periodic Toda chain under generalised Gibbs
//! ensembles: Lax dynamics, the spectral root web, hyperelliptic density
//! integrals, ensemble samplers, gridded measures and the rate functional.

pub mod error;
pub mod gge;
pub mod harness;
pub mod hyperelliptic;
pub mod linalg;
pub mod measures;
pub mod poly;
pub mod quad;
pub mod rate;
pub mod spectral;
pub mod textfmt;
pub mod toda;

pub use error::{Error, Result};
