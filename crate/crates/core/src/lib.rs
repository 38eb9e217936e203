//! Differentiable two-mode Fock-space simulator for coherent-plus-squeezed
//! NOON interferometry, with Fisher-information estimators, an Adam training
//! loop over the eight circuit parameters and single-mode Wigner analysis.

pub mod autodiff;
pub mod circuit;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod metrology;
pub mod optimizer;
pub mod output;
pub mod report;
pub mod scalar;
pub mod wigner;

pub use error::{Error, Result};
