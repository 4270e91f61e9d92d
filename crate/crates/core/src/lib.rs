//! Gaussian-process regression together with its flat-limit companion models:
//! polynomial regression, smoothing splines and polyharmonic splines.

pub mod doftools;
pub mod error;
pub mod flatlimit;
pub mod gp;
pub mod kernels;
pub mod linalg;
pub mod polybasis;
pub mod spm;

pub use error::{Error, Result};
pub use kernels::{Family, Kernel, Regularity};
pub use polybasis::{Design, MultiIndex};
pub use spm::{Basis, SemiParametricModel, SmootherMatrix};
