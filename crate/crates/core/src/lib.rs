//! Numerical laboratory for Higgs bundles on flat complex tori.

pub mod complex;
pub mod error;
pub mod family;
pub mod form;
pub mod gauge;
pub mod hodge;
pub mod hym;
pub mod hyperkahler;
pub mod geometry;
pub mod linalg;
pub mod pipeline;
pub mod pw;
pub mod report;
pub mod scenario;
mod par;

pub use error::{LabError, Result};
pub use form::{Bundle, FiberMetric, FormField};
pub use geometry::{TorusGeometry, Twist, C64};
