//! Numerical toolkit for three-dimensional Filippov systems near cusp-fold
//! singularities: classification, hybrid integration, truncated jets of the
//! half-return maps, crossing limit cycles and polycycles, plus two worked
//! models (a piecewise-linear toy system and a DC-DC boost converter).

pub mod boost;
pub mod cycles;
pub mod error;
pub mod filippov;
pub mod integrator;
pub mod jets;
pub mod normal_form;
pub mod output;
pub mod poly;
pub mod toy_model;

pub use error::{Error, Result};
pub use filippov::{FilippovSystem, Side, SmoothField, Switching};
