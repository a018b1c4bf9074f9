//! Signal-plus-noise decomposition of microarray probe intensities under the
//! normal-gamma and normal-exponential convolution models.

pub mod convolution;
pub mod correction;
pub mod distributions;
pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod io;
pub mod negctrl;
pub mod optimize;
pub mod pipeline;
pub mod quadrature;
pub mod simulation;
pub mod stats;

pub use error::{Error, Result};
