//! Densities of the observed intensity `X = S + B` with normal noise `B`:
//! the normal-gamma density (FFT of the characteristic function, with a
//! quadrature oracle) and the closed-form normal-exponential density.

mod grid;
mod normexp;
mod oracle;
mod params;

pub use grid::{
    build_density_grid, build_density_grid_with, left_tail_log_density, normgam_charfn, normgam_pdf,
    right_tail_log_density, DensityGrid, GridResolution, GridSpec,
};
pub use normexp::{normexp_log_pdf, normexp_pdf};
pub use oracle::{normgam_pdf_quadrature, quadrature_breakpoints};
pub use params::{NormalGammaParams, NormexpParams};
