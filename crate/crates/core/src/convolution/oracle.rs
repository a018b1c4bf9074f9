use super::NormalGammaParams;
use crate::distributions::{gamma_log_pdf, normal_log_pdf};
use crate::error::Result;
use crate::quadrature::tanh_sinh_piecewise;

const REL_TOL: f64 = 1e-12;

/// Breakpoints in the signal variable `t` that bracket the peak of
/// `f_gam(t) f_norm(x - t)`.
pub fn quadrature_breakpoints(x: f64, p: &NormalGammaParams) -> Vec<f64> {
    let s = p.sigma;
    let peak = (x - p.mu - s * s / p.theta).max(0.0);
    let mut breaks = vec![0.0];
    for off in [-12.0, -4.0, 0.0, 4.0, 12.0, 40.0] {
        let b = peak + off * s;
        if b > 0.0 {
            breaks.push(b);
        }
    }
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    breaks
}

/// Normal-gamma density `∫ f_gam(t) f_norm(x - t) dt` by double-exponential
/// quadrature over peak-centred segments. The integrable singularity at
/// `t = 0` for `k < 1` sits on a segment endpoint.
pub fn normgam_pdf_quadrature(x: f64, p: &NormalGammaParams) -> Result<f64> {
    let g = p.signal();
    let noise = p.noise();
    let log_f = |t: f64| gamma_log_pdf(t, &g) + normal_log_pdf(x - t, &noise);
    let breaks = quadrature_breakpoints(x, p);
    // abscissa rounding limits attainable accuracy when sigma is tiny
    let reach = (x - p.mu).abs() + breaks[breaks.len() - 1] + p.sigma;
    let tol = REL_TOL.max(4.0 * f64::EPSILON * reach / p.sigma);
    let scale = breaks
        .iter()
        .skip(1)
        .copied()
        .chain([p.sigma * 1e-3])
        .map(log_f)
        .fold(f64::NEG_INFINITY, f64::max);
    if !scale.is_finite() {
        return Ok(0.0);
    }
    let integral = tanh_sinh_piecewise(
        |t| {
            if t <= 0.0 {
                0.0
            } else {
                (log_f(t) - scale).exp()
            }
        },
        &breaks,
        tol,
    )?;
    Ok(integral * scale.exp())
}
