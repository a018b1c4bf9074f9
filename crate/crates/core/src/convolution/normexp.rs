use super::NormexpParams;
use crate::distributions::std_normal_log_cdf;

/// Log density of normal noise plus exponential signal:
/// `-ln α + σ²/(2α²) - (x - μ)/α + ln Φ((x - μ - σ²/α)/σ)`.
pub fn normexp_log_pdf(x: f64, p: &NormexpParams) -> f64 {
    let s2 = p.sigma * p.sigma;
    let z = (x - p.mu - s2 / p.alpha) / p.sigma;
    -p.alpha.ln() + s2 / (2.0 * p.alpha * p.alpha) - (x - p.mu) / p.alpha + std_normal_log_cdf(z)
}

pub fn normexp_pdf(x: f64, p: &NormexpParams) -> f64 {
    normexp_log_pdf(x, p).exp()
}
