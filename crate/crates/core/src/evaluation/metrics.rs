use crate::error::{Error, Result};
use crate::stats::mean;

/// Scale on which deviations are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Raw,
    Log,
}

impl Scale {
    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Raw => "raw",
            Scale::Log => "log",
        }
    }
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::input("corrected and true signals must be nonempty and of equal length"));
    }
    Ok(())
}

fn check_positive(x: &[f64]) -> Result<()> {
    if x.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::input("log-scale deviation needs positive values"));
    }
    Ok(())
}

/// Mean absolute deviation between corrected and true signal.
pub fn mad(corrected: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(corrected, truth)?;
    Ok(corrected.iter().zip(truth).map(|(a, b)| (a - b).abs()).sum::<f64>() / truth.len() as f64)
}

/// Mean absolute deviation of natural logs.
pub fn mad_log(corrected: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(corrected, truth)?;
    check_positive(corrected)?;
    check_positive(truth)?;
    Ok(corrected.iter().zip(truth).map(|(a, b)| (a.ln() - b.ln()).abs()).sum::<f64>() / truth.len() as f64)
}

pub fn excess_risk_ratio(mads: &[f64], reference: f64) -> Result<Vec<f64>> {
    if !(reference > 0.0) {
        return Err(Error::input("reference MAD must be positive"));
    }
    Ok(mads.iter().map(|m| m / reference).collect())
}

/// Per-probe absolute deviation averaged over replicates that share `truth`,
/// returned as `(ln S_j, AD_j)` sorted by signal.
pub fn ad_profile(corrected: &[Vec<f64>], truth: &[f64], scale: Scale) -> Result<Vec<(f64, f64)>> {
    if corrected.is_empty() {
        return Err(Error::input("no replicates"));
    }
    check_positive(truth)?;
    for c in corrected {
        check_pair(c, truth)?;
        if scale == Scale::Log {
            check_positive(c)?;
        }
    }
    let m = corrected.len() as f64;
    let mut out: Vec<(f64, f64)> = truth
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let ad = corrected
                .iter()
                .map(|c| match scale {
                    Scale::Raw => (c[j] - s).abs(),
                    Scale::Log => (c[j].ln() - s.ln()).abs(),
                })
                .sum::<f64>()
                / m;
            (s.ln(), ad)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Means of the second coordinate over `bins` equal-count groups of a curve
/// already sorted by its first coordinate.
pub fn decile_means(curve: &[(f64, f64)], bins: usize) -> Vec<f64> {
    let n = curve.len();
    (0..bins)
        .filter_map(|d| {
            let (a, b) = (d * n / bins, (d + 1) * n / bins);
            (b > a).then(|| curve[a..b].iter().map(|p| p.1).sum::<f64>() / (b - a) as f64)
        })
        .collect()
}

/// Mean corrected intensity of zero-signal probes.
pub fn innate_offset(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::input("innate offset of an empty set"));
    }
    Ok(mean(values))
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn slope(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateSample("slope needs at least two distinct x".into()));
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx)
}

/// `log2(x + offset)`.
pub fn apply_offset_log(x: &[f64], offset: f64) -> Result<Vec<f64>> {
    if !(offset >= 0.0) {
        return Err(Error::input("offset must be nonnegative"));
    }
    x.iter()
        .map(|&v| {
            let s = v + offset;
            if s > 0.0 {
                Ok(s.log2())
            } else {
                Err(Error::input(format!("value {v} + offset {offset} is not positive")))
            }
        })
        .collect()
}
