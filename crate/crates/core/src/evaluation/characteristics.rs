use super::metrics::apply_offset_log;
use super::normalize::quantile_normalize;
use crate::error::{Error, Result};
use crate::stats::{mean, sd};

/// Per-probe replicate summaries on the log2 scale, sorted by true signal.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingCharacteristics {
    pub log2_signal: Vec<f64>,
    pub mean_log2: Vec<f64>,
    pub sd_log2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecileSummary {
    pub decile: usize,
    pub log2_signal: f64,
    /// Mean of `mean log2 Ŝ − log2 S`; positive values flatten the
    /// intensity curve at that level.
    pub compression: f64,
    pub sd: f64,
}

/// Quantile-normalizes regular and negative probes of each replicate
/// together, takes `log2(x + offset)` of the regular probes and summarizes
/// them across replicates.
pub fn operating_characteristics(
    regular: &[Vec<f64>],
    negative: &[Vec<f64>],
    truth: &[f64],
    offset: f64,
) -> Result<OperatingCharacteristics> {
    if regular.len() < 2 || negative.len() != regular.len() {
        return Err(Error::input("operating characteristics need at least two paired replicates"));
    }
    if truth.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::input("true signals must be positive"));
    }
    let n = truth.len();
    if regular.iter().any(|r| r.len() != n) {
        return Err(Error::input("replicate length differs from the true signal"));
    }
    let columns: Vec<Vec<f64>> = regular.iter().zip(negative).map(|(r, g)| r.iter().chain(g).copied().collect()).collect();
    let normalized = quantile_normalize(&columns)?;
    let logs: Vec<Vec<f64>> = normalized.iter().map(|c| apply_offset_log(&c[..n], offset)).collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| truth[a].total_cmp(&truth[b]));
    let mut out = OperatingCharacteristics {
        log2_signal: Vec::with_capacity(n),
        mean_log2: Vec::with_capacity(n),
        sd_log2: Vec::with_capacity(n),
    };
    for j in order {
        let v: Vec<f64> = logs.iter().map(|c| c[j]).collect();
        out.log2_signal.push(truth[j].log2());
        out.mean_log2.push(mean(&v));
        out.sd_log2.push(sd(&v));
    }
    Ok(out)
}

/// Aggregates operating characteristics over `bins` equal-count signal groups.
pub fn decile_summary(oc: &OperatingCharacteristics, bins: usize) -> Vec<DecileSummary> {
    let n = oc.log2_signal.len();
    (0..bins)
        .filter_map(|d| {
            let (a, b) = (d * n / bins, (d + 1) * n / bins);
            (b > a).then(|| DecileSummary {
                decile: d + 1,
                log2_signal: mean(&oc.log2_signal[a..b]),
                compression: (a..b).map(|j| oc.mean_log2[j] - oc.log2_signal[j]).sum::<f64>() / (b - a) as f64,
                sd: mean(&oc.sd_log2[a..b]),
            })
        })
        .collect()
}

/// Indices of the probes whose true signal lies in the lowest `fraction`.
pub fn lowest_signal_group(truth: &[f64], fraction: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..truth.len()).collect();
    order.sort_by(|&a, &b| truth[a].total_cmp(&truth[b]));
    let m = ((truth.len() as f64 * fraction).ceil() as usize).min(truth.len());
    order.truncate(m);
    order
}
