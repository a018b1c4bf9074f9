//! Metrics and analysis pipelines for comparing background corrections.

mod characteristics;
mod histogram;
mod metrics;
mod normalize;
mod ranks;

pub use characteristics::{
    decile_summary, lowest_signal_group, operating_characteristics, DecileSummary, OperatingCharacteristics,
};
pub use histogram::{irregular_histogram, l1_distance, IrregularHistogram, CANDIDATE_BREAKS};
pub use metrics::{
    ad_profile, apply_offset_log, decile_means, excess_risk_ratio, innate_offset, mad, mad_log, slope, Scale,
};
pub use normalize::quantile_normalize;
pub use ranks::{auc, spearman, welch_t};

/// One line of a long-format evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub metric: String,
    pub method: String,
    pub set: String,
    pub scale: String,
    pub value: f64,
}

impl ReportRow {
    pub fn new(metric: &str, method: impl ToString, set: impl ToString, scale: &str, value: f64) -> Self {
        Self { metric: metric.into(), method: method.to_string(), set: set.to_string(), scale: scale.into(), value }
    }
}
