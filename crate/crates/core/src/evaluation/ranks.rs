use crate::error::{Error, Result};
use crate::stats::{mean, midranks, pearson, variance};

/// Area under the ROC curve, `U / (n₁ n₀)` from mid-ranks; ties count half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::input("scores and labels differ in length"));
    }
    let n1 = labels.iter().filter(|&&l| l).count();
    let n0 = labels.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::input("AUC needs both classes"));
    }
    let ranks = midranks(scores);
    let r1: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    Ok(u / (n1 as f64 * n0 as f64))
}

/// Pearson correlation of mid-ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::input("spearman needs two vectors of equal length >= 3"));
    }
    let r = pearson(&midranks(x), &midranks(y));
    if r.is_nan() {
        return Err(Error::DegenerateSample("constant vector in rank correlation".into()));
    }
    Ok(r)
}

/// Unequal-variance two-sample t statistic of `a` against `b`.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::input("welch t needs at least two values per group"));
    }
    let diff = mean(a) - mean(b);
    let se = (variance(a) / a.len() as f64 + variance(b) / b.len() as f64).sqrt();
    if se == 0.0 {
        return if diff == 0.0 { Ok(0.0) } else { Err(Error::DegenerateSample("both groups constant".into())) };
    }
    Ok(diff / se)
}
