//! Reconstruction of negative-control intensities from detection p-values,
//! where `P_j` is the fraction of negative probes brighter than `X_j`.

use crate::error::{Error, Result};

const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionTable {
    regular: Vec<f64>,
    pvalues: Vec<f64>,
    n_neg: usize,
    counts: Vec<usize>,
}

impl DetectionTable {
    /// Validates that every p-value sits on the `1/n_neg` grid.
    pub fn new(regular: Vec<f64>, pvalues: Vec<f64>, n_neg: usize) -> Result<Self> {
        if regular.len() != pvalues.len() || regular.is_empty() {
            return Err(Error::input("intensities and p-values must be nonempty and of equal length"));
        }
        if n_neg == 0 {
            return Err(Error::input("n_neg must be positive"));
        }
        if regular.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("intensities must be finite"));
        }
        let n = n_neg as f64;
        let counts = pvalues
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                let c = (p * n).round();
                if !(0.0..=1.0).contains(&p) || (p - c / n).abs() > GRID_TOL {
                    Err(Error::input(format!("p-value {p} of probe {} is not a multiple of 1/{n_neg}", j + 1)))
                } else {
                    Ok(c as usize)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { regular, pvalues, n_neg, counts })
    }

    pub fn regular(&self) -> &[f64] {
        &self.regular
    }

    pub fn pvalues(&self) -> &[f64] {
        &self.pvalues
    }

    pub fn n_neg(&self) -> usize {
        self.n_neg
    }
}

/// `P_j = #{N_k > X_j} / n_neg`.
pub fn detection_pvalues(regular: &[f64], negative: &[f64]) -> Result<Vec<f64>> {
    if regular.is_empty() || negative.is_empty() {
        return Err(Error::input("detection p-values need regular and negative probes"));
    }
    let mut neg = negative.to_vec();
    neg.sort_by(f64::total_cmp);
    let n = neg.len();
    Ok(regular.iter().map(|&x| (n - neg.partition_point(|&v| v <= x)) as f64 / n as f64).collect())
}

/// Returns `n_neg` intensities consistent with the table's p-values.
///
/// Between two adjacent p-value bands exactly `n_neg·ΔP` negatives separate
/// the brightest probe of the dimmer band from the dimmest probe of the
/// brighter band; they are placed at the midpoint. Negatives brighter than
/// every probe go just above the maximum and the remainder at the minimum.
pub fn infer_negatives(t: &DetectionTable) -> Result<Vec<f64>> {
    let mut order: Vec<usize> = (0..t.regular.len()).collect();
    order.sort_by(|&a, &b| t.regular[a].total_cmp(&t.regular[b]).then(t.counts[b].cmp(&t.counts[a])));

    // bands in increasing intensity: (count, min x, max x)
    let mut bands: Vec<(usize, f64, f64)> = Vec::new();
    for &j in &order {
        let (c, x) = (t.counts[j], t.regular[j]);
        match bands.last_mut() {
            Some(b) if b.0 == c => b.2 = x,
            Some(b) if b.0 < c => {
                return Err(Error::input(format!(
                    "p-values increase with intensity near {x}; counts {} then {c}",
                    b.0
                )))
            }
            _ => bands.push((c, x, x)),
        }
    }
    let lo = t.regular[order[0]];
    let hi = t.regular[order[order.len() - 1]];

    let mut out = Vec::with_capacity(t.n_neg);
    let first = bands[0];
    out.extend(std::iter::repeat(lo).take(t.n_neg - first.0));
    for w in bands.windows(2) {
        let (dim, bright) = (w[0], w[1]);
        let mid = 0.5 * (dim.2 + bright.1);
        out.extend(std::iter::repeat(mid).take(dim.0 - bright.0));
    }
    let top = bands[bands.len() - 1].0;
    let above = hi + (hi - lo).max(hi.abs()).max(1.0) * 1e-3;
    out.extend(std::iter::repeat(above).take(top));
    Ok(out)
}
