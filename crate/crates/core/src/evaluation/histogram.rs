use crate::error::{Error, Result};
use crate::quadrature::gauss_kronrod;
use crate::stats::sorted;

/// Size of the empirical-quantile grid from which breakpoints are chosen.
pub const CANDIDATE_BREAKS: usize = 200;

/// Piecewise-constant density on `breakpoints.len() - 1` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct IrregularHistogram {
    pub breakpoints: Vec<f64>,
    pub heights: Vec<f64>,
}

impl IrregularHistogram {
    pub fn n_bins(&self) -> usize {
        self.heights.len()
    }

    pub fn density(&self, x: f64) -> f64 {
        let b = &self.breakpoints;
        if x < b[0] || x > b[b.len() - 1] {
            return 0.0;
        }
        let i = b.partition_point(|&v| v <= x).clamp(1, self.heights.len());
        self.heights[i - 1]
    }

    pub fn mass(&self) -> f64 {
        self.heights.iter().zip(self.breakpoints.windows(2)).map(|(h, w)| h * (w[1] - w[0])).sum()
    }
}

fn penalty(d: usize, g: usize) -> f64 {
    let log_choose = libm::lgamma(g as f64) - libm::lgamma(d as f64) - libm::lgamma((g - d + 1) as f64);
    let d = d as f64;
    log_choose + d - 1.0 + d.ln().powf(2.5)
}

/// Penalized maximum-likelihood irregular histogram, with breakpoints
/// restricted to an empirical-quantile grid.
pub fn irregular_histogram(x: &[f64]) -> Result<IrregularHistogram> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("histogram input must be finite"));
    }
    let s = sorted(x);
    let n = s.len();
    if n < 2 || s[0] == s[n - 1] {
        return Err(Error::DegenerateSample("histogram needs at least 2 distinct values".into()));
    }
    let mut grid: Vec<f64> =
        (0..CANDIDATE_BREAKS).map(|i| s[(i * (n - 1) + (CANDIDATE_BREAKS - 1) / 2) / (CANDIDATE_BREAKS - 1)]).collect();
    grid.dedup();
    let g = grid.len();

    // cum[i]: points ≤ grid[i], with the minimum counted in the first cell
    let cum: Vec<usize> = grid.iter().map(|&c| s.partition_point(|&v| v <= c)).collect();
    let nf = n as f64;
    let cell = |a: usize, b: usize| -> f64 {
        let count = (cum[b] - if a == 0 { 0 } else { cum[a] }) as f64;
        if count == 0.0 {
            0.0
        } else {
            count * (count / (nf * (grid[b] - grid[a]))).ln()
        }
    };
    let ll: Vec<Vec<f64>> = (0..g).map(|a| (0..g).map(|b| if b > a { cell(a, b) } else { f64::NEG_INFINITY }).collect()).collect();

    let max_d = g - 1;
    let mut best = vec![vec![f64::NEG_INFINITY; g]; max_d + 1];
    let mut from = vec![vec![0usize; g]; max_d + 1];
    for b in 1..g {
        best[1][b] = ll[0][b];
    }
    for d in 2..=max_d {
        for b in d..g {
            let (mut v, mut arg) = (f64::NEG_INFINITY, 0);
            for a in (d - 1)..b {
                let c = best[d - 1][a] + ll[a][b];
                if c > v {
                    v = c;
                    arg = a;
                }
            }
            best[d][b] = v;
            from[d][b] = arg;
        }
    }
    let d_opt = (1..=max_d)
        .max_by(|&a, &b| (best[a][g - 1] - penalty(a, g)).total_cmp(&(best[b][g - 1] - penalty(b, g))))
        .unwrap_or(1);

    let mut idx = vec![g - 1];
    let mut b = g - 1;
    for d in (2..=d_opt).rev() {
        b = from[d][b];
        idx.push(b);
    }
    idx.push(0);
    idx.reverse();

    let breakpoints: Vec<f64> = idx.iter().map(|&i| grid[i]).collect();
    let heights = idx
        .windows(2)
        .map(|w| (cum[w[1]] - if w[0] == 0 { 0 } else { cum[w[0]] }) as f64 / (nf * (grid[w[1]] - grid[w[0]])))
        .collect();
    Ok(IrregularHistogram { breakpoints, heights })
}

/// `∫ |f − h|` over the real line: quadrature inside each bin plus the mass
/// of `f` outside the histogram support.
pub fn l1_distance<F: Fn(f64) -> f64>(f: F, h: &IrregularHistogram) -> Result<f64> {
    let mut inside = 0.0;
    let mut f_mass = 0.0;
    for (w, &height) in h.breakpoints.windows(2).zip(&h.heights) {
        inside += gauss_kronrod(|x| (f(x) - height).abs(), w[0], w[1], 1e-10, 1e-8)?;
        f_mass += gauss_kronrod(&f, w[0], w[1], 1e-12, 1e-10)?;
    }
    Ok(inside + (1.0 - f_mass).max(0.0))
}
