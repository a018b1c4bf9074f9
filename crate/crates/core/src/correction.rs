//! Background correction: conditional expectation of the signal given the
//! observed intensity under each fitted model, and plain subtraction.

use std::fmt;
use std::str::FromStr;

use crate::convolution::{
    build_density_grid, quadrature_breakpoints, DensityGrid, NormalGammaParams, NormexpParams,
};
use crate::distributions::{gamma_pdf, normal_pdf, truncated_mean_offset};
use crate::error::{Error, Result};
use crate::quadrature::tanh_sinh_piecewise;
use crate::stats;

/// The six correction methods compared in the evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodTag {
    NgTrue,
    NgMle,
    NexpMle,
    NexpRma,
    NexpNp,
    Subtract,
}

impl MethodTag {
    pub const ALL: [MethodTag; 6] = [
        MethodTag::NgTrue,
        MethodTag::NgMle,
        MethodTag::NexpMle,
        MethodTag::NexpRma,
        MethodTag::NexpNp,
        MethodTag::Subtract,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodTag::NgTrue => "NG_TRUE",
            MethodTag::NgMle => "NG_MLE",
            MethodTag::NexpMle => "NEXP_MLE",
            MethodTag::NexpRma => "NEXP_RMA",
            MethodTag::NexpNp => "NEXP_NP",
            MethodTag::Subtract => "SUBTRACT",
        }
    }

    /// Index `i` of the estimator `Ŝ⁽ⁱ⁾`.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase().replace('-', "_");
        MethodTag::ALL
            .into_iter()
            .find(|t| t.as_str() == up)
            .ok_or_else(|| Error::input(format!("unknown correction method '{s}'")))
    }
}

/// A correction method with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrectionMethod {
    NgTrue(NormalGammaParams),
    NgMle(NormalGammaParams),
    NexpMle(NormexpParams),
    NexpRma(NormexpParams),
    NexpNp(NormexpParams),
    /// Subtraction of the negative-probe median.
    Subtract { median: f64 },
}

impl CorrectionMethod {
    pub fn tag(&self) -> MethodTag {
        match self {
            CorrectionMethod::NgTrue(_) => MethodTag::NgTrue,
            CorrectionMethod::NgMle(_) => MethodTag::NgMle,
            CorrectionMethod::NexpMle(_) => MethodTag::NexpMle,
            CorrectionMethod::NexpRma(_) => MethodTag::NexpRma,
            CorrectionMethod::NexpNp(_) => MethodTag::NexpNp,
            CorrectionMethod::Subtract { .. } => MethodTag::Subtract,
        }
    }

    pub fn subtract(neg: &[f64]) -> Result<Self> {
        if neg.is_empty() {
            return Err(Error::input("subtraction needs at least one negative probe"));
        }
        Ok(CorrectionMethod::Subtract { median: stats::median(neg) })
    }

    /// Builds whatever the method needs (density grids for normal-gamma).
    pub fn prepare(&self) -> Result<Corrector> {
        Ok(match *self {
            CorrectionMethod::NgTrue(p) | CorrectionMethod::NgMle(p) => Corrector::NormalGamma(NormgamCorrector::new(&p)?),
            CorrectionMethod::NexpMle(p) | CorrectionMethod::NexpRma(p) | CorrectionMethod::NexpNp(p) => {
                Corrector::Normexp(p)
            }
            CorrectionMethod::Subtract { median } => Corrector::Subtract(median),
        })
    }
}

/// Ready-to-apply correction.
#[derive(Debug, Clone)]
pub enum Corrector {
    NormalGamma(NormgamCorrector),
    Normexp(NormexpParams),
    Subtract(f64),
}

impl Corrector {
    pub fn correct(&self, x: f64) -> f64 {
        match self {
            Corrector::NormalGamma(c) => c.correct(x),
            Corrector::Normexp(p) => correct_normexp(x, p),
            Corrector::Subtract(m) => (x - m).max(0.0),
        }
    }

    pub fn correct_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.correct(x)).collect()
    }
}

/// Normal-gamma correction with its two density grids, for shapes `k` and
/// `k + 1`.
#[derive(Debug, Clone)]
pub struct NormgamCorrector {
    pub params: NormalGammaParams,
    grid_k: DensityGrid,
    grid_k1: DensityGrid,
}

impl NormgamCorrector {
    pub fn new(p: &NormalGammaParams) -> Result<Self> {
        Ok(Self { params: *p, grid_k: build_density_grid(p)?, grid_k1: build_density_grid(&p.with_next_shape())? })
    }

    pub fn correct(&self, x: f64) -> f64 {
        correct_normgam(x, &self.params, (&self.grid_k, &self.grid_k1))
    }

    pub fn correct_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.correct(x)).collect()
    }
}

/// `kθ f_{k+1}(x) / f_k(x)`, the ratio taken in log space so that both
/// tails stay finite.
pub fn correct_normgam(x: f64, p: &NormalGammaParams, grids: (&DensityGrid, &DensityGrid)) -> f64 {
    let log_ratio = grids.1.log_pdf(x) - grids.0.log_pdf(x);
    (p.signal_mean().ln() + log_ratio).exp().max(f64::MIN_POSITIVE)
}

/// `σ (x̄ + φ(x̄)/Φ(x̄))` with `x̄ = (x - μ - σ²/α)/σ`.
pub fn correct_normexp(x: f64, p: &NormexpParams) -> f64 {
    let z = (x - p.mu - p.sigma * p.sigma / p.alpha) / p.sigma;
    (p.sigma * truncated_mean_offset(z)).max(f64::MIN_POSITIVE)
}

/// `max(x - median(neg), 0)`.
pub fn correct_subtract(x: f64, neg: &[f64]) -> f64 {
    (x - stats::median(neg)).max(0.0)
}

/// `E[S | X = x]` for `X = S + B` by quadrature of
/// `∫ s f_S(s) f_B(x - s) ds / ∫ f_S(s) f_B(x - s) ds` over the segments
/// `breaks` of the signal axis.
pub fn conditional_expectation_oracle<S, B>(x: f64, signal_pdf: S, noise_pdf: B, breaks: &[f64]) -> Result<f64>
where
    S: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
{
    const TOL: f64 = 1e-10;
    let joint = |s: f64| signal_pdf(s) * noise_pdf(x - s);
    let den = tanh_sinh_piecewise(&joint, breaks, TOL)?;
    if !(den > 0.0) {
        return Err(Error::Quadrature(format!("vanishing marginal density at x = {x}")));
    }
    let num = tanh_sinh_piecewise(|s| s * joint(s), breaks, TOL)?;
    Ok(num / den)
}

/// Oracle for the normal-gamma model.
pub fn conditional_expectation_normgam(x: f64, p: &NormalGammaParams) -> Result<f64> {
    let g = p.signal();
    let noise = p.noise();
    conditional_expectation_oracle(x, |s| gamma_pdf(s, &g), |b| normal_pdf(b, &noise), &quadrature_breakpoints(x, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::NormalParams;

    fn set(i: usize) -> NormalGammaParams {
        let t = [
            (53.0, 4.4, 0.12, 1785.0),
            (138.0, 24.0, 0.11, 4949.0),
            (43.5, 5.8, 1.0, 226.0),
            (170.0, 41.0, 1.0, 505.0),
            (52.8, 5.0, 1.0, 8.33),
            (223.0, 37.0, 1.0, 33.8),
            (93.0, 11.0, 0.08, 3230.0),
        ][i - 1];
        NormalGammaParams::new(t.0, t.1, t.2, t.3).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn tags_round_trip() {
        for t in MethodTag::ALL {
            assert_eq!(t.as_str().parse::<MethodTag>().unwrap(), t);
        }
        assert_eq!("nexp-mle".parse::<MethodTag>().unwrap(), MethodTag::NexpMle);
        assert!("ng".parse::<MethodTag>().is_err());
        assert_eq!(MethodTag::Subtract.index(), 5);
    }

    #[test]
    fn normgam_matches_oracle() {
        for i in [1, 2, 3, 7] {
            let p = set(i);
            let c = NormgamCorrector::new(&p).unwrap();
            for x in [p.mu - 3.0 * p.sigma, p.mu, p.mu + 2.0 * p.sigma, 200.0, 2000.0] {
                let o = conditional_expectation_normgam(x, &p).unwrap();
                assert!(rel(c.correct(x), o) < 1e-4, "set {i} x={x}: {} vs {o}", c.correct(x));
            }
        }
    }

    #[test]
    fn exponential_case_matches_closed_form() {
        for i in 3..=6 {
            let p = set(i);
            let ne = NormexpParams::new(p.mu, p.sigma, p.theta).unwrap();
            let c = NormgamCorrector::new(&p).unwrap();
            let mut x = p.mu - 5.0 * p.sigma;
            while x < c.grid_k.spec.upper {
                assert!(rel(c.correct(x), correct_normexp(x, &ne)) < 1e-5, "set {i} x={x}");
                x += p.sigma / 3.0;
            }
        }
    }

    #[test]
    fn far_right_approaches_excess() {
        let p = set(1);
        let c = NormgamCorrector::new(&p).unwrap();
        let x = p.mu + 50.0 * p.sigma + 10.0 * p.signal_mean();
        assert!(rel(c.correct(x), x - p.mu) < 0.01);
        for x in [x, 5.0 * x, 40.0 * x] {
            let s = c.correct(x);
            assert!(s > 0.0 && s <= x - p.mu + p.signal_mean());
        }
    }

    #[test]
    fn normexp_closed_form_values() {
        let p = NormexpParams::new(43.5, 5.8, 226.0).unwrap();
        let x0 = p.mu + p.sigma * p.sigma / p.alpha;
        let expect = p.sigma * (2.0 / std::f64::consts::PI).sqrt();
        assert!(rel(correct_normexp(x0, &p), expect) < 1e-14);
        let x40 = x0 + 40.0 * p.sigma;
        assert!(rel(correct_normexp(x40, &p), x40 - x0) < 1e-6);
        let noise = p.noise();
        let expo = NormalGammaParams::from(p).signal();
        for x in [0.0, 30.0, 43.5, 60.0, 300.0, 1500.0] {
            let q = NormalGammaParams::from(p);
            let o = conditional_expectation_oracle(
                x,
                |s| gamma_pdf(s, &expo),
                |b| normal_pdf(b, &noise),
                &quadrature_breakpoints(x, &q),
            )
            .unwrap();
            assert!(rel(correct_normexp(x, &p), o) < 1e-6, "x={x}");
        }
    }

    #[test]
    fn subtraction_by_hand() {
        assert_eq!(correct_subtract(10.0, &[1.0, 2.0, 3.0]), 8.0);
        assert_eq!(correct_subtract(2.0, &[1.0, 2.0, 3.0]), 0.0);
        let m = CorrectionMethod::subtract(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(m.prepare().unwrap().correct(10.0), 8.0);
    }

    #[test]
    fn oracle_limits() {
        let noise = NormalParams::new(0.0, 5.0).unwrap();
        let narrow = crate::distributions::GammaParams::new(1e6, 1e-4).unwrap();
        let v = conditional_expectation_oracle(112.0, |s| gamma_pdf(s, &narrow), |b| normal_pdf(b, &noise), &[95.0, 99.0, 100.0, 101.0, 105.0])
            .unwrap();
        assert!((v - 100.0).abs() < 0.01, "{v}");
        let wide = NormalParams::new(300.0, 40.0).unwrap();
        let v = conditional_expectation_oracle(300.0, |s| normal_pdf(s, &wide), |b| normal_pdf(b, &noise), &[0.0, 250.0, 300.0, 350.0, 600.0])
            .unwrap();
        assert!((v - 300.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn monotone_and_positive() {
        let p = set(1);
        let ne = NormexpParams::new(53.0, 4.4, 214.0).unwrap();
        let methods = [
            CorrectionMethod::NgTrue(p),
            CorrectionMethod::NexpMle(ne),
            CorrectionMethod::Subtract { median: 53.0 },
        ];
        let xs: Vec<f64> = (0..1000).map(|i| -200.0 + i as f64 * 40.0).collect();
        for m in methods {
            let c = m.prepare().unwrap();
            let s = c.correct_all(&xs);
            for w in s.windows(2) {
                if m.tag() == MethodTag::Subtract {
                    assert!(w[0] <= w[1]);
                } else {
                    assert!(w[0] < w[1] && w[0] > 0.0, "{:?} {w:?}", m.tag());
                }
            }
        }
    }
}
