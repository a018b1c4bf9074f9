//! Parameter estimation for one array from its regular and negative probes.

use std::cell::RefCell;
use std::collections::HashMap;

use crate::convolution::{build_density_grid_with, normexp_log_pdf, GridResolution, NormalGammaParams, NormexpParams};
use crate::distributions::{normal_log_pdf, NormalParams};
use crate::error::{Error, Result};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::stats;

pub const MIN_REGULAR: usize = 100;
pub const MIN_NEGATIVE: usize = 10;
const LOG_DENSITY_FLOOR: f64 = -690.775_527_898_213_7;
const IQR_TO_SD: f64 = 1.349;

/// Intensities of one array.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProbeArray {
    pub regular: Vec<f64>,
    pub negative: Vec<f64>,
    pub detection_pvalues: Option<Vec<f64>>,
}

impl ProbeArray {
    pub fn new(regular: Vec<f64>, negative: Vec<f64>) -> Result<Self> {
        let arr = Self { regular, negative, detection_pvalues: None };
        if let Some(i) = arr.regular.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("regular intensity {i} is not finite")));
        }
        if let Some(i) = arr.negative.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("negative intensity {i} is not finite")));
        }
        Ok(arr)
    }

    pub fn with_pvalues(mut self, p: Vec<f64>) -> Result<Self> {
        if p.len() != self.regular.len() {
            return Err(Error::input(format!(
                "{} detection p-values for {} regular probes",
                p.len(),
                self.regular.len()
            )));
        }
        self.detection_pvalues = Some(p);
        Ok(self)
    }

    /// Checks the sizes required by the likelihood and moment estimators.
    pub fn check_fittable(&self) -> Result<()> {
        if self.regular.len() < MIN_REGULAR {
            return Err(Error::input(format!(
                "{} regular probes, at least {MIN_REGULAR} required",
                self.regular.len()
            )));
        }
        if self.negative.len() < MIN_NEGATIVE {
            return Err(Error::input(format!(
                "{} negative probes, at least {MIN_NEGATIVE} required",
                self.negative.len()
            )));
        }
        Ok(())
    }

    /// Applies `x -> scale * x + shift` to every intensity.
    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        let f = |v: &Vec<f64>| v.iter().map(|x| scale * x + shift).collect();
        Self { regular: f(&self.regular), negative: f(&self.negative), detection_pvalues: self.detection_pvalues.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult<P> {
    pub params: P,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub optimizer: NelderMeadOptions,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { optimizer: NelderMeadOptions::default() }
    }
}

fn negative_loglik(noise: &NormalParams, neg: &[f64]) -> f64 {
    neg.iter().map(|&x| normal_log_pdf(x, noise)).sum()
}

/// Normal-gamma log-likelihood of the regular probes plus the normal
/// log-likelihood of the negatives, from one likelihood-resolution grid.
pub fn loglik_normgam(p: &NormalGammaParams, arr: &ProbeArray) -> Result<f64> {
    let mut ll = negative_loglik(&p.noise(), &arr.negative);
    if arr.regular.is_empty() {
        return Ok(ll);
    }
    let grid = build_density_grid_with(p, GridResolution::Likelihood)?;
    ll += arr.regular.iter().map(|&x| grid.log_pdf(x).max(LOG_DENSITY_FLOOR)).sum::<f64>();
    Ok(ll)
}

pub fn loglik_normexp(p: &NormexpParams, arr: &ProbeArray) -> f64 {
    negative_loglik(&p.noise(), &arr.negative)
        + arr.regular.iter().map(|&x| normexp_log_pdf(x, p).max(LOG_DENSITY_FLOOR)).sum::<f64>()
}

/// Moment-based starting point. The flag reports that a fallback branch was
/// taken (zero IQR, or regular variance not above the noise variance).
pub fn normgam_init(arr: &ProbeArray) -> Result<(NormalGammaParams, bool)> {
    arr.check_fittable()?;
    let mu = stats::mean(&arr.negative);
    let mut fallback = false;
    let mut sigma = stats::iqr(&arr.negative) / IQR_TO_SD;
    if sigma <= 0.0 {
        sigma = stats::sd(&arr.negative);
        fallback = true;
    }
    if sigma <= 0.0 {
        return Err(Error::DegenerateSample("negative probes are constant".into()));
    }
    let excess = stats::mean(&arr.regular) - mu;
    if excess <= 0.0 {
        return Err(Error::SignalBelowNoise);
    }
    let extra_var = stats::variance(&arr.regular) - sigma * sigma;
    let (k, theta) = if extra_var > 0.0 {
        let theta = extra_var / excess;
        (excess / theta, theta)
    } else {
        fallback = true;
        (1.0, excess)
    };
    Ok((NormalGammaParams::new(mu, sigma, k, theta)?, fallback))
}

/// `(μ, ln σ, ln kθ, ln θ√k)`.
fn to_coords(p: &NormalGammaParams) -> [f64; 4] {
    [p.mu, p.sigma.ln(), (p.k * p.theta).ln(), (p.theta * p.k.sqrt()).ln()]
}

fn from_coords(z: &[f64]) -> Option<NormalGammaParams> {
    let (p3, p4) = (z[2].exp(), z[3].exp());
    NormalGammaParams::new(z[0], z[1].exp(), (p3 / p4).powi(2), p4 * p4 / p3).ok()
}

pub fn normgam_mle(arr: &ProbeArray) -> Result<FitResult<NormalGammaParams>> {
    normgam_mle_with(arr, &MleOptions::default())
}

/// Normal-gamma maximum likelihood by simplex search in
/// `(μ, ln σ, ln kθ, ln θ√k)` from [`normgam_init`].
pub fn normgam_mle_with(arr: &ProbeArray, opts: &MleOptions) -> Result<FitResult<NormalGammaParams>> {
    let (init, _) = normgam_init(arr)?;
    let cache: RefCell<HashMap<[i64; 4], f64>> = RefCell::new(HashMap::new());
    let objective = |z: &[f64]| -> f64 {
        let key: [i64; 4] = std::array::from_fn(|i| {
            let unit = if i == 0 { init.sigma } else { 1.0 };
            (z[i] / unit * 1e10).round() as i64
        });
        if let Some(&v) = cache.borrow().get(&key) {
            return v;
        }
        let v = match from_coords(z) {
            Some(p) => loglik_normgam(&p, arr).map(|l| -l).unwrap_or(f64::INFINITY),
            None => f64::INFINITY,
        };
        cache.borrow_mut().insert(key, v);
        v
    };
    let z0 = to_coords(&init);
    let step = [0.1 * init.sigma, 0.1, 0.1, 0.1];
    let m = nelder_mead(objective, &z0, &step, &opts.optimizer);
    let params = from_coords(&m.x).ok_or_else(|| Error::NoConvergence { what: "normal-gamma MLE", iterations: m.iterations })?;
    if !m.value.is_finite() {
        return Err(Error::NoConvergence { what: "normal-gamma MLE", iterations: m.iterations });
    }
    Ok(FitResult { params, loglik: -m.value, iterations: m.iterations, converged: m.converged })
}

/// Method of moments: `μ = mean(neg)`, `σ = sd(neg)`, `α = mean(reg) - μ`.
pub fn normexp_np(arr: &ProbeArray) -> Result<NormexpParams> {
    if arr.negative.len() < 2 || arr.regular.is_empty() {
        return Err(Error::input("moment estimates need at least two negatives and one regular probe"));
    }
    let mu = stats::mean(&arr.negative);
    let sigma = stats::sd(&arr.negative);
    let alpha = stats::mean(&arr.regular) - mu;
    if alpha <= 0.0 {
        return Err(Error::SignalBelowNoise);
    }
    if sigma <= 0.0 {
        return Err(Error::DegenerateSample("negative probes are constant".into()));
    }
    NormexpParams::new(mu, sigma, alpha)
}

pub fn normexp_mle(arr: &ProbeArray) -> Result<FitResult<NormexpParams>> {
    normexp_mle_with(arr, &MleOptions::default())
}

/// Normexp maximum likelihood in `(μ, ln σ, ln α)` started from the moment
/// estimates.
pub fn normexp_mle_with(arr: &ProbeArray, opts: &MleOptions) -> Result<FitResult<NormexpParams>> {
    arr.check_fittable()?;
    let init = normexp_np(arr)?;
    let objective = |z: &[f64]| -> f64 {
        match NormexpParams::new(z[0], z[1].exp(), z[2].exp()) {
            Ok(p) => -loglik_normexp(&p, arr),
            Err(_) => f64::INFINITY,
        }
    };
    let z0 = [init.mu, init.sigma.ln(), init.alpha.ln()];
    let step = [0.1 * init.sigma, 0.1, 0.1];
    let m = nelder_mead(objective, &z0, &step, &opts.optimizer);
    if !m.value.is_finite() {
        return Err(Error::NoConvergence { what: "normexp MLE", iterations: m.iterations });
    }
    let params = NormexpParams::new(m.x[0], m.x[1].exp(), m.x[2].exp())?;
    Ok(FitResult { params, loglik: -m.value, iterations: m.iterations, converged: m.converged })
}

const KDE_POINTS: usize = 1 << 14;
const KDE_CUT: f64 = 3.0;

/// Silverman's rule-of-thumb bandwidth `0.9 min(sd, IQR/1.34) n^-1/5`.
pub fn bandwidth_nrd0(x: &[f64]) -> f64 {
    let sd = stats::sd(x);
    let spread = match stats::iqr(x) / 1.34 {
        r if r > 0.0 => sd.min(r),
        _ => sd,
    };
    0.9 * spread * (x.len() as f64).powf(-0.2)
}

/// Location of the maximum of an Epanechnikov kernel density estimate
/// evaluated on a regular grid spanning the data plus three bandwidths.
pub fn kde_mode(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::DegenerateSample("kernel density needs at least two points".into()));
    }
    let bw = bandwidth_nrd0(x);
    if !(bw > 0.0) {
        return Err(Error::DegenerateSample("zero bandwidth: all values identical".into()));
    }
    let sorted = stats::sorted(x);
    let centre = sorted[sorted.len() / 2];
    let mut s1 = vec![0.0; sorted.len() + 1];
    let mut s2 = vec![0.0; sorted.len() + 1];
    for (i, &v) in sorted.iter().enumerate() {
        let d = v - centre;
        s1[i + 1] = s1[i] + d;
        s2[i + 1] = s2[i] + d * d;
    }
    // kernel with standard deviation bw has half-width sqrt(5) bw
    let half = 5f64.sqrt() * bw;
    let lo = sorted[0] - KDE_CUT * bw;
    let hi = sorted[sorted.len() - 1] + KDE_CUT * bw;
    let step = (hi - lo) / (KDE_POINTS - 1) as f64;
    let mut best = (f64::NEG_INFINITY, lo);
    for j in 0..KDE_POINTS {
        let g = lo + j as f64 * step;
        let a = sorted.partition_point(|&v| v <= g - half);
        let b = sorted.partition_point(|&v| v < g + half);
        if a >= b {
            continue;
        }
        let gc = g - centre;
        let n = (b - a) as f64;
        let sum_sq = n * gc * gc - 2.0 * gc * (s1[b] - s1[a]) + (s2[b] - s2[a]);
        let density = n - sum_sq / (half * half);
        if density > best.0 {
            best = (density, g);
        }
    }
    Ok(best.1)
}

/// Mode/half-moment estimates of the RMA background model from the regular
/// probes only: the noise mean is the density mode of the values below the
/// overall mode, the noise SD is `√2` times the RMS deviation below it, and
/// the signal mean is the density mode of the excesses above it.
pub fn normexp_rma(reg: &[f64]) -> Result<NormexpParams> {
    if reg.len() < MIN_REGULAR {
        return Err(Error::input(format!("{} regular probes, at least {MIN_REGULAR} required", reg.len())));
    }
    if let Some(i) = reg.iter().position(|v| !v.is_finite()) {
        return Err(Error::input(format!("regular intensity {i} is not finite")));
    }
    let first = kde_mode(reg)?;
    let below: Vec<f64> = reg.iter().copied().filter(|&v| v < first).collect();
    let mu = kde_mode(&below).map_err(|_| Error::DegenerateSample("no spread below the intensity mode".into()))?;
    let low: Vec<f64> = reg.iter().filter(|&&v| v < mu).map(|&v| v - mu).collect();
    let high: Vec<f64> = reg.iter().filter(|&&v| v > mu).map(|&v| v - mu).collect();
    if low.len() < 2 || high.len() < 2 {
        return Err(Error::DegenerateSample("too few points on one side of the mode".into()));
    }
    let sigma = 2f64.sqrt() * (low.iter().map(|d| d * d).sum::<f64>() / (low.len() - 1) as f64).sqrt();
    let alpha = kde_mode(&high)?;
    if !(alpha > 0.0) {
        return Err(Error::DegenerateSample("signal mode is not above the noise mode".into()));
    }
    NormexpParams::new(mu, sigma, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{sample_gamma, sample_normal, GammaParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn simulate(p: &NormalGammaParams, n_reg: usize, n_neg: usize, seed: u64) -> ProbeArray {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = p.noise();
        let s = sample_gamma(n_reg, &p.signal(), &mut rng);
        let b = sample_normal(n_reg, &noise, &mut rng);
        let reg = s.iter().zip(&b).map(|(a, b)| a + b).collect();
        ProbeArray::new(reg, sample_normal(n_neg, &noise, &mut rng)).unwrap()
    }

    fn set1() -> NormalGammaParams {
        NormalGammaParams::new(53.0, 4.4, 0.12, 1785.0).unwrap()
    }

    #[test]
    fn coordinates_round_trip() {
        let p = set1();
        let q = from_coords(&to_coords(&p)).unwrap();
        for (a, b) in [(p.mu, q.mu), (p.sigma, q.sigma), (p.k, q.k), (p.theta, q.theta)] {
            assert!((a - b).abs() < 1e-12 * a.abs());
        }
    }

    #[test]
    fn empty_regular_set_gives_normal_loglik() {
        let arr = ProbeArray::new(vec![], vec![50.0, 53.0, 60.0]).unwrap();
        let ll = loglik_normgam(&set1(), &arr).unwrap();
        let direct: f64 = [50.0, 53.0, 60.0].iter().map(|&x| normal_log_pdf(x, &set1().noise())).sum();
        assert!((ll - direct).abs() < 1e-12);
    }

    #[test]
    fn loglik_prefers_truth_over_shifted_noise() {
        let p = set1();
        let arr = simulate(&p, 5000, 500, 11);
        let shifted = NormalGammaParams { mu: p.mu + 10.0 * p.sigma, ..p };
        assert!(loglik_normgam(&p, &arr).unwrap() > loglik_normgam(&shifted, &arr).unwrap());
    }

    #[test]
    fn exponential_loglik_degeneracy() {
        let ne = NormexpParams::new(43.5, 5.8, 226.0).unwrap();
        let p = NormalGammaParams::from(ne);
        let arr = simulate(&p, 3000, 300, 5);
        let a = loglik_normgam(&p, &arr).unwrap();
        let b = loglik_normexp(&ne, &arr);
        assert!((a - b).abs() < 1e-4 * 3300.0, "{a} {b}");
    }

    #[test]
    fn init_recovers_signal_mean() {
        let p = set1();
        let arr = simulate(&p, 25_000, 5000, 3);
        let (q, fallback) = normgam_init(&arr).unwrap();
        assert!(!fallback);
        assert!((q.k * q.theta / 214.2 - 1.0).abs() < 0.05, "{}", q.k * q.theta);
        let shifted = ProbeArray { regular: arr.regular.iter().map(|x| x + 30.0).collect(), ..arr.clone() };
        let (r, _) = normgam_init(&shifted).unwrap();
        assert_eq!(r.mu, q.mu);
        assert!(r.k * r.theta > q.k * q.theta);
    }

    #[test]
    fn init_fallbacks() {
        let mut neg = vec![50.0; 20];
        neg[0] = 40.0;
        neg[19] = 60.0;
        let reg: Vec<f64> = (0..200).map(|i| 100.0 + (i % 2) as f64).collect();
        let arr = ProbeArray::new(reg, neg.clone()).unwrap();
        let (p, fallback) = normgam_init(&arr).unwrap();
        assert!(fallback);
        assert!((p.sigma - stats::sd(&neg)).abs() < 1e-12);
        assert_eq!(p.k, 1.0);
        assert!((p.theta - (100.5 - stats::mean(&neg))).abs() < 1e-9);
    }

    #[test]
    fn mle_recovers_set1_and_is_a_fixed_point() {
        let p = set1();
        let arr = simulate(&p, 25_000, 1000, 17);
        let fit = normgam_mle(&arr).unwrap();
        let q = fit.params;
        assert!(fit.converged);
        assert!((q.mu / p.mu - 1.0).abs() < 5e-3);
        assert!((q.sigma / p.sigma - 1.0).abs() < 5e-2);
        assert!((q.k / p.k - 1.0).abs() < 0.08);
        assert!((q.theta / p.theta - 1.0).abs() < 0.15);
        let (init, _) = normgam_init(&arr).unwrap();
        assert!(fit.loglik >= loglik_normgam(&init, &arr).unwrap());
        assert!((loglik_normgam(&q, &arr).unwrap() - fit.loglik).abs() < 1e-9 * fit.loglik.abs());
    }

    #[test]
    fn mle_equivariance() {
        let p = NormalGammaParams::new(53.0, 4.4, 0.5, 300.0).unwrap();
        let arr = simulate(&p, 2000, 200, 23);
        let opts = MleOptions { optimizer: NelderMeadOptions { rel_tol: 1e-13, max_iter: 2000, restarts: 2 } };
        let base = normgam_mle_with(&arr, &opts).unwrap().params;
        let shifted = normgam_mle_with(&arr.affine(1.0, 25.0), &opts).unwrap().params;
        let scaled = normgam_mle_with(&arr.affine(3.0, 0.0), &opts).unwrap().params;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-4 * b.abs();
        assert!(close(shifted.mu, base.mu + 25.0) && close(shifted.sigma, base.sigma));
        assert!(close(shifted.k, base.k) && close(shifted.theta, base.theta));
        assert!(close(scaled.mu, 3.0 * base.mu) && close(scaled.sigma, 3.0 * base.sigma));
        assert!(close(scaled.k, base.k) && close(scaled.theta, 3.0 * base.theta));
    }

    #[test]
    fn normexp_mle_on_exponential_data() {
        let ne = NormexpParams::new(43.5, 5.8, 226.0).unwrap();
        let arr = simulate(&NormalGammaParams::from(ne), 25_000, 1000, 29);
        let fit = normexp_mle(&arr).unwrap();
        assert!(fit.converged);
        assert!((fit.params.alpha / 226.0 - 1.0).abs() < 0.03);
        let np = normexp_np(&arr).unwrap();
        assert!(fit.loglik >= loglik_normexp(&np, &arr));
        let ng = normgam_mle(&arr).unwrap().params;
        assert!((ng.k * ng.theta / 226.0 - 1.0).abs() < 0.04);
    }

    #[test]
    fn normexp_mle_noise_free_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = sample_gamma(20_000, &GammaParams::new(1.0, 50.0).unwrap(), &mut rng);
        let noise = NormalParams::new(10.0, 1e-3).unwrap();
        let b = sample_normal(20_000, &noise, &mut rng);
        let reg: Vec<f64> = s.iter().zip(&b).map(|(a, b)| a + b).collect();
        let arr = ProbeArray::new(reg.clone(), sample_normal(100, &noise, &mut rng)).unwrap();
        let fit = normexp_mle(&arr).unwrap();
        let target = stats::mean(&reg) - 10.0;
        assert!((fit.params.alpha - target).abs() < 0.01 * target);
    }

    #[test]
    fn np_by_hand() {
        let mut reg = vec![150.0; 50];
        reg.extend(vec![250.0; 50]);
        let mut neg = vec![40.0; 5];
        neg.extend(vec![60.0; 5]);
        let p = normexp_np(&ProbeArray::new(reg, neg.clone()).unwrap()).unwrap();
        assert_eq!(p.mu, 50.0);
        assert_eq!(p.sigma, stats::sd(&neg));
        assert_eq!(p.alpha, 150.0);
        let flat = ProbeArray::new(vec![50.0; 100], neg).unwrap();
        assert_eq!(normexp_np(&flat), Err(Error::SignalBelowNoise));
    }

    #[test]
    fn kde_mode_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = sample_gamma(500, &GammaParams::new(3.0, 2.0).unwrap(), &mut rng);
        let bw = bandwidth_nrd0(&x);
        let half = 5f64.sqrt() * bw;
        let (lo, hi) = (
            x.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * bw,
            x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bw,
        );
        let step = (hi - lo) / (KDE_POINTS - 1) as f64;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for j in 0..KDE_POINTS {
            let g = lo + j as f64 * step;
            let d: f64 = x.iter().map(|&v| ((g - v) / half).powi(2)).filter(|&u| u < 1.0).map(|u| 1.0 - u).sum();
            if d > best.0 {
                best = (d, g);
            }
        }
        assert!((kde_mode(&x).unwrap() - best.1).abs() <= step);
    }

    #[test]
    fn rma_on_symmetric_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = sample_normal(20_000, &NormalParams::new(100.0, 5.0).unwrap(), &mut rng);
        let p = normexp_rma(&x).unwrap();
        assert!((p.mu - 100.0).abs() < 2.5, "{p:?}");
        // √2 times the RMS below the mode inflates the noise SD
        assert!(p.sigma > 5.0 && p.sigma < 1.5 * 5.0, "{p:?}");
        assert!(p.alpha > 0.0 && p.alpha < 5.0, "{p:?}");
    }

    #[test]
    fn rma_underestimates_heavy_signal() {
        let arr = simulate(&set1(), 25_000, 10, 31);
        let p = normexp_rma(&arr.regular).unwrap();
        let rough = stats::mean(&arr.regular) - p.mu;
        assert!(p.alpha < 0.5 * rough, "{p:?} vs {rough}");
        assert!(normexp_rma(&[7.0; 200]).is_err());
    }
}
