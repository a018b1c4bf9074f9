//! Normal, gamma and noise-mixture distributions: densities, distribution
//! functions, the gamma quantile, seeded samplers and the robust normal fit
//! used on negative control probes.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use libm::{erfc, lgamma as ln_gamma};

use crate::error::{Error, Result};
use crate::stats;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this standardized value `log Φ` and the Mills ratio switch to
/// their asymptotic expansions.
pub const ASYMPTOTIC_Z: f64 = -30.0;

/// Consistency constant of the median absolute deviation under normality.
pub const MAD_CONSISTENCY: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalParams {
    pub mu: f64,
    pub sigma: f64,
}

impl NormalParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::param(format!("normal mean must be finite, got {mu}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param(format!("normal sd must be positive, got {sigma}")));
        }
        Ok(Self { mu, sigma })
    }
}

/// Gamma distribution with shape `k` and scale `theta`; `k = 1` is the
/// exponential distribution with mean `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl GammaParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::param(format!("gamma shape must be positive, got {shape}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::param(format!("gamma scale must be positive, got {scale}")));
        }
        Ok(Self { shape, scale })
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }
}

/// Background noise drawn from `(1 - p) N(mu, sigma) + p chi2(df, ncp)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureNoiseSpec {
    pub p: f64,
    pub normal: NormalParams,
    pub chisq_df: u32,
    pub chisq_ncp: f64,
}

impl MixtureNoiseSpec {
    pub fn new(p: f64, normal: NormalParams) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param(format!("mixture weight must lie in [0, 1], got {p}")));
        }
        Ok(Self { p, normal, chisq_df: 3, chisq_ncp: 55.0 })
    }

    pub fn mean(&self) -> f64 {
        (1.0 - self.p) * self.normal.mu + self.p * (self.chisq_df as f64 + self.chisq_ncp)
    }
}

// ---------------------------------------------------------------------------
// standard normal

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

pub fn std_normal_log_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `1 - 1/z^2 + 3/z^4 - ...`, the asymptotic factor with
/// `Φ(z) ≈ φ(z)/(-z) · series(z)` for large negative `z`.
fn mills_series(z: f64) -> f64 {
    alternating_double_factorial_series(1.0 / (z * z), 1)
}

/// `Σ_{n≥0} (-1)^n (2n + first - 2)!! w^n` truncated after ten terms, with
/// `first = 1` giving `1 - w + 3w^2 - ...` and `first = 3` giving
/// `1 - 3w + 15w^2 - ...`.
fn alternating_double_factorial_series(w: f64, first: u32) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut odd = first as f64;
    for _ in 0..10 {
        term *= -odd * w;
        sum += term;
        odd += 2.0;
    }
    sum
}

/// `log Φ(z)` without underflow in the far left tail.
pub fn std_normal_log_cdf(z: f64) -> f64 {
    if z < ASYMPTOTIC_Z {
        std_normal_log_pdf(z) - (-z).ln() + mills_series(z).ln()
    } else if z <= 5.0 {
        std_normal_cdf(z).ln()
    } else {
        (-0.5 * erfc(z / std::f64::consts::SQRT_2)).ln_1p()
    }
}

/// `z + φ(z)/Φ(z)`, evaluated without cancellation for very negative `z`.
pub fn truncated_mean_offset(z: f64) -> f64 {
    if z < ASYMPTOTIC_Z {
        // z (S - 1)/S with S the Mills series; z(S - 1) = -1/z + 3/z^3 - ...
        let z_s_minus_1 = -(1.0 / z) * alternating_double_factorial_series(1.0 / (z * z), 3);
        z_s_minus_1 / mills_series(z)
    } else {
        z + (std_normal_log_pdf(z) - std_normal_log_cdf(z)).exp()
    }
}

// ---------------------------------------------------------------------------
// normal

pub fn normal_pdf(x: f64, p: &NormalParams) -> f64 {
    std_normal_pdf((x - p.mu) / p.sigma) / p.sigma
}

pub fn normal_log_pdf(x: f64, p: &NormalParams) -> f64 {
    std_normal_log_pdf((x - p.mu) / p.sigma) - p.sigma.ln()
}

pub fn normal_cdf(x: f64, p: &NormalParams) -> f64 {
    std_normal_cdf((x - p.mu) / p.sigma)
}

// ---------------------------------------------------------------------------
// gamma

/// Log density; `-inf` outside the support.
pub fn gamma_log_pdf(x: f64, g: &GammaParams) -> f64 {
    if x < 0.0 {
        return f64::NEG_INFINITY;
    }
    if x == 0.0 {
        return match g.shape.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => -g.scale.ln(),
            _ => f64::NEG_INFINITY,
        };
    }
    (g.shape - 1.0) * x.ln() - x / g.scale - g.shape * g.scale.ln() - ln_gamma(g.shape)
}

/// Gamma density. Zero for `x < 0`; `+inf` at `x = 0` when the shape is
/// below one.
pub fn gamma_pdf(x: f64, g: &GammaParams) -> f64 {
    if g.shape == 1.0 {
        // exact exponential branch
        return if x < 0.0 { 0.0 } else { (-x / g.scale).exp() / g.scale };
    }
    gamma_log_pdf(x, g).exp()
}

const INCGAMMA_EPS: f64 = 1e-16;
const INCGAMMA_MAX_ITER: usize = 10_000;

/// Regularized incomplete gamma pair `(P(a, x), Q(a, x))`: power series
/// below `x = a + 1`, Lentz continued fraction above.
pub fn regularized_gamma(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..INCGAMMA_MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * INCGAMMA_EPS {
                break;
            }
        }
        let p = (sum.ln() + log_prefix).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..INCGAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < INCGAMMA_EPS {
                break;
            }
        }
        let q = (h.ln() + log_prefix).exp().min(1.0);
        (1.0 - q, q)
    }
}

pub fn gamma_cdf(x: f64, g: &GammaParams) -> f64 {
    regularized_gamma(g.shape, x / g.scale).0
}

pub fn gamma_sf(x: f64, g: &GammaParams) -> f64 {
    regularized_gamma(g.shape, x / g.scale).1
}

/// Gamma quantile by safeguarded Newton iteration in `log x`, targeting
/// the lower tail for `q <= 0.5` and the upper tail otherwise.
pub fn gamma_quantile(q: f64, g: &GammaParams) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param(format!("quantile level must lie in (0, 1), got {q}")));
    }
    let a = g.shape;
    let upper = q > 0.5;
    let target = if upper { 1.0 - q } else { q };
    // residual r(u) increasing in u = ln(x/scale)
    let residual = |u: f64| {
        let (p, qq) = regularized_gamma(a, u.exp());
        if upper {
            target - qq
        } else {
            p - target
        }
    };

    let mut lo = -1.0;
    let mut hi = 1.0;
    let mut iter = 0;
    while residual(lo) > 0.0 {
        lo = 2.0 * lo - 1.0;
        iter += 1;
        if lo < -750.0 || iter > 200 {
            return Ok(0.0);
        }
    }
    while residual(hi) < 0.0 {
        hi = 2.0 * hi + 1.0;
        iter += 1;
        if hi > 700.0 || iter > 200 {
            return Err(Error::NoConvergence { what: "gamma quantile bracket", iterations: iter });
        }
    }

    let mut u = 0.5 * (lo + hi);
    for i in 0..200 {
        let r = residual(u);
        if r == 0.0 {
            return Ok(u.exp() * g.scale);
        }
        if r < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        // dP/du = x f(x) with unit scale
        let x = u.exp();
        let deriv = (a * x.ln() - x - ln_gamma(a)).exp();
        let mut next = u - r / deriv;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 1e-15 * (1.0 + u.abs()) || hi - lo <= 1e-15 * (1.0 + u.abs()) {
            return Ok(next.exp() * g.scale);
        }
        u = next;
        if i == 199 {
            break;
        }
    }
    Err(Error::NoConvergence { what: "gamma quantile", iterations: 200 })
}

// ---------------------------------------------------------------------------
// samplers

pub fn sample_normal<R: Rng + ?Sized>(n: usize, p: &NormalParams, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            p.mu + p.sigma * z
        })
        .collect()
}

pub fn sample_gamma<R: Rng + ?Sized>(n: usize, g: &GammaParams, rng: &mut R) -> Vec<f64> {
    let dist = Gamma::new(g.shape, g.scale).expect("validated gamma parameters");
    (0..n).map(|_| dist.sample(rng)).collect()
}

/// Noncentral chi-square as `chi2(df - 1) + (Z + sqrt(ncp))^2`.
pub fn sample_noncentral_chisq<R: Rng + ?Sized>(n: usize, df: u32, ncp: f64, rng: &mut R) -> Vec<f64> {
    assert!(df >= 1, "noncentral chi-square needs df >= 1");
    let central = (df > 1).then(|| ChiSquared::new((df - 1) as f64).expect("df - 1 > 0"));
    let shift = ncp.sqrt();
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            let base = central.as_ref().map_or(0.0, |c| c.sample(rng));
            base + (z + shift) * (z + shift)
        })
        .collect()
}

/// Draws from the normal / noncentral chi-square mixture. Each draw picks
/// its component with one uniform, then samples that component.
pub fn sample_mixture_noise<R: Rng + ?Sized>(n: usize, spec: &MixtureNoiseSpec, rng: &mut R) -> Vec<f64> {
    let central = (spec.chisq_df > 1).then(|| ChiSquared::new((spec.chisq_df - 1) as f64).expect("df - 1 > 0"));
    let shift = spec.chisq_ncp.sqrt();
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let z: f64 = StandardNormal.sample(rng);
            if u < spec.p {
                let base = central.as_ref().map_or(0.0, |c| c.sample(rng));
                base + (z + shift) * (z + shift)
            } else {
                spec.normal.mu + spec.normal.sigma * z
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// robust fit

/// Median and scaled median absolute deviation of the negative controls.
pub fn robust_normal_fit(neg: &[f64]) -> Result<NormalParams> {
    if neg.len() < 2 {
        return Err(Error::DegenerateSample(format!("need at least 2 values, got {}", neg.len())));
    }
    let mu = stats::median(neg);
    let dev: Vec<f64> = neg.iter().map(|x| (x - mu).abs()).collect();
    let mad = stats::median(&dev);
    if !(mad > 0.0) {
        return Err(Error::DegenerateSample("zero median absolute deviation".into()));
    }
    NormalParams::new(mu, mad / MAD_CONSISTENCY)
}
