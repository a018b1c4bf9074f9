use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::NormalGammaParams;
use crate::distributions::{gamma_quantile, normal_log_pdf, std_normal_log_cdf, NormalParams};
use crate::error::{Error, Result};

const UPPER_QUANTILE: f64 = 0.99999;
const MIN_FFT_LEN: usize = 1 << 12;
const MAX_FFT_LEN: usize = 1 << 22;
/// Left reach of the grid below the noise mean, in noise SDs.
const LEFT_REACH: f64 = 12.0;
/// Nodes further left than this many SDs below the mean come from the tilted
/// transform on fine grids.
const TILT_SWITCH: f64 = 4.0;
/// Tilt rate times sigma; moves the peak of the tilted density to `mu - 8 sigma`.
const TILT: f64 = 8.0;
/// Frequencies beyond `FREQ_REACH / sigma` carry a Gaussian factor below `e^-45`.
const FREQ_REACH: f64 = 9.5;
const IMAG_TOL: f64 = 1e-8;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Node spacing of a density grid, as a fraction of the noise SD.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridResolution {
    /// `sigma / 16`, with a tilted second transform for the left flank.
    Fine,
    /// `sigma / 8`, one transform; used inside likelihood maximisation.
    Likelihood,
}

impl GridResolution {
    fn nodes_per_sigma(self) -> f64 {
        match self {
            GridResolution::Fine => 16.0,
            GridResolution::Likelihood => 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// First node.
    pub lower: f64,
    /// `mu + 5 sigma + q` with `q` the 0.99999 gamma quantile.
    pub target_upper: f64,
    /// Last node; `>= target_upper`. Right-tail formula applies beyond it.
    pub upper: f64,
    pub spacing: f64,
    /// FFT length.
    pub n_points: usize,
    /// Frequency cutoff `pi / spacing`.
    pub freq_cutoff: f64,
    pub resolution: GridResolution,
}

impl GridSpec {
    pub fn upper_tail_switch(&self) -> f64 {
        self.upper
    }

    pub fn lower_tail_switch(&self) -> f64 {
        self.lower
    }

    pub fn n_nodes(&self) -> usize {
        ((self.upper - self.lower) / self.spacing).round() as usize + 1
    }

    pub fn plan(p: &NormalGammaParams, resolution: GridResolution) -> Result<Self> {
        let s = p.sigma;
        let q = gamma_quantile(UPPER_QUANTILE, &p.signal())?;
        let spacing = s / resolution.nodes_per_sigma();
        // nodes sit at mu + j * spacing so that fits are location equivariant
        let below = (LEFT_REACH * s).max(p.mu);
        let lower = p.mu - (below / spacing).ceil() * spacing;
        let target_upper = p.mu + 5.0 * s + q;
        let reach = p.mu + (s * s / p.theta).min(200.0 * s) + 8.0 * s;
        let span = target_upper.max(reach) - lower;
        let intervals = (span / spacing).ceil();
        let needed = (intervals * 1.25).max(intervals + 10.0 * resolution.nodes_per_sigma());
        if !needed.is_finite() || needed > MAX_FFT_LEN as f64 {
            return Err(Error::GridResolution(format!(
                "{needed:.3e} points needed for spacing {spacing:.3e} over [{lower:.4}, {:.4}]",
                lower + span
            )));
        }
        let n_points = (needed as usize).next_power_of_two().max(MIN_FFT_LEN);
        Ok(Self {
            lower,
            target_upper,
            upper: lower + intervals * spacing,
            spacing,
            n_points,
            freq_cutoff: PI / spacing,
            resolution,
        })
    }
}

/// Tabulated normal-gamma density on `lower + j * spacing`.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub spec: GridSpec,
    pub params: NormalGammaParams,
    values: Vec<f64>,
    log_values: Vec<f64>,
}

impl DensityGrid {
    pub fn node(&self, j: usize) -> f64 {
        self.spec.lower + j as f64 * self.spec.spacing
    }

    pub fn abscissae(&self) -> Vec<f64> {
        (0..self.values.len()).map(|j| self.node(j)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Trapezoid integral over the grid nodes.
    pub fn trapezoid_mass(&self) -> f64 {
        let v = &self.values;
        let inner: f64 = v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]);
        inner * self.spec.spacing
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    /// Log density: six-point Lagrange interpolation of the log values inside
    /// the grid, analytic tails outside.
    pub fn log_pdf(&self, x: f64) -> f64 {
        let spec = &self.spec;
        if x.is_nan() {
            return f64::NAN;
        }
        if x < spec.lower {
            return left_tail_log_density(x, &self.params);
        }
        if x > spec.upper {
            return right_tail_log_density(x, &self.params);
        }
        let n = self.log_values.len();
        let u = (x - spec.lower) / spec.spacing;
        let j = (u.floor() as usize).min(n - 2);
        let start = j.saturating_sub(2).min(n.saturating_sub(6));
        let stencil = &self.log_values[start..(start + 6).min(n)];
        let frac = u - j as f64;
        if stencil.len() < 6 {
            let (a, b) = (self.log_values[j], self.log_values[j + 1]);
            return a + frac * (b - a);
        }
        lagrange6(stencil, u - start as f64)
    }
}

/// Six-point Lagrange interpolation at offset `t` from the first node.
fn lagrange6(y: &[f64], t: f64) -> f64 {
    const DENOM: [f64; 6] = [-120.0, 24.0, -12.0, 12.0, -24.0, 120.0];
    let d: [f64; 6] = std::array::from_fn(|i| t - i as f64);
    if let Some(i) = d.iter().position(|&v| v == 0.0) {
        return y[i];
    }
    let full: f64 = d.iter().product();
    (0..6).map(|i| y[i] * full / (d[i] * DENOM[i])).sum()
}

/// Characteristic function `(1 - itθ)^-k e^{iμt} e^{-σ²t²/2}`.
pub fn normgam_charfn(t: f64, p: &NormalGammaParams) -> Complex64 {
    tilted_charfn(t, p, 0.0, 0.0)
}

/// Fourier transform of `f(x) e^{-c (x - μ)}` times `e^{-i t shift}`.
fn tilted_charfn(t: f64, p: &NormalGammaParams, c: f64, shift: f64) -> Complex64 {
    let (s2, th) = (p.sigma * p.sigma, p.theta);
    let a = 1.0 + c * th;
    let b = -t * th;
    let re = 0.5 * s2 * (c * c - t * t) - 0.5 * p.k * (a * a + b * b).ln();
    let im = t * (p.mu - shift) - s2 * c * t - p.k * b.atan2(a);
    Complex64::from_polar(re.exp(), im)
}

/// Log of the right-tail expansion
/// `C e^{-(x-μ)/θ + σ²/2θ²} E[(y + σZ)_+^{k-1}]`, `y = x - μ - σ²/θ`.
/// Falls back to a moment-matched normal when `y` is within six noise SDs.
pub fn right_tail_log_density(x: f64, p: &NormalGammaParams) -> f64 {
    RightTail::new(p).log_density(x)
}

struct RightTail {
    p: NormalGammaParams,
    log_const: f64,
}

impl RightTail {
    fn new(p: &NormalGammaParams) -> Self {
        let (s, th, k) = (p.sigma, p.theta, p.k);
        let log_const = -libm::lgamma(k) - k * th.ln() + s * s / (2.0 * th * th);
        Self { p: *p, log_const }
    }

    fn log_density(&self, x: f64) -> f64 {
        let p = &self.p;
        let (s, th, k) = (p.sigma, p.theta, p.k);
        let y = x - p.mu - s * s / th;
        if y < 6.0 * s {
            let var = s * s + k * th * th;
            return normal_log_pdf(x, &NormalParams { mu: p.mu + k * th, sigma: var.sqrt() });
        }
        let r = (s / y).powi(2);
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 1..20 {
            let nf = n as f64;
            let next = term * (k - 2.0 * nf + 1.0) * (k - 2.0 * nf) / (2.0 * nf) * r;
            if next == 0.0 || next.abs() >= term.abs() {
                break;
            }
            sum += next;
            term = next;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        let lower_cut = if y > 40.0 * s { 0.0 } else { std_normal_log_cdf(y / s) };
        self.log_const - (x - p.mu) / th + (k - 1.0) * y.ln() + sum.max(1e-300).ln() + lower_cut
    }
}

/// Log of the left-tail expansion `φ_σ(x - μ) (1 + λθ)^-k E'[e^{-S²/2σ²}]`,
/// `λ = (μ - x)/σ²`, with `S` gamma under the tilted scale `θ/(1 + λθ)`.
/// Not floored, so that ratios of tail densities stay meaningful.
pub fn left_tail_log_density(x: f64, p: &NormalGammaParams) -> f64 {
    let (s, th, k) = (p.sigma, p.theta, p.k);
    let c = (p.mu - x).max(0.0);
    let lambda = c / (s * s);
    let tilted = th / (1.0 + lambda * th);
    let r = (tilted / s).powi(2);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..20 {
        let nf = n as f64;
        let next = -term * (k + 2.0 * nf - 2.0) * (k + 2.0 * nf - 1.0) / (2.0 * nf) * r;
        if next.abs() >= term.abs() {
            break;
        }
        sum += next;
        term = next;
        if term.abs() < 1e-17 * sum {
            break;
        }
    }
    normal_log_pdf(x, &p.noise()) - k * (lambda * th).ln_1p() + sum.max(1e-300).ln()
}

/// Fine-resolution density grid.
pub fn build_density_grid(p: &NormalGammaParams) -> Result<DensityGrid> {
    build_density_grid_with(p, GridResolution::Fine)
}

pub fn build_density_grid_with(p: &NormalGammaParams, resolution: GridResolution) -> Result<DensityGrid> {
    let spec = GridSpec::plan(p, resolution)?;
    let n_nodes = spec.n_nodes();
    let (mut values, floor) = transform(p, &spec, 0.0, n_nodes)?;

    subtract_right_images(&mut values, &spec, p);

    let left_switch = p.mu - TILT_SWITCH * p.sigma;
    let far_left = p.mu - LEFT_REACH * p.sigma;
    let n_left = (((left_switch - spec.lower) / spec.spacing).floor() + 1.0).clamp(0.0, n_nodes as f64) as usize;
    let tilted = if resolution == GridResolution::Fine && n_left > 0 {
        let c = TILT / p.sigma;
        let (g, g_floor) = transform(p, &spec, c, n_left)?;
        Some((c, g, g_floor))
    } else {
        None
    };

    let trust = 1e4 * floor;
    let mut log_values = Vec::with_capacity(n_nodes);
    for j in 0..n_nodes {
        let x = spec.lower + j as f64 * spec.spacing;
        let direct = values[j];
        let lv = if x < far_left {
            left_tail_log_density(x, p)
        } else if j < n_left {
            match &tilted {
                Some((c, g, g_floor)) if g[j] > 1e4 * g_floor => g[j].ln() + c * (x - p.mu),
                Some(_) => left_tail_log_density(x, p),
                None if direct > trust => direct.ln(),
                None => left_tail_log_density(x, p),
            }
        } else if direct > trust {
            log_values.push(direct.ln());
            continue;
        } else if x < p.mu {
            left_tail_log_density(x, p)
        } else {
            right_tail_log_density(x, p)
        };
        values[j] = lv.exp();
        log_values.push(lv);
    }

    Ok(DensityGrid { spec, params: *p, values, log_values })
}

/// Removes the periodic images `f(x + mL)`, `m >= 1`, of the right tail from
/// an untilted inversion. The log of the image sum is smooth, so it is
/// evaluated on every `STRIDE`-th node and interpolated in between.
fn subtract_right_images(values: &mut [f64], spec: &GridSpec, p: &NormalGammaParams) {
    const STRIDE: usize = 16;
    let period = spec.n_points as f64 * spec.spacing;
    let tail = RightTail::new(p);
    let log_images = |j: usize, scale: f64| -> f64 {
        let x = spec.lower + j as f64 * spec.spacing;
        let mut sum = 0.0;
        for m in 1..=8 {
            let img = tail.log_density(x + m as f64 * period).exp();
            sum += img;
            if img <= 1e-17 * scale {
                break;
            }
        }
        sum.ln()
    };
    let n = values.len();
    let mut j0 = 0;
    let mut l0 = log_images(0, values[0].abs());
    while j0 < n - 1 && l0 > -690.0 {
        let j1 = (j0 + STRIDE).min(n - 1);
        let l1 = log_images(j1, values[j1].abs());
        let width = (j1 - j0) as f64;
        for (i, v) in values[j0..j1].iter_mut().enumerate() {
            *v -= (l0 + (l1 - l0) * i as f64 / width).exp();
        }
        if j1 == n - 1 {
            values[j1] -= l1.exp();
        }
        j0 = j1;
        l0 = l1;
    }
}

/// Inverts the tilted transform on the first `n_nodes` grid nodes. Returns
/// the real parts and an estimate of the absolute rounding floor.
fn transform(p: &NormalGammaParams, spec: &GridSpec, c: f64, n_nodes: usize) -> Result<(Vec<f64>, f64)> {
    let n = spec.n_points;
    let a = spec.freq_cutoff;
    let dt = 2.0 * a / n as f64;
    let half = n / 2;
    let reach = ((FREQ_REACH / p.sigma) / dt).ceil() as usize;
    let first = half.saturating_sub(reach).max(1);

    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut abs_sum = 0.0;
    for m in first..=half {
        let t = -a + m as f64 * dt;
        let v = tilted_charfn(t, p, c, spec.lower);
        buf[m] = v;
        if m != half {
            buf[n - m] = v.conj();
            abs_sum += 2.0 * v.norm();
        } else {
            abs_sum += v.norm();
        }
    }

    let fft = PLANNER.with(|pl| pl.borrow_mut().plan_fft_forward(n));
    fft.process(&mut buf);

    let scale = dt / (2.0 * PI);
    let mut max_re: f64 = 0.0;
    let mut max_im: f64 = 0.0;
    let mut out = Vec::with_capacity(n_nodes);
    for (j, z) in buf.iter().take(n_nodes).enumerate() {
        let sign = if j % 2 == 0 { scale } else { -scale };
        let (re, im) = (z.re * sign, z.im * sign);
        max_re = max_re.max(re);
        max_im = max_im.max(im.abs());
        out.push(re);
    }
    if max_im > IMAG_TOL * max_re.max(1.0) {
        return Err(Error::GridResolution(format!(
            "imaginary residue {max_im:.3e} exceeds tolerance (peak {max_re:.3e})"
        )));
    }
    let floor = f64::EPSILON * (n as f64).log2() * abs_sum * scale;
    Ok((out, floor))
}

/// Normal-gamma density from a grid built for the same parameters.
pub fn normgam_pdf(x: f64, grid: &DensityGrid) -> f64 {
    grid.pdf(x)
}
