//! Simulated arrays: gamma signal plus normal, mixture or resampled noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::convolution::NormalGammaParams;
use crate::distributions::{sample_gamma, sample_mixture_noise, sample_normal, MixtureNoiseSpec};
use crate::error::{Error, Result};
use crate::estimation::ProbeArray;
use crate::evaluation::quantile_normalize;

/// A row of the reference parameter table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterSet {
    pub id: u8,
    pub params: NormalGammaParams,
    pub note: &'static str,
}

const TABLE: [(f64, f64, f64, f64, &str); 9] = [
    (53.0, 4.4, 0.12, 1785.0, "E1, normal-gamma MLE"),
    (138.0, 24.0, 0.11, 4949.0, "E2, normal-gamma MLE"),
    (43.5, 5.8, 1.0, 226.0, "E1, normexp MLE"),
    (170.0, 41.0, 1.0, 505.0, "E2, normexp MLE"),
    (52.8, 5.0, 1.0, 8.33, "E1, normexp RMA"),
    (223.0, 37.0, 1.0, 33.8, "E2, normexp RMA"),
    (93.0, 11.0, 0.08, 3230.0, "E3, normal-gamma MLE"),
    (69.0, 13.0, 1.0, 277.0, "E3, normexp MLE"),
    (92.0, 14.0, 1.0, 10.5, "E3, normexp RMA"),
];

pub fn parameter_set(id: u8) -> Result<ParameterSet> {
    let i = (id as usize).checked_sub(1).filter(|&i| i < TABLE.len());
    let (mu, sigma, k, theta, note) = TABLE[i.ok_or_else(|| Error::param(format!("parameter set {id} not in 1..=9")))?];
    Ok(ParameterSet { id, params: NormalGammaParams { mu, sigma, k, theta }, note })
}

pub fn parameter_sets() -> Vec<ParameterSet> {
    (1..=9).map(|i| parameter_set(i).expect("table index")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// Independent gamma signal and normal noise on every array.
    S1,
    /// As S1 with noise from `(1 - p) N(μ, σ) + p χ²(3, 55)`.
    S2 { p: f64 },
    /// One signal vector shared by all arrays, normal noise.
    S3,
    /// One shared signal vector, noise resampled from an empirical pool.
    S4 { pool: Vec<f64> },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::S1 => "s1",
            Scenario::S2 { .. } => "s2",
            Scenario::S3 => "s3",
            Scenario::S4 { .. } => "s4",
        }
    }

    pub fn shares_signal(&self) -> bool {
        matches!(self, Scenario::S3 | Scenario::S4 { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub scenario: Scenario,
    pub params: NormalGammaParams,
    pub set_id: Option<u8>,
    pub n_reg: usize,
    pub n_neg: usize,
    pub n_arrays: usize,
    pub seed: u64,
}

impl SimulationSpec {
    /// Defaults: 25000 regular and 1000 negative probes, 100 arrays.
    pub fn new(scenario: Scenario, set_id: u8, seed: u64) -> Result<Self> {
        Ok(Self {
            scenario,
            params: parameter_set(set_id)?.params,
            set_id: Some(set_id),
            n_reg: 25_000,
            n_neg: 1000,
            n_arrays: 100,
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        NormalGammaParams::new(self.params.mu, self.params.sigma, self.params.k, self.params.theta)?;
        if self.n_reg == 0 || self.n_arrays == 0 {
            return Err(Error::param("simulation needs at least one array and one regular probe"));
        }
        match &self.scenario {
            Scenario::S2 { p } if !(0.0..=1.0).contains(p) => {
                Err(Error::param(format!("mixture weight must lie in [0, 1], got {p}")))
            }
            Scenario::S4 { pool } if pool.is_empty() => Err(Error::param("S4 needs a nonempty noise pool")),
            Scenario::S4 { pool } if pool.iter().any(|v| !v.is_finite()) => Err(Error::param("noise pool has non-finite values")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrueSignals {
    Shared(Vec<f64>),
    PerArray(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedBatch {
    pub arrays: Vec<ProbeArray>,
    pub signals: TrueSignals,
    pub spec: SimulationSpec,
}

impl SimulatedBatch {
    /// True signal of array `i` (0-based).
    pub fn signal(&self, i: usize) -> &[f64] {
        match &self.signals {
            TrueSignals::Shared(s) => s,
            TrueSignals::PerArray(v) => &v[i],
        }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn resample<R: Rng>(n: usize, pool: &[f64], rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| pool[rng.gen_range(0..pool.len())]).collect()
}

/// Generates the batch. Replicate `ℓ` (1-based) draws from its own ChaCha
/// stream `ℓ` of `seed`; a shared signal comes from stream 0, so output is
/// identical regardless of thread count.
pub fn simulate(spec: &SimulationSpec) -> Result<SimulatedBatch> {
    spec.validate()?;
    let p = spec.params;
    let gamma = p.signal();
    let noise = p.noise();
    let shared = spec.scenario.shares_signal().then(|| sample_gamma(spec.n_reg, &gamma, &mut stream(spec.seed, 0)));

    let replicate = |l: usize| -> (ProbeArray, Option<Vec<f64>>) {
        let mut rng = stream(spec.seed, l as u64);
        let own = shared.is_none().then(|| sample_gamma(spec.n_reg, &gamma, &mut rng));
        let signal = own.as_deref().or(shared.as_deref()).expect("signal drawn");
        let (b, neg) = match &spec.scenario {
            Scenario::S2 { p: w } if *w > 0.0 => {
                let mix = MixtureNoiseSpec::new(*w, noise).expect("validated weight");
                (sample_mixture_noise(spec.n_reg, &mix, &mut rng), sample_mixture_noise(spec.n_neg, &mix, &mut rng))
            }
            Scenario::S4 { pool } => (resample(spec.n_reg, pool, &mut rng), resample(spec.n_neg, pool, &mut rng)),
            _ => (sample_normal(spec.n_reg, &noise, &mut rng), sample_normal(spec.n_neg, &noise, &mut rng)),
        };
        let regular = signal.iter().zip(&b).map(|(s, b)| s + b).collect();
        (ProbeArray { regular, negative: neg, detection_pvalues: None }, own)
    };

    let out: Vec<_> = (1..=spec.n_arrays).into_par_iter().map(replicate).collect();
    let mut arrays = Vec::with_capacity(out.len());
    let mut own = Vec::with_capacity(out.len());
    for (a, s) in out {
        arrays.push(a);
        own.extend(s);
    }
    let signals = match shared {
        Some(s) => TrueSignals::Shared(s),
        None => TrueSignals::PerArray(own),
    };
    Ok(SimulatedBatch { arrays, signals, spec: spec.clone() })
}

/// Resamples sorted values to `m` points by linear interpolation of the
/// empirical quantile function.
fn resize_sorted(sorted: &[f64], m: usize) -> Vec<f64> {
    let n = sorted.len();
    if n == m {
        return sorted.to_vec();
    }
    if m == 1 {
        return vec![sorted[n / 2]];
    }
    (0..m)
        .map(|i| {
            let pos = i as f64 * (n - 1) as f64 / (m - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        })
        .collect()
}

/// Quantile-normalises the negative probes of all arrays and concatenates
/// them. Arrays whose negative count differs from the most common count are
/// first interpolated to that count.
pub fn build_empirical_pool(arrays: &[ProbeArray]) -> Result<Vec<f64>> {
    if arrays.is_empty() || arrays.iter().all(|a| a.negative.is_empty()) {
        return Err(Error::input("no negative probes to pool"));
    }
    let mut counts = std::collections::BTreeMap::new();
    for a in arrays.iter().filter(|a| !a.negative.is_empty()) {
        *counts.entry(a.negative.len()).or_insert(0usize) += 1;
    }
    let modal = counts.iter().max_by_key(|(len, c)| (**c, std::cmp::Reverse(**len))).map(|(l, _)| *l).expect("nonempty");
    let columns: Vec<Vec<f64>> = arrays
        .iter()
        .filter(|a| !a.negative.is_empty())
        .map(|a| {
            if a.negative.len() == modal {
                a.negative.clone()
            } else {
                resize_sorted(&crate::stats::sorted(&a.negative), modal)
            }
        })
        .collect();
    Ok(quantile_normalize(&columns)?.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    fn small(scenario: Scenario, set: u8, n_arrays: usize, seed: u64) -> SimulationSpec {
        SimulationSpec { n_reg: 2000, n_neg: 200, n_arrays, ..SimulationSpec::new(scenario, set, seed).unwrap() }
    }

    #[test]
    fn table_values() {
        let s1 = parameter_set(1).unwrap().params;
        assert_eq!((s1.mu, s1.sigma, s1.k, s1.theta), (53.0, 4.4, 0.12, 1785.0));
        let s9 = parameter_set(9).unwrap().params;
        assert_eq!((s9.mu, s9.sigma, s9.k, s9.theta), (92.0, 14.0, 1.0, 10.5));
        assert!(parameter_set(0).is_err() && parameter_set(10).is_err());
        assert_eq!(parameter_sets().len(), 9);
    }

    #[test]
    fn s1_regular_mean() {
        let spec = SimulationSpec { n_arrays: 1, ..SimulationSpec::new(Scenario::S1, 1, 1).unwrap() };
        let b = simulate(&spec).unwrap();
        let m = stats::mean(&b.arrays[0].regular);
        // sd of X is sqrt(σ² + kθ²) ≈ 618; 4 standard errors
        let se = (4.4f64.powi(2) + 0.12 * 1785f64.powi(2)).sqrt() / (25_000f64).sqrt();
        assert!((m - 267.2).abs() < 4.0 * se, "{m}");
        assert_eq!(b.arrays[0].regular.len(), 25_000);
        assert_eq!(b.arrays[0].negative.len(), 1000);
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let spec = small(Scenario::S1, 1, 4, 7);
        let a = simulate(&spec).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| simulate(&spec).unwrap());
        assert_eq!(a, b);
        assert_ne!(a.arrays[0], a.arrays[1]);
    }

    #[test]
    fn s2_without_mixture_is_s1() {
        let a = simulate(&small(Scenario::S1, 1, 2, 3)).unwrap();
        let b = simulate(&small(Scenario::S2 { p: 0.0 }, 1, 2, 3)).unwrap();
        assert_eq!(a.arrays, b.arrays);
        assert!(simulate(&small(Scenario::S2 { p: 1.25 }, 1, 2, 3)).is_err());
    }

    #[test]
    fn s2_noise_mean() {
        let spec = SimulationSpec { n_reg: 200, n_neg: 50_000, n_arrays: 1, ..SimulationSpec::new(Scenario::S2 { p: 0.25 }, 1, 9).unwrap() };
        let b = simulate(&spec).unwrap();
        let m = stats::mean(&b.arrays[0].negative);
        let expect = 0.75 * 53.0 + 0.25 * 58.0;
        let sd = stats::sd(&b.arrays[0].negative);
        assert!((m - expect).abs() < 4.0 * sd / (50_000f64).sqrt(), "{m}");
    }

    #[test]
    fn s3_shares_signal() {
        let b = simulate(&small(Scenario::S3, 7, 2, 5)).unwrap();
        assert!(matches!(b.signals, TrueSignals::Shared(_)));
        assert_eq!(b.signal(0), b.signal(1));
        assert_ne!(b.arrays[0].regular, b.arrays[1].regular);
        assert_ne!(b.arrays[0].negative, b.arrays[1].negative);
    }

    #[test]
    fn s4_draws_from_pool() {
        let pool = vec![40.0, 50.0, 60.0];
        let b = simulate(&small(Scenario::S4 { pool: pool.clone() }, 7, 2, 5)).unwrap();
        assert!(b.arrays[0].negative.iter().all(|v| pool.contains(v)));
        for (x, s) in b.arrays[1].regular.iter().zip(b.signal(1)) {
            assert!(pool.iter().any(|p| (x - s - p).abs() < 1e-9));
        }
        assert!(simulate(&small(Scenario::S4 { pool: vec![] }, 7, 2, 5)).is_err());
    }

    #[test]
    fn empirical_pool_shapes() {
        let a = ProbeArray { negative: vec![3.0, 1.0, 2.0], ..Default::default() };
        let pool = build_empirical_pool(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(pool, [a.negative.clone(), a.negative.clone()].concat());

        let b = ProbeArray { negative: vec![2.0, 3.0, 1.0], ..Default::default() };
        let c = ProbeArray { negative: vec![10.0, 30.0, 20.0], ..Default::default() };
        let pool = build_empirical_pool(&[b, c]).unwrap();
        let (x, y) = (stats::sorted(&pool[..3]), stats::sorted(&pool[3..]));
        assert_eq!(x, y);

        let many: Vec<ProbeArray> = (0..48)
            .map(|i| ProbeArray { negative: (0..50).map(|j| (i * j) as f64).collect(), ..Default::default() })
            .collect();
        assert_eq!(build_empirical_pool(&many).unwrap().len(), 48 * 50);

        let odd = vec![
            ProbeArray { negative: vec![1.0, 2.0, 3.0], ..Default::default() },
            ProbeArray { negative: vec![1.0, 2.0, 3.0], ..Default::default() },
            ProbeArray { negative: vec![0.0, 4.0], ..Default::default() },
        ];
        assert_eq!(build_empirical_pool(&odd).unwrap().len(), 9);
        assert!(build_empirical_pool(&[]).is_err());
    }
}
