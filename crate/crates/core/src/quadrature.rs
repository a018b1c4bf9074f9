//! Numerical integration used by the reference (oracle) computations:
//! double-exponential quadrature for integrands with endpoint
//! singularities and adaptive Gauss-Kronrod for piecewise-smooth ones.

use crate::error::{Error, Result};

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

/// Tanh-sinh quadrature of `f` over `[a, b]` with relative tolerance `tol`.
///
/// Abscissae are generated as distances from the nearer endpoint so that
/// integrable singularities at `a` or `b` are never evaluated exactly.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (value, diff) = tanh_sinh_raw(&f, a, b, tol);
    if diff <= tol * value.abs() {
        Ok(value)
    } else {
        Err(Error::Quadrature(format!("tanh-sinh on [{a}, {b}] did not reach tolerance {tol}")))
    }
}

/// Returns the final estimate and the last level-to-level change.
fn tanh_sinh_raw<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    if a > b {
        let (v, d) = tanh_sinh_raw(f, b, a, tol);
        return (-v, d);
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);

    // contribution of abscissa pair at parameter t >= 0
    let pair = |t: f64| -> Option<f64> {
        let u = HALF_PI * t.sinh();
        let e = (-2.0 * u).exp();
        let comp = 2.0 * e / (1.0 + e);
        let dist = half * comp;
        let left = a + dist;
        let right = b - dist;
        let left_ok = dist > 0.0 && left > a;
        let right_ok = dist > 0.0 && right < b;
        if !left_ok && !right_ok {
            return None;
        }
        let w = HALF_PI * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        let mut s = 0.0;
        for (x, ok) in [(left, left_ok), (right, right_ok)] {
            if ok {
                let v = w * f(x);
                if v.is_finite() {
                    s += v;
                }
            }
        }
        Some(s)
    };

    let t_max = 6.5;
    let mut h = 1.0;
    let mut sum = HALF_PI * f(mid);
    if !sum.is_finite() {
        sum = 0.0;
    }
    let mut k = 1;
    while (k as f64) * h <= t_max {
        match pair(k as f64 * h) {
            Some(v) => sum += v,
            None => break,
        }
        k += 1;
    }
    let mut estimate = sum * h * half;
    let mut diff = f64::INFINITY;

    for level in 1..=14 {
        h *= 0.5;
        // new odd-indexed abscissae
        let mut k = 1;
        while (k as f64) * h <= t_max {
            match pair(k as f64 * h) {
                Some(v) => sum += v,
                None => break,
            }
            k += 2;
        }
        let next = sum * h * half;
        diff = (next - estimate).abs();
        estimate = next;
        if level >= 3 && diff <= tol * next.abs() {
            break;
        }
    }
    (estimate, diff)
}

/// Integrates over consecutive segments delimited by `breaks`. The tolerance
/// is relative to the total, so negligible segments need not converge on
/// their own.
pub fn tanh_sinh_piecewise<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> Result<f64> {
    let mut total = 0.0;
    let mut err = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (v, d) = tanh_sinh_raw(&f, w[0], w[1], tol);
            total += v;
            err += d;
        }
    }
    if err <= tol * total.abs() {
        Ok(total)
    } else {
        Err(Error::Quadrature(format!("piecewise tanh-sinh error {err:.3e} exceeds tolerance on {total:.6e}")))
    }
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK_WEIGHTS[7] * fc;
    let mut gauss = GAUSS_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7-15) with bisection until the summed error
/// estimate drops below `max(abs_tol, rel_tol * |I|)`.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut segments = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..2000 {
        let total: f64 = segments.iter().map(|s| s.2 .0).sum();
        let err: f64 = segments.iter().map(|s| s.2 .1).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .expect("nonempty");
        let (lo, hi, _) = segments.swap_remove(worst);
        let m = 0.5 * (lo + hi);
        if m <= lo || m >= hi {
            return Ok(segments.iter().map(|s| s.2 .0).sum::<f64>() + gk15(&f, lo, hi).0);
        }
        segments.push((lo, m, gk15(&f, lo, m)));
        segments.push((m, hi, gk15(&f, m, hi)));
    }
    Err(Error::Quadrature(format!("Gauss-Kronrod on [{a}, {b}] exhausted its subdivision budget")))
}
