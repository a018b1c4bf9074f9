//! Derivative-free minimisation by the Nelder-Mead simplex method.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Iteration cap for each run.
    pub max_iter: usize,
    /// Stop once the spread of simplex values is below `rel_tol * |f_best|`.
    pub rel_tol: f64,
    /// Fresh simplices rebuilt around the best point after the first run.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_iter: 500, rel_tol: 1e-8, restarts: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimises `f` from `x0` with initial simplex edges `step`. Non-finite
/// objective values are treated as `+inf`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], step: &[f64], opts: &NelderMeadOptions) -> Minimum {
    assert_eq!(x0.len(), step.len());
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0);
    let mut iterations = 0;
    let mut converged = false;
    for run in 0..=opts.restarts {
        let start_f = best_f;
        let (x, v, iters, ok) = run_simplex(&mut eval, &best_x, best_f, step, opts);
        iterations += iters;
        converged = ok;
        if v <= best_f {
            best_x = x;
            best_f = v;
        }
        if run > 0 && ok && start_f - best_f <= opts.rel_tol * best_f.abs() {
            break;
        }
    }
    Minimum { x: best_x, value: best_f, iterations, evaluations, converged }
}

fn run_simplex<F: FnMut(&[f64]) -> f64>(
    eval: &mut F,
    x0: &[f64],
    f0: f64,
    step: &[f64],
    opts: &NelderMeadOptions,
) -> (Vec<f64>, f64, usize, bool) {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    let mut vals = vec![f0];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step[i];
        vals.push(eval(&p));
        pts.push(p);
    }

    let mut iter = 0;
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let (lo, hi) = (vals[0], vals[n]);
        if hi - lo <= opts.rel_tol * lo.abs() && lo.is_finite() {
            return (pts[0].clone(), lo, iter, true);
        }
        if iter >= opts.max_iter {
            return (pts[0].clone(), lo, iter, false);
        }
        iter += 1;

        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (pts[n][j] - centroid[j])).collect() };

        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, bound) = if fr < vals[n] { (along(-0.5), fr) } else { (along(0.5), vals[n]) };
        let fc = eval(&xc);
        if fc < bound {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let p: Vec<f64> = (0..n).map(|j| pts[0][j] + 0.5 * (pts[i][j] - pts[0][j])).collect();
            vals[i] = eval(&p);
            pts[i] = p;
        }
    }
}
