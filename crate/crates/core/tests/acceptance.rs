//! Acceptance suite: one PASS/FAIL line per criterion. Run with
//! `cargo test -p normgam-core --test acceptance`.

use std::time::Instant;

use normgam::convolution::{
    build_density_grid, normexp_pdf, normgam_pdf_quadrature, quadrature_breakpoints, GridResolution, GridSpec,
    NormalGammaParams, NormexpParams,
};
use normgam::correction::{
    conditional_expectation_normgam, conditional_expectation_oracle, correct_normexp, CorrectionMethod, MethodTag,
    NormgamCorrector,
};
use normgam::distributions::{gamma_pdf, normal_pdf, GammaParams};
use normgam::estimation::{normgam_mle, ProbeArray};
use normgam::evaluation::{auc, quantile_normalize, spearman, ReportRow};
use normgam::negctrl::{detection_pvalues, infer_negatives, DetectionTable};
use normgam::pipeline::{evaluate, EvalConfig};
use normgam::simulation::{parameter_set, simulate, Scenario, SimulatedBatch, SimulationSpec};
use normgam::stats::{midranks, pearson, sorted};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N_ARRAYS: usize = 20;
const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn set(id: u8) -> NormalGammaParams {
    parameter_set(id).unwrap().params
}

fn span(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn batch(scenario: Scenario, set_id: u8) -> SimulatedBatch {
    let mut spec = SimulationSpec::new(scenario, set_id, SEED).unwrap();
    spec.n_arrays = N_ARRAYS;
    simulate(&spec).unwrap()
}

fn value(rows: &[ReportRow], metric: &str, method: MethodTag, scale: &str) -> f64 {
    rows.iter()
        .find(|r| r.metric == metric && r.method == method.as_str() && r.scale == scale)
        .map_or(f64::NAN, |r| r.value)
}

fn in_range(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && v <= hi
}

fn density_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for id in [1, 3, 7] {
        let p = set(id);
        let grid = build_density_grid(&p).unwrap();
        let plan = GridSpec::plan(&p, GridResolution::Fine).unwrap();
        for x in span(plan.lower, plan.target_upper, 200) {
            let exact = normgam_pdf_quadrature(x, &p).unwrap();
            if exact > 1e-12 {
                worst = worst.max(rel(grid.pdf(x), exact));
                checked += 1;
            }
        }
    }
    outcome(worst <= 1e-6, format!("max rel err {worst:.2e} over {checked} points (tol 1e-6)"))
}

fn degeneracy() -> Outcome {
    let mut worst: f64 = 0.0;
    for id in 3..=6 {
        let p = set(id);
        let ne = NormexpParams::new(p.mu, p.sigma, p.theta).unwrap();
        let corr = NormgamCorrector::new(&p).unwrap();
        let grid = build_density_grid(&p).unwrap();
        let upper = GridSpec::plan(&p, GridResolution::Fine).unwrap().target_upper;
        for x in span(p.mu - 5.0 * p.sigma, upper, 200) {
            worst = worst.max(rel(grid.pdf(x), normexp_pdf(x, &ne)));
            worst = worst.max(rel(corr.correct(x), correct_normexp(x, &ne)));
        }
    }
    outcome(worst <= 1e-5, format!("max rel err {worst:.2e} (tol 1e-5)"))
}

fn correction_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for id in 1..=9 {
        let p = set(id);
        let corr = NormgamCorrector::new(&p).unwrap();
        let upper = GridSpec::plan(&p, GridResolution::Fine).unwrap().target_upper;
        for x in span(p.mu - 5.0 * p.sigma, upper, 20) {
            worst = worst.max(rel(corr.correct(x), conditional_expectation_normgam(x, &p).unwrap()));
            if p.k == 1.0 {
                let ne = NormexpParams::new(p.mu, p.sigma, p.theta).unwrap();
                let signal = GammaParams { shape: 1.0, scale: p.theta };
                let exact = conditional_expectation_oracle(
                    x,
                    |s| gamma_pdf(s, &signal),
                    |b| normal_pdf(b, &p.noise()),
                    &quadrature_breakpoints(x, &p),
                )
                .unwrap();
                worst = worst.max(rel(correct_normexp(x, &ne), exact));
            }
        }
    }
    outcome(worst <= 1e-4, format!("max rel err {worst:.2e} over 9 sets x 20 points (tol 1e-4)"))
}

fn property_suites() -> Outcome {
    let mut failures = Vec::new();

    let p1 = set(1);
    let b = {
        let mut spec = SimulationSpec::new(Scenario::S1, 1, SEED).unwrap();
        spec.n_reg = 5000;
        spec.n_neg = 500;
        spec.n_arrays = 1;
        simulate(&spec).unwrap()
    };
    let arr = &b.arrays[0];
    let upper = GridSpec::plan(&p1, GridResolution::Fine).unwrap().target_upper;
    let xs: Vec<f64> = span(p1.mu - 5.0 * p1.sigma, upper, 1000).collect();
    for tag in MethodTag::ALL {
        let m = normgam::pipeline::fit_method(tag, arr, Some(&p1)).unwrap().method;
        let out = m.prepare().unwrap().correct_all(&xs);
        let strict = !matches!(m, CorrectionMethod::Subtract { .. });
        let mono = out.windows(2).all(|w| if strict { w[1] > w[0] } else { w[1] >= w[0] });
        let pos = out.iter().all(|&v| if strict { v > 0.0 } else { v >= 0.0 });
        if !(mono && pos) {
            failures.push(format!("{tag} monotone={mono} positive={pos}"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for _ in 0..50 {
        let s: Vec<f64> = (0..20).map(|_| rng.gen_range(0..8) as f64).collect();
        let y: Vec<f64> = (0..20).map(|_| rng.gen_range(0..8) as f64).collect();
        let l: Vec<bool> = (0..20).map(|i| i < 7).collect();
        let mut hits = 0.0;
        for i in 0..7 {
            for j in 7..20 {
                hits += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
            }
        }
        if auc(&s, &l).unwrap() != hits / (7.0 * 13.0) {
            failures.push("auc brute force".into());
        }
        let brute_rank = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .map(|a| {
                    let below = v.iter().filter(|b| *b < a).count() as f64;
                    let eq = v.iter().filter(|b| *b == a).count() as f64;
                    below + (eq + 1.0) / 2.0
                })
                .collect()
        };
        if let Ok(r) = spearman(&s, &y) {
            if (r - pearson(&brute_rank(&s), &brute_rank(&y))).abs() > 1e-12 || midranks(&s) != brute_rank(&s) {
                failures.push("spearman brute force".into());
            }
        }
    }

    let cols: Vec<Vec<f64>> = (0..5).map(|_| (0..300).map(|_| rng.gen::<f64>() * 50.0).collect()).collect();
    let qn = quantile_normalize(&cols).unwrap();
    let first = sorted(&qn[0]);
    if qn.iter().any(|c| sorted(c) != first) {
        failures.push("quantile normalization column identity".into());
    }

    let mut spec = SimulationSpec::new(Scenario::S3, 7, SEED).unwrap();
    spec.n_reg = 3000;
    spec.n_arrays = 4;
    let a = simulate(&spec).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b2 = pool.install(|| simulate(&spec).unwrap());
    if a != b2 {
        failures.push("seed determinism".into());
    }

    if failures.is_empty() {
        outcome(true, "corrections monotone/positive on 1000 points; AUC/Spearman brute force; QN identity; determinism")
    } else {
        outcome(false, failures.join("; "))
    }
}

fn negative_inference() -> Outcome {
    let mut spec = SimulationSpec::new(Scenario::S1, 1, SEED + 10).unwrap();
    spec.n_arrays = 10;
    let b = simulate(&spec).unwrap();
    let mut param_err: [f64; 4] = [0.0; 4];
    let mut signal_err = 0.0;
    let mut round_trip = true;
    for arr in &b.arrays {
        let p = detection_pvalues(&arr.regular, &arr.negative).unwrap();
        let t = DetectionTable::new(arr.regular.clone(), p.clone(), arr.negative.len()).unwrap();
        let inferred = infer_negatives(&t).unwrap();
        round_trip &= detection_pvalues(&arr.regular, &inferred).unwrap() == p;
        let a = normgam_mle(arr).unwrap().params;
        let b = normgam_mle(&ProbeArray::new(arr.regular.clone(), inferred).unwrap()).unwrap().params;
        for (e, (x, y)) in param_err.iter_mut().zip([(a.mu, b.mu), (a.sigma, b.sigma), (a.k, b.k), (a.theta, b.theta)]) {
            *e += rel(y, x) / 10.0;
        }
        let ca = NormgamCorrector::new(&a).unwrap().correct_all(&arr.regular);
        let cb = NormgamCorrector::new(&b).unwrap().correct_all(&arr.regular);
        signal_err += ca.iter().zip(&cb).map(|(x, y)| rel(*y, *x)).sum::<f64>() / ca.len() as f64 / 10.0;
    }
    let worst = param_err.iter().copied().fold(0.0, f64::max);
    outcome(
        worst <= 1e-2 && signal_err <= 1e-2 && round_trip,
        format!(
            "param rel err (mu, sigma, k, theta) = ({:.1e}, {:.1e}, {:.1e}, {:.1e}); corrected rel err {signal_err:.1e}; p-value round trip {}",
            param_err[0], param_err[1], param_err[2], param_err[3],
            if round_trip { "exact" } else { "MISMATCH" }
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut run = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!("{} {id:>2} {name}: {} [{secs:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o, secs));
    };

    run(1, "density oracle", &mut || {
        let t = Instant::now();
        let o = density_oracle();
        let s = t.elapsed().as_secs_f64();
        outcome(o.pass && s < 10.0, o.detail)
    });
    run(2, "k=1 degeneracy", &mut || {
        let t = Instant::now();
        let o = degeneracy();
        outcome(o.pass && t.elapsed().as_secs_f64() < 10.0, o.detail)
    });
    run(3, "correction oracle", &mut || {
        let t = Instant::now();
        let o = correction_oracle();
        outcome(o.pass && t.elapsed().as_secs_f64() < 30.0, o.detail)
    });

    let t = Instant::now();
    let s1 = batch(Scenario::S1, 1);
    let mut cfg = EvalConfig::new(MethodTag::ALL.to_vec(), "1");
    cfg.truth = Some(s1.spec.params);
    let set1 = evaluate(&s1.arrays, Some(&s1.signals), &cfg).unwrap().rows;
    let set1_secs = t.elapsed().as_secs_f64();
    run(4, "reference risk", &mut || {
        let m = value(&set1, "mad", MethodTag::NgTrue, "raw");
        outcome(rel(m, 2.34) <= 0.10 && set1_secs < 300.0, format!("MAD(S0) = {m:.3} (2.34 +/- 10%); set-1 evaluation {set1_secs:.0}s"))
    });
    run(5, "excess risk, set 1", &mut || {
        let r = |t| value(&set1, "excess_risk", t, "raw");
        let (ng, mle, np, sub) = (r(MethodTag::NgMle), r(MethodTag::NexpMle), r(MethodTag::NexpNp), r(MethodTag::Subtract));
        outcome(
            in_range(ng, 0.97, 1.05) && in_range(mle, 3.3, 5.0) && in_range(np, 1.3, 1.8) && in_range(sub, 1.05, 1.3),
            format!("R(NG_MLE)={ng:.3} R(NEXP_MLE)={mle:.3} R(NEXP_NP)={np:.3} R(SUBTRACT)={sub:.3} (RMA {:.3})", r(MethodTag::NexpRma)),
        )
    });
    run(6, "normexp data, set 3", &mut || {
        let s3 = batch(Scenario::S1, 3);
        let mut cfg = EvalConfig::new(vec![MethodTag::NexpMle, MethodTag::NexpNp, MethodTag::NexpRma], "3");
        cfg.truth = Some(s3.spec.params);
        let rows = evaluate(&s3.arrays, Some(&s3.signals), &cfg).unwrap().rows;
        let r = |t| value(&rows, "excess_risk", t, "raw");
        let (mle, np, rma) = (r(MethodTag::NexpMle), r(MethodTag::NexpNp), r(MethodTag::NexpRma));
        outcome(
            in_range(mle, 0.97, 1.05) && in_range(np, 0.97, 1.05) && rma >= 3.0,
            format!("R(NEXP_MLE)={mle:.3} R(NEXP_NP)={np:.3} R(NEXP_RMA)={rma:.3}"),
        )
    });
    run(7, "parameter recovery, set 1", &mut || {
        let reference = [7.1e-4, 5.6e-3, 9.3e-3, 1.7e-2];
        let names = ["mu", "sigma", "k", "theta"];
        let got: Vec<f64> = names.iter().map(|n| value(&set1, &format!("rel_err_{n}"), MethodTag::NgMle, "raw")).collect();
        let ok = got.iter().zip(&reference).all(|(g, p)| *g <= 3.0 * p);
        outcome(ok, format!("rel L1 errors {:.1e} {:.1e} {:.1e} {:.1e} (limits 3x reference)", got[0], got[1], got[2], got[3]))
    });
    run(8, "mixture-noise robustness", &mut || {
        let mut ok = true;
        let mut parts = Vec::new();
        for p in [0.0, 0.25, 1.0] {
            let b = batch(Scenario::S2 { p }, 1);
            let cfg = EvalConfig::new(vec![MethodTag::NgMle, MethodTag::NexpNp], "1");
            let rows = evaluate(&b.arrays, Some(&b.signals), &cfg).unwrap().rows;
            let (ng, np) = (value(&rows, "mad", MethodTag::NgMle, "raw"), value(&rows, "mad", MethodTag::NexpNp, "raw"));
            ok &= ng < np;
            if p == 0.0 {
                ok &= rel(ng, 2.38) <= 0.15;
            }
            if p == 1.0 {
                ok &= rel(ng, 7.59) <= 0.15;
            }
            parts.push(format!("p={p}: NG {ng:.2} NP {np:.2}"));
        }
        outcome(ok, parts.join("; ") + " (reference 2.38 / 7.59 at p=0 / 1)")
    });
    run(9, "operating characteristics, set 7", &mut || {
        let b = batch(Scenario::S3, 7);
        let cfg = EvalConfig::new(vec![MethodTag::NgMle, MethodTag::NexpMle], "7");
        let rows = evaluate(&b.arrays, Some(&b.signals), &cfg).unwrap().rows;
        let sd = |t| value(&rows, "sd_d1", t, "offset=0");
        let comp = |t| value(&rows, "compression_d1", t, "offset=0");
        let (sng, sml, cng, cml) = (sd(MethodTag::NgMle), sd(MethodTag::NexpMle), comp(MethodTag::NgMle), comp(MethodTag::NexpMle));
        outcome(
            sng > sml && cng < cml,
            format!("lowest decile SD NG {sng:.3} > MLE {sml:.3}; compression NG {cng:.3} < MLE {cml:.3}"),
        )
    });
    run(10, "negative-probe inference", &mut negative_inference);
    run(11, "property suites", &mut property_suites);

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
