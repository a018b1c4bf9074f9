//! Batch orchestration: fit and apply each correction method across arrays
//! and summarize the results as report rows.

use rayon::prelude::*;

use crate::convolution::NormalGammaParams;
use crate::correction::{CorrectionMethod, MethodTag};
use crate::error::{Error, Result};
use crate::estimation::{normexp_mle, normexp_np, normexp_rma, normgam_mle, ProbeArray};
use crate::evaluation::{
    ad_profile, apply_offset_log, auc, decile_means, decile_summary, excess_risk_ratio, mad, mad_log,
    operating_characteristics, quantile_normalize, welch_t, ReportRow, Scale,
};
use crate::simulation::TrueSignals;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedMethod {
    pub method: CorrectionMethod,
    pub converged: bool,
}

/// Estimates the parameters `tag` needs from one array. `NG_TRUE` takes
/// `truth` as given.
pub fn fit_method(tag: MethodTag, arr: &ProbeArray, truth: Option<&NormalGammaParams>) -> Result<FittedMethod> {
    let done = |method| Ok(FittedMethod { method, converged: true });
    match tag {
        MethodTag::NgTrue => {
            let p = truth.ok_or_else(|| Error::input("NG_TRUE needs the generating parameters"))?;
            done(CorrectionMethod::NgTrue(*p))
        }
        MethodTag::NgMle => {
            let f = normgam_mle(arr)?;
            Ok(FittedMethod { method: CorrectionMethod::NgMle(f.params), converged: f.converged })
        }
        MethodTag::NexpMle => {
            let f = normexp_mle(arr)?;
            Ok(FittedMethod { method: CorrectionMethod::NexpMle(f.params), converged: f.converged })
        }
        MethodTag::NexpRma => done(CorrectionMethod::NexpRma(normexp_rma(&arr.regular)?)),
        MethodTag::NexpNp => done(CorrectionMethod::NexpNp(normexp_np(arr)?)),
        MethodTag::Subtract => done(CorrectionMethod::subtract(&arr.negative)?),
    }
}

#[derive(Debug, Clone)]
pub struct CorrectedArray {
    pub regular: Vec<f64>,
    pub negative: Vec<f64>,
    pub fit: FittedMethod,
}

/// Fits and applies `tag` to every array in parallel.
pub fn correct_arrays(
    arrays: &[ProbeArray],
    tag: MethodTag,
    truth: Option<&NormalGammaParams>,
) -> Result<Vec<CorrectedArray>> {
    let shared = match (tag, truth) {
        (MethodTag::NgTrue, Some(p)) => Some(CorrectionMethod::NgTrue(*p).prepare()?),
        _ => None,
    };
    arrays
        .par_iter()
        .map(|a| {
            let fit = fit_method(tag, a, truth)?;
            let own;
            let corrector = match &shared {
                Some(c) => c,
                None => {
                    own = fit.method.prepare()?;
                    &own
                }
            };
            Ok(CorrectedArray { regular: corrector.correct_all(&a.regular), negative: corrector.correct_all(&a.negative), fit })
        })
        .collect()
}

/// Two-group design for differential-expression scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDesign {
    /// Group (`false`/`true`) of each array.
    pub groups: Vec<bool>,
    /// Whether each regular probe is truly differentially expressed.
    pub de: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub methods: Vec<MethodTag>,
    pub offsets: Vec<f64>,
    pub set_label: String,
    pub truth: Option<NormalGammaParams>,
    pub design: Option<GroupDesign>,
    pub deciles: usize,
}

impl EvalConfig {
    pub fn new(methods: Vec<MethodTag>, set_label: impl Into<String>) -> Self {
        Self { methods, offsets: vec![0.0], set_label: set_label.into(), truth: None, design: None, deciles: 10 }
    }
}

/// Report rows plus per-probe curves `(x, method, value)`.
#[derive(Debug, Clone, Default)]
pub struct Evaluation {
    pub rows: Vec<ReportRow>,
    /// `(ln S, method, AD on the log scale)`, shared-signal batches only.
    pub ad_curve: Vec<(f64, String, f64)>,
    /// `(log2 S, method, replicate mean of log2 Ŝ)` at the first offset.
    pub oc_curve: Vec<(f64, String, f64)>,
}

fn rel_err(est: f64, truth: f64) -> f64 {
    ((est - truth) / truth).abs()
}

fn mean_over(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n as f64
}

fn offset_scale(o: f64) -> String {
    format!("offset={o}")
}

/// Per-probe `|t|` between groups on `log2(normalized + offset)`, then AUC
/// against the truth labels.
fn de_auc(corrected: &[CorrectedArray], design: &GroupDesign, offset: f64) -> Result<f64> {
    if design.groups.len() != corrected.len() {
        return Err(Error::input(format!("{} group labels for {} arrays", design.groups.len(), corrected.len())));
    }
    let n = corrected[0].regular.len();
    if design.de.len() != n {
        return Err(Error::input(format!("{} DE labels for {} probes", design.de.len(), n)));
    }
    let columns: Vec<Vec<f64>> =
        corrected.iter().map(|c| c.regular.iter().chain(&c.negative).copied().collect()).collect();
    let logs: Vec<Vec<f64>> =
        quantile_normalize(&columns)?.iter().map(|c| apply_offset_log(&c[..n], offset)).collect::<Result<_>>()?;
    let scores = (0..n)
        .map(|j| {
            let (a, b): (Vec<(f64, bool)>, Vec<(f64, bool)>) =
                logs.iter().zip(&design.groups).map(|(c, &g)| (c[j], g)).partition(|p| p.1);
            let a: Vec<f64> = a.into_iter().map(|p| p.0).collect();
            let b: Vec<f64> = b.into_iter().map(|p| p.0).collect();
            Ok(welch_t(&a, &b).unwrap_or(f64::INFINITY).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    auc(&scores, &design.de)
}

/// Corrects the batch with every configured method and computes the metrics
/// the inputs allow: MAD and excess risk with true signals, parameter errors
/// with true parameters, AD profiles and operating characteristics for a
/// shared signal, and AUC with a group design.
pub fn evaluate(arrays: &[ProbeArray], signals: Option<&TrueSignals>, cfg: &EvalConfig) -> Result<Evaluation> {
    if arrays.is_empty() {
        return Err(Error::input("empty batch"));
    }
    let truth = cfg.truth.as_ref();
    let mut methods = cfg.methods.clone();
    if signals.is_some() && truth.is_some() && !methods.contains(&MethodTag::NgTrue) {
        methods.insert(0, MethodTag::NgTrue);
    }
    let mut out = Evaluation::default();
    let set = cfg.set_label.as_str();
    let mut reference: [Option<f64>; 2] = [None, None];

    for &tag in &methods {
        let corrected = correct_arrays(arrays, tag, truth)?;
        let name = tag.as_str();
        let reported = cfg.methods.contains(&tag);
        let mut rows = Vec::new();

        let nonconverged = corrected.iter().filter(|c| !c.fit.converged).count();
        rows.push(ReportRow::new("nonconverged", name, set, "raw", nonconverged as f64));

        if let (MethodTag::NgMle, Some(t)) = (tag, truth) {
            let fits: Vec<NormalGammaParams> = corrected
                .iter()
                .filter_map(|c| match c.fit.method {
                    CorrectionMethod::NgMle(p) => Some(p),
                    _ => None,
                })
                .collect();
            for (metric, get) in [
                ("rel_err_mu", (|p: &NormalGammaParams| p.mu) as fn(&NormalGammaParams) -> f64),
                ("rel_err_sigma", |p| p.sigma),
                ("rel_err_k", |p| p.k),
                ("rel_err_theta", |p| p.theta),
            ] {
                rows.push(ReportRow::new(metric, name, set, "raw", mean_over(fits.iter().map(|p| rel_err(get(p), get(t))))));
            }
        }

        if let Some(sig) = signals {
            let signal = |i: usize| match sig {
                TrueSignals::Shared(s) => s.as_slice(),
                TrueSignals::PerArray(v) => v[i].as_slice(),
            };
            for (si, scale) in [Scale::Raw, Scale::Log].into_iter().enumerate() {
                let per: Result<Vec<f64>> = corrected
                    .iter()
                    .enumerate()
                    .map(|(i, c)| match scale {
                        Scale::Raw => mad(&c.regular, signal(i)),
                        Scale::Log => mad_log(&c.regular, signal(i)),
                    })
                    .collect();
                // log-scale MAD is undefined for corrections that output zeros
                let Ok(per) = per else { continue };
                let m = mean_over(per.into_iter());
                rows.push(ReportRow::new("mad", name, set, scale.as_str(), m));
                if tag == MethodTag::NgTrue {
                    reference[si] = Some(m);
                }
                if let Some(r) = reference[si] {
                    rows.push(ReportRow::new("excess_risk", name, set, scale.as_str(), excess_risk_ratio(&[m], r)?[0]));
                }
            }

            if let TrueSignals::Shared(s) = sig {
                let regs: Vec<Vec<f64>> = corrected.iter().map(|c| c.regular.clone()).collect();
                if let Ok(profile) = ad_profile(&regs, s, Scale::Log) {
                    for (d, v) in decile_means(&profile, cfg.deciles).into_iter().enumerate() {
                        rows.push(ReportRow::new(&format!("ad_decile_{}", d + 1), name, set, "log", v));
                    }
                    if reported {
                        out.ad_curve.extend(profile.into_iter().map(|(x, v)| (x, name.to_string(), v)));
                    }
                }
                let negs: Vec<Vec<f64>> = corrected.iter().map(|c| c.negative.clone()).collect();
                for (oi, &o) in cfg.offsets.iter().enumerate() {
                    let Ok(oc) = operating_characteristics(&regs, &negs, s, o) else { continue };
                    for d in decile_summary(&oc, cfg.deciles) {
                        let scale = offset_scale(o);
                        rows.push(ReportRow::new(&format!("compression_d{}", d.decile), name, set, &scale, d.compression));
                        rows.push(ReportRow::new(&format!("sd_d{}", d.decile), name, set, &scale, d.sd));
                    }
                    if oi == 0 && reported {
                        out.oc_curve.extend(
                            oc.log2_signal.iter().zip(&oc.mean_log2).map(|(&x, &v)| (x, name.to_string(), v)),
                        );
                    }
                }
            }
        }

        if let Some(design) = &cfg.design {
            for &o in &cfg.offsets {
                match de_auc(&corrected, design, o) {
                    Ok(a) => rows.push(ReportRow::new("auc", name, set, &offset_scale(o), a)),
                    Err(Error::InvalidInput(m)) if m.contains("not positive") => {}
                    Err(e) => return Err(e),
                }
            }
        }

        if reported {
            out.rows.extend(rows);
        }
    }
    Ok(out)
}
