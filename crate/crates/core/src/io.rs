//! Tab-separated file formats for arrays, parameter files, simulated batches
//! and evaluation reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::convolution::{NormalGammaParams, NormexpParams};
use crate::error::{Error, Result};
use crate::estimation::ProbeArray;
use crate::evaluation::ReportRow;
use crate::simulation::{SimulatedBatch, TrueSignals};

pub const NEGATIVE_SENTINEL: &str = ">negative";
pub const MANIFEST: &str = "manifest.tsv";

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io { path: path.display().to_string(), message: e.to_string() }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn in_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line, message } => io_err(path, format!("line {line}: {message}")),
        other => other,
    })
}

fn parse_num(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse { line, message: format!("not a number: {field:?}") })?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Parse { line, message: format!("non-finite value {field:?}") })
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r'))).filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    })
}

/// Contents of an array file: regular rows, then an optional `>negative`
/// section. Rows are `intensity`, `id \t intensity` or
/// `id \t intensity \t detection_pvalue`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArrayFile {
    pub ids: Vec<String>,
    pub regular: Vec<f64>,
    pub negative: Vec<f64>,
    pub pvalues: Option<Vec<f64>>,
}

impl ArrayFile {
    pub fn to_probe_array(&self) -> Result<ProbeArray> {
        let arr = ProbeArray::new(self.regular.clone(), self.negative.clone())?;
        match &self.pvalues {
            Some(p) => arr.with_pvalues(p.clone()),
            None => Ok(arr),
        }
    }
}

pub fn parse_array(text: &str) -> Result<ArrayFile> {
    let mut out = ArrayFile::default();
    let mut pvalues = Vec::new();
    let mut in_negative = false;
    for (line, l) in data_lines(text) {
        if l.trim() == NEGATIVE_SENTINEL {
            if in_negative {
                return Err(Error::Parse { line, message: "repeated negative section".into() });
            }
            in_negative = true;
            continue;
        }
        let fields: Vec<&str> = l.split('\t').collect();
        let (id, value, p) = match fields.as_slice() {
            [v] => (None, *v, None),
            [id, v] => (Some(*id), *v, None),
            [id, v, p] => (Some(*id), *v, Some(*p)),
            _ => return Err(Error::Parse { line, message: format!("expected 1 to 3 fields, found {}", fields.len()) }),
        };
        let v = parse_num(value, line)?;
        if in_negative {
            out.negative.push(v);
            continue;
        }
        out.ids.push(id.map_or_else(|| format!("r{}", out.regular.len() + 1), str::to_string));
        out.regular.push(v);
        match p {
            Some(p) if pvalues.len() + 1 == out.regular.len() => pvalues.push(parse_num(p, line)?),
            None if pvalues.is_empty() => {}
            _ => return Err(Error::Parse { line, message: "detection p-value missing on some rows".into() }),
        }
    }
    if !pvalues.is_empty() {
        out.pvalues = Some(pvalues);
    }
    Ok(out)
}

pub fn read_array(path: &Path) -> Result<ArrayFile> {
    in_file(path, parse_array(&read_text(path)?))
}

pub fn format_array(arr: &ProbeArray, header: &str) -> String {
    let mut s = String::new();
    for l in header.lines() {
        let _ = writeln!(s, "# {l}");
    }
    for (j, v) in arr.regular.iter().enumerate() {
        match &arr.detection_pvalues {
            Some(p) => writeln!(s, "r{}\t{}\t{}", j + 1, fmt_num(*v), fmt_num(p[j])),
            None => writeln!(s, "r{}\t{}", j + 1, fmt_num(*v)),
        }
        .expect("write to string");
    }
    if !arr.negative.is_empty() {
        s.push_str(NEGATIVE_SENTINEL);
        s.push('\n');
        for (j, v) in arr.negative.iter().enumerate() {
            let _ = writeln!(s, "n{}\t{}", j + 1, fmt_num(*v));
        }
    }
    s
}

/// One value per row, optionally preceded by an id column.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    data_lines(text)
        .map(|(line, l)| match l.split('\t').collect::<Vec<_>>().as_slice() {
            [v] | [_, v] => parse_num(v, line),
            f => Err(Error::Parse { line, message: format!("expected 1 or 2 fields, found {}", f.len()) }),
        })
        .collect()
}

pub fn read_values(path: &Path) -> Result<Vec<f64>> {
    in_file(path, parse_values(&read_text(path)?))
}

pub fn format_values(values: &[f64]) -> String {
    values.iter().map(|v| fmt_num(*v) + "\n").collect()
}

/// `key=value` lines (also `key\tvalue`).
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (line, l) in data_lines(text) {
        let (k, v) = l
            .split_once('=')
            .or_else(|| l.split_once('\t'))
            .ok_or_else(|| Error::Parse { line, message: format!("expected key=value, found {l:?}") })?;
        if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Parse { line, message: format!("duplicate key {:?}", k.trim()) });
        }
    }
    Ok(map)
}

fn get<'a>(map: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key).map(String::as_str).ok_or_else(|| Error::input(format!("missing key {key:?}")))
}

fn get_num(map: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    let v = get(map, key)?;
    v.parse().map_err(|_| Error::input(format!("key {key:?} is not a number: {v:?}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Normgam,
    NormexpMle,
    NormexpNp,
    NormexpRma,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Normgam => "normgam",
            ModelKind::NormexpMle => "normexp-mle",
            ModelKind::NormexpNp => "normexp-np",
            ModelKind::NormexpRma => "normexp-rma",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "normgam" | "normal-gamma" => Ok(ModelKind::Normgam),
            "normexp-mle" => Ok(ModelKind::NormexpMle),
            "normexp-np" => Ok(ModelKind::NormexpNp),
            "normexp-rma" => Ok(ModelKind::NormexpRma),
            _ => Err(Error::input(format!("unknown model {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelParams {
    Normgam(NormalGammaParams),
    Normexp(NormexpParams),
}

/// Contents of a parameter file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRecord {
    pub model: ModelKind,
    pub params: ModelParams,
    pub loglik: Option<f64>,
    pub converged: bool,
}

impl ParamRecord {
    pub fn format(&self) -> String {
        let mut s = format!("model={}\n", self.model.as_str());
        match self.params {
            ModelParams::Normgam(p) => {
                for (k, v) in [("mu", p.mu), ("sigma", p.sigma), ("k", p.k), ("theta", p.theta)] {
                    let _ = writeln!(s, "{k}={}", fmt_num(v));
                }
            }
            ModelParams::Normexp(p) => {
                for (k, v) in [("mu", p.mu), ("sigma", p.sigma), ("alpha", p.alpha)] {
                    let _ = writeln!(s, "{k}={}", fmt_num(v));
                }
            }
        }
        if let Some(ll) = self.loglik {
            let _ = writeln!(s, "loglik={}", fmt_num(ll));
        }
        let _ = writeln!(s, "converged={}", self.converged);
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let map = parse_key_values(text)?;
        let model: ModelKind = get(&map, "model")?.parse()?;
        let (mu, sigma) = (get_num(&map, "mu")?, get_num(&map, "sigma")?);
        let params = match model {
            ModelKind::Normgam => {
                ModelParams::Normgam(NormalGammaParams::new(mu, sigma, get_num(&map, "k")?, get_num(&map, "theta")?)?)
            }
            _ => ModelParams::Normexp(NormexpParams::new(mu, sigma, get_num(&map, "alpha")?)?),
        };
        let loglik = map.contains_key("loglik").then(|| get_num(&map, "loglik")).transpose()?;
        let converged = match map.get("converged").map(String::as_str) {
            None | Some("true") => true,
            Some("false") => false,
            Some(v) => return Err(Error::input(format!("converged must be true or false, got {v:?}"))),
        };
        Ok(Self { model, params, loglik, converged })
    }

    pub fn read(path: &Path) -> Result<Self> {
        in_file(path, Self::parse(&read_text(path)?)).map_err(|e| match e {
            Error::InvalidInput(m) | Error::InvalidParameter(m) => io_err(path, m),
            other => other,
        })
    }
}

pub fn array_file(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("array_{:03}.tsv", i + 1))
}

pub fn signal_file(dir: &Path, i: Option<usize>) -> PathBuf {
    match i {
        Some(i) => dir.join(format!("signal_{:03}.tsv", i + 1)),
        None => dir.join("signal.tsv"),
    }
}

fn manifest_text(batch: &SimulatedBatch) -> String {
    let spec = &batch.spec;
    let p = &spec.params;
    let mut s = String::from("# simulated batch\n");
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}\t{v}");
    };
    kv("scenario", spec.scenario.name().into());
    if let crate::simulation::Scenario::S2 { p } = spec.scenario {
        kv("p", fmt_num(p));
    }
    kv("set", spec.set_id.map_or_else(|| "custom".into(), |i| i.to_string()));
    kv("mu", fmt_num(p.mu));
    kv("sigma", fmt_num(p.sigma));
    kv("k", fmt_num(p.k));
    kv("theta", fmt_num(p.theta));
    kv("n_reg", spec.n_reg.to_string());
    kv("n_neg", spec.n_neg.to_string());
    kv("n_arrays", spec.n_arrays.to_string());
    kv("seed", spec.seed.to_string());
    kv("shared_signal", spec.scenario.shares_signal().to_string());
    s
}

/// Writes arrays and true signals in parallel, then the manifest.
pub fn write_batch(dir: &Path, batch: &SimulatedBatch) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let set = batch.spec.set_id.map_or_else(|| "custom".into(), |i| i.to_string());
    batch.arrays.par_iter().enumerate().try_for_each(|(i, a)| {
        let header = format!("scenario={} set={set} array={}", batch.spec.scenario.name(), i + 1);
        write_text(&array_file(dir, i), &format_array(a, &header))
    })?;
    match &batch.signals {
        TrueSignals::Shared(s) => write_text(&signal_file(dir, None), &format_values(s))?,
        TrueSignals::PerArray(v) => {
            v.par_iter().enumerate().try_for_each(|(i, s)| write_text(&signal_file(dir, Some(i)), &format_values(s)))?
        }
    }
    write_text(&dir.join(MANIFEST), &manifest_text(batch))
}

/// A batch directory as read back from disk.
#[derive(Debug, Clone)]
pub struct BatchDir {
    pub dir: PathBuf,
    pub manifest: BTreeMap<String, String>,
    pub arrays: Vec<ProbeArray>,
}

impl BatchDir {
    pub fn read(dir: &Path) -> Result<Self> {
        let mpath = dir.join(MANIFEST);
        let manifest = in_file(&mpath, parse_key_values(&read_text(&mpath)?))?;
        let n: usize = get(&manifest, "n_arrays")
            .and_then(|v| v.parse().map_err(|_| Error::input("n_arrays is not an integer")))
            .map_err(|e| io_err(&mpath, e))?;
        let arrays = (0..n)
            .into_par_iter()
            .map(|i| read_array(&array_file(dir, i))?.to_probe_array())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dir: dir.to_path_buf(), manifest, arrays })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.manifest.get(key).map(String::as_str)
    }

    /// The generating parameters, when the manifest records them.
    pub fn true_params(&self) -> Result<NormalGammaParams> {
        let m = &self.manifest;
        NormalGammaParams::new(get_num(m, "mu")?, get_num(m, "sigma")?, get_num(m, "k")?, get_num(m, "theta")?)
    }

    /// Reads `signal.tsv` or the per-array `signal_NNN.tsv` files; the error
    /// names the missing file.
    pub fn signals(&self) -> Result<TrueSignals> {
        let shared = signal_file(&self.dir, None);
        if shared.exists() {
            return Ok(TrueSignals::Shared(read_values(&shared)?));
        }
        let per = (0..self.arrays.len()).map(|i| read_values(&signal_file(&self.dir, Some(i)))).collect::<Result<_>>();
        per.map(TrueSignals::PerArray).map_err(|e| match e {
            Error::Io { path, message } if !Path::new(&path).exists() => {
                Error::Io { path, message: format!("true signal file missing ({message})") }
            }
            other => other,
        })
    }
}

pub const REPORT_HEADER: &str = "metric\tmethod\tset\tscale\tvalue";

pub fn format_report(rows: &[ReportRow]) -> String {
    let mut s = format!("{REPORT_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}", r.metric, r.method, r.set, r.scale, fmt_num(r.value));
    }
    s
}

pub fn parse_report(text: &str) -> Result<Vec<ReportRow>> {
    data_lines(text)
        .filter(|(_, l)| *l != REPORT_HEADER)
        .map(|(line, l)| match l.split('\t').collect::<Vec<_>>().as_slice() {
            [m, meth, set, scale, v] => Ok(ReportRow::new(m, meth, set, scale, parse_num(v, line)?)),
            f => Err(Error::Parse { line, message: format!("expected 5 fields, found {}", f.len()) }),
        })
        .collect()
}

/// `x \t method \t value` rows for plotting curves.
pub fn format_curve(rows: &[(f64, String, f64)]) -> String {
    let mut s = String::from("x\tmethod\tvalue\n");
    for (x, m, v) in rows {
        let _ = writeln!(s, "{}\t{m}\t{}", fmt_num(*x), fmt_num(*v));
    }
    s
}
