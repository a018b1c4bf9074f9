use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use normgam::convolution::{build_density_grid_with, GridResolution, GridSpec, NormalGammaParams};
use normgam::correction::{CorrectionMethod, MethodTag};
use normgam::estimation::{normexp_mle, normexp_np, normexp_rma, normgam_mle, ProbeArray};
use normgam::io::{
    fmt_num, format_curve, format_report, format_values, read_array, read_text, write_batch, write_text, BatchDir,
    ModelKind, ModelParams, ParamRecord,
};
use normgam::negctrl::{infer_negatives, DetectionTable};
use normgam::pipeline::{evaluate, EvalConfig, GroupDesign};
use normgam::simulation::{build_empirical_pool, simulate, Scenario, SimulationSpec};
use normgam::Error;

#[derive(Parser)]
#[command(name = "normgam", version, about = "Normal-gamma background correction for microarray intensities")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "NORMGAM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Normgam,
    NormexpMle,
    NormexpNp,
    NormexpRma,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Normgam => ModelKind::Normgam,
            Model::NormexpMle => ModelKind::NormexpMle,
            Model::NormexpNp => ModelKind::NormexpNp,
            Model::NormexpRma => ModelKind::NormexpRma,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    S1,
    S2,
    S3,
    S4,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate model parameters from an array file.
    Fit {
        array: PathBuf,
        #[arg(long, value_enum, default_value = "normgam")]
        model: Model,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Background-correct the regular probes of an array file.
    Correct {
        array: PathBuf,
        #[arg(long, conflicts_with = "subtract", required_unless_present = "subtract")]
        params: Option<PathBuf>,
        /// Subtract the median of the negative probes.
        #[arg(long)]
        subtract: bool,
        /// Reject a parameter file fitted with a different model.
        #[arg(long, value_enum)]
        model: Option<Model>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a simulated batch directory.
    Simulate {
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        /// Parameter set 1..=9.
        #[arg(long, default_value_t = 1)]
        set: u8,
        /// Number of arrays.
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 25_000)]
        n_reg: usize,
        #[arg(long, default_value_t = 1000)]
        n_neg: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Chi-square weight of the S2 noise mixture.
        #[arg(long, default_value_t = 0.0)]
        p: f64,
        /// Array file or batch directory whose negative probes form the S4 noise pool.
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Correct a batch with several methods and report metrics.
    Evaluate {
        batch: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "NG_MLE,NEXP_MLE,NEXP_RMA,NEXP_NP,SUBTRACT")]
        methods: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        offsets: Vec<f64>,
        /// One group label per array, two distinct labels.
        #[arg(long, requires = "de_labels")]
        groups: Option<PathBuf>,
        /// One 0/1 label per regular probe marking true differential expression.
        #[arg(long, requires = "groups")]
        de_labels: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Directory for AD-profile and operating-characteristic curves.
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Reconstruct negative-probe intensities from detection p-values.
    InferNeg {
        /// `probe_id \t intensity \t detection_pvalue` rows.
        table: PathBuf,
        #[arg(long)]
        n_neg: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the normal-gamma density grid for a parameter file.
    Density {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        likelihood: bool,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoConvergence { .. } | Error::GridResolution(_) | Error::Quadrature(_) => 1,
        _ => 2,
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Error> {
    match output {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_array(path: &Path) -> Result<ProbeArray, Error> {
    read_array(path)?.to_probe_array().map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })
}

fn fit(array: &Path, model: ModelKind, output: Option<&Path>) -> Result<u8, Error> {
    let arr = load_array(array)?;
    let record = match model {
        ModelKind::Normgam => {
            let f = normgam_mle(&arr)?;
            ParamRecord { model, params: ModelParams::Normgam(f.params), loglik: Some(f.loglik), converged: f.converged }
        }
        ModelKind::NormexpMle => {
            let f = normexp_mle(&arr)?;
            ParamRecord { model, params: ModelParams::Normexp(f.params), loglik: Some(f.loglik), converged: f.converged }
        }
        ModelKind::NormexpNp => {
            ParamRecord { model, params: ModelParams::Normexp(normexp_np(&arr)?), loglik: None, converged: true }
        }
        ModelKind::NormexpRma => ParamRecord {
            model,
            params: ModelParams::Normexp(normexp_rma(&arr.regular)?),
            loglik: None,
            converged: true,
        },
    };
    emit(output, &record.format())?;
    if record.converged {
        Ok(0)
    } else {
        eprintln!("warning: optimizer did not converge");
        Ok(1)
    }
}

fn correction_from(record: &ParamRecord) -> CorrectionMethod {
    match (record.model, record.params) {
        (_, ModelParams::Normgam(p)) => CorrectionMethod::NgMle(p),
        (ModelKind::NormexpRma, ModelParams::Normexp(p)) => CorrectionMethod::NexpRma(p),
        (ModelKind::NormexpNp, ModelParams::Normexp(p)) => CorrectionMethod::NexpNp(p),
        (_, ModelParams::Normexp(p)) => CorrectionMethod::NexpMle(p),
    }
}

fn correct(
    array: &Path,
    params: Option<&Path>,
    expect: Option<ModelKind>,
    output: Option<&Path>,
) -> Result<u8, Error> {
    let arr = load_array(array)?;
    let method = match params {
        Some(path) => {
            let record = ParamRecord::read(path)?;
            if let Some(m) = expect.filter(|m| *m != record.model) {
                return Err(Error::InvalidInput(format!(
                    "{} holds {} parameters, expected {}",
                    path.display(),
                    record.model.as_str(),
                    m.as_str()
                )));
            }
            correction_from(&record)
        }
        None => CorrectionMethod::subtract(&arr.negative)?,
    };
    let corrected = method.prepare()?.correct_all(&arr.regular);
    emit(output, &format_values(&corrected))?;
    Ok(0)
}

fn simulate_cmd(cmd: &Command) -> Result<u8, Error> {
    let Command::Simulate { scenario, set, n, n_reg, n_neg, seed, p, pool, output } = cmd else { unreachable!() };
    let scenario = match scenario {
        ScenarioArg::S1 => Scenario::S1,
        ScenarioArg::S2 => Scenario::S2 { p: *p },
        ScenarioArg::S3 => Scenario::S3,
        ScenarioArg::S4 => {
            let path = pool.as_ref().ok_or_else(|| Error::InvalidInput("s4 needs --pool".into()))?;
            let arrays = if path.is_dir() { BatchDir::read(path)?.arrays } else { vec![load_array(path)?] };
            Scenario::S4 { pool: build_empirical_pool(&arrays)? }
        }
    };
    let mut spec = SimulationSpec::new(scenario, *set, *seed)?;
    spec.n_arrays = *n;
    spec.n_reg = *n_reg;
    spec.n_neg = *n_neg;
    write_batch(output, &simulate(&spec)?)?;
    Ok(0)
}

fn parse_labels(path: &Path) -> Result<Vec<String>, Error> {
    Ok(read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.rsplit('\t').next().unwrap_or(l).trim().to_string())
        .collect())
}

fn parse_design(groups: &Path, de: &Path) -> Result<GroupDesign, Error> {
    let g = parse_labels(groups)?;
    let mut distinct: Vec<&String> = g.iter().collect();
    distinct.sort();
    distinct.dedup();
    if distinct.len() != 2 {
        return Err(Error::Io { path: groups.display().to_string(), message: "need exactly two group labels".into() });
    }
    let second = distinct[1].clone();
    let de = parse_labels(de)?
        .iter()
        .enumerate()
        .map(|(i, l)| match l.to_ascii_lowercase().as_str() {
            "1" | "true" => Ok(true),
            "0" | "false" => Ok(false),
            _ => Err(Error::Io { path: de.display().to_string(), message: format!("label {} is {l:?}, not 0/1", i + 1) }),
        })
        .collect::<Result<_, _>>()?;
    Ok(GroupDesign { groups: g.iter().map(|l| *l == second).collect(), de })
}

fn evaluate_cmd(cmd: &Command) -> Result<u8, Error> {
    let Command::Evaluate { batch, methods, offsets, groups, de_labels, output, curves } = cmd else { unreachable!() };
    let methods: Vec<MethodTag> = methods.iter().map(|m| m.parse()).collect::<Result<_, _>>()?;
    if offsets.iter().any(|o| !(*o >= 0.0)) {
        return Err(Error::InvalidInput("offsets must be nonnegative".into()));
    }
    let dir = BatchDir::read(batch)?;
    let set = dir.get("set").unwrap_or("custom").to_string();
    let mut cfg = EvalConfig::new(methods.clone(), set);
    cfg.offsets = offsets.clone();
    cfg.truth = dir.true_params().ok();
    let needs_truth = groups.is_none() || methods.contains(&MethodTag::NgTrue);
    let signals = match dir.signals() {
        Ok(s) => Some(s),
        Err(e) if needs_truth => return Err(e),
        Err(_) => None,
    };
    if let (Some(g), Some(d)) = (groups, de_labels) {
        cfg.design = Some(parse_design(g, d)?);
    }
    let ev = evaluate(&dir.arrays, signals.as_ref(), &cfg)?;
    emit(output.as_deref(), &format_report(&ev.rows))?;
    if let Some(c) = curves {
        std::fs::create_dir_all(c).map_err(|e| Error::Io { path: c.display().to_string(), message: e.to_string() })?;
        write_text(&c.join("ad_profile.tsv"), &format_curve(&ev.ad_curve))?;
        write_text(&c.join("operating_characteristics.tsv"), &format_curve(&ev.oc_curve))?;
    }
    let nonconverged = ev.rows.iter().any(|r| r.metric == "nonconverged" && r.value > 0.0);
    Ok(if nonconverged { 1 } else { 0 })
}

fn infer_neg(table: &Path, n_neg: usize, output: Option<&Path>) -> Result<u8, Error> {
    let file = read_array(table)?;
    let p = file.pvalues.ok_or_else(|| Error::Io {
        path: table.display().to_string(),
        message: "expected probe_id, intensity and detection_pvalue columns".into(),
    })?;
    let t = DetectionTable::new(file.regular, p, n_neg)?;
    emit(output, &format_values(&infer_negatives(&t)?))?;
    Ok(0)
}

fn density(params: &Path, likelihood: bool) -> Result<u8, Error> {
    let record = ParamRecord::read(params)?;
    let p = match record.params {
        ModelParams::Normgam(p) => p,
        ModelParams::Normexp(q) => NormalGammaParams::from(q),
    };
    let res = if likelihood { GridResolution::Likelihood } else { GridResolution::Fine };
    let grid = build_density_grid_with(&p, res)?;
    let spec: &GridSpec = &grid.spec;
    let mut out = format!("# lower={} upper={} spacing={}\nx\tdensity\n", fmt_num(spec.lower), fmt_num(spec.upper), fmt_num(spec.spacing));
    for (x, f) in grid.abscissae().iter().zip(grid.values()) {
        out.push_str(&format!("{}\t{}\n", fmt_num(*x), fmt_num(*f)));
    }
    emit(None, &out)?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Error> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Fit { array, model, output } => fit(array, (*model).into(), output.as_deref()),
        Command::Correct { array, params, subtract: _, model, output } => {
            correct(array, params.as_deref(), model.map(Into::into), output.as_deref())
        }
        c @ Command::Simulate { .. } => simulate_cmd(c),
        c @ Command::Evaluate { .. } => evaluate_cmd(c),
        Command::InferNeg { table, n_neg, output } => infer_neg(table, *n_neg, output.as_deref()),
        Command::Density { params, likelihood } => density(params, *likelihood),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
