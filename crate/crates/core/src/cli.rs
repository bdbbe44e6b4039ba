//! Command-line front end: `fit`, `simulate` and `transform`.
//!
//! Exit codes: 0 on success, 1 on bad input or arguments, 2 when `fit
//! --strict` ends without solver convergence.
//!
//! Settings can also come from a TOML file passed with `--config`. It has up
//! to three tables, `[fit]`, `[simulate]` and `[transform]`, whose keys are
//! the long flag names with `-` replaced by `_`. Unknown keys are rejected and
//! command-line flags take precedence over the file.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Deserialize;

use crate::dwt::{dwt_inverse_flat, Transform, WaveletCoeffs, DEFAULT_J0};
use crate::error::{PlmError, Result};
use crate::plm::{fit_plm, FitDocument, LambdaMode, PlmConfig, SigmaMode};
use crate::robust::{Algorithm, SolverOptions};
use crate::sim::{
    aggregate_json, design_points, fmt_f64, format_tables, run_monte_carlo, write_replications_csv, Estimator,
    Scenario,
};
use crate::threshold::RuleKind;

#[derive(Debug, Parser)]
#[command(name = "wplm", version, about = "Wavelet partially linear model fitting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit y = X beta + f(t) + u to a CSV file.
    Fit(FitArgs),
    /// Run a Monte Carlo study.
    Simulate(SimulateArgs),
    /// Wavelet transform of one CSV column.
    Transform(TransformArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input CSV with a header row.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Response column; `y` when neither flag nor config sets it.
    #[arg(long)]
    pub response: Option<String>,
    /// Comma-separated covariate column names.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Fit JSON; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Fitted values CSV with columns t, y, xbeta, f_hat, y_hat.
    #[arg(long)]
    pub fitted: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// haar, db4, sym8 or identity.
    #[arg(long)]
    pub filter: Option<String>,
    #[arg(long)]
    pub j0: Option<u32>,
    /// soft, hard or scad.
    #[arg(long)]
    pub rule: Option<String>,
    #[arg(long)]
    pub scad_a: Option<f64>,
    /// universal or fixed.
    #[arg(long)]
    pub lambda_mode: Option<String>,
    /// Threshold for `--lambda-mode fixed` (implies it when given alone).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Known noise level; estimated by QR + MAD when omitted.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// legend or artur.
    #[arg(long)]
    pub solver: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Exit with status 2 if the solver did not converge.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// example1, example2 or example3.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub snr_f: Option<f64>,
    /// Comma-separated subset of backfit, artur, legend.
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<String>>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Include solver wall times in the output files.
    #[arg(long)]
    pub timings: bool,
    /// Skip printing the summary tables.
    #[arg(long)]
    pub quiet: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    /// Column to transform; the first column when omitted. Ignored with
    /// `--inverse`, which reads the `value` column.
    #[arg(long)]
    pub column: Option<String>,
    /// Output CSV; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Metadata JSON; defaults to `<output>.meta.json` when writing a file.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    #[arg(long)]
    pub filter: Option<String>,
    #[arg(long)]
    pub j0: Option<u32>,
    /// Reconstruct a signal from a coefficient CSV.
    #[arg(long)]
    pub inverse: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub transform: TransformSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub response: Option<String>,
    pub covariates: Option<Vec<String>>,
    pub filter: Option<String>,
    pub j0: Option<u32>,
    pub rule: Option<String>,
    pub scad_a: Option<f64>,
    pub lambda_mode: Option<String>,
    pub lambda: Option<f64>,
    pub sigma: Option<f64>,
    pub solver: Option<String>,
    pub delta: Option<f64>,
    pub max_iter: Option<usize>,
    pub strict: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub preset: Option<String>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub n: Option<usize>,
    pub sigma: Option<f64>,
    pub snr_f: Option<f64>,
    pub estimators: Option<Vec<String>>,
    pub out_dir: Option<PathBuf>,
    pub timings: Option<bool>,
    /// Full scenario replacing the preset.
    pub scenario: Option<Scenario>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSection {
    pub filter: Option<String>,
    pub j0: Option<u32>,
}

pub fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| PlmError::Io(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| PlmError::InvalidParameter(format!("{}: {e}", p.display())))
        }
    }
}

/// Parses `args` (program name first) and runs the subcommand; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Transform(a) => cmd_transform(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn parse<T: std::str::FromStr<Err = PlmError>>(s: &str) -> Result<T> {
    s.parse()
}

/// Builds the fit configuration from the file section overlaid by flags.
pub fn fit_config(args: &FitArgs, file: &FitSection) -> Result<PlmConfig> {
    let mut config = PlmConfig::default();
    if let Some(f) = args.filter.as_ref().or(file.filter.as_ref()) {
        config.filter = f.to_ascii_lowercase();
    }
    if let Some(j0) = args.j0.or(file.j0) {
        config.j0 = j0;
    }
    if let Some(r) = args.rule.as_ref().or(file.rule.as_ref()) {
        config.rule = parse::<RuleKind>(r)?;
    }
    if let Some(a) = args.scad_a.or(file.scad_a) {
        config.scad_a = a;
    }
    let lambda = args.lambda.or(file.lambda);
    let mode = args.lambda_mode.as_ref().or(file.lambda_mode.as_ref());
    config.lambda_mode = match (mode.map(|m| m.to_ascii_lowercase()).as_deref(), lambda) {
        (None | Some("universal"), None) => LambdaMode::Universal,
        (Some("universal"), Some(_)) if args.lambda_mode.is_some() => LambdaMode::Universal,
        (None | Some("fixed") | Some("universal"), Some(l)) => LambdaMode::Fixed(l),
        (Some("fixed"), None) => {
            return Err(PlmError::InvalidParameter("--lambda-mode fixed needs --lambda".into()));
        }
        (Some(other), _) => {
            return Err(PlmError::InvalidParameter(format!(
                "unknown lambda mode `{other}` (expected universal or fixed)"
            )));
        }
    };
    if let Some(s) = args.sigma.or(file.sigma) {
        config.sigma_mode = SigmaMode::Fixed(s);
    }
    let algorithm = match args.solver.as_ref().or(file.solver.as_ref()) {
        Some(s) => parse::<Algorithm>(s)?,
        None => Algorithm::Legend,
    };
    let mut solver = SolverOptions::for_algorithm(algorithm);
    if let Some(d) = args.delta.or(file.delta) {
        solver = solver.with_delta(d);
    }
    if let Some(m) = args.max_iter.or(file.max_iter) {
        solver = solver.with_max_iter(m);
    }
    config.solver = solver;
    config.validate()?;
    Ok(config)
}

/// Reads named numeric columns from a headed CSV file.
pub fn read_columns(path: &Path, names: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| PlmError::Io(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let idx = names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| PlmError::InvalidParameter(format!("column `{name}` not found in {}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (c, &i) in idx.iter().enumerate() {
            let cell = record.get(i).unwrap_or("").trim();
            let v: f64 = cell.parse().map_err(|_| {
                PlmError::InvalidParameter(format!("row {}: column `{}` has non-numeric value `{cell}`", row + 2, names[c]))
            })?;
            cols[c].push(v);
        }
    }
    if cols.first().is_some_and(|c| c.is_empty()) {
        return Err(PlmError::Empty("CSV has no data rows"));
    }
    Ok(cols)
}

fn first_header(path: &Path) -> Result<String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| PlmError::Io(format!("{}: {e}", path.display())))?;
    reader
        .headers()?
        .get(0)
        .map(|h| h.trim().to_string())
        .ok_or(PlmError::Empty("CSV header"))
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| PlmError::Io(format!("{}: {e}", p.display()))),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn to_json(value: &impl serde::Serialize) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn cmd_fit(args: &FitArgs) -> Result<i32> {
    let file = load_config(args.config.as_deref())?.fit;
    let config = fit_config(args, &file)?;
    let response = args
        .response
        .clone()
        .or(file.response.clone())
        .unwrap_or_else(|| "y".into());
    let covariates = args.covariates.clone().or(file.covariates.clone()).unwrap_or_default();
    if covariates.is_empty() {
        return Err(PlmError::InvalidParameter("at least one covariate column is required".into()));
    }
    let strict = args.strict || file.strict.unwrap_or(false);

    let mut names = vec![response];
    names.extend(covariates.iter().cloned());
    let cols = read_columns(&args.input, &names)?;
    let n = cols[0].len();
    let y = &cols[0];
    let x = DMatrix::from_fn(n, covariates.len(), |i, j| cols[j + 1][i]);

    let fit = fit_plm(y, &x, &config)?;
    if let Some(path) = &args.fitted {
        let xbeta = fit.linear_part(&x);
        let mut w = csv::Writer::from_path(path).map_err(|e| PlmError::Io(format!("{}: {e}", path.display())))?;
        w.write_record(["t", "y", "xbeta", "f_hat", "y_hat"])?;
        for (i, t) in design_points(n).into_iter().enumerate() {
            w.write_record([
                fmt_f64(t),
                fmt_f64(y[i]),
                fmt_f64(xbeta[i]),
                fmt_f64(fit.f_hat[i]),
                fmt_f64(xbeta[i] + fit.f_hat[i]),
            ])?;
        }
        w.flush()?;
    }
    let converged = fit.solver.converged;
    let iterations = fit.solver.iterations;
    let doc = FitDocument::new(fit, &config, covariates.len());
    write_output(args.output.as_deref(), &to_json(&doc)?)?;
    if strict && !converged {
        eprintln!("error: solver did not converge after {iterations} iterations");
        return Ok(2);
    }
    Ok(0)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let file = load_config(args.config.as_deref())?.simulate;
    let mut scenario = match (&args.preset, file.scenario) {
        (Some(p), _) => Scenario::preset(p)?,
        (None, Some(s)) => s,
        (None, None) => Scenario::preset(file.preset.as_deref().unwrap_or("example1"))?,
    };
    if let Some(r) = args.reps.or(file.reps) {
        scenario.replications = r;
    }
    if let Some(s) = args.seed.or(file.seed) {
        scenario.seed = s;
    }
    if let Some(n) = args.n.or(file.n) {
        scenario.n = n;
    }
    if let Some(s) = args.sigma.or(file.sigma) {
        scenario.sigma = s;
    }
    if let Some(s) = args.snr_f.or(file.snr_f) {
        scenario.snr_f = s;
    }
    let estimators = match args.estimators.as_ref().or(file.estimators.as_ref()) {
        Some(names) => names.iter().map(|n| Estimator::by_name(n.trim())).collect::<Result<Vec<_>>>()?,
        None => Estimator::standard_set(),
    };
    let jobs = args.jobs.or(file.jobs).unwrap_or(0);
    let timings = args.timings || file.timings.unwrap_or(false);
    let out_dir = args
        .out_dir
        .clone()
        .or(file.out_dir)
        .unwrap_or_else(|| PathBuf::from("."));

    let report = run_monte_carlo(&scenario, &estimators, jobs)?;
    fs::create_dir_all(&out_dir).map_err(|e| PlmError::Io(format!("{}: {e}", out_dir.display())))?;
    let csv_path = out_dir.join(format!("{}_replications.csv", scenario.name));
    let json_path = out_dir.join(format!("{}_aggregate.json", scenario.name));
    let csv_file = fs::File::create(&csv_path).map_err(|e| PlmError::Io(format!("{}: {e}", csv_path.display())))?;
    write_replications_csv(&report, std::io::BufWriter::new(csv_file), timings)?;
    write_output(Some(&json_path), &to_json(&aggregate_json(&report, timings)?)?)?;
    if !args.quiet {
        print!("{}", format_tables(&report));
    }
    Ok(0)
}

fn transform_from(filter: &str, j0: u32) -> Result<(PlmConfig, Transform)> {
    let config = PlmConfig::default().with_filter(&filter.to_ascii_lowercase()).with_j0(j0);
    let t = config.transform()?;
    Ok((config, t))
}

pub fn cmd_transform(args: &TransformArgs) -> Result<i32> {
    let file = load_config(args.config.as_deref())?.transform;
    let filter = args
        .filter
        .clone()
        .or(file.filter)
        .unwrap_or_else(|| "sym8".into());
    let j0 = args.j0.or(file.j0).unwrap_or(DEFAULT_J0);
    let (config, transform) = transform_from(&filter, j0)?;
    let Transform::Wavelet(wavelet) = transform else {
        return Err(PlmError::InvalidParameter("transform needs a wavelet filter".into()));
    };

    let mut out = csv::Writer::from_writer(Vec::new());
    let n;
    let column;
    if args.inverse {
        column = "value".to_string();
        let values = read_columns(&args.input, std::slice::from_ref(&column))?.remove(0);
        n = values.len();
        let signal = dwt_inverse_flat(&values, &wavelet, j0)?;
        out.write_record(["x"])?;
        for v in signal {
            out.write_record([fmt_f64(v)])?;
        }
    } else {
        column = match &args.column {
            Some(c) => c.clone(),
            None => first_header(&args.input)?,
        };
        let x = read_columns(&args.input, std::slice::from_ref(&column))?.remove(0);
        n = x.len();
        let coeffs = crate::dwt::dwt_forward(&x, &wavelet, j0)?;
        write_coefficients(&mut out, &coeffs)?;
    }
    let bytes = out.into_inner().map_err(|e| PlmError::Io(e.to_string()))?;
    write_output(args.output.as_deref(), &bytes)?;

    let meta_path = args.metadata.clone().or_else(|| {
        args.output.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".meta.json");
            PathBuf::from(s)
        })
    });
    if let Some(path) = meta_path {
        let meta = serde_json::json!({
            "filter": config.filter,
            "j0": j0,
            "n": n,
            "direction": if args.inverse { "inverse" } else { "forward" },
            "column": column,
        });
        write_output(Some(&path), &to_json(&meta)?)?;
    }
    Ok(0)
}

fn write_coefficients<W: Write>(w: &mut csv::Writer<W>, coeffs: &WaveletCoeffs) -> Result<()> {
    w.write_record(["block", "level", "position", "value"])?;
    for (k, v) in coeffs.scaling().iter().enumerate() {
        w.write_record(["scaling".to_string(), coeffs.j0().to_string(), k.to_string(), fmt_f64(*v)])?;
    }
    for (i, d) in coeffs.details().iter().enumerate() {
        let level = coeffs.j0() + i as u32;
        for (k, v) in d.iter().enumerate() {
            w.write_record(["detail".to_string(), level.to_string(), k.to_string(), fmt_f64(*v)])?;
        }
    }
    Ok(())
}
