//! Monte Carlo harness: scenario generation, replication runs and the
//! aggregate statistics reported per estimator.
//!
//! Data for replication `k` come from a ChaCha8 stream selected by `k` under
//! the scenario's master seed, so every replication can be regenerated on its
//! own and the report does not depend on how replications are scheduled.
//!
//! Signal-to-noise ratios are `sd(component) / sigma`, with the population
//! standard deviation over the `n` design points.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backfit::{backfit_plm, BackfitOptions};
use crate::dwt::{dyadic_levels, DEFAULT_J0};
use crate::error::{PlmError, Result};
use crate::plm::{fit_design, DesignPair, PlmConfig};
use crate::robust::{Algorithm, SolverOptions};
use crate::threshold::{estimate_sigma_finest, universal_threshold};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionKind {
    Sinusoid,
    PiecewiseConstant,
}

impl std::str::FromStr for FunctionKind {
    type Err = PlmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "sinusoid" | "sin" => Ok(Self::Sinusoid),
            "piecewise_constant" | "piecewise" => Ok(Self::PiecewiseConstant),
            other => Err(PlmError::InvalidParameter(format!("unknown test function `{other}`"))),
        }
    }
}

const PIECEWISE_BREAKS: [f64; 6] = [0.0, 0.2, 0.45, 0.6, 0.85, 1.0];
const PIECEWISE_LEVELS: [f64; 5] = [0.0, 3.0, -2.0, 1.5, 0.0];

/// Design points `t_i = i / n`, `i = 1..n`.
pub fn design_points(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

fn piecewise_value(t: f64) -> f64 {
    let segment = PIECEWISE_BREAKS[1..]
        .iter()
        .position(|&b| t < b)
        .unwrap_or(PIECEWISE_LEVELS.len() - 1);
    PIECEWISE_LEVELS[segment]
}

/// Test function sampled at `t_i = i/n` and centred to mean zero (not yet
/// scaled to a target SNR).
pub fn make_test_function(kind: FunctionKind, n: usize) -> Result<Vec<f64>> {
    if n < 8 {
        return Err(PlmError::InvalidParameter(format!("test functions need n >= 8, got {n}")));
    }
    let raw: Vec<f64> = design_points(n)
        .into_iter()
        .map(|t| match kind {
            FunctionKind::Sinusoid => (4.0 * std::f64::consts::PI * t).sin(),
            FunctionKind::PiecewiseConstant => piecewise_value(t),
        })
        .collect();
    let mean = raw.iter().sum::<f64>() / n as f64;
    Ok(raw.into_iter().map(|v| v - mean).collect())
}

/// Population standard deviation.
pub fn population_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

fn polynomial(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

/// Deterministic trend `g_j(t)` of one design column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignFn {
    /// Ascending powers of `t`.
    Polynomial { coeffs: Vec<f64> },
    /// `2^t`
    Pow2,
    /// `exp(-t^2)`
    Gaussian,
    /// `cos t`
    Cosine,
}

impl DesignFn {
    pub fn poly(coeffs: &[f64]) -> Self {
        Self::Polynomial { coeffs: coeffs.to_vec() }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Polynomial { coeffs } => polynomial(coeffs, t),
            Self::Pow2 => t.exp2(),
            Self::Gaussian => (-t * t).exp(),
            Self::Cosine => t.cos(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    pub f_kind: FunctionKind,
    /// One trend per covariate.
    pub design: Vec<DesignFn>,
    pub eta_sd: f64,
    pub snr_f: f64,
    /// Target for the linear part; reported against the achieved value but
    /// not enforced.
    pub snr_lin: f64,
    pub beta_true: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
    pub replications: usize,
}

impl Scenario {
    /// Sinusoidal `f`, `g(t) = t^5 + 2t`, `beta = 1`, `sigma = 0.5`, `n = 256`.
    pub fn example1() -> Self {
        Self {
            name: "example1".into(),
            n: 256,
            f_kind: FunctionKind::Sinusoid,
            design: vec![DesignFn::poly(&[0.0, 2.0, 0.0, 0.0, 0.0, 1.0])],
            eta_sd: 1.0,
            snr_f: 2.2,
            snr_lin: 4.38,
            beta_true: vec![1.0],
            sigma: 0.5,
            seed: 42,
            replications: 500,
        }
    }

    /// Example 1 with the piecewise constant `f`.
    pub fn example2() -> Self {
        Self {
            name: "example2".into(),
            f_kind: FunctionKind::PiecewiseConstant,
            ..Self::example1()
        }
    }

    /// Four covariates, `beta = (-1, 3, 0, 8)`, piecewise constant `f` at
    /// SNR 4.38.
    pub fn example3() -> Self {
        Self {
            name: "example3".into(),
            n: 256,
            f_kind: FunctionKind::PiecewiseConstant,
            design: vec![
                DesignFn::poly(&[0.0, 2.0, 0.0, 0.0, 0.0, 1.0]),
                DesignFn::poly(&[0.0, 0.0, 1.0]),
                DesignFn::poly(&[1.0, -1.0]),
                DesignFn::poly(&[0.0, -1.0, 0.0, 1.0]),
            ],
            eta_sd: 1.0,
            snr_f: 4.38,
            snr_lin: 5.99,
            beta_true: vec![-1.0, 3.0, 0.0, 8.0],
            sigma: 0.5,
            seed: 42,
            replications: 500,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "example1" => Ok(Self::example1()),
            "example2" => Ok(Self::example2()),
            "example3" => Ok(Self::example3()),
            other => Err(PlmError::InvalidParameter(format!(
                "unknown preset `{other}` (expected example1, example2 or example3)"
            ))),
        }
    }

    pub fn p(&self) -> usize {
        self.beta_true.len()
    }

    pub fn validate(&self) -> Result<()> {
        dyadic_levels(self.n)?;
        if self.n < 16 {
            return Err(PlmError::InvalidParameter(format!("n = {} is too small", self.n)));
        }
        if self.design.len() != self.beta_true.len() {
            return Err(PlmError::InvalidParameter(format!(
                "{} design columns for {} coefficients",
                self.design.len(),
                self.beta_true.len()
            )));
        }
        if self.p() >= self.n / 2 {
            return Err(PlmError::Insufficient { rows: self.n / 2, cols: self.p() });
        }
        if !(self.snr_f > 0.0) || !(self.snr_lin > 0.0) {
            return Err(PlmError::InvalidParameter("SNR targets must be positive".into()));
        }
        if !(self.sigma > 0.0) || !(self.eta_sd >= 0.0) {
            return Err(PlmError::InvalidParameter("sigma must be positive and eta_sd non-negative".into()));
        }
        if self.replications == 0 {
            return Err(PlmError::InvalidParameter("replications must be at least 1".into()));
        }
        Ok(())
    }

    /// Random stream for replication `rep`.
    pub fn rng(&self, rep: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(rep as u64);
        rng
    }
}

/// `X[i, j] = g_j(t_i) + eta_ij` with `eta ~ N(0, eta_sd^2)`, drawn row by row.
pub fn make_design(scenario: &Scenario, rng: &mut impl Rng) -> DMatrix<f64> {
    let t = design_points(scenario.n);
    let p = scenario.p();
    let mut x = DMatrix::zeros(scenario.n, p);
    for (i, &ti) in t.iter().enumerate() {
        for (j, g) in scenario.design.iter().enumerate() {
            let eta: f64 = rng.sample(StandardNormal);
            x[(i, j)] = g.eval(ti) + scenario.eta_sd * eta;
        }
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// `f` scaled so that `sd(f) / sigma = snr_f`.
    pub f: Vec<f64>,
    pub sigma: f64,
}

pub fn calibrate(scenario: &Scenario) -> Result<Calibration> {
    let f = make_test_function(scenario.f_kind, scenario.n)?;
    let sd = population_sd(&f);
    if !(sd > 0.0) {
        return Err(PlmError::InvalidParameter("test function has zero variance".into()));
    }
    let scale = scenario.snr_f * scenario.sigma / sd;
    Ok(Calibration {
        f: f.into_iter().map(|v| v * scale).collect(),
        sigma: scenario.sigma,
    })
}

/// Achieved `sd(X beta) / sigma`.
pub fn linear_snr(x: &DMatrix<f64>, beta: &[f64], sigma: f64) -> Result<f64> {
    let lin = x * DVector::from_column_slice(beta);
    let sd = population_sd(lin.as_slice());
    if !(sd > 0.0) {
        return Err(PlmError::InvalidParameter("linear part has zero variance".into()));
    }
    Ok(sd / sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Two-step fit: robust beta then thresholding.
    Plm(PlmConfig),
    /// Coordinate descent on the joint criterion with the universal
    /// threshold from the QR-MAD sigma.
    Backfit {
        filter: String,
        j0: u32,
        delta: f64,
        max_iter: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    pub name: String,
    pub kind: EstimatorKind,
}

impl Estimator {
    pub fn artur() -> Self {
        Self {
            name: "artur".into(),
            kind: EstimatorKind::Plm(PlmConfig::default().with_solver(SolverOptions::artur())),
        }
    }

    pub fn legend() -> Self {
        Self {
            name: "legend".into(),
            kind: EstimatorKind::Plm(PlmConfig::default().with_solver(SolverOptions::legend())),
        }
    }

    /// Backfitting with tolerance 1e-20 and a 2000-sweep cap.
    pub fn backfit() -> Self {
        Self {
            name: "backfit".into(),
            kind: EstimatorKind::Backfit {
                filter: "sym8".into(),
                j0: DEFAULT_J0,
                delta: 1e-20,
                max_iter: 2000,
            },
        }
    }

    pub fn plm(name: &str, config: PlmConfig) -> Self {
        Self {
            name: name.into(),
            kind: EstimatorKind::Plm(config),
        }
    }

    /// ARTUR, LEGEND and backfitting with their default settings.
    pub fn standard_set() -> Vec<Self> {
        vec![Self::backfit(), Self::artur(), Self::legend()]
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "artur" => Ok(Self::artur()),
            "legend" => Ok(Self::legend()),
            "backfit" => Ok(Self::backfit()),
            other => Err(PlmError::InvalidParameter(format!("unknown estimator `{other}`"))),
        }
    }

    fn filter_and_j0(&self) -> (&str, u32) {
        match &self.kind {
            EstimatorKind::Plm(c) => (&c.filter, c.j0),
            EstimatorKind::Backfit { filter, j0, .. } => (filter, *j0),
        }
    }

    pub fn algorithm(&self) -> Option<Algorithm> {
        match &self.kind {
            EstimatorKind::Plm(c) => Some(c.solver.algorithm),
            EstimatorKind::Backfit { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOutcome {
    pub estimator: String,
    pub error: Option<String>,
    pub beta_hat: Vec<f64>,
    pub sigma_hat: f64,
    pub lambda: f64,
    pub mise: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Seconds spent in the solver; data generation and transforms excluded.
    pub wall_time: f64,
}

impl EstimatorOutcome {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    fn failed(name: &str, err: PlmError) -> Self {
        Self {
            estimator: name.into(),
            error: Some(err.to_string()),
            beta_hat: Vec::new(),
            sigma_hat: f64::NAN,
            lambda: f64::NAN,
            mise: f64::NAN,
            iterations: 0,
            converged: false,
            wall_time: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    /// Plain MAD of the finest response coefficients, without the QR step.
    pub sigma_naive: f64,
    pub snr_lin: f64,
    pub outcomes: Vec<EstimatorOutcome>,
}

/// Data of one replication.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub y: Vec<f64>,
    pub x: DMatrix<f64>,
    pub f: Vec<f64>,
}

/// Draws the design and then the noise from the replication's stream.
pub fn simulate_data(scenario: &Scenario, calibration: &Calibration, rep: usize) -> SimulatedData {
    let mut rng = scenario.rng(rep);
    let x = make_design(scenario, &mut rng);
    let lin = &x * DVector::from_column_slice(&scenario.beta_true);
    let y = (0..scenario.n)
        .map(|i| {
            let u: f64 = rng.sample(StandardNormal);
            lin[i] + calibration.f[i] + calibration.sigma * u
        })
        .collect();
    SimulatedData {
        y,
        x,
        f: calibration.f.clone(),
    }
}

fn mise(f_hat: &[f64], f: &[f64]) -> f64 {
    f_hat.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / f.len() as f64
}

fn run_estimator(estimator: &Estimator, pair: &DesignPair, f: &[f64]) -> Result<EstimatorOutcome> {
    match &estimator.kind {
        EstimatorKind::Plm(config) => {
            let fit = fit_design(pair, config)?;
            Ok(EstimatorOutcome {
                estimator: estimator.name.clone(),
                error: None,
                mise: mise(&fit.f_hat, f),
                beta_hat: fit.beta_hat,
                sigma_hat: fit.sigma_hat.sigma_hat,
                lambda: fit.lambda,
                iterations: fit.solver.iterations,
                converged: fit.solver.converged,
                wall_time: fit.solver.wall_time,
            })
        }
        EstimatorKind::Backfit {
            filter,
            delta,
            max_iter,
            ..
        } => {
            let sigma = pair.sigma_qr()?;
            let lambda = universal_threshold(sigma.sigma_hat, pair.n());
            let res = backfit_plm(
                &pair.z,
                &pair.a,
                pair.penalized_start(),
                &BackfitOptions {
                    delta: *delta,
                    max_iter: *max_iter,
                    lambda,
                },
            )?;
            let transform = PlmConfig::default().with_filter(filter).transform()?;
            let f_hat = transform.inverse(&res.theta_hat, pair.j0)?;
            Ok(EstimatorOutcome {
                estimator: estimator.name.clone(),
                error: None,
                mise: mise(&f_hat, f),
                beta_hat: res.beta_hat,
                sigma_hat: sigma.sigma_hat,
                lambda,
                iterations: res.iterations,
                converged: res.converged,
                wall_time: res.wall_time,
            })
        }
    }
}

/// Generates replication `rep` and fits every estimator on the same data.
pub fn run_replication(
    scenario: &Scenario,
    calibration: &Calibration,
    estimators: &[Estimator],
    rep: usize,
) -> Result<ReplicationRecord> {
    let data = simulate_data(scenario, calibration, rep);
    let snr_lin = linear_snr(&data.x, &scenario.beta_true, scenario.sigma).unwrap_or(0.0);

    // transforms are shared by estimators with the same basis
    let mut pairs: Vec<((String, u32), DesignPair)> = Vec::new();
    let mut outcomes = Vec::with_capacity(estimators.len());
    for est in estimators {
        let (filter, j0) = est.filter_and_j0();
        let key = (filter.to_string(), j0);
        let idx = match pairs.iter().position(|(k, _)| *k == key) {
            Some(i) => Ok(i),
            None => PlmConfig::default()
                .with_filter(filter)
                .transform()
                .and_then(|t| DesignPair::new(&data.y, &data.x, &t, j0))
                .map(|pair| {
                    pairs.push((key, pair));
                    pairs.len() - 1
                }),
        };
        let outcome = idx.and_then(|i| run_estimator(est, &pairs[i].1, &data.f));
        outcomes.push(outcome.unwrap_or_else(|e| EstimatorOutcome::failed(&est.name, e)));
    }

    let sigma_naive = match pairs.first() {
        Some((_, pair)) => estimate_sigma_finest(pair.finest().1)?.sigma_hat,
        None => f64::NAN,
    };
    Ok(ReplicationRecord {
        replication: rep,
        sigma_naive,
        snr_lin,
        outcomes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    fn of(v: &[f64]) -> Self {
        Self {
            mean: mean(v),
            sd: sample_sd(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: String,
    pub successes: usize,
    pub failures: usize,
    pub converged: usize,
    pub beta_mean: Vec<f64>,
    pub beta_sd: Vec<f64>,
    /// Mean of `||beta_hat - beta||^2`.
    pub beta_mse: f64,
    /// Mean of `|beta_hat - beta|`, componentwise.
    pub beta_mae: Vec<f64>,
    pub mise_f: f64,
    pub sigma_mean: f64,
    pub sigma_sd: f64,
    pub mean_wall_time: f64,
    pub mean_iterations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub scenario: Scenario,
    pub estimators: Vec<Estimator>,
    pub summaries: Vec<EstimatorSummary>,
    pub sigma_naive: MeanSd,
    pub snr_lin: MeanSd,
    pub records: Vec<ReplicationRecord>,
}

impl McReport {
    pub fn summary(&self, name: &str) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == name)
    }

    /// Recomputes the aggregates from `records`.
    pub fn from_records(scenario: Scenario, estimators: Vec<Estimator>, records: Vec<ReplicationRecord>) -> Self {
        let p = scenario.p();
        let summaries = estimators
            .iter()
            .enumerate()
            .map(|(e, est)| {
                let ok: Vec<&EstimatorOutcome> = records.iter().map(|r| &r.outcomes[e]).filter(|o| o.ok()).collect();
                let column = |j: usize| ok.iter().map(|o| o.beta_hat[j]).collect::<Vec<f64>>();
                let beta_mse = mean(
                    &ok.iter()
                        .map(|o| {
                            o.beta_hat
                                .iter()
                                .zip(&scenario.beta_true)
                                .map(|(b, t)| (b - t).powi(2))
                                .sum::<f64>()
                        })
                        .collect::<Vec<_>>(),
                );
                let sigmas: Vec<f64> = ok.iter().map(|o| o.sigma_hat).collect();
                EstimatorSummary {
                    estimator: est.name.clone(),
                    successes: ok.len(),
                    failures: records.len() - ok.len(),
                    converged: ok.iter().filter(|o| o.converged).count(),
                    beta_mean: (0..p).map(|j| mean(&column(j))).collect(),
                    beta_sd: (0..p).map(|j| sample_sd(&column(j))).collect(),
                    beta_mse,
                    beta_mae: (0..p)
                        .map(|j| mean(&column(j).iter().map(|b| (b - scenario.beta_true[j]).abs()).collect::<Vec<_>>()))
                        .collect(),
                    mise_f: mean(&ok.iter().map(|o| o.mise).collect::<Vec<_>>()),
                    sigma_mean: mean(&sigmas),
                    sigma_sd: sample_sd(&sigmas),
                    mean_wall_time: mean(&ok.iter().map(|o| o.wall_time).collect::<Vec<_>>()),
                    mean_iterations: mean(&ok.iter().map(|o| o.iterations as f64).collect::<Vec<_>>()),
                }
            })
            .collect();
        let sigma_naive = MeanSd::of(&records.iter().map(|r| r.sigma_naive).collect::<Vec<_>>());
        let snr_lin = MeanSd::of(&records.iter().map(|r| r.snr_lin).collect::<Vec<_>>());
        Self {
            scenario,
            estimators,
            summaries,
            sigma_naive,
            snr_lin,
            records,
        }
    }
}

/// Runs every replication of `scenario` on up to `jobs` worker threads
/// (`0` = rayon's default). Records come back ordered by replication index.
pub fn run_monte_carlo(scenario: &Scenario, estimators: &[Estimator], jobs: usize) -> Result<McReport> {
    scenario.validate()?;
    if estimators.is_empty() {
        return Err(PlmError::InvalidParameter("no estimators configured".into()));
    }
    for est in estimators {
        if let EstimatorKind::Plm(c) = &est.kind {
            c.validate()?;
        }
    }
    let calibration = calibrate(scenario)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| PlmError::InvalidParameter(format!("thread pool: {e}")))?;
    let records = pool.install(|| {
        (0..scenario.replications)
            .into_par_iter()
            .map(|rep| run_replication(scenario, &calibration, estimators, rep))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(McReport::from_records(scenario.clone(), estimators.to_vec(), records))
}

/// Number with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header of the replication CSV. One row per replication and estimator;
/// `beta_1..beta_p` follow `estimator`, and `wall_time` is present only when
/// timings are requested.
pub fn replication_header(p: usize, timings: bool) -> Vec<String> {
    let mut h: Vec<String> = ["schema_version", "replication", "estimator"].map(String::from).to_vec();
    h.extend((1..=p).map(|j| format!("beta_{j}")));
    h.extend(
        ["sigma_hat", "sigma_naive", "lambda", "mise", "snr_lin", "iterations", "converged"].map(String::from),
    );
    if timings {
        h.push("wall_time".into());
    }
    h.push("error".into());
    h
}

pub fn write_replications_csv<W: std::io::Write>(report: &McReport, out: W, timings: bool) -> Result<()> {
    let p = report.scenario.p();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(replication_header(p, timings))?;
    for rec in &report.records {
        for o in &rec.outcomes {
            let mut row = vec![
                REPORT_SCHEMA_VERSION.to_string(),
                rec.replication.to_string(),
                o.estimator.clone(),
            ];
            if o.ok() {
                row.extend(o.beta_hat.iter().map(|b| fmt_f64(*b)));
            } else {
                row.extend(std::iter::repeat_n(String::new(), p));
            }
            row.extend([
                fmt_f64(o.sigma_hat),
                fmt_f64(rec.sigma_naive),
                fmt_f64(o.lambda),
                fmt_f64(o.mise),
                fmt_f64(rec.snr_lin),
                o.iterations.to_string(),
                o.converged.to_string(),
            ]);
            if timings {
                row.push(fmt_f64(o.wall_time));
            }
            row.push(o.error.clone().unwrap_or_default());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Aggregate statistics as JSON. `mean_wall_time` is dropped unless
/// `timings` is set, so the document is a function of the seed alone.
pub fn aggregate_json(report: &McReport, timings: bool) -> Result<serde_json::Value> {
    let mut summaries = serde_json::to_value(&report.summaries)?;
    if !timings {
        for s in summaries.as_array_mut().into_iter().flatten() {
            if let Some(obj) = s.as_object_mut() {
                obj.remove("mean_wall_time");
            }
        }
    }
    Ok(serde_json::json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "scenario": report.scenario,
        "estimators": report.estimators,
        "replications": report.records.len(),
        "sigma_naive": report.sigma_naive,
        "snr_lin": report.snr_lin,
        "summaries": summaries,
    }))
}

/// `mean(sd)` cell as printed in the tables.
pub fn cell(mean: f64, sd: f64) -> String {
    format!("{mean:.4}({sd:.4})")
}

/// Plain-text tables: sigma estimation, then beta estimates per estimator.
pub fn format_tables(report: &McReport) -> String {
    let mut out = String::new();
    let sc = &report.scenario;
    let qr = report.summaries.first();
    let _ = writeln!(
        out,
        "Scenario {} (n = {}, p = {}, {} replications, seed {})",
        sc.name,
        sc.n,
        sc.p(),
        sc.replications,
        sc.seed
    );
    let _ = writeln!(out, "achieved linear SNR {:.3} (target {})", report.snr_lin.mean, sc.snr_lin);
    let _ = writeln!(out);
    let _ = writeln!(out, "Estimation of sigma by MAD");
    let _ = writeln!(out, "{:<12}{:>20}{:>20}", "True value", "without QR", "with QR");
    if let Some(s) = qr {
        let _ = writeln!(
            out,
            "{:<12}{:>20}{:>20}",
            sc.sigma,
            cell(report.sigma_naive.mean, report.sigma_naive.sd),
            cell(s.sigma_mean, s.sigma_sd)
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Estimation of beta");
    let _ = write!(out, "{:<12}", "True value");
    for s in &report.summaries {
        let _ = write!(out, "{:>20}", s.estimator);
    }
    let _ = writeln!(out);
    for (j, b) in sc.beta_true.iter().enumerate() {
        let _ = write!(out, "{:<12}", b);
        for s in &report.summaries {
            let _ = write!(out, "{:>20}", cell(s.beta_mean[j], s.beta_sd[j]));
        }
        let _ = writeln!(out);
    }
    type Row = (&'static str, fn(&EstimatorSummary) -> String);
    let rows: [Row; 5] = [
        ("MSE", |s| format!("{:.4}", s.beta_mse)),
        ("MISE", |s| format!("{:.4}", s.mise_f)),
        ("time (s)", |s| format!("{:.6}", s.mean_wall_time)),
        ("iterations", |s| format!("{:.1}", s.mean_iterations)),
        ("failures", |s| s.failures.to_string()),
    ];
    for (label, f) in rows {
        let _ = write!(out, "{:<12}", label);
        for s in &report.summaries {
            let _ = write!(out, "{:>20}", f(s));
        }
        let _ = writeln!(out);
    }
    out
}
