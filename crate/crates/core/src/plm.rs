//! Partially linear model `y = X beta + f(t) + u` fitted in the wavelet domain.
//!
//! With `z = W y`, `A = W X` and an orthogonal `W`, minimizing
//!
//! ```text
//! J(beta, theta) = 1/2 sum_i (z_i - A_i^T beta - theta_i)^2 + lambda sum_{i >= start} |theta_i|
//! ```
//!
//! over `theta` for fixed `beta` gives the raw residual on the scaling block
//! and the soft-thresholded residual elsewhere. Substituting back leaves
//! Huber's cost on the penalized rows. So `beta` is a Huber M-estimate on rows
//! `i >= start` that ignores the nonparametric part, and `theta` follows by
//! thresholding `z - A beta_hat`. [`fit_plm`] runs exactly these steps.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::backfit::{backfit_plm, BackfitOptions};
use crate::dwt::{dyadic_levels, penalized_start, Transform, WaveletFilter, DEFAULT_J0};
use crate::error::{PlmError, Result};
use crate::robust::{residuals, robust_fit, LeastSquares, RhoFamily, SolverOptions, SolverResult};
use crate::threshold::{
    estimate_sigma_qr, soft_threshold, universal_threshold, RuleKind, SigmaEstimate, SigmaMethod, ThresholdRule,
    DEFAULT_SCAD_A,
};

/// Version tag written into serialized fit documents.
pub const FIT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// `sigma_hat * sqrt(2 ln n)`.
    Universal,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    QrMad,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlmConfig {
    /// A built-in filter name, or `identity` for data already in the
    /// coefficient domain.
    pub filter: String,
    pub j0: u32,
    pub rule: RuleKind,
    pub scad_a: f64,
    pub lambda_mode: LambdaMode,
    pub sigma_mode: SigmaMode,
    pub solver: SolverOptions,
}

impl Default for PlmConfig {
    fn default() -> Self {
        Self {
            filter: "sym8".into(),
            j0: DEFAULT_J0,
            rule: RuleKind::Soft,
            scad_a: DEFAULT_SCAD_A,
            lambda_mode: LambdaMode::Universal,
            sigma_mode: SigmaMode::QrMad,
            solver: SolverOptions::legend(),
        }
    }
}

impl PlmConfig {
    pub fn with_solver(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_filter(mut self, filter: &str) -> Self {
        self.filter = filter.into();
        self
    }

    pub fn with_j0(mut self, j0: u32) -> Self {
        self.j0 = j0;
        self
    }

    pub fn with_lambda(mut self, mode: LambdaMode) -> Self {
        self.lambda_mode = mode;
        self
    }

    pub fn with_sigma(mut self, mode: SigmaMode) -> Self {
        self.sigma_mode = mode;
        self
    }

    pub fn transform(&self) -> Result<Transform> {
        if self.filter.eq_ignore_ascii_case("identity") {
            Ok(Transform::Identity)
        } else {
            Ok(Transform::Wavelet(WaveletFilter::by_name(&self.filter)?))
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.transform()?;
        self.solver.validate()?;
        if self.rule == RuleKind::Scad && !(self.scad_a > 2.0) {
            return Err(PlmError::InvalidParameter(format!("SCAD needs a > 2, got {}", self.scad_a)));
        }
        if let LambdaMode::Fixed(l) = self.lambda_mode {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(PlmError::InvalidParameter(format!("fixed lambda must be >= 0, got {l}")));
            }
        }
        if let SigmaMode::Fixed(s) = self.sigma_mode {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(PlmError::InvalidParameter(format!("fixed sigma must be >= 0, got {s}")));
            }
        }
        Ok(())
    }
}

/// Observations `(Y, X)` with their coefficient-domain images `(Z, A)`.
#[derive(Debug, Clone)]
pub struct DesignPair {
    pub y: Vec<f64>,
    pub x: DMatrix<f64>,
    pub z: Vec<f64>,
    pub a: DMatrix<f64>,
    pub j0: u32,
}

impl DesignPair {
    pub fn new(y: &[f64], x: &DMatrix<f64>, transform: &Transform, j0: u32) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n {
            return Err(PlmError::Dimension(format!("response has {n} rows, design has {}", x.nrows())));
        }
        dyadic_levels(n)?;
        let p = x.ncols();
        if p > 0 && p >= n / 2 {
            return Err(PlmError::Insufficient { rows: n / 2, cols: p });
        }
        Ok(Self {
            y: y.to_vec(),
            x: x.clone(),
            z: transform.forward(y, j0)?,
            a: transform.columns(x, j0)?,
            j0,
        })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn p(&self) -> usize {
        self.a.ncols()
    }

    /// Zero-based index of the first penalized coefficient.
    pub fn penalized_start(&self) -> usize {
        penalized_start(self.j0)
    }

    /// Finest detail level: the last `n / 2` rows.
    pub fn finest(&self) -> (DMatrix<f64>, &[f64]) {
        let n = self.n();
        (self.a.rows(n / 2, n / 2).into_owned(), &self.z[n / 2..])
    }

    pub fn penalized(&self) -> (DMatrix<f64>, &[f64]) {
        let start = self.penalized_start();
        let n = self.n();
        (self.a.rows(start, n - start).into_owned(), &self.z[start..])
    }

    pub fn sigma_qr(&self) -> Result<SigmaEstimate> {
        let (a_fine, z_fine) = self.finest();
        estimate_sigma_qr(&a_fine, z_fine)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlmFit {
    pub beta_hat: Vec<f64>,
    /// Estimated coefficients of `f`, flattened `[scaling | details]`.
    pub theta_hat: Vec<f64>,
    pub f_hat: Vec<f64>,
    pub sigma_hat: SigmaEstimate,
    pub lambda: f64,
    pub solver: SolverResult,
    pub j0: u32,
    pub penalized_start: usize,
    /// `max_i A_i^T (A^T A)^{-1} A_i`; zero when there is no design.
    pub max_leverage: f64,
}

impl PlmFit {
    /// `X beta_hat`.
    pub fn linear_part(&self, x: &DMatrix<f64>) -> Vec<f64> {
        if x.ncols() == 0 {
            return vec![0.0; x.nrows()];
        }
        (x * nalgebra::DVector::from_column_slice(&self.beta_hat)).iter().copied().collect()
    }
}

/// Serialized form of a fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDocument {
    pub schema_version: u32,
    pub n: usize,
    pub p: usize,
    pub filter: String,
    pub config: PlmConfig,
    #[serde(flatten)]
    pub fit: PlmFit,
}

impl FitDocument {
    pub fn new(fit: PlmFit, config: &PlmConfig, p: usize) -> Self {
        Self {
            schema_version: FIT_SCHEMA_VERSION,
            n: fit.theta_hat.len(),
            p,
            filter: config.filter.clone(),
            config: config.clone(),
            fit,
        }
    }
}

/// Value of the joint penalized criterion at `(beta, theta)`.
pub fn penalized_criterion(z: &[f64], a: &DMatrix<f64>, beta: &[f64], theta: &[f64], lambda: f64, start: usize) -> f64 {
    let r = if a.ncols() == 0 { z.to_vec() } else { residuals(a, z, beta) };
    let fit: f64 = r.iter().zip(theta).map(|(ri, ti)| 0.5 * (ri - ti).powi(2)).sum();
    let penalty: f64 = theta[start..].iter().map(|t| t.abs()).sum();
    fit + lambda * penalty
}

/// The minimizing `theta` for a fixed `beta` under a thresholding rule:
/// raw residuals on the scaling block, `gamma(r)` above it.
pub fn partial_theta(residuals: &[f64], start: usize, rule: Option<&ThresholdRule>) -> Vec<f64> {
    residuals
        .iter()
        .enumerate()
        .map(|(i, &r)| match rule {
            Some(rule) if i >= start => rule.apply(r),
            // lambda = 0 keeps everything
            _ => r,
        })
        .collect()
}

/// Soft-threshold version of [`partial_theta`] accepting `lambda = 0`.
pub fn soft_partial_theta(residuals: &[f64], start: usize, lambda: f64) -> Vec<f64> {
    residuals
        .iter()
        .enumerate()
        .map(|(i, &r)| if i >= start { soft_threshold(r, lambda) } else { r })
        .collect()
}

fn max_leverage(a: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 {
        return 0.0;
    }
    let q = a.clone().qr().q();
    q.row_iter().map(|row| row.norm_squared()).fold(0.0, f64::max)
}

/// Fits the model on raw observations.
pub fn fit_plm(y: &[f64], x: &DMatrix<f64>, config: &PlmConfig) -> Result<PlmFit> {
    config.validate()?;
    let transform = config.transform()?;
    let pair = DesignPair::new(y, x, &transform, config.j0)?;
    fit_design(&pair, config)
}

/// Fits the model on an already transformed pair.
pub fn fit_design(pair: &DesignPair, config: &PlmConfig) -> Result<PlmFit> {
    config.validate()?;
    let transform = config.transform()?;
    let n = pair.n();

    let sigma_hat = match config.sigma_mode {
        SigmaMode::QrMad => pair.sigma_qr()?,
        SigmaMode::Fixed(s) => SigmaEstimate {
            sigma_hat: s,
            method: SigmaMethod::Fixed,
            n_used: 1,
        },
    };
    let lambda = match config.lambda_mode {
        LambdaMode::Universal => universal_threshold(sigma_hat.sigma_hat, n),
        LambdaMode::Fixed(l) => l,
    };

    let start = pair.penalized_start();
    let (a_pen, z_pen) = pair.penalized();
    let (solver, rule) = if lambda > 0.0 {
        let rule = ThresholdRule::with_scad_a(config.rule, lambda, config.scad_a)?;
        let rho = RhoFamily::from_rule(&rule);
        (robust_fit(&a_pen, z_pen, &rho, &config.solver)?, Some(rule))
    } else {
        // zero threshold leaves beta unidentified; take OLS on every row,
        // which is also where backfitting starts and stays
        (ols_result(&pair.a, &pair.z)?, None)
    };

    let r = if pair.p() == 0 {
        pair.z.clone()
    } else {
        residuals(&pair.a, &pair.z, &solver.beta_hat)
    };
    let theta_hat = partial_theta(&r, start, rule.as_ref());
    let f_hat = transform.inverse(&theta_hat, pair.j0)?;

    Ok(PlmFit {
        beta_hat: solver.beta_hat.clone(),
        theta_hat,
        f_hat,
        sigma_hat,
        lambda,
        solver,
        j0: pair.j0,
        penalized_start: start,
        max_leverage: max_leverage(&pair.a),
    })
}

fn ols_result(a: &DMatrix<f64>, z: &[f64]) -> Result<SolverResult> {
    let started = std::time::Instant::now();
    let beta: Vec<f64> = if a.ncols() == 0 {
        Vec::new()
    } else {
        LeastSquares::new(a)?
            .solve(&nalgebra::DVector::from_column_slice(z))
            .iter()
            .copied()
            .collect()
    };
    let r = if a.ncols() == 0 { z.to_vec() } else { residuals(a, z, &beta) };
    let value: f64 = r.iter().map(|v| 0.5 * v * v).sum();
    Ok(SolverResult {
        beta_hat: beta,
        iterations: 0,
        converged: true,
        wall_time: started.elapsed().as_secs_f64(),
        criterion_value: value,
        last_change: 0.0,
        objective_trace: vec![value],
    })
}

/// Comparison of the two-step estimate with direct joint minimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub delta_beta: f64,
    pub delta_theta_inf: f64,
    pub criterion_two_step: f64,
    pub criterion_joint: f64,
    pub lambda: f64,
    pub joint_iterations: usize,
    pub joint_converged: bool,
}

/// Fits `(beta, theta)` with [`fit_plm`] and with coordinate descent on the
/// joint criterion (tolerance 1e-12), and reports the gap. Only meaningful
/// for the soft rule.
pub fn equivalence_check(y: &[f64], x: &DMatrix<f64>, config: &PlmConfig) -> Result<EquivalenceReport> {
    if config.rule != RuleKind::Soft {
        return Err(PlmError::InvalidParameter("equivalence holds for the soft rule only".into()));
    }
    let transform = config.transform()?;
    let pair = DesignPair::new(y, x, &transform, config.j0)?;
    let fit = fit_design(&pair, config)?;
    let start = pair.penalized_start();
    let joint = backfit_plm(
        &pair.z,
        &pair.a,
        start,
        &BackfitOptions {
            delta: 1e-12,
            max_iter: 200_000,
            lambda: fit.lambda,
        },
    )?;
    let delta_beta = fit
        .beta_hat
        .iter()
        .zip(&joint.beta_hat)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let delta_theta_inf = fit
        .theta_hat
        .iter()
        .zip(&joint.theta_hat)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(EquivalenceReport {
        delta_beta,
        delta_theta_inf,
        criterion_two_step: penalized_criterion(&pair.z, &pair.a, &fit.beta_hat, &fit.theta_hat, fit.lambda, start),
        criterion_joint: penalized_criterion(&pair.z, &pair.a, &joint.beta_hat, &joint.theta_hat, fit.lambda, start),
        lambda: fit.lambda,
        joint_iterations: joint.iterations,
        joint_converged: joint.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dwt::dwt_forward_flat;
    use crate::robust::Algorithm;
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_problem(seed: u64, n: usize, p: usize, noise: f64) -> (Vec<f64>, DMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |i, j| {
            let t = (i + 1) as f64 / n as f64;
            t.powi(j as i32 + 1) + Distribution::<f64>::sample(&StandardNormal, &mut rng)
        });
        let beta: Vec<f64> = (0..p).map(|j| 1.0 - 0.5 * j as f64).collect();
        let lin = if p == 0 {
            DVector::zeros(n)
        } else {
            &x * DVector::from_column_slice(&beta)
        };
        let y = (0..n)
            .map(|i| {
                let t = (i + 1) as f64 / n as f64;
                let f = if t < 0.4 { 1.0 } else { -0.5 } + (6.0 * t).sin();
                lin[i] + f + noise * Distribution::<f64>::sample(&StandardNormal, &mut rng)
            })
            .collect();
        (y, x, beta)
    }

    fn tight_legend() -> SolverOptions {
        SolverOptions::legend().with_delta(1e-14).with_max_iter(100_000)
    }

    #[test]
    fn noiseless_linear_model() {
        let (_, x, beta) = random_problem(1, 64, 2, 0.0);
        let y: Vec<f64> = (&x * DVector::from_column_slice(&beta)).iter().copied().collect();
        for alg in [Algorithm::Artur, Algorithm::Legend] {
            let config = PlmConfig::default()
                .with_solver(SolverOptions::for_algorithm(alg))
                .with_sigma(SigmaMode::Fixed(0.3));
            let fit = fit_plm(&y, &x, &config).unwrap();
            for (b, t) in fit.beta_hat.iter().zip(&beta) {
                assert!((b - t).abs() < 1e-8);
            }
            assert!(fit.theta_hat[fit.penalized_start..].iter().all(|t| *t == 0.0));
            assert!(fit.f_hat.iter().all(|v| v.abs() < 1e-8));
        }
        // also with the estimated sigma (which is ~0 here)
        let fit = fit_plm(&y, &x, &PlmConfig::default()).unwrap();
        assert!(fit.sigma_hat.sigma_hat < 1e-10);
        for (b, t) in fit.beta_hat.iter().zip(&beta) {
            assert!((b - t).abs() < 1e-8);
        }
    }

    #[test]
    fn no_design_is_plain_denoising() {
        let (y, _, _) = random_problem(2, 128, 0, 0.4);
        let x = DMatrix::zeros(128, 0);
        let fit = fit_plm(&y, &x, &PlmConfig::default()).unwrap();

        let filter = WaveletFilter::sym8();
        let z = dwt_forward_flat(&y, &filter, DEFAULT_J0).unwrap();
        let sigma = crate::threshold::mad_sigma(&z[64..]).unwrap();
        let lambda = universal_threshold(sigma, 128);
        let theta = soft_partial_theta(&z, 8, lambda);
        let f = crate::dwt::dwt_inverse_flat(&theta, &filter, DEFAULT_J0).unwrap();
        assert_eq!(fit.lambda, lambda);
        assert!(fit.beta_hat.is_empty());
        for (a, b) in fit.f_hat.iter().zip(&f) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_structure() {
        let (y, x, _) = random_problem(3, 128, 1, 0.5);
        let fit = fit_plm(&y, &x, &PlmConfig::default()).unwrap();
        let pair = DesignPair::new(&y, &x, &Transform::Wavelet(WaveletFilter::sym8()), DEFAULT_J0).unwrap();
        let r = residuals(&pair.a, &pair.z, &fit.beta_hat);
        for i in 0..128 {
            if i < fit.penalized_start {
                assert_eq!(fit.theta_hat[i], r[i]);
            } else {
                assert_eq!(fit.theta_hat[i], soft_threshold(r[i], fit.lambda));
            }
        }
        let back = crate::dwt::dwt_inverse_flat(&fit.theta_hat, &WaveletFilter::sym8(), DEFAULT_J0).unwrap();
        assert_eq!(back, fit.f_hat);
        assert!(fit.max_leverage > 0.0 && fit.max_leverage <= 1.0 + 1e-12);
    }

    #[test]
    fn equivalence_small_instance() {
        let (y, x, _) = random_problem(4, 32, 1, 0.5);
        let config = PlmConfig::default()
            .with_lambda(LambdaMode::Fixed(1.0))
            .with_j0(2)
            .with_solver(tight_legend());
        let report = equivalence_check(&y, &x, &config).unwrap();
        assert!(report.delta_beta < 1e-6, "{report:?}");
        assert!(report.delta_theta_inf < 1e-6, "{report:?}");
        assert!((report.criterion_two_step - report.criterion_joint).abs() < 1e-9);
    }

    #[test]
    fn equivalence_zero_lambda() {
        let (y, x, _) = random_problem(5, 32, 2, 0.5);
        let config = PlmConfig::default().with_lambda(LambdaMode::Fixed(0.0)).with_j0(2);
        let report = equivalence_check(&y, &x, &config).unwrap();
        assert!(report.delta_beta < 1e-12, "{report:?}");
        assert!(report.delta_theta_inf < 1e-12, "{report:?}");
    }

    #[test]
    fn equivalence_huge_lambda() {
        let (y, x, _) = random_problem(6, 32, 1, 0.5);
        let z = dwt_forward_flat(&y, &WaveletFilter::sym8(), 2).unwrap();
        let big = 10.0 * z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let config = PlmConfig::default()
            .with_lambda(LambdaMode::Fixed(big))
            .with_j0(2)
            .with_solver(tight_legend());
        let report = equivalence_check(&y, &x, &config).unwrap();
        assert!(report.delta_beta < 1e-6 && report.delta_theta_inf < 1e-6, "{report:?}");

        // oracle: OLS on the penalized rows; no detail coefficient survives
        let fit = fit_plm(&y, &x, &config).unwrap();
        let pair = DesignPair::new(&y, &x, &Transform::Wavelet(WaveletFilter::sym8()), 2).unwrap();
        let (a_pen, z_pen) = pair.penalized();
        let ols = LeastSquares::new(&a_pen).unwrap().solve(&DVector::from_column_slice(z_pen));
        assert!((fit.beta_hat[0] - ols[0]).abs() < 1e-8);
        assert!(fit.theta_hat[4..].iter().all(|t| *t == 0.0));
    }

    #[test]
    fn partial_minimizer_is_optimal() {
        let (y, x, _) = random_problem(7, 64, 2, 0.5);
        let config = PlmConfig::default().with_lambda(LambdaMode::Fixed(0.8));
        let pair = DesignPair::new(&y, &x, &config.transform().unwrap(), config.j0).unwrap();
        // arbitrary beta: the theta step must still be a minimizer
        let beta = [0.3, -1.1];
        let r = residuals(&pair.a, &pair.z, &beta);
        let theta = soft_partial_theta(&r, 8, 0.8);
        let base = penalized_criterion(&pair.z, &pair.a, &beta, &theta, 0.8, 8);
        for i in 0..64 {
            for step in [1e-4, -1e-4] {
                let mut moved = theta.clone();
                moved[i] += step;
                let value = penalized_criterion(&pair.z, &pair.a, &beta, &moved, 0.8, 8);
                assert!(value >= base - 1e-15, "coefficient {i}");
            }
        }
    }

    #[test]
    fn fit_not_worse_than_ols_start() {
        let (y, x, _) = random_problem(8, 128, 2, 0.5);
        let config = PlmConfig::default();
        let pair = DesignPair::new(&y, &x, &config.transform().unwrap(), config.j0).unwrap();
        let fit = fit_design(&pair, &config).unwrap();
        let (a_pen, z_pen) = pair.penalized();
        let ols: Vec<f64> = LeastSquares::new(&a_pen)
            .unwrap()
            .solve(&DVector::from_column_slice(z_pen))
            .iter()
            .copied()
            .collect();
        let start_theta = soft_partial_theta(&residuals(&pair.a, &pair.z, &ols), 8, fit.lambda);
        let at_start = penalized_criterion(&pair.z, &pair.a, &ols, &start_theta, fit.lambda, 8);
        let at_fit = penalized_criterion(&pair.z, &pair.a, &fit.beta_hat, &fit.theta_hat, fit.lambda, 8);
        assert!(at_fit <= at_start + 1e-12);
    }

    #[test]
    fn pretransformed_data_with_identity() {
        let (y, x, _) = random_problem(9, 128, 2, 0.5);
        let config = PlmConfig::default();
        let fit = fit_plm(&y, &x, &config).unwrap();
        let pair = DesignPair::new(&y, &x, &config.transform().unwrap(), config.j0).unwrap();
        let identity = config.clone().with_filter("identity");
        let fit_id = fit_plm(&pair.z, &pair.a, &identity).unwrap();
        for (a, b) in fit.beta_hat.iter().zip(&fit_id.beta_hat) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(fit.theta_hat, fit_id.theta_hat);
    }

    #[test]
    fn input_errors() {
        let x = DMatrix::from_element(48, 1, 1.0);
        assert!(matches!(fit_plm(&[0.0; 48], &x, &PlmConfig::default()), Err(PlmError::NotPowerOfTwo(48))));
        let x = DMatrix::from_element(32, 16, 1.0);
        assert!(fit_plm(&[0.0; 32], &x, &PlmConfig::default()).is_err());
        let x = DMatrix::from_element(32, 1, 1.0);
        assert!(fit_plm(&[0.0; 16], &x, &PlmConfig::default()).is_err());
        let bad = PlmConfig::default().with_filter("nope");
        assert!(fit_plm(&[0.0; 32], &x, &bad).is_err());
    }

    #[test]
    fn fit_document_has_schema_version() {
        let (y, x, _) = random_problem(10, 32, 1, 0.5);
        let config = PlmConfig::default().with_j0(2);
        let fit = fit_plm(&y, &x, &config).unwrap();
        let doc = FitDocument::new(fit.clone(), &config, 1);
        let json = serde_json::to_value(&doc).unwrap();
        assert_eq!(json["schema_version"], 1);
        assert_eq!(json["beta_hat"].as_array().unwrap().len(), 1);
        assert_eq!(json["sigma_hat"]["method"], "mad_qr");
        let back: FitDocument = serde_json::from_value(json).unwrap();
        assert_eq!(back.fit, fit);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn two_step_matches_joint_minimum(seed in 0u64..10_000, p in 1usize..3, lambda in 0.2f64..3.0) {
            let (y, x, _) = random_problem(seed, 32, p, 0.5);
            let config = PlmConfig::default()
                .with_lambda(LambdaMode::Fixed(lambda))
                .with_j0(2)
                .with_solver(tight_legend());
            let report = equivalence_check(&y, &x, &config).unwrap();
            prop_assert!(report.delta_beta < 1e-6, "{:?}", report);
            prop_assert!(report.delta_theta_inf < 1e-6, "{:?}", report);
        }
    }
}
