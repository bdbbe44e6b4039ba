//! Robust cost functions and the half-quadratic solvers for
//! `min_beta sum_i rho(z_i - A_i^T beta)`.
//!
//! Each cost `rho` is the primitive of `u - gamma(u)` for a thresholding
//! rule `gamma`: soft thresholding pairs with Huber's cost, hard
//! thresholding with a truncated quadratic, SCAD with Hampel's redescending
//! cost.
//!
//! Two solvers are provided. ARTUR (iteratively reweighted least squares)
//! solves a weighted least-squares problem with weights `psi(r)/r` at every
//! step and so refactors `A^T C A` each time. LEGEND (iterative modified
//! residuals) subtracts `c = r - psi(r)` from the response and reuses one
//! factorization of `A`. Both start from the OLS fit and stop when
//! `||beta_new - beta|| / ||beta|| < delta`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PlmError, Result};
use crate::threshold::{RuleKind, ThresholdRule, DEFAULT_SCAD_A};

/// Huber cost: `u^2/2` inside `[-lambda, lambda]`, `lambda |u| - lambda^2/2` outside.
pub fn huber_rho(u: f64, lambda: f64) -> f64 {
    let abs = u.abs();
    if abs <= lambda {
        0.5 * u * u
    } else {
        lambda * abs - 0.5 * lambda * lambda
    }
}

pub fn huber_psi(u: f64, lambda: f64) -> f64 {
    u.clamp(-lambda, lambda)
}

/// `min(1, lambda / |r|)`, with `1` at the origin.
pub fn huber_weight(r: f64, lambda: f64) -> f64 {
    let abs = r.abs();
    if abs <= lambda {
        1.0
    } else {
        lambda / abs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoKind {
    Huber,
    TruncatedQuadratic,
    HampelScad,
}

impl RhoKind {
    /// The cost paired with a thresholding rule.
    pub fn for_rule(rule: RuleKind) -> Self {
        match rule {
            RuleKind::Soft => RhoKind::Huber,
            RuleKind::Hard => RhoKind::TruncatedQuadratic,
            RuleKind::Scad => RhoKind::HampelScad,
        }
    }

    pub fn rule(self) -> RuleKind {
        match self {
            RhoKind::Huber => RuleKind::Soft,
            RhoKind::TruncatedQuadratic => RuleKind::Hard,
            RhoKind::HampelScad => RuleKind::Scad,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoFamily {
    kind: RhoKind,
    lambda: f64,
    scad_a: f64,
}

impl RhoFamily {
    pub fn new(kind: RhoKind, lambda: f64) -> Result<Self> {
        Self::with_scad_a(kind, lambda, DEFAULT_SCAD_A)
    }

    pub fn with_scad_a(kind: RhoKind, lambda: f64, scad_a: f64) -> Result<Self> {
        // validation is shared with the paired rule
        ThresholdRule::with_scad_a(kind.rule(), lambda, scad_a)?;
        Ok(Self { kind, lambda, scad_a })
    }

    pub fn huber(lambda: f64) -> Result<Self> {
        Self::new(RhoKind::Huber, lambda)
    }

    pub fn from_rule(rule: &ThresholdRule) -> Self {
        Self {
            kind: RhoKind::for_rule(rule.kind()),
            lambda: rule.lambda(),
            scad_a: rule.scad_a(),
        }
    }

    pub fn kind(&self) -> RhoKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn threshold_rule(&self) -> ThresholdRule {
        ThresholdRule::with_scad_a(self.kind.rule(), self.lambda, self.scad_a).expect("validated on construction")
    }

    pub fn rho(&self, u: f64) -> f64 {
        let l = self.lambda;
        let abs = u.abs();
        match self.kind {
            RhoKind::Huber => huber_rho(u, l),
            RhoKind::TruncatedQuadratic => 0.5 * abs.min(l).powi(2),
            RhoKind::HampelScad => {
                let a = self.scad_a;
                if abs <= 2.0 * l {
                    huber_rho(u, l)
                } else if abs <= a * l {
                    1.5 * l * l + (a * l * (abs - 2.0 * l) - 0.5 * (abs * abs - 4.0 * l * l)) / (a - 2.0)
                } else {
                    0.5 * (a + 1.0) * l * l
                }
            }
        }
    }

    /// Derivative of `rho`; equals `u - gamma(u)`.
    pub fn psi(&self, u: f64) -> f64 {
        let l = self.lambda;
        let abs = u.abs();
        match self.kind {
            RhoKind::Huber => huber_psi(u, l),
            RhoKind::TruncatedQuadratic => {
                if abs <= l {
                    u
                } else {
                    0.0
                }
            }
            RhoKind::HampelScad => {
                let a = self.scad_a;
                if abs <= 2.0 * l {
                    huber_psi(u, l)
                } else if abs <= a * l {
                    ((a * l - abs) / (a - 2.0)).copysign(u)
                } else {
                    0.0
                }
            }
        }
    }

    /// `psi(r) / r`, taking the limit `1` at `r = 0`.
    pub fn weight(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 1.0;
        }
        match self.kind {
            RhoKind::Huber => huber_weight(r, self.lambda),
            _ => (self.psi(r) / r).clamp(0.0, 1.0),
        }
    }

    /// The LEGEND auxiliary variable `r - psi(r)`; this is `gamma(r)`.
    pub fn modified_residual(&self, r: f64) -> f64 {
        r - self.psi(r)
    }

    pub fn objective(&self, residuals: &[f64]) -> f64 {
        residuals.iter().map(|&r| self.rho(r)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Artur,
    Legend,
}

impl std::str::FromStr for Algorithm {
    type Err = PlmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "artur" | "irls" => Ok(Self::Artur),
            "legend" | "imr" => Ok(Self::Legend),
            other => Err(PlmError::InvalidParameter(format!("unknown solver `{other}`"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Artur => "artur",
            Algorithm::Legend => "legend",
        })
    }
}

pub const DEFAULT_MAX_ITER: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub delta: f64,
    pub max_iter: usize,
    pub algorithm: Algorithm,
}

impl SolverOptions {
    pub fn artur() -> Self {
        Self {
            delta: 1e-5,
            max_iter: DEFAULT_MAX_ITER,
            algorithm: Algorithm::Artur,
        }
    }

    pub fn legend() -> Self {
        Self {
            delta: 1e-10,
            max_iter: DEFAULT_MAX_ITER,
            algorithm: Algorithm::Legend,
        }
    }

    /// Defaults for `algorithm`.
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Artur => Self::artur(),
            Algorithm::Legend => Self::legend(),
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(PlmError::InvalidParameter(format!("delta must be positive, got {}", self.delta)));
        }
        if self.max_iter == 0 {
            return Err(PlmError::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self::legend()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub beta_hat: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Seconds spent in the solver, OLS start included.
    pub wall_time: f64,
    pub criterion_value: f64,
    /// Relative change of the last update.
    pub last_change: f64,
    /// `sum rho(r)` at the start and after every update.
    pub objective_trace: Vec<f64>,
}

/// Least-squares solver backed by one QR factorization of a full-rank `A`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl LeastSquares {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let (m, p) = a.shape();
        if m < p {
            return Err(PlmError::Insufficient { rows: m, cols: p });
        }
        let qr = a.clone().qr();
        let r = qr.r();
        let tol = 1e-10 * a.norm();
        if let Some(k) = (0..p).find(|&k| r[(k, k)].abs() <= tol) {
            return Err(PlmError::RankDeficient(format!("design column {k}")));
        }
        Ok(Self { q: qr.q(), r })
    }

    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let qty = self.q.tr_mul(y);
        self.r
            .solve_upper_triangular(&qty)
            .expect("triangular factor checked non-singular")
    }
}

/// `||sum_i psi(r_i) A_i||_2` at `beta`.
pub fn stationarity_norm(a: &DMatrix<f64>, z: &[f64], rho: &RhoFamily, beta: &[f64]) -> f64 {
    let r = residuals(a, z, beta);
    let psi = DVector::from_iterator(r.len(), r.iter().map(|&v| rho.psi(v)));
    a.tr_mul(&psi).norm()
}

pub fn residuals(a: &DMatrix<f64>, z: &[f64], beta: &[f64]) -> Vec<f64> {
    let fitted = a * DVector::from_column_slice(beta);
    z.iter().zip(fitted.iter()).map(|(zi, fi)| zi - fi).collect()
}

fn relative_change(new: &DVector<f64>, old: &DVector<f64>) -> f64 {
    let diff = (new - old).norm();
    let base = old.norm();
    if base < 1e-12 {
        diff
    } else {
        diff / base
    }
}

fn check_problem(a: &DMatrix<f64>, z: &[f64], opts: &SolverOptions) -> Result<()> {
    opts.validate()?;
    if a.nrows() != z.len() {
        return Err(PlmError::Dimension(format!(
            "design has {} rows, response has {} entries",
            a.nrows(),
            z.len()
        )));
    }
    Ok(())
}

fn trivial_result(z: &[f64], rho: &RhoFamily, start: Instant) -> SolverResult {
    let value = rho.objective(z);
    SolverResult {
        beta_hat: Vec::new(),
        iterations: 0,
        converged: true,
        wall_time: start.elapsed().as_secs_f64(),
        criterion_value: value,
        last_change: 0.0,
        objective_trace: vec![value],
    }
}

/// Runs the solver selected in `opts`.
pub fn robust_fit(a: &DMatrix<f64>, z: &[f64], rho: &RhoFamily, opts: &SolverOptions) -> Result<SolverResult> {
    match opts.algorithm {
        Algorithm::Artur => artur_fit(a, z, rho, opts),
        Algorithm::Legend => legend_fit(a, z, rho, opts),
    }
}

/// Multiplicative half-quadratic form (IRLS).
pub fn artur_fit(a: &DMatrix<f64>, z: &[f64], rho: &RhoFamily, opts: &SolverOptions) -> Result<SolverResult> {
    let start = Instant::now();
    check_problem(a, z, opts)?;
    let (m, p) = a.shape();
    if p == 0 {
        return Ok(trivial_result(z, rho, start));
    }
    let zv = DVector::from_column_slice(z);
    let mut beta = LeastSquares::new(a)?.solve(&zv);
    let mut r = &zv - a * &beta;
    let mut trace = vec![rho.objective(r.as_slice())];
    let mut iterations = 0;
    let mut converged = false;
    let mut change = f64::INFINITY;
    let mut weighted = DMatrix::zeros(m, p);

    while iterations < opts.max_iter {
        // scale each row of A by its weight: C A
        for (i, &ri) in r.iter().enumerate() {
            let w = rho.weight(ri);
            for j in 0..p {
                weighted[(i, j)] = w * a[(i, j)];
            }
        }
        let normal = weighted.tr_mul(a);
        let rhs = weighted.tr_mul(&zv);
        let next = normal
            .cholesky()
            .ok_or(PlmError::Singular("weighted normal equations"))?
            .solve(&rhs);
        iterations += 1;
        change = relative_change(&next, &beta);
        beta = next;
        r = &zv - a * &beta;
        trace.push(rho.objective(r.as_slice()));
        if change < opts.delta {
            converged = true;
            break;
        }
    }

    Ok(SolverResult {
        beta_hat: beta.iter().copied().collect(),
        iterations,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
        criterion_value: *trace.last().expect("trace is non-empty"),
        last_change: change,
        objective_trace: trace,
    })
}

/// Additive half-quadratic form (modified residuals).
pub fn legend_fit(a: &DMatrix<f64>, z: &[f64], rho: &RhoFamily, opts: &SolverOptions) -> Result<SolverResult> {
    let start = Instant::now();
    check_problem(a, z, opts)?;
    if a.ncols() == 0 {
        return Ok(trivial_result(z, rho, start));
    }
    let zv = DVector::from_column_slice(z);
    let ls = LeastSquares::new(a)?;
    let mut beta = ls.solve(&zv);
    let mut r = &zv - a * &beta;
    let mut trace = vec![rho.objective(r.as_slice())];
    let mut iterations = 0;
    let mut converged = false;
    let mut change = f64::INFINITY;
    let mut target = zv.clone();

    while iterations < opts.max_iter {
        for ((t, &zi), &ri) in target.iter_mut().zip(zv.iter()).zip(r.iter()) {
            *t = zi - rho.modified_residual(ri);
        }
        let next = ls.solve(&target);
        iterations += 1;
        change = relative_change(&next, &beta);
        beta = next;
        r = &zv - a * &beta;
        trace.push(rho.objective(r.as_slice()));
        if change < opts.delta {
            converged = true;
            break;
        }
    }

    Ok(SolverResult {
        beta_hat: beta.iter().copied().collect(),
        iterations,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
        criterion_value: *trace.last().expect("trace is non-empty"),
        last_change: change,
        objective_trace: trace,
    })
}
