//! Thresholding rules and noise-level estimation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PlmError, Result};

/// Normalising constant turning the MAD into a Gaussian sd estimate.
pub const MAD_CONSTANT: f64 = 0.6745;

/// Default SCAD shape parameter.
pub const DEFAULT_SCAD_A: f64 = 3.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Soft,
    Hard,
    Scad,
}

impl std::str::FromStr for RuleKind {
    type Err = PlmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "soft" => Ok(Self::Soft),
            "hard" => Ok(Self::Hard),
            "scad" => Ok(Self::Scad),
            other => Err(PlmError::InvalidParameter(format!("unknown threshold rule `{other}`"))),
        }
    }
}

/// A thresholding function `gamma_lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    kind: RuleKind,
    lambda: f64,
    scad_a: f64,
}

impl ThresholdRule {
    pub fn new(kind: RuleKind, lambda: f64) -> Result<Self> {
        Self::with_scad_a(kind, lambda, DEFAULT_SCAD_A)
    }

    pub fn with_scad_a(kind: RuleKind, lambda: f64, scad_a: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(PlmError::InvalidParameter(format!("threshold must be positive, got {lambda}")));
        }
        if kind == RuleKind::Scad && !(scad_a > 2.0) {
            return Err(PlmError::InvalidParameter(format!("SCAD needs a > 2, got {scad_a}")));
        }
        Ok(Self { kind, lambda, scad_a })
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn scad_a(&self) -> f64 {
        self.scad_a
    }

    pub fn apply(&self, u: f64) -> f64 {
        match self.kind {
            RuleKind::Soft => soft_threshold(u, self.lambda),
            RuleKind::Hard => hard_threshold(u, self.lambda),
            RuleKind::Scad => scad_threshold(u, self.lambda, self.scad_a),
        }
    }
}

/// `sign(u) * max(|u| - lambda, 0)`.
pub fn soft_threshold(u: f64, lambda: f64) -> f64 {
    let shrunk = u.abs() - lambda;
    if shrunk > 0.0 {
        shrunk.copysign(u)
    } else {
        0.0
    }
}

/// Keeps `u` when `|u| > lambda`, zero otherwise.
pub fn hard_threshold(u: f64, lambda: f64) -> f64 {
    if u.abs() > lambda {
        u
    } else {
        0.0
    }
}

/// Three-piece SCAD rule: soft below `2 lambda`, identity above
/// `a lambda`, linear interpolation in between.
pub fn scad_threshold(u: f64, lambda: f64, a: f64) -> f64 {
    let abs = u.abs();
    if abs <= 2.0 * lambda {
        soft_threshold(u, lambda)
    } else if abs <= a * lambda {
        ((a - 1.0) * u - (a * lambda).copysign(u)) / (a - 2.0)
    } else {
        u
    }
}

/// `sigma * sqrt(2 ln n)`.
pub fn universal_threshold(sigma: f64, n: usize) -> f64 {
    sigma * (2.0 * (n as f64).ln()).sqrt()
}

/// Median with the midpoint convention for even counts. NaNs sort last.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(PlmError::Empty("median of an empty vector"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Ok(if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    })
}

/// `median(|v - median(v)|) / 0.6745`.
pub fn mad_sigma(v: &[f64]) -> Result<f64> {
    let center = median(v)?;
    let deviations: Vec<f64> = v.iter().map(|x| (x - center).abs()).collect();
    Ok(median(&deviations)? / MAD_CONSTANT)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMethod {
    /// MAD of the finest detail coefficients as they are.
    MadFinest,
    /// MAD after projecting out the design columns with a QR factorization.
    MadQr,
    /// Supplied by the caller.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub sigma_hat: f64,
    pub method: SigmaMethod,
    pub n_used: usize,
}

/// Plain MAD estimate on the finest detail coefficients.
pub fn estimate_sigma_finest(z_fine: &[f64]) -> Result<SigmaEstimate> {
    Ok(SigmaEstimate {
        sigma_hat: mad_sigma(z_fine)?,
        method: SigmaMethod::MadFinest,
        n_used: z_fine.len(),
    })
}

/// MAD of the last `m - p` entries of `Q^T z_fine`, where
/// `A_fine = Q [R; 0]` is a full QR factorization.
///
/// Those entries span the orthogonal complement of `A_fine`'s columns, so
/// any contribution `A_fine b` to `z_fine` cancels out.
pub fn estimate_sigma_qr(a_fine: &DMatrix<f64>, z_fine: &[f64]) -> Result<SigmaEstimate> {
    let (m, p) = a_fine.shape();
    if z_fine.len() != m {
        return Err(PlmError::Dimension(format!(
            "response has {} finest coefficients, design has {m} rows",
            z_fine.len()
        )));
    }
    if p == 0 {
        return Ok(SigmaEstimate {
            method: SigmaMethod::MadQr,
            ..estimate_sigma_finest(z_fine)?
        });
    }
    if m <= p {
        return Err(PlmError::Insufficient { rows: m, cols: p });
    }
    let qr = a_fine.clone().qr();
    let tol = 1e-10 * a_fine.norm();
    let r = qr.r();
    if let Some(k) = (0..p).find(|&k| r[(k, k)].abs() <= tol) {
        return Err(PlmError::RankDeficient(format!(
            "finest-level design block, column {k} (|R_kk| = {:e})",
            r[(k, k)].abs()
        )));
    }
    let mut rotated = DVector::from_column_slice(z_fine);
    qr.q_tr_mul(&mut rotated);
    let tail: Vec<f64> = rotated.iter().skip(p).copied().collect();
    Ok(SigmaEstimate {
        sigma_hat: mad_sigma(&tail)?,
        method: SigmaMethod::MadQr,
        n_used: tail.len(),
    })
}
