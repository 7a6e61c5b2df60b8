//! Element-wise sampling laws.

use serde::{Deserialize, Serialize};

use crate::error::{check_alpha, Error, Result};
use crate::linalg::{frob_norm_sq, l1_norm, truncated_svd, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS};
use crate::matrix::Matrix;
use crate::rng::SeededRng;

/// A per-entry probability law over an `m×n` index set.
pub trait ElementDistribution {
    fn shape(&self) -> (usize, usize);
    fn prob(&self, i: usize, j: usize) -> f64;
    /// Value the sketch rescales at `(i, j)`; differs from `A_ij` only for
    /// laws that modify the matrix first.
    fn value(&self, i: usize, j: usize) -> f64;
}

/// `p_ij = α|A_ij|/‖A‖₁ + (1−α)A_ij²/‖A‖_F²` with `α ∈ (0, 1]`.
#[derive(Clone, Debug)]
pub struct HybridDistribution<'a> {
    matrix: &'a Matrix,
    alpha: f64,
    l1_total: f64,
    frob_sq: f64,
}

impl<'a> HybridDistribution<'a> {
    pub fn new(matrix: &'a Matrix, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let l1_total = l1_norm(matrix);
        if l1_total == 0.0 {
            return Err(Error::ZeroMatrix);
        }
        Ok(Self {
            matrix,
            alpha,
            l1_total,
            frob_sq: frob_norm_sq(matrix),
        })
    }

    /// Reuses precomputed norms (they must be those of `matrix`).
    pub fn with_norms(matrix: &'a Matrix, alpha: f64, l1_total: f64, frob_sq: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(l1_total > 0.0) {
            return Err(Error::ZeroMatrix);
        }
        Ok(Self {
            matrix,
            alpha,
            l1_total,
            frob_sq,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn l1_total(&self) -> f64 {
        self.l1_total
    }

    pub fn frob_sq(&self) -> f64 {
        self.frob_sq
    }

    pub fn matrix(&self) -> &Matrix {
        self.matrix
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        hybrid_prob_value(self.matrix.get(i, j), self.alpha, self.l1_total, self.frob_sq)
    }
}

impl ElementDistribution for HybridDistribution<'_> {
    fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }
    fn prob(&self, i: usize, j: usize) -> f64 {
        HybridDistribution::prob(self, i, j)
    }
    fn value(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }
}

/// Hybrid probability of a single value given the two norms.
#[inline]
pub fn hybrid_prob_value(v: f64, alpha: f64, l1_total: f64, frob_sq: f64) -> f64 {
    alpha * v.abs() / l1_total + (1.0 - alpha) * v * v / frob_sq
}

pub fn hybrid_prob(d: &HybridDistribution<'_>, i: usize, j: usize) -> f64 {
    d.prob(i, j)
}

pub fn l1_prob(a: &Matrix, i: usize, j: usize) -> Result<f64> {
    let t = l1_norm(a);
    if t == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(a.get(i, j).abs() / t)
}

pub fn l2_prob(a: &Matrix, i: usize, j: usize) -> Result<f64> {
    let t = frob_norm_sq(a);
    if t == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let v = a.get(i, j);
    Ok(v * v / t)
}

/// `λ = ‖A‖₁|A_ij|/‖A‖_F²`.
pub fn lambda_of(a: &Matrix, i: usize, j: usize) -> Result<f64> {
    let v = a.get(i, j);
    if v == 0.0 {
        return Err(Error::ZeroEntry { row: i, col: j });
    }
    Ok(l1_norm(a) * v.abs() / frob_norm_sq(a))
}

/// Pure ℓ2 sampling, optionally after zeroing entries with `|A_ij| < threshold`.
/// This is the comparison baseline; it sits outside the hybrid family.
#[derive(Clone, Debug)]
pub struct L2Baseline<'a> {
    matrix: &'a Matrix,
    threshold: f64,
    kept_frob_sq: f64,
}

impl<'a> L2Baseline<'a> {
    pub fn new(matrix: &'a Matrix) -> Result<Self> {
        Self::truncated(matrix, 0.0)
    }

    pub fn truncated(matrix: &'a Matrix, threshold: f64) -> Result<Self> {
        if !(threshold >= 0.0) || !threshold.is_finite() {
            return Err(Error::InvalidParameter(format!("truncation threshold {threshold}")));
        }
        let kept_frob_sq: f64 = matrix
            .as_slice()
            .iter()
            .filter(|x| x.abs() >= threshold)
            .map(|x| x * x)
            .sum();
        if kept_frob_sq == 0.0 {
            return Err(Error::ZeroMatrix);
        }
        Ok(Self {
            matrix,
            threshold,
            kept_frob_sq,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl ElementDistribution for L2Baseline<'_> {
    fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }
    fn prob(&self, i: usize, j: usize) -> f64 {
        let v = self.value(i, j);
        v * v / self.kept_frob_sq
    }
    fn value(&self, i: usize, j: usize) -> f64 {
        let v = self.matrix.get(i, j);
        if v.abs() >= self.threshold {
            v
        } else {
            0.0
        }
    }
}

/// Element-wise leverage law `p = (μ_i + ν_j)/((m+n)ρ)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeverageDistribution {
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub rank: usize,
}

impl LeverageDistribution {
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        let m = self.mu.len();
        let n = self.nu.len();
        (self.mu[i] + self.nu[j]) / (((m + n) * self.rank) as f64)
    }
}

/// Leverage law bound to the matrix it samples from.
pub struct LeverageSampling<'a> {
    pub matrix: &'a Matrix,
    pub scores: LeverageDistribution,
}

impl ElementDistribution for LeverageSampling<'_> {
    fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }
    fn prob(&self, i: usize, j: usize) -> f64 {
        self.scores.prob(i, j)
    }
    fn value(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }
}

/// Row and column leverage scores from the rank-`rho` SVD of `a`.
pub fn leverage_probs(a: &Matrix, rho: usize, rng: &mut SeededRng) -> Result<LeverageDistribution> {
    a.check_valid()?;
    let svd = truncated_svd(a, rho, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS, rng)?;
    let row_norms = |q: &Matrix| -> Vec<f64> {
        (0..q.rows())
            .map(|i| q.row(i).iter().map(|x| x * x).sum())
            .collect()
    };
    Ok(LeverageDistribution {
        mu: row_norms(&svd.u),
        nu: row_norms(&svd.v),
        rank: rho,
    })
}

/// Which law a sampling plan draws from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum SamplingLaw {
    L1,
    L2,
    L2Truncated { threshold: f64 },
    Hybrid { alpha: f64 },
    Leverage { rank: usize },
}

impl SamplingLaw {
    pub fn name(&self) -> &'static str {
        match self {
            SamplingLaw::L1 => "l1",
            SamplingLaw::L2 => "l2",
            SamplingLaw::L2Truncated { .. } => "l2t",
            SamplingLaw::Hybrid { .. } => "hybrid",
            SamplingLaw::Leverage { .. } => "leverage",
        }
    }

    /// Mixing weight where one applies (`1` for ℓ1, `0` for ℓ2 baselines).
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            SamplingLaw::L1 => Some(1.0),
            SamplingLaw::L2 | SamplingLaw::L2Truncated { .. } => Some(0.0),
            SamplingLaw::Hybrid { alpha } => Some(alpha),
            SamplingLaw::Leverage { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SamplingLaw::Hybrid { alpha } => check_alpha(alpha),
            SamplingLaw::L2Truncated { threshold } if !(threshold >= 0.0) || !threshold.is_finite() => Err(
                Error::InvalidParameter(format!("truncation threshold {threshold}")),
            ),
            SamplingLaw::Leverage { rank: 0 } => Err(Error::RankTooLarge { k: 0, max: 0 }),
            _ => Ok(()),
        }
    }
}
