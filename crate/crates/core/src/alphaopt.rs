//! Sample-size bound terms and the search for the optimal mixing weight.
//!
//! For `α ∈ (0, 1]` the bound uses
//! `ξ_ij = ‖A‖_F² / (α‖A‖_F²/(|A_ij|‖A‖₁) + 1 − α)`,
//! `ρ²(α) = max(max_i Σ_j ξ_ij, max_j Σ_i ξ_ij) − σ_min²`,
//! `γ(α) = max_ij ‖A‖₁/(α + (1−α)λ_ij) + ‖A‖₂` and
//! `f(α) = ρ²(α) + γ(α)ε‖A‖₂/3`. The sample count is
//! `s* = ⌈2 f(α*) ln((m+n)/δ) / (ε²‖A‖₂²)⌉`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_alpha, Error, Result};
use crate::linalg::{frob_norm_sq, l1_norm, sigma_min, spectral_norm, POWER_MAX_ITER, POWER_TOL};
use crate::matrix::{Matrix, SparseSketch};
use crate::rng::SeededRng;
use crate::sparsifier::sketch_error;

/// Left end of the α search interval.
pub const ALPHA_MIN: f64 = 1e-3;
pub const DEFAULT_GRID_SIZE: usize = 64;
/// Golden-section refinement stops at this bracket width.
pub const ALPHA_TOL: f64 = 1e-4;

/// Matrix-level quantities the bound needs, plus the target `(ε, δ)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundInputs {
    pub rows: usize,
    pub cols: usize,
    pub spectral: f64,
    pub frob_sq: f64,
    pub l1_total: f64,
    pub sigma_min: f64,
    pub epsilon: f64,
    pub delta: f64,
}

impl BoundInputs {
    /// Computes `‖A‖₂` by power iteration and `σ_min` by dense SVD. When `A`
    /// is too large for the dense path, `σ_min = 0` is used (looser, still valid).
    pub fn compute(a: &Matrix, epsilon: f64, delta: f64, rng: &mut SeededRng) -> Result<Self> {
        a.check_valid()?;
        let spectral = match spectral_norm(a, POWER_TOL, POWER_MAX_ITER, rng) {
            Ok(v) => v,
            Err(Error::NoConvergence { estimate, .. }) => estimate,
            Err(e) => return Err(e),
        };
        let smin = match sigma_min(a) {
            Ok(v) => v,
            Err(Error::TooLargeForDense { .. }) => {
                log::info!("matrix too large for dense SVD, using sigma_min = 0");
                0.0
            }
            Err(e) => return Err(e),
        };
        Self::new(a, spectral, smin.min(spectral), epsilon, delta)
    }

    pub fn new(a: &Matrix, spectral: f64, sigma_min: f64, epsilon: f64, delta: f64) -> Result<Self> {
        let l1_total = l1_norm(a);
        if l1_total == 0.0 || !(spectral > 0.0) {
            return Err(Error::ZeroMatrix);
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon = {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta = {delta}")));
        }
        if !(sigma_min >= 0.0) || sigma_min > spectral * (1.0 + 1e-9) {
            return Err(Error::InvalidParameter(format!(
                "sigma_min = {sigma_min} with spectral norm {spectral}"
            )));
        }
        Ok(Self {
            rows: a.rows(),
            cols: a.cols(),
            spectral,
            frob_sq: frob_norm_sq(a),
            l1_total,
            sigma_min,
            epsilon,
            delta,
        })
    }

    /// Same inputs with a different accuracy target.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }
}

#[inline]
fn xi_value(abs: f64, alpha: f64, l1: f64, frob_sq: f64) -> f64 {
    frob_sq / (alpha * frob_sq / (abs * l1) + (1.0 - alpha))
}

#[inline]
fn gamma_value(abs: f64, alpha: f64, l1: f64, frob_sq: f64) -> f64 {
    let lambda = l1 * abs / frob_sq;
    l1 / (alpha + (1.0 - alpha) * lambda)
}

/// `f(α) = ρ²(α) + γ(α)·scale` over a fixed set of nonzero magnitudes.
/// The same object serves the exact bound and the streaming proxy estimate.
#[derive(Clone, Debug)]
pub(crate) struct BoundObjective {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
    l1: f64,
    frob_sq: f64,
    sigma_min_sq: f64,
    gamma_shift: f64,
    accuracy_scale: f64,
}

impl BoundObjective {
    pub(crate) fn new(
        rows: usize,
        cols: usize,
        entries: Vec<(usize, usize, f64)>,
        sigma_min_sq: f64,
        gamma_shift: f64,
        accuracy_scale: f64,
    ) -> Result<Self> {
        let l1: f64 = entries.iter().map(|e| e.2).sum();
        let frob_sq: f64 = entries.iter().map(|e| e.2 * e.2).sum();
        if !(l1 > 0.0) {
            return Err(Error::ZeroMatrix);
        }
        Ok(Self {
            rows,
            cols,
            entries,
            l1,
            frob_sq,
            sigma_min_sq,
            gamma_shift,
            accuracy_scale,
        })
    }

    fn for_matrix(a: &Matrix, sigma_min: f64, spectral: f64, epsilon: f64) -> Result<Self> {
        let entries = a.nonzeros().map(|(i, j, v)| (i, j, v.abs())).collect();
        Self::new(
            a.rows(),
            a.cols(),
            entries,
            sigma_min * sigma_min,
            spectral,
            epsilon * spectral / 3.0,
        )
    }

    /// `(ρ²(α), γ(α))`.
    pub(crate) fn terms(&self, alpha: f64) -> (f64, f64) {
        let mut row = vec![0.0; self.rows];
        let mut col = vec![0.0; self.cols];
        let mut gmax: f64 = 0.0;
        for &(i, j, abs) in &self.entries {
            let x = xi_value(abs, alpha, self.l1, self.frob_sq);
            row[i] += x;
            col[j] += x;
            gmax = gmax.max(gamma_value(abs, alpha, self.l1, self.frob_sq));
        }
        let rmax = row.iter().cloned().fold(0.0, f64::max);
        let cmax = col.iter().cloned().fold(0.0, f64::max);
        ((rmax.max(cmax) - self.sigma_min_sq).max(0.0), gmax + self.gamma_shift)
    }

    pub(crate) fn value(&self, alpha: f64) -> f64 {
        let (r, g) = self.terms(alpha);
        r + g * self.accuracy_scale
    }

    /// Grid search on `[ALPHA_MIN, 1]` followed by golden-section refinement
    /// around the best grid point. Returns `(α*, f(α*), grid)`.
    pub(crate) fn minimize(&self, grid_size: usize) -> Result<(f64, f64, Vec<(f64, f64)>)> {
        if grid_size < 2 {
            return Err(Error::InvalidParameter(format!("grid size {grid_size} < 2")));
        }
        let step = (1.0 - ALPHA_MIN) / (grid_size - 1) as f64;
        let alphas: Vec<f64> = (0..grid_size)
            .map(|k| if k + 1 == grid_size { 1.0 } else { ALPHA_MIN + step * k as f64 })
            .collect();
        let grid: Vec<(f64, f64)> = alphas.par_iter().map(|&a| (a, self.value(a))).collect();
        let (best, &(ga, gf)) = grid
            .iter()
            .enumerate()
            .min_by(|x, y| x.1 .1.total_cmp(&y.1 .1))
            .expect("nonempty grid");
        let mut lo = grid[best.saturating_sub(1)].0;
        let mut hi = grid[(best + 1).min(grid_size - 1)].0;
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = hi - ratio * (hi - lo);
        let mut d = lo + ratio * (hi - lo);
        let mut fc = self.value(c);
        let mut fd = self.value(d);
        while hi - lo > ALPHA_TOL {
            if fc <= fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - ratio * (hi - lo);
                fc = self.value(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + ratio * (hi - lo);
                fd = self.value(d);
            }
        }
        let (ra, rf) = if fc <= fd { (c, fc) } else { (d, fd) };
        let (alpha, f) = if rf < gf { (ra, rf) } else { (ga, gf) };
        Ok((alpha, f, grid))
    }
}

/// `ξ_ij`; equals `A_ij²/p_ij` under the hybrid law.
pub fn xi(a: &Matrix, i: usize, j: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let v = a.get(i, j);
    if v == 0.0 {
        return Err(Error::ZeroEntry { row: i, col: j });
    }
    Ok(xi_value(v.abs(), alpha, l1_norm(a), frob_norm_sq(a)))
}

/// `ρ²(α)`, clamped at zero.
pub fn rho_sq(a: &Matrix, alpha: f64, sigma_min: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let obj = BoundObjective::for_matrix(a, sigma_min, 0.0, 0.0)?;
    Ok(obj.terms(alpha).0)
}

/// `γ(α)` given `‖A‖₂`.
pub fn gamma_of(a: &Matrix, alpha: f64, spectral: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let obj = BoundObjective::for_matrix(a, 0.0, spectral, 0.0)?;
    Ok(obj.terms(alpha).1)
}

/// `f(α) = ρ²(α) + γ(α)ε‖A‖₂/3`.
pub fn f_of(a: &Matrix, alpha: f64, inputs: &BoundInputs) -> Result<f64> {
    check_alpha(alpha)?;
    let obj = BoundObjective::for_matrix(a, inputs.sigma_min, inputs.spectral, inputs.epsilon)?;
    Ok(obj.value(alpha))
}

/// `⌈2 f ln((m+n)/δ) / (ε²‖A‖₂²)⌉`.
pub fn s_star(f: f64, inputs: &BoundInputs) -> u64 {
    let m_plus_n = (inputs.rows + inputs.cols) as f64;
    let raw = 2.0 / (inputs.epsilon * inputs.epsilon * inputs.spectral * inputs.spectral)
        * f
        * (m_plus_n / inputs.delta).ln();
    raw.ceil().max(1.0) as u64
}

/// Bound profile over α plus the chosen α and its sample count.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlphaProfile {
    pub alpha_star: f64,
    pub s_star: u64,
    pub rho_sq: f64,
    pub gamma: f64,
    pub f_star: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub spectral: f64,
    pub sigma_min: f64,
    /// `(α, f(α))` pairs of the search grid.
    pub grid: Vec<(f64, f64)>,
}

impl AlphaProfile {
    pub fn alpha_grid(&self) -> Vec<f64> {
        self.grid.iter().map(|g| g.0).collect()
    }

    pub fn f_values(&self) -> Vec<f64> {
        self.grid.iter().map(|g| g.1).collect()
    }
}

fn profile(obj: &BoundObjective, inputs: &BoundInputs, alpha: f64, grid: Vec<(f64, f64)>) -> AlphaProfile {
    let (rho, gamma) = obj.terms(alpha);
    let f = rho + gamma * obj.accuracy_scale;
    AlphaProfile {
        alpha_star: alpha,
        s_star: s_star(f, inputs),
        rho_sq: rho,
        gamma,
        f_star: f,
        epsilon: inputs.epsilon,
        delta: inputs.delta,
        spectral: inputs.spectral,
        sigma_min: inputs.sigma_min,
        grid,
    }
}

/// Minimizes `f` over `[ALPHA_MIN, 1]`.
pub fn optimize_alpha(a: &Matrix, inputs: &BoundInputs, grid_size: usize) -> Result<AlphaProfile> {
    let obj = BoundObjective::for_matrix(a, inputs.sigma_min, inputs.spectral, inputs.epsilon)?;
    let (alpha, _, grid) = obj.minimize(grid_size)?;
    Ok(profile(&obj, inputs, alpha, grid))
}

/// Profile with α fixed by the caller; the grid is still evaluated.
pub fn profile_at(a: &Matrix, inputs: &BoundInputs, grid_size: usize, alpha: f64) -> Result<AlphaProfile> {
    check_alpha(alpha)?;
    let obj = BoundObjective::for_matrix(a, inputs.sigma_min, inputs.spectral, inputs.epsilon)?;
    let (_, _, grid) = obj.minimize(grid_size)?;
    Ok(profile(&obj, inputs, alpha, grid))
}

/// Outcome of one `‖A − Ã‖₂ ≤ ε‖A‖₂` check.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BoundCheck {
    pub relative_error: f64,
    pub epsilon: f64,
    pub passed: bool,
}

pub fn check_bound(a: &Matrix, sketch: &SparseSketch, inputs: &BoundInputs) -> Result<BoundCheck> {
    let err = sketch_error(a, sketch)?;
    let rel = err / inputs.spectral;
    Ok(BoundCheck {
        relative_error: rel,
        epsilon: inputs.epsilon,
        passed: rel <= inputs.epsilon,
    })
}

/// Aggregate of repeated checks. Acceptance allows
/// `⌈nδ + 1.645·√(nδ(1−δ))⌉` failures (one-sided 95% binomial slack).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundSummary {
    pub trials: usize,
    pub passes: usize,
    pub allowed_failures: usize,
    pub median_relative_error: f64,
    pub mean_relative_error: f64,
    pub accepted: bool,
}

impl BoundSummary {
    pub fn from_checks(checks: &[BoundCheck], delta: f64) -> Self {
        let n = checks.len();
        let passes = checks.iter().filter(|c| c.passed).count();
        let nf = n as f64;
        let allowed = (nf * delta + 1.645 * (nf * delta * (1.0 - delta)).sqrt()).ceil() as usize;
        let mut errs: Vec<f64> = checks.iter().map(|c| c.relative_error).collect();
        errs.sort_by(f64::total_cmp);
        Self {
            trials: n,
            passes,
            allowed_failures: allowed,
            median_relative_error: crate::stats::median_sorted(&errs),
            mean_relative_error: errs.iter().sum::<f64>() / nf.max(1.0),
            accepted: n - passes <= allowed,
        }
    }
}
