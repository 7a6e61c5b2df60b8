//! Approximate PCA from a hybrid sketch, and checks of its error bounds.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::alphaopt::{optimize_alpha, BoundInputs, DEFAULT_GRID_SIZE};
use crate::distributions::SamplingLaw;
use crate::error::{Error, Result};
use crate::linalg::{
    dense_svd, frob_norm, frob_norm_sq, reconstruct, singular_values, spectral_norm_estimate, truncated_svd,
    Difference, DENSE_SVD_LIMIT, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS,
};
use crate::matrix::{Matrix, SparseSketch};
use crate::rng::SeededRng;
use crate::sparsifier::{build_sketch, SamplingPlan};

/// What to do when the input columns are not centered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenteringCheck {
    Error,
    Warn,
    Skip,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PcaOptions {
    /// Fixed mixing weight; `None` means α* for `(epsilon, delta)`.
    pub alpha: Option<f64>,
    pub epsilon: f64,
    pub delta: f64,
    pub centering: CenteringCheck,
    pub oversample: usize,
    pub power_iters: usize,
    /// Also compute the exact rank-k SVD of `A` for diagnostics and timing.
    pub exact_baseline: bool,
}

impl Default for PcaOptions {
    fn default() -> Self {
        Self {
            alpha: None,
            epsilon: 0.05,
            delta: 0.1,
            centering: CenteringCheck::Error,
            oversample: DEFAULT_OVERSAMPLE,
            power_iters: DEFAULT_POWER_ITERS,
            exact_baseline: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PcaResult {
    /// `n×k` approximate principal directions.
    #[serde(skip)]
    pub components: Matrix,
    #[serde(skip)]
    pub sketch: SparseSketch,
    pub k: usize,
    pub sigma: Vec<f64>,
    pub alpha: f64,
    pub samples: usize,
    pub sketch_nnz: usize,
    /// `‖A − A Ṽ_k Ṽ_kᵀ‖_F`.
    pub projection_error: f64,
    /// `‖A_k − Ã_k‖_F`; present with the exact baseline.
    pub surrogate_error: Option<f64>,
    /// `‖A − Ã_k‖_F`.
    pub sketch_proj_error: f64,
    /// `‖V_kᵀ Ṽ_k‖_F² / k`; present with the exact baseline.
    pub subspace_affinity: Option<f64>,
    pub sketch_svd_seconds: f64,
    pub dense_svd_seconds: Option<f64>,
}

/// Subtracts each column's mean.
pub fn center_columns(a: &Matrix) -> Matrix {
    let (m, n) = a.shape();
    let means: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| a.get(i, j)).sum::<f64>() / m as f64)
        .collect();
    Matrix::from_fn(m, n, |i, j| a.get(i, j) - means[j])
}

/// Fails on the first column whose mean exceeds `1e-6` times its standard deviation.
pub fn check_centered(a: &Matrix) -> Result<()> {
    let (m, n) = a.shape();
    for j in 0..n {
        let mean = (0..m).map(|i| a.get(i, j)).sum::<f64>() / m as f64;
        let var = (0..m).map(|i| (a.get(i, j) - mean).powi(2)).sum::<f64>() / m as f64;
        let std = var.sqrt();
        let scale = (0..m).fold(0.0f64, |s, i| s.max(a.get(i, j).abs()));
        if mean.abs() > 1e-6 * std && mean.abs() > 1e-12 * scale {
            return Err(Error::NotCentered { col: j, mean, std });
        }
    }
    Ok(())
}

/// `‖Vᵀ W‖_F² / k` for two `n×k` orthonormal bases.
pub fn subspace_affinity(v: &Matrix, w: &Matrix) -> f64 {
    let k = v.cols().min(w.cols()).max(1);
    frob_norm_sq(&v.tmatmul(w)) / k as f64
}

fn projection_residual(a: &Matrix, v: &Matrix) -> Matrix {
    let av = a.matmul(v);
    a.sub(&av.matmul(&v.transpose()))
}

/// Sketches `A` with the hybrid law using `s` samples, then takes the rank-`k`
/// SVD of the sketch.
pub fn fast_pca(a: &Matrix, k: usize, s: usize, opts: &PcaOptions, rng: &mut SeededRng) -> Result<PcaResult> {
    a.check_valid()?;
    let max = a.rows().min(a.cols());
    if k == 0 || k > max {
        return Err(Error::RankTooLarge { k, max });
    }
    match opts.centering {
        CenteringCheck::Error => check_centered(a)?,
        CenteringCheck::Warn => {
            if let Err(e) = check_centered(a) {
                log::warn!("{e}");
            }
        }
        CenteringCheck::Skip => {}
    }
    let alpha = match opts.alpha {
        Some(x) => x,
        None => {
            let inputs = BoundInputs::compute(a, opts.epsilon, opts.delta, &mut rng.substream(1))?;
            optimize_alpha(a, &inputs, DEFAULT_GRID_SIZE)?.alpha_star
        }
    };
    let plan = SamplingPlan::new(SamplingLaw::Hybrid { alpha }, s, rng.substream(2))?;
    let sketch = build_sketch(a, &plan)?;
    pca_from_sketch(a, sketch, k, alpha, opts, rng)
}

/// The PCA step alone, on a sketch built elsewhere. `alpha` is recorded only.
pub fn pca_from_sketch(
    a: &Matrix,
    sketch: SparseSketch,
    k: usize,
    alpha: f64,
    opts: &PcaOptions,
    rng: &mut SeededRng,
) -> Result<PcaResult> {
    if a.shape() != sketch.shape() {
        return Err(Error::ShapeMismatch {
            expected: a.shape(),
            found: sketch.shape(),
        });
    }
    let t0 = Instant::now();
    let svd = truncated_svd(&sketch, k, opts.oversample, opts.power_iters, &mut rng.substream(3))?;
    let sketch_svd_seconds = t0.elapsed().as_secs_f64();

    let projection_error = frob_norm(&projection_residual(a, &svd.v));
    let approx_k = reconstruct(&svd.u, &svd.sigma, &svd.v, k);
    let sketch_proj_error = frob_norm(&a.sub(&approx_k));

    let (surrogate_error, subspace_aff, dense_svd_seconds) = if opts.exact_baseline {
        let t1 = Instant::now();
        let exact = truncated_svd(a, k, opts.oversample, opts.power_iters, &mut rng.substream(4))?;
        let secs = t1.elapsed().as_secs_f64();
        let a_k = reconstruct(&exact.u, &exact.sigma, &exact.v, k);
        (
            Some(frob_norm(&a_k.sub(&approx_k))),
            Some(subspace_affinity(&exact.v, &svd.v)),
            Some(secs),
        )
    } else {
        (None, None, None)
    };

    Ok(PcaResult {
        components: svd.v,
        k,
        sigma: svd.sigma,
        alpha,
        samples: sketch.samples(),
        sketch_nnz: sketch.nnz(),
        sketch,
        projection_error,
        surrogate_error,
        sketch_proj_error,
        subspace_affinity: subspace_aff,
        sketch_svd_seconds,
        dense_svd_seconds,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PcaBoundReport {
    pub k: usize,
    pub sigma_k: f64,
    /// `‖A − Ã‖₂`.
    pub sketch_spectral_error: f64,
    pub inequalities: Vec<Inequality>,
    pub all_passed: bool,
}

struct RankK {
    a_k: Matrix,
    v_k: Matrix,
    sigma_k: f64,
    sigma_next: f64,
    head_sq: f64,
}

fn rank_k_dense(a: &Matrix, k: usize) -> Result<RankK> {
    let svd = dense_svd(a)?;
    Ok(RankK {
        a_k: reconstruct(&svd.u, &svd.sigma, &svd.v, k),
        v_k: svd.v.leading_columns(k),
        sigma_k: svd.sigma[k - 1],
        sigma_next: svd.sigma.get(k).copied().unwrap_or(0.0),
        head_sq: svd.sigma[..k].iter().map(|s| s * s).sum(),
    })
}

fn rank_k_randomized<A: crate::linalg::LinearOperator>(a: &A, k: usize, rng: &mut SeededRng) -> Result<RankK> {
    let max = a.nrows().min(a.ncols());
    let kk = (k + 1).min(max);
    let svd = truncated_svd(a, kk, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS, rng)?;
    Ok(RankK {
        a_k: reconstruct(&svd.u, &svd.sigma, &svd.v, k),
        v_k: svd.v.leading_columns(k),
        sigma_k: svd.sigma[k - 1],
        sigma_next: if kk > k { svd.sigma[k] } else { 0.0 },
        head_sq: svd.sigma[..k].iter().map(|s| s * s).sum(),
    })
}

/// Evaluates both sides of
/// (i) `‖A − AṼ_kṼ_kᵀ‖_F² ≤ ‖A − A_k‖_F² + 4‖A_k‖_F²‖A − Ã‖₂/σ_k(A)`,
/// (ii) `‖A_k − Ã_k‖_F ≤ √(8k)(‖A − A_k‖₂ + ‖A − Ã‖₂)`,
/// (iii) `‖A − Ã_k‖_F ≤ ‖A − A_k‖_F + √(8k)(‖A − A_k‖₂ + ‖A − Ã‖₂)`.
/// Uses dense SVDs when `min(m, n)` allows, randomized ones otherwise.
pub fn pca_bounds(a: &Matrix, sketch: &SparseSketch, k: usize) -> Result<PcaBoundReport> {
    a.check_valid()?;
    if a.shape() != sketch.shape() {
        return Err(Error::ShapeMismatch {
            expected: a.shape(),
            found: sketch.shape(),
        });
    }
    let max = a.rows().min(a.cols());
    if k == 0 || k > max {
        return Err(Error::RankTooLarge { k, max });
    }
    let dense = max <= DENSE_SVD_LIMIT;
    let mut rng = SeededRng::new(0x9ca_b0d5);
    let exact = if dense {
        rank_k_dense(a, k)?
    } else {
        rank_k_randomized(a, k, &mut rng)?
    };
    let sigma_1 = if dense {
        singular_values(a)?[0]
    } else {
        spectral_norm_estimate(a, &mut rng)
    };
    if !(exact.sigma_k > 1e-12 * sigma_1) {
        return Err(Error::DegenerateRank { k });
    }
    let approx_dense = sketch.densify();
    let approx = if dense {
        rank_k_dense(&approx_dense, k)?
    } else {
        rank_k_randomized(sketch, k, &mut rng)?
    };
    let e2 = if dense {
        singular_values(&a.sub(&approx_dense))?[0]
    } else {
        spectral_norm_estimate(&Difference { dense: a, sketch }, &mut rng)
    };

    let frob_sq = frob_norm_sq(a);
    let tail_f_sq = (frob_sq - exact.head_sq).max(0.0);
    let tail_f = tail_f_sq.sqrt();
    let tail_2 = exact.sigma_next;
    let root = (8.0 * k as f64).sqrt();

    let lhs1 = frob_norm_sq(&projection_residual(a, &approx.v_k));
    let rhs1 = tail_f_sq + 4.0 * exact.head_sq * e2 / exact.sigma_k;
    let lhs2 = frob_norm(&exact.a_k.sub(&approx.a_k));
    let rhs2 = root * (tail_2 + e2);
    let lhs3 = frob_norm(&a.sub(&approx.a_k));
    let rhs3 = tail_f + root * (tail_2 + e2);

    // Rounding slack relative to the size of A.
    let slack_sq = 1e-10 * frob_sq;
    let slack = 1e-10 * frob_sq.sqrt();
    let inequalities = vec![
        Inequality {
            name: "projection".into(),
            lhs: lhs1,
            rhs: rhs1,
            passed: lhs1 <= rhs1 + slack_sq,
        },
        Inequality {
            name: "surrogate".into(),
            lhs: lhs2,
            rhs: rhs2,
            passed: lhs2 <= rhs2 + slack,
        },
        Inequality {
            name: "sketch_projection".into(),
            lhs: lhs3,
            rhs: rhs3,
            passed: lhs3 <= rhs3 + slack,
        },
    ];
    let all_passed = inequalities.iter().all(|q| q.passed);
    Ok(PcaBoundReport {
        k,
        sigma_k: exact.sigma_k,
        sketch_spectral_error: e2,
        inequalities,
        all_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_block;
    use rand::Rng;

    fn low_rank(m: usize, n: usize, r: usize, noise: f64, seed: u64) -> Matrix {
        let mut rng = SeededRng::new(seed);
        let x = gaussian_block(m, r, &mut rng);
        let y = gaussian_block(r, n, &mut rng);
        let e = gaussian_block(m, n, &mut rng);
        x.matmul(&y).add(&e.scale(noise))
    }

    #[test]
    fn center_examples() {
        let c = Matrix::from_fn(4, 3, |_, j| j as f64 + 2.0);
        assert_eq!(center_columns(&c), Matrix::zeros(4, 3));
        let a = center_columns(&low_rank(20, 6, 2, 0.1, 1));
        let again = center_columns(&a);
        assert!(frob_norm(&a.sub(&again)) <= 1e-15 * frob_norm(&a) * 10.0);
        let raw = low_rank(30, 5, 2, 0.5, 2);
        let cen = center_columns(&raw);
        for j in 0..5 {
            let mean: f64 = (0..30).map(|i| cen.get(i, j)).sum::<f64>() / 30.0;
            assert!(mean.abs() < 1e-12 * raw.max_abs());
        }
        assert!(check_centered(&cen).is_ok());
        assert!(matches!(check_centered(&raw), Err(Error::NotCentered { .. })));
    }

    #[test]
    fn exact_recovery_with_huge_s() {
        let a = center_columns(&low_rank(25, 12, 3, 0.0, 3));
        let opts = PcaOptions {
            alpha: Some(0.5),
            ..Default::default()
        };
        let r = fast_pca(&a, 3, 2_000_000, &opts, &mut SeededRng::new(1)).unwrap();
        assert!(r.projection_error < 0.02 * frob_norm(&a), "{}", r.projection_error);
        assert!(r.subspace_affinity.unwrap() > 0.999);
    }

    #[test]
    fn rank_guard_and_centering_guard() {
        let a = center_columns(&low_rank(8, 5, 2, 0.1, 4));
        let opts = PcaOptions::default();
        assert!(matches!(
            fast_pca(&a, 6, 100, &opts, &mut SeededRng::new(0)),
            Err(Error::RankTooLarge { k: 6, max: 5 })
        ));
        let raw = low_rank(8, 5, 2, 0.1, 4).add(&Matrix::from_fn(8, 5, |_, _| 3.0));
        assert!(matches!(
            fast_pca(&raw, 2, 100, &opts, &mut SeededRng::new(0)),
            Err(Error::NotCentered { .. })
        ));
        let warn = PcaOptions {
            centering: CenteringCheck::Warn,
            ..opts
        };
        assert!(fast_pca(&raw, 2, 100, &warn, &mut SeededRng::new(0)).is_ok());
    }

    #[test]
    fn bounds_exact_sketch_is_tight() {
        let a = low_rank(15, 10, 4, 0.3, 5);
        let rep = pca_bounds(&a, &SparseSketch::from_dense(&a), 3).unwrap();
        assert!(rep.all_passed);
        assert!(rep.sketch_spectral_error < 1e-12 * frob_norm(&a));
        let q = &rep.inequalities[0];
        assert!((q.lhs - q.rhs).abs() < 1e-9 * q.rhs);
    }

    #[test]
    fn bounds_hold_for_random_sketches() {
        let mut r = SeededRng::new(6);
        for t in 0..8 {
            let a = low_rank(40, 30, 3, 0.2, 100 + t);
            let k = 1 + (r.random::<u32>() % 4) as usize;
            let s = 5 * k * 70;
            let plan = SamplingPlan::new(SamplingLaw::Hybrid { alpha: 0.6 }, s, SeededRng::new(t)).unwrap();
            let sk = build_sketch(&a, &plan).unwrap();
            let rep = pca_bounds(&a, &sk, k).unwrap();
            assert!(rep.all_passed, "{rep:?}");
        }
    }

    #[test]
    fn degenerate_rank_guard() {
        let a = low_rank(10, 8, 2, 0.0, 7);
        let sk = SparseSketch::from_dense(&a);
        assert!(matches!(pca_bounds(&a, &sk, 3), Err(Error::DegenerateRank { k: 3 })));
    }

    #[test]
    fn projection_error_shrinks_with_samples() {
        let a = center_columns(&low_rank(60, 40, 3, 0.1, 8));
        let opts = PcaOptions {
            alpha: Some(0.6),
            exact_baseline: false,
            ..Default::default()
        };
        let mut prev = f64::INFINITY;
        for s in [300usize, 600, 1200, 2400] {
            let mut errs: Vec<f64> = (0..5)
                .map(|t| fast_pca(&a, 3, s, &opts, &mut SeededRng::new(40 + t)).unwrap().projection_error)
                .collect();
            errs.sort_by(f64::total_cmp);
            assert!(errs[2] <= prev);
            prev = errs[2];
        }
    }

    #[test]
    fn affinity_of_identical_bases_is_one() {
        let v = Matrix::from_fn(5, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        assert!((subspace_affinity(&v, &v) - 1.0).abs() < 1e-15);
    }
}
