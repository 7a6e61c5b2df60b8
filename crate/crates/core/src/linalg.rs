//! Norms, extreme singular values and truncated SVD.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{Matrix, SparseSketch};
use crate::rng::SeededRng;

/// Largest `min(m, n)` handled by the dense Jacobi SVD.
pub const DENSE_SVD_LIMIT: usize = 512;
pub const POWER_TOL: f64 = 1e-9;
pub const POWER_MAX_ITER: usize = 1000;
pub const DEFAULT_OVERSAMPLE: usize = 10;
pub const DEFAULT_POWER_ITERS: usize = 2;
/// Subspace iteration stops once `‖A V - U Σ‖_F <= SVD_RESIDUAL_TOL · σ₁`.
pub const SVD_RESIDUAL_TOL: f64 = 1e-10;
pub const SVD_MAX_ITERS: usize = 400;

/// Something that can multiply a dense block from the left, plain or transposed.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `A X` for an `ncols × l` block.
    fn mul_block(&self, x: &Matrix) -> Matrix;
    /// `Aᵀ X` for an `nrows × l` block.
    fn tmul_block(&self, x: &Matrix) -> Matrix;
}

impl LinearOperator for Matrix {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn mul_block(&self, x: &Matrix) -> Matrix {
        self.matmul(x)
    }
    fn tmul_block(&self, x: &Matrix) -> Matrix {
        self.tmatmul(x)
    }
}

impl LinearOperator for SparseSketch {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn mul_block(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.rows(), self.cols());
        let l = x.cols();
        let mut out = Matrix::zeros(self.rows(), l);
        for t in self.entries() {
            let src = x.row(t.col);
            for (o, &b) in out.row_mut(t.row).iter_mut().zip(src) {
                *o += t.value * b;
            }
        }
        out
    }
    fn tmul_block(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.rows(), self.rows());
        let l = x.cols();
        let mut out = Matrix::zeros(self.cols(), l);
        for t in self.entries() {
            let src = x.row(t.row);
            for (o, &b) in out.row_mut(t.col).iter_mut().zip(src) {
                *o += t.value * b;
            }
        }
        out
    }
}

/// The residual `A − Ã` without forming it.
pub struct Difference<'a> {
    pub dense: &'a Matrix,
    pub sketch: &'a SparseSketch,
}

impl LinearOperator for Difference<'_> {
    fn nrows(&self) -> usize {
        self.dense.rows()
    }
    fn ncols(&self) -> usize {
        self.dense.cols()
    }
    fn mul_block(&self, x: &Matrix) -> Matrix {
        self.dense.mul_block(x).sub(&self.sketch.mul_block(x))
    }
    fn tmul_block(&self, x: &Matrix) -> Matrix {
        self.dense.tmul_block(x).sub(&self.sketch.tmul_block(x))
    }
}

pub fn l1_norm(a: &Matrix) -> f64 {
    a.as_slice().iter().map(|x| x.abs()).sum()
}

pub fn frob_norm_sq(a: &Matrix) -> f64 {
    a.as_slice().iter().map(|x| x * x).sum()
}

pub fn frob_norm(a: &Matrix) -> f64 {
    frob_norm_sq(a).sqrt()
}

pub(crate) fn gaussian_block(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Largest singular value by power iteration on `AᵀA`, stopping when the
/// Rayleigh quotient changes by at most `tol` relative.
pub fn spectral_norm<A: LinearOperator + ?Sized>(
    a: &A,
    tol: f64,
    max_iter: usize,
    rng: &mut SeededRng,
) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol = {tol}")));
    }
    let n = a.ncols();
    let mut x = gaussian_block(n, 1, rng);
    normalize(x.as_mut_slice());
    let mut prev = f64::NAN;
    for it in 1..=max_iter {
        let y = a.mul_block(&x);
        let theta: f64 = y.as_slice().iter().map(|v| v * v).sum();
        if theta == 0.0 {
            return Ok(0.0);
        }
        let mut z = a.tmul_block(&y);
        if normalize(z.as_mut_slice()) == 0.0 {
            return Ok(theta.sqrt());
        }
        x = z;
        if it > 1 && (theta - prev).abs() <= tol * theta {
            return Ok(theta.sqrt());
        }
        prev = theta;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        estimate: prev.max(0.0).sqrt(),
    })
}

/// [`spectral_norm`] with default tolerances, taking the best estimate if the
/// iteration budget runs out.
pub fn spectral_norm_estimate<A: LinearOperator + ?Sized>(a: &A, rng: &mut SeededRng) -> f64 {
    match spectral_norm(a, POWER_TOL, POWER_MAX_ITER, rng) {
        Ok(v) => v,
        Err(Error::NoConvergence { estimate, .. }) => {
            log::debug!("power iteration hit its budget, using estimate {estimate}");
            estimate
        }
        Err(e) => unreachable!("{e}"),
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm > 0.0 {
        for x in v.iter_mut() {
            *x /= nrm;
        }
    }
    nrm
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Thin SVD `A = U diag(sigma) Vᵀ` with `r = min(m, n)` columns.
#[derive(Clone, Debug)]
pub struct DenseSvd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

/// Truncated SVD result: `U` is `m×k`, `V` is `n×k`, `sigma` nonincreasing.
#[derive(Clone, Debug, Serialize)]
pub struct SvdResult {
    #[serde(skip)]
    pub u: Matrix,
    pub sigma: Vec<f64>,
    #[serde(skip)]
    pub v: Matrix,
    pub k: usize,
    pub iterations: usize,
}

// Hestenes rotations on the columns of `cols` (c vectors of equal length).
// Returns V (c×c, column-major as Vec of columns) if requested.
fn jacobi_columns(cols: &mut [Vec<f64>], want_v: bool) -> Result<Option<Vec<Vec<f64>>>> {
    let c = cols.len();
    let len = cols.first().map_or(0, |v| v.len());
    let mut v: Option<Vec<Vec<f64>>> = want_v.then(|| {
        (0..c)
            .map(|j| {
                let mut e = vec![0.0; c];
                e[j] = 1.0;
                e
            })
            .collect()
    });
    let tol = f64::EPSILON * (len.max(c) as f64);
    let mut norms: Vec<f64> = cols.iter().map(|x| dot(x, x)).collect();
    // Columns at rounding level of the whole matrix are treated as zero.
    let negligible = (f64::EPSILON * f64::EPSILON) * norms.iter().sum::<f64>();
    const MAX_SWEEPS: usize = 100;
    for sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..c {
            for q in p + 1..c {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                let (left, right) = cols.split_at_mut(q);
                rotate(&mut left[p], &mut right[0], cs, sn);
                norms[p] = dot(&cols[p], &cols[p]);
                norms[q] = dot(&cols[q], &cols[q]);
                if let Some(v) = v.as_mut() {
                    let (left, right) = v.split_at_mut(q);
                    rotate(&mut left[p], &mut right[0], cs, sn);
                }
            }
        }
        if !rotated {
            log::trace!("jacobi converged after {} sweeps", sweep + 1);
            return Ok(v);
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_SWEEPS,
        estimate: norms.iter().cloned().fold(0.0, f64::max).sqrt(),
    })
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

fn columns_of(a: &Matrix) -> Vec<Vec<f64>> {
    (0..a.cols()).map(|j| a.column(j)).collect()
}

fn from_columns(rows: usize, cols: &[Vec<f64>]) -> Matrix {
    Matrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

// Adds orthonormal completions for columns whose norm vanished.
fn complete_basis(basis: &mut [Vec<f64>], missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let len = basis[0].len();
    let mut candidate = 0;
    for &slot in missing {
        loop {
            let mut e = vec![0.0; len];
            e[candidate % len] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for (k, b) in basis.iter().enumerate() {
                    if k == slot || (missing.contains(&k) && b.iter().all(|&x| x == 0.0)) {
                        continue;
                    }
                    let d = dot(&e, b);
                    for (ei, bi) in e.iter_mut().zip(b) {
                        *ei -= d * bi;
                    }
                }
            }
            if normalize(&mut e) > 1e-8 {
                basis[slot] = e;
                break;
            }
            if candidate > 2 * len {
                return;
            }
        }
    }
}

/// Thin SVD by one-sided Jacobi. Intended for small matrices and as an oracle.
pub fn dense_svd(a: &Matrix) -> Result<DenseSvd> {
    a.check_valid()?;
    let (m, n) = a.shape();
    let r = m.min(n);
    if r > DENSE_SVD_LIMIT {
        return Err(Error::TooLargeForDense {
            min_dim: r,
            limit: DENSE_SVD_LIMIT,
        });
    }
    let mut svd = dense_svd_any(a)?;
    canonicalize_signs(&mut svd.u, &mut svd.v);
    Ok(svd)
}

/// Singular values only, in nonincreasing order.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    a.check_valid()?;
    let (m, n) = a.shape();
    let r = m.min(n);
    if r > DENSE_SVD_LIMIT {
        return Err(Error::TooLargeForDense {
            min_dim: r,
            limit: DENSE_SVD_LIMIT,
        });
    }
    let work = if m >= n { a.clone() } else { a.transpose() };
    let mut cols = columns_of(&work);
    jacobi_columns(&mut cols, false)?;
    let mut s: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Smallest singular value (of the `min(m, n)` thin spectrum).
pub fn sigma_min(a: &Matrix) -> Result<f64> {
    Ok(*singular_values(a)?.last().expect("nonempty"))
}

/// Flips column pairs so that each column of `v` has its largest-magnitude
/// entry nonnegative.
pub fn canonicalize_signs(u: &mut Matrix, v: &mut Matrix) {
    for j in 0..v.cols() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for i in 0..v.rows() {
            let x = v.get(i, j);
            if x.abs() > best {
                best = x.abs();
                sign = if x < 0.0 { -1.0 } else { 1.0 };
            }
        }
        if sign < 0.0 {
            for i in 0..v.rows() {
                v.set(i, j, -v.get(i, j));
            }
            for i in 0..u.rows() {
                u.set(i, j, -u.get(i, j));
            }
        }
    }
}

// Orthonormalizes the columns of a block (twice-applied modified Gram-Schmidt).
// Columns that collapse are replaced by fresh random directions.
fn orthonormalize(block: &Matrix, rng: &mut SeededRng) -> Matrix {
    let rows = block.rows();
    let mut cols = columns_of(block);
    for j in 0..cols.len() {
        let mut attempts = 0;
        loop {
            let before = dot(&cols[j], &cols[j]).sqrt();
            for _ in 0..2 {
                for k in 0..j {
                    let d = dot(&cols[j], &cols[k]);
                    let (done, rest) = cols.split_at_mut(j);
                    for (x, y) in rest[0].iter_mut().zip(&done[k]) {
                        *x -= d * y;
                    }
                }
            }
            let after = normalize(&mut cols[j]);
            if after > 1e-10 * before.max(f64::MIN_POSITIVE) && after > 0.0 {
                break;
            }
            attempts += 1;
            assert!(attempts < 50, "failed to extend orthonormal basis");
            cols[j] = (0..rows).map(|_| rng.sample(StandardNormal)).collect();
        }
    }
    from_columns(rows, &cols)
}

/// Rank-`k` SVD by randomized subspace iteration. Runs at least `power_iters`
/// passes, then keeps iterating until the residual `‖A V − U Σ‖_F` falls
/// below `SVD_RESIDUAL_TOL · σ₁`.
pub fn truncated_svd<A: LinearOperator + ?Sized>(
    a: &A,
    k: usize,
    oversample: usize,
    power_iters: usize,
    rng: &mut SeededRng,
) -> Result<SvdResult> {
    let (m, n) = (a.nrows(), a.ncols());
    let max = m.min(n);
    if k == 0 || k > max {
        return Err(Error::RankTooLarge { k, max });
    }
    let l = (k + oversample).min(max);
    let omega = gaussian_block(n, l, rng);
    let mut q = orthonormalize(&a.mul_block(&omega), rng);
    for _ in 0..power_iters {
        let w = orthonormalize(&a.tmul_block(&q), rng);
        q = orthonormalize(&a.mul_block(&w), rng);
    }
    let mut iterations = power_iters;
    loop {
        // B = Qᵀ A, handled as Bᵀ = Aᵀ Q (n × l).
        let bt = a.tmul_block(&q);
        let svd_b = thin_svd(&bt, rng)?;
        // Bᵀ = Ub Σ Wᵀ  =>  A ≈ Q B = (Q W) Σ Ubᵀ.
        let u_full = q.matmul(&svd_b.v);
        let mut u = u_full.leading_columns(k);
        let mut v = svd_b.u.leading_columns(k);
        let sigma: Vec<f64> = svd_b.sigma[..k].to_vec();
        // Ub is an orthonormal basis for the range of Bᵀ, so A·Ub both yields
        // the residual and seeds the next pass.
        let aw = a.mul_block(&svd_b.u);
        let av = aw.leading_columns(k);
        let mut res = 0.0;
        for i in 0..m {
            for j in 0..k {
                let d = av.get(i, j) - u.get(i, j) * sigma[j];
                res += d * d;
            }
        }
        let res = res.sqrt();
        let scale = sigma[0];
        // With l = min(m, n) the basis already spans the range of A.
        if scale == 0.0 || res <= SVD_RESIDUAL_TOL * scale || l == max {
            canonicalize_signs(&mut u, &mut v);
            return Ok(SvdResult {
                u,
                sigma,
                v,
                k,
                iterations,
            });
        }
        if iterations >= SVD_MAX_ITERS {
            if res <= 1e-6 * scale {
                log::warn!("subspace iteration stalled at residual {:e}", res / scale);
                canonicalize_signs(&mut u, &mut v);
                return Ok(SvdResult {
                    u,
                    sigma,
                    v,
                    k,
                    iterations,
                });
            }
            return Err(Error::NoConvergence {
                iterations,
                estimate: res / scale,
            });
        }
        q = orthonormalize(&aw, rng);
        iterations += 1;
    }
}

// SVD of a tall `n × l` block via `X = Q R`, then Jacobi on the `l × l` factor.
fn thin_svd(x: &Matrix, rng: &mut SeededRng) -> Result<DenseSvd> {
    let q = orthonormalize(x, rng);
    let r = q.tmatmul(x);
    let small = dense_svd_any(&r)?;
    Ok(DenseSvd {
        u: q.matmul(&small.u),
        sigma: small.sigma,
        v: small.v,
    })
}

// Dense SVD without the size guard (used on small projected blocks).
fn dense_svd_any(a: &Matrix) -> Result<DenseSvd> {
    let (m, n) = a.shape();
    let tall = m >= n;
    let work = if tall { a.clone() } else { a.transpose() };
    let len = work.rows();
    let r = m.min(n);
    let mut cols = columns_of(&work);
    let w = jacobi_columns(&mut cols, true)?.expect("vectors requested");
    let sig: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&x, &y| sig[y].total_cmp(&sig[x]));
    let mut left = Vec::with_capacity(r);
    let mut missing = Vec::new();
    for (slot, &k) in order.iter().enumerate() {
        if sig[k] > 0.0 {
            left.push(cols[k].iter().map(|x| x / sig[k]).collect());
        } else {
            left.push(vec![0.0; len]);
            missing.push(slot);
        }
    }
    complete_basis(&mut left, &missing);
    let right: Vec<Vec<f64>> = order.iter().map(|&k| w[k].clone()).collect();
    let sigma = order.iter().map(|&k| sig[k]).collect();
    let (u, v) = if tall {
        (from_columns(m, &left), from_columns(n, &right))
    } else {
        (from_columns(m, &right), from_columns(n, &left))
    };
    Ok(DenseSvd { u, sigma, v })
}

/// `U diag(sigma) Vᵀ` for the leading `k` triplets.
pub fn reconstruct(u: &Matrix, sigma: &[f64], v: &Matrix, k: usize) -> Matrix {
    let m = u.rows();
    let n = v.rows();
    let mut out = Matrix::zeros(m, n);
    for i in 0..m {
        let row = out.row_mut(i);
        for r in 0..k {
            let c = u.get(i, r) * sigma[r];
            if c == 0.0 {
                continue;
            }
            for (j, o) in row.iter_mut().enumerate() {
                *o += c * v.get(j, r);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Triple;
    use rand::Rng;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn to_na(a: &Matrix) -> DMatrix<f64> {
        DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
    }

    fn oracle_sv(a: &Matrix) -> Vec<f64> {
        let mut s: Vec<f64> = to_na(a).singular_values().iter().cloned().collect();
        s.sort_by(|x, y| y.total_cmp(x));
        s
    }

    fn random(m: usize, n: usize, seed: u64) -> Matrix {
        let mut rng = SeededRng::new(seed);
        gaussian_block(m, n, &mut rng)
    }

    fn orth_err(q: &Matrix) -> f64 {
        let g = q.tmatmul(q);
        let mut e: f64 = 0.0;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let t = if i == j { 1.0 } else { 0.0 };
                e = e.max((g.get(i, j) - t).abs());
            }
        }
        e
    }

    #[test]
    fn norms_examples() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 2.0]]).unwrap();
        assert_eq!(l1_norm(&a), 3.0);
        assert_eq!(frob_norm_sq(&a), 5.0);
        assert_eq!(l1_norm(&Matrix::zeros(2, 2)), 0.0);
        assert_eq!(frob_norm_sq(&Matrix::zeros(2, 2)), 0.0);
        let b = Matrix::from_rows(&[[-1.0, -1.0], [-1.0, -1.0]]).unwrap();
        assert_eq!(l1_norm(&b), 4.0);
        assert_eq!(frob_norm_sq(&Matrix::identity(3)), 3.0);
    }

    #[test]
    fn spectral_norm_diag() {
        let a = Matrix::from_diag(&[3.0, 1.0]);
        let s = spectral_norm(&a, 1e-9, 1000, &mut SeededRng::new(1)).unwrap();
        assert!((s - 3.0).abs() <= 1e-9 * 3.0);
    }

    #[test]
    fn spectral_norm_zero() {
        let s = spectral_norm(&Matrix::zeros(3, 2), 1e-9, 1000, &mut SeededRng::new(1)).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn spectral_norm_matches_oracle() {
        for seed in 0..10 {
            let a = random(5, 4, seed);
            let s = spectral_norm(&a, 1e-12, 100_000, &mut SeededRng::new(seed)).unwrap();
            let o = oracle_sv(&a)[0];
            assert!((s - o).abs() <= 1e-8 * o, "{s} vs {o}");
        }
    }

    #[test]
    fn spectral_norm_reports_best_estimate() {
        let a = random(30, 30, 4);
        match spectral_norm(&a, 1e-15, 2, &mut SeededRng::new(0)) {
            Err(Error::NoConvergence { iterations, estimate }) => {
                assert_eq!(iterations, 2);
                assert!(estimate > 0.0);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn sigma_min_examples() {
        assert!((sigma_min(&Matrix::from_diag(&[3.0, 1.0])).unwrap() - 1.0).abs() < 1e-14);
        let r = Matrix::from_rows(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [1.0, 0.0, 1.0]]).unwrap();
        assert!(sigma_min(&r).unwrap() < 1e-10);
        for seed in 0..5 {
            let a = random(6, 4, 100 + seed);
            let o = *oracle_sv(&a).last().unwrap();
            assert!((sigma_min(&a).unwrap() - o).abs() < 1e-12 * oracle_sv(&a)[0]);
        }
    }

    #[test]
    fn sigma_min_too_large() {
        let a = Matrix::zeros(513, 513);
        assert!(matches!(sigma_min(&a), Err(Error::TooLargeForDense { .. })));
    }

    #[test]
    fn dense_svd_matches_oracle_and_reconstructs() {
        for (m, n) in [(7, 4), (4, 7), (5, 5), (1, 3), (3, 1)] {
            let a = random(m, n, (m * 10 + n) as u64);
            let svd = dense_svd(&a).unwrap();
            let o = oracle_sv(&a);
            for (x, y) in svd.sigma.iter().zip(&o) {
                assert!((x - y).abs() < 1e-12 * o[0]);
            }
            let r = m.min(n);
            let back = reconstruct(&svd.u, &svd.sigma, &svd.v, r);
            assert!(frob_norm(&back.sub(&a)) < 1e-12 * frob_norm(&a));
            assert!(orth_err(&svd.u) < 1e-12);
            assert!(orth_err(&svd.v) < 1e-12);
        }
    }

    #[test]
    fn dense_svd_rank_deficient_keeps_orthonormal_u() {
        let a = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0], [0.0, 0.0]]).unwrap();
        let svd = dense_svd(&a).unwrap();
        assert!((svd.sigma[0] - 2.0).abs() < 1e-14);
        assert!(svd.sigma[1].abs() < 1e-14);
        assert!(orth_err(&svd.u) < 1e-12);
    }

    #[test]
    fn truncated_svd_diag() {
        let s = SparseSketch::from_dense(&Matrix::from_diag(&[5.0, 3.0, 1.0]));
        let r = truncated_svd(&s, 2, 10, 2, &mut SeededRng::new(3)).unwrap();
        assert!((r.sigma[0] - 5.0).abs() < 1e-12);
        assert!((r.sigma[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_svd_rank_one() {
        let u = [1.0, -2.0, 0.5, 3.0];
        let v = [0.5, 1.0, -1.0];
        let a = Matrix::from_fn(4, 3, |i, j| u[i] * v[j]);
        let s = SparseSketch::from_dense(&a);
        let r = truncated_svd(&s, 1, 10, 2, &mut SeededRng::new(9)).unwrap();
        let nu: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((r.sigma[0] - nu * nv).abs() < 1e-12 * nu * nv);
        // Largest-magnitude entry of v is tied (1.0 and -1.0); the first wins.
        for j in 0..3 {
            assert!((r.v.get(j, 0) - v[j] / nv).abs() < 1e-10);
        }
    }

    #[test]
    fn truncated_svd_sparse_matches_oracle() {
        let mut rng = SeededRng::new(42);
        let mut trips = Vec::new();
        for i in 0..30 {
            for j in 0..20 {
                if rng.random::<f64>() < 0.3 {
                    trips.push(Triple::new(i, j, rng.sample::<f64, _>(StandardNormal)));
                }
            }
        }
        let s = SparseSketch::from_triples(30, 20, 600, trips).unwrap();
        let d = s.densify();
        let r = truncated_svd(&s, 3, 10, 2, &mut SeededRng::new(5)).unwrap();
        let o = oracle_sv(&d);
        for j in 0..3 {
            assert!((r.sigma[j] - o[j]).abs() <= 1e-6 * o[j], "{} vs {}", r.sigma[j], o[j]);
        }
        assert!(orth_err(&r.u) < 1e-10);
        assert!(orth_err(&r.v) < 1e-10);
        let resid = d.matmul(&r.v).sub(&Matrix::from_fn(30, 3, |i, j| r.u.get(i, j) * r.sigma[j]));
        assert!(frob_norm(&resid) <= 1e-6 * frob_norm(&d));
    }

    #[test]
    fn truncated_svd_rank_guard() {
        let a = Matrix::identity(3);
        assert!(matches!(
            truncated_svd(&a, 4, 10, 2, &mut SeededRng::new(0)),
            Err(Error::RankTooLarge { k: 4, max: 3 })
        ));
        assert!(matches!(
            truncated_svd(&a, 0, 10, 2, &mut SeededRng::new(0)),
            Err(Error::RankTooLarge { .. })
        ));
    }

    #[test]
    fn truncated_svd_deterministic() {
        let a = random(40, 25, 8);
        let r1 = truncated_svd(&a, 4, 10, 2, &mut SeededRng::new(77)).unwrap();
        let r2 = truncated_svd(&a, 4, 10, 2, &mut SeededRng::new(77)).unwrap();
        assert_eq!(r1.sigma, r2.sigma);
        assert_eq!(r1.v, r2.v);
    }

    #[test]
    fn sign_convention_holds() {
        let a = random(12, 9, 21);
        let r = truncated_svd(&a, 4, 10, 2, &mut SeededRng::new(1)).unwrap();
        for j in 0..4 {
            let col = r.v.column(j);
            let big = col.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big >= 0.0);
        }
    }

    #[test]
    fn difference_operator_matches_dense() {
        let a = random(6, 5, 1);
        let s = SparseSketch::from_triples(6, 5, 2, vec![Triple::new(1, 2, 4.0), Triple::new(5, 0, -1.0)]).unwrap();
        let d = a.sub(&s.densify());
        let x = random(5, 2, 2);
        let y = random(6, 2, 3);
        let op = Difference { dense: &a, sketch: &s };
        assert!(frob_norm(&op.mul_block(&x).sub(&d.matmul(&x))) < 1e-12);
        assert!(frob_norm(&op.tmul_block(&y).sub(&d.tmatmul(&y))) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn spectral_between_bounds(seed in 0u64..10_000, m in 1usize..8, n in 1usize..8) {
            let a = random(m, n, seed);
            let s = spectral_norm_estimate(&a, &mut SeededRng::new(seed));
            let f = frob_norm(&a);
            prop_assert!(s <= f * (1.0 + 1e-12));
            prop_assert!(s >= f / ((m.min(n)) as f64).sqrt() * (1.0 - 1e-6));
        }

        #[test]
        fn spectral_rank_one_equals_frobenius(seed in 0u64..10_000, m in 1usize..8, n in 1usize..8) {
            let u = random(m, 1, seed);
            let v = random(1, n, seed + 1);
            let a = u.matmul(&v);
            let s = spectral_norm_estimate(&a, &mut SeededRng::new(seed));
            prop_assert!((s - frob_norm(&a)).abs() <= 1e-8 * frob_norm(&a));
        }

        #[test]
        fn sigma_min_below_truncated_spectrum(seed in 0u64..10_000, m in 2usize..9, n in 2usize..9) {
            let a = random(m, n, seed);
            let smin = sigma_min(&a).unwrap();
            let k = m.min(n);
            let r = truncated_svd(&a, k, 10, 2, &mut SeededRng::new(seed)).unwrap();
            for s in &r.sigma {
                prop_assert!(smin <= s * (1.0 + 1e-9) + 1e-12);
            }
        }

        #[test]
        fn truncated_residual_small(seed in 0u64..10_000, m in 3usize..20, n in 3usize..20, k in 1usize..4) {
            let a = random(m, n, seed);
            let k = k.min(m.min(n));
            let r = truncated_svd(&a, k, 10, 2, &mut SeededRng::new(seed)).unwrap();
            let us = Matrix::from_fn(m, k, |i, j| r.u.get(i, j) * r.sigma[j]);
            prop_assert!(frob_norm(&a.matmul(&r.v).sub(&us)) <= 1e-6 * frob_norm(&a));
            for w in r.sigma.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
        }
    }
}
