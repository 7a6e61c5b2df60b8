//! I.i.d. element sampling and the rescaled sketch built from it.

use rand::Rng;
use rayon::prelude::*;

use crate::distributions::{
    leverage_probs, ElementDistribution, HybridDistribution, L2Baseline, LeverageSampling, SamplingLaw,
};
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm_estimate, Difference};
use crate::matrix::{Matrix, SparseSketch, Triple};
use crate::rng::SeededRng;

const LEVERAGE_STREAM: u64 = 0x1e7e_5a6e;
const ERROR_SEED: u64 = 0x5eed_e550;

/// Law, sample count and randomness for one sketch.
#[derive(Clone, Debug)]
pub struct SamplingPlan {
    pub law: SamplingLaw,
    pub samples: usize,
    pub rng: SeededRng,
}

impl SamplingPlan {
    pub fn new(law: SamplingLaw, samples: usize, rng: SeededRng) -> Result<Self> {
        let plan = Self { law, samples, rng };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidParameter("sample count must be at least 1".into()));
        }
        self.law.validate()
    }
}

/// Cumulative table over the positive-probability entries of a law.
pub struct CdfSampler {
    cumulative: Vec<f64>,
    index: Vec<usize>,
    cols: usize,
}

impl CdfSampler {
    pub fn new(dist: &dyn ElementDistribution) -> Result<Self> {
        let (m, n) = dist.shape();
        let mut cumulative = Vec::new();
        let mut index = Vec::new();
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..n {
                let p = dist.prob(i, j);
                if p > 0.0 {
                    acc += p;
                    cumulative.push(acc);
                    index.push(i * n + j);
                }
            }
        }
        if index.is_empty() {
            return Err(Error::ZeroMatrix);
        }
        Ok(Self {
            cumulative,
            index,
            cols: n,
        })
    }

    pub fn support_size(&self) -> usize {
        self.index.len()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let total = *self.cumulative.last().expect("nonempty");
        let u = rng.random::<f64>() * total;
        let k = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.index.len() - 1);
        let flat = self.index[k];
        (flat / self.cols, flat % self.cols)
    }
}

fn resolve<'a>(
    a: &'a Matrix,
    law: SamplingLaw,
    rng: &SeededRng,
) -> Result<Box<dyn ElementDistribution + Sync + 'a>> {
    Ok(match law {
        SamplingLaw::L1 => Box::new(HybridDistribution::new(a, 1.0)?),
        SamplingLaw::Hybrid { alpha } => Box::new(HybridDistribution::new(a, alpha)?),
        SamplingLaw::L2 => Box::new(L2Baseline::new(a)?),
        SamplingLaw::L2Truncated { threshold } => Box::new(L2Baseline::truncated(a, threshold)?),
        SamplingLaw::Leverage { rank } => {
            if a.as_slice().iter().all(|&x| x == 0.0) {
                return Err(Error::ZeroMatrix);
            }
            let mut r = rng.substream(LEVERAGE_STREAM);
            Box::new(LeverageSampling {
                matrix: a,
                scores: leverage_probs(a, rank, &mut r)?,
            })
        }
    })
}

fn prepare(a: &Matrix, plan: &SamplingPlan) -> Result<()> {
    a.check_valid()?;
    plan.validate()
}

/// Draws the multiset Ω of `plan.samples` index pairs.
pub fn sample_indices(a: &Matrix, plan: &SamplingPlan) -> Result<Vec<(usize, usize)>> {
    prepare(a, plan)?;
    let dist = resolve(a, plan.law, &plan.rng)?;
    let cdf = CdfSampler::new(dist.as_ref())?;
    let mut rng = plan.rng.clone();
    Ok((0..plan.samples).map(|_| cdf.draw(&mut rng)).collect())
}

fn accumulate(
    dist: &dyn ElementDistribution,
    mut omega: Vec<(usize, usize)>,
    s: usize,
) -> Result<SparseSketch> {
    let (m, n) = dist.shape();
    omega.sort_unstable();
    let mut out = Vec::new();
    let mut k = 0;
    while k < omega.len() {
        let (i, j) = omega[k];
        let mut count = 0usize;
        while k < omega.len() && omega[k] == (i, j) {
            count += 1;
            k += 1;
        }
        let v = dist.value(i, j);
        if v != 0.0 {
            out.push(Triple::new(i, j, count as f64 * v / (s as f64 * dist.prob(i, j))));
        }
    }
    SparseSketch::from_triples(m, n, s, out)
}

/// `S_Ω(A) = (1/s) Σ_t A_{i_t j_t}/p_{i_t j_t} e_{i_t} e_{j_t}ᵀ`, repeated draws merged.
pub fn build_sketch(a: &Matrix, plan: &SamplingPlan) -> Result<SparseSketch> {
    prepare(a, plan)?;
    let dist = resolve(a, plan.law, &plan.rng)?;
    let cdf = CdfSampler::new(dist.as_ref())?;
    let mut rng = plan.rng.clone();
    let omega = (0..plan.samples).map(|_| cdf.draw(&mut rng)).collect();
    accumulate(dist.as_ref(), omega, plan.samples)
}

/// Like [`build_sketch`] but splits the draws over `shards` workers, shard
/// `t` using `plan.rng.substream(t)`. The output depends on `shards` but not on
/// the thread count.
pub fn build_sketch_sharded(a: &Matrix, plan: &SamplingPlan, shards: usize) -> Result<SparseSketch> {
    prepare(a, plan)?;
    let shards = shards.clamp(1, plan.samples);
    let dist = resolve(a, plan.law, &plan.rng)?;
    let cdf = CdfSampler::new(dist.as_ref())?;
    let base = plan.samples / shards;
    let extra = plan.samples % shards;
    let parts: Vec<Vec<(usize, usize)>> = (0..shards)
        .into_par_iter()
        .map(|t| {
            let count = base + usize::from(t < extra);
            let mut rng = plan.rng.substream(t as u64);
            (0..count).map(|_| cdf.draw(&mut rng)).collect()
        })
        .collect();
    accumulate(dist.as_ref(), parts.concat(), plan.samples)
}

/// `‖A − Ã‖₂` by power iteration on the implicit difference.
pub fn sketch_error(a: &Matrix, sketch: &SparseSketch) -> Result<f64> {
    if a.shape() != sketch.shape() {
        return Err(Error::ShapeMismatch {
            expected: a.shape(),
            found: sketch.shape(),
        });
    }
    let op = Difference { dense: a, sketch };
    Ok(spectral_norm_estimate(&op, &mut SeededRng::new(ERROR_SEED)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::l1_prob;
    use crate::linalg::{frob_norm, spectral_norm_estimate};
    use crate::stats::chi_square_p_value as chi_square_p;
    use proptest::prelude::*;
    use rand::Rng;

    fn a2() -> Matrix {
        Matrix::from_rows(&[[1.0, 0.0], [0.0, 2.0]]).unwrap()
    }

    fn plan(law: SamplingLaw, s: usize, seed: u64) -> SamplingPlan {
        SamplingPlan::new(law, s, SeededRng::new(seed)).unwrap()
    }

    #[test]
    fn frequency_matches_hybrid_law() {
        let omega = sample_indices(&a2(), &plan(SamplingLaw::Hybrid { alpha: 0.5 }, 60_000, 1)).unwrap();
        let f = omega.iter().filter(|&&p| p == (1, 1)).count() as f64 / 60_000.0;
        assert!((f - 11.0 / 15.0).abs() < 0.01, "{f}");
        assert!(omega.iter().all(|&(i, j)| i == j));
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(SamplingPlan::new(SamplingLaw::L1, 0, SeededRng::new(0)).is_err());
    }

    #[test]
    fn point_mass() {
        let mut a = Matrix::zeros(3, 3);
        a.set(2, 1, -4.0);
        let omega = sample_indices(&a, &plan(SamplingLaw::Hybrid { alpha: 0.3 }, 50, 2)).unwrap();
        assert!(omega.iter().all(|&p| p == (2, 1)));
        let s = build_sketch(&a, &plan(SamplingLaw::Hybrid { alpha: 0.3 }, 50, 2)).unwrap();
        assert_eq!(s.entries(), &[Triple::new(2, 1, -4.0)]);
    }

    #[test]
    fn zero_matrix_is_error() {
        let z = Matrix::zeros(2, 2);
        for law in [
            SamplingLaw::L1,
            SamplingLaw::L2,
            SamplingLaw::Hybrid { alpha: 0.5 },
            SamplingLaw::Leverage { rank: 1 },
        ] {
            assert!(matches!(build_sketch(&z, &plan(law, 4, 0)), Err(Error::ZeroMatrix)));
        }
    }

    #[test]
    fn single_draw_value() {
        let a = Matrix::from_rows(&[[1.0, -3.0], [0.5, 2.0]]).unwrap();
        let s = build_sketch(&a, &plan(SamplingLaw::L1, 1, 9)).unwrap();
        assert_eq!(s.nnz(), 1);
        let t = s.entries()[0];
        let p = l1_prob(&a, t.row, t.col).unwrap();
        assert!((t.value - a.get(t.row, t.col) / p).abs() < 1e-12);
    }

    #[test]
    fn sketch_equals_eq2_sum() {
        let a = Matrix::from_rows(&[[1.0, -3.0, 0.0], [0.5, 2.0, 7.0]]).unwrap();
        let p = plan(SamplingLaw::Hybrid { alpha: 0.4 }, 25, 3);
        let omega = sample_indices(&a, &p).unwrap();
        let d = HybridDistribution::new(&a, 0.4).unwrap();
        let mut expect = Matrix::zeros(2, 3);
        for &(i, j) in &omega {
            let v = expect.get(i, j) + a.get(i, j) / (25.0 * d.prob(i, j));
            expect.set(i, j, v);
        }
        let got = build_sketch(&a, &p).unwrap();
        assert!(frob_norm(&got.densify().sub(&expect)) < 1e-12 * frob_norm(&expect));
        assert!(got.nnz() <= 25);
    }

    #[test]
    fn unbiased_mean() {
        let mut r = SeededRng::new(5);
        let a = Matrix::from_fn(4, 4, |_, _| r.random::<f64>() * 2.0 - 1.0);
        let trials = 2000;
        let mut sum = Matrix::zeros(4, 4);
        let mut sumsq = Matrix::zeros(4, 4);
        for t in 0..trials {
            let d = build_sketch(&a, &plan(SamplingLaw::Hybrid { alpha: 0.5 }, 8, 1000 + t))
                .unwrap()
                .densify();
            for (k, x) in d.as_slice().iter().enumerate() {
                sum.as_mut_slice()[k] += x;
                sumsq.as_mut_slice()[k] += x * x;
            }
        }
        let nt = trials as f64;
        for k in 0..16 {
            let mean = sum.as_slice()[k] / nt;
            let var = sumsq.as_slice()[k] / nt - mean * mean;
            let se = (var / nt).sqrt();
            assert!((mean - a.as_slice()[k]).abs() <= 5.0 * se + 1e-12, "entry {k}");
        }
    }

    #[test]
    fn deterministic() {
        let a = Matrix::from_fn(5, 6, |i, j| (i as f64 - j as f64).sin());
        let p = plan(SamplingLaw::Hybrid { alpha: 0.7 }, 40, 11);
        assert_eq!(build_sketch(&a, &p).unwrap(), build_sketch(&a, &p).unwrap());
    }

    #[test]
    fn sharded_independent_of_thread_count() {
        let a = Matrix::from_fn(10, 10, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let p = plan(SamplingLaw::Hybrid { alpha: 0.6 }, 200, 4);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let x = one.install(|| build_sketch_sharded(&a, &p, 8).unwrap());
        let y = four.install(|| build_sketch_sharded(&a, &p, 8).unwrap());
        assert_eq!(x, y);
    }

    fn counts(omegas: impl Iterator<Item = (usize, usize)>, n: usize, cells: usize) -> Vec<f64> {
        let mut c = vec![0.0; cells];
        for (i, j) in omegas {
            c[i * n + j] += 1.0;
        }
        c
    }

    #[test]
    fn sharded_matches_serial_law() {
        let mut r = SeededRng::new(8);
        let a = Matrix::from_fn(5, 5, |_, _| if r.random::<f64>() < 0.2 { 0.0 } else { r.random::<f64>() - 0.5 });
        let law = SamplingLaw::Hybrid { alpha: 0.35 };
        let d = HybridDistribution::new(&a, 0.35).unwrap();
        let probs: Vec<f64> = (0..25).map(|k| d.prob(k / 5, k % 5)).collect();
        let p = plan(law, 50_000, 21);
        let sharded = build_sketch_sharded(&a, &p, 7).unwrap();
        // Each stored value is count * A/(s p); recover counts.
        let mut obs = vec![0.0; 25];
        for t in sharded.entries() {
            obs[t.row * 5 + t.col] = (t.value * 50_000.0 * d.prob(t.row, t.col) / a.get(t.row, t.col)).round();
        }
        assert!(chi_square_p(&obs, &probs) > 0.01);
        let serial = counts(sample_indices(&a, &p).unwrap().into_iter(), 5, 25);
        assert!(chi_square_p(&serial, &probs) > 0.01);
    }

    #[test]
    fn leverage_never_stores_zero_entries() {
        let a = Matrix::from_rows(&[[1.0, 0.0, 2.0], [0.0, 3.0, 0.0], [1.0, 0.0, 1.0]]).unwrap();
        let s = build_sketch(&a, &plan(SamplingLaw::Leverage { rank: 2 }, 300, 2)).unwrap();
        assert!(s.entries().iter().all(|t| a.get(t.row, t.col) != 0.0));
    }

    #[test]
    fn sketch_error_examples() {
        let a = Matrix::from_rows(&[[3.0, 1.0], [0.0, -2.0], [1.0, 1.0]]).unwrap();
        let exact = SparseSketch::from_dense(&a);
        assert!(sketch_error(&a, &exact).unwrap() < 1e-12);
        let empty = SparseSketch::from_triples(3, 2, 1, vec![]).unwrap();
        let norm = spectral_norm_estimate(&a, &mut SeededRng::new(1));
        assert!((sketch_error(&a, &empty).unwrap() - norm).abs() < 1e-8 * norm);
        let wrong = SparseSketch::from_triples(2, 2, 1, vec![]).unwrap();
        assert!(matches!(sketch_error(&a, &wrong), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn error_decays_with_samples() {
        let mut r = SeededRng::new(12);
        let a = Matrix::from_fn(30, 30, |_, _| r.random::<f64>() - 0.5);
        let mut prev = f64::INFINITY;
        for s in [200usize, 400, 800, 1600, 3200] {
            let mut errs: Vec<f64> = (0..5)
                .map(|t| {
                    let sk = build_sketch(&a, &plan(SamplingLaw::Hybrid { alpha: 0.5 }, s, 500 + t)).unwrap();
                    sketch_error(&a, &sk).unwrap()
                })
                .collect();
            errs.sort_by(f64::total_cmp);
            assert!(errs[2] < prev);
            prev = errs[2];
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn budget_and_support(seed in 0u64..10_000, s in 1usize..60, alpha in 0.01f64..=1.0) {
            let mut r = SeededRng::new(seed);
            let a = Matrix::from_fn(4, 5, |_, _| if r.random::<f64>() < 0.4 { 0.0 } else { r.random::<f64>() - 0.5 });
            prop_assume!(a.nnz() > 0);
            let sk = build_sketch(&a, &plan(SamplingLaw::Hybrid { alpha }, s, seed)).unwrap();
            prop_assert!(sk.nnz() <= s);
            for t in sk.entries() {
                prop_assert!(a.get(t.row, t.col) != 0.0);
            }
        }
    }
}
