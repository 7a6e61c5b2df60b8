use hybrid_sketch::alphaopt::{optimize_alpha, BoundInputs, DEFAULT_GRID_SIZE};
use hybrid_sketch::datasets::{
    gen_noisy_binary, gen_noisy_low_rank, gen_techtc_like, read_matrix_market, read_sketch, write_matrix_market,
    write_sketch, CoordinateStream, MatrixMetrics, NoisyBinarySpec, TechTcLikeSpec,
};
use hybrid_sketch::linalg::{frob_norm, truncated_svd};
use hybrid_sketch::pca::{center_columns, fast_pca, pca_bounds, pca_from_sketch, subspace_affinity, PcaOptions};
use hybrid_sketch::sparsifier::{build_sketch, build_sketch_sharded, sketch_error};
use hybrid_sketch::streaming::{mix_to_hybrid, one_pass_sample};
use hybrid_sketch::{Error, Matrix, SamplingLaw, SamplingPlan, SeededRng, SparseSketch, Triple};

#[test]
fn techtc_like_prefers_pure_l1() {
    for seed in 0..2 {
        let a = gen_techtc_like(&TechTcLikeSpec {
            seed,
            ..Default::default()
        })
        .unwrap();
        let met = MatrixMetrics::compute(&a).unwrap();
        assert!(met.rs0 >= met.rs1, "{met:?}");
        for eps in [0.05, 0.75] {
            let inputs = BoundInputs::compute(&a, eps, 0.1, &mut SeededRng::new(seed)).unwrap();
            let prof = optimize_alpha(&a, &inputs, DEFAULT_GRID_SIZE).unwrap();
            assert_eq!(prof.alpha_star, 1.0, "seed {seed} eps {eps}");
        }
    }
}

#[test]
fn file_stream_matches_in_memory_pass() {
    let dir = tempfile::tempdir().unwrap();
    let (_, a) = gen_noisy_binary(&NoisyBinarySpec::new(40, 0.1, 3)).unwrap();
    let plan = SamplingPlan::new(SamplingLaw::Hybrid { alpha: 0.7 }, 400, SeededRng::new(1)).unwrap();
    let sk = build_sketch(&a, &plan).unwrap();
    let path = dir.path().join("sk.mtx");
    write_sketch(&path, &sk).unwrap();
    assert_eq!(read_sketch(&path).unwrap(), sk);

    let from_file: Vec<Triple> = CoordinateStream::open(&path).unwrap().map(|t| t.unwrap()).collect();
    assert_eq!(from_file, sk.entries());
    let rng = SeededRng::new(9);
    let st_file = one_pass_sample(from_file.iter().copied(), 50, false, &rng).unwrap();
    let st_mem = one_pass_sample(sk.entries().iter().copied(), 50, false, &rng).unwrap();
    let x = mix_to_hybrid(&st_file, 0.5, &mut SeededRng::new(3)).unwrap();
    let y = mix_to_hybrid(&st_mem, 0.5, &mut SeededRng::new(3)).unwrap();
    assert_eq!(x, y);

    let dense = dir.path().join("a.mtx");
    write_matrix_market(&dense, &a).unwrap();
    assert_eq!(read_matrix_market(&dense).unwrap(), a);
}

#[test]
fn sharded_sketch_has_comparable_error() {
    let (_, a) = gen_noisy_binary(&NoisyBinarySpec::new(60, 0.1, 5)).unwrap();
    let plan = SamplingPlan::new(SamplingLaw::Hybrid { alpha: 0.6 }, 3000, SeededRng::new(4)).unwrap();
    let e1 = sketch_error(&a, &build_sketch(&a, &plan).unwrap()).unwrap();
    let e2 = sketch_error(&a, &build_sketch_sharded(&a, &plan, 4).unwrap()).unwrap();
    assert!(e2 < 2.0 * e1 && e1 < 2.0 * e2, "{e1} {e2}");
}

#[test]
fn pca_exact_limit_recovers_principal_directions() {
    let mut rng = SeededRng::new(11);
    let a = center_columns(&gen_noisy_low_rank(80, 30, 4, 0.05, &mut rng));
    let opts = PcaOptions {
        alpha: Some(1.0),
        ..Default::default()
    };
    let exact = truncated_svd(&a, 4, 10, 2, &mut SeededRng::new(0)).unwrap();
    let res = pca_from_sketch(&a, SparseSketch::from_dense(&a), 4, 1.0, &opts, &mut SeededRng::new(1)).unwrap();
    assert!(1.0 - subspace_affinity(&exact.v, &res.components) < 1e-6);
    assert!(res.surrogate_error.unwrap() < 1e-8 * frob_norm(&a));
}

#[test]
fn pca_on_sampled_sketch_satisfies_bounds() {
    let mut rng = SeededRng::new(12);
    let a = center_columns(&gen_noisy_low_rank(120, 60, 3, 0.1, &mut rng));
    let s = (0.3 * (120 * 60) as f64) as usize;
    let res = fast_pca(&a, 3, s, &PcaOptions::default(), &mut SeededRng::new(2)).unwrap();
    assert!(res.alpha > 0.0 && res.alpha <= 1.0);
    assert!(res.subspace_affinity.unwrap() > 0.9, "{res:?}");
    let v = &res.components;
    let gram = v.tmatmul(v);
    assert!(frob_norm(&gram.sub(&Matrix::identity(3))) < 1e-10);
    let rep = pca_bounds(&a, &res.sketch, 3).unwrap();
    assert!(rep.all_passed, "{rep:?}");
    assert!(matches!(
        fast_pca(&a, 61, s, &PcaOptions::default(), &mut SeededRng::new(2)),
        Err(Error::RankTooLarge { k: 61, max: 60 })
    ));
}

#[test]
fn sketch_error_decays_with_samples() {
    let (_, a) = gen_noisy_binary(&NoisyBinarySpec::new(80, 0.05, 1)).unwrap();
    let errs: Vec<f64> = [500usize, 2000, 8000, 32000]
        .iter()
        .map(|&s| {
            let plan = SamplingPlan::new(SamplingLaw::Hybrid { alpha: 0.6 }, s, SeededRng::new(s as u64)).unwrap();
            sketch_error(&a, &build_sketch(&a, &plan).unwrap()).unwrap()
        })
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}
