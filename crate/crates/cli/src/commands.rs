use std::fs::File;
use std::io::BufReader;

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::Serialize;

use hybrid_sketch::alphaopt::{optimize_alpha, profile_at, AlphaProfile, BoundInputs, DEFAULT_GRID_SIZE};
use hybrid_sketch::datasets::{
    generate_to, read_matrix_market, write_matrix_market, write_sketch, CoordinateStream, DatasetManifest,
    GeneratorSpec, MatrixMetrics, NoisyBinarySpec, PowerLawSpec, TechTcLikeSpec,
};
use hybrid_sketch::experiments::{push_trials, run_criteria, ExperimentConfig, Outcome, Record, Trial};
use hybrid_sketch::linalg::spectral_norm_estimate;
use hybrid_sketch::pca::{center_columns, fast_pca, pca_bounds, CenteringCheck, PcaBoundReport, PcaOptions, PcaResult};
use hybrid_sketch::sparsifier::{build_sketch, sketch_error};
use hybrid_sketch::stats::median;
use hybrid_sketch::streaming::{estimate_alpha_iterative, mix_to_hybrid, read_triples, StreamSampler};
use hybrid_sketch::{Matrix, Result as CoreResult, SamplingLaw, SamplingPlan, SeededRng, Triple};

use crate::args::{AlphaSpec, Format, Generator, RunArgs, StreamFormat};
use crate::output::{emit, sibling, RunConfig};

const DEFAULT_SAMPLE_MULT: f64 = 3.0;

fn generator_spec(args: &RunArgs, gen: Generator) -> GeneratorSpec {
    match gen {
        Generator::NoisyBinary => GeneratorSpec::NoisyBinary(NoisyBinarySpec {
            n: args.size.unwrap_or(500),
            sigma: args.sigma,
            seed: args.seed,
            ..Default::default()
        }),
        Generator::PowerLaw => GeneratorSpec::PowerLaw(PowerLawSpec {
            n: args.size.unwrap_or(500),
            k: args.k,
            gamma: args.gamma,
            seed: args.seed,
        }),
        Generator::TechtcLike => GeneratorSpec::TechtcLike(TechTcLikeSpec {
            rows: args.size.unwrap_or(TechTcLikeSpec::default().rows),
            seed: args.seed,
            ..Default::default()
        }),
    }
}

fn load_matrix(args: &RunArgs) -> anyhow::Result<Matrix> {
    match (&args.input, args.gen) {
        (Some(path), _) => read_matrix_market(path).with_context(|| format!("reading {}", path.display())),
        (None, Some(gen)) => Ok(generator_spec(args, gen).generate()?),
        (None, None) => bail!("one of --input or --gen is required"),
    }
}

/// Sample counts from `--samples` or `--sample-mult · k(m+n)`.
fn sample_counts(args: &RunArgs, shape: Option<(usize, usize)>) -> anyhow::Result<Vec<usize>> {
    let counts = if !args.samples.is_empty() {
        args.samples.clone()
    } else {
        let Some((m, n)) = shape else {
            bail!("--sample-mult needs the matrix shape; pass --samples for headerless streams");
        };
        let mults = if args.sample_mult.is_empty() {
            vec![DEFAULT_SAMPLE_MULT]
        } else {
            args.sample_mult.clone()
        };
        mults
            .iter()
            .map(|&c| {
                if !(c > 0.0 && c.is_finite()) {
                    bail!("--sample-mult must be positive, got {c}");
                }
                Ok((c * (args.k * (m + n)) as f64).round() as usize)
            })
            .collect::<anyhow::Result<_>>()?
    };
    if counts.contains(&0) {
        bail!("sample count must be at least 1");
    }
    Ok(counts)
}

fn single_alpha(args: &RunArgs, command: &str) -> anyhow::Result<AlphaSpec> {
    match args.alpha.as_slice() {
        [one] => Ok(*one),
        _ => bail!("{command} takes a single --alpha value"),
    }
}

fn check_eps_delta(args: &RunArgs) -> anyhow::Result<()> {
    if !(args.epsilon > 0.0 && args.epsilon.is_finite()) {
        bail!("--epsilon must be positive, got {}", args.epsilon);
    }
    if !(args.delta > 0.0 && args.delta < 1.0) {
        bail!("--delta must lie in (0, 1), got {}", args.delta);
    }
    Ok(())
}

fn bound_inputs(a: &Matrix, args: &RunArgs) -> anyhow::Result<BoundInputs> {
    check_eps_delta(args)?;
    Ok(BoundInputs::compute(a, args.epsilon, args.delta, &mut SeededRng::with_stream(args.seed, 1))?)
}

#[derive(Serialize)]
struct AlphaOptResult {
    profile: AlphaProfile,
    metrics: MatrixMetrics,
    pinned: bool,
}

pub fn alpha_opt(cfg: &RunConfig, args: &RunArgs) -> anyhow::Result<()> {
    let a = load_matrix(args)?;
    let inputs = bound_inputs(&a, args)?;
    let weight = single_alpha(args, "alpha-opt")?.hybrid_weight("alpha-opt")?;
    let profile = match weight {
        None => optimize_alpha(&a, &inputs, DEFAULT_GRID_SIZE)?,
        Some(alpha) => profile_at(&a, &inputs, DEFAULT_GRID_SIZE, alpha)?,
    };
    log::info!("alpha* = {:.4}, s* = {}", profile.alpha_star, profile.s_star);
    let s = profile.s_star as usize;
    let mut recs: Vec<Record> = profile
        .grid
        .iter()
        .map(|&(alpha, f)| Record::new("hybrid", Some(alpha), s, args.k, Trial::Index(0), "f", f))
        .collect();
    let star = Some(profile.alpha_star);
    for (metric, value) in [
        ("alpha_star", profile.alpha_star),
        ("s_star", profile.s_star as f64),
        ("f_star", profile.f_star),
        ("rho_sq", profile.rho_sq),
        ("gamma", profile.gamma),
    ] {
        recs.push(Record::new("hybrid", star, s, args.k, Trial::Index(0), metric, value));
    }
    let result = AlphaOptResult {
        metrics: MatrixMetrics::compute(&a)?,
        pinned: weight.is_some(),
        profile,
    };
    emit(cfg, args, Format::Json, result, &recs)
}

#[derive(Serialize)]
struct SparsifyRun {
    law: SamplingLaw,
    samples: usize,
    relative_errors: Vec<f64>,
    median: f64,
    mean: f64,
    sketch_file: Option<String>,
}

pub fn sparsify(cfg: &RunConfig, args: &RunArgs) -> anyhow::Result<()> {
    let a = load_matrix(args)?;
    let counts = sample_counts(args, Some(a.shape()))?;
    let spectral = spectral_norm_estimate(&a, &mut SeededRng::with_stream(args.seed, 2));
    let mut star = None;
    let mut laws = Vec::new();
    for spec in &args.alpha {
        let law = spec.to_law(|| match star {
            Some(s) => Ok(s),
            None => {
                let inputs = bound_inputs(&a, args)?;
                let s = optimize_alpha(&a, &inputs, DEFAULT_GRID_SIZE)?.alpha_star;
                log::info!("alpha* = {s:.4}");
                star = Some(s);
                Ok(s)
            }
        })?;
        law.validate()?;
        laws.push(law);
    }
    let single = laws.len() * counts.len() == 1;
    let mut recs = Vec::new();
    let mut runs = Vec::new();
    for (li, law) in laws.iter().enumerate() {
        for (si, &s) in counts.iter().enumerate() {
            let stream = (li * counts.len() + si) as u64;
            let sketches: Vec<_> = (0..args.trials)
                .into_par_iter()
                .map(|t| {
                    let plan = SamplingPlan::new(*law, s, SeededRng::with_stream(args.seed, 100 + stream).substream(t))?;
                    let sk = build_sketch(&a, &plan)?;
                    let err = sketch_error(&a, &sk)? / spectral;
                    Ok((sk, err))
                })
                .collect::<CoreResult<_>>()?;
            let errs: Vec<f64> = sketches.iter().map(|x| x.1).collect();
            let nnz: Vec<f64> = sketches.iter().map(|x| x.0.nnz() as f64).collect();
            push_trials(&mut recs, law.name(), law.alpha(), s, args.k, "rel_error", &errs);
            push_trials(&mut recs, law.name(), law.alpha(), s, args.k, "nnz", &nnz);
            let sketch_file = match &args.out {
                Some(out) => {
                    let tag = if single { "sketch".to_string() } else { format!("sketch-{stream}") };
                    let path = sibling(out, &tag);
                    write_sketch(&path, &sketches[0].0)?;
                    Some(path.display().to_string())
                }
                None => None,
            };
            log::info!("{} s={s}: median rel error {:.4}", law.name(), median(&errs));
            runs.push(SparsifyRun {
                law: *law,
                samples: s,
                median: median(&errs),
                mean: errs.iter().sum::<f64>() / errs.len() as f64,
                relative_errors: errs,
                sketch_file,
            });
        }
    }
    emit(cfg, args, Format::Csv, runs, &recs)
}

#[derive(Serialize)]
struct StreamReport {
    alpha_tilde: Option<f64>,
    alpha_history: Vec<f64>,
    alpha_used: f64,
    s: usize,
    memory_slots: usize,
    entries_seen: u64,
    rows: usize,
    cols: usize,
    sketch_nnz: usize,
    sketch_file: Option<String>,
}

fn drain<I>(sampler: &mut StreamSampler, it: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = CoreResult<Triple>>,
{
    for t in it {
        sampler.push(t?)?;
    }
    Ok(())
}

pub fn stream(cfg: &RunConfig, args: &RunArgs) -> anyhow::Result<()> {
    let spec = single_alpha(args, "stream")?;
    let weight = spec.hybrid_weight("stream")?;
    if weight.is_none() && args.tau == 0 {
        bail!("--alpha auto needs --tau >= 1");
    }
    if args.samples.len() + args.sample_mult.len() > 1 {
        bail!("stream takes a single sample count");
    }
    check_eps_delta(args)?;
    let root = SeededRng::new(args.seed);
    let want = args.tau > 0;

    let state = match (&args.input, args.gen) {
        (Some(path), _) => {
            let ctx = || format!("reading {}", path.display());
            match args.stream_format {
                StreamFormat::Mtx => {
                    let entries = CoordinateStream::open(path).with_context(ctx)?;
                    let (m, n) = entries.shape();
                    let s = sample_counts(args, Some((m, n)))?[0];
                    let mut sampler = StreamSampler::new(s, want, &root)?.with_shape(m, n);
                    drain(&mut sampler, entries).with_context(ctx)?;
                    sampler.finish()?
                }
                StreamFormat::Triples => {
                    let s = sample_counts(args, None)?[0];
                    let mut sampler = StreamSampler::new(s, want, &root)?;
                    drain(&mut sampler, read_triples(BufReader::new(File::open(path).with_context(ctx)?)))
                        .with_context(ctx)?;
                    sampler.finish()?
                }
            }
        }
        (None, Some(Generator::NoisyBinary)) => {
            let GeneratorSpec::NoisyBinary(nb) = generator_spec(args, Generator::NoisyBinary) else {
                unreachable!()
            };
            let entries = nb.stream()?;
            let (m, n) = entries.shape();
            let s = sample_counts(args, Some((m, n)))?[0];
            let mut sampler = StreamSampler::new(s, want, &root)?.with_shape(m, n);
            drain(&mut sampler, entries.map(Ok))?;
            sampler.finish()?
        }
        (None, Some(gen)) => {
            let a = generator_spec(args, gen).generate()?;
            let s = sample_counts(args, Some(a.shape()))?[0];
            let mut sampler = StreamSampler::new(s, want, &root)?.with_shape(a.rows(), a.cols());
            drain(&mut sampler, a.nonzeros().map(|(i, j, v)| Ok(Triple::new(i, j, v))))?;
            sampler.finish()?
        }
        (None, None) => bail!("one of --input or --gen is required"),
    };

    let estimate = if want {
        Some(estimate_alpha_iterative(&state, args.tau, args.epsilon, &mut root.substream(5))?)
    } else {
        None
    };
    let alpha = weight.or(estimate.as_ref().map(|e| e.alpha)).expect("checked above");
    let sketch = mix_to_hybrid(&state, alpha, &mut root.substream(6))?;
    let sketch_file = match &args.out {
        Some(out) => {
            let path = sibling(out, "sketch");
            write_sketch(&path, &sketch)?;
            Some(path.display().to_string())
        }
        None => None,
    };
    let report = StreamReport {
        alpha_tilde: estimate.as_ref().map(|e| e.alpha),
        alpha_history: estimate.map(|e| e.history).unwrap_or_default(),
        alpha_used: alpha,
        s: state.samples,
        memory_slots: state.memory_slots(),
        entries_seen: state.entries_seen,
        rows: state.rows,
        cols: state.cols,
        sketch_nnz: sketch.nnz(),
        sketch_file,
    };
    let mut recs = Vec::new();
    let t0 = Trial::Index(0);
    if let Some(at) = report.alpha_tilde {
        recs.push(Record::new("hybrid", Some(at), report.s, args.k, t0, "alpha_tilde", at));
    }
    for (metric, value) in [
        ("memory_slots", report.memory_slots as f64),
        ("entries_seen", report.entries_seen as f64),
        ("sketch_nnz", report.sketch_nnz as f64),
    ] {
        recs.push(Record::new("hybrid", Some(alpha), report.s, args.k, t0, metric, value));
    }
    emit(cfg, args, Format::Json, report, &recs)
}

#[derive(Serialize)]
struct PcaTrial {
    pca: PcaResult,
    bounds: PcaBoundReport,
}

#[derive(Serialize)]
struct PcaReport {
    trials: Vec<PcaTrial>,
    median_sketch_svd_seconds: f64,
    median_dense_svd_seconds: Option<f64>,
    components_file: Option<String>,
}

pub fn pca(cfg: &RunConfig, args: &RunArgs) -> anyhow::Result<()> {
    let mut a = load_matrix(args)?;
    if args.center {
        a = center_columns(&a);
    }
    check_eps_delta(args)?;
    let alpha = single_alpha(args, "pca")?.hybrid_weight("pca")?;
    if args.samples.len() + args.sample_mult.len() > 1 {
        bail!("pca takes a single sample count");
    }
    let s = sample_counts(args, Some(a.shape()))?[0];
    let opts = PcaOptions {
        alpha,
        epsilon: args.epsilon,
        delta: args.delta,
        centering: if args.center {
            CenteringCheck::Skip
        } else {
            CenteringCheck::Warn
        },
        ..Default::default()
    };
    // Trials run one at a time so the wall-clock timings do not compete.
    let root = SeededRng::new(args.seed);
    let mut trials = Vec::new();
    let mut recs = Vec::new();
    for t in 0..args.trials {
        let res = fast_pca(&a, args.k, s, &opts, &mut root.substream(t))?;
        let bounds = pca_bounds(&a, &res.sketch, args.k)?;
        if !bounds.all_passed {
            log::warn!("trial {t}: a PCA bound inequality failed");
        }
        let tr = Trial::Index(t as usize);
        let al = Some(res.alpha);
        let mut push = |metric: &str, v: f64| recs.push(Record::new("hybrid", al, s, args.k, tr, metric, v));
        push("projection_error", res.projection_error);
        push("sketch_proj_error", res.sketch_proj_error);
        push("sketch_svd_seconds", res.sketch_svd_seconds);
        if let (Some(se), Some(aff), Some(ds)) = (res.surrogate_error, res.subspace_affinity, res.dense_svd_seconds) {
            push("surrogate_error", se);
            push("subspace_affinity", aff);
            push("dense_svd_seconds", ds);
        }
        push("bounds_passed", bounds.all_passed as u8 as f64);
        trials.push(PcaTrial { pca: res, bounds });
    }
    let components_file = match &args.out {
        Some(out) => {
            let path = sibling(out, "components");
            write_matrix_market(&path, &trials[0].pca.components)?;
            Some(path.display().to_string())
        }
        None => None,
    };
    let sk: Vec<f64> = trials.iter().map(|t| t.pca.sketch_svd_seconds).collect();
    let dense: Vec<f64> = trials.iter().filter_map(|t| t.pca.dense_svd_seconds).collect();
    let report = PcaReport {
        median_sketch_svd_seconds: median(&sk),
        median_dense_svd_seconds: (!dense.is_empty()).then(|| median(&dense)),
        trials,
        components_file,
    };
    emit(cfg, args, Format::Json, report, &recs)
}

pub fn bench(cfg: &RunConfig, args: &RunArgs) -> anyhow::Result<()> {
    let exp = ExperimentConfig {
        seed: args.seed,
        trials: args.trials as usize,
    };
    let outcomes: Vec<Outcome> = run_criteria(&exp, &args.criteria);
    if outcomes.is_empty() {
        bail!("no criteria match {:?}", args.criteria);
    }
    let mut recs = Vec::new();
    for o in &outcomes {
        eprintln!("{o}");
        let t0 = Trial::Index(0);
        recs.push(Record::new("criterion", None, 0, 0, t0, &format!("c{}.passed", o.id), o.passed as u8 as f64));
        recs.push(Record::new("criterion", None, 0, 0, t0, &format!("c{}.seconds", o.id), o.seconds));
        for r in &o.records {
            let mut r = r.clone();
            r.metric = format!("c{}.{}", o.id, r.metric);
            recs.push(r);
        }
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    let summaries: Vec<_> = outcomes
        .iter()
        .map(|o| serde_json::json!({"id": o.id, "name": o.name, "passed": o.passed, "seconds": o.seconds, "summary": o.summary}))
        .collect();
    emit(cfg, args, Format::Csv, summaries, &recs)?;
    if failed > 0 {
        bail!("{failed} of {} criteria failed", outcomes.len());
    }
    Ok(())
}

pub fn generate(_: &RunConfig, args: &RunArgs) -> anyhow::Result<()> {
    let Some(gen) = args.gen else {
        bail!("generate needs --gen");
    };
    let Some(out) = &args.out else {
        bail!("generate needs --out <file.mtx>");
    };
    let spec = generator_spec(args, gen);
    let a = generate_to(&spec, out)?;
    let manifest = DatasetManifest::path_for(out);
    let summary = serde_json::json!({
        "matrix": out.display().to_string(),
        "manifest": manifest.display().to_string(),
        "metrics": MatrixMetrics::compute(&a)?,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
