use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};

use hybrid_sketch::SamplingLaw;

#[derive(Parser, Debug)]
#[command(name = "hybrid-sketch", version, about = "Hybrid l1/l2 element-wise matrix sparsification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Minimize the sample-size bound over alpha and write the f(alpha) profile.
    AlphaOpt(RunArgs),
    /// Build sketches under one or more sampling laws and report spectral errors.
    Sparsify(RunArgs),
    /// One pass over a triple stream, with optional iterative alpha estimation.
    Stream(RunArgs),
    /// Approximate PCA from a hybrid sketch, with bound checks and timings.
    Pca(RunArgs),
    /// Run the acceptance experiments and write a consolidated report.
    Bench(RunArgs),
    /// Write a generated matrix and its manifest.
    Generate(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::AlphaOpt(_) => "alpha-opt",
            Command::Sparsify(_) => "sparsify",
            Command::Stream(_) => "stream",
            Command::Pca(_) => "pca",
            Command::Bench(_) => "bench",
            Command::Generate(_) => "generate",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::AlphaOpt(a)
            | Command::Sparsify(a)
            | Command::Stream(a)
            | Command::Pca(a)
            | Command::Bench(a)
            | Command::Generate(a) => a,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    NoisyBinary,
    PowerLaw,
    TechtcLike,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamFormat {
    /// Matrix Market coordinate file.
    Mtx,
    /// Whitespace-separated `i j value` lines, 0-based.
    Triples,
}

/// `--alpha` value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaSpec {
    Auto,
    Value(f64),
    L1,
    L2,
    L2Truncated(f64),
    Leverage(usize),
}

impl FromStr for AlphaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let bad = |what: &str| format!("invalid {what} in --alpha `{s}`");
        match s {
            "auto" => return Ok(AlphaSpec::Auto),
            "l1" => return Ok(AlphaSpec::L1),
            "l2" => return Ok(AlphaSpec::L2),
            _ => {}
        }
        if let Some(eps) = s.strip_prefix("l2t:") {
            let t: f64 = eps.parse().map_err(|_| bad("threshold"))?;
            if !(t >= 0.0 && t.is_finite()) {
                return Err(bad("threshold"));
            }
            return Ok(AlphaSpec::L2Truncated(t));
        }
        if let Some(rho) = s.strip_prefix("lev:") {
            let r: usize = rho.parse().map_err(|_| bad("rank"))?;
            if r == 0 {
                return Err(bad("rank"));
            }
            return Ok(AlphaSpec::Leverage(r));
        }
        let v: f64 = s
            .parse()
            .map_err(|_| format!("--alpha expects auto, a number, l1, l2, l2t:<eps> or lev:<rho>, got `{s}`"))?;
        if !(v > 0.0 && v <= 1.0) {
            return Err(format!("--alpha value must lie in (0, 1], got {v}"));
        }
        Ok(AlphaSpec::Value(v))
    }
}

impl fmt::Display for AlphaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaSpec::Auto => f.write_str("auto"),
            AlphaSpec::Value(v) => write!(f, "{v}"),
            AlphaSpec::L1 => f.write_str("l1"),
            AlphaSpec::L2 => f.write_str("l2"),
            AlphaSpec::L2Truncated(t) => write!(f, "l2t:{t}"),
            AlphaSpec::Leverage(r) => write!(f, "lev:{r}"),
        }
    }
}

impl Serialize for AlphaSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl AlphaSpec {
    /// Sampling law, with `auto` resolved through `alpha_star`.
    pub fn to_law(self, alpha_star: impl FnOnce() -> anyhow::Result<f64>) -> anyhow::Result<SamplingLaw> {
        Ok(match self {
            AlphaSpec::Auto => SamplingLaw::Hybrid { alpha: alpha_star()? },
            AlphaSpec::Value(alpha) => SamplingLaw::Hybrid { alpha },
            AlphaSpec::L1 => SamplingLaw::L1,
            AlphaSpec::L2 => SamplingLaw::L2,
            AlphaSpec::L2Truncated(threshold) => SamplingLaw::L2Truncated { threshold },
            AlphaSpec::Leverage(rank) => SamplingLaw::Leverage { rank },
        })
    }

    /// Fixed hybrid weight, `None` for `auto`; baselines other than ℓ1 are rejected.
    pub fn hybrid_weight(self, command: &str) -> anyhow::Result<Option<f64>> {
        match self {
            AlphaSpec::Auto => Ok(None),
            AlphaSpec::Value(v) => Ok(Some(v)),
            AlphaSpec::L1 => Ok(Some(1.0)),
            other => anyhow::bail!("{command} supports --alpha auto, a value in (0, 1] or l1, not `{other}`"),
        }
    }
}

#[derive(Args, Clone, Debug, Serialize)]
#[command(group(ArgGroup::new("source").args(["input", "gen"]).multiple(false)))]
pub struct RunArgs {
    /// Matrix Market file (dense array or coordinate).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Synthetic generator instead of an input file.
    #[arg(long = "gen", value_enum)]
    pub gen: Option<Generator>,
    /// Noise standard deviation for noisy-binary.
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    /// Decay exponent for power-law.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Side length for noisy-binary and power-law, document count for techtc-like.
    #[arg(long)]
    pub size: Option<usize>,
    /// Layout of `--input` for the stream command.
    #[arg(long, value_enum, default_value_t = StreamFormat::Mtx)]
    pub stream_format: StreamFormat,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// auto | <value> | l1 | l2 | l2t:<eps> | lev:<rho>; comma-separated for sweeps.
    #[arg(long, value_delimiter = ',', default_value = "auto")]
    pub alpha: Vec<AlphaSpec>,
    /// Explicit sample counts; comma-separated for sweeps.
    #[arg(long, value_delimiter = ',', conflicts_with = "sample_mult")]
    pub samples: Vec<usize>,
    /// Sample counts as multiples of k(m+n); comma-separated for sweeps (default 3).
    #[arg(long, value_delimiter = ',')]
    pub sample_mult: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Iterations of the streaming alpha estimate (0 disables it).
    #[arg(long, default_value_t = 10)]
    pub tau: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Report path; stdout when omitted. Sketches and components are written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Center columns before PCA.
    #[arg(long)]
    pub center: bool,
    /// Acceptance criteria to run (bench); all when omitted.
    #[arg(long, value_delimiter = ',')]
    pub criteria: Vec<u8>,
}
