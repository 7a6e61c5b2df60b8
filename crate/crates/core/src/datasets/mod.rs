//! Synthetic generators, matrix metrics and Matrix Market I/O.

pub mod metrics;
pub mod mm;

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal, Zipf};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::gaussian_block;
use crate::matrix::{Matrix, Triple};
use crate::rng::SeededRng;

pub use metrics::{numeric_density, numeric_row_density_skew, row_density_skew, MatrixMetrics};
pub use mm::{
    read_matrix_market, read_sketch, write_matrix_market, write_sketch, CoordinateStream,
};

/// Block origins of the default mask, as fractions of the side length.
/// Blocks pair up on shared row or column ranges.
pub const BLOCK_ORIGINS: [(f64, f64); 5] = [(0.1, 0.1), (0.1, 0.5), (0.45, 0.3), (0.75, 0.3), (0.7, 0.75)];

fn default_fill() -> f64 {
    0.0129
}

/// Deterministic binary mask: square blocks at [`BLOCK_ORIGINS`] plus an
/// optional band along the main diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskPattern {
    #[serde(default = "default_fill")]
    pub fill: f64,
    #[serde(default)]
    pub band_width: usize,
}

impl Default for MaskPattern {
    fn default() -> Self {
        Self {
            fill: default_fill(),
            band_width: 0,
        }
    }
}

impl MaskPattern {
    pub fn block_side(&self, n: usize) -> usize {
        let nb = BLOCK_ORIGINS.len() as f64;
        (self.fill * (n * n) as f64 / nb).sqrt().round() as usize
    }

    fn blocks(&self, n: usize) -> Vec<(usize, usize)> {
        BLOCK_ORIGINS
            .iter()
            .map(|&(fr, fc)| ((fr * n as f64) as usize, (fc * n as f64) as usize))
            .collect()
    }

    /// Whether cell `(i, j)` of the `n×n` mask is set.
    pub fn contains(&self, n: usize, i: usize, j: usize) -> bool {
        MaskCells::new(self, n).contains(i, j)
    }

    pub fn render(&self, n: usize) -> Matrix {
        let cells = MaskCells::new(self, n);
        Matrix::from_fn(n, n, |i, j| if cells.contains(i, j) { 1.0 } else { 0.0 })
    }
}

/// Block corners resolved for one side length.
#[derive(Clone, Debug)]
struct MaskCells {
    side: usize,
    band: usize,
    corners: Vec<(usize, usize)>,
}

impl MaskCells {
    fn new(p: &MaskPattern, n: usize) -> Self {
        Self {
            side: p.block_side(n),
            band: p.band_width,
            corners: p.blocks(n),
        }
    }

    fn contains(&self, i: usize, j: usize) -> bool {
        (j >= i && j - i < self.band)
            || self
                .corners
                .iter()
                .any(|&(r0, c0)| i >= r0 && i < r0 + self.side && j >= c0 && j < c0 + self.side)
    }
}

/// Binary image plus i.i.d. Gaussian noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyBinarySpec {
    pub n: usize,
    #[serde(default)]
    pub pattern: MaskPattern,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for NoisyBinarySpec {
    fn default() -> Self {
        Self {
            n: 500,
            pattern: MaskPattern::default(),
            sigma: 0.1,
            seed: 0,
        }
    }
}

impl NoisyBinarySpec {
    pub fn new(n: usize, sigma: f64, seed: u64) -> Self {
        Self {
            n,
            sigma,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if !(self.pattern.fill > 0.0 && self.pattern.fill <= 1.0) {
            return Err(Error::InvalidParameter(format!("fill must lie in (0, 1], got {}", self.pattern.fill)));
        }
        Ok(())
    }

    /// Row-major entries of `A`, generated lazily. Yields every nonzero in the
    /// same order and with the same values as [`gen_noisy_binary`].
    pub fn stream(&self) -> Result<NoisyBinaryStream> {
        self.validate()?;
        Ok(NoisyBinaryStream {
            mask: MaskCells::new(&self.pattern, self.n),
            n: self.n,
            sigma: self.sigma,
            rng: SeededRng::new(self.seed),
            pos: 0,
        })
    }
}

/// Returns `(D, A)` with `A = D + N`, `N_ij ~ Normal(0, σ²)`.
pub fn gen_noisy_binary(spec: &NoisyBinarySpec) -> Result<(Matrix, Matrix)> {
    spec.validate()?;
    let d = spec.pattern.render(spec.n);
    let mut rng = SeededRng::new(spec.seed);
    let mut a = d.clone();
    for x in a.as_mut_slice() {
        let z: f64 = rng.sample(StandardNormal);
        *x += spec.sigma * z;
    }
    Ok((d, a))
}

/// Holds only the mask geometry and the noise generator.
pub struct NoisyBinaryStream {
    mask: MaskCells,
    n: usize,
    sigma: f64,
    rng: SeededRng,
    pos: usize,
}

impl NoisyBinaryStream {
    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.n)
    }
}

impl Iterator for NoisyBinaryStream {
    type Item = Triple;

    fn next(&mut self) -> Option<Triple> {
        let n = self.n;
        while self.pos < n * n {
            let (i, j) = (self.pos / n, self.pos % n);
            self.pos += 1;
            let z: f64 = self.rng.sample(StandardNormal);
            let d = if self.mask.contains(i, j) { 1.0 } else { 0.0 };
            let v = d + self.sigma * z;
            if v != 0.0 {
                return Some(Triple::new(i, j, v));
            }
        }
        None
    }
}

/// `A = D X Yᵀ D` with `D_ii = i^{-γ}` (1-based) and Gaussian `X`, `Y` of width `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawSpec {
    pub n: usize,
    pub k: usize,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for PowerLawSpec {
    fn default() -> Self {
        Self {
            n: 500,
            k: 5,
            gamma: 1.0,
            seed: 0,
        }
    }
}

impl PowerLawSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.k > self.n {
            return Err(Error::InvalidParameter(format!(
                "power-law needs 1 <= k <= n, got k={} n={}",
                self.k, self.n
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {}", self.gamma)));
        }
        Ok(())
    }
}

pub fn gen_power_law(spec: &PowerLawSpec) -> Result<Matrix> {
    spec.validate()?;
    let (n, k) = (spec.n, spec.k);
    let mut rng = SeededRng::new(spec.seed);
    let mut gauss = |r: usize, c: usize| {
        let v: Vec<f64> = (0..r * c).map(|_| rng.sample(StandardNormal)).collect();
        Matrix::from_vec(r, c, v)
    };
    let x = gauss(n, k)?;
    let y = gauss(n, k)?;
    let d: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-spec.gamma)).collect();
    let scale_rows = |mut m: Matrix| {
        for (i, di) in d.iter().enumerate() {
            m.row_mut(i).iter_mut().for_each(|v| *v *= di);
        }
        m
    };
    Ok(scale_rows(x).matmul(&scale_rows(y).transpose()))
}

/// `X Y + noise·E` with Gaussian `X` (`m×rank`), `Y` (`rank×n`) and `E`.
pub fn gen_noisy_low_rank(m: usize, n: usize, rank: usize, noise: f64, rng: &mut SeededRng) -> Matrix {
    let x = gaussian_block(m, rank, rng);
    let y = gaussian_block(rank, n, rng);
    let e = gaussian_block(m, n, rng);
    x.matmul(&y).add(&e.scale(noise))
}

/// Bag-of-words counts with lognormal document lengths and a Zipf
/// vocabulary, rows scaled to unit Euclidean norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TechTcLikeSpec {
    pub rows: usize,
    pub cols: usize,
    pub zipf_exponent: f64,
    pub median_length: f64,
    pub log_length_sd: f64,
    pub seed: u64,
}

impl Default for TechTcLikeSpec {
    fn default() -> Self {
        Self {
            rows: 120,
            cols: 3000,
            zipf_exponent: 0.3,
            median_length: 150.0,
            log_length_sd: 0.9,
            seed: 0,
        }
    }
}

pub const MIN_DOC_LENGTH: usize = 5;

pub fn gen_techtc_like(spec: &TechTcLikeSpec) -> Result<Matrix> {
    if spec.rows == 0 || spec.cols == 0 {
        return Err(Error::EmptyMatrix {
            rows: spec.rows,
            cols: spec.cols,
        });
    }
    let bad = |what: &str| Error::InvalidParameter(format!("techtc-like: invalid {what}"));
    let lengths = LogNormal::new(spec.median_length.ln(), spec.log_length_sd).map_err(|_| bad("length law"))?;
    let vocab = Zipf::new(spec.cols as f64, spec.zipf_exponent).map_err(|_| bad("zipf exponent"))?;
    let mut rng = SeededRng::new(spec.seed);
    let mut a = Matrix::zeros(spec.rows, spec.cols);
    for i in 0..spec.rows {
        let len = (lengths.sample(&mut rng).round() as usize).max(MIN_DOC_LENGTH);
        let row = a.row_mut(i);
        for _ in 0..len {
            let term = vocab.sample(&mut rng) as usize - 1;
            row[term.min(spec.cols - 1)] += 1.0;
        }
    }
    Ok(row_normalize(&a))
}

/// Divides each nonzero row by its Euclidean norm.
pub fn row_normalize(a: &Matrix) -> Matrix {
    let mut out = a.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row {
                *v /= norm;
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    NoisyBinary(NoisyBinarySpec),
    PowerLaw(PowerLawSpec),
    TechtcLike(TechTcLikeSpec),
}

impl GeneratorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorSpec::NoisyBinary(_) => "noisy-binary",
            GeneratorSpec::PowerLaw(_) => "power-law",
            GeneratorSpec::TechtcLike(_) => "techtc-like",
        }
    }

    pub fn generate(&self) -> Result<Matrix> {
        match self {
            GeneratorSpec::NoisyBinary(s) => gen_noisy_binary(s).map(|(_, a)| a),
            GeneratorSpec::PowerLaw(s) => gen_power_law(s),
            GeneratorSpec::TechtcLike(s) => gen_techtc_like(s),
        }
    }
}

/// Written next to every generated matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub spec: GeneratorSpec,
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    pub matrix_file: String,
}

impl DatasetManifest {
    pub fn new(spec: GeneratorSpec, a: &Matrix, matrix_file: &Path) -> Self {
        Self {
            spec,
            rows: a.rows(),
            cols: a.cols(),
            nnz: a.nnz(),
            matrix_file: matrix_file
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
        }
    }

    /// `foo.mtx` → `foo.manifest.json`.
    pub fn path_for(matrix_file: &Path) -> PathBuf {
        matrix_file.with_extension("manifest.json")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Generates the matrix, writes it as a dense Matrix Market array and writes
/// its manifest alongside.
pub fn generate_to(spec: &GeneratorSpec, path: &Path) -> Result<Matrix> {
    let a = spec.generate()?;
    write_matrix_market(path, &a)?;
    DatasetManifest::new(spec.clone(), &a, path).write(&DatasetManifest::path_for(path))?;
    Ok(a)
}
