//! Element-wise matrix sparsification with a hybrid ℓ1/ℓ2 sampling law.
//!
//! A matrix `A` is replaced by a sparse unbiased sketch built from `s` i.i.d.
//! draws with `p_ij = α|A_ij|/‖A‖₁ + (1−α)A_ij²/‖A‖_F²`. The crate picks `α`
//! by minimizing a Bernstein-type sample-size bound, samples in one pass over
//! a stream, and runs approximate PCA on the sketch.
//!
//! ```
//! use hybrid_sketch::{
//!     alphaopt::{optimize_alpha, BoundInputs, DEFAULT_GRID_SIZE},
//!     sparsifier::{build_sketch, SamplingPlan},
//!     Matrix, SamplingLaw, SeededRng,
//! };
//!
//! let a = Matrix::from_rows(&[[4.0, 0.5, 0.0], [0.2, 3.0, -1.0]]).unwrap();
//! let inputs = BoundInputs::compute(&a, 0.5, 0.1, &mut SeededRng::new(1)).unwrap();
//! let profile = optimize_alpha(&a, &inputs, DEFAULT_GRID_SIZE).unwrap();
//! let law = SamplingLaw::Hybrid { alpha: profile.alpha_star };
//! let plan = SamplingPlan::new(law, 20, SeededRng::new(2)).unwrap();
//! let sketch = build_sketch(&a, &plan).unwrap();
//! assert!(sketch.nnz() <= 20);
//! ```

pub mod alphaopt;
pub mod datasets;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod matrix;
pub mod pca;
pub mod rng;
pub mod sparsifier;
pub mod stats;
pub mod streaming;

pub use alphaopt::{AlphaProfile, BoundInputs};
pub use distributions::SamplingLaw;
pub use error::{Error, Result};
pub use linalg::{LinearOperator, SvdResult};
pub use matrix::{densify, validate_matrix, Matrix, SparseSketch, Triple};
pub use pca::{PcaOptions, PcaResult};
pub use rng::SeededRng;
pub use sparsifier::SamplingPlan;
pub use streaming::StreamState;
