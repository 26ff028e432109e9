//! Exact and approximate permanents of nonnegative matrices.

pub mod bench;
pub mod bounds;
pub mod deep_table;
pub mod error;
pub mod estimator;
pub mod exact;
pub mod gg;
pub mod logscale;
pub mod matrix;
pub mod preprocess;
pub mod sampler;
pub mod special;

pub use bench::{run_bench, BenchConfig, BenchRow, BenchScheme};
pub use bounds::{bound, deep_bound, BoundKind, DeepBound};
pub use error::{Error, Result};
pub use estimator::{estimate, required_accepts, EstimateReport, EstimatorConfig, Scheme};
pub use exact::{permanent_bruteforce, permanent_exact};
pub use gg::{gg_estimate, GGVariant};
pub use logscale::LogScale;
pub use matrix::{generate, InstanceClass, InstanceSpec, Matrix};
pub use preprocess::{ds_pipeline, ScaledMatrix};
pub use sampler::{Sampler, SamplerConfig, Strategy};
