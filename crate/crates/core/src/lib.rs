//! Emulated FP32 arithmetic on BF16 hardware.
//!
//! An FP32 value is split into up to three BF16 components; products of
//! components are exact and accumulated in FP32, and a chosen subset of the
//! nine partial products is combined back into the result. The crate also
//! carries the linear solvers and experiment drivers used to measure how
//! much accuracy each product scheme keeps.

pub mod experiments;
pub mod gen;
pub mod kernels;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod precision;
pub mod split;

pub use gen::{derive_seed, gen_matrix, gen_vector, GenError, GenKind, GenSpec};
pub use kernels::{
    dot_f32_reference, dot_split, fma_f32, gemm_f32_reference, gemm_f64_reference, gemm_split,
    gemm_split_f32, CombinePrecision, KernelError, PartialProducts, ProductScheme, ProductSet,
    Scheme, SplitDot,
};
pub use matrix::Matrix;
pub use metrics::{
    check_bound, dot_oracle, elementwise_error_ratio, rel_frobenius_error, BoundCheck, BoundKind,
    ErrorStats, MetricsError, EPS_B, EPS_D, EPS_F,
};
pub use precision::{Bf16, Fp16, HalfFormat, RoundingConfig, RoundingMode};
pub use split::{
    split_matrix, split_scalar, SplitCount, SplitError, SplitMatrix, SplitScalar, SplitVector,
};
pub use linalg::{
    cond_estimate, getrf, getrs, gmres_preconditioned, iterative_refinement, LinalgError,
    LuFactors, SolveOptions, SolvePrecision, SolveReport, WorkingPrecision,
};
