//! Emulated FP32/FP64 matrix multiplication through Chinese-remainder
//! residue arithmetic on an 8-bit integer engine, with rigorous error bounds
//! and an exact reference.

pub mod bounds;
pub mod crtcore;
pub mod emulator;
pub mod error;
pub mod exreal;
pub mod fpkernel;
pub mod harness;
pub mod hexfloat;
pub mod int8engine;
pub mod matrix;
pub mod moduli;
pub mod oracle;
pub mod scalar;
pub mod scaling;

pub use bounds::{
    bound_cheap, bound_tight, exponent_stats, suggest_n, BoundKind, BoundResult, ExponentStats, Suggestion, Target,
};
pub use emulator::{os_ii, os_ii_with, EmulationResult};
pub use error::{Error, Result};
pub use exreal::ExReal;
pub use int8engine::{gemm_i8_wrap, I32Matrix, I8Matrix};
pub use matrix::Matrix;
pub use moduli::{table, ModuliTable, MODULI};
pub use oracle::{error_matrix, exact_gemm, ExactMatrix};
pub use scalar::{Precision, WorkingFloat};

pub type Matrix32 = Matrix<f32>;
pub type Matrix64 = Matrix<f64>;
pub type EmulationResult32 = EmulationResult<f32>;
pub type EmulationResult64 = EmulationResult<f64>;
