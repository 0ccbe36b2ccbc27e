//! The user-facing emulated GEMM.

use crate::crtcore::{crt, CrtIntermediates};
use crate::error::Result;
use crate::fpkernel::scale_into;
use crate::matrix::Matrix;
use crate::moduli::{table, ModuliTable};
use crate::scalar::WorkingFloat;
use crate::scaling::{scale_with, Clearance, ScalingOutput};

#[derive(Debug, Clone)]
pub struct EmulationResult<F> {
    pub c: Matrix<F>,
    /// `C''`, the reconstructed `A'B'`, in `f64` cells.
    pub cpp: Matrix<f64>,
    pub scaling: ScalingOutput,
    /// Present when requested via `keep_intermediates`.
    pub crt: Option<CrtIntermediates>,
    pub table: &'static ModuliTable,
    /// Entries of `c` that came out subnormal (and so may carry a rounding).
    pub subnormal_outputs: usize,
}

/// `C = diag(2^-mu) C'' diag(2^-nu)`, one rounding into `F` per entry.
fn unscale<F: WorkingFloat>(cpp: &Matrix<f64>, mu: &[i16], nu: &[i16]) -> Result<(Matrix<F>, usize)> {
    let mut subnormal = 0;
    let mut data = Vec::with_capacity(cpp.rows() * cpp.cols());
    for ((i, j), &v) in cpp.indexed() {
        let c: F = scale_into(v, -(mu[i] as i64) - nu[j] as i64)?;
        if c != F::zero() && !c.is_normal() {
            subnormal += 1;
        }
        data.push(c);
    }
    Ok((Matrix::from_vec(cpp.rows(), cpp.cols(), data)?, subnormal))
}

/// Emulate `A * B` with the first `n` moduli in the precision of `F`.
pub fn os_ii<F: WorkingFloat>(
    a: &Matrix<F>,
    b: &Matrix<F>,
    n: usize,
    keep_intermediates: bool,
) -> Result<EmulationResult<F>> {
    let clearance = crate::scaling::clearance(a, b)?;
    os_ii_with(a, b, n, clearance, keep_intermediates)
}

/// As [`os_ii`], reusing a clearance pass computed on the same inputs.
pub fn os_ii_with<F: WorkingFloat>(
    a: &Matrix<F>,
    b: &Matrix<F>,
    n: usize,
    clearance: Clearance,
    keep_intermediates: bool,
) -> Result<EmulationResult<F>> {
    let table = table(n, F::PRECISION)?;
    let scaling = scale_with(a, b, clearance, table)?;
    let (cpp, inter) = crt(&scaling.a_prime, &scaling.b_prime, table)?;
    let (c, subnormal_outputs) = unscale::<F>(&cpp, &scaling.mu, &scaling.nu)?;
    Ok(EmulationResult { c, cpp, scaling, crt: keep_intermediates.then_some(inter), table, subnormal_outputs })
}
