//! Per-row / per-column power-of-two scaling that turns `A`, `B` into
//! integer matrices `A'`, `B'` whose product the residue system can recover
//! uniquely.

use crate::error::{Error, Result};
use crate::fpkernel::{fma_fp32, log2f, round_ratio, scale_pow2, RoundDir};
use crate::int8engine::{gemm_i8_wrap, I32Matrix, I8Matrix, MAX_INNER};
use crate::matrix::{check_product, Matrix};
use crate::moduli::ModuliTable;
use crate::scalar::WorkingFloat;
use num_bigint::BigUint;

/// Everything that does not depend on the moduli count: `mu'`, `nu'`, the
/// 6-bit images `Abar`, `Bbar`, their exact product and its logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct Clearance {
    pub mu_prime: Vec<i16>,
    pub nu_prime: Vec<i16>,
    pub a_bar: I8Matrix,
    pub b_bar: I8Matrix,
    pub c_bar: I32Matrix,
    pub d_bar: Matrix<f32>,
    pub e: Vec<f32>,
    pub f: Vec<f32>,
}

/// Output of the scaling step for one table.
///
/// `a_prime` / `b_prime` hold integers with at most `F::DIGITS` significant
/// bits. They live in `f64` cells regardless of the working precision,
/// because for large `N` the scaled values exceed the `f32` exponent range.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingOutput {
    pub a_prime: Matrix<f64>,
    pub b_prime: Matrix<f64>,
    pub mu: Vec<i16>,
    pub nu: Vec<i16>,
    pub clearance: Clearance,
}

impl ScalingOutput {
    pub fn c_bar(&self) -> &I32Matrix {
        &self.clearance.c_bar
    }
}

fn to_i16(x: i64) -> Result<i16> {
    i16::try_from(x).map_err(|_| Error::ExponentRange(x))
}

/// `5 - floor(log2 max_h |a_ih|)` for each row.
pub fn row_pre_exponents<F: WorkingFloat>(a: &Matrix<F>) -> Result<Vec<i16>> {
    (0..a.rows())
        .map(|i| {
            let mx = a.row(i).iter().fold(F::zero(), |m, &x| m.max(x.abs()));
            if mx == F::zero() {
                return Err(Error::ZeroRow(i));
            }
            to_i16(5 - mx.ilogb() as i64)
        })
        .collect()
}

/// `5 - floor(log2 max_h |b_hj|)` for each column.
pub fn col_pre_exponents<F: WorkingFloat>(b: &Matrix<F>) -> Result<Vec<i16>> {
    let mut mx = vec![F::zero(); b.cols()];
    for i in 0..b.rows() {
        for (m, &x) in mx.iter_mut().zip(b.row(i)) {
            *m = m.max(x.abs());
        }
    }
    mx.iter()
        .enumerate()
        .map(|(j, &m)| {
            if m == F::zero() {
                return Err(Error::ZeroColumn(j));
            }
            to_i16(5 - m.ilogb() as i64)
        })
        .collect()
}

/// `ceil(2^k |x|)` where the result is known to be at most 64.
fn ceil_scaled_abs<F: WorkingFloat>(x: F, k: i64) -> i8 {
    let (_, s, e) = x.decompose();
    if s == 0 {
        return 0;
    }
    let sh = e as i64 + k;
    let v = if sh >= 0 {
        s << sh
    } else if -sh >= 64 {
        1
    } else {
        let q = s >> -sh;
        q + u64::from(q << -sh != s)
    };
    debug_assert!(v <= 64);
    v as i8
}

/// `Abar = ceil(diag(2^mu') |A|)`.
pub fn ceil_abs_scale_rows<F: WorkingFloat>(a: &Matrix<F>, mu_prime: &[i16]) -> I8Matrix {
    Matrix::from_fn(a.rows(), a.cols(), |i, h| ceil_scaled_abs(a[(i, h)], mu_prime[i] as i64))
}

/// `Bbar = ceil(|B| diag(2^nu'))`.
pub fn ceil_abs_scale_cols<F: WorkingFloat>(b: &Matrix<F>, nu_prime: &[i16]) -> I8Matrix {
    Matrix::from_fn(b.rows(), b.cols(), |h, j| ceil_scaled_abs(b[(h, j)], nu_prime[j] as i64))
}

/// `single_up` of a nonnegative integer below `2^31`.
pub(crate) fn single_up_int(c: i32) -> f32 {
    debug_assert!(c >= 0);
    let c = c as u32;
    let bits = 32 - c.leading_zeros();
    if bits <= 24 {
        return c as f32;
    }
    let sh = bits - 24;
    let q = (c >> sh) + u32::from((c >> sh) << sh != c);
    (q as u64 * (1u64 << sh)) as f32
}

/// `Cbar = Abar * Bbar` on the integer engine and `Dbar = single_up(Cbar)`.
pub fn clearance_product(a_bar: &I8Matrix, b_bar: &I8Matrix) -> Result<(I32Matrix, Matrix<f32>)> {
    let c_bar = gemm_i8_wrap(a_bar, b_bar)?;
    let d_bar = c_bar.map(|&c| single_up_int(c));
    Ok((c_bar, d_bar))
}

/// Row and column maxima of `Dbar`, clamped to at least 1 so an all-zero
/// row or column yields a zero logarithm.
pub fn clamped_maxima(d_bar: &Matrix<f32>) -> (Vec<f32>, Vec<f32>) {
    let mut rmax = vec![1.0f32; d_bar.rows()];
    let mut cmax = vec![1.0f32; d_bar.cols()];
    for ((i, j), &d) in d_bar.indexed() {
        rmax[i] = rmax[i].max(d);
        cmax[j] = cmax[j].max(d);
    }
    (rmax, cmax)
}

/// `single_down(-0.5 / (1 - 4 u32))`.
pub fn slope_constant() -> f32 {
    round_ratio::<f32>(true, &BigUint::from(1u32 << 21), &BigUint::from((1u32 << 22) - 1), RoundDir::Down)
        .expect("constant is in range")
}

/// `pre + floor(fma_down(slope, log, P'))` for each entry.
pub fn scaling_exponents(pre: &[i16], logs: &[f32], p_prime: f32) -> Result<Vec<i16>> {
    let c = slope_constant();
    pre.iter()
        .zip(logs)
        .map(|(&p0, &l)| {
            let v = fma_fp32(c, l, p_prime, RoundDir::Down)?;
            to_i16(p0 as i64 + v.floor() as i64)
        })
        .collect()
}

/// `trunc(2^k x)` as an exact integer in an `f64` cell.
fn trunc_scaled<F: WorkingFloat>(x: F, k: i64) -> Result<f64> {
    let (neg, s, e) = x.decompose();
    let sh = e as i64 + k;
    let mag = if s == 0 || sh <= -64 {
        0.0
    } else if sh < 0 {
        (s >> -sh) as f64
    } else {
        scale_pow2(s as f64, sh).map_err(|_| Error::Overflow { format: "fp64", context: format!("2^{k} * {x}") })?
    };
    Ok(if neg { -mag } else { mag })
}

/// `A' = trunc(diag(2^mu) A)`.
pub fn truncate_scaled_rows<F: WorkingFloat>(a: &Matrix<F>, mu: &[i16]) -> Result<Matrix<f64>> {
    let data = a.indexed().map(|((i, _), &x)| trunc_scaled(x, mu[i] as i64)).collect::<Result<Vec<_>>>()?;
    Matrix::from_vec(a.rows(), a.cols(), data)
}

/// `B' = trunc(B diag(2^nu))`.
pub fn truncate_scaled_cols<F: WorkingFloat>(b: &Matrix<F>, nu: &[i16]) -> Result<Matrix<f64>> {
    let data = b.indexed().map(|((_, j), &x)| trunc_scaled(x, nu[j] as i64)).collect::<Result<Vec<_>>>()?;
    Matrix::from_vec(b.rows(), b.cols(), data)
}

fn check_inputs<F: WorkingFloat>(a: &Matrix<F>, b: &Matrix<F>) -> Result<()> {
    check_product(a, b)?;
    if a.cols() > MAX_INNER {
        return Err(Error::InnerDimension(a.cols()));
    }
    if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite input entry".into()));
    }
    Ok(())
}

/// The moduli-independent half of the scaling step.
pub fn clearance<F: WorkingFloat>(a: &Matrix<F>, b: &Matrix<F>) -> Result<Clearance> {
    check_inputs(a, b)?;
    let mu_prime = row_pre_exponents(a)?;
    let nu_prime = col_pre_exponents(b)?;
    let a_bar = ceil_abs_scale_rows(a, &mu_prime);
    let b_bar = ceil_abs_scale_cols(b, &nu_prime);
    let (c_bar, d_bar) = clearance_product(&a_bar, &b_bar)?;
    let (rmax, cmax) = clamped_maxima(&d_bar);
    let e = rmax.into_iter().map(log2f).collect::<Result<Vec<_>>>()?;
    let f = cmax.into_iter().map(log2f).collect::<Result<Vec<_>>>()?;
    Ok(Clearance { mu_prime, nu_prime, a_bar, b_bar, c_bar, d_bar, e, f })
}

/// Finish the scaling step for `table`, given a clearance pass on the same
/// inputs.
pub fn scale_with<F: WorkingFloat>(
    a: &Matrix<F>,
    b: &Matrix<F>,
    clearance: Clearance,
    table: &ModuliTable,
) -> Result<ScalingOutput> {
    if table.mode != F::PRECISION {
        return Err(Error::ModeMismatch { expected: F::PRECISION.to_string(), got: table.mode.to_string() });
    }
    let mu = scaling_exponents(&clearance.mu_prime, &clearance.e, table.p_prime)?;
    let nu = scaling_exponents(&clearance.nu_prime, &clearance.f, table.p_prime)?;
    let a_prime = truncate_scaled_rows(a, &mu)?;
    let b_prime = truncate_scaled_cols(b, &nu)?;
    Ok(ScalingOutput { a_prime, b_prime, mu, nu, clearance })
}

pub fn scaling<F: WorkingFloat>(a: &Matrix<F>, b: &Matrix<F>, table: &ModuliTable) -> Result<ScalingOutput> {
    let c = clearance(a, b)?;
    scale_with(a, b, c, table)
}
