//! Software model of an INT8 matrix engine: `i8` operands, `i32`
//! accumulation with two's-complement wraparound.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{check_product, Matrix};

pub type I8Matrix = Matrix<i8>;
pub type I32Matrix = Matrix<i32>;

/// Largest inner dimension the scheme's exactness argument covers.
pub const MAX_INNER: usize = 1 << 17;

/// `A * B` with every partial sum wrapped to 32 bits, summed over `h = 0..k`
/// in order.
pub fn gemm_i8_wrap(a: &I8Matrix, b: &I8Matrix) -> Result<I32Matrix> {
    check_product(a, b)?;
    let k = a.cols();
    if k > MAX_INNER {
        return Err(Error::InnerDimension(k));
    }
    let bt = b.transpose();
    let n = b.cols();
    let mut out = vec![0i32; a.rows() * n];
    out.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        let ai = a.row(i);
        for (j, c) in row.iter_mut().enumerate() {
            *c = dot_wrap(ai, bt.row(j));
        }
    });
    Matrix::from_vec(a.rows(), n, out)
}

#[inline]
fn dot_wrap(a: &[i8], b: &[i8]) -> i32 {
    // |a*b| <= 2^14, so a block of 2^16 products sums to at most 2^30 and
    // cannot overflow before the wrapping add into the running total.
    let mut acc = 0i32;
    for (ca, cb) in a.chunks(1 << 16).zip(b.chunks(1 << 16)) {
        let part: i32 = ca.iter().zip(cb).map(|(&x, &y)| (x as i16 * y as i16) as i32).sum();
        acc = acc.wrapping_add(part);
    }
    acc
}
