//! Residue decomposition, per-modulus integer GEMMs and the floating-point
//! CRT reconstruction of `C'' ~ A'B'`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fpkernel::{round_to_bits, signed_mod};
use crate::int8engine::{gemm_i8_wrap, I8Matrix};
use crate::matrix::{check_product, Matrix};
use crate::moduli::ModuliTable;
use crate::scalar::{Precision, WorkingFloat};

/// Everything the reconstruction produced besides `C''` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct CrtIntermediates {
    pub w: Vec<I8Matrix>,
    pub c1: Matrix<f64>,
    pub c2: Matrix<f64>,
    pub q: Matrix<f64>,
}

fn pow2_mod(e: u64, p: u64) -> u64 {
    let (mut base, mut exp, mut acc) = (2 % p, e, 1 % p);
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    acc
}

/// Signed residue in `i8`; the representative `+128` of `p = 256` is
/// stored as `-128`.
#[inline]
fn to_residue(r: i64, p: u32) -> i8 {
    if r == 128 {
        debug_assert_eq!(p, 256);
        -128
    } else {
        r as i8
    }
}

/// `mod(x, p)` for an integer-valued `f64` of any magnitude.
pub fn residue_of(x: f64, p: u32) -> Option<i8> {
    if !x.is_finite() || x.fract() != 0.0 {
        return None;
    }
    let (neg, s, e) = x.decompose();
    if s == 0 {
        return Some(0);
    }
    let p64 = p as u64;
    let r = if e >= 0 { (s % p64) * pow2_mod(e as u64, p64) % p64 } else { (s >> -e) % p64 } as i64;
    let r = if neg { -r } else { r };
    Some(to_residue(signed_mod(r, p64), p))
}

/// Sign, significand and exponent of every entry of an integer-valued
/// matrix, decomposed once and shared by all moduli.
pub(crate) struct IntegerParts {
    rows: usize,
    cols: usize,
    parts: Vec<(bool, u64, i32)>,
    max_exp: i32,
}

impl IntegerParts {
    pub(crate) fn new(x: &Matrix<f64>) -> Result<Self> {
        let mut parts = Vec::with_capacity(x.rows() * x.cols());
        let mut max_exp = 0;
        for ((row, col), &v) in x.indexed() {
            if !v.is_finite() || v.fract() != 0.0 {
                return Err(Error::NonInteger { row, col });
            }
            let (neg, s, e) = v.decompose();
            let (s, e) = if s == 0 {
                (0, 0)
            } else if e < 0 {
                (s >> -e, 0)
            } else {
                (s, e)
            };
            max_exp = max_exp.max(e);
            parts.push((neg, s, e));
        }
        Ok(IntegerParts { rows: x.rows(), cols: x.cols(), parts, max_exp })
    }

    pub(crate) fn residues(&self, p: u32) -> I8Matrix {
        let p64 = p as u64;
        let mut pow = Vec::with_capacity(self.max_exp as usize + 1);
        let mut v = 1 % p64;
        for _ in 0..=self.max_exp {
            pow.push(v);
            v = v * 2 % p64;
        }
        let data = self
            .parts
            .iter()
            .map(|&(neg, s, e)| {
                let r = ((s % p64) * pow[e as usize] % p64) as i64;
                to_residue(signed_mod(if neg { -r } else { r }, p64), p)
            })
            .collect();
        Matrix::from_vec(self.rows, self.cols, data).expect("shape preserved")
    }
}

/// `A'_l = mod(A', p_l)` entrywise.
pub fn residue_matrix(x: &Matrix<f64>, p: u32) -> Result<I8Matrix> {
    Ok(IntegerParts::new(x)?.residues(p))
}

/// `W_l = mod(A'_l B'_l, p_l)` with the product taken on the wrapping
/// integer engine.
pub fn residue_gemm_and_reduce(a: &I8Matrix, b: &I8Matrix, p: u32) -> Result<I8Matrix> {
    let c = gemm_i8_wrap(a, b)?;
    Ok(c.map(|&v| to_residue(signed_mod(v as i64, p as u64), p)))
}

/// `C1 = fl(sum s1_l W_l)`, `C2 = fl(sum s2_l W_l)`, each a running fma
/// over `l = 1..N`.
pub fn accumulate(w: &[I8Matrix], table: &ModuliTable) -> Result<(Matrix<f64>, Matrix<f64>)> {
    if w.len() != table.n {
        return Err(Error::Dimension(format!("{} residue products for N = {}", w.len(), table.n)));
    }
    let (m, n) = w[0].shape();
    if w.iter().any(|x| x.shape() != (m, n)) {
        return Err(Error::Dimension("residue products differ in shape".into()));
    }
    let mut c1 = vec![0.0f64; m * n];
    let mut c2 = vec![0.0f64; m * n];
    for (l, wl) in w.iter().enumerate() {
        let (s1, s2) = (table.s1[l], table.s2[l]);
        for ((a1, a2), &x) in c1.iter_mut().zip(c2.iter_mut()).zip(wl.as_slice()) {
            *a1 = s1.mul_add(x as f64, *a1);
            *a2 = s2.mul_add(x as f64, *a2);
        }
    }
    Ok((Matrix::from_vec(m, n, c1)?, Matrix::from_vec(m, n, c2)?))
}

/// `Q = round(fl(P_inv * C1))`. A product exactly halfway between two
/// integers is reported as an error rather than resolved by a tie rule.
pub fn compute_q(c1: &Matrix<f64>, table: &ModuliTable) -> Result<Matrix<f64>> {
    let mut data = Vec::with_capacity(c1.rows() * c1.cols());
    for ((row, col), &c) in c1.indexed() {
        let y = table.p_inv * c;
        if (y - y.floor()) == 0.5 {
            return Err(Error::QuotientTie { row, col });
        }
        data.push(y.round_ties_even());
    }
    Matrix::from_vec(c1.rows(), c1.cols(), data)
}

/// `C'' = fl(fma(-Q, P2, fma(-Q, P1, C1) + C2))`, followed in fp32 mode by a
/// rounding to 24 significant bits.
pub fn final_reduce(c1: &Matrix<f64>, c2: &Matrix<f64>, q: &Matrix<f64>, table: &ModuliTable) -> Result<Matrix<f64>> {
    let data = c1
        .iter()
        .zip(c2.iter())
        .zip(q.iter())
        .map(|((&a, &b), &qv)| {
            let t = (-qv).mul_add(table.p1, a) + b;
            let v = (-qv).mul_add(table.p2, t);
            match table.mode {
                Precision::Fp64 => Ok(v),
                Precision::Fp32 => round_to_bits(v, <f32 as WorkingFloat>::DIGITS),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_vec(c1.rows(), c1.cols(), data)
}

/// The whole reconstruction: residues, `N` integer products, accumulation,
/// `Q` and the final reduction. Returns `C''` with the intermediates.
pub fn crt(
    a_prime: &Matrix<f64>,
    b_prime: &Matrix<f64>,
    table: &ModuliTable,
) -> Result<(Matrix<f64>, CrtIntermediates)> {
    check_product(a_prime, b_prime)?;
    let (pa, pb) = (IntegerParts::new(a_prime)?, IntegerParts::new(b_prime)?);
    let w = table
        .p
        .par_iter()
        .map(|&p| residue_gemm_and_reduce(&pa.residues(p), &pb.residues(p), p))
        .collect::<Result<Vec<_>>>()?;
    let (c1, c2) = accumulate(&w, table)?;
    let q = compute_q(&c1, table)?;
    let cpp = final_reduce(&c1, &c2, &q, table)?;
    Ok((cpp, CrtIntermediates { w, c1, c2, q }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moduli::table;
    use num_bigint::BigInt;
    use num_traits::ToPrimitive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn big_residue(x: f64, p: u32) -> i64 {
        let v = crate::exreal::ExReal::from_float(x).to_bigint().unwrap();
        let r = crate::fpkernel::signed_mod_big(&v, &num_bigint::BigUint::from(p));
        r.to_i64().unwrap()
    }

    #[test]
    fn residue_examples() {
        let x = 3.0 * 2f64.powi(60);
        assert_eq!(residue_of(x, 251).unwrap() as i64, big_residue(x, 251));
        assert_eq!(residue_of(-7.0, 4), Some(1));
        assert_eq!(residue_of(128.0, 256), Some(-128));
        assert_eq!(residue_of(-128.0, 256), Some(-128));
        assert_eq!(residue_of(0.5, 7), None);
        let m = Matrix::from_vec(1, 2, vec![1.0, 2.5]).unwrap();
        assert!(matches!(residue_matrix(&m, 5), Err(Error::NonInteger { row: 0, col: 1 })));
    }

    #[test]
    fn residues_of_huge_integers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let s = rng.random_range(1u64..1 << 53) as f64;
            let e = rng.random_range(-20..330);
            let x = crate::fpkernel::scale_pow2(s, e).unwrap().trunc();
            let x = if rng.random::<bool>() { -x } else { x };
            for &p in &[256u32, 255, 251, 29, 97] {
                let want = big_residue(x, p);
                let got = residue_of(x, p).unwrap() as i64;
                if p == 256 && want == 128 {
                    assert_eq!(got, -128);
                } else {
                    assert_eq!(got, want, "x={x} p={p}");
                }
            }
        }
    }

    #[test]
    fn reduce_small() {
        let a = Matrix::from_vec(1, 1, vec![3i8]).unwrap();
        let b = Matrix::from_vec(1, 1, vec![5i8]).unwrap();
        assert_eq!(residue_gemm_and_reduce(&a, &b, 7).unwrap()[(0, 0)], 1);
        let z = Matrix::filled(2, 2, 0i8);
        assert_eq!(residue_gemm_and_reduce(&z, &z, 256).unwrap(), z);
    }

    #[test]
    fn wrap_path_keeps_residue_mod_256() {
        let k = crate::int8engine::MAX_INNER;
        let a = Matrix::filled(1, k, -128i8);
        let b = Matrix::filled(k, 1, -128i8);
        // exact value 2^31 = 0 mod 256
        assert_eq!(residue_gemm_and_reduce(&a, &b, 256).unwrap()[(0, 0)], 0);
    }

    #[test]
    fn q_and_reduce_trivial() {
        let t = table(2, Precision::Fp64).unwrap();
        let w = vec![Matrix::filled(1, 1, 1i8), Matrix::filled(1, 1, 0i8)];
        let (c1, c2) = accumulate(&w, t).unwrap();
        let exact = BigInt::from(t.weights[0].clone());
        assert_eq!(BigInt::from(c1[(0, 0)] as i64 + c2[(0, 0)] as i64), exact);
        let q = compute_q(&c1, t).unwrap();
        assert_eq!(q[(0, 0)], 1.0);
        let cpp = final_reduce(&c1, &c2, &q, t).unwrap();
        assert_eq!(cpp[(0, 0)], -255.0);

        let zero = vec![Matrix::filled(2, 3, 0i8); 2];
        let (c1, c2) = accumulate(&zero, t).unwrap();
        assert!(c1.iter().chain(c2.iter()).all(|&v| v == 0.0));
        let q = compute_q(&c1, t).unwrap();
        assert!(q.iter().all(|&v| v == 0.0));
        assert_eq!(final_reduce(&c1, &c2, &q, t).unwrap(), c1);
    }

    #[test]
    fn tie_is_an_error() {
        let t = table(2, Precision::Fp64).unwrap();
        let c1 = Matrix::filled(1, 1, t.p1 / 2.0);
        assert!(matches!(compute_q(&c1, t), Err(Error::QuotientTie { .. })));
    }

    #[test]
    fn crt_recovers_small_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for mode in [Precision::Fp32, Precision::Fp64] {
            let t = table(4, mode).unwrap();
            let a = Matrix::from_fn(3, 5, |_, _| rng.random_range(-300i32..300) as f64);
            let b = Matrix::from_fn(5, 2, |_, _| rng.random_range(-300i32..300) as f64);
            let (cpp, _) = crt(&a, &b, t).unwrap();
            assert_eq!(cpp, crate::matrix::naive_gemm(&a, &b).unwrap());
        }
    }
}
