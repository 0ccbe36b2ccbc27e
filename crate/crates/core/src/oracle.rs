//! Exact reference arithmetic: dyadic GEMM, exact CRT quantities and the
//! property checks the emulated pipeline is verified against.

use std::sync::LazyLock;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exreal::ExReal;
use crate::fpkernel::{log2_enclosure, round_exreal, RoundDir, U32};
use crate::int8engine::I8Matrix;
use crate::matrix::{check_product, Matrix};
use crate::moduli::ModuliTable;
use crate::scalar::WorkingFloat;

pub type ExactMatrix = Matrix<ExReal>;

/// Fixed-width two's-complement accumulator: the value is `limbs * 2^base`.
struct SuperAcc {
    limbs: Vec<u64>,
    base: i64,
}

impl SuperAcc {
    fn new(width_bits: i64, base: i64) -> Self {
        SuperAcc { limbs: vec![0; (width_bits / 64 + 2) as usize], base }
    }

    fn clear(&mut self) {
        self.limbs.iter_mut().for_each(|l| *l = 0);
    }

    #[inline]
    fn add(&mut self, neg: bool, mag: u128, exp: i64) {
        let off = (exp - self.base) as u64;
        let (li, sh) = ((off / 64) as usize, (off % 64) as u32);
        let (lo, hi) = (mag as u64, (mag >> 64) as u64);
        let words = if sh == 0 { [lo, hi, 0] } else { [lo << sh, (hi << sh) | (lo >> (64 - sh)), hi >> (64 - sh)] };
        let n = self.limbs.len();
        if neg {
            let mut borrow = false;
            let mut idx = li;
            for w in words {
                let (d, b1) = self.limbs[idx].overflowing_sub(w);
                let (d, b2) = d.overflowing_sub(borrow as u64);
                self.limbs[idx] = d;
                borrow = b1 || b2;
                idx += 1;
            }
            while borrow && idx < n {
                let (d, b) = self.limbs[idx].overflowing_sub(1);
                self.limbs[idx] = d;
                borrow = b;
                idx += 1;
            }
        } else {
            let mut carry = false;
            let mut idx = li;
            for w in words {
                let (s, c1) = self.limbs[idx].overflowing_add(w);
                let (s, c2) = s.overflowing_add(carry as u64);
                self.limbs[idx] = s;
                carry = c1 || c2;
                idx += 1;
            }
            while carry && idx < n {
                let (s, c) = self.limbs[idx].overflowing_add(1);
                self.limbs[idx] = s;
                carry = c;
                idx += 1;
            }
        }
    }

    fn value(&self) -> ExReal {
        let neg = self.limbs.last().is_some_and(|&l| l >> 63 == 1);
        let mut limbs = self.limbs.clone();
        if neg {
            let mut carry = true;
            for l in limbs.iter_mut() {
                let (s, c) = (!*l).overflowing_add(carry as u64);
                *l = s;
                carry = c;
            }
        }
        let digits: Vec<u32> = limbs.iter().flat_map(|&l| [l as u32, (l >> 32) as u32]).collect();
        ExReal::new(neg, BigUint::new(digits), self.base)
    }
}

/// `(negative, significand, lsb exponent)` of each entry, with `|a|` taken
/// when `abs` is set.
fn decompose_all<F: WorkingFloat>(m: &Matrix<F>, abs: bool) -> Vec<(bool, u64, i32)> {
    m.iter()
        .map(|&x| {
            let (neg, s, e) = x.decompose();
            (neg && !abs, s, e)
        })
        .collect()
}

/// `(min lsb exponent, max top exponent)` over the nonzero entries.
fn exponent_span(parts: &[(bool, u64, i32)]) -> Option<(i64, i64)> {
    parts.iter().filter(|p| p.1 != 0).fold(None, |acc, &(_, s, e)| {
        let lo = e as i64;
        let hi = e as i64 + 64 - s.leading_zeros() as i64;
        Some(match acc {
            None => (lo, hi),
            Some((a, b)) => (a.min(lo), b.max(hi)),
        })
    })
}

fn gemm_impl<F: WorkingFloat>(a: &Matrix<F>, b: &Matrix<F>, abs: bool) -> Result<ExactMatrix> {
    check_product(a, b)?;
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let pa = decompose_all(a, abs);
    let pb = decompose_all(&b.transpose(), abs);
    let (Some((alo, ahi)), Some((blo, bhi))) = (exponent_span(&pa), exponent_span(&pb)) else {
        return Ok(Matrix::filled(m, n, ExReal::zero()));
    };
    let base = alo + blo;
    let width = ahi + bhi - base + 64 - (k.max(1) as u64).leading_zeros() as i64 + 2;
    let rows: Vec<Vec<ExReal>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut acc = SuperAcc::new(width, base);
            let ai = &pa[i * k..(i + 1) * k];
            (0..n)
                .map(|j| {
                    acc.clear();
                    for (&(na, sa, ea), &(nb, sb, eb)) in ai.iter().zip(&pb[j * k..(j + 1) * k]) {
                        if sa != 0 && sb != 0 {
                            acc.add(na != nb, sa as u128 * sb as u128, ea as i64 + eb as i64);
                        }
                    }
                    acc.value()
                })
                .collect()
        })
        .collect();
    Matrix::from_vec(m, n, rows.into_iter().flatten().collect())
}

/// Exact `A * B` for floating-point inputs.
pub fn exact_gemm<F: WorkingFloat>(a: &Matrix<F>, b: &Matrix<F>) -> Result<ExactMatrix> {
    gemm_impl(a, b, false)
}

/// Exact `|A| * |B|`.
pub fn exact_abs_product<F: WorkingFloat>(a: &Matrix<F>, b: &Matrix<F>) -> Result<ExactMatrix> {
    gemm_impl(a, b, true)
}

fn to_int_matrix(x: ExactMatrix) -> Result<Matrix<BigInt>> {
    let data = x
        .indexed()
        .map(|((row, col), v)| v.to_bigint().ok_or(Error::NonInteger { row, col }))
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_vec(x.rows(), x.cols(), data)
}

/// Exact `A'B'` for integer-valued inputs.
pub fn exact_int_gemm(a: &Matrix<f64>, b: &Matrix<f64>) -> Result<Matrix<BigInt>> {
    to_int_matrix(exact_gemm(a, b)?)
}

/// Exact `|A'||B'|` for integer-valued inputs.
pub fn exact_abs_gemm(a: &Matrix<f64>, b: &Matrix<f64>) -> Result<Matrix<BigUint>> {
    Ok(to_int_matrix(exact_abs_product(a, b)?)?.map(|v| v.magnitude().clone()))
}

/// The exact counterparts of the reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct CrtExact {
    /// `sum (P/p_l) q_l W_l`.
    pub c_exact: Matrix<BigInt>,
    /// `round(sum q_l/p_l W_l)`.
    pub q_exact: Matrix<BigInt>,
    /// `C_exact - P Q_exact`, which must equal `A'B'`.
    pub reduced: Matrix<BigInt>,
    /// Entries whose `sum q_l/p_l W_l` lies exactly halfway between integers.
    pub ties: usize,
}

/// Nearest integer to `num / den` (`den > 0`, ties to even) and whether it
/// was a tie.
pub fn round_ratio_int(num: &BigInt, den: &BigUint) -> (BigInt, bool) {
    let d = BigInt::from(den.clone());
    let (q, r) = num.div_mod_floor(&d);
    let twice: BigInt = &r * 2;
    match twice.cmp(&d) {
        std::cmp::Ordering::Less => (q, false),
        std::cmp::Ordering::Greater => (q + 1, false),
        std::cmp::Ordering::Equal => {
            let even = if q.is_even() { q } else { q + 1 };
            (even, true)
        }
    }
}

pub fn exact_crt_quantities(w: &[I8Matrix], table: &ModuliTable) -> Result<CrtExact> {
    if w.len() != table.n || w.is_empty() {
        return Err(Error::Dimension(format!("{} residue products for N = {}", w.len(), table.n)));
    }
    let (m, n) = w[0].shape();
    let weights: Vec<BigInt> = table.weights.iter().map(|x| BigInt::from(x.clone())).collect();
    let p = BigInt::from(table.p_big.clone());
    let mut c_exact = Vec::with_capacity(m * n);
    let mut q_exact = Vec::with_capacity(m * n);
    let mut reduced = Vec::with_capacity(m * n);
    let mut ties = 0;
    for idx in 0..m * n {
        let c: BigInt = w.iter().zip(&weights).map(|(wl, s)| s * wl.as_slice()[idx] as i64).sum();
        let (q, tie) = round_ratio_int(&c, &table.p_big);
        ties += tie as usize;
        reduced.push(&c - &p * &q);
        c_exact.push(c);
        q_exact.push(q);
    }
    Ok(CrtExact {
        c_exact: Matrix::from_vec(m, n, c_exact)?,
        q_exact: Matrix::from_vec(m, n, q_exact)?,
        reduced: Matrix::from_vec(m, n, reduced)?,
        ties,
    })
}

/// `sum_l coeff_l W_l` in exact arithmetic.
pub fn exact_weighted_sum(w: &[I8Matrix], coeffs: &[f64]) -> Result<ExactMatrix> {
    let (m, n) = w.first().map(|x| x.shape()).unwrap_or((0, 0));
    let cs: Vec<ExReal> = coeffs.iter().map(|&c| ExReal::from_float(c)).collect();
    Ok(Matrix::from_fn(m, n, |i, j| {
        let mut acc = ExReal::zero();
        for (wl, c) in w.iter().zip(&cs) {
            acc = &acc + &(c * &ExReal::from_i64(wl[(i, j)] as i64));
        }
        acc
    }))
}

/// Exact `|exact - C|` entrywise.
pub fn error_exact<F: WorkingFloat>(c: &Matrix<F>, exact: &ExactMatrix) -> Result<ExactMatrix> {
    if c.shape() != exact.shape() {
        return Err(Error::Dimension("error of mismatched shapes".into()));
    }
    Ok(Matrix::from_fn(c.rows(), c.cols(), |i, j| (&exact[(i, j)] - &ExReal::from_float(c[(i, j)])).abs()))
}

/// `|exact - C|` rounded up to `f64`.
pub fn error_matrix<F: WorkingFloat>(c: &Matrix<F>, exact: &ExactMatrix) -> Result<Matrix<f64>> {
    Ok(error_exact(c, exact)?.map(|e| round_exreal::<f64>(e, RoundDir::Up).unwrap_or(f64::INFINITY)))
}

/// Outcome of a check whose threshold is irrational.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated,
    Undecided,
}

const HEADROOM_BITS: u32 = 256;

/// Fixed-point bounds `lo <= 2^(-2^-20) * 2^256 <= hi`, from twenty
/// directed square roots of 2.
static HALF_POW_BOUNDS: LazyLock<(BigUint, BigUint)> = LazyLock::new(|| {
    let one = BigUint::one() << HEADROOM_BITS;
    let (mut up, mut down) = (&one * 2u32, &one * 2u32);
    for _ in 0..20 {
        let s: BigUint = (&up << HEADROOM_BITS).sqrt();
        let shifted = &up << HEADROOM_BITS;
        up = if &s * &s < shifted { s + 1u32 } else { s };
        down = (&down << HEADROOM_BITS).sqrt();
    }
    let sq = &one * &one;
    // 1/up rounded down, 1/down rounded up
    let lo = &sq / &up;
    let hi = (&sq + &down - 1u32) / &down;
    (lo, hi)
});

/// Is `x < (P - 1) 2^(-1 - 2^-20)`?
pub fn headroom_entry(x: &BigUint, table: &ModuliTable) -> Verdict {
    let (lo, hi) = &*HALF_POW_BOUNDS;
    let lhs = (x << (HEADROOM_BITS + 1)) as BigUint;
    let pm1 = &table.p_big - 1u32;
    if lhs < &pm1 * lo {
        Verdict::Holds
    } else if lhs >= &pm1 * hi {
        Verdict::Violated
    } else {
        Verdict::Undecided
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub checked: usize,
    pub violated: usize,
    pub undecided: usize,
}

impl Tally {
    pub fn record(&mut self, v: Verdict) {
        self.checked += 1;
        match v {
            Verdict::Holds => {}
            Verdict::Violated => self.violated += 1,
            Verdict::Undecided => self.undecided += 1,
        }
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        self.checked += other.checked;
        self.violated += other.violated;
        self.undecided += other.undecided;
        self
    }

    pub fn clean(&self) -> bool {
        self.violated == 0 && self.undecided == 0
    }
}

/// Headroom check over a whole `|A'||B'|` matrix.
pub fn headroom_check(abs_ab: &Matrix<BigUint>, table: &ModuliTable) -> Tally {
    let mut t = Tally::default();
    for x in abs_ab.iter() {
        t.record(headroom_entry(x, table));
    }
    t
}

/// Lower bounds on the scaling exponents: `mu_i >= -alpha'_i +
/// (log2(P-1) + 5)/2`, checked exactly as `2^(2(mu+alpha)-5) cmax >= P-1`.
pub fn exponent_floor_check(mu: &[i16], alpha: &[i32], cmax: &[u32], table: &ModuliTable) -> Tally {
    let pm1 = ExReal::from_int(&BigInt::from(&table.p_big - 1u32));
    let mut t = Tally::default();
    for ((&m, &a), &c) in mu.iter().zip(alpha).zip(cmax) {
        let lhs = ExReal::from_i64(c.max(1) as i64).mul_pow2(2 * (m as i64 + a as i64) - 5);
        t.record(if lhs >= pm1 { Verdict::Holds } else { Verdict::Violated });
    }
    t
}

/// `floor(P' - 0.5(1+u32) e') <= P' - 0.5 e' - 2^-21` with `e' = log2 c`.
///
/// Writing `P' - 0.5 e' = n + phi`, the floor on the left drops to `n - 1`
/// when `phi < 0.5 u32 e'`; the only failing case is
/// `0.5 u32 e' <= phi < 2^-21`.
pub fn floor_inequality(p_prime: f32, c: u64) -> Verdict {
    let e = (c as f64).log2();
    let v = p_prime as f64 - 0.5 * e;
    let phi = v - v.floor();
    let delta = 0.5 * U32 * e;
    let (lim, margin) = (2f64.powi(-21), 1e-11);
    if c.is_power_of_two() {
        // everything is exact in f64 here
        return if phi >= delta && phi < lim { Verdict::Violated } else { Verdict::Holds };
    }
    let near = |x: f64, y: f64| (x - y).abs() < margin;
    if !(near(phi, delta) || near(phi, lim) || phi < margin || phi > 1.0 - margin) {
        return if phi >= delta && phi < lim { Verdict::Violated } else { Verdict::Holds };
    }
    floor_inequality_exact(p_prime, c)
}

/// Interval evaluation of [`floor_inequality`] on a rigorous log enclosure.
pub fn floor_inequality_exact(p_prime: f32, c: u64) -> Verdict {
    let pp = ExReal::from_float(p_prime);
    let u = ExReal::pow2(-24);
    let one = ExReal::pow2(0);
    let bound = ExReal::pow2(-21);
    for bits in [96u32, 192, 384] {
        let (lo, hi) = log2_enclosure(&BigUint::from(c), bits);
        // lhs argument decreases in e', rhs decreases in e'
        let arg_hi = &pp - &(&(&one + &u) * &lo).mul_pow2(-1);
        let arg_lo = &pp - &(&(&one + &u) * &hi).mul_pow2(-1);
        let (f_lo, f_hi) = (arg_lo.floor(), arg_hi.floor());
        let rhs_lo = &(&pp - &hi.mul_pow2(-1)) - &bound;
        let rhs_hi = &(&pp - &lo.mul_pow2(-1)) - &bound;
        let fl_hi = ExReal::from_int(&f_hi);
        let fl_lo = ExReal::from_int(&f_lo);
        if fl_hi <= rhs_lo {
            return Verdict::Holds;
        }
        if fl_lo > rhs_hi {
            return Verdict::Violated;
        }
    }
    Verdict::Undecided
}

/// Sweep the floor inequality for one `P'` over `c in 1..=exhaustive_to`
/// plus the given extra samples.
pub fn floor_inequality_sweep(p_prime: f32, exhaustive_to: u64, extra: &[u64]) -> Tally {
    let part = (1..=exhaustive_to)
        .into_par_iter()
        .fold(Tally::default, |mut t, c| {
            t.record(floor_inequality(p_prime, c));
            t
        })
        .reduce(Tally::default, Tally::merge);
    let mut t = part;
    for &c in extra {
        t.record(floor_inequality(p_prime, c));
    }
    t
}

/// `|x - y|` for big integers.
pub fn abs_diff(x: &BigInt, y: &BigInt) -> BigUint {
    (x - y).abs().magnitude().clone()
}
