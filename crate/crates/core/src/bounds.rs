//! Deterministic elementwise error bounds for the emulated product.
//!
//! Every quantity is an [`ExReal`]; anything that cannot be represented
//! exactly (square roots, quotients) is rounded upward to [`PREC`] bits, so
//! each reported entry is at least the value of the formula.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exreal::ExReal;
use crate::fpkernel::{round_exreal, RoundDir};
use crate::matrix::{check_product, Matrix};
use crate::moduli::{table, ModuliTable, MAX_MODULI, MIN_MODULI};
use crate::scalar::{Precision, WorkingFloat};
use crate::scaling::Clearance;

/// Significand bits kept by upward-rounded steps.
pub const PREC: u64 = 160;

/// Round `x` toward `+inf` to `PREC` significant bits.
pub fn round_up(x: &ExReal) -> ExReal {
    let m = x.mantissa();
    let bits = m.bits();
    if bits <= PREC {
        return x.clone();
    }
    let sh = bits - PREC;
    let mut q: BigUint = m >> sh;
    // canonical mantissas are odd, so bits were dropped
    if !x.is_negative() {
        q += 1u32;
    }
    ExReal::new(x.is_negative(), q, x.exponent() + sh as i64)
}

/// `round_up(x * y)`.
pub fn mul_up(x: &ExReal, y: &ExReal) -> ExReal {
    round_up(&(x * y))
}

fn int_sqrt(x: &ExReal, up: bool) -> ExReal {
    assert!(!x.is_negative(), "square root of a negative value");
    if x.is_zero() {
        return ExReal::zero();
    }
    let m = x.mantissa();
    let mut s = (2 * PREC + 2).saturating_sub(m.bits());
    if (x.exponent() - s as i64) % 2 != 0 {
        s += 1;
    }
    let big: BigUint = m << s;
    let mut r = big.sqrt();
    if up && &r * &r < big {
        r += 1u32;
    }
    let e = (x.exponent() - s as i64) / 2;
    let v = ExReal::new(false, r, e);
    if up {
        round_up(&v)
    } else {
        // truncation only lowers a nonnegative value
        let bits = v.mantissa().bits();
        if bits <= PREC {
            v
        } else {
            let sh = bits - PREC;
            ExReal::new(false, v.mantissa() >> sh, v.exponent() + sh as i64)
        }
    }
}

/// An upper bound on `sqrt(x)`, `x >= 0`.
pub fn sqrt_up(x: &ExReal) -> ExReal {
    int_sqrt(x, true)
}

/// A lower bound on `sqrt(x)`, `x >= 0`.
pub fn sqrt_down(x: &ExReal) -> ExReal {
    int_sqrt(x, false)
}

/// An upper bound on `num / den` for `num >= 0`, `den > 0`.
pub fn div_up(num: &ExReal, den: &ExReal) -> ExReal {
    assert!(!den.is_zero() && !den.is_negative() && !num.is_negative());
    if num.is_zero() {
        return ExReal::zero();
    }
    let (n, d) = (num.mantissa(), den.mantissa());
    let s = (PREC + 2 + d.bits()).saturating_sub(n.bits());
    let shifted: BigUint = n << s;
    let (q, r) = num_integer::Integer::div_rem(&shifted, d);
    let q = if r.is_zero() { q } else { q + 1u32 };
    round_up(&ExReal::new(false, q, num.exponent() - den.exponent() - s as i64))
}

fn big(x: &BigUint) -> ExReal {
    ExReal::new(false, x.clone(), 0)
}

fn uint(x: u64) -> ExReal {
    ExReal::new(false, BigUint::from(x), 0)
}

/// Exact `rho * P`.
fn rho_p(table: &ModuliTable) -> ExReal {
    big(&(&table.p_big * table.rho))
}

/// The part of the final-reduction bound that does not depend on `A'B'`,
/// and the coefficient of `|A'B'|`.
pub fn reduction_terms(table: &ModuliTable) -> (ExReal, ExReal) {
    let n2 = uint(table.n as u64 + 2);
    match table.mode {
        Precision::Fp32 => {
            // (1 + u32)(N+2) u64 rho P,  u32
            let c = &(&(&ExReal::one() + &ExReal::pow2(-24)) * &n2) * &rho_p(table);
            (c.mul_pow2(-53), ExReal::pow2(-24))
        }
        Precision::Fp64 => {
            // (1 + 3u64) 2^(1+ceil log2 rho) (N+2) u64^2 rho P,  3 u64
            let k = 1 + table.ceil_log2_rho() as i64;
            let c = &(&(&ExReal::one() + &uint(3).mul_pow2(-53)) * &n2) * &rho_p(table);
            (c.mul_pow2(k - 106), uint(3).mul_pow2(-53))
        }
    }
}

/// `R_b` for one entry of `|A'B'|`.
pub fn reduction_bound(table: &ModuliTable, abs_ab: &BigUint) -> ExReal {
    let (c, u) = reduction_terms(table);
    &c + &(&u * &big(abs_ab))
}

/// Scalar `r_b`: `R_b` with `|A'B'|` replaced by `P/2`.
pub fn reduction_scalar(table: &ModuliTable) -> ExReal {
    let (c, u) = reduction_terms(table);
    &c + &(&u * &big(&table.p_big)).mul_pow2(-1)
}

/// Bound on `|C1 - sum w_l W_l|` in fp32 mode: `(N+1) u64 rho P`.
pub fn accumulation_bound_fp32(table: &ModuliTable) -> ExReal {
    (&uint(table.n as u64 + 1) * &rho_p(table)).mul_pow2(-53)
}

/// Bound on `|C1 + C2 - sum w_l W_l|` in fp64 mode:
/// `2^(1+ceil log2 rho) (N+1+N u64) u64^2 rho P`.
pub fn accumulation_bound_fp64(table: &ModuliTable) -> ExReal {
    let n = table.n as u64;
    let f = &uint(n + 1) + &uint(n).mul_pow2(-53);
    (&f * &rho_p(table)).mul_pow2(1 + table.ceil_log2_rho() as i64 - 106)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentStats {
    /// `floor(log2 max_h |a_ih|)`.
    pub alpha: Vec<i32>,
    pub beta: Vec<i32>,
    /// Row / column maxima of `Cbar`, clamped to at least 1 as in scaling.
    pub c_row_max: Vec<u32>,
    pub c_col_max: Vec<u32>,
    /// `log2` of the maxima, for reporting. The bounds themselves use
    /// `2^(e'/2) = sqrt(cmax)` evaluated with upward rounding.
    pub e_prime: Vec<f64>,
    pub f_prime: Vec<f64>,
    pub alpha_prime: Vec<f64>,
    pub beta_prime: Vec<f64>,
    /// Upper bounds on `2^alpha'` and `2^beta'`.
    pub pow_alpha_prime: Vec<ExReal>,
    pub pow_beta_prime: Vec<ExReal>,
    /// Upper bounds on `t = 1/sqrt(32(P-1))` and on `t^2`.
    pub t: ExReal,
    pub t_squared: ExReal,
}

fn clamped_int_maxima(c_bar: &Matrix<i32>) -> (Vec<u32>, Vec<u32>) {
    let mut r = vec![1u32; c_bar.rows()];
    let mut c = vec![1u32; c_bar.cols()];
    for ((i, j), &v) in c_bar.indexed() {
        let v = v.max(0) as u32;
        r[i] = r[i].max(v);
        c[j] = c[j].max(v);
    }
    (r, c)
}

fn t_values(table: &ModuliTable) -> (ExReal, ExReal) {
    let d = big(&((&table.p_big - 1u32) << 5));
    (div_up(&ExReal::one(), &sqrt_down(&d)), div_up(&ExReal::one(), &d))
}

fn pow_prime(exps: &[i32], maxima: &[u32]) -> Vec<ExReal> {
    exps.iter().zip(maxima).map(|(&a, &c)| sqrt_up(&uint(c as u64)).mul_pow2(a as i64)).collect()
}

fn ilogb_rows<F: WorkingFloat>(a: &Matrix<F>) -> Result<Vec<i32>> {
    (0..a.rows())
        .map(|i| {
            let mx = a.row(i).iter().fold(F::zero(), |m, &x| m.max(x.abs()));
            if mx == F::zero() {
                Err(Error::ZeroRow(i))
            } else {
                Ok(mx.ilogb())
            }
        })
        .collect()
}

pub fn exponent_stats<F: WorkingFloat>(
    a: &Matrix<F>,
    b: &Matrix<F>,
    c_bar: &Matrix<i32>,
    table: &ModuliTable,
) -> Result<ExponentStats> {
    check_product(a, b)?;
    if c_bar.shape() != (a.rows(), b.cols()) {
        return Err(Error::Dimension(format!("Cbar is {:?}, product is {:?}", c_bar.shape(), (a.rows(), b.cols()))));
    }
    let alpha = ilogb_rows(a)?;
    let beta = ilogb_rows(&b.transpose()).map_err(|e| match e {
        Error::ZeroRow(j) => Error::ZeroColumn(j),
        e => e,
    })?;
    let (c_row_max, c_col_max) = clamped_int_maxima(c_bar);
    let logs = |v: &[u32]| v.iter().map(|&c| (c as f64).log2()).collect::<Vec<_>>();
    let (e_prime, f_prime) = (logs(&c_row_max), logs(&c_col_max));
    let half = |x: &[i32], l: &[f64]| x.iter().zip(l).map(|(&a, &e)| a as f64 + e / 2.0).collect();
    let (t, t_squared) = t_values(table);
    Ok(ExponentStats {
        alpha_prime: half(&alpha, &e_prime),
        beta_prime: half(&beta, &f_prime),
        pow_alpha_prime: pow_prime(&alpha, &c_row_max),
        pow_beta_prime: pow_prime(&beta, &c_col_max),
        alpha,
        beta,
        c_row_max,
        c_col_max,
        e_prime,
        f_prime,
        t,
        t_squared,
    })
}

/// Stats from a scaling clearance pass.
pub fn exponent_stats_from<F: WorkingFloat>(
    a: &Matrix<F>,
    b: &Matrix<F>,
    clearance: &Clearance,
    table: &ModuliTable,
) -> Result<ExponentStats> {
    exponent_stats(a, b, &clearance.c_bar, table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Tight,
    Cheap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub kind: BoundKind,
    /// Upper bounds on the formula value, entrywise.
    pub bound: Matrix<ExReal>,
    /// `bound` rounded up to `f64`.
    pub upper: Matrix<f64>,
    /// Constant part of `R_b` and the coefficient of `|A'B'|`.
    pub reduction: (ExReal, ExReal),
    /// `r_b` for the cheap bound.
    pub scalar: Option<ExReal>,
}

impl BoundResult {
    pub fn max(&self) -> f64 {
        self.upper.iter().fold(0.0, |m, &x| m.max(x))
    }

    pub fn min(&self) -> f64 {
        self.upper.iter().fold(f64::INFINITY, |m, &x| m.min(x))
    }
}

/// `t |A| v` and `t v^T |B|`, each entry rounded up.
fn scaled_abs_sums<F: WorkingFloat>(a: &Matrix<F>, b: &Matrix<F>, t: &ExReal) -> (Vec<ExReal>, Vec<ExReal>) {
    let sum = |xs: &mut dyn Iterator<Item = F>| {
        let mut acc = ExReal::zero();
        for x in xs {
            acc = &acc + &ExReal::from_float(x.abs());
        }
        mul_up(&acc, t)
    };
    let rows = (0..a.rows()).into_par_iter().map(|i| sum(&mut a.row(i).iter().copied())).collect();
    let bt = b.transpose();
    let cols = (0..bt.rows()).into_par_iter().map(|j| sum(&mut bt.row(j).iter().copied())).collect();
    (rows, cols)
}

/// `g_i 2^beta'_j + 2^alpha'_i h_j + (k + R_ij) t^2 2^alpha'_i 2^beta'_j`.
fn evaluate(
    stats: &ExponentStats,
    g: &[ExReal],
    h: &[ExReal],
    k: usize,
    r: &(dyn Fn(usize, usize) -> ExReal + Sync),
) -> (Matrix<ExReal>, Matrix<f64>) {
    let (m, n) = (g.len(), h.len());
    let kk = uint(k as u64);
    let rows: Vec<Vec<ExReal>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let pa = &stats.pow_alpha_prime[i];
            (0..n)
                .map(|j| {
                    let pb = &stats.pow_beta_prime[j];
                    let third = mul_up(&mul_up(&(&kk + &r(i, j)), &stats.t_squared), &mul_up(pa, pb));
                    round_up(&(&(&mul_up(&g[i], pb) + &mul_up(pa, &h[j])) + &third))
                })
                .collect()
        })
        .collect();
    let bound = Matrix::from_vec(m, n, rows.into_iter().flatten().collect()).expect("shape");
    let upper = bound.map(|x| round_exreal::<f64>(x, RoundDir::Up).unwrap_or(f64::INFINITY));
    (bound, upper)
}

fn check_stats<F: WorkingFloat>(
    stats: &ExponentStats,
    a: &Matrix<F>,
    b: &Matrix<F>,
    table: &ModuliTable,
) -> Result<()> {
    check_product(a, b)?;
    if stats.alpha.len() != a.rows() || stats.beta.len() != b.cols() {
        return Err(Error::Dimension("exponent stats do not match the inputs".into()));
    }
    if table.mode != F::PRECISION {
        return Err(Error::ModeMismatch { expected: F::PRECISION.to_string(), got: table.mode.to_string() });
    }
    Ok(())
}

/// The elementwise bound with `R_b` evaluated on the exact `|A'B'|`.
pub fn bound_tight<F: WorkingFloat>(
    stats: &ExponentStats,
    abs_ab: &Matrix<BigUint>,
    a: &Matrix<F>,
    b: &Matrix<F>,
    table: &ModuliTable,
) -> Result<BoundResult> {
    check_stats(stats, a, b, table)?;
    if abs_ab.shape() != (a.rows(), b.cols()) {
        return Err(Error::Dimension("|A'B'| does not match the product".into()));
    }
    let (g, h) = scaled_abs_sums(a, b, &stats.t);
    let (c, u) = reduction_terms(table);
    let r = |i: usize, j: usize| &c + &(&u * &big(&abs_ab[(i, j)]));
    let (bound, upper) = evaluate(stats, &g, &h, a.cols(), &r);
    Ok(BoundResult { kind: BoundKind::Tight, bound, upper, reduction: (c, u), scalar: None })
}

/// The rank-one bound with the scalar `r_b`.
pub fn bound_cheap<F: WorkingFloat>(
    stats: &ExponentStats,
    a: &Matrix<F>,
    b: &Matrix<F>,
    table: &ModuliTable,
) -> Result<BoundResult> {
    check_stats(stats, a, b, table)?;
    let (g, h) = scaled_abs_sums(a, b, &stats.t);
    Ok(cheap_from_sums(stats, &g, &h, a.cols(), table))
}

fn cheap_from_sums(stats: &ExponentStats, g: &[ExReal], h: &[ExReal], k: usize, table: &ModuliTable) -> BoundResult {
    let rb = reduction_scalar(table);
    let r = |_: usize, _: usize| rb.clone();
    let (bound, upper) = evaluate(stats, g, h, k, &r);
    BoundResult { kind: BoundKind::Cheap, bound, upper, reduction: reduction_terms(table), scalar: Some(rb) }
}

/// Target for [`suggest_n`].
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Scalar(f64),
    Matrix(Matrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Suggestion {
    /// The smallest count whose cheap bound meets the target.
    Achievable { n: usize, bound_max: f64 },
    /// Even the full moduli list misses the target.
    NotAchievable { best_bound_max: f64 },
}

/// The smallest `N` whose cheap bound meets `target` on every entry.
pub fn suggest_n<F: WorkingFloat>(a: &Matrix<F>, b: &Matrix<F>, target: &Target) -> Result<Suggestion> {
    match target {
        Target::Scalar(t) if t.is_nan() || *t <= 0.0 => {
            return Err(Error::Domain(format!("target {t} is not positive")))
        }
        Target::Matrix(t) if t.shape() != (a.rows(), b.cols()) => {
            return Err(Error::Dimension("target does not match the product".into()))
        }
        Target::Matrix(t) if t.iter().any(|x| x.is_nan() || *x <= 0.0) => {
            return Err(Error::Domain("target entries must be positive".into()))
        }
        _ => {}
    }
    let clearance = crate::scaling::clearance(a, b)?;
    let mut best = f64::INFINITY;
    for n in MIN_MODULI..=MAX_MODULI {
        let table = table(n, F::PRECISION)?;
        let stats = exponent_stats(a, b, &clearance.c_bar, table)?;
        let (g, h) = scaled_abs_sums(a, b, &stats.t);
        let res = cheap_from_sums(&stats, &g, &h, a.cols(), table);
        let ok = match target {
            Target::Scalar(t) => res.max() <= *t,
            Target::Matrix(t) => res.upper.iter().zip(t.iter()).all(|(x, y)| x <= y),
        };
        best = best.min(res.max());
        if ok {
            return Ok(Suggestion::Achievable { n, bound_max: res.max() });
        }
    }
    Ok(Suggestion::NotAchievable { best_bound_max: best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emulator::os_ii;
    use crate::oracle::{error_exact, exact_abs_gemm, exact_gemm};
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn rational(x: &ExReal) -> BigRational {
        let m = BigInt::from(x.mantissa().clone()) * if x.is_negative() { -1 } else { 1 };
        let e = x.exponent();
        if e >= 0 {
            BigRational::from_integer(m << e as u64)
        } else {
            BigRational::new(m, BigInt::one() << (-e) as u64)
        }
    }

    #[test]
    fn directed_helpers() {
        let two = uint(2);
        let s = sqrt_up(&two);
        let sd = sqrt_down(&two);
        assert!(&s * &s >= two && &sd * &sd <= two);
        assert!(&s - &sd <= ExReal::pow2(-(PREC as i64) + 2));
        assert_eq!(sqrt_up(&uint(1024)), uint(32));
        assert_eq!(sqrt_down(&uint(1024)), uint(32));
        let third = div_up(&ExReal::one(), &uint(3));
        assert!(&third * &uint(3) >= ExReal::one());
        assert!(&(&third * &uint(3)) - &ExReal::one() <= ExReal::pow2(-(PREC as i64) + 2));
        assert_eq!(div_up(&uint(6), &uint(3)), uint(2));
        let odd = ExReal::new(false, (BigUint::one() << 300u32) + 1u32, 0);
        assert!(round_up(&odd) > odd);
    }

    #[test]
    fn t_for_two_moduli() {
        let tb = table(2, Precision::Fp64).unwrap();
        let (t, t2) = t_values(tb);
        // 1/sqrt(2088928) = 6.918919287658...e-4
        assert!((t.to_f64_lossy() - 6.918919287658e-4).abs() < 1e-15);
        let exact_t2 = BigRational::new(BigInt::one(), BigInt::from(32 * 65279));
        assert!(rational(&t2) >= exact_t2);
        assert!(rational(&(&t * &t)) >= exact_t2);
        assert!(rational(&t2) - &exact_t2 < BigRational::new(BigInt::one(), BigInt::one() << 170u32));
    }

    #[test]
    fn cheap_scalar_for_two_moduli() {
        let tb = table(2, Precision::Fp64).unwrap();
        let u = BigRational::new(BigInt::one(), BigInt::one() << 53u32);
        let one = BigRational::one();
        let three = BigRational::from_integer(BigInt::from(3));
        let want = (&one + &three * &u)
            * BigRational::from_integer(BigInt::from(2 * 256 * 4 * 255 * 65280i64))
            * &u
            * &u
            + BigRational::new(BigInt::from(3), BigInt::from(2)) * &u * BigRational::from_integer(BigInt::from(65280));
        assert_eq!(rational(&reduction_scalar(tb)), want);
        let t20 = table(20, Precision::Fp64).unwrap();
        let rp = BigRational::from_integer(BigInt::from(&t20.p_big * t20.rho));
        let c = (&one + &three * &u)
            * BigRational::from_integer(BigInt::from(22u32) << (1 + t20.ceil_log2_rho()))
            * &u
            * &u
            * rp;
        assert_eq!(rational(&reduction_terms(t20).0), c);
    }

    #[test]
    fn one_by_one_sound_and_ordered() {
        for n in [2, 20, 49] {
            let a = Matrix::filled(1, 1, 1.0f64);
            let r = os_ii(&a, &a, n, false).unwrap();
            let stats = exponent_stats(&a, &a, r.scaling.c_bar(), r.table).unwrap();
            assert_eq!(stats.alpha, vec![0]);
            assert_eq!(stats.c_row_max, vec![1024]);
            assert_eq!(stats.e_prime, vec![10.0]);
            let abs = exact_abs_gemm(&r.scaling.a_prime, &r.scaling.b_prime).unwrap();
            let tight = bound_tight(&stats, &abs, &a, &a, r.table).unwrap();
            let cheap = bound_cheap(&stats, &a, &a, r.table).unwrap();
            let err = error_exact(&r.c, &exact_gemm(&a, &a).unwrap()).unwrap();
            assert!(err[(0, 0)] <= tight.bound[(0, 0)]);
            assert!(tight.bound[(0, 0)] <= cheap.bound[(0, 0)]);
            assert!(tight.min() > 0.0);
        }
    }

    #[test]
    fn doubling_a_shifts_alpha() {
        let a = Matrix::from_fn(3, 4, |i, j| (i as f64 + 0.5) * (j as f64 - 1.7));
        let b = Matrix::from_fn(4, 2, |i, j| (i * 2 + j) as f64 * 0.3 + 0.1);
        let tb = table(6, Precision::Fp64).unwrap();
        let c1 = crate::scaling::clearance(&a, &b).unwrap();
        let a2 = a.map(|x| x * 2.0);
        let c2 = crate::scaling::clearance(&a2, &b).unwrap();
        let s1 = exponent_stats(&a, &b, &c1.c_bar, tb).unwrap();
        let s2 = exponent_stats(&a2, &b, &c2.c_bar, tb).unwrap();
        assert_eq!(s1.e_prime, s2.e_prime);
        assert!(s1.alpha.iter().zip(&s2.alpha).all(|(x, y)| x + 1 == *y));
    }

    #[test]
    fn suggestion_edges() {
        let a = Matrix::from_fn(4, 8, |i, j| ((i * 8 + j) as f64 * 0.77).sin());
        let b = Matrix::from_fn(8, 3, |i, j| ((i * 3 + j) as f64 * 1.3).cos());
        assert!(matches!(
            suggest_n(&a, &b, &Target::Scalar(f64::INFINITY)).unwrap(),
            Suggestion::Achievable { n: 2, .. }
        ));
        assert!(matches!(suggest_n(&a, &b, &Target::Scalar(1e-300)).unwrap(), Suggestion::NotAchievable { .. }));
        assert!(suggest_n(&a, &b, &Target::Scalar(0.0)).is_err());
        let mut last = usize::MAX;
        for t in [1e-15, 1e-12, 1e-8, 1e-4, 1.0] {
            if let Suggestion::Achievable { n, .. } = suggest_n(&a, &b, &Target::Scalar(t)).unwrap() {
                assert!(n <= last);
                last = n;
            }
        }
    }
}
