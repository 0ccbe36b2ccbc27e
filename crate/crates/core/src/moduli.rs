//! Per-N constant tables: moduli, inverses, the product `P` and its
//! floating-point splits.

use std::fmt::Write as _;
use std::sync::LazyLock;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exreal::ExReal;
use crate::fpkernel::{log2_enclosure, next_up_f32, round_exreal, round_fp32, round_ratio, RoundDir};
use crate::hexfloat::format_hex;
use crate::scalar::Precision;

/// Fixed pairwise-coprime moduli, all `<= 256`; a table for `N` uses the
/// first `N` entries.
pub const MODULI: [u32; 49] = [
    256, 255, 253, 251, 247, 241, 239, 233, 229, 227, //
    223, 217, 211, 199, 197, 193, 191, 181, 179, 173, //
    167, 163, 157, 151, 149, 139, 137, 131, 127, 113, //
    109, 107, 103, 101, 97, 89, 83, 79, 73, 71, //
    67, 61, 59, 53, 47, 43, 41, 37, 29,
];

pub const MIN_MODULI: usize = 2;
pub const MAX_MODULI: usize = 49;

/// All constants the scaling and CRT stages need for one `(N, mode)` pair.
///
/// Fields are public so verification code can inspect (or deliberately
/// corrupt) them; [`build_table`] is the only constructor that establishes
/// the invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuliTable {
    pub n: usize,
    pub mode: Precision,
    pub p: Vec<u32>,
    /// `q[l]` inverts `P / p[l]` modulo `p[l]`, with `0 < q[l] < p[l]`.
    pub q: Vec<u32>,
    pub p_big: BigUint,
    /// `(P / p[l]) * q[l]`, exact.
    pub weights: Vec<BigUint>,
    /// `sum floor(p[l] / 2)`.
    pub rho: u64,
    pub p1: f64,
    pub p2: f64,
    pub p_inv: f64,
    /// Retained leading bits of each weight (fp64 mode only).
    pub beta: Vec<Option<u32>>,
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    /// `single_down(log2(P - 1) / 2 - 0.5)`.
    pub p_prime: f32,
}

impl ModuliTable {
    pub fn ceil_log2_rho(&self) -> u32 {
        ceil_log2(self.rho)
    }

    /// CSV dump: one `#` header line with the scalar constants, then
    /// `ell,p,q,beta,s1,s2` rows (floats in hex).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "# N={},mode={},P={},rho={},P1={},P2={},P_inv={},P_prime={}",
            self.n,
            self.mode,
            self.p_big,
            self.rho,
            format_hex(self.p1),
            format_hex(self.p2),
            format_hex(self.p_inv),
            format_hex(self.p_prime),
        )
        .unwrap();
        out.push_str("ell,p,q,beta,s1,s2\n");
        for l in 0..self.n {
            let beta = self.beta[l].map(|b| b.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                l + 1,
                self.p[l],
                self.q[l],
                beta,
                format_hex(self.s1[l]),
                format_hex(self.s2[l])
            )
            .unwrap();
        }
        out
    }
}

pub(crate) fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// `q` with `q * a == 1 (mod p)` and `0 < q < p`, by the extended Euclidean
/// algorithm.
pub fn mod_inverse(a: &BigUint, p: u32) -> Result<u32> {
    if p < 2 {
        return Err(Error::Domain(format!("modulus {p} < 2")));
    }
    let r = (a % p).to_i64().unwrap();
    let (mut old_r, mut cur_r) = (r, p as i64);
    let (mut old_s, mut cur_s) = (1i64, 0i64);
    while cur_r != 0 {
        let quot = old_r / cur_r;
        (old_r, cur_r) = (cur_r, old_r - quot * cur_r);
        (old_s, cur_s) = (cur_s, old_s - quot * cur_s);
    }
    if old_r != 1 {
        return Err(Error::NotCoprime { a: a.to_string(), p: p as u64 });
    }
    Ok(old_s.rem_euclid(p as i64) as u32)
}

/// Keep the leading `beta` bits of `x` (truncated) and round the remainder
/// to nearest: returns `(head, double(x - head))`.
pub fn split_upper_bits(x: &BigUint, beta: i64) -> Result<(f64, f64)> {
    if !(1..=53).contains(&beta) {
        return Err(Error::BitCount(beta));
    }
    if x.is_zero() {
        return Err(Error::Domain("split of zero".into()));
    }
    let len = x.bits() as i64;
    let drop = (len - beta).max(0) as u64;
    let head = (x >> drop) << drop;
    let tail = x - &head;
    let hi = round_exreal::<f64>(&ExReal::from_int(&BigInt::from(head)), RoundDir::NearestEven)?;
    let lo = round_exreal::<f64>(&ExReal::from_int(&BigInt::from(tail)), RoundDir::NearestEven)?;
    Ok((hi, lo))
}

/// `single_down(log2(P - 1) / 2 - 1/2)` from a rigorous enclosure of the
/// logarithm, refined until the enclosure decides the rounding.
fn prime_exponent_budget(p_big: &BigUint) -> f32 {
    let pm1 = p_big - 1u32;
    let mut bits = 128;
    loop {
        let (lo, hi) = log2_enclosure(&pm1, bits);
        let half = ExReal::pow2(-1);
        let v_lo = &lo.mul_pow2(-1) - &half;
        let v_hi = &hi.mul_pow2(-1) - &half;
        let r = round_fp32(&v_lo, RoundDir::Down).expect("budget fits f32");
        if v_hi < ExReal::from_float(next_up_f32(r)) {
            return r;
        }
        bits *= 2;
    }
}

/// Build the table for the first `n` moduli.
pub fn build_table(n: usize, mode: Precision) -> Result<ModuliTable> {
    if !(MIN_MODULI..=MAX_MODULI).contains(&n) {
        return Err(Error::ModuliCount(n));
    }
    let p: Vec<u32> = MODULI[..n].to_vec();
    let p_big: BigUint = p.iter().map(|&x| BigUint::from(x)).product();
    let q = p.iter().map(|&pl| mod_inverse(&(&p_big / pl), pl)).collect::<Result<Vec<_>>>()?;
    let weights: Vec<BigUint> = p.iter().zip(&q).map(|(&pl, &ql)| (&p_big / pl) * ql).collect();
    let rho: u64 = p.iter().map(|&x| (x / 2) as u64).sum();

    let p_ex = ExReal::from_int(&BigInt::from(p_big.clone()));
    let p1 = round_exreal::<f64>(&p_ex, RoundDir::NearestEven)?;
    let p_inv = round_ratio::<f64>(false, &BigUint::one(), &p_big, RoundDir::NearestEven)?;

    let (p2, beta, s1, s2) = match mode {
        Precision::Fp64 => {
            let p2 = round_exreal::<f64>(&(&p_ex - &ExReal::from_float(p1)), RoundDir::NearestEven)?;
            let max_log = weights.iter().map(|w| w.bits() as i64 - 1).max().unwrap();
            let budget = 53 - ceil_log2(rho) as i64;
            let mut beta = Vec::with_capacity(n);
            let mut s1 = Vec::with_capacity(n);
            let mut s2 = Vec::with_capacity(n);
            for w in &weights {
                let b = budget + (w.bits() as i64 - 1) - max_log;
                let (hi, lo) = split_upper_bits(w, b)?;
                beta.push(Some(b as u32));
                s1.push(hi);
                s2.push(lo);
            }
            (p2, beta, s1, s2)
        }
        Precision::Fp32 => {
            let s1 = weights
                .iter()
                .map(|w| round_exreal::<f64>(&ExReal::from_int(&BigInt::from(w.clone())), RoundDir::NearestEven))
                .collect::<Result<Vec<_>>>()?;
            (0.0, vec![None; n], s1, vec![0.0; n])
        }
    };

    Ok(ModuliTable {
        n,
        mode,
        p_prime: prime_exponent_budget(&p_big),
        p,
        q,
        p_big,
        weights,
        rho,
        p1,
        p2,
        p_inv,
        beta,
        s1,
        s2,
    })
}

static TABLES: LazyLock<Vec<ModuliTable>> = LazyLock::new(|| {
    let mut v = Vec::with_capacity(2 * (MAX_MODULI - MIN_MODULI + 1));
    for mode in [Precision::Fp32, Precision::Fp64] {
        for n in MIN_MODULI..=MAX_MODULI {
            v.push(build_table(n, mode).expect("fixed moduli list is valid"));
        }
    }
    v
});

/// Shared immutable table for `(n, mode)`; all tables are built on first use.
pub fn table(n: usize, mode: Precision) -> Result<&'static ModuliTable> {
    if !(MIN_MODULI..=MAX_MODULI).contains(&n) {
        return Err(Error::ModuliCount(n));
    }
    let offset = match mode {
        Precision::Fp32 => 0,
        Precision::Fp64 => MAX_MODULI - MIN_MODULI + 1,
    };
    Ok(&TABLES[offset + n - MIN_MODULI])
}
