//! Executable versions of every correctness property, grouped into suites.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::{
    accumulation_bound_fp32, accumulation_bound_fp64, bound_cheap, bound_tight, exponent_stats, reduction_bound,
};
use crate::emulator::os_ii;
use crate::error::{Error, Result};
use crate::exreal::ExReal;
use crate::fpkernel::{
    fma_fp32, fma_fp64, log2_enclosure, log2f, round_fp32, round_fp64, signed_mod, signed_mod_big, ufp, RoundDir,
};
use crate::harness::{gen_matrix_stream, with_threads};
use crate::int8engine::{gemm_i8_wrap, I8Matrix, MAX_INNER};
use crate::matrix::Matrix;
use crate::moduli::{table, ModuliTable, MAX_MODULI, MIN_MODULI};
use crate::oracle::{
    error_exact, exact_abs_gemm, exact_crt_quantities, exact_gemm, exact_int_gemm, exact_weighted_sum,
    exponent_floor_check, floor_inequality_sweep, headroom_check, Tally, Verdict,
};
use crate::scalar::{Precision, WorkingFloat};
use crate::scaling::{clearance, scale_with};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteResult {
    pub name: String,
    pub tally: Tally,
    /// Fault-injection suites pass by failing.
    pub expect_failure: bool,
}

impl SuiteResult {
    fn new(name: impl Into<String>, tally: Tally) -> Self {
        SuiteResult { name: name.into(), tally, expect_failure: false }
    }

    pub fn passed(&self) -> bool {
        if self.expect_failure {
            self.tally.violated > 0
        } else {
            self.tally.checked > 0 && self.tally.clean()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SelftestReport {
    pub suites: Vec<SuiteResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in &self.suites {
            let status = if r.passed() { "pass" } else { "FAIL" };
            let note = if r.expect_failure { " (fault injected, failures expected)" } else { "" };
            s.push_str(&format!(
                "{status}  {:<40} checked {:>10}  violated {:>6}  undecided {:>4}{note}\n",
                r.name, r.tally.checked, r.tally.violated, r.tally.undecided
            ));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestOptions {
    pub seed: u64,
    /// `signed_mod` is checked for every `x` in `[-range, range]`.
    pub signed_mod_range: i64,
    /// Random samples for rounding, fma, ufp and log2f checks.
    pub samples: usize,
    pub log2_exhaustive_to: u64,
    pub sweep_exhaustive_to: u64,
    pub sweep_samples: usize,
    pub int8_instances: usize,
    /// Random integers per moduli count for the reconstruction identity.
    pub crt_samples: usize,
    /// Seeds per (mode, phi, N) in the invariant corpus.
    pub corpus_seeds: usize,
    pub fault_injection: bool,
}

impl SelftestOptions {
    pub fn full() -> Self {
        SelftestOptions {
            seed: 2024,
            signed_mod_range: 1_000_000,
            samples: 1_000_000,
            log2_exhaustive_to: 1 << 20,
            sweep_exhaustive_to: 1 << 20,
            sweep_samples: 1_000_000,
            int8_instances: 1000,
            crt_samples: 10_000,
            corpus_seeds: 4,
            fault_injection: true,
        }
    }

    pub fn quick() -> Self {
        SelftestOptions {
            signed_mod_range: 2000,
            samples: 5000,
            log2_exhaustive_to: 1 << 12,
            sweep_exhaustive_to: 1 << 10,
            sweep_samples: 2000,
            int8_instances: 50,
            crt_samples: 50,
            corpus_seeds: 1,
            ..Self::full()
        }
    }
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Holds
    } else {
        Verdict::Violated
    }
}

fn tally_of(iter: impl Iterator<Item = bool>) -> Tally {
    let mut t = Tally::default();
    iter.for_each(|ok| t.record(verdict(ok)));
    t
}

/// Congruence and range of `signed_mod` for every `x` in `[-range, range]`
/// and every `p` in `2..=256`.
pub fn signed_mod_suite(range: i64) -> Tally {
    (2u64..=256)
        .into_par_iter()
        .map(|p| {
            let h = (p / 2) as i64;
            let bad = (-range..=range)
                .filter(|&x| {
                    let r = signed_mod(x, p);
                    r < -h || r > h || (x - r) % p as i64 != 0
                })
                .count();
            Tally { checked: (2 * range + 1) as usize, violated: bad, undecided: 0 }
        })
        .reduce(Tally::default, Tally::merge)
}

fn random_exreal(rng: &mut ChaCha8Rng) -> ExReal {
    let bits = rng.random_range(1..=64u32);
    let m: u64 = rng.random::<u64>() >> (64 - bits);
    let e = rng.random_range(-180i64..=127 - bits as i64);
    ExReal::new(rng.random::<bool>(), BigUint::from(m.max(1)), e)
}

/// `down <= x <= up`, the two adjacent or equal, equal iff `x` is an `f32`,
/// and nearest one of them.
pub fn directed_rounding_ok(x: &ExReal) -> bool {
    let (Ok(d), Ok(u), Ok(n)) =
        (round_fp32(x, RoundDir::Down), round_fp32(x, RoundDir::Up), round_fp32(x, RoundDir::NearestEven))
    else {
        return false;
    };
    let (ed, eu) = (ExReal::from_float(d), ExReal::from_float(u));
    let representable = ExReal::from_float(n) == *x;
    let adjacent = d == u || crate::fpkernel::next_up_f32(d) == u || (d == 0.0 && u == f32::from_bits(1));
    ed <= *x && *x <= eu && (representable == (d == u)) && adjacent && (n == d || n == u)
}

pub fn directed_rounding_suite(samples: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tally_of((0..samples).map(|_| directed_rounding_ok(&random_exreal(&mut rng))))
}

/// The fma results against one rounding of the exact `a b + c`.
pub fn fma_suite(samples: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs = [RoundDir::NearestEven, RoundDir::Down, RoundDir::Up];
    tally_of((0..samples).map(|i| {
        let dir = dirs[i % 3];
        let s = |rng: &mut ChaCha8Rng| (rng.random::<f64>() - 0.5) * 2f64.powi(rng.random_range(-30..30));
        let (a, b, c) = (s(&mut rng), s(&mut rng), s(&mut rng));
        let (a32, b32, c32) = (a as f32, b as f32, c as f32);
        let exact64 = &(&ExReal::from_float(a) * &ExReal::from_float(b)) + &ExReal::from_float(c);
        let exact32 = &(&ExReal::from_float(a32) * &ExReal::from_float(b32)) + &ExReal::from_float(c32);
        fma_fp64(a, b, c, dir).ok() == round_fp64(&exact64, dir).ok()
            && fma_fp32(a32, b32, c32, dir).ok() == round_fp32(&exact32, dir).ok()
    }))
}

pub fn ufp_suite(samples: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tally_of((0..samples).map(|_| {
        // any finite bit pattern, subnormals included
        let x = f64::from_bits(rng.random::<u64>() & !(1u64 << 62) | (rng.random::<bool>() as u64) << 62);
        if !x.is_finite() || x == 0.0 {
            return x != 0.0 || ufp(x) == 0.0;
        }
        let u = ufp(x);
        let power_of_two = u > 0.0 && (u.to_bits() & ((1u64 << 52) - 1) == 0 || u.to_bits().count_ones() == 1);
        power_of_two && u <= x.abs() && x.abs() < 2.0 * u
    }))
}

/// `|log2f(c) - log2 c| <= 4 u32 log2 c` for an integer `c >= 1`.
pub fn log2f_bound(c: u64) -> Verdict {
    let x = c as f32;
    if x as u64 != c {
        // log2f only ever sees values held exactly in f32
        return Verdict::Undecided;
    }
    let Ok(r) = log2f(x) else { return Verdict::Violated };
    let l = (c as f64).log2();
    let slack = 4.0 * crate::fpkernel::U32 * l - (r as f64 - l).abs();
    if c.is_power_of_two() {
        return verdict(r as f64 == l);
    }
    if slack > 1e-12 {
        return Verdict::Holds;
    }
    if slack < -1e-12 {
        return Verdict::Violated;
    }
    let (lo, hi) = log2_enclosure(&BigUint::from(c), 128);
    let rr = ExReal::from_float(r);
    let four_u = ExReal::pow2(-22);
    // |r - l| <= 4u l for every l in [lo, hi], checked at the worst endpoint
    let worst_lo = (&rr - &lo).abs() <= &four_u * &lo;
    let worst_hi = (&rr - &hi).abs() <= &four_u * &lo;
    if worst_lo && worst_hi {
        Verdict::Holds
    } else {
        Verdict::Undecided
    }
}

pub fn log2f_suite(exhaustive_to: u64, samples: usize, seed: u64) -> Tally {
    let mut t = (1..=exhaustive_to)
        .into_par_iter()
        .fold(Tally::default, |mut t, c| {
            t.record(log2f_bound(c));
            t
        })
        .reduce(Tally::default, Tally::merge);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        // integers up to 2^29 that an f32 holds exactly
        let c = rng.random_range(1u64..=1 << 29);
        let c = c >> (64 - c.leading_zeros()).saturating_sub(24) << (64 - c.leading_zeros()).saturating_sub(24);
        t.record(log2f_bound(c));
    }
    t
}

/// Sum of `a b` mod `2^32`, as a signed 32-bit value.
fn wrap_reference(a: &I8Matrix, b: &I8Matrix) -> Matrix<i32> {
    let m32 = BigInt::from(1u64 << 32);
    let half = BigInt::from(1u64 << 31);
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        let mut s = BigInt::zero();
        for h in 0..a.cols() {
            s += a[(i, h)] as i64 * b[(h, j)] as i64;
        }
        let mut r = ((s % &m32) + &m32) % &m32;
        if r >= half {
            r -= &m32;
        }
        r.to_i32().expect("in range")
    })
}

/// Random products plus constructed cases at the edge of the 32-bit range.
pub fn int8_suite(instances: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    for _ in 0..instances {
        let (m, k, n) = (rng.random_range(1..8), rng.random_range(1..200), rng.random_range(1..8));
        let a = Matrix::from_fn(m, k, |_, _| rng.random::<i8>());
        let b = Matrix::from_fn(k, n, |_, _| rng.random::<i8>());
        t.record(verdict(gemm_i8_wrap(&a, &b).ok() == Some(wrap_reference(&a, &b))));
    }
    let k = MAX_INNER;
    let a = Matrix::filled(1, k, -128i8);
    // exactly 2^31, which wraps to -2^31
    let b = Matrix::filled(k, 1, -128i8);
    t.record(verdict(gemm_i8_wrap(&a, &b).ok().map(|c| c[(0, 0)]) == Some(i32::MIN)));
    // 2^31 - 128, the largest reachable value below the wrap
    let mut b2 = b.clone();
    b2[(0, 0)] = -127;
    t.record(verdict(gemm_i8_wrap(&a, &b2).ok().map(|c| c[(0, 0)]) == Some(i32::MAX - 127)));
    // the most negative reachable value, -(2^31 - 2^24), does not wrap
    let pos = Matrix::filled(k, 1, 127i8);
    t.record(verdict(gemm_i8_wrap(&a, &pos).ok().map(|c| c[(0, 0)]) == Some(i32::MIN + (1 << 24))));
    t
}

/// Random `|x| < P/2`.
fn random_below_half(rng: &mut ChaCha8Rng, p: &BigUint) -> BigInt {
    let bytes: Vec<u8> = (0..p.bits() / 8 + 2).map(|_| rng.random()).collect();
    let v = BigUint::from_bytes_le(&bytes) % p;
    BigInt::from(v) - BigInt::from(p >> 1u32)
}

/// Reconstruct `x` from its residues using `q` and `P/p_l`.
pub fn crt_identity(table: &ModuliTable, x: &BigInt) -> bool {
    let mut acc = BigInt::zero();
    for (&p, &q) in table.p.iter().zip(&table.q) {
        let r = signed_mod_big(x, &BigUint::from(p));
        let w = BigInt::from_biguint(Sign::Plus, &table.p_big / p) * q;
        acc += w * r;
    }
    signed_mod_big(&acc, &table.p_big) == *x
}

pub fn crt_suite(samples: usize, seed: u64, corrupt: bool) -> Tally {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for n in MIN_MODULI..=MAX_MODULI {
        let mut tb = table(n, Precision::Fp64).expect("valid count").clone();
        if corrupt {
            tb.q[0] = (tb.q[0] + 1) % tb.p[0];
        }
        for _ in 0..samples {
            let x = random_below_half(&mut rng, &tb.p_big);
            t.record(verdict(crt_identity(&tb, &x)));
        }
    }
    t
}

/// `P'` for every moduli count against the floor inequality.
pub fn floor_sweep_suite(exhaustive_to: u64, samples: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extra: Vec<u64> = (0..samples).map(|_| rng.random_range(1u64..=1 << 29)).collect();
    (MIN_MODULI..=MAX_MODULI)
        .map(|n| {
            let pp = table(n, Precision::Fp64).expect("valid count").p_prime;
            debug_assert_eq!(pp, table(n, Precision::Fp32).expect("valid count").p_prime);
            floor_inequality_sweep(pp, exhaustive_to, &extra)
        })
        .fold(Tally::default(), Tally::merge)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InstanceReport {
    /// `|AB - C| <= tight bound`.
    pub error_bound: Tally,
    /// `tight <= cheap`.
    pub dominance: Tally,
    /// `|A'||B'| < (P-1) 2^(-1-2^-20)`.
    pub headroom: Tally,
    /// Lower bounds on the scaling exponents, rows and columns.
    pub exponent_floor: Tally,
    /// fp64: `C1` is exactly `sum s1_l W_l`; fp32: `C1` is within
    /// `(N+1) u64 rho P` of `sum w_l W_l`.
    pub accumulation: Tally,
    /// fp64: `C1 + C2` within the combined accumulation bound.
    pub accumulation_sum: Tally,
    /// `Q` equals the exact nearest integer.
    pub quotient: Tally,
    /// `P_inv C1` is strictly closer than 1/2 to `Q` and the exact quotient
    /// has no tie.
    pub quotient_margin: Tally,
    /// `|Q| <= rho + 1/2`.
    pub quotient_range: Tally,
    /// `|A'B' - C''| <= R_b`.
    pub final_reduction: Tally,
    /// `C_exact - P Q_exact == A'B'`.
    pub reconstruction: Tally,
}

impl InstanceReport {
    pub fn entries(&self) -> [(&'static str, Tally); 11] {
        [
            ("error within tight bound", self.error_bound),
            ("tight bound within cheap bound", self.dominance),
            ("scaled product headroom", self.headroom),
            ("scaling exponent lower bounds", self.exponent_floor),
            ("first accumulation", self.accumulation),
            ("two-term accumulation", self.accumulation_sum),
            ("quotient exact", self.quotient),
            ("quotient margin", self.quotient_margin),
            ("quotient range", self.quotient_range),
            ("final reduction within R_b", self.final_reduction),
            ("exact reconstruction", self.reconstruction),
        ]
    }

    pub fn merge(self, o: InstanceReport) -> InstanceReport {
        InstanceReport {
            error_bound: self.error_bound.merge(o.error_bound),
            dominance: self.dominance.merge(o.dominance),
            headroom: self.headroom.merge(o.headroom),
            exponent_floor: self.exponent_floor.merge(o.exponent_floor),
            accumulation: self.accumulation.merge(o.accumulation),
            accumulation_sum: self.accumulation_sum.merge(o.accumulation_sum),
            quotient: self.quotient.merge(o.quotient),
            quotient_margin: self.quotient_margin.merge(o.quotient_margin),
            quotient_range: self.quotient_range.merge(o.quotient_range),
            final_reduction: self.final_reduction.merge(o.final_reduction),
            reconstruction: self.reconstruction.merge(o.reconstruction),
        }
    }
}

/// Run the emulation of `A B` with `n` moduli and check every property
/// against the exact oracle.
pub fn check_instance<F: WorkingFloat>(a: &Matrix<F>, b: &Matrix<F>, n: usize) -> Result<InstanceReport> {
    let r = os_ii(a, b, n, true)?;
    let tb = r.table;
    let inter = r.crt.as_ref().expect("intermediates requested");
    let (ap, bp) = (&r.scaling.a_prime, &r.scaling.b_prime);
    let mut rep = InstanceReport::default();

    let exact = exact_gemm(a, b)?;
    let err = error_exact(&r.c, &exact)?;
    let stats = exponent_stats(a, b, r.scaling.c_bar(), tb)?;
    let abs = exact_abs_gemm(ap, bp)?;
    let tight = bound_tight(&stats, &abs, a, b, tb)?;
    let cheap = bound_cheap(&stats, a, b, tb)?;
    for ((e, t), c) in err.iter().zip(tight.bound.iter()).zip(cheap.bound.iter()) {
        rep.error_bound.record(verdict(e <= t));
        rep.dominance.record(verdict(t <= c));
    }

    rep.headroom = headroom_check(&abs, tb);
    rep.exponent_floor = exponent_floor_check(&r.scaling.mu, &stats.alpha, &stats.c_row_max, tb)
        .merge(exponent_floor_check(&r.scaling.nu, &stats.beta, &stats.c_col_max, tb));

    let ex = exact_crt_quantities(&inter.w, tb)?;
    let ab = exact_int_gemm(ap, bp)?;
    let c_exact = ex.c_exact.map(ExReal::from_int);
    match tb.mode {
        Precision::Fp64 => {
            let s1 = exact_weighted_sum(&inter.w, &tb.s1)?;
            let lim = accumulation_bound_fp64(tb);
            for idx in 0..s1.as_slice().len() {
                let c1 = ExReal::from_float(inter.c1.as_slice()[idx]);
                let c2 = ExReal::from_float(inter.c2.as_slice()[idx]);
                rep.accumulation.record(verdict(c1 == s1.as_slice()[idx]));
                let d = (&(&c1 + &c2) - &c_exact.as_slice()[idx]).abs();
                rep.accumulation_sum.record(verdict(d <= lim));
            }
        }
        Precision::Fp32 => {
            let lim = accumulation_bound_fp32(tb);
            for (&c1, ce) in inter.c1.iter().zip(c_exact.iter()) {
                rep.accumulation.record(verdict((&ExReal::from_float(c1) - ce).abs() <= lim));
            }
        }
    }

    let rho_half = ExReal::from_i64(2 * tb.rho as i64 + 1).mul_pow2(-1);
    for idx in 0..ab.as_slice().len() {
        let q = inter.q.as_slice()[idx];
        let qe = &ex.q_exact.as_slice()[idx];
        rep.quotient.record(verdict(ExReal::from_float(q) == ExReal::from_int(qe)));
        let y = tb.p_inv * inter.c1.as_slice()[idx];
        rep.quotient_margin.record(verdict((y - q).abs() < 0.5 && ex.ties == 0));
        rep.quotient_range.record(verdict(ExReal::from_float(q).abs() <= rho_half));
        let abv = &ab.as_slice()[idx];
        let cpp = ExReal::from_float(r.cpp.as_slice()[idx]);
        let lim = reduction_bound(tb, abv.magnitude());
        rep.final_reduction.record(verdict((&ExReal::from_int(abv) - &cpp).abs() <= lim));
        rep.reconstruction.record(verdict(ex.reduced.as_slice()[idx] == *abv));
    }
    Ok(rep)
}

/// One case of the invariant corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusCase {
    pub mode: Precision,
    pub phi: f64,
    pub n: usize,
    pub seed: u64,
}

pub const CORPUS_PHI: [f64; 4] = [0.0, 0.5, 2.0, 8.0];
pub const CORPUS_N: [usize; 7] = [2, 5, 10, 15, 20, 30, 49];
pub const CORPUS_DIMS: (usize, usize, usize) = (16, 16, 64);

pub fn corpus(seeds: usize, base_seed: u64) -> Vec<CorpusCase> {
    let mut v = Vec::new();
    for mode in [Precision::Fp32, Precision::Fp64] {
        for phi in CORPUS_PHI {
            for n in CORPUS_N {
                for s in 0..seeds as u64 {
                    v.push(CorpusCase { mode, phi, n, seed: base_seed + s });
                }
            }
        }
    }
    v
}

pub fn check_case(case: &CorpusCase) -> Result<InstanceReport> {
    let (m, n, k) = CORPUS_DIMS;
    fn run<F: WorkingFloat>(c: &CorpusCase, m: usize, n: usize, k: usize) -> Result<InstanceReport> {
        let a = gen_matrix_stream::<F>(m, k, c.phi, c.seed, 0);
        let b = gen_matrix_stream::<F>(k, n, c.phi, c.seed, 1);
        check_instance(&a, &b, c.n)
    }
    match case.mode {
        Precision::Fp32 => run::<f32>(case, m, n, k),
        Precision::Fp64 => run::<f64>(case, m, n, k),
    }
}

pub fn corpus_report(cases: &[CorpusCase]) -> Result<InstanceReport> {
    cases.par_iter().map(check_case).try_reduce(InstanceReport::default, |a, b| Ok(a.merge(b)))
}

/// A table of the wrong precision must be refused.
pub fn mode_mismatch_rejected() -> bool {
    let a = Matrix::filled(2, 2, 1.0f32);
    let Ok(cl) = clearance(&a, &a) else { return false };
    let Ok(tb) = table(4, Precision::Fp64) else { return false };
    matches!(scale_with(&a, &a, cl, tb), Err(Error::ModeMismatch { .. }))
}

/// The corpus-level CSV from a small sweep must not depend on the number of
/// worker threads.
pub fn thread_determinism(seed: u64) -> Result<bool> {
    let cfg = crate::harness::ExperimentConfig {
        m: 8,
        n: 8,
        k: 64,
        phi: 2.0,
        n_list: vec![3, 11, 40],
        seed,
        ..Default::default()
    };
    let one = with_threads(1, || crate::harness::run_experiment(&cfg))??;
    let many = with_threads(8, || crate::harness::run_experiment(&cfg))??;
    Ok(crate::harness::to_csv(&one.rows) == crate::harness::to_csv(&many.rows))
}

pub fn selftest(opts: &SelftestOptions) -> Result<SelftestReport> {
    let s = opts.seed;
    let mut suites = vec![
        SuiteResult::new("signed_mod congruence and range", signed_mod_suite(opts.signed_mod_range)),
        SuiteResult::new("directed rounding brackets", directed_rounding_suite(opts.samples, s)),
        SuiteResult::new("fused multiply-add single rounding", fma_suite(opts.samples, s + 1)),
        SuiteResult::new("unit in the first place", ufp_suite(opts.samples, s + 2)),
        SuiteResult::new("log2f relative bound", log2f_suite(opts.log2_exhaustive_to, opts.samples, s + 3)),
        SuiteResult::new("int8 engine wraparound", int8_suite(opts.int8_instances, s + 4)),
        SuiteResult::new("reconstruction identity", crt_suite(opts.crt_samples, s + 5, false)),
        SuiteResult::new(
            "floor inequality sweep",
            floor_sweep_suite(opts.sweep_exhaustive_to, opts.sweep_samples, s + 6),
        ),
        SuiteResult::new("mode mismatch rejected", tally_of(std::iter::once(mode_mismatch_rejected()))),
        SuiteResult::new("thread-count determinism", tally_of(std::iter::once(thread_determinism(s)?))),
    ];
    let rep = corpus_report(&corpus(opts.corpus_seeds, s))?;
    for (name, t) in rep.entries() {
        if t.checked > 0 {
            suites.push(SuiteResult::new(name, t));
        }
    }
    if opts.fault_injection {
        suites.push(SuiteResult {
            name: "reconstruction with q_1 + 1".into(),
            tally: crt_suite(opts.crt_samples.min(200), s + 7, true),
            expect_failure: true,
        });
    }
    Ok(SelftestReport { suites })
}
