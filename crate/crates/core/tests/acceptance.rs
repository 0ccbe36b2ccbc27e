//! Acceptance gate: one line per criterion, nonzero exit if any fails.
//!
//! Set `CRTGEMM_FULL_SCALE=1` to add the 128x128x8192 sweep.

use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crtgemm::bounds::{bound_cheap, bound_tight, exponent_stats};
use crtgemm::fpkernel::{round_fp32, signed_mod, RoundDir};
use crtgemm::harness::selftest::{corpus, log2f_suite, CorpusCase, CORPUS_DIMS};
use crtgemm::harness::{gen_matrix_stream, run_experiment, to_csv, with_threads, ExperimentConfig, DEFAULT_PHI};
use crtgemm::int8engine::MAX_INNER;
use crtgemm::moduli::{MAX_MODULI, MIN_MODULI};
use crtgemm::oracle::{
    error_exact, exact_abs_gemm, exact_gemm, exact_int_gemm, floor_inequality, floor_inequality_exact, headroom_check,
    Tally, Verdict,
};
use crtgemm::{
    gemm_i8_wrap, os_ii, table, EmulationResult, ExReal, I8Matrix, Matrix, ModuliTable, Precision, WorkingFloat,
};

fn rat(x: &ExReal) -> BigRational {
    let m = BigInt::from(x.mantissa().clone());
    let m = if x.is_negative() { -m } else { m };
    let e = x.exponent();
    if e >= 0 {
        BigRational::from_integer(m << e as u64)
    } else {
        BigRational::new(m, BigInt::one() << (-e) as u64)
    }
}

fn frat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn irat(x: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(x.into())
}

fn pow2(k: i64) -> BigRational {
    if k >= 0 {
        irat(BigInt::one() << k as u64)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-k) as u64)
    }
}

struct Outcome {
    failures: Vec<String>,
}

impl Outcome {
    fn report(&mut self, id: usize, name: &str, pass: bool, detail: String, started: Instant) {
        let status = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{status}] {name}: {detail} ({:.1}s)", started.elapsed().as_secs_f64());
        if !pass {
            self.failures.push(format!("{id} {name}"));
        }
    }
}

/// Final-reduction bound for one entry, from the table's raw constants.
fn reduction_bound_rational(tb: &ModuliTable, abs_ab: &BigUint) -> BigRational {
    let rho_p = irat(BigInt::from(&tb.p_big * tb.rho));
    let n2 = irat(tb.n as u64 + 2);
    let abs = irat(BigInt::from(abs_ab.clone()));
    let one = BigRational::one();
    match tb.mode {
        Precision::Fp32 => (&one + pow2(-24)) * n2 * pow2(-53) * rho_p + pow2(-24) * abs,
        Precision::Fp64 => {
            let mut c = 0i64;
            while (1u64 << c) < tb.rho {
                c += 1;
            }
            (&one + irat(3) * pow2(-53)) * pow2(1 + c) * n2 * pow2(-106) * rho_p + irat(3) * pow2(-53) * abs
        }
    }
}

/// Nearest integer to a rational and whether it was a tie.
fn round_rational(x: &BigRational) -> (BigInt, bool) {
    let fl = x.floor();
    let frac = x - &fl;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let fl = fl.to_integer();
    if frac > half {
        (fl + 1, false)
    } else if frac < half {
        (fl, false)
    } else {
        (fl, true)
    }
}

#[derive(Default)]
struct CorpusTallies {
    instances: usize,
    soundness: Tally,
    headroom: Tally,
    first_accumulation: Tally,
    quotient: Tally,
    quotient_ties: usize,
    reduction: Tally,
}

fn ok(t: &mut Tally, cond: bool) {
    t.record(if cond { Verdict::Holds } else { Verdict::Violated });
}

fn check_corpus_instance<F: WorkingFloat>(c: &CorpusCase, acc: &mut CorpusTallies) {
    let (m, n, k) = CORPUS_DIMS;
    let a = gen_matrix_stream::<F>(m, k, c.phi, c.seed, 0);
    let b = gen_matrix_stream::<F>(k, n, c.phi, c.seed, 1);
    let r: EmulationResult<F> = os_ii(&a, &b, c.n, true).expect("emulation");
    let tb = r.table;
    let inter = r.crt.as_ref().expect("intermediates");
    acc.instances += 1;

    // error <= tight <= cheap
    let exact = exact_gemm(&a, &b).expect("exact product");
    let err = error_exact(&r.c, &exact).expect("error");
    let stats = exponent_stats(&a, &b, r.scaling.c_bar(), tb).expect("stats");
    let abs = exact_abs_gemm(&r.scaling.a_prime, &r.scaling.b_prime).expect("abs product");
    let tight = bound_tight(&stats, &abs, &a, &b, tb).expect("tight");
    let cheap = bound_cheap(&stats, &a, &b, tb).expect("cheap");
    for ((e, t), ch) in err.iter().zip(tight.bound.iter()).zip(cheap.bound.iter()) {
        ok(&mut acc.soundness, e <= t && t <= ch);
    }

    acc.headroom = acc.headroom.merge(headroom_check(&abs, tb));

    let w: &[I8Matrix] = &inter.w;
    let ab = exact_int_gemm(&r.scaling.a_prime, &r.scaling.b_prime).expect("A'B'");
    let q_over_p: Vec<BigRational> =
        tb.p.iter().zip(&tb.q).map(|(&p, &q)| BigRational::new(BigInt::from(q), BigInt::from(p))).collect();
    let s1: Vec<BigRational> = tb.s1.iter().map(|&s| frat(s)).collect();
    for idx in 0..m * n {
        if tb.mode == Precision::Fp64 {
            let sum: BigRational = w.iter().zip(&s1).map(|(wl, s)| s * irat(wl.as_slice()[idx] as i64)).sum();
            ok(&mut acc.first_accumulation, frat(inter.c1.as_slice()[idx]) == sum);
        }
        let y: BigRational = w.iter().zip(&q_over_p).map(|(wl, s)| s * irat(wl.as_slice()[idx] as i64)).sum();
        let (q_exact, tie) = round_rational(&y);
        acc.quotient_ties += tie as usize;
        let q = inter.q.as_slice()[idx];
        let pre = tb.p_inv * inter.c1.as_slice()[idx];
        ok(&mut acc.quotient, !tie && frat(q) == irat(q_exact) && (pre - q).abs() < 0.5);

        let abv = &ab.as_slice()[idx];
        let d = (irat(abv.clone()) - frat(r.cpp.as_slice()[idx])).abs();
        ok(&mut acc.reduction, d <= reduction_bound_rational(tb, abv.magnitude()));
    }
}

fn corpus_criteria(out: &mut Outcome) {
    let started = Instant::now();
    let cases = corpus(4, 7001);
    let mut acc = CorpusTallies::default();
    for c in &cases {
        match c.mode {
            Precision::Fp32 => check_corpus_instance::<f32>(c, &mut acc),
            Precision::Fp64 => check_corpus_instance::<f64>(c, &mut acc),
        }
    }
    let n = acc.instances;
    let big_enough = n >= 200;
    out.report(
        1,
        "error <= tight bound <= cheap bound",
        big_enough && acc.soundness.clean(),
        format!("{n} instances, {} entries, {} violations", acc.soundness.checked, acc.soundness.violated),
        started,
    );
    out.report(
        2,
        "|A'||B'| < (P-1) 2^(-1-2^-20)",
        big_enough && acc.headroom.clean(),
        format!(
            "{} entries, {} violations, {} undecided",
            acc.headroom.checked, acc.headroom.violated, acc.headroom.undecided
        ),
        started,
    );
    out.report(
        4,
        "fp64 first accumulation is exact",
        acc.first_accumulation.checked > 0 && acc.first_accumulation.clean(),
        format!("{} fp64 entries, {} mismatches", acc.first_accumulation.checked, acc.first_accumulation.violated),
        started,
    );
    out.report(
        5,
        "quotient equals the exact rounded quotient, no ties",
        acc.quotient.clean() && acc.quotient_ties == 0,
        format!("{} entries, {} mismatches, {} ties", acc.quotient.checked, acc.quotient.violated, acc.quotient_ties),
        started,
    );
    out.report(
        6,
        "|A'B' - C''| <= R_b, both modes",
        acc.reduction.clean(),
        format!("{} entries, {} violations", acc.reduction.checked, acc.reduction.violated),
        started,
    );
}

fn floor_sweep(out: &mut Outcome) {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(31337);
    let extra: Vec<u64> = (0..1_000_000).map(|_| rng.random_range(1u64..=1 << 29)).collect();
    let mut t = Tally::default();
    let mut cross = Tally::default();
    for n in MIN_MODULI..=MAX_MODULI {
        let pp = table(n, Precision::Fp64).unwrap().p_prime;
        assert_eq!(pp, table(n, Precision::Fp32).unwrap().p_prime);
        t = t.merge(crtgemm::oracle::floor_inequality_sweep(pp, 1 << 20, &extra));
        // the fast path must agree with the interval evaluation
        for &c in extra.iter().take(200) {
            ok(&mut cross, floor_inequality(pp, c) == floor_inequality_exact(pp, c));
        }
    }
    out.report(
        3,
        "floor inequality for every N, c <= 2^20 and 10^6 samples <= 2^29",
        t.clean() && cross.clean() && t.checked == 48 * ((1 << 20) + 1_000_000),
        format!(
            "{} checks, {} violations, {} undecided, fast/exact disagreements {}",
            t.checked, t.violated, t.undecided, cross.violated
        ),
        started,
    );
}

fn wrap_reference(a: &I8Matrix, b: &I8Matrix) -> Matrix<i32> {
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        let mut s = BigInt::zero();
        for h in 0..a.cols() {
            s += BigInt::from(a[(i, h)] as i32 * b[(h, j)] as i32);
        }
        let m = BigInt::one() << 32u32;
        let r = ((s % &m) + &m) % &m;
        r.to_u32().unwrap() as i32
    })
}

fn int8_engine(out: &mut Outcome) {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut t = Tally::default();
    for i in 0..1000 {
        let (m, k, n) = if i % 100 == 0 {
            // long inner products, up to the largest supported k
            (2, rng.random_range(1usize << 16..=MAX_INNER), 2)
        } else {
            (rng.random_range(1..10), rng.random_range(1..300), rng.random_range(1..10))
        };
        let extreme = i % 7 == 0;
        let gen =
            |rng: &mut ChaCha8Rng| if extreme { [-128i8, 127][rng.random_range(0..2)] } else { rng.random::<i8>() };
        let a = Matrix::from_fn(m, k, |_, _| gen(&mut rng));
        let b = Matrix::from_fn(k, n, |_, _| gen(&mut rng));
        ok(&mut t, gemm_i8_wrap(&a, &b).unwrap() == wrap_reference(&a, &b));
    }
    let k = MAX_INNER;
    let neg = Matrix::filled(1, k, -128i8);
    let hit = gemm_i8_wrap(&neg, &Matrix::filled(k, 1, -128i8)).unwrap()[(0, 0)];
    // exact sum 2^31 lands on -2^31
    ok(&mut t, hit == i32::MIN);
    let mut under = Matrix::filled(k, 1, -128i8);
    under[(0, 0)] = -127;
    ok(&mut t, gemm_i8_wrap(&neg, &under).unwrap()[(0, 0)] == i32::MAX - 127);
    // the most negative sum reachable with k <= 2^17 is -2^31 + 2^24
    ok(&mut t, gemm_i8_wrap(&neg, &Matrix::filled(k, 1, 127i8)).unwrap()[(0, 0)] == i32::MIN + (1 << 24));
    out.report(
        7,
        "int8 engine matches big-integer GEMM mod 2^32",
        t.clean() && t.checked == 1003,
        format!("{} instances incl. 2^31 wrap cases, {} mismatches", t.checked, t.violated),
        started,
    );
}

fn fpkernel(out: &mut Outcome) {
    let started = Instant::now();
    let mut bad_mod = 0usize;
    for p in 2u64..=256 {
        let h = (p / 2) as i64;
        for x in -1_000_000i64..=1_000_000 {
            let r = signed_mod(x, p);
            if r < -h || r > h || (x - r).rem_euclid(p as i64) != 0 {
                bad_mod += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut bracket = Tally::default();
    for _ in 0..1_000_000 {
        let bits = rng.random_range(1..=60u32);
        let m = (rng.random::<u64>() >> (64 - bits)).max(1);
        let e = rng.random_range(-170i64..=127 - bits as i64);
        let x = ExReal::new(rng.random::<bool>(), BigUint::from(m), e);
        let d = round_fp32(&x, RoundDir::Down).unwrap();
        let u = round_fp32(&x, RoundDir::Up).unwrap();
        let (dx, ux) = (rat(&ExReal::from_float(d)), rat(&ExReal::from_float(u)));
        let xr = rat(&x);
        let in_f32 = (d as f64 == u as f64) == (ExReal::from_float(d) == x);
        ok(&mut bracket, dx <= xr && xr <= ux && in_f32);
    }
    let log2 = log2f_suite(1 << 20, 1_000_000, 777);
    out.report(
        8,
        "signed_mod range, directed-rounding brackets, log2f bound",
        bad_mod == 0 && bracket.clean() && log2.clean(),
        format!(
            "signed_mod: {} bad of {}; brackets: {} bad of {}; log2f: {} bad, {} undecided of {}",
            bad_mod,
            255 * 2_000_001,
            bracket.violated,
            bracket.checked,
            log2.violated,
            log2.undecided,
            log2.checked
        ),
        started,
    );
}

fn sweep(out: &mut Outcome, id: usize, name: &str, m: usize, k: usize) {
    let started = Instant::now();
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR"));
    let mut all_consistent = true;
    let mut violations = 0;
    let mut saturates = false;
    let mut points = 0;
    for mode in [Precision::Fp32, Precision::Fp64] {
        for (pi, &phi) in DEFAULT_PHI.iter().enumerate() {
            let cfg = ExperimentConfig {
                m,
                n: m,
                k,
                phi,
                mode,
                seed: 11,
                out: Some(dir.join(format!("sweep_{m}x{k}_{mode}_{pi}.csv"))),
                ..Default::default()
            };
            let res = run_experiment(&cfg).expect("experiment");
            points += res.rows.len();
            violations += res.violations;
            all_consistent &= res.rows.iter().all(|r| r.consistent());
            if mode == Precision::Fp64 && pi == 0 {
                saturates = res.rows.iter().any(|r| r.err_max <= 100.0 * r.err_native_max);
            }
        }
    }
    out.report(
        id,
        name,
        all_consistent && violations == 0 && saturates && points == 6 * 48,
        format!(
            "{points} points, ordering holds: {all_consistent}, entrywise violations {violations}, fp64 phi={} reaches 100x native: {saturates}",
            DEFAULT_PHI[0]
        ),
        started,
    );
}

fn result_bits<F: WorkingFloat>(r: &EmulationResult<F>) -> Vec<u64> {
    r.c.iter().map(|x| x.to_bits_u64()).chain(r.cpp.iter().map(|x| x.to_bits())).collect()
}

fn determinism(out: &mut Outcome) {
    let started = Instant::now();
    let mut same = true;
    for mode in [Precision::Fp32, Precision::Fp64] {
        let cfg = ExperimentConfig {
            m: 24,
            n: 20,
            k: 256,
            phi: 2.0,
            mode,
            n_list: vec![2, 9, 25, 49],
            seed: 5,
            trials: 2,
            ..Default::default()
        };
        let runs: Vec<String> = [1, 1, 8, 8]
            .iter()
            .map(|&t| to_csv(&with_threads(t, || run_experiment(&cfg)).unwrap().unwrap().rows))
            .collect();
        same &= runs.windows(2).all(|w| w[0] == w[1]);
    }
    let a = gen_matrix_stream::<f64>(33, 300, 4.0, 17, 0);
    let b = gen_matrix_stream::<f64>(300, 29, 4.0, 17, 1);
    let bits: Vec<Vec<u64>> =
        [1, 8].iter().map(|&t| with_threads(t, || result_bits(&os_ii(&a, &b, 30, false).unwrap())).unwrap()).collect();
    same &= bits[0] == bits[1];
    let a32 = gen_matrix_stream::<f32>(33, 300, 4.0, 17, 0);
    let b32 = gen_matrix_stream::<f32>(300, 29, 4.0, 17, 1);
    let bits: Vec<Vec<u64>> = [1, 8]
        .iter()
        .map(|&t| with_threads(t, || result_bits(&os_ii(&a32, &b32, 30, false).unwrap())).unwrap())
        .collect();
    same &= bits[0] == bits[1];
    out.report(10, "byte-identical output across runs and 1 vs 8 threads", same, format!("identical: {same}"), started);
}

fn main() {
    let mut out = Outcome { failures: Vec::new() };
    corpus_criteria(&mut out);
    floor_sweep(&mut out);
    int8_engine(&mut out);
    fpkernel(&mut out);
    sweep(&mut out, 9, "64x64x1024 sweep: err_max <= est_max <= est2_max, fp64 saturation", 64, 1024);
    if std::env::var("CRTGEMM_FULL_SCALE").is_ok_and(|v| v == "1") {
        sweep(&mut out, 9, "128x128x8192 sweep (full scale)", 128, 8192);
    }
    determinism(&mut out);
    if out.failures.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: {} failed: {}", out.failures.len(), out.failures.join(", "));
        std::process::exit(1);
    }
}
