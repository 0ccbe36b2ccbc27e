//! Random test matrices, the error-versus-bound sweep and its CSV output.

pub mod matrix_io;
pub mod selftest;

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bounds::{bound_cheap, bound_tight, exponent_stats};
use crate::emulator::os_ii_with;
use crate::error::{Error, Result};
use crate::exreal::ExReal;
use crate::hexfloat::format_hex;
use crate::int8engine::MAX_INNER;
use crate::matrix::{check_product, Matrix};
use crate::moduli::{MAX_MODULI, MIN_MODULI};
use crate::oracle::{error_exact, error_matrix, exact_abs_gemm, exact_gemm};
use crate::scalar::{Precision, WorkingFloat};
use crate::scaling::clearance;

/// Values the sweep uses for `phi` when none are given.
pub const DEFAULT_PHI: [f64; 3] = [0.5, 2.0, 8.0];

/// Which generator stream a matrix of a trial is drawn from.
fn stream(trial: u64, which: u64) -> u64 {
    2 * trial + which
}

/// `(rand - 0.5) * exp(randn * phi)` entrywise, rounded to `F`.
///
/// The generator is ChaCha8 seeded with `seed_from_u64(seed)` on the given
/// stream. `rand` is uniform on `(0, 1]` (as `1 - U[0, 1)`), `randn` is
/// standard normal, and both are drawn per entry in row-major order. Entries
/// that round to zero or overflow are redrawn, so no row or column is zero.
pub fn gen_matrix_stream<F: WorkingFloat>(rows: usize, cols: usize, phi: f64, seed: u64, stream: u64) -> Matrix<F> {
    assert!(phi >= 0.0, "phi must be nonnegative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Matrix::from_fn(rows, cols, |_, _| loop {
        let u = 1.0 - rng.random::<f64>();
        let g: f64 = rng.sample(StandardNormal);
        let v = F::from_f64_nearest((u - 0.5) * (g * phi).exp());
        if v != F::zero() && v.is_finite() {
            break v;
        }
    })
}

pub fn gen_matrix<F: WorkingFloat>(rows: usize, cols: usize, phi: f64, seed: u64) -> Matrix<F> {
    gen_matrix_stream(rows, cols, phi, seed, 0)
}

/// Plain working-precision product: `c += a * b` for `h = 0..k` in order,
/// every operation rounded to nearest.
pub fn native_gemm<F: WorkingFloat>(a: &Matrix<F>, b: &Matrix<F>) -> Result<Matrix<F>> {
    check_product(a, b)?;
    Ok(Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        let mut c = F::zero();
        for h in 0..a.cols() {
            c = c + a[(i, h)] * b[(h, j)];
        }
        c
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub phi: f64,
    pub mode: Precision,
    pub n_list: Vec<usize>,
    pub seed: u64,
    pub trials: usize,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            m: 64,
            n: 64,
            k: 1024,
            phi: DEFAULT_PHI[0],
            mode: Precision::Fp64,
            n_list: (MIN_MODULI..=MAX_MODULI).collect(),
            seed: 1,
            trials: 1,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.k == 0 {
            return Err(Error::Dimension(format!("{}x{}x{}", self.m, self.n, self.k)));
        }
        if self.k > MAX_INNER {
            return Err(Error::InnerDimension(self.k));
        }
        if !(self.phi >= 0.0 && self.phi.is_finite()) {
            return Err(Error::Domain(format!("phi = {}", self.phi)));
        }
        if self.trials == 0 || self.n_list.is_empty() {
            return Err(Error::Domain("nothing to run".into()));
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| !(MIN_MODULI..=MAX_MODULI).contains(&n)) {
            return Err(Error::ModuliCount(n));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentRow {
    pub n: usize,
    pub est_max: f64,
    pub est_min: f64,
    pub est2_max: f64,
    pub est2_min: f64,
    pub err_max: f64,
    pub err_min: f64,
    pub err_native_max: f64,
}

impl ExperimentRow {
    /// `err_max <= est_max <= est2_max` and `err_min <= est_min`.
    pub fn consistent(&self) -> bool {
        self.err_max <= self.est_max && self.est_max <= self.est2_max && self.err_min <= self.est_min
    }

    fn values(&self) -> [f64; 7] {
        [self.est_max, self.est_min, self.est2_max, self.est2_min, self.err_max, self.err_min, self.err_native_max]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ExperimentRow>,
    /// Entries, over all trials and counts, where the exact error exceeded
    /// the tight bound or the tight bound exceeded the cheap one.
    pub violations: usize,
}

const FIELDS: [&str; 7] = ["est_max", "est_min", "est2_max", "est2_min", "err_max", "err_min", "err_native_max"];

/// One line per row: `N`, the seven values as hex floats, then the same
/// values in decimal.
pub fn to_csv(rows: &[ExperimentRow]) -> String {
    let mut s = String::from("N");
    for f in FIELDS {
        write!(s, ",{f}").unwrap();
    }
    for f in FIELDS {
        write!(s, ",{f}_dec").unwrap();
    }
    s.push('\n');
    for r in rows {
        write!(s, "{}", r.n).unwrap();
        for v in r.values() {
            write!(s, ",{}", format_hex(v)).unwrap();
        }
        for v in r.values() {
            write!(s, ",{v:e}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let out = match config.mode {
        Precision::Fp32 => run_typed::<f32>(config)?,
        Precision::Fp64 => run_typed::<f64>(config)?,
    };
    if let Some(path) = &config.out {
        std::fs::write(path, to_csv(&out.rows))?;
    }
    Ok(out)
}

#[derive(Clone, Copy)]
struct Extremes {
    max: f64,
    min: f64,
}

impl Extremes {
    fn new() -> Self {
        Extremes { max: 0.0, min: f64::INFINITY }
    }

    fn add(&mut self, m: &Matrix<f64>) {
        for &x in m.iter() {
            self.max = self.max.max(x);
            self.min = self.min.min(x);
        }
    }
}

fn run_typed<F: WorkingFloat>(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut stats = vec![(Extremes::new(), Extremes::new(), Extremes::new()); config.n_list.len()];
    let mut native = 0.0f64;
    let mut violations = 0;
    for trial in 0..config.trials as u64 {
        let context = |e: Error| Error::Domain(format!("trial {trial}: {e}"));
        let a = gen_matrix_stream::<F>(config.m, config.k, config.phi, config.seed, stream(trial, 0));
        let b = gen_matrix_stream::<F>(config.k, config.n, config.phi, config.seed, stream(trial, 1));
        let exact = exact_gemm(&a, &b)?;
        let nat = error_matrix(&native_gemm(&a, &b)?, &exact)?;
        native = nat.iter().fold(native, |m, &x| m.max(x));
        let cl = clearance(&a, &b).map_err(context)?;
        for (slot, &n) in stats.iter_mut().zip(&config.n_list) {
            let r = os_ii_with(&a, &b, n, cl.clone(), false).map_err(context)?;
            let err = error_exact(&r.c, &exact)?;
            let st = exponent_stats(&a, &b, r.scaling.c_bar(), r.table)?;
            let abs = exact_abs_gemm(&r.scaling.a_prime, &r.scaling.b_prime)?;
            let tight = bound_tight(&st, &abs, &a, &b, r.table)?;
            let cheap = bound_cheap(&st, &a, &b, r.table)?;
            violations += count_violations(&err, &tight.bound, &cheap.bound);
            slot.0.add(&tight.upper);
            slot.1.add(&cheap.upper);
            slot.2.add(&error_matrix(&r.c, &exact)?);
        }
    }
    let rows = config
        .n_list
        .iter()
        .zip(&stats)
        .map(|(&n, (t, c, e))| ExperimentRow {
            n,
            est_max: t.max,
            est_min: t.min,
            est2_max: c.max,
            est2_min: c.min,
            err_max: e.max,
            err_min: e.min,
            err_native_max: native,
        })
        .collect();
    Ok(ExperimentOutput { rows, violations })
}

/// Entries where `err <= tight <= cheap` fails.
pub fn count_violations(err: &Matrix<ExReal>, tight: &Matrix<ExReal>, cheap: &Matrix<ExReal>) -> usize {
    err.iter().zip(tight.iter()).zip(cheap.iter()).filter(|((e, t), c)| !(e <= t && t <= c)).count()
}

/// Run `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| Error::Domain(e.to_string()))?;
    Ok(pool.install(f))
}
