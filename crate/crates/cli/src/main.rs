use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use crtgemm::bounds::{bound_cheap, bound_tight, exponent_stats, suggest_n, Suggestion, Target};
use crtgemm::harness::matrix_io::{format_matrix, read_matrix, AnyMatrix};
use crtgemm::harness::selftest::{selftest, SelftestOptions};
use crtgemm::harness::{gen_matrix, run_experiment, to_csv, ExperimentConfig};
use crtgemm::moduli::{MAX_MODULI, MIN_MODULI};
use crtgemm::oracle::exact_abs_gemm;
use crtgemm::{os_ii, table, Matrix, Precision, WorkingFloat};

#[derive(Parser)]
#[command(name = "crtgemm", version, about = "Emulated FP32/FP64 GEMM on an int8 residue engine")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the constant table for N moduli as CSV.
    Table {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "fp64")]
        mode: Precision,
    },
    /// Write a random test matrix.
    Generate {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 0.5)]
        phi: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "fp64")]
        mode: Precision,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multiply two matrix files with N moduli.
    Emulate {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        n: usize,
        /// Must match the files when given.
        #[arg(long)]
        mode: Option<Precision>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the largest and smallest error-bound entries.
    Bounds {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        mode: Option<Precision>,
        /// Also evaluate the elementwise bound, which needs the exact scaled product.
        #[arg(long)]
        tight: bool,
    },
    /// Smallest moduli count whose cheap bound stays below a target.
    SuggestN {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        target: f64,
        #[arg(long)]
        mode: Option<Precision>,
    },
    /// Sweep N and compare observed errors with both bounds.
    Experiment {
        #[arg(long, default_value_t = 64)]
        m: usize,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 1024)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        phi: f64,
        #[arg(long, default_value = "fp64")]
        mode: Precision,
        /// Comma-separated counts and ranges, e.g. `2-49` or `2,5,10`.
        #[arg(long, default_value = "2-49")]
        n_list: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every property suite.
    Selftest {
        /// Reduced sample sizes.
        #[arg(long)]
        quick: bool,
    },
}

fn parse_n_list(s: &str) -> Result<Vec<usize>> {
    let mut v = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, hi)) = part.split_once('-') {
            let (lo, hi): (usize, usize) = (lo.parse()?, hi.parse()?);
            v.extend(lo..=hi);
        } else {
            v.push(part.parse()?);
        }
    }
    if v.is_empty() {
        bail!("empty moduli list");
    }
    Ok(v)
}

fn load_pair(a: &Path, b: &Path, mode: Option<Precision>) -> Result<(AnyMatrix, AnyMatrix)> {
    let ma = read_matrix(a).with_context(|| format!("reading {}", a.display()))?;
    let mb = read_matrix(b).with_context(|| format!("reading {}", b.display()))?;
    if ma.precision() != mb.precision() {
        bail!("{} is {} but {} is {}", a.display(), ma.precision(), b.display(), mb.precision());
    }
    if let Some(m) = mode {
        if m != ma.precision() {
            bail!("--mode {m} does not match the inputs ({})", ma.precision());
        }
    }
    Ok((ma, mb))
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emulate<F: WorkingFloat>(a: &Matrix<F>, b: &Matrix<F>, n: usize, out: &Option<PathBuf>) -> Result<()> {
    let r = os_ii(a, b, n, false)?;
    emit(&format_matrix(&r.c), out)
}

fn bounds<F: WorkingFloat>(a: &Matrix<F>, b: &Matrix<F>, n: usize, tight: bool) -> Result<()> {
    let r = os_ii(a, b, n, false)?;
    let stats = exponent_stats(a, b, r.scaling.c_bar(), r.table)?;
    let cheap = bound_cheap(&stats, a, b, r.table)?;
    println!("cheap max {:e} min {:e}", cheap.max(), cheap.min());
    if tight {
        let abs = exact_abs_gemm(&r.scaling.a_prime, &r.scaling.b_prime)?;
        let t = bound_tight(&stats, &abs, a, b, r.table)?;
        println!("tight max {:e} min {:e}", t.max(), t.min());
    }
    Ok(())
}

fn suggest<F: WorkingFloat>(a: &Matrix<F>, b: &Matrix<F>, target: f64) -> Result<bool> {
    match suggest_n(a, b, &Target::Scalar(target))? {
        Suggestion::Achievable { n, bound_max } => {
            println!("N = {n} (cheap bound max {bound_max:e})");
            Ok(true)
        }
        Suggestion::NotAchievable { best_bound_max } => {
            println!("not achievable with N <= {MAX_MODULI} (best cheap bound max {best_bound_max:e})");
            Ok(false)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Table { n, mode } => {
            print!("{}", table(n, mode)?.to_csv());
            Ok(true)
        }
        Cmd::Generate { rows, cols, phi, seed, mode, out } => {
            if phi.is_nan() || phi < 0.0 {
                bail!("phi must be nonnegative");
            }
            let text = match mode {
                Precision::Fp32 => format_matrix(&gen_matrix::<f32>(rows, cols, phi, seed)),
                Precision::Fp64 => format_matrix(&gen_matrix::<f64>(rows, cols, phi, seed)),
            };
            emit(&text, &out)?;
            Ok(true)
        }
        Cmd::Emulate { a, b, n, mode, out } => {
            match load_pair(&a, &b, mode)? {
                (AnyMatrix::F32(x), AnyMatrix::F32(y)) => emulate(&x, &y, n, &out)?,
                (AnyMatrix::F64(x), AnyMatrix::F64(y)) => emulate(&x, &y, n, &out)?,
                _ => unreachable!("precisions checked"),
            }
            Ok(true)
        }
        Cmd::Bounds { a, b, n, mode, tight } => {
            match load_pair(&a, &b, mode)? {
                (AnyMatrix::F32(x), AnyMatrix::F32(y)) => bounds(&x, &y, n, tight)?,
                (AnyMatrix::F64(x), AnyMatrix::F64(y)) => bounds(&x, &y, n, tight)?,
                _ => unreachable!("precisions checked"),
            }
            Ok(true)
        }
        Cmd::SuggestN { a, b, target, mode } => match load_pair(&a, &b, mode)? {
            (AnyMatrix::F32(x), AnyMatrix::F32(y)) => suggest(&x, &y, target),
            (AnyMatrix::F64(x), AnyMatrix::F64(y)) => suggest(&x, &y, target),
            _ => unreachable!("precisions checked"),
        },
        Cmd::Experiment { m, n, k, phi, mode, n_list, seed, trials, out } => {
            let n_list = parse_n_list(&n_list)?;
            if let Some(bad) = n_list.iter().find(|x| !(MIN_MODULI..=MAX_MODULI).contains(*x)) {
                bail!("moduli count {bad} outside [{MIN_MODULI}, {MAX_MODULI}]");
            }
            let cfg = ExperimentConfig { m, n, k, phi, mode, n_list, seed, trials, out: None };
            let res = run_experiment(&cfg)?;
            emit(&to_csv(&res.rows), &out)?;
            let bad_rows = res.rows.iter().filter(|r| !r.consistent()).count();
            if bad_rows > 0 || res.violations > 0 {
                eprintln!("{bad_rows} inconsistent rows, {} entrywise bound violations", res.violations);
                return Ok(false);
            }
            Ok(true)
        }
        Cmd::Selftest { quick } => {
            let opts = if quick { SelftestOptions::quick() } else { SelftestOptions::full() };
            let rep = selftest(&opts)?;
            print!("{}", rep.render());
            Ok(rep.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
