//! Text matrix files: a `rows cols fp32|fp64` header, then one hex float
//! per entry in row-major order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::hexfloat::{format_hex, parse_hex};
use crate::matrix::Matrix;
use crate::scalar::{Precision, WorkingFloat};

#[derive(Debug, Clone, PartialEq)]
pub enum AnyMatrix {
    F32(Matrix<f32>),
    F64(Matrix<f64>),
}

impl AnyMatrix {
    pub fn precision(&self) -> Precision {
        match self {
            AnyMatrix::F32(_) => Precision::Fp32,
            AnyMatrix::F64(_) => Precision::Fp64,
        }
    }
}

pub fn format_matrix<F: WorkingFloat>(m: &Matrix<F>) -> String {
    let mut s = format!("{} {} {}\n", m.rows(), m.cols(), F::PRECISION);
    for &x in m.iter() {
        s.push_str(&format_hex(x));
        s.push('\n');
    }
    s
}

fn parse_body<F: WorkingFloat>(rows: usize, cols: usize, lines: &mut dyn Iterator<Item = &str>) -> Result<Matrix<F>> {
    let data = lines.map(parse_hex::<F>).collect::<Result<Vec<_>>>()?;
    if data.len() != rows * cols {
        return Err(Error::Parse(format!("expected {} entries, found {}", rows * cols, data.len())));
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn parse_matrix(text: &str) -> Result<AnyMatrix> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let [r, c, mode] = parts[..] else {
        return Err(Error::Parse(format!("bad header {header:?}")));
    };
    let dim = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad dimension {s:?}")));
    let (rows, cols) = (dim(r)?, dim(c)?);
    match mode.parse::<Precision>()? {
        Precision::Fp32 => Ok(AnyMatrix::F32(parse_body(rows, cols, &mut lines)?)),
        Precision::Fp64 => Ok(AnyMatrix::F64(parse_body(rows, cols, &mut lines)?)),
    }
}

pub fn read_matrix(path: &Path) -> Result<AnyMatrix> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

pub fn write_matrix<F: WorkingFloat>(path: &Path, m: &Matrix<F>) -> Result<()> {
    Ok(std::fs::write(path, format_matrix(m))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let m = Matrix::from_vec(2, 3, vec![1.0f64, -0.0, 5e-324, f64::MAX, 0.1, -3.75]).unwrap();
        let back = parse_matrix(&format_matrix(&m)).unwrap();
        let AnyMatrix::F64(b) = back else { panic!("wrong precision") };
        assert!(m.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let f = Matrix::from_vec(1, 2, vec![1.5f32, -1e-45]).unwrap();
        assert_eq!(parse_matrix(&format_matrix(&f)).unwrap(), AnyMatrix::F32(f));
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_matrix("").is_err());
        assert!(parse_matrix("2 2 fp64\n0x1p+0\n").is_err());
        assert!(parse_matrix("1 1 fp16\n0x1p+0\n").is_err());
        assert!(parse_matrix("1 1 fp32\n0x1.0000000000001p+0\n").is_err());
    }
}
