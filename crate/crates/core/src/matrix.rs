//! Dense complex matrices and the CMAT v1 file format.
//!
//! All operators in this crate are dense, row-major, double-precision
//! complex matrices. Matrices are immutable after construction and safe to
//! share across threads; products parallelize over result rows and are
//! bitwise independent of the thread count (each entry is a fixed serial
//! accumulation).

use std::io::{BufRead, BufWriter, Write};
use std::ops::{Index, IndexMut};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Serialize a float with 17 significant digits, enough to reproduce the
/// exact f64 bit pattern on read-back.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidDimension(format!(
                "entry count {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    /// Matrix product, parallel over result rows.
    pub fn mul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions must agree");
        let (m, n, kk) = (self.rows, rhs.cols, self.cols);
        let mut out = CMatrix::zeros(m, n);
        let body = |i: usize, orow: &mut [Complex64]| {
            for k in 0..kk {
                let aik = self.data[i * kk + k];
                if aik.re == 0.0 && aik.im == 0.0 {
                    continue;
                }
                let brow = &rhs.data[k * n..(k + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += aik * b;
                }
            }
        };
        if m < 32 {
            for (i, orow) in out.data.chunks_mut(n).enumerate() {
                body(i, orow);
            }
        } else {
            out.data
                .par_chunks_mut(n)
                .enumerate()
                .for_each(|(i, orow)| body(i, orow));
        }
        out
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "inner dimensions must agree");
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .map(|(a, x)| a * x)
                    .sum::<Complex64>()
            })
            .collect()
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// U^r by binary exponentiation.
    pub fn pow(&self, r: u64) -> CMatrix {
        assert!(self.is_square());
        let mut result = CMatrix::identity(self.rows);
        let mut base = self.clone();
        let mut e = r;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ||self - rhs||_F without allocating the difference.
    pub fn frobenius_distance(&self, rhs: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_distance(&self, rhs: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    /// ||U^dagger U - I||_F. Uses a real fast path when every entry has zero
    /// imaginary part (permutation matrices in particular).
    pub fn unitarity_residual(&self) -> f64 {
        assert!(self.is_square());
        let n = self.rows;
        if self.is_real() {
            let re: Vec<f64> = self.data.iter().map(|z| z.re).collect();
            let mut acc = vec![0.0f64; n * n];
            let chunks: Vec<(usize, &mut [f64])> =
                acc.chunks_mut(n).enumerate().collect();
            chunks.into_par_iter().for_each(|(i, grow)| {
                // row i of G = U^T U: g_ij = sum_k U_ki U_kj
                for k in 0..n {
                    let uki = re[k * n + i];
                    if uki == 0.0 {
                        continue;
                    }
                    let urow = &re[k * n..(k + 1) * n];
                    for (g, u) in grow.iter_mut().zip(urow) {
                        *g += uki * u;
                    }
                }
            });
            let mut sum = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let d = acc[i * n + j] - if i == j { 1.0 } else { 0.0 };
                    sum += d * d;
                }
            }
            sum.sqrt()
        } else {
            let gram = self.dagger().mul(self);
            gram.frobenius_distance(&CMatrix::identity(n))
        }
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Write a matrix in the CMAT v1 format:
/// first line `CMAT v1 <rows> <cols>`, then one line per row with entries
/// `<re>,<im>` separated by single spaces, floats at 17 significant digits.
pub fn write_cmat<W: Write>(m: &CMatrix, w: &mut W) -> Result<()> {
    writeln!(w, "CMAT v1 {} {}", m.rows(), m.cols())?;
    for r in 0..m.rows() {
        let line: Vec<String> = m
            .row(r)
            .iter()
            .map(|z| format!("{},{}", fmt17(z.re), fmt17(z.im)))
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_cmat<R: BufRead>(r: &mut R) -> Result<CMatrix> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "CMAT" || fields[1] != "v1" {
        return Err(Error::Parse(format!("bad CMAT header: {}", header.trim())));
    }
    let rows: usize = fields[2]
        .parse()
        .map_err(|_| Error::Parse(format!("bad row count {}", fields[2])))?;
    let cols: usize = fields[3]
        .parse()
        .map_err(|_| Error::Parse(format!("bad col count {}", fields[3])))?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut line = String::new();
    for i in 0..rows {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Parse(format!("unexpected EOF at row {i}")));
        }
        let mut count = 0;
        for tok in line.split_whitespace() {
            let (re, im) = parse_complex(tok)?;
            data.push(Complex64::new(re, im));
            count += 1;
        }
        if count != cols {
            return Err(Error::Parse(format!("row {i} has {count} entries, expected {cols}")));
        }
    }
    CMatrix::from_rows(rows, cols, data)
}

pub(crate) fn parse_complex(tok: &str) -> Result<(f64, f64)> {
    let (re, im) = tok
        .split_once(',')
        .ok_or_else(|| Error::Parse(format!("bad complex entry {tok}")))?;
    let re: f64 = re
        .parse()
        .map_err(|_| Error::Parse(format!("bad float {re}")))?;
    let im: f64 = im
        .parse()
        .map_err(|_| Error::Parse(format!("bad float {im}")))?;
    Ok((re, im))
}

pub fn save_cmat(m: &CMatrix, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write_cmat(m, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_cmat(path: impl AsRef<Path>) -> Result<CMatrix> {
    let file = std::fs::File::open(path)?;
    let mut r = std::io::BufReader::new(file);
    read_cmat(&mut r)
}
