//! Whitespace-delimited text matrices with a one-line `rows cols` header.
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! write/read cycle reproduces every f64 bit-exactly.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Result, RidgeError};

pub fn write_matrix<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    writeln!(w, "{} {}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

/// Read a matrix from consecutive lines of `lines`, starting at the header.
pub fn read_matrix_lines<I>(lines: &mut I) -> Result<DMatrix<f64>>
where
    I: Iterator<Item = std::io::Result<String>>,
{
    let header = lines
        .next()
        .ok_or_else(|| RidgeError::parse("missing matrix header"))??;
    let mut parts = header.split_whitespace();
    let rows: usize = parts
        .next()
        .ok_or_else(|| RidgeError::parse("matrix header needs `rows cols`"))?
        .parse()
        .map_err(|e| RidgeError::parse(format!("bad row count: {e}")))?;
    let cols: usize = parts
        .next()
        .ok_or_else(|| RidgeError::parse("matrix header needs `rows cols`"))?
        .parse()
        .map_err(|e| RidgeError::parse(format!("bad col count: {e}")))?;

    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| RidgeError::parse(format!("matrix truncated at row {i}")))??;
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|e| RidgeError::parse(format!("bad float {tok:?}: {e}")))?;
            data.push(v);
        }
        if data.len() != (i + 1) * cols {
            return Err(RidgeError::parse(format!(
                "row {i} has {} entries, expected {cols}",
                data.len() - i * cols
            )));
        }
    }
    Ok(DMatrix::from_row_iterator(rows, cols, data))
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<DMatrix<f64>> {
    read_matrix_lines(&mut r.lines())
}

pub fn save_matrix(path: &std::path::Path, m: &DMatrix<f64>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_matrix(&mut f, m)
}

pub fn load_matrix(path: &std::path::Path) -> Result<DMatrix<f64>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_matrix(f)
}
