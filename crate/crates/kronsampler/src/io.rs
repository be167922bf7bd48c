//! File formats: matrix/vector CSV and PGM (P2/P5) images.
//!
//! Matrix CSV: a `rows,cols` header line, then `rows` lines of `cols`
//! comma-separated decimal values written with 17 significant digits.
//! Vector CSV is the same format with `cols = 1`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Formats a value with 17 significant digits, enough to round-trip f64.
pub fn format_full(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_matrix_csv(path: &Path, m: &DenseMatrix) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{},{}", m.rows(), m.cols())?;
    for r in 0..m.rows() {
        let line: Vec<String> = m.row(r).iter().map(|&v| format_full(v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: empty file", path.display())))?;
    let (rows, cols) = parse_header(header)
        .ok_or_else(|| Error::Parse(format!("{}: bad header '{header}'", path.display())))?;
    let mut data = Vec::with_capacity(rows * cols);
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "{}: line {}: bad value '{field}'",
                    path.display(),
                    lineno + 2
                ))
            })?;
            data.push(v);
        }
    }
    if data.len() != rows * cols {
        return Err(Error::Parse(format!(
            "{}: expected {} values, found {}",
            path.display(),
            rows * cols,
            data.len()
        )));
    }
    DenseMatrix::new(rows, cols, data)
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split(',');
    let rows = it.next()?.trim().parse().ok()?;
    let cols = it.next()?.trim().parse().ok()?;
    if it.next().is_some() {
        return None;
    }
    Some((rows, cols))
}

pub fn write_vector_csv(path: &Path, v: &[f64]) -> Result<()> {
    let m = DenseMatrix::new(v.len(), 1, v.to_vec())?;
    write_matrix_csv(path, &m)
}

pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>> {
    let m = read_matrix_csv(path)?;
    if m.cols() != 1 {
        return Err(Error::Parse(format!(
            "{}: expected a single-column vector, got {} columns",
            path.display(),
            m.cols()
        )));
    }
    Ok(m.as_slice().to_vec())
}

/// Reads a PGM image (P2 ASCII or P5 binary, maxval ≤ 255) into a matrix
/// of values in [0, maxval].
pub fn read_pgm(path: &Path) -> Result<DenseMatrix> {
    let bytes = fs::read(path)?;
    let mut cursor = 0usize;
    let magic = next_token(&bytes, &mut cursor)
        .ok_or_else(|| Error::Parse(format!("{}: missing PGM magic", path.display())))?;
    let binary = match magic.as_str() {
        "P2" => false,
        "P5" => true,
        other => {
            return Err(Error::Parse(format!(
                "{}: unsupported PGM magic '{other}'",
                path.display()
            )))
        }
    };
    let mut header = [0usize; 3];
    for slot in header.iter_mut() {
        let tok = next_token(&bytes, &mut cursor)
            .ok_or_else(|| Error::Parse(format!("{}: truncated PGM header", path.display())))?;
        *slot = tok
            .parse()
            .map_err(|_| Error::Parse(format!("{}: bad PGM header token '{tok}'", path.display())))?;
    }
    let (width, height, maxval) = (header[0], header[1], header[2]);
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse(format!(
            "{}: unsupported maxval {maxval} (need 1..=255)",
            path.display()
        )));
    }
    let mut data = Vec::with_capacity(width * height);
    if binary {
        // One whitespace byte separates the header from raster data.
        let raster = &bytes[cursor..];
        if raster.len() < width * height {
            return Err(Error::Parse(format!("{}: truncated PGM raster", path.display())));
        }
        data.extend(raster[..width * height].iter().map(|&b| b as f64));
    } else {
        for _ in 0..width * height {
            let tok = next_token(&bytes, &mut cursor)
                .ok_or_else(|| Error::Parse(format!("{}: truncated PGM raster", path.display())))?;
            let v: usize = tok.parse().map_err(|_| {
                Error::Parse(format!("{}: bad PGM pixel '{tok}'", path.display()))
            })?;
            data.push(v as f64);
        }
    }
    if data.iter().any(|&v| v > maxval as f64) {
        return Err(Error::Parse(format!(
            "{}: pixel above maxval {maxval}",
            path.display()
        )));
    }
    DenseMatrix::new(height, width, data)
}

/// Reads one whitespace-delimited token, skipping `#` comment lines. After
/// the token, exactly one trailing whitespace byte is consumed so binary
/// raster data can follow immediately.
fn next_token(bytes: &[u8], cursor: &mut usize) -> Option<String> {
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
            continue;
        }
        break;
    }
    if *cursor >= bytes.len() {
        return None;
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    let token = String::from_utf8_lossy(&bytes[start..*cursor]).into_owned();
    if *cursor < bytes.len() {
        *cursor += 1;
    }
    Some(token)
}

/// Writes a binary (P5) PGM with maxval 255; values are clamped to
/// [0, 255] and rounded.
pub fn write_pgm_p5(path: &Path, m: &DenseMatrix) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write!(w, "P5\n{} {}\n255\n", m.cols(), m.rows())?;
    let bytes: Vec<u8> = m
        .as_slice()
        .iter()
        .map(|&v| v.clamp(0.0, 255.0).round() as u8)
        .collect();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// Writes an ASCII (P2) PGM with maxval 255.
pub fn write_pgm_p2(path: &Path, m: &DenseMatrix) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write!(w, "P2\n{} {}\n255\n", m.cols(), m.rows())?;
    for r in 0..m.rows() {
        let line: Vec<String> = m
            .row(r)
            .iter()
            .map(|&v| format!("{}", v.clamp(0.0, 255.0).round() as u8))
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}
