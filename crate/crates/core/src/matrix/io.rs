//! On-disk matrix formats.
//!
//! CSV: UTF-8, one row per line, comma-separated, no header. Values are
//! written with Rust's shortest round-trip formatting so a write/read cycle is
//! lossless.
//!
//! Binary: the 8-byte magic `SMFMAT01`, rows and cols as little-endian u64,
//! then `rows * cols` little-endian IEEE-754 doubles in row-major order.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::DenseMatrix;
use crate::error::{Result, SmfError};

pub const BINARY_MAGIC: &[u8; 8] = b"SMFMAT01";

pub fn write_csv<W: Write>(m: &DenseMatrix, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let mut line = String::new();
    for row in m.row_iter() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format_number(*v));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Shortest round-tripping text, switching to exponent notation when the
/// positional form would be long.
pub(crate) fn format_number(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() > 20 {
        format!("{v:e}")
    } else {
        plain
    }
}

pub fn read_csv<R: Read>(input: R) -> Result<DenseMatrix> {
    let reader = BufReader::new(input);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| SmfError::Parse(format!("line {}: bad number {field:?}", lineno + 1)))?;
            data.push(v);
        }
        let n = data.len() - before;
        match cols {
            None => cols = Some(n),
            Some(c) if c != n => {
                return Err(SmfError::Parse(format!(
                    "line {}: {n} fields, expected {c}",
                    lineno + 1
                )))
            }
            _ => {}
        }
        rows += 1;
    }
    DenseMatrix::from_vec(rows, cols.unwrap_or(0), data)
}

pub fn write_binary<W: Write>(m: &DenseMatrix, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&(m.rows() as u64).to_le_bytes())?;
    out.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.as_slice() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(input: R) -> Result<DenseMatrix> {
    let mut input = BufReader::new(input);
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(SmfError::Parse("missing SMFMAT01 magic".into()));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| SmfError::Parse(format!("dimensions {rows}x{cols} overflow")))?;
    let mut data = Vec::with_capacity(len.min(1 << 28));
    for _ in 0..len {
        input.read_exact(&mut word)?;
        data.push(f64::from_le_bytes(word));
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(SmfError::Parse(format!("{} trailing bytes after payload", rest.len())));
    }
    DenseMatrix::from_vec(rows, cols, data)
}

/// Reads either format, choosing by the leading magic bytes.
pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        read_binary(bytes.as_slice())
    } else {
        read_csv(bytes.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_layout() {
        let m = DenseMatrix::from_rows(&[[1.0, 0.5], [-2.0, 1e-300]]).unwrap();
        let mut buf = Vec::new();
        write_csv(&m, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1,0.5\n-2,1e-300\n");
    }

    #[test]
    fn csv_rejects_ragged_and_garbage() {
        assert!(read_csv("1,2\n3\n".as_bytes()).is_err());
        assert!(read_csv("1,x\n".as_bytes()).is_err());
        assert!(read_csv("1,NaN\n".as_bytes()).is_err());
    }

    #[test]
    fn binary_layout() {
        let m = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        let mut buf = Vec::new();
        write_binary(&m, &mut buf).unwrap();
        assert_eq!(&buf[..8], b"SMFMAT01");
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(buf[32..40].try_into().unwrap()), 2.0);
        assert_eq!(buf.len(), 24 + 3 * 8);
    }

    #[test]
    fn binary_rejects_truncation() {
        let mut buf = Vec::new();
        write_binary(&DenseMatrix::identity(2), &mut buf).unwrap();
        buf.pop();
        assert!(read_binary(buf.as_slice()).is_err());
    }

    proptest! {
        #[test]
        fn csv_and_binary_round_trip_bitwise(
            rows in 1usize..6,
            cols in 1usize..6,
            seed in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 36),
        ) {
            let m = DenseMatrix::from_vec(rows, cols, seed[..rows * cols].to_vec()).unwrap();
            let mut buf = Vec::new();
            write_csv(&m, &mut buf).unwrap();
            let back = read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(
                back.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
            let mut bin = Vec::new();
            write_binary(&m, &mut bin).unwrap();
            prop_assert_eq!(read_binary(bin.as_slice()).unwrap(), m);
        }
    }
}
