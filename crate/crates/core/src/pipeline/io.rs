//! Tensor, mask and matrix file formats.
//!
//! Binary container: five little-endian `u64` header words
//! `[MAGIC, I1, I2, I3, TAG]` followed by the payload in canonical layout
//! (first index fastest). `TAG_F64` payloads are little-endian `f64`;
//! `TAG_BINARY` payloads are one byte (0 or 1) per entry.
//!
//! Matrices are CSV: one line per row, comma-separated, no header.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::mask::MaskTensor;
use crate::error::{Error, Result};
use crate::tensor::{matricize, Matrix, Mode, Tensor3};

/// ASCII "STCTENS1" read as a little-endian u64.
pub const MAGIC: u64 = u64::from_le_bytes(*b"STCTENS1");
pub const TAG_F64: u64 = 1;
pub const TAG_BINARY: u64 = 2;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_container(path: &Path, dims: (usize, usize, usize), tag: u64, payload: &[u8]) -> Result<()> {
    let mut w = create(path)?;
    let header = [MAGIC, dims.0 as u64, dims.1 as u64, dims.2 as u64, tag];
    let io = |e| Error::io(path, e);
    for word in header {
        w.write_all(&word.to_le_bytes()).map_err(io)?;
    }
    w.write_all(payload).map_err(io)?;
    w.flush().map_err(io)
}

pub fn write_tensor(path: &Path, t: &Tensor3) -> Result<()> {
    let payload: Vec<u8> = t.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect();
    write_container(path, t.dims(), TAG_F64, &payload)
}

pub fn write_mask(path: &Path, m: &MaskTensor) -> Result<()> {
    let payload: Vec<u8> = m
        .as_tensor()
        .as_slice()
        .iter()
        .map(|&v| u8::from(v != 0.0))
        .collect();
    write_container(path, m.dims(), TAG_BINARY, &payload)
}

fn parse_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Reads either element type into a float tensor.
pub fn read_tensor(path: &Path) -> Result<Tensor3> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 40 {
        return Err(parse_error(path, "truncated header"));
    }
    let word = |n: usize| u64::from_le_bytes(bytes[8 * n..8 * n + 8].try_into().unwrap());
    if word(0) != MAGIC {
        return Err(parse_error(path, "bad magic"));
    }
    let dims = (word(1) as usize, word(2) as usize, word(3) as usize);
    let n = dims
        .0
        .checked_mul(dims.1)
        .and_then(|v| v.checked_mul(dims.2))
        .ok_or_else(|| parse_error(path, "dims overflow"))?;
    let payload = &bytes[40..];
    let data: Vec<f64> = match word(4) {
        TAG_F64 => {
            if payload.len() != 8 * n {
                return Err(parse_error(path, format!("expected {} payload bytes", 8 * n)));
            }
            payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect()
        }
        TAG_BINARY => {
            if payload.len() != n {
                return Err(parse_error(path, format!("expected {n} payload bytes")));
            }
            payload.iter().map(|&b| f64::from(b)).collect()
        }
        other => return Err(parse_error(path, format!("unknown element tag {other}"))),
    };
    Tensor3::from_vec(dims, data).map_err(|e| parse_error(path, e.to_string()))
}

pub fn read_mask(path: &Path) -> Result<MaskTensor> {
    MaskTensor::from_tensor(read_tensor(path)?).map_err(|e| parse_error(path, e.to_string()))
}

/// Mode-1 unfolding as CSV, for tools that cannot read the container.
pub fn write_unfolding_csv(path: &Path, t: &Tensor3) -> Result<()> {
    write_matrix_csv(path, &matricize(t, Mode::One))
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_error(path, format!("line {}: {e}", n + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_error(path, format!("line {} has {} columns", n + 1, row.len())));
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    Ok(Matrix::from_row_iterator(
        rows.len(),
        cols,
        rows.into_iter().flatten(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::mask::random_mask;

    #[test]
    fn container_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let t = Tensor3::from_fn((3, 2, 4), |i, j, k| i as f64 - 0.5 * j as f64 + 1e-3 * k as f64);
        let p = dir.path().join("t.bin");
        write_tensor(&p, &t).unwrap();
        assert_eq!(read_tensor(&p).unwrap(), t);
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..8], b"STCTENS1");
        assert_eq!(bytes.len(), 40 + 8 * 24);

        let m = random_mask((3, 2, 4), 0.3, 1).unwrap();
        let p = dir.path().join("m.bin");
        write_mask(&p, &m).unwrap();
        assert_eq!(std::fs::read(&p).unwrap().len(), 40 + 24);
        assert_eq!(read_mask(&p).unwrap(), m);
        // a float tensor that is not binary is not a mask
        let p2 = dir.path().join("t2.bin");
        write_tensor(&p2, &t).unwrap();
        assert!(read_mask(&p2).is_err());
    }

    #[test]
    fn rejects_corrupt_containers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.bin");
        std::fs::write(&p, b"short").unwrap();
        assert!(read_tensor(&p).is_err());
        let mut bytes = Vec::new();
        for w in [MAGIC, 2, 2, 2, TAG_F64] {
            bytes.extend(w.to_le_bytes());
        }
        bytes.extend([0u8; 8]);
        std::fs::write(&p, &bytes).unwrap();
        assert!(read_tensor(&p).is_err());
    }

    #[test]
    fn matrix_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Matrix::from_row_slice(2, 3, &[1.0, -2.5, 0.0, 1e-17, 3.0, 4.25]);
        let p = dir.path().join("m.csv");
        write_matrix_csv(&p, &m).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 2);
        assert_eq!(read_matrix_csv(&p).unwrap(), m);
        std::fs::write(&p, "1,2\n3\n").unwrap();
        assert!(read_matrix_csv(&p).is_err());
    }
}
