//! Flat binary node data: an 8-byte magic, the node count as a
//! little-endian `u64`, then one little-endian `f64` per node.

use std::io::{self, Read, Write};
use std::path::Path;

pub const MAGIC: [u8; 8] = *b"QLGRID01";
pub const HEADER_LEN: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum GridFileError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("not a grid file (bad magic)")]
    BadMagic,
    #[error("grid file holds {got} nodes, the domain has {expected}")]
    NodeCount { expected: usize, got: usize },
    #[error("grid file is truncated")]
    Truncated,
}

pub fn write_nodes(mut w: impl Write, values: &[f64]) -> io::Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_nodes(mut r: impl Read) -> Result<Vec<f64>, GridFileError> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => GridFileError::Truncated,
        _ => GridFileError::Io(e),
    })?;
    if header[..8] != MAGIC {
        return Err(GridFileError::BadMagic);
    }
    let count = u64::from_le_bytes(header[8..].try_into().expect("8-byte slice")) as usize;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(GridFileError::Truncated);
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn save(path: &Path, values: &[f64]) -> io::Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = io::BufWriter::new(f);
    write_nodes(&mut w, values)?;
    w.flush()
}

pub fn load(path: &Path, expected: usize) -> Result<Vec<f64>, GridFileError> {
    let f = std::fs::File::open(path)?;
    let values = read_nodes(io::BufReader::new(f))?;
    if values.len() != expected {
        return Err(GridFileError::NodeCount {
            expected,
            got: values.len(),
        });
    }
    Ok(values)
}
