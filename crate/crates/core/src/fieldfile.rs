//! Binary field files.
//!
//! Layout: the five bytes `BOZK1`, a little-endian `u32` header length, a
//! JSON header line of that many bytes, then `nx * ny` little-endian `f64`
//! values in row-major order (`x` index slowest).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::Params;
use crate::spectral::{Field, Grid2D};

pub const MAGIC: &[u8; 5] = b"BOZK1";
const MAX_HEADER: u32 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub magic: String,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub params: Params,
    pub dtype: String,
    pub row_major: bool,
}

/// Serializes `field` and `params` into `w`.
pub fn write_to(mut w: impl Write, field: &Field, params: &Params) -> Result<()> {
    let g = field.grid();
    let header = Header {
        magic: "BOZK1".into(),
        nx: g.nx(),
        ny: g.ny(),
        lx: g.lx(),
        ly: g.ly(),
        params: *params,
        dtype: "f64le".into(),
        row_major: true,
    };
    let mut text = serde_json::to_string(&header).map_err(|e| Error::Header(e.to_string()))?;
    text.push('\n');
    w.write_all(MAGIC)?;
    w.write_all(&(text.len() as u32).to_le_bytes())?;
    w.write_all(text.as_bytes())?;
    for v in field.values().iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a field from `r`, which must hold exactly `total_len` bytes.
/// The payload size is checked against the header before any allocation.
pub fn read_from(mut r: impl Read, total_len: u64) -> Result<(Field, Params)> {
    let mut magic = [0u8; 5];
    read_prefix(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::BadMagic(String::from_utf8_lossy(&magic).into_owned()));
    }
    let mut len = [0u8; 4];
    read_prefix(&mut r, &mut len)?;
    let len = u32::from_le_bytes(len);
    if len > MAX_HEADER || 9 + len as u64 > total_len {
        return Err(Error::Header(format!(
            "declared header length {len} does not fit a {total_len}-byte file"
        )));
    }
    let mut text = vec![0u8; len as usize];
    r.read_exact(&mut text)?;
    let header: Header =
        serde_json::from_slice(&text).map_err(|e| Error::Header(e.to_string()))?;
    if header.magic != "BOZK1" {
        return Err(Error::Header(format!("header magic {:?}", header.magic)));
    }
    if header.dtype != "f64le" {
        return Err(Error::Header(format!("unsupported dtype {:?}", header.dtype)));
    }
    if !header.row_major {
        return Err(Error::Header("only row-major payloads are supported".into()));
    }
    let grid = Grid2D::new(header.nx, header.ny, header.lx, header.ly)
        .map_err(|e| Error::Header(e.to_string()))?;
    let expected = (header.nx as u64)
        .checked_mul(header.ny as u64)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Header("nx * ny overflows".into()))?;
    let actual = total_len - 9 - len as u64;
    if expected != actual {
        return Err(Error::PayloadSize { expected, actual });
    }
    let mut bytes = vec![0u8; expected as usize];
    r.read_exact(&mut bytes)?;
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((Field::from_vec(grid, data)?, header.params))
}

fn read_prefix(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Header("file ends inside the preamble".into()),
        _ => Error::Io(e),
    })
}

pub fn write_field(path: impl AsRef<Path>, field: &Field, params: &Params) -> Result<()> {
    write_to(BufWriter::new(File::create(path)?), field, params)
}

pub fn read_field(path: impl AsRef<Path>) -> Result<(Field, Params)> {
    let file = File::open(path)?;
    let len = file.metadata()?.len();
    read_from(BufReader::new(file), len)
}

pub fn to_bytes(field: &Field, params: &Params) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * field.grid().len());
    write_to(&mut out, field, params).expect("writing to memory");
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<(Field, Params)> {
    read_from(bytes, bytes.len() as u64)
}
