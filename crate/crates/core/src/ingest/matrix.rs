//! Distance matrices on disk.
//!
//! CDM1: magic `CDM1`, `u32 n`, then `n * n` little-endian `f64` meters,
//! row-major, row = origin city. The CSV form is `n` lines of `n`
//! comma-separated values; `inf` marks an unreachable pair.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geo::{DistanceMatrix, DistanceProvider};

pub const CDM1_MAGIC: &[u8; 4] = b"CDM1";

/// Loads a CDM1 file, or the CSV form when the file does not start with the magic.
pub fn load_distance_matrix(path: impl AsRef<Path>) -> Result<DistanceMatrix> {
    let path = path.as_ref();
    let ctx = path.display().to_string();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(CDM1_MAGIC) {
        read_cdm1(bytes.as_slice(), &ctx)
    } else {
        read_matrix_csv(bytes.as_slice(), &ctx)
    }
}

pub fn write_distance_matrix(d: &DistanceMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_cdm1(d, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_cdm1<R: Read>(mut r: R, ctx: &str) -> Result<DistanceMatrix> {
    let mut head = [0u8; 8];
    r.read_exact(&mut head)
        .map_err(|_| Error::format(ctx, "truncated CDM1 header"))?;
    if &head[..4] != CDM1_MAGIC {
        return Err(Error::format(ctx, "bad magic, expected CDM1"));
    }
    let n = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes")) as usize;
    let cells = (n as u64)
        .checked_mul(n as u64)
        .filter(|&c| c <= (isize::MAX as u64) / 8)
        .ok_or_else(|| Error::Capacity(format!("{n}x{n} matrix exceeds addressable memory")))?
        as usize;
    let mut body = Vec::new();
    r.read_to_end(&mut body)
        .map_err(|e| Error::format(ctx, e.to_string()))?;
    if body.len() != cells * 8 {
        return Err(Error::format(
            ctx,
            format!("declared n={n} needs {} bytes of values, found {}", cells * 8, body.len()),
        ));
    }
    let values = body
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    DistanceMatrix::new(n, values, DistanceProvider::Loaded)
}

pub fn write_cdm1<W: Write>(d: &DistanceMatrix, w: &mut W) -> std::io::Result<()> {
    w.write_all(CDM1_MAGIC)?;
    w.write_all(&(d.n() as u32).to_le_bytes())?;
    for v in d.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix_csv<R: Read>(r: R, ctx: &str) -> Result<DistanceMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line.map_err(|e| Error::format(ctx, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(j, tok)| {
                let tok = tok.trim();
                tok.parse::<f64>().map_err(|_| {
                    Error::format(ctx, format!("line {}, column {j}: `{tok}` is not a number", i + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::format(
            ctx,
            format!("row {i} has {} columns, expected {n}", row.len()),
        ));
    }
    DistanceMatrix::new(n, rows.into_iter().flatten().collect(), DistanceProvider::Loaded)
}

pub fn write_matrix_csv<W: Write>(d: &DistanceMatrix, w: &mut W) -> std::io::Result<()> {
    for i in 0..d.n() {
        let line = d
            .row(i)
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        writeln!(w, "{line}")?;
    }
    Ok(())
}
