//! Population rasters on an angular lat/lon lattice.
//!
//! Two on-disk layouts are supported:
//!
//! * ESRI-ASCII: `ncols`, `nrows`, `xllcorner`, `yllcorner`, `cellsize` (or the
//!   `dx`/`dy` pair for anisotropic cells), optional `NODATA_value`, then rows
//!   from north to south.
//! * CPG1 packed binary: magic `CPG1`, `u32 n_rows`, `u32 n_cols`, `f64 origin_lat`,
//!   `f64 origin_lon`, `f64 cell_height_arcsec`, `f64 cell_width_arcsec`, then
//!   `n_rows * n_cols` little-endian `f64` counts, row-major from the north-west
//!   corner. NODATA cells are stored as NaN.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CPG1_MAGIC: &[u8; 4] = b"CPG1";

/// Largest raster we agree to allocate (cells).
const MAX_CELLS: u64 = (isize::MAX as u64) / 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFormat {
    EsriAscii,
    PackedBinary,
}

impl std::str::FromStr for GridFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "esri-ascii" | "asc" => Ok(GridFormat::EsriAscii),
            "packed-binary" | "cpg1" => Ok(GridFormat::PackedBinary),
            other => Err(Error::Argument(format!("unknown grid format `{other}`"))),
        }
    }
}

/// Population counts on a regular angular grid. Row 0 is the northernmost row.
///
/// NODATA cells are held as NaN and read as population 0; the original
/// sentinel (if any) is kept in `nodata_value` so the raster can be written back.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationGrid {
    n_rows: usize,
    n_cols: usize,
    /// Latitude of the lower-left (south-west) corner, degrees.
    pub origin_lat: f64,
    /// Longitude of the lower-left corner, degrees.
    pub origin_lon: f64,
    pub cell_height_arcsec: f64,
    pub cell_width_arcsec: f64,
    counts: Vec<f64>,
    pub nodata_value: Option<f64>,
}

impl PopulationGrid {
    /// Builds a grid, validating every invariant. NaN entries mark NODATA cells.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        origin_lat: f64,
        origin_lon: f64,
        cell_height_arcsec: f64,
        cell_width_arcsec: f64,
        counts: Vec<f64>,
    ) -> Result<Self> {
        let expected = checked_cells(n_rows as u64, n_cols as u64)?;
        if counts.len() as u64 != expected {
            return Err(Error::Data(format!(
                "grid declares {n_rows}x{n_cols} cells but {} counts were given",
                counts.len()
            )));
        }
        if !(cell_height_arcsec > 0.0 && cell_height_arcsec.is_finite()) {
            return Err(Error::Data(format!(
                "cell height must be positive, got {cell_height_arcsec}"
            )));
        }
        if !(cell_width_arcsec > 0.0 && cell_width_arcsec.is_finite()) {
            return Err(Error::Data(format!(
                "cell width must be positive, got {cell_width_arcsec}"
            )));
        }
        if !(origin_lat.abs() <= 90.0) {
            return Err(Error::Data(format!("origin latitude {origin_lat} outside [-90, 90]")));
        }
        if !origin_lon.is_finite() {
            return Err(Error::Data(format!("origin longitude {origin_lon} is not finite")));
        }
        for (i, &c) in counts.iter().enumerate() {
            if c < 0.0 || c.is_infinite() {
                return Err(Error::Data(format!(
                    "invalid count {c} at row {}, col {}",
                    i / n_cols,
                    i % n_cols
                )));
            }
        }
        Ok(PopulationGrid {
            n_rows,
            n_cols,
            origin_lat,
            origin_lon,
            cell_height_arcsec,
            cell_width_arcsec,
            counts,
            nodata_value: None,
        })
    }

    pub fn with_nodata_value(mut self, sentinel: Option<f64>) -> Self {
        self.nodata_value = sentinel;
        self
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Raw cell values, NaN for NODATA.
    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn is_nodata(&self, row: usize, col: usize) -> bool {
        self.counts[row * self.n_cols + col].is_nan()
    }

    /// Population of a cell, with NODATA read as 0.
    #[inline]
    pub fn population(&self, row: usize, col: usize) -> f64 {
        let c = self.counts[row * self.n_cols + col];
        if c.is_nan() {
            0.0
        } else {
            c
        }
    }

    /// Latitude of the center of `row`, degrees.
    pub fn row_center_lat(&self, row: usize) -> f64 {
        let from_south = (self.n_rows - row) as f64 - 0.5;
        self.origin_lat + from_south * self.cell_height_arcsec / 3600.0
    }

    /// Longitude of the center of `col`, degrees.
    pub fn col_center_lon(&self, col: usize) -> f64 {
        self.origin_lon + (col as f64 + 0.5) * self.cell_width_arcsec / 3600.0
    }
}

fn checked_cells(n_rows: u64, n_cols: u64) -> Result<u64> {
    match n_rows.checked_mul(n_cols) {
        Some(n) if n <= MAX_CELLS => Ok(n),
        _ => Err(Error::Capacity(format!(
            "{n_rows}x{n_cols} raster exceeds addressable memory"
        ))),
    }
}

pub fn load_population_grid(path: impl AsRef<Path>, format: GridFormat) -> Result<PopulationGrid> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    match format {
        GridFormat::EsriAscii => read_esri_ascii(reader, &path.display().to_string()),
        GridFormat::PackedBinary => read_packed(reader, &path.display().to_string()),
    }
}

pub fn write_population_grid(
    grid: &PopulationGrid,
    path: impl AsRef<Path>,
    format: GridFormat,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = match format {
        GridFormat::EsriAscii => write_esri_ascii(grid, &mut w),
        GridFormat::PackedBinary => write_packed(grid, &mut w),
    };
    res.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

#[derive(Default)]
struct EsriHeader {
    ncols: Option<usize>,
    nrows: Option<usize>,
    xll: Option<(f64, bool)>,
    yll: Option<(f64, bool)>,
    cellsize: Option<f64>,
    dx: Option<f64>,
    dy: Option<f64>,
    nodata: Option<f64>,
}

fn parse_header_value<T: std::str::FromStr>(ctx: &str, key: &str, value: Option<&str>) -> Result<T> {
    value
        .and_then(|v| v.parse::<T>().ok())
        .ok_or_else(|| Error::format(ctx, format!("header field `{key}` has a missing or invalid value")))
}

pub fn read_esri_ascii<R: Read>(reader: R, ctx: &str) -> Result<PopulationGrid> {
    let mut reader = BufReader::new(reader);
    let mut header = EsriHeader::default();
    let mut line = String::new();
    let mut pending: Option<String> = None;

    // Header lines are `key value`; the first line whose first token parses as a
    // number starts the data block.
    loop {
        line.clear();
        let read = reader
            .read_line(&mut line)
            .map_err(|e| Error::format(ctx, e.to_string()))?;
        if read == 0 {
            break;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let key = tokens.next().unwrap_or_default();
        if key.parse::<f64>().is_ok() {
            pending = Some(trimmed.to_string());
            break;
        }
        let value = tokens.next();
        match key.to_ascii_lowercase().as_str() {
            "ncols" => header.ncols = Some(parse_header_value(ctx, "ncols", value)?),
            "nrows" => header.nrows = Some(parse_header_value(ctx, "nrows", value)?),
            "xllcorner" => header.xll = Some((parse_header_value(ctx, "xllcorner", value)?, false)),
            "xllcenter" => header.xll = Some((parse_header_value(ctx, "xllcenter", value)?, true)),
            "yllcorner" => header.yll = Some((parse_header_value(ctx, "yllcorner", value)?, false)),
            "yllcenter" => header.yll = Some((parse_header_value(ctx, "yllcenter", value)?, true)),
            "cellsize" => header.cellsize = Some(parse_header_value(ctx, "cellsize", value)?),
            "dx" => header.dx = Some(parse_header_value(ctx, "dx", value)?),
            "dy" => header.dy = Some(parse_header_value(ctx, "dy", value)?),
            "nodata_value" => header.nodata = Some(parse_header_value(ctx, "NODATA_value", value)?),
            other => {
                return Err(Error::format(ctx, format!("unknown header field `{other}`")));
            }
        }
    }

    let ncols = header.ncols.ok_or_else(|| Error::format(ctx, "missing header field `ncols`"))?;
    let nrows = header.nrows.ok_or_else(|| Error::format(ctx, "missing header field `nrows`"))?;
    let (dx, dy) = match (header.cellsize, header.dx, header.dy) {
        (Some(c), None, None) => (c, c),
        (None, Some(dx), Some(dy)) => (dx, dy),
        (None, None, None) => {
            return Err(Error::format(ctx, "missing header field `cellsize` (or `dx`/`dy`)"))
        }
        _ => {
            return Err(Error::format(
                ctx,
                "header field `cellsize` conflicts with `dx`/`dy`; give one or a full dx/dy pair",
            ))
        }
    };
    if !(dx > 0.0 && dy > 0.0) {
        return Err(Error::format(ctx, "header field `cellsize` must be positive"));
    }
    let (xll, x_center) = header.xll.ok_or_else(|| Error::format(ctx, "missing header field `xllcorner`"))?;
    let (yll, y_center) = header.yll.ok_or_else(|| Error::format(ctx, "missing header field `yllcorner`"))?;
    let origin_lon = if x_center { xll - dx / 2.0 } else { xll };
    let origin_lat = if y_center { yll - dy / 2.0 } else { yll };

    let total = checked_cells(nrows as u64, ncols as u64)? as usize;
    let mut counts = Vec::with_capacity(total);
    let mut row = 0usize;
    let push_row = |text: &str, row: usize, counts: &mut Vec<f64>| -> Result<()> {
        if row >= nrows {
            return Err(Error::format(ctx, format!("more than nrows={nrows} data rows (row {row})")));
        }
        let before = counts.len();
        for (col, tok) in text.split_whitespace().enumerate() {
            let v: f64 = tok.parse().map_err(|_| {
                Error::format(ctx, format!("row {row}, col {col}: `{tok}` is not a number"))
            })?;
            if header.nodata.is_some_and(|nd| v == nd) {
                counts.push(f64::NAN);
            } else if v < 0.0 || !v.is_finite() {
                return Err(Error::Data(format!("negative or non-finite count {v} at row {row}, col {col}")));
            } else {
                counts.push(v);
            }
        }
        let got = counts.len() - before;
        if got != ncols {
            return Err(Error::format(
                ctx,
                format!("row {row} has {got} values but ncols={ncols}"),
            ));
        }
        Ok(())
    };

    if let Some(first) = pending {
        push_row(&first, row, &mut counts)?;
        row += 1;
    }
    loop {
        line.clear();
        let read = reader
            .read_line(&mut line)
            .map_err(|e| Error::format(ctx, e.to_string()))?;
        if read == 0 {
            break;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        push_row(trimmed, row, &mut counts)?;
        row += 1;
    }
    if row != nrows {
        return Err(Error::format(ctx, format!("expected nrows={nrows} data rows, found {row}")));
    }

    Ok(PopulationGrid::new(
        nrows,
        ncols,
        origin_lat,
        origin_lon,
        dy * 3600.0,
        dx * 3600.0,
        counts,
    )?
    .with_nodata_value(header.nodata))
}

pub fn write_esri_ascii<W: Write>(grid: &PopulationGrid, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "ncols {}", grid.n_cols)?;
    writeln!(w, "nrows {}", grid.n_rows)?;
    writeln!(w, "xllcorner {}", grid.origin_lon)?;
    writeln!(w, "yllcorner {}", grid.origin_lat)?;
    if grid.cell_height_arcsec == grid.cell_width_arcsec {
        writeln!(w, "cellsize {}", grid.cell_width_arcsec / 3600.0)?;
    } else {
        writeln!(w, "dx {}", grid.cell_width_arcsec / 3600.0)?;
        writeln!(w, "dy {}", grid.cell_height_arcsec / 3600.0)?;
    }
    let has_nodata = grid.counts.iter().any(|c| c.is_nan());
    let sentinel = grid.nodata_value.or(has_nodata.then_some(-9999.0));
    if let Some(nd) = sentinel {
        writeln!(w, "NODATA_value {nd}")?;
    }
    let mut buf = String::new();
    for row in grid.counts.chunks(grid.n_cols.max(1)) {
        buf.clear();
        for (i, &c) in row.iter().enumerate() {
            if i > 0 {
                buf.push(' ');
            }
            let v = if c.is_nan() { sentinel.unwrap_or(-9999.0) } else { c };
            buf.push_str(&v.to_string());
        }
        writeln!(w, "{buf}")?;
    }
    Ok(())
}

pub fn read_packed<R: Read>(mut reader: R, ctx: &str) -> Result<PopulationGrid> {
    let mut magic = [0u8; 4];
    reader
        .read_exact(&mut magic)
        .map_err(|_| Error::format(ctx, "truncated header (magic)"))?;
    if &magic != CPG1_MAGIC {
        return Err(Error::format(ctx, format!("bad magic {magic:?}, expected CPG1")));
    }
    let n_rows = read_u32(&mut reader, ctx, "n_rows")? as usize;
    let n_cols = read_u32(&mut reader, ctx, "n_cols")? as usize;
    let origin_lat = read_f64(&mut reader, ctx, "origin_lat")?;
    let origin_lon = read_f64(&mut reader, ctx, "origin_lon")?;
    let cell_h = read_f64(&mut reader, ctx, "cell_height_arcsec")?;
    let cell_w = read_f64(&mut reader, ctx, "cell_width_arcsec")?;
    let total = checked_cells(n_rows as u64, n_cols as u64)? as usize;

    let mut counts = Vec::with_capacity(total);
    let mut buf = vec![0u8; 8 * 8192];
    let mut remaining = total;
    while remaining > 0 {
        let take = remaining.min(8192);
        let bytes = &mut buf[..take * 8];
        reader.read_exact(bytes).map_err(|_| {
            Error::format(ctx, format!("truncated counts: expected {total} values"))
        })?;
        counts.extend(
            bytes
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk"))),
        );
        remaining -= take;
    }
    let mut extra = [0u8; 1];
    if reader.read(&mut extra).map_err(|e| Error::format(ctx, e.to_string()))? != 0 {
        return Err(Error::format(ctx, "trailing bytes after counts"));
    }
    PopulationGrid::new(n_rows, n_cols, origin_lat, origin_lon, cell_h, cell_w, counts)
}

pub fn write_packed<W: Write>(grid: &PopulationGrid, w: &mut W) -> std::io::Result<()> {
    w.write_all(CPG1_MAGIC)?;
    w.write_all(&(grid.n_rows as u32).to_le_bytes())?;
    w.write_all(&(grid.n_cols as u32).to_le_bytes())?;
    for v in [
        grid.origin_lat,
        grid.origin_lon,
        grid.cell_height_arcsec,
        grid.cell_width_arcsec,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for c in &grid.counts {
        w.write_all(&c.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R, ctx: &str, field: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::format(ctx, format!("truncated header field `{field}`")))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R, ctx: &str, field: &str) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::format(ctx, format!("truncated header field `{field}`")))?;
    Ok(f64::from_le_bytes(b))
}
