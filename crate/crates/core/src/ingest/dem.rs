use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{open, IngestError};
use crate::geodesy::GeoPoint;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemError {
    #[error("point ({lat}, {lon}) outside elevation grid coverage")]
    OutOfCoverage { lat: f64, lon: f64 },
}

/// Elevation raster on a geographic grid. `xll`/`yll` are the longitude and
/// latitude of the lower-left corner and `cell_size` is in degrees. Values
/// are stored row-major starting with the northernmost row, as in the ESRI
/// ASCII layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemGrid {
    pub ncols: usize,
    pub nrows: usize,
    pub xll: f64,
    pub yll: f64,
    pub cell_size: f64,
    pub nodata: f64,
    pub values: Vec<f64>,
}

impl DemGrid {
    /// Builds a grid by evaluating `f` at every cell center.
    pub fn from_fn(
        ncols: usize,
        nrows: usize,
        lower_left: GeoPoint,
        cell_size: f64,
        f: impl Fn(GeoPoint) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(ncols * nrows);
        for r in 0..nrows {
            for c in 0..ncols {
                values.push(f(Self::center_of(lower_left, cell_size, nrows, r, c)));
            }
        }
        Self { ncols, nrows, xll: lower_left.lon, yll: lower_left.lat, cell_size, nodata: -9999.0, values }
    }

    fn center_of(ll: GeoPoint, cs: f64, nrows: usize, row: usize, col: usize) -> GeoPoint {
        GeoPoint { lat: ll.lat + (nrows - 1 - row) as f64 * cs + cs / 2.0, lon: ll.lon + col as f64 * cs + cs / 2.0 }
    }

    /// Geographic center of cell (`row` from the top, `col` from the left).
    pub fn cell_center(&self, row: usize, col: usize) -> GeoPoint {
        Self::center_of(GeoPoint { lat: self.yll, lon: self.xll }, self.cell_size, self.nrows, row, col)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.ncols + col] = value;
    }

    fn is_nodata(&self, v: f64) -> bool {
        v == self.nodata || !v.is_finite()
    }
}

/// Bilinear elevation at `point` from the four surrounding cell centers.
///
/// Points between the outermost cell centers and the grid edge use the edge
/// values. Returns `Ok(None)` when any contributing cell is nodata.
pub fn sample_dem(dem: &DemGrid, point: GeoPoint) -> Result<Option<f64>, DemError> {
    let out = || DemError::OutOfCoverage { lat: point.lat, lon: point.lon };
    let fx = (point.lon - dem.xll) / dem.cell_size;
    let fy = (point.lat - dem.yll) / dem.cell_size;
    if !fx.is_finite() || !fy.is_finite() || fx < 0.0 || fy < 0.0 || fx > dem.ncols as f64 || fy > dem.nrows as f64 {
        return Err(out());
    }
    // continuous index of cell centers, measured from the bottom row
    let cx = (fx - 0.5).clamp(0.0, (dem.ncols - 1) as f64);
    let cy = (fy - 0.5).clamp(0.0, (dem.nrows - 1) as f64);
    let c0 = (cx.floor() as usize).min(dem.ncols.saturating_sub(2));
    let b0 = (cy.floor() as usize).min(dem.nrows.saturating_sub(2));
    let c1 = (c0 + 1).min(dem.ncols - 1);
    let b1 = (b0 + 1).min(dem.nrows - 1);
    let tx = cx - c0 as f64;
    let ty = cy - b0 as f64;
    let row = |b: usize| dem.nrows - 1 - b;
    let corners = [dem.get(row(b0), c0), dem.get(row(b0), c1), dem.get(row(b1), c0), dem.get(row(b1), c1)];
    // only corners with nonzero weight matter
    let weights = [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty];
    if corners.iter().zip(weights).any(|(v, w)| w != 0.0 && dem.is_nodata(*v)) {
        return Ok(None);
    }
    // interpolation form that is exact on constant cells
    let lerp = |a: f64, b: f64, t: f64| if t == 0.0 { a } else if t == 1.0 { b } else { a + t * (b - a) };
    let bottom = lerp(corners[0], corners[1], tx);
    let top = lerp(corners[2], corners[3], tx);
    Ok(Some(lerp(bottom, top, ty)))
}

pub fn read_dem(path: &Path) -> Result<DemGrid, IngestError> {
    parse_dem(open(path)?, &path.display().to_string())
}

/// Parses an ESRI ASCII grid. Both `xllcorner`/`yllcorner` and
/// `xllcenter`/`yllcenter` headers are accepted.
pub fn parse_dem<R: Read>(reader: R, file: &str) -> Result<DemGrid, IngestError> {
    let reader = BufReader::new(reader);
    let mut ncols = None;
    let mut nrows = None;
    let mut x = None;
    let mut y = None;
    let mut centered = false;
    let mut cell = None;
    let mut nodata = -9999.0;
    let mut values = Vec::new();
    let mut in_header = true;

    for (i, line) in reader.lines().enumerate() {
        let lineno = i as u64 + 1;
        let line = line.map_err(|e| IngestError::parse(file, lineno, "-", e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let first = parts.next().unwrap();
        if in_header && first.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
            let key = first.to_ascii_lowercase();
            let raw = parts.next().ok_or_else(|| IngestError::parse(file, lineno, &key, "missing value"))?;
            let num: f64 = raw
                .parse()
                .map_err(|_| IngestError::parse(file, lineno, &key, format!("not a number: {raw:?}")))?;
            match key.as_str() {
                "ncols" => ncols = Some(num as usize),
                "nrows" => nrows = Some(num as usize),
                "xllcorner" => x = Some(num),
                "yllcorner" => y = Some(num),
                "xllcenter" => {
                    x = Some(num);
                    centered = true;
                }
                "yllcenter" => {
                    y = Some(num);
                    centered = true;
                }
                "cellsize" => cell = Some(num),
                "nodata_value" => nodata = num,
                _ => return Err(IngestError::parse(file, lineno, &key, "unknown header key")),
            }
            continue;
        }
        in_header = false;
        for tok in trimmed.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| IngestError::parse(file, lineno, "value", format!("not a number: {tok:?}")))?;
            values.push(v);
        }
    }

    let need = |v: Option<f64>, k: &str| v.ok_or_else(|| IngestError::parse(file, 1, k, "missing header"));
    let ncols = ncols.ok_or_else(|| IngestError::parse(file, 1, "ncols", "missing header"))?;
    let nrows = nrows.ok_or_else(|| IngestError::parse(file, 1, "nrows", "missing header"))?;
    let cell_size = need(cell, "cellsize")?;
    let mut xll = need(x, "xllcorner")?;
    let mut yll = need(y, "yllcorner")?;
    if ncols == 0 || nrows == 0 {
        return Err(IngestError::parse(file, 1, "ncols", "grid must have at least one row and column"));
    }
    if cell_size <= 0.0 || !cell_size.is_finite() {
        return Err(IngestError::parse(file, 1, "cellsize", "cell size must be positive"));
    }
    if centered {
        xll -= cell_size / 2.0;
        yll -= cell_size / 2.0;
    }
    if values.len() != ncols * nrows {
        return Err(IngestError::parse(
            file,
            1,
            "values",
            format!("expected {} values, found {}", ncols * nrows, values.len()),
        ));
    }
    Ok(DemGrid { ncols, nrows, xll, yll, cell_size, nodata, values })
}

pub fn write_dem<W: Write>(mut w: W, dem: &DemGrid) -> std::io::Result<()> {
    writeln!(w, "ncols {}", dem.ncols)?;
    writeln!(w, "nrows {}", dem.nrows)?;
    writeln!(w, "xllcorner {}", dem.xll)?;
    writeln!(w, "yllcorner {}", dem.yll)?;
    writeln!(w, "cellsize {}", dem.cell_size)?;
    writeln!(w, "NODATA_value {}", dem.nodata)?;
    for row in dem.values.chunks(dem.ncols) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}
