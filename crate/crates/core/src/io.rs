//! File formats: raw fields with a JSON sidecar, PGM images, boundary
//! traces, CSV slices and ray polylines.
//!
//! * Field: `name.bin` holds `nx * ny` little-endian `f64` values in
//!   row-major order (row `j` is `y = y_min + j h`); `name.json` holds
//!   `{"nx", "ny", "bounds": [x_min, x_max, y_min, y_max]}`.
//! * Trace: one line of JSON header terminated by `\n`, followed by
//!   `(n_t + 1) * n_nodes` little-endian `f64` values, time-major.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid2D, Region, ScalarField};
use crate::rays::Branch;
use crate::wave::BoundaryTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub nx: usize,
    pub ny: usize,
    pub bounds: [f64; 4],
}

/// Sidecar path of a field file: the same name with a `.json` extension.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn write_f64s(w: &mut impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf).map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Write `field` to `path` and its sidecar; returns both paths.
pub fn write_field(path: &Path, field: &ScalarField) -> Result<[PathBuf; 2]> {
    let g = &field.grid;
    let header = FieldHeader { nx: g.nx, ny: g.ny, bounds: [g.x_min, g.x_max, g.y_min, g.y_max] };
    let side = sidecar_path(path);
    std::fs::write(&side, serde_json::to_string_pretty(&header)? + "\n")?;
    let mut w = BufWriter::new(File::create(path)?);
    write_f64s(&mut w, &field.data)?;
    w.flush()?;
    Ok([path.to_path_buf(), side])
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    let header: FieldHeader = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    let [x0, x1, y0, y1] = header.bounds;
    let grid = Grid2D::new(header.nx, header.ny, x0, x1, y0, y1)?;
    let mut r = BufReader::new(File::open(path)?);
    ScalarField::new(grid, read_f64s(&mut r, grid.len())?)
}

/// An 8- or 16-bit grayscale image; row 0 is the top row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub data: Vec<u16>,
}

impl PgmImage {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        if self.maxval < 256 {
            out.extend(self.data.iter().map(|&v| v as u8));
        } else {
            out.extend(self.data.iter().flat_map(|v| v.to_be_bytes()));
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut token = || -> Result<String> {
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Format("truncated PGM header".into()));
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        if token()? != "P5" {
            return Err(Error::Format("not a binary PGM (P5) file".into()));
        }
        let num = |s: String| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PGM header field '{s}'")));
        let width = num(token()?)?;
        let height = num(token()?)?;
        let maxval = num(token()?)?;
        if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
            return Err(Error::Format(format!("bad PGM dimensions {width}x{height}, maxval {maxval}")));
        }
        // exactly one whitespace byte separates the header from the raster
        let start = pos + 1;
        let n = width * height;
        let data: Vec<u16> = if maxval < 256 {
            let raw = bytes.get(start..start + n).ok_or_else(|| Error::Format("truncated PGM raster".into()))?;
            raw.iter().map(|&b| b as u16).collect()
        } else {
            let raw = bytes.get(start..start + 2 * n).ok_or_else(|| Error::Format("truncated PGM raster".into()))?;
            raw.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
        };
        if data.iter().any(|&v| v as usize > maxval) {
            return Err(Error::Format("PGM sample exceeds maxval".into()));
        }
        Ok(Self { width, height, maxval: maxval as u16, data })
    }
}

pub fn read_pgm(path: &Path) -> Result<PgmImage> {
    PgmImage::decode(&std::fs::read(path)?)
}

pub fn write_pgm_image(path: &Path, img: &PgmImage) -> Result<()> {
    std::fs::write(path, img.encode())?;
    Ok(())
}

/// 8-bit image of `field` over `region` with linear min-max scaling; the
/// top row is the largest `y`.
pub fn field_to_pgm(field: &ScalarField, region: &Region) -> PgmImage {
    let lo = region.nodes().map(|(i, j)| field.at(i, j)).fold(f64::INFINITY, f64::min);
    let hi = region.nodes().map(|(i, j)| field.at(i, j)).fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let (w, h) = (region.width(), region.height());
    let mut data = Vec::with_capacity(w * h);
    for j in (region.j0..=region.j1).rev() {
        for i in region.i0..=region.i1 {
            let v = if span > 0.0 { (field.at(i, j) - lo) / span } else { 0.0 };
            data.push((v * 255.0).round() as u16);
        }
    }
    PgmImage { width: w, height: h, maxval: 255, data }
}

/// PGM export of the whole grid.
pub fn write_pgm(path: &Path, field: &ScalarField) -> Result<()> {
    write_pgm_image(path, &field_to_pgm(field, &Region::full(&field.grid)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceHeader {
    n_t: usize,
    dt: f64,
    n_nodes: usize,
    nodes: Vec<(usize, usize)>,
    coords: Vec<[f64; 2]>,
    mask: Vec<f64>,
}

pub fn write_trace(path: &Path, trace: &BoundaryTrace) -> Result<()> {
    let header = TraceHeader {
        n_t: trace.n_t,
        dt: trace.dt,
        n_nodes: trace.n_nodes(),
        nodes: trace.nodes.clone(),
        coords: trace.coords.clone(),
        mask: trace.mask.clone(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    write_f64s(&mut w, &trace.values)?;
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<BoundaryTrace> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    let header: TraceHeader = serde_json::from_slice(&line)?;
    if header.nodes.len() != header.n_nodes || header.coords.len() != header.n_nodes || header.mask.len() != header.n_nodes
    {
        return Err(Error::Format("trace header lists inconsistent node counts".into()));
    }
    let values = read_f64s(&mut r, (header.n_t + 1) * header.n_nodes)?;
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(k));
    }
    let mut trace = BoundaryTrace {
        n_t: header.n_t,
        dt: header.dt,
        nodes: header.nodes,
        coords: header.coords,
        mask: vec![1.0; header.n_nodes],
        values,
    };
    trace.set_mask(header.mask)?;
    Ok(trace)
}

/// A line through the grid for slice plots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slice {
    /// Varying `x` along the grid row nearest to this `y`.
    X(f64),
    /// Varying `y` along the grid column nearest to this `x`.
    Y(f64),
}

/// CSV with one coordinate column and one column per named field.
pub fn slices_csv(fields: &[(&str, &ScalarField)], slice: Slice) -> Result<String> {
    let Some((_, first)) = fields.first() else {
        return Err(Error::InvalidParameter("no fields to slice".into()));
    };
    let g = first.grid;
    for (_, f) in fields {
        f.check_grid(&g)?;
    }
    let mut out = String::new();
    let (coord_name, n) = match slice {
        Slice::X(_) => ("x", g.nx),
        Slice::Y(_) => ("y", g.ny),
    };
    out.push_str(coord_name);
    for (name, _) in fields {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for k in 0..n {
        let (i, j, coord) = match slice {
            Slice::X(y) => (k, g.nearest([g.x_min, y]).1, g.x(k)),
            Slice::Y(x) => (g.nearest([x, g.y_min]).0, k, g.y(k)),
        };
        out.push_str(&format!("{coord}"));
        for (_, f) in fields {
            out.push_str(&format!(",{}", f.at(i, j)));
        }
        out.push('\n');
    }
    Ok(out)
}

/// CSV polylines `branch,index,x,y` of traced ray branches.
pub fn rays_csv(branches: &[Branch]) -> String {
    let mut out = String::from("branch,index,x,y\n");
    for (b, branch) in branches.iter().enumerate() {
        for (k, p) in branch.path.iter().enumerate() {
            out.push_str(&format!("{b},{k},{},{}\n", p[0], p[1]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid2D::default_box(17);
        let f = ScalarField::from_fn(g, |x, y| x * 3.0 - y * y + 0.1);
        let p = dir.path().join("f.bin");
        let [bin, side] = write_field(&p, &f).unwrap();
        assert_eq!(std::fs::metadata(&bin).unwrap().len(), 17 * 17 * 8);
        let header: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(side).unwrap()).unwrap();
        assert_eq!(header["nx"], 17);
        assert_eq!(header["bounds"][0], -1.5);
        assert_eq!(read_field(&p).unwrap(), f);
        // first value is the lower-left node
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(f64::from_le_bytes(bytes[..8].try_into().unwrap()), f.at(0, 0));
    }

    #[test]
    fn pgm_round_trip_and_scaling() {
        let g = Grid2D::default_box(5);
        let f = ScalarField::from_fn(g, |x, _| x);
        let img = field_to_pgm(&f, &Region::full(&g));
        assert_eq!(img.data[0], 0);
        assert_eq!(img.data[4], 255);
        let back = PgmImage::decode(&img.encode()).unwrap();
        assert_eq!(back, img);
        let wide = PgmImage { width: 2, height: 1, maxval: 1000, data: vec![3, 999] };
        assert_eq!(PgmImage::decode(&wide.encode()).unwrap(), wide);
        let commented = b"P5\n# made by hand\n2 1\n255\n\x00\xff";
        assert_eq!(PgmImage::decode(commented).unwrap().data, vec![0, 255]);
        assert!(PgmImage::decode(b"P2\n1 1\n255\n0").is_err());
        assert!(PgmImage::decode(b"P5\n4 4\n255\n\x00").is_err());
        // a constant field maps to black rather than dividing by zero
        let flat = field_to_pgm(&ScalarField::constant(g, 2.0), &Region::full(&g));
        assert!(flat.data.iter().all(|&v| v == 0));
    }

    #[test]
    fn trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid2D::default_box(21);
        let r = Region::omega(&g).unwrap();
        let mut t = BoundaryTrace::zeros(&g, &r, 7, 0.05);
        for (k, v) in t.values.iter_mut().enumerate() {
            *v = k as f64 * 0.5 - 3.0;
        }
        t.set_mask(t.coords.iter().map(|p| if p[0] > 0.0 { 1.0 } else { 0.25 }).collect()).unwrap();
        let p = dir.path().join("t.trace");
        write_trace(&p, &t).unwrap();
        assert_eq!(read_trace(&p).unwrap(), t);
        let bytes = std::fs::read(&p).unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(bytes.len() - nl - 1, 8 * t.values.len());
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_trace(&p).is_err());
    }

    #[test]
    fn slices_and_rays() {
        let g = Grid2D::default_box(5);
        let f = ScalarField::from_fn(g, |x, y| x + 10.0 * y);
        let csv = slices_csv(&[("truth", &f), ("twice", &f.scaled(2.0))], Slice::X(0.0)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,truth,twice");
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1], "-1.5,-1.5,-3");
        let csv = slices_csv(&[("f", &f)], Slice::Y(0.75)).unwrap();
        assert_eq!(csv.lines().nth(1).unwrap(), "-1.5,-14.25");
        assert!(slices_csv(&[], Slice::X(0.0)).is_err());
        assert_eq!(rays_csv(&[]), "branch,index,x,y\n");
    }
}
