//! 2D scalar raster fields and their on-disk format.
//!
//! A field is stored as two files sharing a base path: `<base>.f64` holds the
//! raw samples (little-endian f64, row-major, first axis = x) and
//! `<base>.json` a sidecar with the grid metadata. An 8-bit PGM export
//! (min-max scaled) is provided for visual artifacts.

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use ndarray::Array2;
use std::fs;
use std::io::Write;
use std::path::Path;

/// N x N scalar samples over a [`Grid2D`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    pub grid: Grid2D,
    pub data: Array2<f64>,
}

impl ScalarField2D {
    pub fn zeros(grid: &Grid2D) -> ScalarField2D {
        ScalarField2D { grid: grid.clone(), data: Array2::zeros((grid.n, grid.n)) }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct FieldSidecar {
    n: usize,
    rho: f64,
    center: [f64; 2],
    axis_order: String,
    units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

/// Write raw samples plus sidecar; `extra` is merged into the sidecar as a
/// free-form provenance object.
pub fn write_field_with(
    field: &ScalarField2D,
    base: &Path,
    extra: Option<serde_json::Value>,
) -> Result<()> {
    let side = FieldSidecar {
        n: field.grid.n,
        rho: field.grid.rho,
        center: field.grid.center,
        axis_order: "row-major, first axis x".to_string(),
        units: "dimensionless".to_string(),
        provenance: extra,
    };
    let mut raw = Vec::with_capacity(field.data.len() * 8);
    for v in field.data.iter() {
        raw.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(base.with_extension("f64"), raw)?;
    let json = serde_json::to_string_pretty(&side)
        .map_err(|e| Error::Format(format!("sidecar encode: {e}")))?;
    fs::write(base.with_extension("json"), json)?;
    Ok(())
}

pub fn write_field(field: &ScalarField2D, base: &Path) -> Result<()> {
    write_field_with(field, base, None)
}

/// Read a field written by [`write_field`]. The sidecar is validated against
/// the payload size before anything is returned.
pub fn read_field(base: &Path) -> Result<ScalarField2D> {
    let json = fs::read_to_string(base.with_extension("json"))?;
    let side: FieldSidecar =
        serde_json::from_str(&json).map_err(|e| Error::Format(format!("sidecar decode: {e}")))?;
    if side.n < 2 || !(side.rho > 0.0) {
        return Err(Error::Format(format!("sidecar has invalid grid (n={}, rho={})", side.n, side.rho)));
    }
    let raw = fs::read(base.with_extension("f64"))?;
    let expect = side.n * side.n * 8;
    if raw.len() != expect {
        return Err(Error::Format(format!(
            "payload length {} does not match sidecar n={} (expect {expect})",
            raw.len(),
            side.n
        )));
    }
    let mut data = Array2::<f64>::zeros((side.n, side.n));
    for (idx, chunk) in raw.chunks_exact(8).enumerate() {
        data[[idx / side.n, idx % side.n]] = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    let grid = Grid2D {
        n: side.n,
        rho: side.rho,
        center: side.center,
        dx: 2.0 * side.rho / (side.n as f64 - 1.0),
    };
    Ok(ScalarField2D { grid, data })
}

/// Export as binary PGM (P5), min-max scaled to 8 bits.
pub fn write_pgm(field: &ScalarField2D, path: &Path) -> Result<()> {
    let n = field.grid.n;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in field.data.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = fs::File::create(path)?;
    write!(out, "P5\n{n} {n}\n255\n")?;
    let mut bytes = Vec::with_capacity(n * n);
    // image rows run top to bottom: j decreasing, i left to right
    for j in (0..n).rev() {
        for i in 0..n {
            let g = ((field.data[[i, j]] - lo) / span * 255.0).round().clamp(0.0, 255.0);
            bytes.push(g as u8);
        }
    }
    out.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::phantom::{head_phantom, rasterize};

    #[test]
    fn round_trip_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("field");
        let grid = build_grid(65, 1.0, [0.0, 0.0]).unwrap();
        let f = rasterize(&head_phantom(), &grid).unwrap();
        write_field(&f, &base).unwrap();
        let g = read_field(&base).unwrap();
        assert_eq!(f.grid, g.grid);
        assert_eq!(f.data, g.data);
    }

    #[test]
    fn corrupt_sidecar_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("field");
        let grid = build_grid(8, 1.0, [0.0, 0.0]).unwrap();
        let f = ScalarField2D::zeros(&grid);
        write_field(&f, &base).unwrap();
        std::fs::write(base.with_extension("json"), "{not json").unwrap();
        assert!(matches!(read_field(&base), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("field");
        let grid = build_grid(8, 1.0, [0.0, 0.0]).unwrap();
        write_field(&ScalarField2D::zeros(&grid), &base).unwrap();
        std::fs::write(base.with_extension("f64"), [0u8; 16]).unwrap();
        assert!(matches!(read_field(&base), Err(Error::Format(_))));
    }

    #[test]
    fn constant_field_exports_uniform_gray() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flat.pgm");
        let grid = build_grid(16, 1.0, [0.0, 0.0]).unwrap();
        let mut f = ScalarField2D::zeros(&grid);
        f.data.fill(0.7);
        write_pgm(&f, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header_end = bytes.windows(4).position(|w| w == b"255\n").unwrap() + 4;
        let pix = &bytes[header_end..];
        assert_eq!(pix.len(), 256);
        assert!(pix.iter().all(|&b| b == pix[0]));
    }
}
