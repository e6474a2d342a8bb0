//! Field files (raw little-endian f32 plus a JSON sidecar), 16-bit PGM
//! previews and acquisition persistence.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{FddError, Result};
use crate::field::{GridSpec, RealField};
use crate::fourier::centered;
use crate::simulate::{AcquisitionConfig, RawImageSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Storage order as computed (pixel (0, 0) first, or DC first for spectra).
    Natural,
    /// Spectral arrays shifted so that DC sits at (nx/2, ny/2).
    Centered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub nx: usize,
    pub ny: usize,
    pub dx_nm: f64,
    pub layout: Layout,
    pub units: String,
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Write `<path>` (f32 LE, row-major) and `<path>.json`.
pub fn write_field(path: &Path, field: &RealField, layout: Layout, units: &str) -> Result<()> {
    let values = match layout {
        Layout::Natural => field.values.clone(),
        Layout::Centered => centered(&field.grid, &field.values),
    };
    let mut bytes = Vec::with_capacity(4 * values.len());
    for v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    let header = FieldHeader {
        nx: field.grid.nx,
        ny: field.grid.ny,
        dx_nm: field.grid.dx,
        layout,
        units: units.to_string(),
    };
    fs::write(sidecar(path), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

/// Read a field back into natural order.
pub fn read_field(path: &Path) -> Result<RealField> {
    let header: FieldHeader = serde_json::from_slice(&fs::read(sidecar(path))?)?;
    let grid = GridSpec::new(header.nx, header.ny, header.dx_nm)?;
    let bytes = fs::read(path)?;
    if bytes.len() != 4 * grid.len() {
        return Err(FddError::MalformedField(format!(
            "{}: {} bytes for a {}x{} grid",
            path.display(),
            bytes.len(),
            grid.nx,
            grid.ny
        )));
    }
    let stored: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let values = match header.layout {
        Layout::Natural => stored,
        Layout::Centered => {
            // centering is its own inverse for even sizes
            centered(&grid, &stored)
        }
    };
    RealField::new(grid, values)
}

/// 16-bit binary PGM scaled linearly from min to max.
pub fn write_pgm16(path: &Path, values: &[f64], nx: usize, ny: usize) -> Result<()> {
    if values.len() != nx * ny {
        return Err(FddError::GridMismatch("preview size mismatch".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = Vec::with_capacity(2 * values.len() + 32);
    write!(out, "P5\n{nx} {ny}\n65535\n")?;
    for v in values {
        let q = (((v - lo) / span) * 65535.0).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawManifest {
    pub config: AcquisitionConfig,
    pub inner_ratio: f64,
    pub trial: u64,
    pub totals: Vec<f64>,
    pub clipped: usize,
    pub frames: Vec<String>,
}

/// Six `frame_<l>.f32` files plus `raw_manifest.json` under `dir`.
pub fn save_raw_image_set(dir: &Path, raw: &RawImageSet, inner_ratio: f64) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut names = Vec::new();
    for (l, frame) in raw.frames.iter().enumerate() {
        let name = format!("frame_{l}.f32");
        let path = dir.join(&name);
        write_field(&path, frame, Layout::Natural, "photons/nm^2")?;
        written.push(path.clone());
        written.push(sidecar(&path));
        names.push(name);
    }
    let manifest = RawManifest {
        config: raw.config,
        inner_ratio,
        trial: raw.trial,
        totals: raw.totals.clone(),
        clipped: raw.clipped,
        frames: names,
    };
    let path = dir.join("raw_manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    written.push(path);
    Ok(written)
}

pub fn load_raw_image_set(dir: &Path) -> Result<(RawImageSet, f64)> {
    let manifest: RawManifest = serde_json::from_slice(&fs::read(dir.join("raw_manifest.json"))?)?;
    let frames = manifest
        .frames
        .iter()
        .map(|n| read_field(&dir.join(n)))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        RawImageSet {
            frames,
            totals: manifest.totals,
            config: manifest.config,
            trial: manifest.trial,
            clipped: manifest.clipped,
        },
        manifest.inner_ratio,
    ))
}
