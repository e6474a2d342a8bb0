//! Sampled real-space and Fourier-space fields on a periodic grid.
//!
//! Lengths are in nanometres and wavevectors in rad/nm. Arrays are stored
//! row-major with `index = iy * nx + ix`. Spectral arrays use the natural
//! FFT ordering: bin `i` holds the signed frequency `i` for `i < n/2` and
//! `i - n` otherwise, so DC sits at index 0.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FddError, Result};

/// Pixel layout of a square-pixel periodic grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// Pixel pitch in nm.
    pub dx: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, dx: f64) -> Result<Self> {
        if nx < 16 || ny < 16 || nx % 2 != 0 || ny % 2 != 0 {
            return Err(FddError::InvalidGrid(format!(
                "nx, ny must be even and >= 16 (got {nx} x {ny})"
            )));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(FddError::InvalidGrid(format!("pixel pitch must be positive, got {dx}")));
        }
        Ok(Self { nx, ny, dx })
    }

    /// Square grid whose pixel pitch puts the OTF cutoff at `kc_dx` rad per pixel.
    pub fn for_cutoff(n: usize, cutoff: f64, kc_dx: f64) -> Result<Self> {
        Self::new(n, n, kc_dx / cutoff)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Frequency step along x (rad/nm).
    pub fn dkx(&self) -> f64 {
        2.0 * PI / (self.nx as f64 * self.dx)
    }

    pub fn dky(&self) -> f64 {
        2.0 * PI / (self.ny as f64 * self.dx)
    }

    /// Sample area A in nm².
    pub fn area(&self) -> f64 {
        self.nx as f64 * self.ny as f64 * self.dx * self.dx
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dx
    }

    /// Area of one spectral bin divided by (2π)², the inverse-transform measure.
    pub fn spectral_cell(&self) -> f64 {
        self.dkx() * self.dky() / (4.0 * PI * PI)
    }

    /// Largest |k| representable without aliasing along both axes.
    pub fn half_extent(&self) -> f64 {
        (self.nx as f64 / 2.0 * self.dkx()).min(self.ny as f64 / 2.0 * self.dky())
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// Storage index of a signed frequency bin, wrapping periodically.
    pub fn bin_index(&self, bx: i64, by: i64) -> usize {
        let ix = bx.rem_euclid(self.nx as i64) as usize;
        let iy = by.rem_euclid(self.ny as i64) as usize;
        self.index(ix, iy)
    }

    /// Signed frequency bin of a storage index.
    pub fn signed_bin(&self, index: usize) -> (i64, i64) {
        let ix = (index % self.nx) as i64;
        let iy = (index / self.nx) as i64;
        let sx = if ix < self.nx as i64 / 2 { ix } else { ix - self.nx as i64 };
        let sy = if iy < self.ny as i64 / 2 { iy } else { iy - self.ny as i64 };
        (sx, sy)
    }

    /// Wavevector (rad/nm) of a storage index.
    pub fn k_of(&self, index: usize) -> [f64; 2] {
        let (bx, by) = self.signed_bin(index);
        [bx as f64 * self.dkx(), by as f64 * self.dky()]
    }

    pub fn k_norm(&self, index: usize) -> f64 {
        let [kx, ky] = self.k_of(index);
        kx.hypot(ky)
    }

    /// Signed lattice bin of a wavevector; fails unless it is an integer
    /// multiple of the frequency step within 1e-6 of a bin.
    pub fn lattice_bin(&self, k: [f64; 2]) -> Result<(i64, i64)> {
        let fx = k[0] / self.dkx();
        let fy = k[1] / self.dky();
        let (bx, by) = (fx.round(), fy.round());
        if (fx - bx).abs() > 1e-6 || (fy - by).abs() > 1e-6 {
            return Err(FddError::OffLattice { kx: k[0], ky: k[1] });
        }
        Ok((bx as i64, by as i64))
    }

    /// Nearest lattice bin, without the integrality check.
    pub fn nearest_bin(&self, k: [f64; 2]) -> (i64, i64) {
        ((k[0] / self.dkx()).round() as i64, (k[1] / self.dky()).round() as i64)
    }

    /// Real-space position (nm) of a storage index; pixel (0, 0) sits at the origin.
    pub fn position(&self, index: usize) -> [f64; 2] {
        [(index % self.nx) as f64 * self.dx, (index / self.nx) as f64 * self.dx]
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self != other {
            return Err(FddError::GridMismatch(format!(
                "{what}: {}x{} @ {} nm vs {}x{} @ {} nm",
                self.nx, self.ny, self.dx, other.nx, other.ny, other.dx
            )));
        }
        Ok(())
    }
}

/// Real samples on a grid: an intensity, a photon density or an OTF.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(FddError::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nx,
                grid.ny
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self { grid, values }
    }

    /// ∬ field d²r.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(FddError::NonFinite { index }),
            None => Ok(()),
        }
    }

    /// Intensity fields must be nonnegative down to -1e-12.
    pub fn check_intensity(&self) -> Result<()> {
        self.check_finite()?;
        match self.values.iter().position(|&v| v < -1e-12) {
            Some(index) => Err(FddError::NegativeIntensity { index, value: self.values[index] }),
            None => Ok(()),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * factor).collect() }
    }
}

/// Complex spectrum on the FFT-ordered frequency lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
    /// Set when the spectrum is the transform of a real field.
    pub real_origin: bool,
}

impl SpectralField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>, real_origin: bool) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(FddError::GridMismatch(format!(
                "{} spectral values for a {}x{} grid",
                values.len(),
                grid.nx,
                grid.ny
            )));
        }
        Ok(Self { grid, values, real_origin })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()], real_origin: true }
    }

    pub fn at(&self, bx: i64, by: i64) -> Complex64 {
        self.values[self.grid.bin_index(bx, by)]
    }

    pub fn at_k(&self, k: [f64; 2]) -> Result<Complex64> {
        let (bx, by) = self.grid.lattice_bin(k)?;
        Ok(self.at(bx, by))
    }

    /// max |F(k) - F(-k)*| relative to max |F|.
    pub fn hermitian_deviation(&self) -> f64 {
        let scale = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.values.len() {
            let (bx, by) = self.grid.signed_bin(i);
            let partner = self.values[self.grid.bin_index(-bx, -by)];
            worst = worst.max((self.values[i] - partner.conj()).norm());
        }
        worst / scale
    }

    pub fn check_hermitian(&self, tolerance: f64) -> Result<()> {
        let deviation = self.hermitian_deviation();
        if deviation > tolerance {
            return Err(FddError::NotHermitian { deviation });
        }
        Ok(())
    }

    /// Σ|F|² dk²/(2π)², the spectral side of Parseval.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.spectral_cell()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_odd_or_small() {
        assert!(GridSpec::new(15, 16, 1.0).is_err());
        assert!(GridSpec::new(17, 16, 1.0).is_err());
        assert!(GridSpec::new(16, 16, 0.0).is_err());
        assert!(GridSpec::new(16, 32, 2.0).is_ok());
    }

    #[test]
    fn frequency_step_times_extent_is_two_pi() {
        let g = GridSpec::new(64, 32, 7.3).unwrap();
        assert!((g.dkx() * 64.0 * 7.3 - 2.0 * PI).abs() < 1e-12);
        assert!((g.dky() * 32.0 * 7.3 - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn signed_bins_round_trip() {
        let g = GridSpec::new(16, 32, 1.0).unwrap();
        for i in 0..g.len() {
            let (bx, by) = g.signed_bin(i);
            assert!((-8..8).contains(&bx) && (-16..16).contains(&by));
            assert_eq!(g.bin_index(bx, by), i);
        }
    }

    #[test]
    fn off_lattice_rejected() {
        let g = GridSpec::new(32, 32, 1.0).unwrap();
        assert!(g.lattice_bin([3.0 * g.dkx(), -2.0 * g.dky()]).is_ok());
        assert!(matches!(g.lattice_bin([3.5 * g.dkx(), 0.0]), Err(FddError::OffLattice { .. })));
    }
}
