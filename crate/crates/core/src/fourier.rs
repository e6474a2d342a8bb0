//! Discrete transforms scaled to the continuous Fourier convention
//! F(k) = ∬ f(r) e^{-ik·r} d²r and f(r) = (2π)^{-2} ∬ F(k) e^{ik·r} d²k.
//!
//! The forward sum is multiplied by dx² and the inverse sum by dk²/(2π)², which
//! makes the pair exact inverses and preserves Parseval under the same scaling.

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::Result;
use crate::field::{GridSpec, RealField, SpectralField};

/// Unscaled 2D FFT over a row-major `nx * ny` buffer.
pub fn fft2_in_place(data: &mut [Complex64], nx: usize, ny: usize, direction: FftDirection) {
    debug_assert_eq!(data.len(), nx * ny);
    let mut planner = FftPlanner::<f64>::new();
    let row = planner.plan_fft(nx, direction);
    row.process(data);

    let col = planner.plan_fft(ny, direction);
    let mut column = vec![Complex64::new(0.0, 0.0); ny];
    for ix in 0..nx {
        for iy in 0..ny {
            column[iy] = data[iy * nx + ix];
        }
        col.process(&mut column);
        for iy in 0..ny {
            data[iy * nx + ix] = column[iy];
        }
    }
}

pub fn fft_forward(field: &RealField) -> Result<SpectralField> {
    field.check_finite()?;
    let grid = field.grid;
    let mut data: Vec<Complex64> = field.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_in_place(&mut data, grid.nx, grid.ny, FftDirection::Forward);
    let scale = grid.cell_area();
    for v in &mut data {
        *v *= scale;
    }
    SpectralField::new(grid, data, true)
}

/// Inverse transform keeping the complex result.
pub fn fft_inverse_complex(spectrum: &SpectralField) -> Vec<Complex64> {
    let grid = spectrum.grid;
    let mut data = spectrum.values.clone();
    fft2_in_place(&mut data, grid.nx, grid.ny, FftDirection::Inverse);
    let scale = grid.spectral_cell();
    for v in &mut data {
        *v *= scale;
    }
    data
}

/// Inverse transform of a spectrum known to come from a real field; the
/// imaginary residue is discarded.
pub fn fft_inverse(spectrum: &SpectralField) -> RealField {
    let values = fft_inverse_complex(spectrum).into_iter().map(|v| v.re).collect();
    RealField { grid: spectrum.grid, values }
}

/// Multiply a spectrum by a real transfer function bin by bin.
pub fn apply_transfer(spectrum: &SpectralField, transfer: &[f64], scale: f64) -> SpectralField {
    let values = spectrum
        .values
        .iter()
        .zip(transfer)
        .map(|(v, t)| v * (t * scale))
        .collect();
    SpectralField { grid: spectrum.grid, values, real_origin: spectrum.real_origin }
}

/// Reorder an FFT-ordered array so that the zero frequency sits at (nx/2, ny/2).
pub fn centered<T: Copy>(grid: &GridSpec, values: &[T]) -> Vec<T> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut out = Vec::with_capacity(values.len());
    for iy in 0..ny {
        let sy = (iy + ny / 2) % ny;
        for ix in 0..nx {
            let sx = (ix + nx / 2) % nx;
            out.push(values[sy * nx + sx]);
        }
    }
    out
}
