//! Sample intensity as a Fourier series
//! f(r) = a0 + Σ a_k cos(k·r) + b_k sin(k·r) over the nonredundant half-plane,
//! plus the resolution-chart generator.

use std::collections::HashSet;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FddError, Result};
use crate::field::{GridSpec, RealField, SpectralField};
use crate::fourier::{fft_forward, fft_inverse};

/// One cos/sin pair of the series at wavevector `k` (rad/nm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: [f64; 2],
    pub a: f64,
    pub b: f64,
}

/// Which coefficient of a mode a parameter refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    Cos,
    Sin,
}

impl std::fmt::Display for Quadrature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Quadrature::Cos => f.write_str("cos"),
            Quadrature::Sin => f.write_str("sin"),
        }
    }
}

/// True for k_x > 0, or k_x = 0 with k_y > 0.
pub fn in_half_plane(bx: i64, by: i64) -> bool {
    bx > 0 || (bx == 0 && by > 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpectrum {
    /// Mean intensity, 1/area for a unit-integral sample.
    pub a0: f64,
    pub modes: Vec<Mode>,
}

/// Result of synthesis. `min_value` below zero flags a sample that is not a
/// physical intensity; estimation still proceeds on it.
#[derive(Debug, Clone)]
pub struct Synthesized {
    pub field: RealField,
    pub min_value: f64,
    pub negative: bool,
}

impl SampleSpectrum {
    pub fn new(a0: f64, modes: Vec<Mode>) -> Result<Self> {
        if !(a0 > 0.0 && a0.is_finite()) {
            return Err(FddError::InvalidParameter(format!("a0 must be positive, got {a0}")));
        }
        let mut seen = HashSet::new();
        for m in &modes {
            let (kx, ky) = (m.k[0], m.k[1]);
            if !(kx > 0.0 || (kx == 0.0 && ky > 0.0)) {
                return Err(FddError::NotHalfPlane { kx, ky });
            }
            if !seen.insert((kx.to_bits(), ky.to_bits())) {
                return Err(FddError::DuplicateMode { kx, ky });
            }
        }
        Ok(Self { a0, modes })
    }

    /// Unit-integral uniform sample on `grid`.
    pub fn uniform(grid: &GridSpec) -> Self {
        Self { a0: 1.0 / grid.area(), modes: Vec::new() }
    }

    /// Build from lattice bins and amplitudes relative to a0, normalized to `grid`.
    pub fn from_relative_bins(grid: &GridSpec, modes: &[((i64, i64), f64, f64)]) -> Result<Self> {
        let a0 = 1.0 / grid.area();
        let modes = modes
            .iter()
            .map(|&((bx, by), a, b)| Mode {
                k: [bx as f64 * grid.dkx(), by as f64 * grid.dky()],
                a: a * a0,
                b: b * a0,
            })
            .collect();
        Self::new(a0, modes)
    }

    /// Largest |k| among the modes.
    pub fn max_k(&self) -> f64 {
        self.modes.iter().map(|m| m.k[0].hypot(m.k[1])).fold(0.0, f64::max)
    }

    pub fn mode_at(&self, k: [f64; 2], tolerance: f64) -> Option<&Mode> {
        self.modes
            .iter()
            .find(|m| (m.k[0] - k[0]).abs() <= tolerance && (m.k[1] - k[1]).abs() <= tolerance)
    }

    /// Continuous-convention spectrum of the synthesized field:
    /// F(0) = a0·A, F(k) = A(a - ib)/2, F(-k) = F(k)*.
    pub fn to_spectrum(&self, grid: &GridSpec) -> Result<SpectralField> {
        let area = grid.area();
        let mut spectrum = SpectralField::zeros(*grid);
        spectrum.values[0] = Complex64::new(self.a0 * area, 0.0);
        let mut seen = HashSet::new();
        for m in &self.modes {
            let (bx, by) = grid.lattice_bin(m.k)?;
            if !in_half_plane(bx, by) {
                return Err(FddError::NotHalfPlane { kx: m.k[0], ky: m.k[1] });
            }
            if 2 * bx.abs() >= grid.nx as i64 || 2 * by.abs() >= grid.ny as i64 {
                return Err(FddError::InvalidParameter(format!(
                    "mode bin ({bx}, {by}) reaches the Nyquist line"
                )));
            }
            if !seen.insert((bx, by)) {
                return Err(FddError::DuplicateMode { kx: m.k[0], ky: m.k[1] });
            }
            let value = Complex64::new(m.a, -m.b) * (area / 2.0);
            spectrum.values[grid.bin_index(bx, by)] = value;
            spectrum.values[grid.bin_index(-bx, -by)] = value.conj();
        }
        Ok(spectrum)
    }

    /// Recover the series from a spectrum. Bins on the Nyquist lines are not
    /// representable by a cos/sin pair and are dropped.
    pub fn from_spectrum(spectrum: &SpectralField) -> Result<Self> {
        let grid = spectrum.grid;
        spectrum.check_hermitian(1e-10)?;
        let integral = spectrum.values[0].re;
        if (integral - 1.0).abs() > 1e-6 {
            return Err(FddError::NotNormalized { integral, tolerance: 1e-6 });
        }
        let area = grid.area();
        let mut modes = Vec::new();
        for i in 0..grid.len() {
            let (bx, by) = grid.signed_bin(i);
            if !in_half_plane(bx, by) || 2 * bx.abs() >= grid.nx as i64 || 2 * by.abs() >= grid.ny as i64 {
                continue;
            }
            let v = spectrum.values[i];
            modes.push(Mode {
                k: [bx as f64 * grid.dkx(), by as f64 * grid.dky()],
                a: 2.0 / area * v.re,
                b: -2.0 / area * v.im,
            });
        }
        Ok(Self { a0: integral / area, modes })
    }
}

/// f(r) = a0 + Σ a cos(k·r) + b sin(k·r) sampled on `grid`.
pub fn synthesize_sample(spec: &SampleSpectrum, grid: &GridSpec) -> Result<Synthesized> {
    let integral = spec.a0 * grid.area();
    if (integral - 1.0).abs() > 1e-9 {
        return Err(FddError::NotNormalized { integral, tolerance: 1e-9 });
    }
    let spectrum = spec.to_spectrum(grid)?;
    let field = fft_inverse(&spectrum);
    let min_value = field.min();
    let negative = min_value < -1e-12 * field.max().abs().max(spec.a0);
    if negative {
        log::warn!("synthesized sample goes negative (min {min_value:e})");
    }
    Ok(Synthesized { field, min_value, negative })
}

/// Inverse of [`synthesize_sample`] for a unit-integral field.
pub fn analyze_sample(field: &RealField) -> Result<SampleSpectrum> {
    SampleSpectrum::from_spectrum(&fft_forward(field)?)
}

/// Direction of the bars of a resolution chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Bars parallel to y; the modulation runs along x.
    #[default]
    Vertical,
    /// Bars parallel to x.
    Horizontal,
}

/// Intensity of the chart background relative to a bar.
pub const CHART_BACKGROUND: f64 = 0.02;

/// Convert a line frequency (lines/mm) to a wavevector magnitude in rad/nm.
pub fn lines_per_mm_to_k(lines_per_mm: f64) -> f64 {
    2.0 * std::f64::consts::PI * lines_per_mm * 1e-6
}

pub fn k_to_lines_per_mm(k: f64) -> f64 {
    k / (2.0 * std::f64::consts::PI) * 1e6
}

/// `n_lines` bright bars with 50% duty cycle at the given line frequency,
/// centered on the grid over a dim background, normalized to unit integral.
/// Pixels integrate the bar profile over their area.
pub fn make_test_chart(
    lines_per_mm: f64,
    n_lines: usize,
    grid: &GridSpec,
    orientation: Orientation,
) -> Result<RealField> {
    if n_lines == 0 {
        return Ok(RealField::constant(*grid, 1.0 / grid.area()));
    }
    if !(lines_per_mm > 0.0 && lines_per_mm.is_finite()) {
        return Err(FddError::InvalidParameter(format!("line frequency must be positive, got {lines_per_mm}")));
    }
    let nyquist = k_to_lines_per_mm(std::f64::consts::PI / grid.dx);
    if lines_per_mm >= nyquist {
        return Err(FddError::AboveNyquist { lines_per_mm, nyquist_lines_per_mm: nyquist });
    }
    let pitch = 1e6 / lines_per_mm;
    let width = pitch / 2.0;
    let across_extent = (n_lines as f64 - 0.5) * pitch;
    let along_extent = n_lines as f64 * pitch;
    let (len_x, len_y) = (grid.nx as f64 * grid.dx, grid.ny as f64 * grid.dx);
    let (ext_x, ext_y) = match orientation {
        Orientation::Vertical => (across_extent, along_extent),
        Orientation::Horizontal => (along_extent, across_extent),
    };
    if ext_x >= len_x || ext_y >= len_y {
        return Err(FddError::InvalidParameter(format!(
            "chart {ext_x:.0} x {ext_y:.0} nm does not fit a {len_x:.0} x {len_y:.0} nm grid"
        )));
    }
    let cx0 = (len_x - ext_x) / 2.0;
    let cy0 = (len_y - ext_y) / 2.0;

    // Overlap of pixel [c - dx/2, c + dx/2) with [lo, hi), as a fraction of dx.
    let overlap = |c: f64, lo: f64, hi: f64| -> f64 {
        let a = (c - grid.dx / 2.0).max(lo);
        let b = (c + grid.dx / 2.0).min(hi);
        ((b - a) / grid.dx).max(0.0)
    };
    let across_cover = |c: f64, origin: f64| -> f64 {
        (0..n_lines)
            .map(|j| {
                let lo = origin + j as f64 * pitch;
                overlap(c, lo, lo + width)
            })
            .sum()
    };

    let mut values = Vec::with_capacity(grid.len());
    for iy in 0..grid.ny {
        let y = iy as f64 * grid.dx;
        for ix in 0..grid.nx {
            let x = ix as f64 * grid.dx;
            let cover = match orientation {
                Orientation::Vertical => across_cover(x, cx0) * overlap(y, cy0, cy0 + ext_y),
                Orientation::Horizontal => across_cover(y, cy0) * overlap(x, cx0, cx0 + ext_x),
            };
            values.push(CHART_BACKGROUND + (1.0 - CHART_BACKGROUND) * cover);
        }
    }
    let mut field = RealField::new(*grid, values)?;
    let integral = field.integral();
    field.values.iter_mut().for_each(|v| *v /= integral);
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::OpticsSpec;

    fn grid() -> GridSpec {
        GridSpec::new(64, 48, 20.0).unwrap()
    }

    fn direct_sum(spec: &SampleSpectrum, r: [f64; 2]) -> f64 {
        spec.a0
            + spec
                .modes
                .iter()
                .map(|m| {
                    let p = m.k[0] * r[0] + m.k[1] * r[1];
                    m.a * p.cos() + m.b * p.sin()
                })
                .sum::<f64>()
    }

    #[test]
    fn no_modes_is_uniform() {
        let g = grid();
        let s = synthesize_sample(&SampleSpectrum::uniform(&g), &g).unwrap();
        assert!(s.field.values.iter().all(|&v| (v * g.area() - 1.0).abs() < 1e-12));
        assert!(!s.negative);
    }

    #[test]
    fn single_cosine_extrema() {
        let g = grid();
        let spec = SampleSpectrum::from_relative_bins(&g, &[((4, 0), 0.5, 0.0)]).unwrap();
        let s = synthesize_sample(&spec, &g).unwrap();
        let a0 = spec.a0;
        assert!((s.field.min() - a0 / 2.0).abs() < 1e-12 * a0 * 1e3);
        assert!((s.field.max() - 1.5 * a0).abs() < 1e-12 * a0 * 1e3);
    }

    #[test]
    fn synthesis_matches_direct_summation() {
        let g = grid();
        let spec = SampleSpectrum::from_relative_bins(
            &g,
            &[((3, -2), 0.2, 0.1), ((0, 5), -0.1, 0.3), ((7, 4), 0.05, -0.2)],
        )
        .unwrap();
        let s = synthesize_sample(&spec, &g).unwrap();
        for i in (0..g.len()).step_by(37) {
            let expect = direct_sum(&spec, g.position(i));
            assert!((s.field.values[i] - expect).abs() < 1e-9 * spec.a0);
        }
    }

    #[test]
    fn two_mode_round_trip() {
        let g = grid();
        let spec = SampleSpectrum::from_relative_bins(&g, &[((2, 1), 0.3, -0.2), ((0, 3), 0.0, 0.4)]).unwrap();
        let field = synthesize_sample(&spec, &g).unwrap().field;
        let back = analyze_sample(&field).unwrap();
        assert!((back.a0 - spec.a0).abs() < 1e-9 * spec.a0);
        for m in &back.modes {
            let expected = spec.mode_at(m.k, 1e-12).copied().unwrap_or(Mode { k: m.k, a: 0.0, b: 0.0 });
            assert!((m.a - expected.a).abs() < 1e-9 * spec.a0, "a at {:?}", m.k);
            assert!((m.b - expected.b).abs() < 1e-9 * spec.a0, "b at {:?}", m.k);
        }
    }

    #[test]
    fn uniform_field_analyzes_to_dc() {
        let g = grid();
        let f = RealField::constant(g, 1.0 / g.area());
        let s = analyze_sample(&f).unwrap();
        assert!((s.a0 * g.area() - 1.0).abs() < 1e-12);
        assert!(s.modes.iter().all(|m| m.a.abs() < 1e-15 && m.b.abs() < 1e-15));
    }

    #[test]
    fn rejects_off_lattice_duplicate_and_unnormalized() {
        let g = grid();
        let a0 = 1.0 / g.area();
        let off = SampleSpectrum::new(a0, vec![Mode { k: [1.5 * g.dkx(), 0.0], a: 0.1 * a0, b: 0.0 }]).unwrap();
        assert!(matches!(synthesize_sample(&off, &g), Err(FddError::OffLattice { .. })));
        let m = Mode { k: [g.dkx(), 0.0], a: 0.0, b: 0.0 };
        assert!(matches!(SampleSpectrum::new(a0, vec![m, m]), Err(FddError::DuplicateMode { .. })));
        let lower = Mode { k: [-g.dkx(), 0.0], a: 0.0, b: 0.0 };
        assert!(matches!(SampleSpectrum::new(a0, vec![lower]), Err(FddError::NotHalfPlane { .. })));
        let loud = SampleSpectrum::new(2.0 * a0, vec![]).unwrap();
        assert!(matches!(synthesize_sample(&loud, &g), Err(FddError::NotNormalized { .. })));
        let f = RealField::constant(g, 3.0 / g.area());
        assert!(matches!(analyze_sample(&f), Err(FddError::NotNormalized { .. })));
    }

    #[test]
    fn non_hermitian_spectrum_rejected() {
        let g = grid();
        let mut spectrum = SampleSpectrum::uniform(&g).to_spectrum(&g).unwrap();
        spectrum.values[g.bin_index(2, 1)] = Complex64::new(0.1, 0.2);
        assert!(matches!(SampleSpectrum::from_spectrum(&spectrum), Err(FddError::NotHermitian { .. })));
    }

    #[test]
    fn negative_sample_is_flagged_not_rejected() {
        let g = grid();
        let spec = SampleSpectrum::from_relative_bins(&g, &[((1, 0), 1.5, 0.0)]).unwrap();
        let s = synthesize_sample(&spec, &g).unwrap();
        assert!(s.negative);
        assert!(s.min_value < 0.0);
    }

    #[test]
    fn chart_peak_sits_at_line_frequency() {
        // 4500 lines/mm chart on a grid with an integer number of periods.
        let n = 256;
        let dx = 89.0 / (4.5e-3 * n as f64);
        let g = GridSpec::new(n, n, dx).unwrap();
        let chart = make_test_chart(4500.0, 5, &g, Orientation::Vertical).unwrap();
        assert!((chart.integral() - 1.0).abs() < 1e-12);
        let spec = fft_forward(&chart).unwrap();
        let mut best = (0usize, 0.0);
        for i in 0..g.len() {
            let k = g.k_norm(i);
            if k > 0.5 * lines_per_mm_to_k(4500.0) && spec.values[i].norm() > best.1 {
                best = (i, spec.values[i].norm());
            }
        }
        let k_peak = g.k_norm(best.0);
        let k_expected = 2.0 * std::f64::consts::PI * 4.5e-3;
        assert!((k_peak - k_expected).abs() <= g.dkx() * 1.01, "peak {k_peak} vs {k_expected}");
        let [_, ky] = g.k_of(best.0);
        assert!(ky.abs() <= g.dky() * 1.01);
    }

    #[test]
    fn zero_lines_is_uniform_and_nyquist_checked() {
        let g = grid();
        let c = make_test_chart(1000.0, 0, &g, Orientation::Horizontal).unwrap();
        assert!(c.values.iter().all(|&v| (v * g.area() - 1.0).abs() < 1e-12));
        // dx = 20 nm: Nyquist is 25000 lines/mm
        assert!(matches!(
            make_test_chart(26000.0, 5, &g, Orientation::Vertical),
            Err(FddError::AboveNyquist { .. })
        ));
    }

    #[test]
    fn rayleigh_line_frequency_ratio() {
        let optics = OpticsSpec::new(540.0, 1.4).unwrap();
        let ratio = lines_per_mm_to_k(4255.0) / optics.cutoff();
        assert!((ratio - 0.821).abs() < 5e-4, "{ratio}");
    }
}
