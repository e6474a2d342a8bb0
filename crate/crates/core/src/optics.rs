//! Circular pupils, the five-region pupil partition, and OTFs/PSFs obtained
//! from pupil autocorrelation.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{FddError, Result};
use crate::field::{GridSpec, RealField};
use crate::fourier::fft2_in_place;
use crate::sample::in_half_plane;

/// First zero of J1, which places the Airy minimum at 3.8317/(k_c/2).
const J1_FIRST_ZERO: f64 = 3.831_705_970_207_512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticsSpec {
    pub wavelength_nm: f64,
    pub numerical_aperture: f64,
}

impl OpticsSpec {
    pub fn new(wavelength_nm: f64, numerical_aperture: f64) -> Result<Self> {
        if !(wavelength_nm > 0.0 && wavelength_nm.is_finite()) {
            return Err(FddError::InvalidParameter(format!("wavelength must be positive, got {wavelength_nm}")));
        }
        if !(numerical_aperture > 0.0 && numerical_aperture <= 1.6) {
            return Err(FddError::InvalidParameter(format!(
                "numerical aperture must lie in (0, 1.6], got {numerical_aperture}"
            )));
        }
        Ok(Self { wavelength_nm, numerical_aperture })
    }

    /// Incoherent cutoff k_c = 4π·NA/λ in rad/nm.
    pub fn cutoff(&self) -> f64 {
        4.0 * PI * self.numerical_aperture / self.wavelength_nm
    }

    pub fn cutoff_lines_per_mm(&self) -> f64 {
        self.cutoff() / (2.0 * PI) * 1e6
    }

    /// Rayleigh distance 0.61·λ/NA in nm.
    pub fn rayleigh_nm(&self) -> f64 {
        0.61 * self.wavelength_nm / self.numerical_aperture
    }

    /// π(0.61·λ/NA)², the area used to express photon budgets.
    pub fn airy_disk_area(&self) -> f64 {
        PI * self.rayleigh_nm().powi(2)
    }

    /// Photons per Airy disk for a photon density given per pixel of pitch `dx`.
    pub fn photons_per_airy_disk(&self, photons_per_pixel: f64, dx: f64) -> f64 {
        photons_per_pixel * self.airy_disk_area() / (dx * dx)
    }

    /// Default simulation grid: the cutoff sits at 0.8π rad per pixel.
    pub fn default_grid(&self, n: usize) -> Result<GridSpec> {
        GridSpec::for_cutoff(n, self.cutoff(), 0.8 * PI)
    }
}

/// Binary pupil transmission on the spectral lattice of `grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct PupilMask {
    pub grid: GridSpec,
    pub support: Vec<bool>,
    /// OTF cutoff k_c of the parent pupil (its radius is k_c/2).
    pub cutoff: f64,
    /// Pixel count of the parent full pupil; OTFs are normalized by it.
    pub full_count: usize,
}

impl PupilMask {
    pub fn count(&self) -> usize {
        self.support.iter().filter(|&&s| s).count()
    }

    /// Area fraction of the parent pupil, i.e. β(0) of this region.
    pub fn area_fraction(&self) -> f64 {
        self.count() as f64 / self.full_count as f64
    }

    /// Constant transmission making the amplitude PSF unit-norm,
    /// |h|² = 4π²/(count·dk²) (4√π/k_c in the continuum).
    pub fn amplitude(&self) -> f64 {
        (4.0 * PI * PI / (self.full_count as f64 * self.grid.dkx() * self.grid.dky())).sqrt()
    }
}

/// Disk of radius k_c/2 centred at k = 0.
pub fn make_circular_pupil(optics: &OpticsSpec, grid: &GridSpec) -> Result<PupilMask> {
    let cutoff = optics.cutoff();
    if cutoff >= grid.half_extent() {
        return Err(FddError::GridTooSmall { cutoff, half_extent: grid.half_extent() });
    }
    let radius = cutoff / 2.0 * (1.0 + 1e-12);
    let support: Vec<bool> = (0..grid.len()).map(|i| grid.k_norm(i) <= radius).collect();
    let full_count = support.iter().filter(|&&s| s).count();
    if full_count == 0 {
        return Err(FddError::EmptyMask);
    }
    Ok(PupilMask { grid: *grid, support, cutoff, full_count })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionRegion {
    pub mask: PupilMask,
    /// Image displacement R_l in nm.
    pub displacement: [f64; 2],
}

/// Central disk of radius k_a/2 plus four annular regions. Each annular
/// region is a pair of opposite 45° sectors (centred on the k_x axis, the
/// +45° diagonal, the k_y axis and the -45° diagonal), so every region is
/// centrosymmetric and its OTF reaches the cutoff along its own direction.
#[derive(Debug, Clone, PartialEq)]
pub struct PupilPartition {
    pub inner_ratio: f64,
    pub regions: Vec<PartitionRegion>,
    pub parent: PupilMask,
    pub canvas: GridSpec,
}

/// Region index (0-based: 0 is the central disk) of a pupil bin.
fn region_of(grid: &GridSpec, bx: i64, by: i64, inner_radius: f64) -> usize {
    let (kx, ky) = (bx as f64 * grid.dkx(), by as f64 * grid.dky());
    if kx.hypot(ky) <= inner_radius {
        return 0;
    }
    // Fold onto the half-plane so that q and -q always share a region.
    let (cx, cy) = if in_half_plane(bx, by) { (kx, ky) } else { (-kx, -ky) };
    let mut theta = cy.atan2(cx);
    if theta < 0.0 {
        theta += PI;
    }
    let folded = (theta + PI / 8.0) % PI;
    1 + ((folded / (PI / 4.0)) as usize).min(3)
}

/// Split `pupil` into the five regions and lay out their images on `canvas`.
pub fn partition_fdd(pupil: &PupilMask, inner_ratio: f64, canvas: &GridSpec) -> Result<PupilPartition> {
    if !(inner_ratio > 0.0 && inner_ratio < 1.0) {
        return Err(FddError::InvalidParameter(format!("k_a/k_c must lie in (0, 1), got {inner_ratio}")));
    }
    let grid = pupil.grid;
    let inner_radius = inner_ratio * pupil.cutoff / 2.0 * (1.0 + 1e-12);
    let mut supports = vec![vec![false; grid.len()]; 5];
    for i in 0..grid.len() {
        if pupil.support[i] {
            let (bx, by) = grid.signed_bin(i);
            supports[region_of(&grid, bx, by, inner_radius)][i] = true;
        }
    }

    // Cross layout: centre, +x, +y, -x, -y, spaced by the object footprint
    // plus two Airy radii of blur.
    let airy = J1_FIRST_ZERO / (pupil.cutoff / 2.0);
    let footprint = [grid.nx as f64 * grid.dx, grid.ny as f64 * grid.dx];
    let spacing = [footprint[0] + 2.0 * airy, footprint[1] + 2.0 * airy];
    let need = [2.0 * spacing[0] + footprint[0] + 2.0 * airy, 2.0 * spacing[1] + footprint[1] + 2.0 * airy];
    let have = [canvas.nx as f64 * canvas.dx, canvas.ny as f64 * canvas.dx];
    if have[0] < need[0] || have[1] < need[1] {
        return Err(FddError::CanvasTooSmall { have_nm: have, need_nm: need });
    }
    let displacements = [
        [0.0, 0.0],
        [spacing[0], 0.0],
        [0.0, spacing[1]],
        [-spacing[0], 0.0],
        [0.0, -spacing[1]],
    ];

    let regions = supports
        .into_iter()
        .zip(displacements)
        .map(|(support, displacement)| PartitionRegion {
            mask: PupilMask { grid, support, cutoff: pupil.cutoff, full_count: pupil.full_count },
            displacement,
        })
        .collect();
    Ok(PupilPartition { inner_ratio, regions, parent: pupil.clone(), canvas: *canvas })
}

impl PupilPartition {
    /// Smallest square canvas (same pitch as the object grid) that holds all
    /// five displaced images.
    pub fn minimum_canvas(pupil: &PupilMask) -> Result<GridSpec> {
        let grid = pupil.grid;
        let airy = J1_FIRST_ZERO / (pupil.cutoff / 2.0);
        let footprint = grid.nx.max(grid.ny) as f64 * grid.dx;
        let need = 3.0 * footprint + 6.0 * airy;
        let mut n = (need / grid.dx).ceil() as usize;
        n += n % 2;
        GridSpec::new(n, n, grid.dx)
    }

    /// Displacements in canvas pixels.
    pub fn displacement_pixels(&self) -> Vec<[f64; 2]> {
        self.regions
            .iter()
            .map(|r| [r.displacement[0] / self.canvas.dx, r.displacement[1] / self.canvas.dx])
            .collect()
    }

    /// Structured-text description of the partition.
    pub fn describe(&self) -> PartitionReport {
        PartitionReport {
            inner_ratio: self.inner_ratio,
            pupil_pixels: self.parent.full_count,
            region_pixels: self.regions.iter().map(|r| r.mask.count()).collect(),
            area_fractions: self.regions.iter().map(|r| r.mask.area_fraction()).collect(),
            displacements_px: self.displacement_pixels(),
            canvas: self.canvas,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionReport {
    pub inner_ratio: f64,
    pub pupil_pixels: usize,
    pub region_pixels: Vec<usize>,
    pub area_fractions: Vec<f64>,
    pub displacements_px: Vec<[f64; 2]>,
    pub canvas: GridSpec,
}

/// Real, nonnegative transfer function on the spectral lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Otf {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl Otf {
    pub fn dc(&self) -> f64 {
        self.values[0]
    }

    pub fn at(&self, bx: i64, by: i64) -> f64 {
        self.values[self.grid.bin_index(bx, by)]
    }

    pub fn at_k(&self, k: [f64; 2]) -> f64 {
        let (bx, by) = self.grid.nearest_bin(k);
        if 2 * bx.abs() >= self.grid.nx as i64 || 2 * by.abs() >= self.grid.ny as i64 {
            return 0.0;
        }
        self.at(bx, by)
    }

    /// Profile along +k_x: entry j is β(j·dk, 0) for j in 0..nx/2.
    pub fn axis_profile(&self) -> Vec<f64> {
        (0..self.grid.nx as i64 / 2).map(|j| self.at(j, 0)).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * factor).collect() }
    }

    pub fn to_field(&self) -> RealField {
        RealField { grid: self.grid, values: self.values.clone() }
    }
}

/// Pupil autocorrelation normalized so the full pupil has β(0) = 1.
///
/// The correlation of two indicator functions counts overlapping pixels, so
/// the transform-pair result is rounded to integers before normalization.
/// This makes β exactly symmetric and independent of FFT round-off.
pub fn compute_otf(mask: &PupilMask) -> Result<Otf> {
    if mask.count() == 0 {
        return Err(FddError::EmptyMask);
    }
    let grid = mask.grid;
    let (nx, ny) = (grid.nx, grid.ny);
    let mut data: Vec<Complex64> = mask
        .support
        .iter()
        .map(|&s| Complex64::new(if s { 1.0 } else { 0.0 }, 0.0))
        .collect();
    fft2_in_place(&mut data, nx, ny, FftDirection::Inverse);
    for v in &mut data {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    fft2_in_place(&mut data, nx, ny, FftDirection::Forward);
    let n = (nx * ny) as f64;
    let norm = mask.full_count as f64;
    let values = data.iter().map(|v| (v.re / n).round() / norm).collect();
    Ok(Otf { grid, values })
}

/// OTF along +k_x by direct overlap counting: entry j is the number of
/// support pixels q with q + (j, 0) also in the support, over the parent
/// pupil's pixel count.
pub fn axis_autocorrelation(mask: &PupilMask) -> Vec<f64> {
    let grid = mask.grid;
    let half = grid.nx as i64 / 2;
    let pixels: Vec<(i64, i64)> = (0..grid.len()).filter(|&i| mask.support[i]).map(|i| grid.signed_bin(i)).collect();
    (0..half)
        .map(|j| {
            let overlap = pixels
                .iter()
                .filter(|&&(bx, by)| bx + j < half && mask.support[grid.bin_index(bx + j, by)])
                .count();
            overlap as f64 / mask.full_count as f64
        })
        .collect()
}

/// Intensity PSF |Ψ(r)|² of a pupil, normalized to unit integral and centred
/// on pixel (0, 0) of the periodic grid.
pub fn compute_psf(mask: &PupilMask) -> Result<RealField> {
    if mask.count() == 0 {
        return Err(FddError::EmptyMask);
    }
    let grid = mask.grid;
    let mut data: Vec<Complex64> = mask
        .support
        .iter()
        .map(|&s| Complex64::new(if s { 1.0 } else { 0.0 }, 0.0))
        .collect();
    fft2_in_place(&mut data, grid.nx, grid.ny, FftDirection::Inverse);
    let mut values: Vec<f64> = data.iter().map(|v| v.norm_sqr()).collect();
    let integral = values.iter().sum::<f64>() * grid.cell_area();
    values.iter_mut().for_each(|v| *v /= integral);
    Ok(RealField { grid, values })
}

/// OTFs of the full pupil and of each partition region.
#[derive(Debug, Clone)]
pub struct RegionOtfs {
    pub inner_ratio: f64,
    pub full: Otf,
    pub regions: Vec<Otf>,
}

pub fn region_otfs(partition: &PupilPartition) -> Result<RegionOtfs> {
    let full = compute_otf(&partition.parent)?;
    let regions = partition.regions.iter().map(|r| compute_otf(&r.mask)).collect::<Result<Vec<_>>>()?;
    Ok(RegionOtfs { inner_ratio: partition.inner_ratio, full, regions })
}

/// The six weighted OTFs of a hybrid acquisition:
/// β^H_0 = (1-α)β^DI and β^H_l = αβ_l for the five regions.
#[derive(Debug, Clone)]
pub struct OtfSet {
    pub alpha: f64,
    pub inner_ratio: f64,
    pub frames: Vec<Otf>,
}

pub fn hybrid_otfs(otfs: &RegionOtfs, alpha: f64) -> Result<OtfSet> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(FddError::InvalidParameter(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let mut frames = Vec::with_capacity(6);
    frames.push(otfs.full.scaled(1.0 - alpha));
    frames.extend(otfs.regions.iter().map(|r| r.scaled(alpha)));
    Ok(OtfSet { alpha, inner_ratio: otfs.inner_ratio, frames })
}

impl OtfSet {
    /// Plain direct imaging as a one-frame set.
    pub fn direct(full: &Otf) -> Self {
        Self { alpha: 0.0, inner_ratio: f64::NAN, frames: vec![full.clone()] }
    }

    pub fn grid(&self) -> GridSpec {
        self.frames[0].grid
    }

    /// Σ_l [β^H_l(k)]²/β^H_l(0) at one storage index, skipping empty frames.
    pub fn information_density(&self, index: usize) -> f64 {
        self.frames
            .iter()
            .filter(|f| f.dc() > 0.0)
            .map(|f| f.values[index] * f.values[index] / f.dc())
            .sum()
    }
}
