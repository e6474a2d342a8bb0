//! Experiment configuration file. Every quantity with a unit carries it in
//! the field name; omitted fields take the defaults recorded in the manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};

use fdd_core::budget::BudgetParams;
use fdd_core::estimation::ValidationConfig;
use fdd_core::fourier::fft_forward;
use fdd_core::optics::{make_circular_pupil, partition_fdd, region_otfs, PupilPartition, RegionOtfs};
use fdd_core::reconstruct::ReconstructionConfig;
use fdd_core::sample::{lines_per_mm_to_k, make_test_chart, Orientation, SampleSpectrum};
use fdd_core::simulate::AcquisitionConfig;
use fdd_core::{GridSpec, OpticsSpec, SpectralField};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub optics: OpticsSection,
    pub grid: GridSection,
    pub sample: SampleSection,
    pub partition: PartitionSection,
    pub acquisition: AcquisitionSection,
    pub reconstruction: ReconstructionConfig,
    pub snr: SnrSection,
    pub budget: BudgetSection,
    pub validation: ValidationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            optics: OpticsSection::default(),
            grid: GridSection::default(),
            sample: SampleSection::default(),
            partition: PartitionSection::default(),
            acquisition: AcquisitionSection::default(),
            reconstruction: ReconstructionConfig::default(),
            snr: SnrSection::default(),
            budget: BudgetSection::default(),
            validation: ValidationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsSection {
    pub wavelength_nm: f64,
    pub numerical_aperture: f64,
}

impl Default for OpticsSection {
    fn default() -> Self {
        Self { wavelength_nm: 540.0, numerical_aperture: 1.4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Square grid side.
    pub size_px: usize,
    /// Pixel pitch; when absent the pitch puts the cutoff at 0.4 of the
    /// sampling frequency.
    pub pixel_nm: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { size_px: 256, pixel_nm: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleSection {
    Uniform,
    /// Bar quintuplet (or any line count) centered on the field.
    Chart {
        lines_per_mm: f64,
        #[serde(default = "default_lines")]
        lines: usize,
        #[serde(default)]
        orientation: Orientation,
    },
    /// Cosine/sine modes on lattice bins, amplitudes relative to the mean.
    Modes { modes: Vec<ModeSpec> },
}

fn default_lines() -> usize {
    5
}

impl Default for SampleSection {
    fn default() -> Self {
        SampleSection::Chart { lines_per_mm: 4500.0, lines: 5, orientation: Orientation::Vertical }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub bin: [i64; 2],
    pub a_rel: f64,
    pub b_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSection {
    /// k_a / k_c.
    pub inner_ratio: f64,
}

impl Default for PartitionSection {
    fn default() -> Self {
        Self { inner_ratio: 0.7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionSection {
    /// Expected total over all frames.
    pub photons: f64,
    pub alpha: f64,
    pub seed: u64,
    pub trials: u64,
    pub read_noise_counts: f64,
}

impl Default for AcquisitionSection {
    fn default() -> Self {
        Self { photons: 1e6, alpha: 0.6, seed: 0, trials: 1, read_noise_counts: 0.0 }
    }
}

impl AcquisitionSection {
    pub fn to_core(&self) -> AcquisitionConfig {
        AcquisitionConfig { photons: self.photons, alpha: self.alpha, seed: self.seed, read_noise: self.read_noise_counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnrSection {
    /// Axis wavevectors as fractions of k_c. When absent: the chart line
    /// frequency, the configured modes, or 0.87 for a uniform sample.
    pub k_over_kc: Option<Vec<f64>>,
}

impl Default for SnrSection {
    fn default() -> Self {
        Self { k_over_kc: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSection {
    /// Grid used for the axis OTF tables (the budget does not use `grid`).
    pub grid_px: usize,
    pub roughness: f64,
    pub gamma: f64,
    pub alphas: Vec<f64>,
    pub inner_ratios: Vec<f64>,
    pub sweep_points: usize,
    pub sweep_decades: f64,
}

impl Default for BudgetSection {
    fn default() -> Self {
        let p = BudgetParams::default();
        Self {
            grid_px: 512,
            roughness: p.roughness,
            gamma: p.gamma,
            alphas: p.alphas,
            inner_ratios: p.inner_ratios,
            sweep_points: 241,
            sweep_decades: 6.0,
        }
    }
}

impl BudgetSection {
    pub fn params(&self) -> BudgetParams {
        BudgetParams {
            roughness: self.roughness,
            gamma: self.gamma,
            alphas: self.alphas.clone(),
            inner_ratios: self.inner_ratios.clone(),
        }
    }
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                let de = &mut serde_json::Deserializer::from_str(&text);
                serde_path_to_error::deserialize(de)
                    .map_err(|e| CliError::Config(format!("{}: at `{}`: {}", p.display(), e.path(), e.inner())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let o = &self.optics;
        if !(o.wavelength_nm > 0.0 && o.wavelength_nm.is_finite()) {
            return Err(invalid("optics.wavelength_nm", "must be positive"));
        }
        OpticsSpec::new(o.wavelength_nm, o.numerical_aperture).map_err(|e| invalid("optics.numerical_aperture", e))?;
        if let Some(dx) = self.grid.pixel_nm {
            if !(dx > 0.0 && dx.is_finite()) {
                return Err(invalid("grid.pixel_nm", "must be positive"));
            }
        }
        let grid = self.grid().map_err(|e| invalid("grid", e))?;
        make_circular_pupil(&self.optics(), &grid).map_err(|e| invalid("grid", e))?;
        let r = self.partition.inner_ratio;
        if !(r > 0.0 && r < 1.0) {
            return Err(invalid("partition.inner_ratio", format!("must lie in (0, 1), got {r}")));
        }
        self.acquisition.to_core().validate().map_err(|e| invalid("acquisition", e))?;
        if self.acquisition.trials == 0 {
            return Err(invalid("acquisition.trials", "must be at least 1"));
        }
        self.reconstruction.validate().map_err(|e| invalid("reconstruction", e))?;
        self.budget.params().validate().map_err(|e| invalid("budget", e))?;
        if self.budget.sweep_points < 2 || !(self.budget.sweep_decades > 0.0) {
            return Err(invalid("budget", "sweep_points >= 2 and sweep_decades > 0 required"));
        }
        if let Some(ks) = &self.snr.k_over_kc {
            if ks.is_empty() || ks.iter().any(|k| !(*k > 0.0 && *k < 1.0)) {
                return Err(invalid("snr.k_over_kc", "values must lie in (0, 1)"));
            }
        }
        match &self.sample {
            SampleSection::Chart { lines_per_mm, lines, .. } => {
                if !(*lines_per_mm > 0.0) || *lines == 0 {
                    return Err(invalid("sample", "chart needs lines_per_mm > 0 and lines >= 1"));
                }
            }
            SampleSection::Modes { modes } => {
                let total: f64 = modes.iter().map(|m| m.a_rel.hypot(m.b_rel)).sum();
                if total >= 1.0 {
                    return Err(invalid("sample.modes", format!("sum of mode amplitudes {total:.3} must stay below 1 (positive intensity)")));
                }
            }
            SampleSection::Uniform => {}
        }
        Ok(())
    }

    pub fn optics(&self) -> OpticsSpec {
        OpticsSpec::new(self.optics.wavelength_nm, self.optics.numerical_aperture).expect("validated")
    }

    pub fn grid(&self) -> fdd_core::Result<GridSpec> {
        let o = OpticsSpec::new(self.optics.wavelength_nm, self.optics.numerical_aperture)?;
        match self.grid.pixel_nm {
            Some(dx) => GridSpec::new(self.grid.size_px, self.grid.size_px, dx),
            None => o.default_grid(self.grid.size_px),
        }
    }

    pub fn region_otfs(&self) -> fdd_core::Result<RegionOtfs> {
        let grid = self.grid()?;
        let pupil = make_circular_pupil(&self.optics(), &grid)?;
        let canvas = PupilPartition::minimum_canvas(&pupil)?;
        region_otfs(&partition_fdd(&pupil, self.partition.inner_ratio, &canvas)?)
    }

    pub fn partition(&self) -> fdd_core::Result<PupilPartition> {
        let grid = self.grid()?;
        let pupil = make_circular_pupil(&self.optics(), &grid)?;
        let canvas = PupilPartition::minimum_canvas(&pupil)?;
        partition_fdd(&pupil, self.partition.inner_ratio, &canvas)
    }

    /// Object spectrum (unit integral) and its mean intensity a0.
    pub fn object(&self) -> fdd_core::Result<(SpectralField, f64)> {
        let grid = self.grid()?;
        let a0 = 1.0 / grid.area();
        let spectrum = match &self.sample {
            SampleSection::Uniform => SampleSpectrum::uniform(&grid).to_spectrum(&grid)?,
            SampleSection::Modes { modes } => {
                let bins: Vec<_> = modes.iter().map(|m| ((m.bin[0], m.bin[1]), m.a_rel, m.b_rel)).collect();
                SampleSpectrum::from_relative_bins(&grid, &bins)?.to_spectrum(&grid)?
            }
            SampleSection::Chart { lines_per_mm, lines, orientation } => {
                fft_forward(&make_test_chart(*lines_per_mm, *lines, &grid, *orientation)?)?
            }
        };
        Ok((spectrum, a0))
    }

    /// Lattice wavevectors probed by the snr and reconstruct commands.
    pub fn probe_wavevectors(&self) -> fdd_core::Result<Vec<[f64; 2]>> {
        let grid = self.grid()?;
        let kc = self.optics().cutoff();
        let on_lattice = |k: [f64; 2]| {
            let (bx, by) = grid.nearest_bin(k);
            [bx as f64 * grid.dkx(), by as f64 * grid.dky()]
        };
        if let Some(ratios) = &self.snr.k_over_kc {
            return Ok(ratios.iter().map(|r| on_lattice([r * kc, 0.0])).collect());
        }
        Ok(match &self.sample {
            SampleSection::Uniform => vec![on_lattice([0.87 * kc, 0.0])],
            SampleSection::Modes { modes } => {
                modes.iter().map(|m| [m.bin[0] as f64 * grid.dkx(), m.bin[1] as f64 * grid.dky()]).collect()
            }
            SampleSection::Chart { lines_per_mm, orientation, .. } => {
                let k = lines_per_mm_to_k(*lines_per_mm);
                vec![on_lattice(match orientation {
                    Orientation::Vertical => [k, 0.0],
                    Orientation::Horizontal => [0.0, k],
                })]
            }
        })
    }
}
