//! Forward model of a hybrid acquisition: noiseless mean images per frame and
//! Poisson photon counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{FddError, Result};
use crate::field::{RealField, SpectralField};
use crate::fourier::{apply_transfer, fft_forward, fft_inverse_complex};
use crate::optics::{Otf, OtfSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    /// Total expected photon count N over all frames.
    pub photons: f64,
    pub alpha: f64,
    pub seed: u64,
    /// Gaussian read-noise standard deviation in counts per pixel.
    pub read_noise: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self { photons: 1e6, alpha: 0.6, seed: 0, read_noise: 0.0 }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.photons > 0.0 && self.photons.is_finite()) {
            return Err(FddError::InvalidParameter(format!("photon count must be positive, got {}", self.photons)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(FddError::InvalidParameter(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.read_noise >= 0.0) {
            return Err(FddError::InvalidParameter("read noise must be nonnegative".into()));
        }
        Ok(())
    }
}

/// 64-bit finalizer used to derive independent stream seeds.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one frame of one Monte Carlo trial.
pub fn mix_seed(seed: u64, frame: u64, trial: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ frame) ^ trial.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Noiseless image ⟨g⟩ = F⁻¹[N·β·f̃] for a unit-integral object spectrum.
pub fn mean_image(object: &SpectralField, otf: &Otf, photons: f64) -> Result<RealField> {
    object.grid.ensure_same(&otf.grid, "object spectrum vs OTF")?;
    let spectrum = apply_transfer(object, &otf.values, photons);
    let complex = fft_inverse_complex(&spectrum);
    let scale = complex.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
    let residue = complex.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if residue > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(FddError::NotHermitian { deviation: residue / scale });
    }
    let field = RealField { grid: object.grid, values: complex.iter().map(|v| v.re).collect() };
    let negative = field.values.iter().filter(|&&v| v < 0.0).count();
    if negative > 0 {
        log::debug!("mean image has {negative} slightly negative pixels (min {:e})", field.min());
    }
    Ok(field)
}

/// Poisson counts with mean ⟨g⟩·dx² per pixel, returned as counts per area.
/// Negative means are clipped to zero; the number of clipped pixels is
/// returned alongside.
pub fn poissonize(mean: &RealField, seed: u64) -> Result<(RealField, usize)> {
    mean.check_finite()?;
    let cell = mean.grid.cell_area();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clipped = 0;
    let values = mean
        .values
        .iter()
        .map(|&g| {
            let lambda = g * cell;
            if lambda <= 0.0 {
                if lambda < 0.0 {
                    clipped += 1;
                }
                return 0.0;
            }
            let count: f64 = Poisson::new(lambda).map(|p| p.sample(&mut rng)).unwrap_or(0.0);
            count / cell
        })
        .collect();
    Ok((RealField { grid: mean.grid, values }, clipped))
}

/// Six frames of one acquisition: index 0 is the direct image, 1..=5 the
/// pupil regions. Values are counts per area.
#[derive(Debug, Clone, PartialEq)]
pub struct RawImageSet {
    pub frames: Vec<RealField>,
    /// Recorded photon count of each frame.
    pub totals: Vec<f64>,
    pub config: AcquisitionConfig,
    pub trial: u64,
    pub clipped: usize,
}

impl RawImageSet {
    pub fn total_photons(&self) -> f64 {
        self.totals.iter().sum()
    }

    pub fn spectra(&self) -> Result<Vec<SpectralField>> {
        self.frames.iter().map(fft_forward).collect()
    }
}

/// Noiseless mean of every frame.
pub fn mean_images(object: &SpectralField, otfs: &OtfSet, photons: f64) -> Result<Vec<RealField>> {
    otfs.frames.iter().map(|o| mean_image(object, o, photons)).collect()
}

/// Simulate trial `trial` of an acquisition. Frame l receives the expected
/// photon count N·β^H_l(0) with independent noise seeded by
/// `mix_seed(seed, l, trial)`.
pub fn acquire_trial(object: &SpectralField, otfs: &OtfSet, config: &AcquisitionConfig, trial: u64) -> Result<RawImageSet> {
    config.validate()?;
    if (otfs.alpha - config.alpha).abs() > 1e-12 {
        return Err(FddError::InvalidParameter(format!(
            "OTF set built for alpha = {}, acquisition asks for {}",
            otfs.alpha, config.alpha
        )));
    }
    let means = mean_images(object, otfs, config.photons)?;
    noisy_frames(&means, config, trial)
}

/// Draw noisy frames from precomputed mean images.
pub fn noisy_frames(means: &[RealField], config: &AcquisitionConfig, trial: u64) -> Result<RawImageSet> {
    let mut frames = Vec::with_capacity(means.len());
    let mut totals = Vec::with_capacity(means.len());
    let mut clipped = 0;
    for (l, mean) in means.iter().enumerate() {
        let seed = mix_seed(config.seed, l as u64, trial);
        let (mut frame, c) = poissonize(mean, seed)?;
        clipped += c;
        if config.read_noise > 0.0 {
            let cell = frame.grid.cell_area();
            let normal = Normal::new(0.0, config.read_noise).map_err(|e| FddError::InvalidParameter(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, u64::MAX, trial));
            for v in &mut frame.values {
                *v += normal.sample(&mut rng) / cell;
            }
        }
        totals.push(frame.integral());
        frames.push(frame);
    }
    Ok(RawImageSet { frames, totals, config: *config, trial, clipped })
}

pub fn acquire(object: &SpectralField, otfs: &OtfSet, config: &AcquisitionConfig) -> Result<RawImageSet> {
    acquire_trial(object, otfs, config, 0)
}
