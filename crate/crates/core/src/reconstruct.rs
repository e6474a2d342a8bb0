//! Wiener-type fusion of the frames of an acquisition, the single-frame
//! Wiener deconvolution it reduces to, Fourier-coefficient estimators and
//! SNR measurements.

use std::fmt::Write as _;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FddError, Result};
use crate::field::{GridSpec, RealField, SpectralField};
use crate::fourier::{fft_forward, fft_inverse_complex};
use crate::optics::{Otf, OtfSet};
use crate::simulate::RawImageSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionConfig {
    /// Number of estimator passes; ε is refreshed from the estimate between
    /// passes.
    pub iterations: usize,
    /// Lower bound on ε, in the units of Σ β²/β(0).
    pub epsilon_floor: f64,
    /// Zero the estimate wherever no frame transmits.
    pub band_limit: bool,
    /// Use this ε everywhere instead of the data-driven estimate. A value at
    /// the floor gives the unregularized (unbiased) estimator.
    pub fixed_epsilon: Option<f64>,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self { iterations: 3, epsilon_floor: 1e-12, band_limit: true, fixed_epsilon: None }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=20).contains(&self.iterations) {
            return Err(FddError::InvalidParameter(format!("iterations must lie in 1..=20, got {}", self.iterations)));
        }
        if !(self.epsilon_floor >= 0.0) {
            return Err(FddError::InvalidParameter("epsilon floor must be nonnegative".into()));
        }
        if let Some(e) = self.fixed_epsilon {
            if !(e.is_finite() && e >= 0.0) {
                return Err(FddError::InvalidParameter(format!("fixed epsilon must be finite and nonnegative, got {e}")));
            }
        }
        Ok(())
    }
}

/// Per-frame weights C_l(k) and the ε(k) they were built with.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerWeights {
    pub weights: Vec<Vec<f64>>,
    pub epsilon: Vec<f64>,
}

/// C_l = (β_l/β_l(0)) / (Σ_m β_m²/β_m(0) + ε). Frames with β_l(0) = 0 get
/// zero weight.
pub fn fdd_weights(otfs: &OtfSet, epsilon: &[f64]) -> Result<WienerWeights> {
    let grid = otfs.grid();
    if epsilon.len() != grid.len() {
        return Err(FddError::GridMismatch("epsilon array does not match the OTF grid".into()));
    }
    if let Some(i) = epsilon.iter().position(|e| !(*e >= 0.0)) {
        return Err(FddError::InvalidParameter(format!("epsilon must be nonnegative, got {} at bin {i}", epsilon[i])));
    }
    let mut weights: Vec<Vec<f64>> = vec![vec![0.0; grid.len()]; otfs.frames.len()];
    let active: Vec<usize> = (0..otfs.frames.len()).filter(|&l| otfs.frames[l].dc() > 0.0).collect();
    for i in 0..grid.len() {
        let mut den = epsilon[i];
        for &l in &active {
            let b = otfs.frames[l].values[i];
            den += b * b / otfs.frames[l].dc();
        }
        if den == 0.0 {
            return Err(FddError::SingularWeights);
        }
        for &l in &active {
            let f = &otfs.frames[l];
            weights[l][i] = f.values[i] / f.dc() / den;
        }
    }
    Ok(WienerWeights { weights, epsilon: epsilon.to_vec() })
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub spectrum: SpectralField,
    pub image: RealField,
    /// ε used by each pass.
    pub epsilons: Vec<Vec<f64>>,
    pub weights: WienerWeights,
    /// Covered bins where ε was non-finite and replaced by the floor, summed
    /// over passes.
    pub floored: usize,
    /// Recorded photon count used in the ε updates.
    pub photons: f64,
}

fn clamp_epsilon(value: f64, floor: f64, floored: &mut usize) -> f64 {
    if !value.is_finite() {
        *floored += 1;
        return floor;
    }
    value.max(floor)
}

/// Fuse frame spectra g̃_l into g̃ = Σ C_l g̃_l. ε starts at N/(Σ_l |g̃_l|)²
/// and is updated to N/|g̃|² between passes, N being the recorded total.
pub fn reconstruct_spectra(spectra: &[SpectralField], otfs: &OtfSet, cfg: &ReconstructionConfig) -> Result<ReconstructionResult> {
    cfg.validate()?;
    if spectra.len() != otfs.frames.len() {
        return Err(FddError::GridMismatch(format!("{} frames for {} OTFs", spectra.len(), otfs.frames.len())));
    }
    let grid = otfs.grid();
    for s in spectra {
        s.grid.ensure_same(&grid, "frame vs OTF")?;
    }
    let active: Vec<usize> = (0..spectra.len()).filter(|&l| otfs.frames[l].dc() > 0.0).collect();
    let photons: f64 = active.iter().map(|&l| spectra[l].values[0].re).sum();
    let mut floored = 0;
    let covered: Vec<bool> = (0..grid.len()).map(|i| active.iter().any(|&l| otfs.frames[l].values[i] != 0.0)).collect();
    let initial = |i: usize, floored: &mut usize| match cfg.fixed_epsilon {
        Some(e) => e.max(cfg.epsilon_floor),
        None => {
            let s: f64 = active.iter().map(|&l| spectra[l].values[i].norm()).sum();
            let mut outside = 0;
            clamp_epsilon(photons / (s * s), cfg.epsilon_floor, if covered[i] { floored } else { &mut outside })
        }
    };
    let mut epsilon: Vec<f64> = (0..grid.len()).map(|i| initial(i, &mut floored)).collect();
    let mut epsilons = Vec::with_capacity(cfg.iterations);
    let mut fused = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut weights = fdd_weights(otfs, &epsilon)?;
    for pass in 0..cfg.iterations {
        if pass > 0 && cfg.fixed_epsilon.is_none() {
            epsilon = fused
                .iter()
                .zip(&covered)
                .map(|(g, &c)| {
                    let mut outside = 0;
                    clamp_epsilon(photons / g.norm_sqr(), cfg.epsilon_floor, if c { &mut floored } else { &mut outside })
                })
                .collect();
            weights = fdd_weights(otfs, &epsilon)?;
        }
        for (i, out) in fused.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &l in &active {
                acc += spectra[l].values[i] * weights.weights[l][i];
            }
            *out = acc;
        }
        epsilons.push(epsilon.clone());
    }
    if cfg.band_limit {
        for (i, out) in fused.iter_mut().enumerate() {
            if !covered[i] {
                *out = Complex64::new(0.0, 0.0);
            }
        }
    }
    if floored > 0 {
        log::info!("epsilon replaced by the floor at {floored} bins");
    }
    let spectrum = SpectralField { grid, values: fused, real_origin: true };
    let complex = fft_inverse_complex(&spectrum);
    let scale = complex.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
    let residue = complex.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if residue > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(FddError::NotHermitian { deviation: residue / scale });
    }
    let image = RealField { grid, values: complex.iter().map(|v| v.re).collect() };
    Ok(ReconstructionResult { spectrum, image, epsilons, weights, floored, photons })
}

pub fn reconstruct_fdd(raw: &RawImageSet, otfs: &OtfSet, cfg: &ReconstructionConfig) -> Result<ReconstructionResult> {
    reconstruct_spectra(&raw.spectra()?, otfs, cfg)
}

/// Wiener deconvolution of a single direct image.
pub fn reconstruct_di_dcv(frame: &RealField, otf_di: &Otf, cfg: &ReconstructionConfig) -> Result<ReconstructionResult> {
    reconstruct_spectra(&[fft_forward(frame)?], &OtfSet::direct(otf_di), cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierEstimate {
    pub k: [f64; 2],
    pub a: f64,
    pub b: f64,
}

/// â = (a0/N)·Re[G(k) + G(-k)], b̂ = (a0/N)·Re[i(G(k) - G(-k))].
pub fn estimate_fourier_params(spectrum: &SpectralField, a0: f64, photons: f64, ks: &[[f64; 2]]) -> Result<Vec<FourierEstimate>> {
    let grid = spectrum.grid;
    ks.iter()
        .map(|&k| {
            let (bx, by) = grid.lattice_bin(k)?;
            let plus = spectrum.at(bx, by);
            let minus = spectrum.at(-bx, -by);
            let scale = a0 / photons;
            let a = scale * (plus + minus).re;
            let b = scale * (Complex64::i() * (plus - minus)).re;
            Ok(FourierEstimate { k, a, b })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMethod {
    /// Shot-noise power equals the frame's photon count.
    Theory,
    /// Mean |g̃|² over 1.05k_c < |k| < min(1.5k_c, Nyquist).
    OutOfBand,
}

/// Mean |F|² over the out-of-band annulus.
pub fn out_of_band_power(spectrum: &SpectralField, cutoff: f64) -> Result<f64> {
    let grid = spectrum.grid;
    let outer = (1.5 * cutoff).min(grid.half_extent());
    let inner = 1.05 * cutoff;
    let (mut sum, mut count) = (0.0, 0usize);
    for i in 0..grid.len() {
        let k = grid.k_norm(i);
        if k > inner && k < outer {
            sum += spectrum.values[i].norm_sqr();
            count += 1;
        }
    }
    if count == 0 {
        return Err(FddError::EmptyAnnulus);
    }
    Ok(sum / count as f64)
}

fn noise_powers(spectra: &[SpectralField], method: NoiseMethod, cutoff: f64) -> Result<Vec<f64>> {
    spectra
        .iter()
        .map(|s| match method {
            NoiseMethod::Theory => Ok(s.values[0].re),
            NoiseMethod::OutOfBand => out_of_band_power(s, cutoff),
        })
        .collect()
}

fn db(power_ratio: f64) -> f64 {
    10.0 * power_ratio.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrReport {
    pub k: [f64; 2],
    pub method: NoiseMethod,
    /// 10·log10(|g̃_l(k)|²/noise_l); -inf for frames without photons.
    pub per_frame_db: Vec<f64>,
    /// 10·log10(Σ_l SNR_l²).
    pub combined_db: f64,
}

/// SNR of each frame at `k` and their quadrature sum.
pub fn snr_at_k(spectra: &[SpectralField], k: [f64; 2], method: NoiseMethod, cutoff: f64) -> Result<SnrReport> {
    let noise = noise_powers(spectra, method, cutoff)?;
    let mut total = 0.0;
    let mut per_frame_db = Vec::with_capacity(spectra.len());
    for (s, n) in spectra.iter().zip(&noise) {
        let (bx, by) = s.grid.lattice_bin(k)?;
        if *n > 0.0 {
            let snr2 = s.at(bx, by).norm_sqr() / n;
            total += snr2;
            per_frame_db.push(db(snr2));
        } else {
            per_frame_db.push(f64::NEG_INFINITY);
        }
    }
    Ok(SnrReport { k, method, per_frame_db, combined_db: db(total) })
}

/// SNR of the fused estimate at `k`: |Σ C_l g̃_l| / √(Σ C_l² noise_l).
pub fn fused_snr_db(result: &ReconstructionResult, spectra: &[SpectralField], k: [f64; 2], method: NoiseMethod, cutoff: f64) -> Result<f64> {
    let grid = result.spectrum.grid;
    let (bx, by) = grid.lattice_bin(k)?;
    let i = grid.bin_index(bx, by);
    let noise = noise_powers(spectra, method, cutoff)?;
    let variance: f64 = result
        .weights
        .weights
        .iter()
        .zip(&noise)
        .map(|(c, n)| c[i] * c[i] * n)
        .sum();
    if !(variance > 0.0) {
        return Err(FddError::SingularWeights);
    }
    Ok(db(result.spectrum.values[i].norm_sqr() / variance))
}

/// Σ_l β^H_l(k)²/β^H_l(0) at a lattice wavevector.
pub fn information_at(otfs: &OtfSet, k: [f64; 2]) -> Result<f64> {
    let grid = otfs.grid();
    let (bx, by) = grid.lattice_bin(k)?;
    Ok(otfs.information_density(grid.bin_index(bx, by)))
}

/// Expected SNR gain of a hybrid acquisition over direct imaging at the
/// same photon budget: 10·log10(Σ β^H²/β^H(0) / β²).
pub fn theoretical_snr_gain_db(otfs: &OtfSet, otf_di: &Otf, k: [f64; 2]) -> Result<f64> {
    let h = information_at(otfs, k)?;
    let d = information_at(&OtfSet::direct(otf_di), k)?;
    Ok(db(h / d))
}

pub fn snr_csv(reports: &[SnrReport]) -> String {
    let frames = reports.iter().map(|r| r.per_frame_db.len()).max().unwrap_or(0);
    let mut s = String::from("kx,ky,method");
    for l in 0..frames {
        let _ = write!(s, ",frame{l}_dB");
    }
    s.push_str(",combined_dB\n");
    for r in reports {
        let _ = write!(s, "{:e},{:e},{:?}", r.k[0], r.k[1], r.method);
        for l in 0..frames {
            let v = r.per_frame_db.get(l).copied().unwrap_or(f64::NAN);
            let _ = write!(s, ",{v:.4}");
        }
        let _ = writeln!(s, ",{:.4}", r.combined_db);
    }
    s
}

/// Nearest lattice wavevector to `ratio·cutoff` along +k_x.
pub fn axis_k(grid: &GridSpec, cutoff: f64, ratio: f64) -> [f64; 2] {
    [(ratio * cutoff / grid.dkx()).round() * grid.dkx(), 0.0]
}
