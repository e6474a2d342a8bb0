//! Numerical check of the analytic QFI/FI/CRB expressions on a random 1D
//! object with many Fourier modes.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::numeric::{
    fi_numeric, frame_mean_and_derivatives, qfi_numeric_1d, FisherMatrix, Grid1D, Model1D, Pupil1D, Sample1D,
};
use crate::error::{FddError, Result};
use crate::sample::Quadrature;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub points: usize,
    pub modes: usize,
    /// Full pupil spans bins -w..=w, so k_c = (2w+1)·dk.
    pub pupil_half_width: i64,
    /// Central region of the two-region 1D partition.
    pub inner_half_width: i64,
    pub alpha: f64,
    /// min f / max f of the generated object.
    pub min_ratio: f64,
    pub seed: u64,
    /// Highest k/k_c at which CRBs are compared.
    pub k_max_ratio: f64,
    pub crb_tolerance: f64,
    pub offdiagonal_tolerance: f64,
    pub psd_tolerance: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            points: 512,
            modes: 48,
            pupil_half_width: 24,
            inner_half_width: 17,
            alpha: 0.6,
            min_ratio: 0.1,
            seed: 48,
            k_max_ratio: 0.9,
            crb_tolerance: 0.15,
            offdiagonal_tolerance: 0.05,
            psd_tolerance: 1e-6,
        }
    }
}

/// Object with Gaussian mode amplitudes on bins 1..=modes, offset so that
/// min f = min_ratio·max f and scaled to unit integral over the period.
pub fn random_sample(grid: &Grid1D, modes: usize, min_ratio: f64, seed: u64) -> Result<Sample1D> {
    if !(0.0..1.0).contains(&min_ratio) {
        return Err(FddError::InvalidParameter(format!("min/max ratio must lie in [0, 1), got {min_ratio}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bins: Vec<i64> = (1..=modes as i64).collect();
    let a: Vec<f64> = (0..modes).map(|_| StandardNormal.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..modes).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut sample = Sample1D { a0: 0.0, bins, a, b };
    let varying = sample.intensity(grid);
    let hmax = varying.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hmin = varying.iter().copied().fold(f64::INFINITY, f64::min);
    let offset = (min_ratio * hmax - hmin) / (1.0 - min_ratio);
    let scale = 1.0 / (grid.length * offset);
    sample.a.iter_mut().chain(sample.b.iter_mut()).for_each(|v| *v *= scale);
    sample.a0 = 1.0 / grid.length;
    Ok(sample)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub bin: i64,
    pub k_over_kc: f64,
    pub quadrature: Quadrature,
    pub qcrb_numeric: f64,
    pub qcrb_analytic: f64,
    pub crb_di_numeric: f64,
    pub crb_di_analytic: f64,
    pub crb_hybrid_numeric: f64,
    pub crb_hybrid_analytic: f64,
}

impl ValidationRow {
    /// Largest |numeric/analytic - 1| over the three bounds.
    pub fn worst_relative_error(&self) -> f64 {
        [
            (self.qcrb_numeric, self.qcrb_analytic),
            (self.crb_di_numeric, self.crb_di_analytic),
            (self.crb_hybrid_numeric, self.crb_hybrid_analytic),
        ]
        .iter()
        .map(|(n, a)| (n / a - 1.0).abs())
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config: ValidationConfig,
    pub support_size: usize,
    pub sample_min_over_max: f64,
    pub offdiagonal_qfi: f64,
    pub offdiagonal_fi_di: f64,
    pub offdiagonal_fi_hybrid: f64,
    /// Smallest eigenvalue of QFI - FI^DI and of QFI - FI^hybrid.
    pub min_eigenvalue_qfi_minus_fi_di: f64,
    pub min_eigenvalue_qfi_minus_fi_hybrid: f64,
    /// Largest relative cos/sin mismatch of the numeric QFI diagonal.
    pub cos_sin_mismatch: f64,
    pub rows: Vec<ValidationRow>,
    pub offdiagonal_pass: bool,
    pub crb_pass: bool,
    pub psd_pass: bool,
    /// k/k_c of compared rows outside the CRB tolerance.
    pub failing_k: Vec<f64>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.offdiagonal_pass && self.crb_pass && self.psd_pass
    }

    pub fn max_compared_error(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.k_over_kc <= self.config.k_max_ratio)
            .map(ValidationRow::worst_relative_error)
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "bin,k_over_kc,mode,QCRB_numeric,QCRB_analytic,CRB_DI_numeric,CRB_DI_analytic,CRB_hybrid_numeric,CRB_hybrid_analytic,compared,within_tolerance\n",
        );
        for r in &self.rows {
            let compared = r.k_over_kc <= self.config.k_max_ratio;
            let ok = !compared || r.worst_relative_error() <= self.config.crb_tolerance;
            let _ = writeln!(
                s,
                "{},{:.6},{},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
                r.bin,
                r.k_over_kc,
                r.quadrature,
                r.qcrb_numeric,
                r.qcrb_analytic,
                r.crb_di_numeric,
                r.crb_di_analytic,
                r.crb_hybrid_numeric,
                r.crb_hybrid_analytic,
                compared,
                ok
            );
        }
        s
    }
}

/// Frames of the 1D hybrid acquisition: (transfer, photon weight).
fn hybrid_frames(pupil: &Pupil1D, inner: i64, alpha: f64) -> Vec<(Pupil1D, f64)> {
    let (central, outer) = pupil.split(inner);
    vec![(pupil.clone(), 1.0 - alpha), (central, alpha), (outer, alpha)]
}

fn classical_fi(sample: &Sample1D, grid: &Grid1D, frames: &[(Pupil1D, f64)], full: usize) -> Result<FisherMatrix> {
    let mut total: Option<FisherMatrix> = None;
    for (p, w) in frames {
        if *w == 0.0 || p.is_empty() {
            continue;
        }
        let (mean, d) = frame_mean_and_derivatives(sample, grid, |q| p.otf(q, full), *w);
        let fi = fi_numeric(&mean, &d, grid.dx(), 1.0, sample.labels())?;
        total = Some(match total {
            None => fi,
            Some(t) => FisherMatrix { labels: t.labels, matrix: t.matrix + fi.matrix },
        });
    }
    total.ok_or(FddError::SingularWeights)
}

/// Run the comparison and judge it against the configured tolerances.
pub fn run_validation(config: &ValidationConfig) -> Result<ValidationReport> {
    let grid = Grid1D::new(config.points, 1.0)?;
    if config.modes as i64 > 2 * config.pupil_half_width {
        return Err(FddError::InvalidParameter("more modes than the pupil transmits".into()));
    }
    if !(0.0..=1.0).contains(&config.alpha) {
        return Err(FddError::InvalidParameter(format!("alpha must lie in [0, 1], got {}", config.alpha)));
    }
    let pupil = Pupil1D::centered(config.pupil_half_width);
    let full = pupil.len();
    let model = Model1D::new(grid, pupil.clone())?;
    let sample = random_sample(&grid, config.modes, config.min_ratio, config.seed)?;
    let f = sample.intensity(&grid);
    let fmax = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let fmin = f.iter().copied().fold(f64::INFINITY, f64::min);

    let rho = model.density(&f)?;
    let qfi = qfi_numeric_1d(&model, &rho, &sample)?;
    let di = classical_fi(&sample, &grid, &[(pupil.clone(), 1.0)], full)?;
    let frames = hybrid_frames(&pupil, config.inner_half_width, config.alpha);
    let hybrid = classical_fi(&sample, &grid, &frames, full)?;

    let cq = qfi.crb_diagonal()?;
    let cd = di.crb_diagonal()?;
    let ch = hybrid.crb_diagonal()?;
    let a0 = sample.a0;
    let kc_bins = (2 * config.pupil_half_width + 1) as f64;
    let m = sample.bins.len();
    let mut rows = Vec::with_capacity(2 * m);
    for (qi, quadrature) in [(0usize, Quadrature::Cos), (1, Quadrature::Sin)] {
        for (l, &q) in sample.bins.iter().enumerate() {
            let i = qi * m + l;
            let beta = pupil.otf(q, full);
            let info_h: f64 = frames
                .iter()
                .filter(|(p, w)| *w > 0.0 && !p.is_empty())
                .map(|(p, w)| {
                    let b = w * p.otf(q, full);
                    b * b / (w * p.otf(0, full))
                })
                .sum();
            rows.push(ValidationRow {
                bin: q,
                k_over_kc: q as f64 / kc_bins,
                quadrature,
                qcrb_numeric: cq[i],
                qcrb_analytic: 2.0 * a0 * a0 / beta,
                crb_di_numeric: cd[i],
                crb_di_analytic: 2.0 * a0 * a0 / (beta * beta),
                crb_hybrid_numeric: ch[i],
                crb_hybrid_analytic: 2.0 * a0 * a0 / info_h,
            });
        }
    }

    let qd = qfi.diagonal();
    let cos_sin_mismatch = (0..m)
        .map(|l| (qd[l] / qd[l + m] - 1.0).abs())
        .fold(0.0, f64::max);
    let offdiagonal_qfi = qfi.offdiagonal_mass_ratio();
    let offdiagonal_fi_di = di.offdiagonal_mass_ratio();
    let offdiagonal_fi_hybrid = hybrid.offdiagonal_mass_ratio();
    let min_di = qfi.sub(&di)?.min_eigenvalue();
    let min_h = qfi.sub(&hybrid)?.min_eigenvalue();

    let failing_k: Vec<f64> = rows
        .iter()
        .filter(|r| r.k_over_kc <= config.k_max_ratio && r.worst_relative_error() > config.crb_tolerance)
        .map(|r| r.k_over_kc)
        .collect();
    let offdiagonal_pass = [offdiagonal_qfi, offdiagonal_fi_di, offdiagonal_fi_hybrid]
        .iter()
        .all(|&v| v < config.offdiagonal_tolerance);
    let psd_pass = min_di >= -config.psd_tolerance && min_h >= -config.psd_tolerance;

    Ok(ValidationReport {
        config: config.clone(),
        support_size: rho.support.len(),
        sample_min_over_max: fmin / fmax,
        offdiagonal_qfi,
        offdiagonal_fi_di,
        offdiagonal_fi_hybrid,
        min_eigenvalue_qfi_minus_fi_di: min_di,
        min_eigenvalue_qfi_minus_fi_hybrid: min_h,
        cos_sin_mismatch,
        crb_pass: failing_k.is_empty(),
        rows,
        offdiagonal_pass,
        psd_pass,
        failing_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_sample_contrast_and_normalization() {
        let grid = Grid1D::new(256, 1.0).unwrap();
        let s = random_sample(&grid, 20, 0.1, 5).unwrap();
        let f = s.intensity(&grid);
        let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = f.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((min / max - 0.1).abs() < 1e-12);
        assert!((f.iter().sum::<f64>() * grid.dx() - 1.0).abs() < 1e-12);
        assert_eq!(s, random_sample(&grid, 20, 0.1, 5).unwrap());
        assert!(random_sample(&grid, 20, 1.0, 5).is_err());
    }

    #[test]
    fn small_validation_is_consistent() {
        let cfg = ValidationConfig { points: 128, modes: 12, pupil_half_width: 6, inner_half_width: 4, ..Default::default() };
        let r = run_validation(&cfg).unwrap();
        assert_eq!(r.rows.len(), 24);
        assert!(r.min_eigenvalue_qfi_minus_fi_di > -1e-8);
        assert!(r.min_eigenvalue_qfi_minus_fi_hybrid > -1e-8);
        assert_eq!(r.support_size, 13);
        assert!(r.to_csv().lines().count() == 25);
    }

    #[test]
    fn too_many_modes_rejected() {
        let cfg = ValidationConfig { points: 128, modes: 14, pupil_half_width: 6, ..Default::default() };
        assert!(run_validation(&cfg).is_err());
    }
}
