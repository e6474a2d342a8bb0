//! Browser bindings for three interactive views: OTF and CRB curves for a
//! chosen partition, photon-budget curves, and a simulated bar-chart
//! acquisition reconstructed three ways and rendered as RGBA.
//!
//! The plain functions are usable (and tested) natively; the
//! `#[wasm_bindgen]` wrappers serialize their results for JavaScript.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use fdd_core::budget::{BudgetModel, BudgetParams};
use fdd_core::estimation::fisher_table;
use fdd_core::fourier::fft_forward;
use fdd_core::optics::{hybrid_otfs, make_circular_pupil, partition_fdd, region_otfs, OtfSet, PupilPartition, RegionOtfs};
use fdd_core::reconstruct::{fused_snr_db, reconstruct_spectra, NoiseMethod, ReconstructionConfig};
use fdd_core::sample::{make_test_chart, Orientation};
use fdd_core::simulate::{acquire_trial, AcquisitionConfig};
use fdd_core::{GridSpec, OpticsSpec, RealField};

const WAVELENGTH_NM: f64 = 540.0;
const NA: f64 = 1.4;
const CHART_LINES_PER_MM: f64 = 4500.0;

fn optics() -> OpticsSpec {
    OpticsSpec::new(WAVELENGTH_NM, NA).expect("fixed optics are valid")
}

fn regions(grid: &GridSpec, inner_ratio: f64) -> fdd_core::Result<RegionOtfs> {
    let pupil = make_circular_pupil(&optics(), grid)?;
    let canvas = PupilPartition::minimum_canvas(&pupil)?;
    region_otfs(&partition_fdd(&pupil, inner_ratio, &canvas)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct OtfCurves {
    pub k_over_kc: Vec<f64>,
    pub beta_full: Vec<f64>,
    /// One profile per pupil region (central disk first).
    pub beta_regions: Vec<Vec<f64>>,
    /// CRB^DI / CRB^hybrid along the axis; NaN where undefined.
    pub crb_ratio: Vec<f64>,
    pub area_fractions: Vec<f64>,
}

pub fn otf_curves(inner_ratio: f64, alpha: f64, size: usize) -> fdd_core::Result<OtfCurves> {
    let o = optics();
    let grid = o.default_grid(size)?;
    let r = regions(&grid, inner_ratio)?;
    let kc = o.cutoff();
    let bins: Vec<i64> = (0..grid.nx as i64 / 2).filter(|&j| (j as f64) * grid.dkx() < kc).collect();
    let ks: Vec<[f64; 2]> = bins.iter().map(|&j| [j as f64 * grid.dkx(), 0.0]).collect();
    let table = fisher_table(&r, alpha, 1.0, &ks)?;
    // rows alternate cos/sin per k; the two are equal on the axis
    let crb_ratio = table
        .rows
        .chunks(2)
        .map(|pair| {
            let c = pair[0].crbs();
            if c[3].is_finite() && c[1].is_finite() {
                c[1] / c[3]
            } else {
                f64::NAN
            }
        })
        .collect();
    Ok(OtfCurves {
        k_over_kc: ks.iter().map(|k| k[0] / kc).collect(),
        beta_full: bins.iter().map(|&j| r.full.at(j, 0)).collect(),
        beta_regions: r.regions.iter().map(|o| bins.iter().map(|&j| o.at(j, 0)).collect()).collect(),
        crb_ratio,
        area_fractions: r.regions.iter().map(|o| o.dc()).collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BudgetCurves {
    pub resolution_nm: Vec<f64>,
    pub n_di: Vec<f64>,
    pub n_fdd: Vec<f64>,
    pub best_alpha: Vec<f64>,
    pub best_inner_ratio: Vec<f64>,
    pub sweep_photons: Vec<f64>,
    pub sweep_ratio: Vec<f64>,
    pub rayleigh_nm: f64,
    pub rayleigh_ratio: f64,
}

pub fn budget_curves(roughness: f64, gamma: f64, size: usize) -> fdd_core::Result<BudgetCurves> {
    let o = optics();
    let grid = o.default_grid(size)?;
    let params = BudgetParams { roughness, gamma, ..BudgetParams::default() };
    let model = BudgetModel::new(&o, &grid, &params)?;
    let curve = model.curve()?;
    let sweep = model.resolution_sweep(121, 6.0)?;
    let rayleigh = model.point(2.0 * std::f64::consts::PI / o.rayleigh_nm())?;
    Ok(BudgetCurves {
        resolution_nm: curve.iter().map(|p| p.resolution_nm).collect(),
        n_di: curve.iter().map(|p| p.n_di).collect(),
        n_fdd: curve.iter().map(|p| p.n_fdd).collect(),
        best_alpha: curve.iter().map(|p| p.alpha).collect(),
        best_inner_ratio: curve.iter().map(|p| p.inner_ratio).collect(),
        sweep_photons: sweep.iter().map(|p| p.photons).collect(),
        sweep_ratio: sweep.iter().map(|p| p.ratio()).collect(),
        rayleigh_nm: o.rayleigh_nm(),
        rayleigh_ratio: rayleigh.ratio(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonSummary {
    pub width: usize,
    pub height: usize,
    pub pixel_nm: f64,
    pub k_over_kc: f64,
    pub panels: [&'static str; 3],
    pub snr_di_dcv_db: f64,
    pub snr_fdd_db: f64,
}

/// Three side-by-side panels (raw DI, DI deconvolution, FDD) as RGBA.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Comparison {
    rgba: Vec<u8>,
    summary: ComparisonSummary,
}

#[wasm_bindgen]
impl Comparison {
    pub fn width(&self) -> usize {
        self.summary.width
    }

    pub fn height(&self) -> usize {
        self.summary.height
    }

    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string(&self.summary).unwrap_or_default()
    }
}

impl Comparison {
    pub fn pixels(&self) -> &[u8] {
        &self.rgba
    }

    pub fn summary(&self) -> &ComparisonSummary {
        &self.summary
    }
}

/// Central half of the field, min-max scaled to gray and doubled in size.
fn render_panel(field: &RealField, out: &mut [u8], stride: usize, x0: usize) {
    let n = field.grid.nx;
    let (lo_i, hi_i) = (n / 4, n / 4 + n / 2);
    let crop: Vec<f64> = (lo_i..hi_i).flat_map(|iy| (lo_i..hi_i).map(move |ix| field.values[iy * n + ix])).collect();
    let lo = crop.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = crop.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let side = n / 2;
    for y in 0..n {
        for x in 0..n {
            let v = crop[(y / 2) * side + x / 2];
            let g = (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8;
            let p = 4 * (y * stride + x0 + x);
            out[p..p + 4].copy_from_slice(&[g, g, g, 255]);
        }
    }
}

pub fn compare(photons_per_pixel: f64, alpha: f64, inner_ratio: f64, seed: u64, size: usize) -> fdd_core::Result<Comparison> {
    let o = optics();
    let kc = o.cutoff();
    let pitch = 1e6 / CHART_LINES_PER_MM;
    // whole number of chart periods across the field, pixel near 16.5 nm
    let periods = (size as f64 * 16.5 / pitch).round().max(1.0);
    let grid = GridSpec::new(size, size, periods * pitch / size as f64)?;
    let k0 = [periods * grid.dkx(), 0.0];
    let r = regions(&grid, inner_ratio)?;
    let fdd_set = hybrid_otfs(&r, alpha)?;
    let di_set = OtfSet::direct(&r.full);
    let object = fft_forward(&make_test_chart(CHART_LINES_PER_MM, 5, &grid, Orientation::Vertical)?)?;
    let photons = photons_per_pixel * grid.len() as f64;
    let rc = ReconstructionConfig::default();

    let fdd_cfg = AcquisitionConfig { photons, alpha, seed, read_noise: 0.0 };
    let fdd_spectra = acquire_trial(&object, &fdd_set, &fdd_cfg, 0)?.spectra()?;
    let fdd = reconstruct_spectra(&fdd_spectra, &fdd_set, &rc)?;
    let di_cfg = AcquisitionConfig { alpha: 0.0, ..fdd_cfg };
    let di_raw = acquire_trial(&object, &di_set, &di_cfg, 0)?;
    let di_spectra = di_raw.spectra()?;
    let dcv = reconstruct_spectra(&di_spectra, &di_set, &rc)?;

    let (w, h) = (3 * size, size);
    let mut rgba = vec![0u8; 4 * w * h];
    for (i, panel) in [&di_raw.frames[0], &dcv.image, &fdd.image].into_iter().enumerate() {
        render_panel(panel, &mut rgba, w, i * size);
    }
    Ok(Comparison {
        rgba,
        summary: ComparisonSummary {
            width: w,
            height: h,
            pixel_nm: grid.dx,
            k_over_kc: k0[0] / kc,
            panels: ["DI", "DI deconvolution", "FDD"],
            snr_di_dcv_db: fused_snr_db(&dcv, &di_spectra, k0, NoiseMethod::Theory, kc)?,
            snr_fdd_db: fused_snr_db(&fdd, &fdd_spectra, k0, NoiseMethod::Theory, kc)?,
        },
    })
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// JSON-encoded [`OtfCurves`].
#[wasm_bindgen(js_name = otfCurves)]
pub fn otf_curves_json(inner_ratio: f64, alpha: f64, size: usize) -> Result<String, JsError> {
    serde_json::to_string(&otf_curves(inner_ratio, alpha, size).map_err(js_err)?).map_err(js_err)
}

/// JSON-encoded [`BudgetCurves`].
#[wasm_bindgen(js_name = budgetCurves)]
pub fn budget_curves_json(roughness: f64, gamma: f64, size: usize) -> Result<String, JsError> {
    serde_json::to_string(&budget_curves(roughness, gamma, size).map_err(js_err)?).map_err(js_err)
}

#[wasm_bindgen(js_name = simulateChart)]
pub fn simulate_chart(photons_per_pixel: f64, alpha: f64, inner_ratio: f64, seed: u64, size: usize) -> Result<Comparison, JsError> {
    compare(photons_per_pixel, alpha, inner_ratio, seed, size).map_err(js_err)
}
