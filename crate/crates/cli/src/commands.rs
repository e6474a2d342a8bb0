use std::fmt::Write as _;
use std::path::Path;

use fdd_core::budget::{budget_csv, resolution_csv, BudgetModel};
use fdd_core::estimation::{axis_wavevectors, fisher_table, run_validation};
use fdd_core::fourier::fft_inverse;
use fdd_core::io::{load_raw_image_set, save_raw_image_set, Layout};
use fdd_core::optics::{compute_psf, hybrid_otfs, OtfSet};
use fdd_core::reconstruct::{
    estimate_fourier_params, fused_snr_db, information_at, reconstruct_spectra, snr_at_k, theoretical_snr_gain_db,
    FourierEstimate, NoiseMethod,
};
use fdd_core::simulate::{mean_images, noisy_frames, AcquisitionConfig, RawImageSet};
use fdd_core::SpectralField;

use crate::artifacts::Artifacts;
use crate::config::ExperimentConfig;
use crate::CliError;

/// What a command reports back: human-readable lines and, when a checked
/// invariant does not hold, the reason (exit code 3 after the manifest is
/// written).
#[derive(Default)]
pub struct Outcome {
    pub summary: Vec<String>,
    pub failure: Option<String>,
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn chat(rho: f64) -> f64 {
    if rho >= 1.0 {
        return 0.0;
    }
    2.0 / std::f64::consts::PI * (rho.acos() - rho * (1.0 - rho * rho).sqrt())
}

pub fn otf(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Outcome, CliError> {
    let partition = cfg.partition()?;
    let r = cfg.region_otfs()?;
    let grid = r.full.grid;
    let kc = cfg.optics().cutoff();
    art.field("otf_full.f32", &r.full.to_field(), Layout::Centered, "1")?;
    for (l, o) in r.regions.iter().enumerate() {
        art.field(&format!("otf_region_{}.f32", l + 1), &o.to_field(), Layout::Centered, "1")?;
    }
    art.field("psf.f32", &compute_psf(&partition.parent)?, Layout::Centered, "1/nm^2")?;

    let mut csv = String::from("k_rad_per_nm,k_over_kc,chat,beta_full");
    for l in 1..=r.regions.len() {
        let _ = write!(csv, ",beta_{l}");
    }
    csv.push('\n');
    for j in 0..grid.nx as i64 / 2 {
        let k = j as f64 * grid.dkx();
        let _ = write!(csv, "{k:e},{:.6},{:.8},{:.8}", k / kc, chat(k / kc), r.full.at(j, 0));
        for o in &r.regions {
            let _ = write!(csv, ",{:.8}", o.at(j, 0));
        }
        csv.push('\n');
    }
    art.text("otf_axis.csv", &csv)?;
    let report = partition.describe();
    art.json("partition.json", &report)?;

    let fractions: Vec<String> = report.area_fractions.iter().map(|f| format!("{f:.4}")).collect();
    Ok(Outcome {
        summary: vec![
            format!("grid {}x{} at {:.3} nm, k_c = {kc:.5e} rad/nm", grid.nx, grid.ny, grid.dx),
            format!("k_a/k_c = {}, region area fractions [{}]", cfg.partition.inner_ratio, fractions.join(", ")),
        ],
        failure: None,
    })
}

pub fn fisher(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Outcome, CliError> {
    let r = cfg.region_otfs()?;
    let kc = cfg.optics().cutoff();
    let ks: Vec<[f64; 2]> = axis_wavevectors(&r.full).into_iter().filter(|k| k[0] < kc).collect();
    let table = fisher_table(&r, cfg.acquisition.alpha, 1.0, &ks)?;
    art.text("fisher.csv", &table.to_csv())?;

    let j = (0.9 * kc / r.full.grid.dkx()).round() as usize;
    let mut summary = vec![format!("{} wavevectors up to k_c, alpha = {}", ks.len(), cfg.acquisition.alpha)];
    if let Some(row) = table.rows.iter().filter(|row| row.k[0] > 0.0).find(|row| (row.k[0] / r.full.grid.dkx()).round() as usize == j) {
        let c = row.crbs();
        summary.push(format!("CRB_DI/CRB_hybrid at {:.3} k_c: {:.3}", row.k[0] / kc, c[1] / c[3]));
    }
    Ok(Outcome { summary, failure: None })
}

pub fn budget(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Outcome, CliError> {
    let optics = cfg.optics();
    let grid = optics.default_grid(cfg.budget.grid_px)?;
    let model = BudgetModel::new(&optics, &grid, &cfg.budget.params())?;
    let curve = model.curve()?;
    art.text("budget.csv", &budget_csv(&curve))?;
    let sweep = model.resolution_sweep(cfg.budget.sweep_points, cfg.budget.sweep_decades)?;
    art.text("resolution.csv", &resolution_csv(&sweep))?;

    let rayleigh = model.point(2.0 * std::f64::consts::PI / optics.rayleigh_nm())?;
    let best = sweep.iter().max_by(|a, b| a.ratio().total_cmp(&b.ratio())).expect("sweep has points");
    let summary = serde_json::json!({
        "rayleigh": rayleigh,
        "rayleigh_ratio": rayleigh.ratio(),
        "peak_resolution_ratio": best.ratio(),
        "peak_at_photons_per_airy_disk": best.photons,
    });
    art.json("budget_summary.json", &summary)?;
    Ok(Outcome {
        summary: vec![
            format!(
                "n_DI/n_FDD at the Rayleigh limit: {:.3} (alpha* = {:.2}, k_a* = {:.2} k_c)",
                rayleigh.ratio(),
                rayleigh.alpha,
                rayleigh.inner_ratio
            ),
            format!("peak DI/FDD resolution ratio {:.4} at {:.3e} photons per Airy disk", best.ratio(), best.photons),
        ],
        failure: None,
    })
}

pub fn simulate(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Outcome, CliError> {
    let r = cfg.region_otfs()?;
    let set = hybrid_otfs(&r, cfg.acquisition.alpha)?;
    let (object, _) = cfg.object()?;
    art.field("object.f32", &fft_inverse(&object), Layout::Natural, "1/nm^2")?;
    let acq = cfg.acquisition.to_core();
    let means = mean_images(&object, &set, acq.photons)?;
    let mut clipped = 0;
    for t in 0..cfg.acquisition.trials {
        let raw = noisy_frames(&means, &acq, t)?;
        clipped += raw.clipped;
        let dir = format!("raw/trial_{t:04}");
        art.adopt(save_raw_image_set(&art.path(&dir), &raw, cfg.partition.inner_ratio)?);
        if t == 0 {
            for (l, f) in raw.frames.iter().enumerate() {
                art.preview(&format!("{dir}/frame_{l}.pgm"), f)?;
            }
        }
    }
    let mut summary = vec![format!(
        "{} trial(s) of 6 frames, N = {:e}, alpha = {}, seed = {}",
        cfg.acquisition.trials, acq.photons, acq.alpha, acq.seed
    )];
    if clipped > 0 {
        summary.push(format!("{clipped} pixel(s) clipped at zero after read noise"));
    }
    Ok(Outcome { summary, failure: None })
}

struct Arms {
    fdd: OtfSet,
    di: OtfSet,
    fdd_acq: AcquisitionConfig,
    di_acq: AcquisitionConfig,
}

fn arms(cfg: &ExperimentConfig) -> Result<Arms, CliError> {
    let r = cfg.region_otfs()?;
    let fdd_acq = cfg.acquisition.to_core();
    Ok(Arms {
        fdd: hybrid_otfs(&r, fdd_acq.alpha)?,
        di: OtfSet::direct(&r.full),
        fdd_acq,
        di_acq: AcquisitionConfig { alpha: 0.0, ..fdd_acq },
    })
}

fn frames_for(arms: &Arms, means_fdd: &[fdd_core::RealField], t: u64, loaded: &Option<RawImageSet>) -> Result<RawImageSet, CliError> {
    Ok(match loaded {
        Some(raw) => raw.clone(),
        None => noisy_frames(means_fdd, &arms.fdd_acq, t)?,
    })
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, v.sqrt())
}

pub fn reconstruct(cfg: &ExperimentConfig, raw_dir: Option<&Path>, art: &mut Artifacts) -> Result<Outcome, CliError> {
    let arms = arms(cfg)?;
    let (object, a0) = cfg.object()?;
    let kc = cfg.optics().cutoff();
    let ks = cfg.probe_wavevectors()?;
    let loaded = match raw_dir {
        None => None,
        Some(dir) => {
            let (raw, inner) = load_raw_image_set(dir)?;
            if (inner - cfg.partition.inner_ratio).abs() > 1e-12 || (raw.config.alpha - cfg.acquisition.alpha).abs() > 1e-12 {
                return Err(CliError::Config(format!(
                    "{}: recorded k_a/k_c = {inner}, alpha = {} do not match the config ({}, {})",
                    dir.display(),
                    raw.config.alpha,
                    cfg.partition.inner_ratio,
                    cfg.acquisition.alpha
                )));
            }
            Some(raw)
        }
    };
    let trials = if loaded.is_some() { 1 } else { cfg.acquisition.trials };
    let photons = arms.fdd_acq.photons;
    let means_fdd = mean_images(&object, &arms.fdd, photons)?;
    let means_di = mean_images(&object, &arms.di, photons)?;
    let truth = estimate_fourier_params(&object, a0, 1.0, &ks)?;

    let mut csv = String::from("trial,kx,ky,k_over_kc,a_true,b_true,a_fdd,b_fdd,a_di_dcv,b_di_dcv\n");
    let mut fdd_est: Vec<Vec<FourierEstimate>> = vec![Vec::new(); ks.len()];
    let mut di_est: Vec<Vec<FourierEstimate>> = vec![Vec::new(); ks.len()];
    let mut floored = 0;
    for t in 0..trials {
        let raw = frames_for(&arms, &means_fdd, t, &loaded)?;
        let di_raw = noisy_frames(&means_di, &arms.di_acq, t)?;
        let fdd = reconstruct_spectra(&raw.spectra()?, &arms.fdd, &cfg.reconstruction)?;
        let di = reconstruct_spectra(&di_raw.spectra()?, &arms.di, &cfg.reconstruction)?;
        floored += fdd.floored + di.floored;
        if t == 0 {
            art.field("fdd_image.f32", &fdd.image, Layout::Natural, "photons/nm^2")?;
            art.field("di_dcv_image.f32", &di.image, Layout::Natural, "photons/nm^2")?;
            art.field("di_image.f32", &di_raw.frames[0], Layout::Natural, "photons/nm^2")?;
            art.preview("fdd_image.pgm", &fdd.image)?;
            art.preview("di_dcv_image.pgm", &di.image)?;
            art.preview("di_image.pgm", &di_raw.frames[0])?;
        }
        let ef = estimate_fourier_params(&fdd.spectrum, a0, photons, &ks)?;
        let ed = estimate_fourier_params(&di.spectrum, a0, photons, &ks)?;
        for i in 0..ks.len() {
            let _ = writeln!(
                csv,
                "{t},{:e},{:e},{:.6},{:e},{:e},{:e},{:e},{:e},{:e}",
                ks[i][0],
                ks[i][1],
                ks[i][0].hypot(ks[i][1]) / kc,
                truth[i].a,
                truth[i].b,
                ef[i].a,
                ef[i].b,
                ed[i].a,
                ed[i].b
            );
            fdd_est[i].push(ef[i]);
            di_est[i].push(ed[i]);
        }
    }
    art.text("estimates.csv", &csv)?;

    let mut summary = vec![format!("{trials} trial(s), {} probe wavevector(s)", ks.len())];
    if floored > 0 {
        summary.push(format!("epsilon replaced by its floor at {floored} bin-passes"));
    }
    if trials >= 2 {
        let mut table = String::from(
            "kx,ky,k_over_kc,trials,crb_hybrid,crb_di,a_true,a_mean,a_bias_over_se,a_var_over_crb,b_true,b_mean,b_bias_over_se,b_var_over_crb,di_a_var_over_crb,di_b_var_over_crb\n",
        );
        let n = trials as f64;
        for (i, k) in ks.iter().enumerate() {
            let crb_h = 2.0 * a0 * a0 / (photons * information_at(&arms.fdd, *k)?);
            let crb_d = 2.0 * a0 * a0 / (photons * information_at(&arms.di, *k)?);
            let fa: Vec<f64> = fdd_est[i].iter().map(|e| e.a).collect();
            let fb: Vec<f64> = fdd_est[i].iter().map(|e| e.b).collect();
            let (ma, sa) = mean_sd(&fa);
            let (mb, sb) = mean_sd(&fb);
            let (_, da) = mean_sd(&di_est[i].iter().map(|e| e.a).collect::<Vec<_>>());
            let (_, dbv) = mean_sd(&di_est[i].iter().map(|e| e.b).collect::<Vec<_>>());
            let za = (ma - truth[i].a) / (sa / n.sqrt());
            let zb = (mb - truth[i].b) / (sb / n.sqrt());
            let _ = writeln!(
                table,
                "{:e},{:e},{:.6},{trials},{crb_h:e},{crb_d:e},{:e},{ma:e},{za:.3},{:.4},{:e},{mb:e},{zb:.3},{:.4},{:.4},{:.4}",
                k[0],
                k[1],
                k[0].hypot(k[1]) / kc,
                truth[i].a,
                sa * sa / crb_h,
                truth[i].b,
                sb * sb / crb_h,
                da * da / crb_d,
                dbv * dbv / crb_d
            );
            summary.push(format!(
                "k = {:.3} k_c: Var(a)/CRB_hybrid = {:.3}, bias = {za:+.2} SE",
                k[0].hypot(k[1]) / kc,
                sa * sa / crb_h
            ));
        }
        art.text("crb_saturation.csv", &table)?;
    }
    Ok(Outcome { summary, failure: None })
}

pub fn snr(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Outcome, CliError> {
    let arms = arms(cfg)?;
    let r = cfg.region_otfs()?;
    let (object, _) = cfg.object()?;
    let kc = cfg.optics().cutoff();
    let ks = cfg.probe_wavevectors()?;
    let means_fdd = mean_images(&object, &arms.fdd, arms.fdd_acq.photons)?;
    let means_di = mean_images(&object, &arms.di, arms.di_acq.photons)?;
    let frames = arms.fdd.frames.len();

    let mut csv = String::from("trial,kx,ky,k_over_kc,method");
    for l in 0..frames {
        let _ = write!(csv, ",frame{l}_dB");
    }
    csv.push_str(",raw_combined_dB,fused_fdd_dB,di_raw_dB,fused_di_dcv_dB,gain_dB,theory_gain_dB\n");
    let methods = [NoiseMethod::Theory, NoiseMethod::OutOfBand];
    // linear SNR sums per (k, method) for the summary
    let mut sums = vec![[[0.0f64; 2]; 2]; ks.len()];
    for t in 0..cfg.acquisition.trials {
        let raw = noisy_frames(&means_fdd, &arms.fdd_acq, t)?;
        let di_raw = noisy_frames(&means_di, &arms.di_acq, t)?;
        let spectra: Vec<SpectralField> = raw.spectra()?;
        let di_spectra: Vec<SpectralField> = di_raw.spectra()?;
        let fdd = reconstruct_spectra(&spectra, &arms.fdd, &cfg.reconstruction)?;
        let di = reconstruct_spectra(&di_spectra, &arms.di, &cfg.reconstruction)?;
        for (i, k) in ks.iter().enumerate() {
            let theory_gain = theoretical_snr_gain_db(&arms.fdd, &r.full, *k)?;
            for (m, method) in methods.iter().enumerate() {
                let per = snr_at_k(&spectra, *k, *method, kc)?;
                let di_per = snr_at_k(&di_spectra, *k, *method, kc)?;
                let f = fused_snr_db(&fdd, &spectra, *k, *method, kc)?;
                let d = fused_snr_db(&di, &di_spectra, *k, *method, kc)?;
                sums[i][m][0] += 10f64.powf(f / 10.0);
                sums[i][m][1] += 10f64.powf(d / 10.0);
                let label = match method {
                    NoiseMethod::Theory => "theory",
                    NoiseMethod::OutOfBand => "out_of_band",
                };
                let _ = write!(csv, "{t},{:e},{:e},{:.6},{label}", k[0], k[1], k[0].hypot(k[1]) / kc);
                for v in &per.per_frame_db {
                    let _ = write!(csv, ",{v:.4}");
                }
                let _ = writeln!(
                    csv,
                    ",{:.4},{f:.4},{:.4},{d:.4},{:.4},{theory_gain:.4}",
                    per.combined_db,
                    di_per.combined_db,
                    f - d
                );
            }
        }
    }
    art.text("snr.csv", &csv)?;

    let mut summary = Vec::new();
    for (i, k) in ks.iter().enumerate() {
        let theory_gain = theoretical_snr_gain_db(&arms.fdd, &r.full, *k)?;
        let gains: Vec<f64> = sums[i].iter().map(|s| db(s[0] / s[1])).collect();
        summary.push(format!(
            "k = {:.3} k_c: expected gain {theory_gain:.2} dB; measured {:.2} dB (theory noise), {:.2} dB (out-of-band noise)",
            k[0].hypot(k[1]) / kc,
            gains[0],
            gains[1]
        ));
    }
    Ok(Outcome { summary, failure: None })
}

pub fn validate(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Outcome, CliError> {
    let report = run_validation(&cfg.validation)?;
    art.text("validation.csv", &report.to_csv())?;
    art.json("validation_report.json", &report)?;
    let summary = vec![
        format!(
            "off-diagonal mass: QFI {:.4}, FI_DI {:.4}, FI_hybrid {:.4} (limit {})",
            report.offdiagonal_qfi, report.offdiagonal_fi_di, report.offdiagonal_fi_hybrid, cfg.validation.offdiagonal_tolerance
        ),
        format!("max relative CRB error {:.4} (limit {})", report.max_compared_error(), cfg.validation.crb_tolerance),
        format!(
            "min eigenvalue of QFI - FI: {:.3e} (DI), {:.3e} (hybrid)",
            report.min_eigenvalue_qfi_minus_fi_di, report.min_eigenvalue_qfi_minus_fi_hybrid
        ),
    ];
    let failure = (!report.passed()).then(|| {
        let mut reasons = Vec::new();
        if !report.offdiagonal_pass {
            reasons.push("off-diagonal mass above tolerance".to_string());
        }
        if !report.psd_pass {
            reasons.push("QFI - FI not positive semidefinite".to_string());
        }
        if !report.crb_pass {
            let ks: Vec<String> = report.failing_k.iter().map(|k| format!("{k:.4}")).collect();
            reasons.push(format!("CRB mismatch at k/k_c = [{}]", ks.join(", ")));
        }
        reasons.join("; ")
    });
    Ok(Outcome { summary, failure })
}
