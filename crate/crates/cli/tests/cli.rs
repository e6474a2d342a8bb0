use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fdd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdd")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = fdd(args);
    assert!(
        out.status.success(),
        "fdd {args:?} failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].parse::<f64>().unwrap()).collect()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn otf_profiles_and_manifest_digests() {
    let tmp = tempfile::tempdir().unwrap();
    let mut last_cutoff = 0usize;
    for ka in [0.5, 0.7, 0.9] {
        let cfg = write_config(tmp.path(), &format!("ka{ka}.json"), &format!(r#"{{"partition": {{"inner_ratio": {ka}}}}}"#));
        let out = tmp.path().join(format!("otf{ka}"));
        run_ok(&["otf", "--config", s(&cfg), "--out", s(&out)]);
        let (h, rows) = csv(&out.join("otf_axis.csv"));
        let ratio = column(&h, &rows, "k_over_kc");
        let chat = column(&h, &rows, "chat");
        let full = column(&h, &rows, "beta_full");
        let b1 = column(&h, &rows, "beta_1");
        let b2 = column(&h, &rows, "beta_2");
        for (c, f) in chat.iter().zip(&full) {
            assert!((c - f).abs() < 5e-3, "{c} vs {f}");
        }
        assert!((b2[0] - (1.0 - ka * ka) / 4.0).abs() < 0.01, "beta_2(0) = {}", b2[0]);
        let cutoff = b1.iter().rposition(|&v| v > 0.0).unwrap();
        assert!((ratio[cutoff] - ka).abs() < 0.03, "region-1 cutoff at {}", ratio[cutoff]);
        assert!(cutoff > last_cutoff);
        last_cutoff = cutoff;

        let m = manifest(&out);
        assert_eq!(m["command"], "otf");
        assert_eq!(m["config"]["partition"]["inner_ratio"].as_f64().unwrap(), ka);
        for a in m["artifacts"].as_array().unwrap() {
            let bytes = fs::read(out.join(a["path"].as_str().unwrap())).unwrap();
            assert_eq!(a["bytes"].as_u64().unwrap(), bytes.len() as u64);
            assert_eq!(a["sha256"].as_str().unwrap().len(), 64);
        }
    }
}

#[test]
fn fisher_ratio_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fisher");
    run_ok(&["fisher", "--out", s(&out)]);
    let (h, rows) = csv(&out.join("fisher.csv"));
    let kx = column(&h, &rows, "kx");
    let ratio = column(&h, &rows, "CRB_ratio_DI_over_hybrid");
    let kc = 4.0 * std::f64::consts::PI * 1.4 / 540.0;
    let near = |target: f64| {
        let i = (0..kx.len()).min_by(|&a, &b| (kx[a] / kc - target).abs().total_cmp(&(kx[b] / kc - target).abs())).unwrap();
        ratio[i]
    };
    assert!((4.0..6.0).contains(&near(0.9)), "{}", near(0.9));
    assert!(near(0.2) < 1.0, "minor loss at low k: {}", near(0.2));

    let cfg = write_config(tmp.path(), "a0.json", r#"{"acquisition": {"alpha": 0.0}}"#);
    let out0 = tmp.path().join("fisher0");
    run_ok(&["fisher", "--config", s(&cfg), "--out", s(&out0)]);
    let (h, rows) = csv(&out0.join("fisher.csv"));
    for r in column(&h, &rows, "CRB_ratio_DI_over_hybrid").into_iter().filter(|r| r.is_finite()) {
        assert!((r - 1.0).abs() < 1e-12);
    }
}

#[test]
fn budget_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "b.json", r#"{"budget": {"grid_px": 256, "sweep_points": 61}}"#);
    let out = tmp.path().join("budget");
    let stdout = run_ok(&["budget", "--config", s(&cfg), "--out", s(&out)]);
    assert!(stdout.contains("Rayleigh"));
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("budget_summary.json")).unwrap()).unwrap();
    let ratio = summary["rayleigh_ratio"].as_f64().unwrap();
    assert!((2.2..2.8).contains(&ratio), "{ratio}");
    let (h, rows) = csv(&out.join("budget.csv"));
    let (hdr_k, di) = (column(&h, &rows, "k_rad_per_nm"), column(&h, &rows, "n_min_DI"));
    assert!(hdr_k.windows(2).all(|w| w[1] > w[0]));
    assert!(di.windows(2).all(|w| w[1] >= w[0]));
    assert!(out.join("resolution.csv").exists());
}

#[test]
fn simulate_is_deterministic_and_seed_sensitive() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"grid": {"size_px": 64}}"#);
    let digests = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        run_ok(&["simulate", "--config", s(&cfg), "--out", s(&out), "--seed", seed, "--trials", "2"]);
        let m = manifest(&out);
        assert_eq!(m["config"]["acquisition"]["seed"].as_u64().unwrap(), seed.parse::<u64>().unwrap());
        assert!(out.join("raw/trial_0001/frame_5.f32").exists());
        m["artifacts"].clone()
    };
    let a = digests("a", "7");
    let b = digests("b", "7");
    let c = digests("c", "8");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn manifest_config_reruns_bit_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"grid": {"size_px": 64}, "acquisition": {"seed": 3}}"#);
    let first = tmp.path().join("first");
    run_ok(&["reconstruct", "--config", s(&cfg), "--out", s(&first)]);
    let resolved = first.join("resolved_config.json");
    let second = tmp.path().join("second");
    run_ok(&["reconstruct", "--config", s(&resolved), "--out", s(&second)]);
    assert_eq!(manifest(&first)["artifacts"], manifest(&second)["artifacts"]);
}

#[test]
fn reconstruct_from_saved_acquisition() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"grid": {"size_px": 64}}"#);
    let sim = tmp.path().join("sim");
    run_ok(&["simulate", "--config", s(&cfg), "--out", s(&sim)]);
    let rec = tmp.path().join("rec");
    run_ok(&["reconstruct", "--config", s(&cfg), "--out", s(&rec), "--raw", s(&sim.join("raw/trial_0000"))]);
    let direct = tmp.path().join("direct");
    run_ok(&["reconstruct", "--config", s(&cfg), "--out", s(&direct)]);
    // f32 storage of the raw frames is the only difference
    let (h1, r1) = csv(&rec.join("estimates.csv"));
    let (h2, r2) = csv(&direct.join("estimates.csv"));
    let (a1, a2) = (column(&h1, &r1, "a_fdd"), column(&h2, &r2, "a_fdd"));
    for (x, y) in a1.iter().zip(&a2) {
        assert!((x - y).abs() <= 1e-5 * y.abs().max(1e-9), "{x} vs {y}");
    }

    let other = write_config(tmp.path(), "o.json", r#"{"grid": {"size_px": 64}, "partition": {"inner_ratio": 0.6}}"#);
    let out = fdd(&["reconstruct", "--config", s(&other), "--out", s(&tmp.path().join("x")), "--raw", s(&sim.join("raw/trial_0000"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn crb_saturation_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "mc.json",
        r#"{
            "grid": {"size_px": 64},
            "sample": {"kind": "modes", "modes": [{"bin": [22, 0], "a_rel": 0.3, "b_rel": 0.2}]},
            "reconstruction": {"fixed_epsilon": 1e-12}
        }"#,
    );
    let out = tmp.path().join("mc");
    let stdout = run_ok(&["reconstruct", "--config", s(&cfg), "--out", s(&out), "--trials", "200", "--seed", "4"]);
    assert!(stdout.contains("CRB_hybrid"));
    let (h, rows) = csv(&out.join("crb_saturation.csv"));
    assert_eq!(rows.len(), 1);
    let ratio = column(&h, &rows, "a_var_over_crb")[0];
    let bias = column(&h, &rows, "a_bias_over_se")[0];
    let di_ratio = column(&h, &rows, "di_a_var_over_crb")[0];
    assert!((0.7..1.3).contains(&ratio), "{ratio}");
    assert!(bias.abs() < 4.0, "{bias}");
    assert!((0.7..1.3).contains(&di_ratio), "{di_ratio}");
    let k = column(&h, &rows, "k_over_kc")[0];
    assert!(k > 0.85 && k < 0.95);
}

#[test]
fn snr_methods_and_equal_budget_ordering() {
    let tmp = tempfile::tempdir().unwrap();
    // 4500 lines/mm on the lattice: 19 periods across 256 pixels
    let dx = 19.0 * 1e6 / 4500.0 / 256.0;
    let cfg = write_config(
        tmp.path(),
        "chart.json",
        &format!(r#"{{"grid": {{"size_px": 256, "pixel_nm": {dx}}}, "acquisition": {{"photons": {}}}}}"#, 244.0 * 65536.0),
    );
    let out = tmp.path().join("snr");
    run_ok(&["snr", "--config", s(&cfg), "--out", s(&out), "--trials", "2"]);
    let (h, rows) = csv(&out.join("snr.csv"));
    let method = h.iter().position(|c| c == "method").unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().any(|r| r[method] == "theory") && rows.iter().any(|r| r[method] == "out_of_band"));
    let fdd = column(&h, &rows, "fused_fdd_dB");
    let di = column(&h, &rows, "fused_di_dcv_dB");
    for (f, d) in fdd.iter().zip(&di) {
        assert!(f > d, "FDD {f} dB vs DI dcv {d} dB");
    }
    for pair in fdd.chunks(2) {
        assert!((pair[0] - pair[1]).abs() < 0.5, "noise estimates disagree: {pair:?}");
    }
}

#[test]
fn validate_passes_and_reports_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "v.json", r#"{"validation": {"points": 128, "modes": 12, "pupil_half_width": 6, "inner_half_width": 4}}"#);
    let out = tmp.path().join("ok");
    run_ok(&["validate", "--config", s(&cfg), "--out", s(&out)]);
    assert!(out.join("validation.csv").exists());

    let strict = write_config(
        tmp.path(),
        "strict.json",
        r#"{"validation": {"points": 128, "modes": 12, "pupil_half_width": 6, "inner_half_width": 4, "crb_tolerance": 1e-9}}"#,
    );
    let bad = tmp.path().join("bad");
    let res = fdd(&["validate", "--config", s(&strict), "--out", s(&bad)]);
    assert_eq!(res.status.code(), Some(3));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("CRB mismatch at k/k_c"), "{err}");
    assert!(bad.join("manifest.json").exists());
}

#[test]
fn config_errors_exit_2_with_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"optics": {"wavelenght_nm": 500}}"#, "optics"),
        (r#"{"optics": {"numerical_aperture": 2.0}}"#, "numerical_aperture"),
        (r#"{"acquisition": {"alpha": 1.5}}"#, "acquisition"),
        (r#"{"grid": {"size_px": 64, "pixel_nm": 500}}"#, "grid"),
        (r#"{"sample": {"kind": "modes", "modes": [{"bin": [3, 0], "a_rel": 0.8, "b_rel": 0.8}]}}"#, "sample.modes"),
        (r#"{"optics": "#, "c5.json"),
    ];
    for (i, (json, needle)) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("c{i}.json"), json);
        let out = fdd(&["otf", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
        assert_eq!(out.status.code(), Some(2), "{json}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{json}: {err}");
    }
    let unknown_path = fdd(&["otf", "--config", s(&tmp.path().join("c0.json"))]);
    assert!(String::from_utf8_lossy(&unknown_path.stderr).contains("optics"));
    let out = fdd(&["otf", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(fdd(&["nonsense"]).status.code(), Some(2));
}
