use approx::assert_relative_eq;
use proptest::prelude::*;

use fdd_core::fourier::{fft_forward, fft_inverse};
use fdd_core::optics::{compute_otf, hybrid_otfs, make_circular_pupil, partition_fdd, region_otfs, PupilPartition};
use fdd_core::reconstruct::{fdd_weights, information_at};
use fdd_core::sample::SampleSpectrum;
use fdd_core::{GridSpec, OpticsSpec, RealField};

fn field(nx: usize, ny: usize, dx: f64, seed: u64) -> RealField {
    let g = GridSpec::new(nx, ny, dx).unwrap();
    let s = seed as f64 * 0.001;
    RealField::from_fn(g, |p| (p[0] * (0.01 + s)).sin() + (p[1] * 0.03 + s).cos() * 0.5 + 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fft_round_trip_and_parseval(nx in 8usize..40, ny in 8usize..40, dx in 0.5f64..50.0, seed in 0u64..1000) {
        let f = field(nx * 2, ny * 2, dx, seed);
        let spec = fft_forward(&f).unwrap();
        let back = fft_inverse(&spec);
        for (a, b) in back.values.iter().zip(&f.values) {
            prop_assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
        let energy: f64 = f.values.iter().map(|v| v * v).sum::<f64>() * f.grid.cell_area();
        assert_relative_eq!(spec.energy(), energy, max_relative = 1e-9);
    }

    #[test]
    fn otf_is_bounded_even_and_normalized(na in 0.3f64..1.45, n in prop::sample::select(vec![32usize, 48, 64])) {
        let o = OpticsSpec::new(540.0, na).unwrap();
        let g = o.default_grid(n).unwrap();
        let otf = compute_otf(&make_circular_pupil(&o, &g).unwrap()).unwrap();
        assert_relative_eq!(otf.dc(), 1.0, epsilon = 1e-12);
        for i in 0..g.len() {
            let (bx, by) = g.signed_bin(i);
            prop_assert!(otf.values[i] >= 0.0 && otf.values[i] <= 1.0 + 1e-12);
            if bx.unsigned_abs() as usize * 2 != g.nx && by.unsigned_abs() as usize * 2 != g.ny {
                prop_assert_eq!(otf.values[i], otf.at(-bx, -by));
            }
        }
    }

    #[test]
    fn hybrid_information_is_at_least_direct_share(alpha in 0.0f64..=1.0, inner in 0.3f64..0.9) {
        let o = OpticsSpec::new(540.0, 1.4).unwrap();
        let g = o.default_grid(64).unwrap();
        let pupil = make_circular_pupil(&o, &g).unwrap();
        let canvas = PupilPartition::minimum_canvas(&pupil).unwrap();
        let r = region_otfs(&partition_fdd(&pupil, inner, &canvas).unwrap()).unwrap();
        let set = hybrid_otfs(&r, alpha).unwrap();
        let photons: f64 = set.frames.iter().map(|f| f.dc()).sum();
        assert_relative_eq!(photons, 1.0, epsilon = 1e-12);
        for j in 0..g.nx as i64 / 2 {
            let k = [j as f64 * g.dkx(), 0.0];
            let di = r.full.at(j, 0);
            prop_assert!(information_at(&set, k).unwrap() >= (1.0 - alpha) * di * di - 1e-12);
        }
    }

    #[test]
    fn weights_satisfy_normal_equations(alpha in 0.05f64..0.95, eps in 0.0f64..1e-2) {
        let o = OpticsSpec::new(540.0, 1.4).unwrap();
        let g = o.default_grid(32).unwrap();
        let pupil = make_circular_pupil(&o, &g).unwrap();
        let canvas = PupilPartition::minimum_canvas(&pupil).unwrap();
        let set = hybrid_otfs(&region_otfs(&partition_fdd(&pupil, 0.7, &canvas).unwrap()).unwrap(), alpha).unwrap();
        let w = fdd_weights(&set, &vec![eps + 1e-12; g.len()]).unwrap();
        for i in 0..g.len() {
            let s = set.information_density(i);
            let gain: f64 = set.frames.iter().zip(&w.weights).map(|(f, c)| c[i] * f.values[i]).sum();
            assert_relative_eq!(gain, s / (s + eps + 1e-12), epsilon = 1e-9);
        }
    }

    #[test]
    fn sample_spectrum_round_trip(a in 0.0f64..0.3, b in 0.0f64..0.3, bx in 1i64..10, by in -10i64..10) {
        let g = GridSpec::new(32, 32, 20.0).unwrap();
        let s = SampleSpectrum::from_relative_bins(&g, &[((bx, by), a, b)]).unwrap();
        let back = SampleSpectrum::from_spectrum(&s.to_spectrum(&g).unwrap()).unwrap();
        assert_relative_eq!(back.a0, s.a0, max_relative = 1e-12);
        let m = back.modes.iter().find(|m| (m.k[0] - s.modes[0].k[0]).abs() < 1e-12 && (m.k[1] - s.modes[0].k[1]).abs() < 1e-12);
        prop_assert!(m.is_some());
        let m = m.unwrap();
        prop_assert!((m.a - s.modes[0].a).abs() < 1e-10 && (m.b - s.modes[0].b).abs() < 1e-10);
    }
}
