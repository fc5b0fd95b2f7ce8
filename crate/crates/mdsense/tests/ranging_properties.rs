use mdsense::grid::{simulate, FrameConfig, ResourceGrid};
use mdsense::ranging::{add_clutter, detect_and_extract, range_profile, SlowTimeSignal};
use mdsense::scene::UavScene;
use mdsense::Complex64;
use proptest::prelude::*;

fn small_csi(seed: u64, snr: Option<f64>) -> (ResourceGrid, Vec<f64>) {
    let frame = FrameConfig {
        subcarriers: 64,
        symbols: 48,
        ..FrameConfig::default()
    };
    let sim = simulate(&UavScene::default(), &frame, snr, seed).unwrap();
    (sim.csi, sim.timeline)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn profile_energy_is_csi_energy_over_n(seed: u64) {
        let (csi, _) = small_csi(seed, Some(10.0));
        let trm = range_profile(&csi, 30e3);
        let n = csi.subcarriers() as f64;
        let (e_csi, e_trm) = (csi.data.energy(), trm.data.energy());
        prop_assert!((e_trm - e_csi / n).abs() <= 1e-12 * e_trm);
    }

    #[test]
    fn detection_ignores_complex_gain(seed: u64, mag in 1e-3f64..1e3, arg in 0.0f64..std::f64::consts::TAU) {
        let (csi, tl) = small_csi(seed, Some(20.0));
        let c = Complex64::from_polar(mag, arg);
        let mut scaled = csi.clone();
        for z in scaled.data.as_mut_slice() {
            *z *= c;
        }
        let a = detect_and_extract(&range_profile(&csi, 30e3), &tl).unwrap();
        let b = detect_and_extract(&range_profile(&scaled, 30e3), &tl).unwrap();
        prop_assert_eq!(a.origin_bin, b.origin_bin);
    }

    #[test]
    fn clutter_adds(re in prop::collection::vec(-1.0f64..1.0, 1..6), im in prop::collection::vec(-1.0f64..1.0, 1..6)) {
        let a: Vec<Complex64> = re.iter().map(|&x| Complex64::new(x, 0.5 * x)).collect();
        let b: Vec<Complex64> = im.iter().map(|&x| Complex64::new(-x, x)).collect();
        let s = SlowTimeSignal {
            samples: (0..32).map(|m| Complex64::from_polar(1.0, 0.1 * m as f64)).collect(),
            timeline: (1..=32).map(|m| m as f64).collect(),
            origin_bin: 0,
            peak_level: 1.0,
        };
        let twice = add_clutter(&add_clutter(&s, &a, 0.0, 1), &b, 0.0, 2);
        let both: Vec<Complex64> = a.iter().chain(&b).copied().collect();
        let once = add_clutter(&s, &both, 0.0, 3);
        for (x, y) in twice.samples.iter().zip(&once.samples) {
            prop_assert!((x - y).norm() <= 1e-12);
        }
    }
}
