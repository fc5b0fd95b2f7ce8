use mdsense::scene::{
    rotor_rcs, scatterer_echo, scatterer_range, scattering_amplitude, synthesize_parts, synthesize_slow_time,
    ScattererKind, UavScene,
};
use proptest::prelude::*;

fn timeline(m: usize, ts: f64) -> Vec<f64> {
    (1..=m).map(|k| k as f64 * ts).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn echo_magnitude_is_amplitude(kind in 0usize..3, t0 in 0.0f64..0.05) {
        let scene = UavScene::default();
        let tl: Vec<f64> = (0..16).map(|k| t0 + k as f64 * 36.6e-6).collect();
        let kind = [ScattererKind::BodyTranslation, ScattererKind::BladeTip(0), ScattererKind::BodyVibration][kind];
        let echo = scatterer_echo(kind, &scene, &tl).unwrap();
        for (z, &t) in echo.iter().zip(&tl) {
            let rcs = match kind {
                ScattererKind::BladeTip(p) => rotor_rcs(t, &scene.blades[p]),
                _ => scene.body.rcs,
            };
            let r = scatterer_range(kind, t, &scene).unwrap();
            let a = scattering_amplitude(rcs, r, &scene.link).unwrap();
            prop_assert!((z.norm() - a.abs()).abs() <= 1e-12 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn disabled_terms_leave_the_rest(tr: bool, vib: bool, rot: bool) {
        let full = UavScene::default();
        let tl = timeline(128, 36.6e-6);
        let parts = synthesize_parts(&full, &tl).unwrap();
        let got = synthesize_slow_time(&full.only(tr, vib, rot), &tl).unwrap();
        for (m, g) in got.iter().enumerate() {
            let mut want = num_complex::Complex64::new(0.0, 0.0);
            if tr { want += parts.translation[m]; }
            if vib { want += parts.vibration[m]; }
            if rot { want += parts.rotation[m]; }
            prop_assert!((g - want).norm() <= 1e-24);
        }
    }

    #[test]
    fn blade_geometry_repeats_each_rotation(t in 0.0f64..0.1, fr in 20.0f64..120.0, phase in 0.0f64..std::f64::consts::TAU) {
        let mut scene = UavScene::default();
        scene.body.radial_velocity = 0.0;
        scene.blades[0].rotation_rate = fr;
        scene.blades[0].initial_angle = phase;
        let a = scatterer_range(ScattererKind::BladeTip(0), t, &scene).unwrap();
        let b = scatterer_range(ScattererKind::BladeTip(0), t + 1.0 / fr, &scene).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn amplitude_linear_in_rcs_and_power(rcs in 1e-4f64..1.0, k in 0.1f64..10.0, r in 10.0f64..500.0) {
        let scene = UavScene::default();
        let base = scattering_amplitude(rcs, r, &scene.link).unwrap();
        let by_rcs = scattering_amplitude(k * rcs, r, &scene.link).unwrap();
        let mut link = scene.link.clone();
        link.transmit_power *= k;
        let by_power = scattering_amplitude(rcs, r, &link).unwrap();
        prop_assert!((by_rcs - k * base).abs() <= 1e-12 * by_rcs.abs());
        prop_assert!((by_power - k * base).abs() <= 1e-12 * by_power.abs());
    }
}
