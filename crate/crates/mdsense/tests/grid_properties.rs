use mdsense::grid::{apply_channel, build_timeline, estimate_csi, make_tx_grid, simulate, FrameConfig, SamplingMode};
use mdsense::scene::UavScene;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn csi_does_not_depend_on_data(seed_a: u64, seed_b: u64) {
        let scene = UavScene::default();
        let tl: Vec<f64> = (1..=32).map(|m| m as f64 * 36.6e-6).collect();
        let ta = make_tx_grid(24, 32, seed_a).unwrap();
        let tb = make_tx_grid(24, 32, seed_b).unwrap();
        let ca = estimate_csi(&apply_channel(&ta, &scene, &tl, 30e3, 0.0, 1).unwrap(), &ta).unwrap();
        let cb = estimate_csi(&apply_channel(&tb, &scene, &tl, 30e3, 0.0, 1).unwrap(), &tb).unwrap();
        // QPSK symbols cancel to within one rounding of the complex divide
        for (a, b) in ca.data.as_slice().iter().zip(cb.data.as_slice()) {
            prop_assert!((a - b).norm() <= 4.0 * f64::EPSILON * a.norm());
        }
    }

    #[test]
    fn single_scatterer_csi_is_rank_one(seed: u64, v in -20.0f64..20.0) {
        let mut scene = UavScene::default().only(true, false, false);
        scene.body.radial_velocity = v;
        let frame = FrameConfig { subcarriers: 24, symbols: 32, ..FrameConfig::default() };
        let csi = simulate(&scene, &frame, None, seed).unwrap().csi.data;
        let scale = csi.as_slice().iter().fold(0.0f64, |a, z| a.max(z.norm()));
        // every 2x2 minor vanishes
        for i in 1..24 {
            for j in 1..32 {
                let minor = csi[(i, j)] * csi[(0, 0)] - csi[(i, 0)] * csi[(0, j)];
                prop_assert!(minor.norm() <= 1e-10 * scale * scale);
            }
        }
    }
}

#[test]
fn gapped_timeline_is_a_subset_of_uniform() {
    let gapped = FrameConfig {
        sampling_mode: SamplingMode::TddGapped,
        ..FrameConfig::default()
    };
    let uniform = build_timeline(&FrameConfig {
        sampling_mode: SamplingMode::Uniform,
        symbols: (gapped.cpi_duration / gapped.symbol_duration).ceil() as usize,
        ..gapped.clone()
    })
    .unwrap();
    let picked = build_timeline(&gapped).unwrap();
    assert_eq!(picked.len(), 1840);
    for t in picked {
        assert!(uniform.contains(&t), "{t} is not a uniform instant");
    }
}
