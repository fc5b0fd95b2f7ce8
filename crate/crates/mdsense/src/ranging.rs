//! Range profiles, target-row extraction, clutter and range-Doppler maps.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{cgauss, column_rng, ResourceGrid};
use crate::matrix::ComplexMatrix;
use crate::SPEED_OF_LIGHT;

/// Column-wise IDFT of the CSI (the TRM) with its bin spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfileMatrix {
    pub data: ComplexMatrix,
    /// Range covered by one bin, `c / (2 N Δf)` (m).
    pub bin_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlowTimeSignal {
    pub samples: Vec<Complex64>,
    pub timeline: Vec<f64>,
    pub origin_bin: usize,
    /// Slow-time-averaged magnitude of the selected row.
    pub peak_level: f64,
}

/// `d(k)` for a point target at `r0`: the IDFT of `k_R` evaluated at bin `k`.
pub fn bulk_gain(n: usize, subcarrier_spacing: f64, r0: f64, k: usize) -> Complex64 {
    let tau = 2.0 * r0 / SPEED_OF_LIGHT;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let phase = 2.0 * PI * i as f64 * (k as f64 / n as f64 - subcarrier_spacing * tau);
        acc += Complex64::from_polar(1.0, phase);
    }
    acc / n as f64
}

/// Expected peak bin `round(N Δf 2R_0 / c)` (wrapped into `0..N`).
pub fn expected_range_bin(n: usize, subcarrier_spacing: f64, r0: f64) -> usize {
    let k = (n as f64 * subcarrier_spacing * 2.0 * r0 / SPEED_OF_LIGHT).round() as i64;
    k.rem_euclid(n as i64) as usize
}

fn transform_columns(m: &ComplexMatrix, inverse: bool, scale: f64) -> ComplexMatrix {
    let rows = m.rows();
    let fft = {
        let mut planner = FftPlanner::new();
        if inverse {
            planner.plan_fft_inverse(rows)
        } else {
            planner.plan_fft_forward(rows)
        }
    };
    // columns become contiguous rows of the transpose; one call covers them all
    let mut t = m.transpose();
    fft.process(t.as_mut_slice());
    for z in t.as_mut_slice() {
        *z *= scale;
    }
    t.transpose()
}

/// Column-wise IDFT normalised by `1/N`. The TRM energy is the CSI energy
/// divided by `N`.
pub fn range_profile(csi: &ResourceGrid, subcarrier_spacing: f64) -> RangeProfileMatrix {
    let n = csi.subcarriers();
    RangeProfileMatrix {
        data: transform_columns(&csi.data, true, 1.0 / n as f64),
        bin_size: SPEED_OF_LIGHT / (2.0 * n as f64 * subcarrier_spacing),
    }
}

/// Picks the row with the largest mean magnitude and returns it.
pub fn detect_and_extract(trm: &RangeProfileMatrix, timeline: &[f64]) -> Result<SlowTimeSignal> {
    let (rows, cols) = trm.data.shape();
    if timeline.len() != cols {
        return Err(Error::param(format!(
            "timeline has {} instants for {cols} symbols",
            timeline.len()
        )));
    }
    let mut best = (0, 0.0f64);
    for k in 0..rows {
        let level = trm.data.row(k).iter().map(|z| z.norm()).sum::<f64>() / cols as f64;
        if level > best.1 {
            best = (k, level);
        }
    }
    if best.1 == 0.0 {
        return Err(Error::Detection("range profile is identically zero".into()));
    }
    Ok(SlowTimeSignal {
        samples: trm.data.row(best.0).to_vec(),
        timeline: timeline.to_vec(),
        origin_bin: best.0,
        peak_level: best.1,
    })
}

/// Zero-Doppler clutter settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ClutterConfig {
    pub scatterers: usize,
    /// Clutter-to-signal power ratio (dB).
    pub csr_db: f64,
    /// Additional AWGN variance.
    pub noise_var: f64,
}

impl Default for ClutterConfig {
    fn default() -> Self {
        Self {
            scatterers: 3,
            csr_db: 10.0,
            noise_var: 0.0,
        }
    }
}

impl ClutterConfig {
    /// Draws the clutter constants. Their coherent sum has power
    /// `signal_power · 10^(CSR/10)`.
    pub fn draw<R: Rng>(&self, signal_power: f64, rng: &mut R) -> Vec<Complex64> {
        if self.scatterers == 0 {
            return Vec::new();
        }
        let raw: Vec<Complex64> = (0..self.scatterers)
            .map(|_| Complex64::from_polar(rng.random_range(0.5..1.0), rng.random_range(0.0..2.0 * PI)))
            .collect();
        let sum: Complex64 = raw.iter().sum();
        let target = (signal_power * crate::db_to_linear(self.csr_db)).sqrt();
        if sum.norm() == 0.0 {
            return raw;
        }
        let scale = target / sum.norm();
        raw.into_iter().map(|z| z * scale).collect()
    }
}

/// `s_mix = s + Σ_c γ_c + AWGN`.
pub fn add_clutter(s: &SlowTimeSignal, clutter: &[Complex64], noise_var: f64, seed: u64) -> SlowTimeSignal {
    let dc: Complex64 = clutter.iter().sum();
    let mut rng = column_rng(seed, u64::MAX - 1);
    let samples = s
        .samples
        .iter()
        .map(|z| {
            let noisy = if noise_var > 0.0 { cgauss(&mut rng, noise_var) } else { Complex64::new(0.0, 0.0) };
            z + dc + noisy
        })
        .collect();
    SlowTimeSignal {
        samples,
        ..s.clone()
    }
}

/// Range–Doppler map. Rows are range bins, columns Doppler bins in ascending
/// order. The Doppler axis uses the `exp(-j2π f_D t)` convention so that a
/// receding target at speed `v` reads `+2v/λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    pub map: ComplexMatrix,
    pub range_axis: Vec<f64>,
    pub doppler_axis: Vec<f64>,
    pub velocity_axis: Vec<f64>,
    /// `c / 2B` for the configured bandwidth.
    pub range_resolution: f64,
    pub velocity_resolution: f64,
}

impl RangeDopplerMap {
    /// (range bin, Doppler bin) of the largest magnitude.
    pub fn peak(&self) -> (usize, usize) {
        let cols = self.map.cols();
        let (idx, _) = self
            .map
            .as_slice()
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
        (idx / cols, idx % cols)
    }
}

pub fn is_uniform(timeline: &[f64]) -> bool {
    if timeline.len() < 2 {
        return true;
    }
    let dt = timeline[1] - timeline[0];
    timeline
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs())
}

pub fn range_doppler_map(
    csi: &ResourceGrid,
    timeline: &[f64],
    subcarrier_spacing: f64,
    carrier_frequency: f64,
    bandwidth: f64,
) -> Result<RangeDopplerMap> {
    let (n, m) = csi.data.shape();
    if timeline.len() != m {
        return Err(Error::param("timeline length differs from symbol count"));
    }
    if m < 2 || !is_uniform(timeline) {
        return Err(Error::Unsupported(
            "range-Doppler processing needs a uniform timeline".into(),
        ));
    }
    let ts = timeline[1] - timeline[0];
    let trm = range_profile(csi, subcarrier_spacing);
    // slow-time transform on the transposed profile, one range bin per column
    let spectrum = transform_columns(&trm.data.transpose(), true, 1.0);
    let half = m / 2;
    let mut map = ComplexMatrix::zeros(n, m);
    for k in 0..n {
        for j in 0..m {
            map[(k, j)] = spectrum[((j + m - half) % m, k)];
        }
    }
    let lambda = SPEED_OF_LIGHT / carrier_frequency;
    let df = 1.0 / (m as f64 * ts);
    let doppler_axis: Vec<f64> = (0..m).map(|j| (j as f64 - half as f64) * df).collect();
    let velocity_axis = doppler_axis.iter().map(|f| f * lambda / 2.0).collect();
    Ok(RangeDopplerMap {
        map,
        range_axis: (0..n).map(|k| k as f64 * trm.bin_size).collect(),
        doppler_axis,
        velocity_axis,
        range_resolution: SPEED_OF_LIGHT / (2.0 * bandwidth),
        velocity_resolution: lambda / (2.0 * m as f64 * ts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{apply_channel_kd, estimate_csi, kr_vector, make_tx_grid, GridRole};

    fn csi_for(n: usize, kd: &[Complex64], r0: f64) -> ResourceGrid {
        let tx = make_tx_grid(n, kd.len(), 1).unwrap();
        let kr = kr_vector(n, 30e3, r0).unwrap();
        let rx = apply_channel_kd(&tx, &kr, kd, 0.0, 1).unwrap();
        estimate_csi(&rx, &tx).unwrap()
    }

    fn timeline(m: usize) -> Vec<f64> {
        (1..=m).map(|k| k as f64 * 36.6e-6).collect()
    }

    #[test]
    fn ones_concentrate_in_bin_zero() {
        let csi = ResourceGrid {
            data: ComplexMatrix::from_fn(64, 4, |_, _| Complex64::new(1.0, 0.0)),
            role: GridRole::Csi,
        };
        let trm = range_profile(&csi, 30e3);
        for c in 0..4 {
            assert!((trm.data[(0, c)] - 1.0).norm() < 1e-12);
            for r in 1..64 {
                assert!(trm.data[(r, c)].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn peak_bins_for_table_values() {
        assert_eq!(expected_range_bin(512, 30e3, 50.0), 5);
        assert_eq!(expected_range_bin(3276, 30e3, 50.0), 33);
        for n in [512usize, 3276] {
            let kd = vec![Complex64::new(1.0, 0.0); 4];
            let trm = range_profile(&csi_for(n, &kd, 50.0), 30e3);
            let s = detect_and_extract(&trm, &timeline(4)).unwrap();
            assert_eq!(s.origin_bin, expected_range_bin(n, 30e3, 50.0));
        }
    }

    #[test]
    fn extracted_row_is_gain_times_kd() {
        let kd: Vec<Complex64> = (0..16).map(|m| Complex64::from_polar(1.0 + 0.1 * m as f64, 0.3 * m as f64)).collect();
        let trm = range_profile(&csi_for(512, &kd, 50.0), 30e3);
        let s = detect_and_extract(&trm, &timeline(16)).unwrap();
        let d = bulk_gain(512, 30e3, 50.0, s.origin_bin);
        for (x, k) in s.samples.iter().zip(&kd) {
            assert!((x - d * k).norm() < 1e-10);
        }
    }

    #[test]
    fn parseval_with_one_over_n() {
        let kd: Vec<Complex64> = (0..8).map(|m| Complex64::from_polar(1.0, m as f64)).collect();
        let csi = csi_for(128, &kd, 37.0);
        let trm = range_profile(&csi, 30e3);
        assert!((trm.data.energy() * 128.0 - csi.data.energy()).abs() < 1e-9 * csi.data.energy());
    }

    #[test]
    fn zero_profile_is_detection_error() {
        let trm = RangeProfileMatrix {
            data: ComplexMatrix::zeros(8, 2),
            bin_size: 1.0,
        };
        assert!(matches!(detect_and_extract(&trm, &[1.0, 2.0]), Err(Error::Detection(_))));
    }

    #[test]
    fn clutter_without_scatterers_or_noise_is_identity() {
        let s = SlowTimeSignal {
            samples: vec![Complex64::new(1.0, 2.0); 5],
            timeline: timeline(5),
            origin_bin: 0,
            peak_level: 1.0,
        };
        assert_eq!(add_clutter(&s, &[], 0.0, 1), s);
    }

    #[test]
    fn clutter_power_matches_csr() {
        let mut rng = column_rng(4, 0);
        for _ in 0..20 {
            let cfg = ClutterConfig::default();
            let c = cfg.draw(2.0, &mut rng);
            assert_eq!(c.len(), 3);
            let p: Complex64 = c.iter().sum();
            let ratio_db = 10.0 * (p.norm_sqr() / 2.0).log10();
            assert!((ratio_db - 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn translation_doppler_and_resolution() {
        let lambda = SPEED_OF_LIGHT / 3.5e9;
        let t = timeline(256);
        let kd: Vec<Complex64> = t
            .iter()
            .map(|&x| Complex64::from_polar(1.0, -4.0 * PI * (50.0 + 5.0 * x) / lambda))
            .collect();
        let csi = csi_for(64, &kd, 50.0);
        let rd = range_doppler_map(&csi, &t, 30e3, 3.5e9, 100e6).unwrap();
        assert_eq!(rd.range_resolution, 1.5);
        let (_, dbin) = rd.peak();
        let f = rd.doppler_axis[dbin];
        let df = rd.doppler_axis[1] - rd.doppler_axis[0];
        assert!((f - 2.0 * 5.0 / lambda).abs() <= df, "{f}");
    }

    #[test]
    fn stationary_scatterer_zero_doppler() {
        let t = timeline(32);
        let kd = vec![Complex64::new(1.0, 0.0); 32];
        let csi = csi_for(64, &kd, 50.0);
        let rd = range_doppler_map(&csi, &t, 30e3, 3.5e9, 100e6).unwrap();
        let (r, d) = rd.peak();
        assert_eq!(r, expected_range_bin(64, 30e3, 50.0));
        assert_eq!(rd.doppler_axis[d], 0.0);
    }

    #[test]
    fn gapped_timeline_unsupported() {
        let kd = vec![Complex64::new(1.0, 0.0); 3];
        let csi = csi_for(8, &kd, 50.0);
        let t = [1e-4, 2e-4, 4e-4];
        assert!(matches!(
            range_doppler_map(&csi, &t, 30e3, 3.5e9, 100e6),
            Err(Error::Unsupported(_))
        ));
    }
}
