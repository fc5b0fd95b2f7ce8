//! Modified STFT, instantaneous frequency and the synchroextracting transform.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::par::{self, Execution};

/// Truncated Gaussian window with unit energy; `len` should be odd.
pub fn gaussian_window(len: usize) -> Vec<f64> {
    let h = (len as f64 - 1.0) / 2.0;
    let sigma = (len as f64 / 6.0).max(f64::MIN_POSITIVE);
    let w: Vec<f64> = (0..len)
        .map(|i| {
            let x = (i as f64 - h) / sigma;
            (-0.5 * x * x).exp()
        })
        .collect();
    let e = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    w.into_iter().map(|v| v / e).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StftConfig {
    pub window: Vec<f64>,
    pub hop: usize,
    pub fft_size: usize,
    /// Threshold as a fraction of the largest STFT magnitude.
    pub threshold_rel: f64,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self::gaussian(257, 4, 1024, 0.02)
    }
}

impl StftConfig {
    pub fn gaussian(len: usize, hop: usize, fft_size: usize, threshold_rel: f64) -> Self {
        Self {
            window: gaussian_window(len),
            hop,
            fft_size,
            threshold_rel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.window.len();
        if n.is_multiple_of(2) {
            return Err(Error::Config(format!("window length must be odd, got {n}")));
        }
        if self.hop == 0 {
            return Err(Error::Config("hop must be at least 1".into()));
        }
        if self.fft_size < n {
            return Err(Error::Config(format!(
                "fft size {} is shorter than the window {n}",
                self.fft_size
            )));
        }
        if !(self.threshold_rel >= 0.0) {
            return Err(Error::Config("threshold must be non-negative".into()));
        }
        Ok(())
    }
}

/// Complex time–frequency matrix: rows are frequency bins in ascending order,
/// columns are frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: ComplexMatrix,
    pub freq_axis: Vec<f64>,
    pub time_axis: Vec<f64>,
    /// Sample interval of the analysed signal (s).
    pub sample_interval: f64,
    pub config: StftConfig,
}

impl Spectrogram {
    pub fn bins(&self) -> usize {
        self.values.rows()
    }

    pub fn frames(&self) -> usize {
        self.values.cols()
    }

    /// Frequency spacing (Hz).
    pub fn bin_width(&self) -> f64 {
        1.0 / (self.config.fft_size as f64 * self.sample_interval)
    }

    /// Time between frames (s).
    pub fn frame_interval(&self) -> f64 {
        self.config.hop as f64 * self.sample_interval
    }

    pub fn max_magnitude(&self) -> f64 {
        self.values.as_slice().iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    /// Absolute threshold from the configured relative one.
    pub fn default_threshold(&self) -> f64 {
        self.config.threshold_rel * self.max_magnitude()
    }

    /// Cells with magnitude strictly above `threshold`.
    pub fn count_above(&self, threshold: f64) -> usize {
        self.values.as_slice().iter().filter(|z| z.norm() > threshold).count()
    }

    pub fn count_nonzero(&self) -> usize {
        self.values.as_slice().iter().filter(|z| z.norm() > 0.0).count()
    }
}

/// Frame-wise windowed DFT with the phase measured from each frame centre, so a
/// stationary tone keeps a constant phase from frame to frame. Only frames
/// whose window lies entirely inside the signal are formed.
pub fn stft(u: &[Complex64], sample_interval: f64, cfg: &StftConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    let wl = cfg.window.len();
    if u.len() < wl {
        return Err(Error::param(format!(
            "signal of {} samples is shorter than the {wl}-sample window",
            u.len()
        )));
    }
    if !(sample_interval > 0.0) {
        return Err(Error::param("sample interval must be positive"));
    }
    let nfft = cfg.fft_size;
    let h = (wl / 2) as isize;
    let frames = (u.len() - wl) / cfg.hop + 1;
    let fft = FftPlanner::new().plan_fft_forward(nfft);
    let norm = 1.0 / (nfft as f64).sqrt();
    let columns = par::map_indexed(Execution::default(), frames, |f| {
        let centre = (f * cfg.hop) as isize + h;
        let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
        for k in -h..=h {
            buf[k.rem_euclid(nfft as isize) as usize] = u[(centre + k) as usize] * cfg.window[(k + h) as usize];
        }
        fft.process(&mut buf);
        (0..nfft).map(|i| buf[(i + nfft - nfft / 2) % nfft] * norm).collect::<Vec<_>>()
    });
    let mut values = ComplexMatrix::zeros(nfft, frames);
    for (c, col) in columns.iter().enumerate() {
        values.set_column(c, col);
    }
    let fs = 1.0 / sample_interval;
    Ok(Spectrogram {
        values,
        freq_axis: (0..nfft)
            .map(|i| (i as f64 - (nfft / 2) as f64) * fs / nfft as f64)
            .collect(),
        time_axis: (0..frames)
            .map(|f| (f * cfg.hop + wl / 2) as f64 * sample_interval)
            .collect(),
        sample_interval,
        config: cfg.clone(),
    })
}

/// Marker for cells whose magnitude does not exceed the threshold.
pub const NO_ESTIMATE: f64 = f64::INFINITY;

/// Instantaneous frequency (Hz) per cell from the frame-to-frame phase
/// advance, `arg(S(m+1) S*(m)) / (2π · hop · Δt)`; the last frame uses the
/// backward difference. Row-major, same layout as the spectrogram.
pub fn inst_freq(spec: &Spectrogram, threshold: f64) -> Vec<f64> {
    let (rows, cols) = spec.values.shape();
    let dt = spec.frame_interval();
    let mut out = vec![NO_ESTIMATE; rows * cols];
    for r in 0..rows {
        let row = spec.values.row(r);
        for c in 0..cols {
            let s = row[c];
            if s.norm() <= threshold {
                continue;
            }
            let step = if c + 1 < cols && row[c + 1].norm() > 0.0 {
                row[c + 1] * s.conj()
            } else if c > 0 && row[c - 1].norm() > 0.0 {
                s * row[c - 1].conj()
            } else {
                continue;
            };
            out[r * cols + c] = step.arg() / (2.0 * PI * dt);
        }
    }
    out
}

/// Keeps the STFT cells whose frequency lies within half a bin of their own
/// instantaneous-frequency estimate; every other cell is zero.
pub fn set_transform(spec: &Spectrogram, threshold: f64) -> Spectrogram {
    let (rows, cols) = spec.values.shape();
    let omega = inst_freq(spec, threshold);
    let half = 0.5 * spec.bin_width();
    let mut values = ComplexMatrix::zeros(rows, cols);
    for r in 0..rows {
        let eta = spec.freq_axis[r];
        for c in 0..cols {
            let w = omega[r * cols + c];
            if w != NO_ESTIMATE && (eta - w).abs() < half {
                values[(r, c)] = spec.values[(r, c)];
            }
        }
    }
    Spectrogram {
        values,
        ..spec.clone()
    }
}

/// Rényi entropy (bits) of the normalised energy distribution `|S|² / Σ|S|²`.
pub fn renyi_entropy(values: &ComplexMatrix, order: f64) -> f64 {
    let total: f64 = values.as_slice().iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let s: f64 = values
        .as_slice()
        .iter()
        .map(|z| (z.norm_sqr() / total).powf(order))
        .sum();
    s.log2() / (1.0 - order)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TS: f64 = 36.6e-6;

    fn tone(m: usize, f0: f64) -> Vec<Complex64> {
        (0..m)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * f0 * i as f64 * TS))
            .collect()
    }

    fn bin_centred(k: i64, cfg: &StftConfig) -> f64 {
        k as f64 / (cfg.fft_size as f64 * TS)
    }

    #[test]
    fn window_unit_energy_odd() {
        let w = gaussian_window(257);
        assert_eq!(w.len(), 257);
        assert!((w.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(w[0], w[256]);
    }

    #[test]
    fn config_checks() {
        assert!(StftConfig::gaussian(256, 4, 1024, 0.02).validate().is_err());
        assert!(StftConfig::gaussian(257, 0, 1024, 0.02).validate().is_err());
        assert!(StftConfig::gaussian(257, 4, 128, 0.02).validate().is_err());
        assert!(StftConfig::default().validate().is_ok());
    }

    #[test]
    fn tone_ridge_and_constant_phase() {
        let cfg = StftConfig::default();
        let f0 = bin_centred(40, &cfg);
        let spec = stft(&tone(1024, f0), TS, &cfg).unwrap();
        let row = (0..spec.bins())
            .max_by(|&a, &b| spec.values[(a, 100)].norm().total_cmp(&spec.values[(b, 100)].norm()))
            .unwrap();
        assert!((spec.freq_axis[row] - f0).abs() < 1e-9);
        // frames away from the edges advance by exactly 2π f0 hop Δt
        let adv = 2.0 * PI * f0 * cfg.hop as f64 * TS;
        for c in 0..spec.frames() - 1 {
            let d = (spec.values[(row, c + 1)] * spec.values[(row, c)].conj()).arg();
            let expect = (adv + PI).rem_euclid(2.0 * PI) - PI;
            assert!((d - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_input_zero_spectrogram() {
        let cfg = StftConfig::default();
        let spec = stft(&vec![Complex64::new(0.0, 0.0); 600], TS, &cfg).unwrap();
        assert_eq!(spec.values.energy(), 0.0);
    }

    #[test]
    fn short_signal_rejected() {
        assert!(stft(&tone(100, 10.0), TS, &StftConfig::default()).is_err());
    }

    #[test]
    fn energy_identity() {
        let cfg = StftConfig::default();
        let u = tone(32768, 1234.5);
        let spec = stft(&u, TS, &cfg).unwrap();
        let lhs = spec.values.energy() * cfg.hop as f64;
        let rhs: f64 = u.iter().map(|z| z.norm_sqr()).sum();
        assert!((lhs / rhs - 1.0).abs() < 0.02, "{}", lhs / rhs);
    }

    #[test]
    fn tone_inst_freq_within_a_bin() {
        let cfg = StftConfig::default();
        let f0 = 777.0;
        let spec = stft(&tone(1500, f0), TS, &cfg).unwrap();
        let thr = spec.default_threshold();
        let w = inst_freq(&spec, thr);
        let mut n = 0;
        for v in w.iter().filter(|v| **v != NO_ESTIMATE) {
            assert!((v - f0).abs() <= spec.bin_width(), "{v}");
            n += 1;
        }
        assert!(n > 0);
    }

    #[test]
    fn all_below_threshold_is_all_sentinel() {
        let cfg = StftConfig::default();
        let spec = stft(&tone(600, 300.0), TS, &cfg).unwrap();
        assert!(inst_freq(&spec, 1e9).iter().all(|&v| v == NO_ESTIMATE));
    }

    #[test]
    fn chirp_ridge_tracks_rate() {
        let cfg = StftConfig::default();
        let m = 2000;
        let (f0, rate) = (-1500.0, 40_000.0);
        let u: Vec<Complex64> = (0..m)
            .map(|i| {
                let t = i as f64 * TS;
                Complex64::from_polar(1.0, 2.0 * PI * (f0 * t + 0.5 * rate * t * t))
            })
            .collect();
        let spec = stft(&u, TS, &cfg).unwrap();
        let w = inst_freq(&spec, spec.default_threshold());
        let cols = spec.frames();
        for c in 0..cols {
            let ridge = (0..spec.bins())
                .max_by(|&a, &b| spec.values[(a, c)].norm().total_cmp(&spec.values[(b, c)].norm()))
                .unwrap();
            let truth = f0 + rate * spec.time_axis[c];
            assert!((w[ridge * cols + c] - truth).abs() <= spec.bin_width(), "frame {c}");
        }
    }

    #[test]
    fn set_of_tone_is_one_cell_per_frame() {
        let cfg = StftConfig::default();
        let f0 = bin_centred(-25, &cfg);
        let spec = stft(&tone(1200, f0), TS, &cfg).unwrap();
        let thr = spec.default_threshold();
        let set = set_transform(&spec, thr);
        for c in 0..spec.frames() {
            let nz: Vec<usize> = (0..spec.bins()).filter(|&r| set.values[(r, c)].norm() > 0.0).collect();
            assert_eq!(nz.len(), 1, "frame {c}");
            assert!((spec.freq_axis[nz[0]] - f0).abs() < 1e-9);
        }
        assert!(set.count_nonzero() <= spec.count_above(thr));
    }

    #[test]
    fn entropy_of_point_mass_is_zero() {
        let mut m = ComplexMatrix::zeros(4, 4);
        m[(1, 2)] = Complex64::new(3.0, 0.0);
        assert_eq!(renyi_entropy(&m, 3.0), 0.0);
        let flat = ComplexMatrix::from_fn(4, 4, |_, _| Complex64::new(1.0, 0.0));
        assert!((renyi_entropy(&flat, 3.0) - 4.0).abs() < 1e-12);
    }
}
