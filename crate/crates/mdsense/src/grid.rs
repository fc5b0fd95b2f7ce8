//! Slow-time timeline, transmit resource grid, channel and CSI estimate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::par::{self, Execution};
use crate::scene::{synthesize_parts, SlowTimeParts, UavScene};
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    /// `t_m = m·T_s`, `m = 1..M`.
    Uniform,
    /// Uniform instants restricted to the D and S slots of every TDD cycle.
    TddGapped,
}

impl std::str::FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SamplingMode::Uniform),
            "tdd-gapped" => Ok(SamplingMode::TddGapped),
            other => Err(Error::Config(format!(
                "unknown sampling mode `{other}` (expected uniform or tdd-gapped)"
            ))),
        }
    }
}

impl std::fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SamplingMode::Uniform => "uniform",
            SamplingMode::TddGapped => "tdd-gapped",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameConfig {
    pub subcarrier_spacing: f64,
    /// OFDM symbol duration including the cyclic prefix.
    pub symbol_duration: f64,
    pub cp_duration: f64,
    pub bandwidth: f64,
    pub subcarriers: usize,
    /// Number of sensing symbols M.
    pub symbols: usize,
    pub tdd_pattern: String,
    pub cycle_duration: f64,
    pub cpi_duration: f64,
    pub sampling_mode: SamplingMode,
}

impl Default for FrameConfig {
    fn default() -> Self {
        let symbol_duration = 36.6e-6;
        Self {
            subcarrier_spacing: 30e3,
            symbol_duration,
            cp_duration: symbol_duration - 1.0 / 30e3,
            bandwidth: 100e6,
            subcarriers: 3276,
            symbols: 1840,
            tdd_pattern: "DDDSU".to_string(),
            cycle_duration: 2.5e-3,
            cpi_duration: 0.1,
            sampling_mode: SamplingMode::Uniform,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if !(self.subcarrier_spacing > 0.0) {
            return cfg_err("subcarrier spacing must be positive".into());
        }
        if !(self.symbol_duration > 1.0 / self.subcarrier_spacing) {
            return cfg_err(format!(
                "symbol duration {} s must exceed 1/Δf = {} s",
                self.symbol_duration,
                1.0 / self.subcarrier_spacing
            ));
        }
        if self.subcarriers == 0 || self.symbols == 0 {
            return cfg_err("subcarrier and symbol counts must be positive".into());
        }
        if !(self.bandwidth > 0.0) {
            return cfg_err("bandwidth must be positive".into());
        }
        if self.sampling_mode == SamplingMode::TddGapped {
            if self.tdd_pattern.is_empty()
                || !self.tdd_pattern.chars().all(|c| matches!(c, 'D' | 'S' | 'U'))
            {
                return cfg_err(format!("bad TDD pattern `{}`", self.tdd_pattern));
            }
            let cycles = self.cpi_duration / self.cycle_duration;
            if !(self.cycle_duration > 0.0) || cycles < 1.0 - 1e-9 || (cycles - cycles.round()).abs() > 1e-6 {
                return cfg_err(format!(
                    "CPI {} s must be a positive multiple of the cycle {} s",
                    self.cpi_duration, self.cycle_duration
                ));
            }
        }
        Ok(())
    }

    /// Reported range resolution `c / 2B`.
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth)
    }

    pub fn cycles(&self) -> usize {
        (self.cpi_duration / self.cycle_duration).round() as usize
    }
}

/// Sensing symbols carried by one TDD cycle when `symbols` are spread over `cycles`.
pub fn symbols_per_cycle(symbols: usize, cycles: usize) -> usize {
    symbols / cycles
}

/// Sample instants (s) of the sensing symbols.
pub fn build_timeline(cfg: &FrameConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let ts = cfg.symbol_duration;
    match cfg.sampling_mode {
        SamplingMode::Uniform => Ok((1..=cfg.symbols).map(|m| m as f64 * ts).collect()),
        SamplingMode::TddGapped => {
            let cycles = cfg.cycles();
            let per_cycle = symbols_per_cycle(cfg.symbols, cycles);
            if per_cycle == 0 {
                return Err(Error::Config("fewer symbols than TDD cycles".into()));
            }
            let slots: Vec<char> = cfg.tdd_pattern.chars().collect();
            let slot_len = cfg.cycle_duration / slots.len() as f64;
            let in_sensing_slot = |t: f64| {
                let within = t.rem_euclid(cfg.cycle_duration);
                let idx = ((within / slot_len).floor() as usize).min(slots.len() - 1);
                matches!(slots[idx], 'D' | 'S')
            };
            let mut out = Vec::with_capacity(per_cycle * cycles);
            for c in 0..cycles {
                let start = c as f64 * cfg.cycle_duration;
                let end = start + cfg.cycle_duration;
                let mut m = (start / ts).ceil().max(1.0) as usize;
                let mut taken = 0;
                while taken < per_cycle {
                    let t = m as f64 * ts;
                    if t >= end {
                        break;
                    }
                    if in_sensing_slot(t) {
                        out.push(t);
                        taken += 1;
                    }
                    m += 1;
                }
            }
            if out.is_empty() {
                return Err(Error::Config("TDD pattern leaves no sensing instants".into()));
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridRole {
    Tx,
    Rx,
    Csi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    pub data: ComplexMatrix,
    pub role: GridRole,
}

impl ResourceGrid {
    pub fn subcarriers(&self) -> usize {
        self.data.rows()
    }

    pub fn symbols(&self) -> usize {
        self.data.cols()
    }
}

/// Independent generator for column `col` of a seeded grid.
pub(crate) fn column_rng(seed: u64, col: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(col);
    rng
}

fn assemble_columns(n: usize, m: usize, columns: Vec<Vec<Complex64>>) -> ComplexMatrix {
    let flat: Vec<Complex64> = columns.into_iter().flatten().collect();
    ComplexMatrix::from_vec(m, n, flat).expect("column lengths match").transpose()
}

/// QPSK transmit grid, reproducible from `seed`.
pub fn make_tx_grid(n: usize, m: usize, seed: u64) -> Result<ResourceGrid> {
    if n == 0 || m == 0 {
        return Err(Error::param("grid dimensions must be positive"));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let columns = par::map_indexed(Execution::default(), m, |c| {
        let mut rng = column_rng(seed, c as u64);
        let mut bits = 0u64;
        (0..n)
            .map(|i| {
                // 32 two-bit symbols per draw
                if i % 32 == 0 {
                    bits = rng.random();
                }
                let sym = (bits >> (2 * (i % 32))) & 3;
                match sym {
                    0 => Complex64::new(h, h),
                    1 => Complex64::new(-h, h),
                    2 => Complex64::new(-h, -h),
                    _ => Complex64::new(h, -h),
                }
            })
            .collect()
    });
    Ok(ResourceGrid {
        data: assemble_columns(n, m, columns),
        role: GridRole::Tx,
    })
}

/// Range steering vector `k_R(n) = exp(-j2π nΔf 2R_0/c)`, `n = 0..N-1`.
pub fn kr_vector(n: usize, subcarrier_spacing: f64, r0: f64) -> Result<Vec<Complex64>> {
    if !(r0 > 0.0) {
        return Err(Error::param("R_0 must be positive"));
    }
    let step = -2.0 * PI * subcarrier_spacing * 2.0 * r0 / SPEED_OF_LIGHT;
    Ok((0..n).map(|k| Complex64::from_polar(1.0, step * k as f64)).collect())
}

/// Circular complex Gaussian sample with variance `var`.
pub(crate) fn cgauss<R: Rng>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// `D_RX = D_TX ∘ (k_R ⊗ k_D) + Ω` for an explicit slow-time vector.
pub fn apply_channel_kd(
    tx: &ResourceGrid,
    kr: &[Complex64],
    kd: &[Complex64],
    noise_var: f64,
    seed: u64,
) -> Result<ResourceGrid> {
    let (n, m) = tx.data.shape();
    if kr.len() != n || kd.len() != m {
        return Err(Error::param(format!(
            "grid is {n}x{m} but k_R has {} and k_D has {} entries",
            kr.len(),
            kd.len()
        )));
    }
    if !(noise_var >= 0.0) {
        return Err(Error::param("noise variance must be non-negative"));
    }
    let tx_t = tx.data.transpose();
    let columns = par::map_indexed(Execution::default(), m, |c| {
        let mut rng = column_rng(seed ^ 0x9e37_79b9_7f4a_7c15, c as u64);
        tx_t.row(c)
            .iter()
            .zip(kr)
            .map(|(t, k)| {
                let clean = t * k * kd[c];
                if noise_var > 0.0 {
                    clean + cgauss(&mut rng, noise_var)
                } else {
                    clean
                }
            })
            .collect()
    });
    Ok(ResourceGrid {
        data: assemble_columns(n, m, columns),
        role: GridRole::Rx,
    })
}

/// Received grid for `scene` sampled on `timeline`, with bulk range `R_0` in `k_R`.
pub fn apply_channel(
    tx: &ResourceGrid,
    scene: &UavScene,
    timeline: &[f64],
    subcarrier_spacing: f64,
    noise_var: f64,
    seed: u64,
) -> Result<ResourceGrid> {
    if timeline.len() != tx.symbols() {
        return Err(Error::param(format!(
            "timeline has {} instants for {} symbols",
            timeline.len(),
            tx.symbols()
        )));
    }
    let kd = crate::scene::synthesize_slow_time(scene, timeline)?;
    let kr = kr_vector(tx.subcarriers(), subcarrier_spacing, scene.body.initial_range)?;
    apply_channel_kd(tx, &kr, &kd, noise_var, seed)
}

/// `CSI = D_RX / D_TX` elementwise.
pub fn estimate_csi(rx: &ResourceGrid, tx: &ResourceGrid) -> Result<ResourceGrid> {
    if rx.data.shape() != tx.data.shape() {
        return Err(Error::param("rx and tx grids differ in shape"));
    }
    let mut out = rx.data.clone();
    for (o, t) in out.as_mut_slice().iter_mut().zip(tx.data.as_slice()) {
        if t.norm_sqr() == 0.0 {
            return Err(Error::param("transmit grid contains a zero symbol"));
        }
        *o /= t;
    }
    Ok(ResourceGrid {
        data: out,
        role: GridRole::Csi,
    })
}

/// Everything produced by one run of the grid-level simulation.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub timeline: Vec<f64>,
    pub parts: SlowTimeParts,
    pub tx: ResourceGrid,
    pub rx: ResourceGrid,
    pub csi: ResourceGrid,
    pub noise_var: f64,
}

/// Scene → timeline → TX grid → channel → CSI. `snr_db = None` is noiseless;
/// otherwise the per-entry noise variance is set from the mean power of `k_D`.
pub fn simulate(scene: &UavScene, frame: &FrameConfig, snr_db: Option<f64>, seed: u64) -> Result<Simulation> {
    let mut frame = frame.clone();
    let timeline = build_timeline(&frame)?;
    frame.symbols = timeline.len();
    let parts = synthesize_parts(scene, &timeline)?;
    let kd = parts.total();
    let noise_var = match snr_db {
        None => 0.0,
        Some(snr) => {
            let p = kd.iter().map(|z| z.norm_sqr()).sum::<f64>() / kd.len() as f64;
            if p > 0.0 {
                p / crate::db_to_linear(snr)
            } else {
                0.0
            }
        }
    };
    let tx = make_tx_grid(frame.subcarriers, frame.symbols, seed)?;
    let kr = kr_vector(frame.subcarriers, frame.subcarrier_spacing, scene.body.initial_range)?;
    let rx = apply_channel_kd(&tx, &kr, &kd, noise_var, seed)?;
    let csi = estimate_csi(&rx, &tx)?;
    Ok(Simulation {
        timeline,
        parts,
        tx,
        rx,
        csi,
        noise_var,
    })
}
