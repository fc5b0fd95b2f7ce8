//! Monte-Carlo evaluation: SNR control, RMSE sweeps, flash period and
//! vibration suppression.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::cgauss;
use crate::nsp::{decompose_with, DecompositionOutput, NspConfig, Variant};
use crate::par::{self, Execution};
use crate::ranging::{bulk_gain, expected_range_bin, ClutterConfig};
use crate::scene::{synthesize_parts, UavScene};
use crate::tfa::{stft, Spectrogram, StftConfig};

/// Per-sample noise variance giving `snr_db` against the mean power of `s`.
pub fn noise_for_snr(s: &[Complex64], snr_db: f64) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::param("empty signal"));
    }
    let energy: f64 = s.iter().map(|z| z.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(Error::param("cannot set an SNR against a zero signal"));
    }
    Ok(energy / (s.len() as f64 * crate::db_to_linear(snr_db)))
}

/// `‖est − truth‖ / ‖truth‖`.
pub fn relative_rmse(est: &[Complex64], truth: &[Complex64]) -> f64 {
    let num: f64 = est.iter().zip(truth).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = truth.iter().map(|z| z.norm_sqr()).sum();
    (num / den).sqrt()
}

/// `|⟨a, b⟩| / (‖a‖‖b‖)`.
pub fn correlation(a: &[Complex64], b: &[Complex64]) -> f64 {
    let ip: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        ip.norm() / (na * nb)
    }
}

/// Index of the component best correlated with `truth`.
pub fn select_by_oracle(components: &[Vec<Complex64>], truth: &[Complex64]) -> usize {
    (0..components.len())
        .max_by(|&a, &b| correlation(&components[a], truth).total_cmp(&correlation(&components[b], truth)))
        .unwrap_or(0)
}

/// Index of the component with the most spectral energy outside `±guard_hz`.
pub fn select_by_high_band(components: &[Vec<Complex64>], sample_interval: f64, guard_hz: f64) -> usize {
    let energy = |c: &Vec<Complex64>| {
        let n = c.len();
        let mut buf = c.clone();
        rustfft::FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let df = 1.0 / (n as f64 * sample_interval);
        buf.iter()
            .enumerate()
            .filter(|(k, _)| {
                let f = if *k <= n / 2 { *k as f64 } else { *k as f64 - n as f64 } * df;
                f.abs() > guard_hz
            })
            .map(|(_, z)| z.norm_sqr())
            .sum::<f64>()
    };
    (0..components.len())
        .max_by(|&a, &b| energy(&components[a]).total_cmp(&energy(&components[b])))
        .unwrap_or(0)
}

/// Scene and sampling used to synthesise slow-time trials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSetup {
    pub scene: UavScene,
    pub symbols: usize,
    pub sample_interval: f64,
    /// Subcarrier count fixing the bulk gain of the extracted range row.
    pub subcarriers: usize,
    pub subcarrier_spacing: f64,
    pub clutter: Option<ClutterConfig>,
}

impl Default for TrialSetup {
    fn default() -> Self {
        Self {
            scene: UavScene::default(),
            symbols: 512,
            sample_interval: 36.6e-6,
            subcarriers: 512,
            subcarrier_spacing: 30e3,
            clutter: None,
        }
    }
}

/// One synthetic observation with its ground truth, all scaled by the bulk gain.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub s_mix: Vec<Complex64>,
    pub s_uav: Vec<Complex64>,
    pub rotor: Vec<Complex64>,
    pub vibration: Vec<Complex64>,
    pub translation: Vec<Complex64>,
    pub noise_var: f64,
}

impl TrialSetup {
    pub fn timeline(&self) -> Vec<f64> {
        (1..=self.symbols).map(|m| m as f64 * self.sample_interval).collect()
    }

    /// Slow-time row `d(k_p)·k_D` plus clutter and AWGN at `snr_db`
    /// (`None` = noiseless).
    pub fn draw(&self, snr_db: Option<f64>, rng: &mut ChaCha8Rng) -> Result<Trial> {
        let parts = synthesize_parts(&self.scene, &self.timeline())?;
        let k = expected_range_bin(self.subcarriers, self.subcarrier_spacing, self.scene.body.initial_range);
        let d = bulk_gain(self.subcarriers, self.subcarrier_spacing, self.scene.body.initial_range, k);
        let scale = |v: &[Complex64]| v.iter().map(|z| z * d).collect::<Vec<_>>();
        let rotor = scale(&parts.rotation);
        let vibration = scale(&parts.vibration);
        let translation = scale(&parts.translation);
        let s_uav = scale(&parts.total());
        let power = s_uav.iter().map(|z| z.norm_sqr()).sum::<f64>() / s_uav.len() as f64;
        let clutter: Complex64 = match &self.clutter {
            Some(c) if power > 0.0 => c.draw(power, rng).iter().sum(),
            _ => Complex64::new(0.0, 0.0),
        };
        let extra = self.clutter.as_ref().map_or(0.0, |c| c.noise_var);
        let noise_var = match snr_db {
            Some(snr) => noise_for_snr(&s_uav, snr)? + extra,
            None => extra,
        };
        let s_mix = s_uav
            .iter()
            .map(|z| {
                let n = if noise_var > 0.0 { cgauss(rng, noise_var) } else { Complex64::new(0.0, 0.0) };
                z + clutter + n
            })
            .collect();
        Ok(Trial {
            s_mix,
            s_uav,
            rotor,
            vibration,
            translation,
            noise_var,
        })
    }
}

/// Random stream for trial `trial` at SNR `snr_db`.
pub fn trial_rng(seed: u64, snr_db: f64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ snr_db.to_bits().rotate_left(17));
    rng.set_stream(trial as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub rmse: f64,
    pub converged: bool,
    pub selected: usize,
    pub output: DecompositionOutput,
    pub trial: Trial,
}

/// Decomposes one trial and scores the component closest to the true rotor.
pub fn run_trial(
    setup: &TrialSetup,
    variant: Variant,
    snr_db: Option<f64>,
    passes: usize,
    nsp: &NspConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrialOutcome> {
    let trial = setup.draw(snr_db, rng)?;
    let output = decompose_with(&trial.s_mix, passes, variant, nsp, Execution::Sequential)?;
    let selected = select_by_oracle(&output.components, &trial.rotor);
    Ok(TrialOutcome {
        rmse: relative_rmse(&output.components[selected], &trial.rotor),
        converged: output.converged(),
        selected,
        output,
        trial,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub setup: TrialSetup,
    pub snr_grid: Vec<f64>,
    pub trials: usize,
    pub variants: Vec<Variant>,
    pub passes: usize,
    pub nsp: NspConfig,
    pub seed: u64,
    pub execution: Execution,
    /// Worker threads; `None` keeps the global pool.
    pub workers: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            setup: TrialSetup::default(),
            snr_grid: snr_grid(-10.0, 30.0, 5.0).expect("valid default grid"),
            trials: 20,
            variants: Variant::ALL.to_vec(),
            passes: 1,
            nsp: NspConfig::default(),
            seed: 1,
            execution: Execution::default(),
            workers: None,
        }
    }
}

/// `min, min+step, …` up to and including `max` (within rounding).
pub fn snr_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || max < min {
        return Err(Error::Config(format!("bad SNR grid {min}..{max} step {step}")));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| min + k as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variant: Variant,
    pub snr_db: f64,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    pub convergence_rate: f64,
    /// Trials whose decomposition failed and were left out of the mean.
    pub failures: usize,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "variant,snr_db,mean_rmse,std_rmse,convergence_rate";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.4}",
            self.variant, self.snr_db, self.mean_rmse, self.std_rmse, self.convergence_rate
        )
    }
}

fn summarise(variant: Variant, snr_db: f64, cells: &[Result<TrialOutcome>]) -> SweepRow {
    let ok: Vec<&TrialOutcome> = cells.iter().filter_map(|c| c.as_ref().ok()).collect();
    let n = ok.len() as f64;
    let mean = if ok.is_empty() { f64::NAN } else { ok.iter().map(|o| o.rmse).sum::<f64>() / n };
    let var = if ok.is_empty() {
        f64::NAN
    } else {
        ok.iter().map(|o| (o.rmse - mean).powi(2)).sum::<f64>() / n
    };
    SweepRow {
        variant,
        snr_db,
        mean_rmse: mean,
        std_rmse: var.sqrt(),
        convergence_rate: ok.iter().filter(|o| o.converged).count() as f64 / cells.len() as f64,
        failures: cells.len() - ok.len(),
    }
}

/// Mean relative RMSE of the oracle-selected rotor component over `trials`.
pub fn rmse_point(
    setup: &TrialSetup,
    variant: Variant,
    snr_db: f64,
    trials: usize,
    seed: u64,
    nsp: &NspConfig,
    passes: usize,
) -> Result<SweepRow> {
    if trials == 0 {
        return Err(Error::param("at least one trial is required"));
    }
    let cells = par::map_indexed(Execution::default(), trials, |t| {
        run_trial(setup, variant, Some(snr_db), passes, nsp, &mut trial_rng(seed, snr_db, t))
    });
    Ok(summarise(variant, snr_db, &cells))
}

/// Runs every (variant, SNR, trial) cell. `on_row` sees each row as soon as
/// its SNR point completes, in grid order.
pub fn run_sweep(cfg: &SweepConfig, mut on_row: impl FnMut(&SweepRow) -> Result<()> + Send) -> Result<Vec<SweepRow>> {
    if cfg.trials == 0 || cfg.snr_grid.is_empty() || cfg.variants.is_empty() {
        return Err(Error::Config("sweep needs trials, SNR points and variants".into()));
    }
    cfg.nsp.validate()?;
    par::with_workers(cfg.workers, || {
        let mut rows = Vec::new();
        for &snr in &cfg.snr_grid {
            let nv = cfg.variants.len();
            let cells = par::map_indexed(cfg.execution, nv * cfg.trials, |i| {
                let (v, t) = (cfg.variants[i / cfg.trials], i % cfg.trials);
                run_trial(&cfg.setup, v, Some(snr), cfg.passes, &cfg.nsp, &mut trial_rng(cfg.seed, snr, t))
            });
            for (k, &v) in cfg.variants.iter().enumerate() {
                let row = summarise(v, snr, &cells[k * cfg.trials..(k + 1) * cfg.trials]);
                on_row(&row)?;
                rows.push(row);
            }
        }
        Ok(rows)
    })
}

/// Blade-flash period (s) from the autocorrelation of the per-frame balance
/// between energy above `+band_hz` and below `-band_hz`.
pub fn flash_period(spec: &Spectrogram, band_hz: f64) -> Result<f64> {
    let frames = spec.frames();
    let mut pos = vec![0.0; frames];
    let mut neg = vec![0.0; frames];
    let mut total = 0.0;
    for (r, &f) in spec.freq_axis.iter().enumerate() {
        for (c, z) in spec.values.row(r).iter().enumerate() {
            let e = z.norm_sqr();
            total += e;
            if f > band_hz {
                pos[c] += e;
            } else if f < -band_hz {
                neg[c] += e;
            }
        }
    }
    let high: f64 = pos.iter().chain(&neg).sum();
    if total == 0.0 || high < 1e-3 * total {
        return Err(Error::Estimation(format!(
            "no energy beyond ±{band_hz} Hz to track blade flashes"
        )));
    }
    // the dynamic RCS scales both sidebands alike, so the balance between
    // them carries the rotation geometry without the RCS modulation
    let balance: Vec<f64> = pos
        .iter()
        .zip(&neg)
        .map(|(p, n)| if p + n > 0.0 { (p - n) / (p + n) } else { 0.0 })
        .collect();
    let mean = balance.iter().sum::<f64>() / frames as f64;
    let d: Vec<f64> = balance.iter().map(|v| v - mean).collect();
    let ac: Vec<f64> = (0..frames / 2)
        .map(|lag| d.iter().zip(&d[lag..]).map(|(a, b)| a * b).sum::<f64>() / frames as f64)
        .collect();
    if ac.len() < 3 || ac[0] <= 0.0 {
        return Err(Error::Estimation("spectrogram too short for a period estimate".into()));
    }
    // first local maximum that stands clear of the noise
    let lag = (1..ac.len() - 1)
        .find(|&l| ac[l] > ac[l - 1] && ac[l] >= ac[l + 1] && ac[l] > 0.3 * ac[0])
        .ok_or_else(|| Error::Estimation("no periodic blade flashes found".into()))?;
    let (l, c, r) = (ac[lag - 1], ac[lag], ac[lag + 1]);
    let denom = l - 2.0 * c + r;
    let shift = if denom != 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
    Ok((lag as f64 + shift.clamp(-0.5, 0.5)) * spec.frame_interval())
}

/// Largest value reported by [`vibration_suppression`].
pub const SUPPRESSION_CEILING_DB: f64 = 100.0;

/// Energy of `component` in the time–frequency cells dominated by the true
/// rotor over its energy in the cells dominated by the true vibration (dB).
pub fn vibration_suppression(
    component: &[Complex64],
    rotor: &[Complex64],
    vibration: &[Complex64],
    sample_interval: f64,
    cfg: &StftConfig,
) -> Result<f64> {
    let c = stft(component, sample_interval, cfg)?;
    let r = stft(rotor, sample_interval, cfg)?;
    let v = stft(vibration, sample_interval, cfg)?;
    let (rmax, vmax) = (r.max_magnitude(), v.max_magnitude());
    let (mut er, mut ev) = (0.0, 0.0);
    for ((zc, zr), zv) in c.values.as_slice().iter().zip(r.values.as_slice()).zip(v.values.as_slice()) {
        let (pr, pv) = (zr.norm(), zv.norm());
        if pr > pv && pr > cfg.threshold_rel * rmax {
            er += zc.norm_sqr();
        } else if pv > pr && pv > cfg.threshold_rel * vmax {
            ev += zc.norm_sqr();
        }
    }
    if er == 0.0 {
        return Err(Error::Estimation("component has no energy in the rotor cells".into()));
    }
    if ev == 0.0 {
        return Ok(SUPPRESSION_CEILING_DB);
    }
    Ok((10.0 * (er / ev).log10()).min(SUPPRESSION_CEILING_DB))
}
