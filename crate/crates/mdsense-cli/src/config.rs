//! Sectioned `key = value` run configuration.
//!
//! Values are kept as text after validation so that a dumped configuration
//! parses back to exactly the same run.

use std::collections::BTreeMap;
use std::path::Path;

use mdsense::bench::{snr_grid, SweepConfig, TrialSetup};
use mdsense::grid::{FrameConfig, SamplingMode};
use mdsense::nsp::{NspConfig, Variant};
use mdsense::ranging::ClutterConfig;
use mdsense::scene::{BodyScatterer, LinkBudget, RotorBlade, UavScene};
use mdsense::tfa::StftConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Real,
    Count,
    Seed,
    Flag,
    Text,
    /// A real number or `none`.
    OptReal,
}

struct Key {
    section: &'static str,
    name: &'static str,
    default: &'static str,
    kind: Kind,
    note: &'static str,
}

macro_rules! key {
    ($s:literal, $n:literal, $d:literal, $k:ident, $note:literal) => {
        Key {
            section: $s,
            name: $n,
            default: $d,
            kind: Kind::$k,
            note: $note,
        }
    };
}

const KEYS: &[Key] = &[
    key!("scene", "initial_range", "50", Real, "R_0 (m)"),
    key!("scene", "radial_velocity", "5", Real, "v (m/s)"),
    key!("scene", "body_rcs", "0.1", Real, "sigma_body (m^2)"),
    key!("scene", "vibration_amplitude", "0.05", Real, "D_v (m)"),
    key!("scene", "vibration_frequency", "100", Real, "f_v (Hz)"),
    key!("scene", "vibration_azimuth_deg", "10", Real, "alpha_q"),
    key!("scene", "elevation_deg", "30", Real, "theta"),
    key!("scene", "azimuth_deg", "0", Real, "alpha"),
    key!("scene", "blades", "1", Count, "blade tips P"),
    key!("scene", "blade_length", "0.5", Real, "L (m)"),
    key!("scene", "rotation_rate", "80", Real, "f_r (rot/s)"),
    key!("scene", "initial_angle_deg", "0", Real, "phi of the first blade; others spread evenly"),
    key!("scene", "transmit_power_dbm", "28", Real, "P_t"),
    key!("scene", "tx_gain_db", "18", Real, "G_t"),
    key!("scene", "rx_gain_db", "18", Real, "G_r"),
    key!("scene", "carrier_frequency", "3.5e9", Real, "f_c (Hz)"),
    key!("scene", "system_loss_db", "0", Real, "L_s, ignored in the link budget"),
    key!("scene", "path_loss_db", "0", Real, "L_a, not given; unity"),
    key!("scene", "translation", "true", Flag, "include the body echo"),
    key!("scene", "vibration", "true", Flag, "include the vibrating point"),
    key!("scene", "rotation", "true", Flag, "include the blade tips"),
    key!("frame", "subcarrier_spacing", "30e3", Real, "Delta f (Hz)"),
    key!("frame", "symbol_duration", "36.6e-6", Real, "T_s (s)"),
    key!("frame", "bandwidth", "100e6", Real, "B (Hz)"),
    key!("frame", "subcarriers", "3276", Count, "N"),
    key!("frame", "symbols", "1840", Count, "M"),
    key!("frame", "tdd_pattern", "DDDSU", Text, "slot letters D, S, U"),
    key!("frame", "cycle_duration", "2.5e-3", Real, "TDD cycle (s)"),
    key!("frame", "cpi_duration", "0.1", Real, "CPI (s)"),
    key!("frame", "sampling", "uniform", Text, "uniform | tdd-gapped"),
    key!("clutter", "enabled", "false", Flag, "add static clutter to s_mix"),
    key!("clutter", "scatterers", "3", Count, "number of clutter points"),
    key!("clutter", "csr_db", "10", Real, "clutter-to-signal ratio (dB)"),
    key!("clutter", "noise_var", "0", Real, "extra AWGN variance on the slow-time row"),
    key!("solver", "variant", "rmd-nsp", Text, "rmd-nsp | amfm-nsp | nsp"),
    key!("solver", "passes", "1", Count, "components extracted"),
    key!("solver", "epsilon", "1e-4", Real, "stop when |dr|^2 <= epsilon |s|^2"),
    key!("solver", "max_iter", "30", Count, "iteration cap"),
    key!("solver", "lambda1", "1e-2", Real, "initial lambda_1"),
    key!("solver", "lambda2", "1e4", Real, "operator smoothness weight"),
    key!("solver", "gamma", "0", Real, "initial leakage"),
    key!("solver", "coupling", "1e-6", Real, "rotor-model coupling weight, relative to lambda2"),
    key!("solver", "rmd_smoothness", "1", Real, "rotor-model smoothness weight, relative to lambda2"),
    key!("transform", "window", "257", Count, "Gaussian window length"),
    key!("transform", "hop", "4", Count, "frame step (samples)"),
    key!("transform", "fft_size", "1024", Count, "DFT length"),
    key!("transform", "threshold", "0.02", Real, "SET threshold relative to the peak"),
    key!("sweep", "snr_min", "-10", Real, "dB"),
    key!("sweep", "snr_max", "30", Real, "dB"),
    key!("sweep", "snr_step", "5", Real, "dB; 1 reproduces the full grid"),
    key!("sweep", "trials", "20", Count, "trials per point"),
    key!("sweep", "variants", "rmd-nsp,amfm-nsp,nsp", Text, "comma separated"),
    key!("sweep", "symbols", "512", Count, "M per trial"),
    key!("sweep", "subcarriers", "512", Count, "N fixing the bulk range gain"),
    key!("run", "seed", "1", Seed, "master seed"),
    key!("run", "snr_db", "30", OptReal, "grid SNR (dB), or none"),
];

fn find(section: &str, name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.section == section && k.name == name)
}

fn check_value(key: &Key, value: &str) -> Result<(), String> {
    let ok = match key.kind {
        Kind::Real => value.parse::<f64>().map(|v| v.is_finite()).unwrap_or(false),
        Kind::Count => value.parse::<usize>().is_ok(),
        Kind::Seed => value.parse::<u64>().is_ok(),
        Kind::Flag => matches!(value, "true" | "false"),
        Kind::Text => !value.is_empty(),
        Kind::OptReal => value == "none" || value.parse::<f64>().map(|v| v.is_finite()).unwrap_or(false),
    };
    if ok {
        Ok(())
    } else {
        Err(format!("{}.{}: `{value}` is not a valid {:?}", key.section, key.name, key.kind))
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    values: BTreeMap<(String, String), String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let values = KEYS
            .iter()
            .map(|k| ((k.section.to_string(), k.name.to_string()), k.default.to_string()))
            .collect();
        Self { values }
    }
}

impl RunConfig {
    /// Parses configuration text on top of the defaults.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = Self::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| CliError::Config(format!("line {}: {msg}", i + 1));
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !KEYS.iter().any(|k| k.section == name) {
                    return Err(at(format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected key = value, found `{line}`")))?;
            let sec = section.as_deref().ok_or_else(|| at("key outside any [section]".into()))?;
            cfg.set(sec, k.trim(), v.trim()).map_err(|e| match e {
                CliError::Config(m) => at(m),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn set(&mut self, section: &str, name: &str, value: &str) -> CliResult<()> {
        let key = find(section, name).ok_or_else(|| CliError::Config(format!("unknown key {section}.{name}")))?;
        check_value(key, value).map_err(CliError::Config)?;
        self.values.insert((section.into(), name.into()), value.into());
        Ok(())
    }

    /// Applies a `section.key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> CliResult<()> {
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{spec}` is not section.key=value")))?;
        let (section, name) = path
            .split_once('.')
            .ok_or_else(|| CliError::Config(format!("override key `{path}` is not section.key")))?;
        self.set(section.trim(), name.trim(), value.trim())
    }

    /// Configuration text that parses back to `self`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for k in KEYS {
            if k.section != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{}]\n", k.section));
                current = k.section;
            }
            out.push_str(&format!("{} = {}  # {}\n", k.name, self.raw(k.section, k.name), k.note));
        }
        out
    }

    fn raw(&self, section: &str, name: &str) -> &str {
        &self.values[&(section.to_string(), name.to_string())]
    }

    fn real(&self, section: &str, name: &str) -> f64 {
        self.raw(section, name).parse().expect("validated on insert")
    }

    fn count(&self, section: &str, name: &str) -> usize {
        self.raw(section, name).parse().expect("validated on insert")
    }

    fn flag(&self, section: &str, name: &str) -> bool {
        self.raw(section, name) == "true"
    }

    pub fn seed(&self) -> u64 {
        self.raw("run", "seed").parse().expect("validated on insert")
    }

    /// Grid SNR in dB; `None` is noiseless.
    pub fn snr_db(&self) -> Option<f64> {
        match self.raw("run", "snr_db") {
            "none" => None,
            v => Some(v.parse().expect("validated on insert")),
        }
    }

    pub fn scene(&self) -> UavScene {
        let deg = |k| self.real("scene", k).to_radians();
        let body = BodyScatterer {
            initial_range: self.real("scene", "initial_range"),
            radial_velocity: self.real("scene", "radial_velocity"),
            rcs: self.real("scene", "body_rcs"),
            vibration_amplitude: self.real("scene", "vibration_amplitude"),
            vibration_frequency: self.real("scene", "vibration_frequency"),
            vibration_azimuth: deg("vibration_azimuth_deg"),
            elevation: deg("elevation_deg"),
            azimuth: deg("azimuth_deg"),
        };
        let mut link = LinkBudget::from_db(
            self.real("scene", "transmit_power_dbm"),
            self.real("scene", "tx_gain_db"),
            self.real("scene", "rx_gain_db"),
            self.real("scene", "carrier_frequency"),
        );
        link.system_loss = 10f64.powf(self.real("scene", "system_loss_db") / 10.0);
        link.path_loss = 10f64.powf(self.real("scene", "path_loss_db") / 10.0);
        let template = RotorBlade {
            length: self.real("scene", "blade_length"),
            rotation_rate: self.real("scene", "rotation_rate"),
            initial_angle: deg("initial_angle_deg"),
            elevation: body.elevation,
            ..RotorBlade::default()
        };
        UavScene {
            body,
            link,
            translation: self.flag("scene", "translation"),
            vibration: self.flag("scene", "vibration"),
            rotation: self.flag("scene", "rotation"),
            ..UavScene::default()
        }
        .with_blades(self.count("scene", "blades"), &template)
    }

    pub fn frame(&self) -> CliResult<FrameConfig> {
        let symbol_duration = self.real("frame", "symbol_duration");
        let spacing = self.real("frame", "subcarrier_spacing");
        let sampling: SamplingMode = self
            .raw("frame", "sampling")
            .parse()
            .map_err(|e: mdsense::Error| CliError::Config(format!("frame.sampling: {e}")))?;
        let frame = FrameConfig {
            subcarrier_spacing: spacing,
            symbol_duration,
            cp_duration: symbol_duration - 1.0 / spacing,
            bandwidth: self.real("frame", "bandwidth"),
            subcarriers: self.count("frame", "subcarriers"),
            symbols: self.count("frame", "symbols"),
            tdd_pattern: self.raw("frame", "tdd_pattern").to_string(),
            cycle_duration: self.real("frame", "cycle_duration"),
            cpi_duration: self.real("frame", "cpi_duration"),
            sampling_mode: sampling,
        };
        frame.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(frame)
    }

    /// Clutter settings when enabled.
    pub fn clutter(&self) -> Option<ClutterConfig> {
        self.flag("clutter", "enabled").then(|| ClutterConfig {
            scatterers: self.count("clutter", "scatterers"),
            csr_db: self.real("clutter", "csr_db"),
            noise_var: self.real("clutter", "noise_var"),
        })
    }

    pub fn variant(&self) -> CliResult<Variant> {
        parse_variant(self.raw("solver", "variant"))
    }

    pub fn passes(&self) -> usize {
        self.count("solver", "passes")
    }

    pub fn solver(&self) -> CliResult<NspConfig> {
        let cfg = NspConfig {
            epsilon: self.real("solver", "epsilon"),
            max_iter: self.count("solver", "max_iter"),
            lambda1: self.real("solver", "lambda1"),
            lambda2: self.real("solver", "lambda2"),
            gamma: self.real("solver", "gamma"),
            coupling: self.real("solver", "coupling"),
            rmd_smoothness: self.real("solver", "rmd_smoothness"),
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn transform(&self) -> CliResult<StftConfig> {
        let cfg = StftConfig::gaussian(
            self.count("transform", "window"),
            self.count("transform", "hop"),
            self.count("transform", "fft_size"),
            self.real("transform", "threshold"),
        );
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn sweep(&self) -> CliResult<SweepConfig> {
        let grid = snr_grid(
            self.real("sweep", "snr_min"),
            self.real("sweep", "snr_max"),
            self.real("sweep", "snr_step"),
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        let variants = self
            .raw("sweep", "variants")
            .split(',')
            .map(|v| parse_variant(v.trim()))
            .collect::<CliResult<Vec<_>>>()?;
        let trials = self.count("sweep", "trials");
        if trials == 0 {
            return Err(CliError::Config("sweep.trials must be at least 1".into()));
        }
        let frame = self.frame()?;
        Ok(SweepConfig {
            setup: TrialSetup {
                scene: self.scene(),
                symbols: self.count("sweep", "symbols"),
                sample_interval: frame.symbol_duration,
                subcarriers: self.count("sweep", "subcarriers"),
                subcarrier_spacing: frame.subcarrier_spacing,
                clutter: self.clutter(),
            },
            snr_grid: grid,
            trials,
            variants,
            passes: self.passes(),
            nsp: self.solver()?,
            seed: self.seed(),
            ..SweepConfig::default()
        })
    }
}

fn parse_variant(v: &str) -> CliResult<Variant> {
    v.parse().map_err(|e: mdsense::Error| CliError::Config(e.to_string()))
}
