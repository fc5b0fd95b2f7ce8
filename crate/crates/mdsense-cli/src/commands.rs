//! Subcommand implementations. Each writes its outputs plus a `manifest.txt`
//! that is itself a valid config for re-running the command.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mdsense::bench::{run_sweep, SweepRow};
use mdsense::export::{default_db_window, write_db_csv, write_diagnostics, write_pgm};
use mdsense::grid::build_timeline;
use mdsense::nsp::decompose;
use mdsense::ranging::{add_clutter, bulk_gain, detect_and_extract, range_doppler_map, range_profile};
use mdsense::tfa::{set_transform, stft};
use mdsense::{Complex64, ComplexMatrix};
use rand::SeedableRng;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Environment variable selecting the bench worker count.
pub const WORKERS_ENV: &str = "MDSENSE_WORKERS";

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn save(m: &ComplexMatrix, path: &Path) -> CliResult<()> {
    m.save_cxm(path).map_err(|e| match e {
        mdsense::Error::Io(io) => CliError::io(path, io),
        other => CliError::at(path, other),
    })
}

fn save_vector(v: &[Complex64], path: &Path) -> CliResult<()> {
    save(&ComplexMatrix::row_vector(v), path)
}

fn load_vector(path: &Path) -> CliResult<Vec<Complex64>> {
    let load = || ComplexMatrix::load_cxm(path)?.to_vector();
    load().map_err(|e| match e {
        mdsense::Error::Io(io) => CliError::io(path, io),
        other => CliError::at(path, other),
    })
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> mdsense::Result<()>) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| match e {
        mdsense::Error::Io(io) => CliError::io(path, io),
        other => CliError::at(path, other),
    })
}

fn write_manifest(path: &Path, command: &str, notes: &[String], cfg: &RunConfig) -> CliResult<()> {
    let mut text = format!("# mdsense {command}\n");
    for n in notes {
        text.push_str(&format!("# {n}\n"));
    }
    text.push('\n');
    text.push_str(&cfg.dump());
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone)]
pub struct SimulateSummary {
    pub subcarriers: usize,
    pub symbols: usize,
    pub origin_bin: usize,
    pub range_resolution: f64,
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> CliResult<SimulateSummary> {
    let scene = cfg.scene();
    scene.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let frame = cfg.frame()?;
    let seed = cfg.seed();
    let sim = mdsense::grid::simulate(&scene, &frame, cfg.snr_db(), seed)?;
    let (n, m) = sim.csi.data.shape();
    let trm = range_profile(&sim.csi, frame.subcarrier_spacing);
    let row = detect_and_extract(&trm, &sim.timeline)?;

    // ground truth on the scale of the extracted row
    let d = bulk_gain(n, frame.subcarrier_spacing, scene.body.initial_range, row.origin_bin);
    let scale = |v: &[Complex64]| v.iter().map(|z| z * d).collect::<Vec<_>>();
    let s_uav = scale(&sim.parts.total());
    let s_mix = match cfg.clutter() {
        Some(clutter) => {
            let power = s_uav.iter().map(|z| z.norm_sqr()).sum::<f64>() / m as f64;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xc1u64);
            let points = clutter.draw(power, &mut rng);
            add_clutter(&row, &points, clutter.noise_var, seed).samples
        }
        None => row.samples.clone(),
    };

    create_dir(out)?;
    save(&sim.csi.data, &out.join("csi.cxm"))?;
    save_vector(&s_uav, &out.join("s_uav.cxm"))?;
    save_vector(&s_mix, &out.join("s_mix.cxm"))?;
    save_vector(&scale(&sim.parts.translation), &out.join("truth_translation.cxm"))?;
    save_vector(&scale(&sim.parts.vibration), &out.join("truth_vibration.cxm"))?;
    save_vector(&scale(&sim.parts.rotation), &out.join("truth_rotor.cxm"))?;
    let timeline: String = sim.timeline.iter().map(|t| format!("{t}\n")).collect();
    let tl_path = out.join("timeline.csv");
    fs::write(&tl_path, format!("t_s\n{timeline}")).map_err(|e| CliError::io(&tl_path, e))?;

    let summary = SimulateSummary {
        subcarriers: n,
        symbols: m,
        origin_bin: row.origin_bin,
        range_resolution: frame.range_resolution(),
    };
    let notes = vec![
        format!("seed={seed}"),
        format!("csi.cxm {n}x{m}; s_uav, s_mix and truth_*.cxm 1x{m}"),
        format!("target_bin={} bin_size_m={}", row.origin_bin, trm.bin_size),
        format!("range_resolution_m={}", summary.range_resolution),
        format!("grid_noise_var={:e}", sim.noise_var),
    ];
    write_manifest(&out.join("manifest.txt"), "simulate", &notes, cfg)?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct DecomposeSummary {
    pub components: usize,
    pub converged: bool,
    pub reconstruction_error: f64,
}

pub fn decompose_file(cfg: &RunConfig, input: &Path, out: &Path) -> CliResult<DecomposeSummary> {
    let s = load_vector(input)?;
    let variant = cfg.variant()?;
    let solver = cfg.solver()?;
    let result = decompose(&s, cfg.passes(), variant, &solver)?;

    create_dir(out)?;
    for (k, c) in result.components.iter().enumerate() {
        save_vector(c, &out.join(format!("component_{}.cxm", k + 1)))?;
    }
    let stacked: Vec<Complex64> = result.components.iter().flatten().copied().collect();
    save(
        &ComplexMatrix::from_vec(result.components.len(), s.len(), stacked)?,
        &out.join("components.cxm"),
    )?;
    save_vector(&result.residual, &out.join("residual.cxm"))?;
    write_with(&out.join("diagnostics.txt"), |w| write_diagnostics(w, &result))?;

    let reconstruction_error = result.passes.last().map_or(0.0, |p| p.reconstruction_error);
    let notes = vec![
        format!("input={}", input.display()),
        format!("variant={variant} passes={}", result.components.len()),
        format!("converged={} reconstruction_error={reconstruction_error:e}", result.converged()),
    ];
    write_manifest(&out.join("manifest.txt"), "decompose", &notes, cfg)?;
    Ok(DecomposeSummary {
        components: result.components.len(),
        converged: result.converged(),
        reconstruction_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrogramMode {
    Stft,
    Set,
}

impl SpectrogramMode {
    fn name(self) -> &'static str {
        match self {
            SpectrogramMode::Stft => "stft",
            SpectrogramMode::Set => "set",
        }
    }
}

/// Writes `<mode>.csv`, `<mode>.pgm` and `<mode>.cxm`; returns the CSV path.
pub fn spectrogram(cfg: &RunConfig, input: &Path, out: &Path, mode: SpectrogramMode) -> CliResult<PathBuf> {
    let u = load_vector(input)?;
    let frame = cfg.frame()?;
    let spec = stft(&u, frame.symbol_duration, &cfg.transform()?).map_err(|e| CliError::at(input, e))?;
    let threshold = spec.default_threshold();
    let spec = match mode {
        SpectrogramMode::Stft => spec,
        SpectrogramMode::Set => set_transform(&spec, threshold),
    };

    create_dir(out)?;
    let name = mode.name();
    let csv = out.join(format!("{name}.csv"));
    write_with(&csv, |w| write_db_csv(w, &spec.values, &spec.freq_axis, &spec.time_axis, "freq_hz\\time_s"))?;
    let (floor, ceiling) = default_db_window(&spec.values);
    write_with(&out.join(format!("{name}.pgm")), |w| write_pgm(w, &spec.values, floor, ceiling))?;
    save(&spec.values, &out.join(format!("{name}.cxm")))?;
    let notes = vec![
        format!("input={} mode={name}", input.display()),
        format!("bins={} frames={}", spec.bins(), spec.frames()),
        format!(
            "freq_hz={}..{} bin_width_hz={}",
            spec.freq_axis.first().copied().unwrap_or(0.0),
            spec.freq_axis.last().copied().unwrap_or(0.0),
            spec.bin_width()
        ),
        format!("threshold={threshold:e} nonzero_cells={}", spec.count_nonzero()),
        format!("pgm_floor_db={floor} pgm_ceiling_db={ceiling}"),
    ];
    write_manifest(&out.join(format!("{name}_manifest.txt")), "spectrogram", &notes, cfg)?;
    Ok(csv)
}

/// Worker count from [`WORKERS_ENV`], if set.
pub fn workers_from_env() -> CliResult<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("{WORKERS_ENV}=`{v}` is not a positive integer"))),
        },
    }
}

/// Runs the sweep, appending each row to `csv` as soon as it is known.
pub fn bench(cfg: &RunConfig, csv: &Path, workers: Option<usize>) -> CliResult<Vec<SweepRow>> {
    let mut sweep = cfg.sweep()?;
    sweep.workers = workers;
    if let Some(dir) = csv.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let mut file = File::create(csv).map_err(|e| CliError::io(csv, e))?;
    file.write_all(format!("{}\n", SweepRow::CSV_HEADER).as_bytes())
        .map_err(|e| CliError::io(csv, e))?;
    let mut manifest = csv.as_os_str().to_owned();
    manifest.push(".manifest.txt");
    let notes = vec![
        format!("csv={}", csv.display()),
        format!("snr_points={} workers={}", sweep.snr_grid.len(), workers.map_or("default".into(), |w| w.to_string())),
    ];
    write_manifest(Path::new(&manifest), "bench", &notes, cfg)?;
    // each row goes out in a single write so an interrupted run leaves whole lines
    let rows = run_sweep(&sweep, |row| {
        file.write_all(format!("{}\n", row.csv_line()).as_bytes())?;
        file.flush()?;
        Ok(())
    })
    .map_err(|e| match e {
        mdsense::Error::Io(io) => CliError::io(csv, io),
        other => CliError::Lib(other),
    })?;
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct RangeDopplerSummary {
    pub range_resolution: f64,
    pub peak_range: f64,
    pub peak_doppler: f64,
    pub peak_velocity: f64,
}

pub fn range_doppler(cfg: &RunConfig, input: &Path, out: &Path) -> CliResult<RangeDopplerSummary> {
    let csi = ComplexMatrix::load_cxm(input).map_err(|e| match e {
        mdsense::Error::Io(io) => CliError::io(input, io),
        other => CliError::at(input, other),
    })?;
    let mut frame = cfg.frame()?;
    let timeline = build_timeline(&frame).map_err(|e| CliError::Config(e.to_string()))?;
    frame.symbols = timeline.len();
    if csi.shape() != (frame.subcarriers, frame.symbols) {
        return Err(CliError::Config(format!(
            "{} is {}x{} but the frame config describes {}x{}",
            input.display(),
            csi.rows(),
            csi.cols(),
            frame.subcarriers,
            frame.symbols
        )));
    }
    let grid = mdsense::grid::ResourceGrid {
        data: csi,
        role: mdsense::grid::GridRole::Csi,
    };
    let fc = cfg.scene().link.carrier_frequency;
    let rd = range_doppler_map(&grid, &timeline, frame.subcarrier_spacing, fc, frame.bandwidth)?;
    let trm = range_profile(&grid, frame.subcarrier_spacing);

    create_dir(out)?;
    save(&rd.map, &out.join("range_doppler.cxm"))?;
    write_with(&out.join("range_doppler.csv"), |w| {
        write_db_csv(w, &rd.map, &rd.range_axis, &rd.doppler_axis, "range_m\\doppler_hz")
    })?;
    save(&trm.data, &out.join("range_profile.cxm"))?;
    let range_axis: Vec<f64> = (0..trm.data.rows()).map(|k| k as f64 * trm.bin_size).collect();
    write_with(&out.join("range_profile.csv"), |w| {
        write_db_csv(w, &trm.data, &range_axis, &timeline, "range_m\\time_s")
    })?;
    let (r, d) = rd.peak();
    let summary = RangeDopplerSummary {
        range_resolution: rd.range_resolution,
        peak_range: rd.range_axis[r],
        peak_doppler: rd.doppler_axis[d],
        peak_velocity: rd.velocity_axis[d],
    };
    let notes = vec![
        format!("input={}", input.display()),
        format!("range_resolution_m={}", summary.range_resolution),
        format!("velocity_resolution_mps={}", rd.velocity_resolution),
        format!(
            "peak range_m={} doppler_hz={} velocity_mps={}",
            summary.peak_range, summary.peak_doppler, summary.peak_velocity
        ),
    ];
    write_manifest(&out.join("manifest.txt"), "range-doppler", &notes, cfg)?;
    Ok(summary)
}
