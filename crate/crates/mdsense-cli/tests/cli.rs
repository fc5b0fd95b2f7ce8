use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mdsense::{Complex64, ComplexMatrix};

const SMALL: &[&str] = &["--set", "frame.subcarriers=64", "--set", "frame.symbols=512"];

fn mdsense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdsense")).args(args).output().expect("spawn mdsense")
}

fn ok(args: &[&str]) -> String {
    let out = mdsense(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> (i32, String) {
    let out = mdsense(args);
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate_small(dir: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.join("sim");
    let mut args = vec!["simulate", "-o", s(&out)];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    ok(&args);
    out
}

fn load(p: PathBuf) -> ComplexMatrix {
    ComplexMatrix::load_cxm(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn default_simulation_has_table_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    ok(&["simulate", "-o", s(&out)]);
    assert_eq!(load(out.join("csi.cxm")).shape(), (3276, 1840));
    for f in ["s_uav", "s_mix", "truth_rotor", "truth_vibration", "truth_translation"] {
        assert_eq!(load(out.join(format!("{f}.cxm"))).shape(), (1, 1840), "{f}");
    }
    assert!(std::fs::read_to_string(out.join("manifest.txt")).unwrap().contains("seed=1"));
}

#[test]
fn no_blades_means_zero_rotor_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate_small(dir.path(), &["--set", "scene.blades=0"]);
    assert!(load(out.join("truth_rotor.cxm")).as_slice().iter().all(|z| z.norm() == 0.0));
}

#[test]
fn runs_are_byte_identical_and_manifest_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate_small(dir.path(), &["--set", "run.seed=9", "--set", "run.snr_db=10"]);
    let b = dir.path().join("again");
    let mut args = vec!["simulate", "-o", s(&b), "--set", "run.seed=9", "--set", "run.snr_db=10"];
    args.extend_from_slice(SMALL);
    ok(&args);
    let c = dir.path().join("from_manifest");
    let manifest = a.join("manifest.txt");
    ok(&["simulate", "-o", s(&c), "-c", s(&manifest)]);
    for f in ["csi.cxm", "s_mix.cxm", "truth_rotor.cxm", "manifest.txt"] {
        let first = std::fs::read(a.join(f)).unwrap();
        assert_eq!(first, std::fs::read(b.join(f)).unwrap(), "{f}");
        if f != "manifest.txt" {
            assert_eq!(first, std::fs::read(c.join(f)).unwrap(), "{f} via manifest");
        }
    }
}

#[test]
fn dumped_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let dumped = ok(&["config", "--set", "solver.lambda2=2.5e3", "--set", "scene.rotation_rate=40"]);
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, &dumped).unwrap();
    assert_eq!(ok(&["config", "-c", s(&path)]), dumped);
}

#[test]
fn decomposition_reconstructs_its_input() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate_small(dir.path(), &[]);
    let input = sim.join("s_mix.cxm");
    let rmd = dir.path().join("rmd");
    ok(&["decompose", "-i", s(&input), "-o", s(&rmd), "--passes", "2"]);
    let s_mix = load(input.clone());
    let mut sum = load(rmd.join("residual.cxm")).into_vec();
    for k in 1..=2 {
        for (acc, v) in sum.iter_mut().zip(load(rmd.join(format!("component_{k}.cxm"))).as_slice()) {
            *acc += v;
        }
    }
    let err: f64 = sum.iter().zip(s_mix.as_slice()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let norm: f64 = s_mix.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let diag = std::fs::read_to_string(rmd.join("diagnostics.txt")).unwrap();
    let reported: f64 = diag
        .lines()
        .filter_map(|l| l.split("reconstruction_error=").nth(1))
        .map(|v| v.parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(err / norm <= reported.max(1e-12), "{} vs {reported}", err / norm);
    assert_eq!(load(rmd.join("components.cxm")).shape(), (2, 512));

    let nsp = dir.path().join("nsp");
    ok(&["decompose", "-i", s(&input), "-o", s(&nsp), "--variant", "nsp"]);
    let other = std::fs::read_to_string(nsp.join("diagnostics.txt")).unwrap();
    assert!(other.starts_with("variant=nsp"));
    assert_ne!(diag.lines().nth(3), other.lines().nth(3));
}

#[test]
fn one_pass_on_a_tone_gives_one_file() {
    let dir = tempfile::tempdir().unwrap();
    let tone = dir.path().join("tone.cxm");
    let v: Vec<Complex64> = (0..400).map(|m| Complex64::from_polar(1.0, 0.3 * m as f64)).collect();
    ComplexMatrix::row_vector(&v).save_cxm(&tone).unwrap();
    let out = dir.path().join("dec");
    ok(&["decompose", "-i", s(&tone), "-o", s(&out), "--passes", "1"]);
    let files: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("component_"))
        .collect();
    assert_eq!(files, vec!["component_1.cxm".to_string()]);
}

#[test]
fn malformed_input_reports_offset() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cxm");
    let mut bytes = Vec::new();
    ComplexMatrix::row_vector(&[Complex64::new(1.0, 2.0); 8]).write_cxm(&mut bytes).unwrap();
    bytes[1] = b'Y';
    std::fs::write(&bad, &bytes).unwrap();
    let (c, err) = code(&["decompose", "-i", s(&bad), "-o", s(&dir.path().join("o"))]);
    assert_eq!(c, 4);
    assert!(err.contains("offset 1"), "{err}");

    bytes[1] = b'X';
    bytes.truncate(bytes.len() - 5);
    std::fs::write(&bad, &bytes).unwrap();
    let (c, err) = code(&["spectrogram", "-i", s(&bad), "-o", s(&dir.path().join("o"))]);
    assert_eq!(c, 4);
    assert!(err.contains("offset 136"), "{err}");
}

#[test]
fn spectrogram_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate_small(dir.path(), &[]);
    let input = sim.join("truth_rotor.cxm");
    let out = dir.path().join("spec");
    ok(&["spectrogram", "-i", s(&input), "-o", s(&out), "--mode", "stft"]);
    ok(&["spectrogram", "-i", s(&input), "-o", s(&out), "--mode", "set"]);
    let stft = load(out.join("stft.cxm"));
    let set = load(out.join("set.cxm"));
    let peak = stft.as_slice().iter().fold(0.0f64, |a, z| a.max(z.norm()));
    for (a, b) in set.as_slice().iter().zip(stft.as_slice()) {
        assert!(a.norm() == 0.0 || (a == b && b.norm() > 0.02 * peak));
    }

    let csv = std::fs::read_to_string(out.join("stft.csv")).unwrap();
    let freqs: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    let fs = 1.0 / 36.6e-6;
    let df = freqs[1] - freqs[0];
    assert!((freqs[0] + fs / 2.0).abs() < 1e-6);
    assert!((freqs.last().unwrap() + df - fs / 2.0).abs() < 1e-6);

    let pgm = std::fs::read(out.join("stft.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n# floor_db="));
}

#[test]
fn zero_signal_gives_a_floor_image() {
    let dir = tempfile::tempdir().unwrap();
    let zero = dir.path().join("zero.cxm");
    ComplexMatrix::row_vector(&[Complex64::new(0.0, 0.0); 600]).save_cxm(&zero).unwrap();
    let out = dir.path().join("spec");
    ok(&["spectrogram", "-i", s(&zero), "-o", s(&out)]);
    let pgm = std::fs::read(out.join("stft.pgm")).unwrap();
    let header_end = pgm.windows(7).position(|w| w == b"\n65535\n").unwrap() + 7;
    assert!(pgm[header_end..].iter().all(|&b| b == 0));
}

#[test]
fn bench_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let small = ["--set", "sweep.symbols=128", "--set", "sweep.subcarriers=64"];
    let mut args = vec!["bench", "-o", s(&csv), "--trials", "1", "--snr-min", "-10", "--snr-max", "30", "--snr-step", "1"];
    args.extend_from_slice(&small);
    ok(&args);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "variant,snr_db,mean_rmse,std_rmse,convergence_rate");
    assert_eq!(lines.len(), 1 + 41 * 3);
    assert!(lines[1].starts_with("rmd-nsp,-10,"));
}

#[test]
fn interrupted_bench_leaves_whole_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let mut child = Command::new(env!("CARGO_BIN_EXE_mdsense"))
        .args(["bench", "-o", s(&csv), "--trials", "4", "--snr-step", "1"])
        .spawn()
        .unwrap();
    std::thread::sleep(std::time::Duration::from_millis(1500));
    child.kill().ok();
    child.wait().unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.ends_with('\n'));
    for line in text.lines().skip(1) {
        assert_eq!(line.split(',').count(), 5, "{line}");
    }
}

#[test]
fn worker_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let args = ["bench", "-o", s(&csv), "--trials", "1", "--snr-min", "0", "--snr-max", "0"];
    let run = |w: &str| {
        Command::new(env!("CARGO_BIN_EXE_mdsense"))
            .args(args)
            .args(["--set", "sweep.symbols=128"])
            .env("MDSENSE_WORKERS", w)
            .output()
            .unwrap()
    };
    assert_eq!(run("many").status.code(), Some(2));
    assert!(run("2").status.success());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(code(&["simulate", "-o", s(&out), "--set", "scene.wingspan=2"]).0, 2);
    assert_eq!(code(&["simulate", "-o", s(&out), "--set", "frame.sampling=sparse"]).0, 2);
    assert_eq!(code(&["decompose", "-i", s(&dir.path().join("missing.cxm")), "-o", s(&out)]).0, 3);

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let mut args = vec!["simulate", "-o", s(&blocker)];
    args.extend_from_slice(SMALL);
    assert_eq!(code(&args).0, 3);

    // nothing to detect in an empty, noiseless scene
    let mut args = vec![
        "simulate", "-o", s(&out),
        "--set", "scene.translation=false", "--set", "scene.vibration=false",
        "--set", "scene.rotation=false", "--set", "run.snr_db=none",
    ];
    args.extend_from_slice(SMALL);
    assert_eq!(code(&args).0, 5);
}

#[test]
fn range_doppler_finds_the_body() {
    let dir = tempfile::tempdir().unwrap();
    let only_body = ["--set", "scene.vibration=false", "--set", "scene.rotation=false", "--set", "frame.symbols=1840"];
    let sim = dir.path().join("sim");
    let mut args = vec!["simulate", "-o", s(&sim), "--set", "frame.subcarriers=64"];
    args.extend_from_slice(&only_body);
    ok(&args);
    let out = dir.path().join("rd");
    let csi = sim.join("csi.cxm");
    let mut args = vec!["range-doppler", "-i", s(&csi), "-o", s(&out), "--set", "frame.subcarriers=64"];
    args.extend_from_slice(&only_body);
    let stdout = ok(&args);
    assert!(stdout.contains("range resolution 1.5 m"), "{stdout}");
    let hz: f64 = stdout.split(" m, ").nth(1).unwrap().split(" Hz").next().unwrap().parse().unwrap();
    assert!((hz - 116.67).abs() < 15.0, "{hz}");

    args.extend_from_slice(&["--set", "frame.sampling=tdd-gapped"]);
    assert_eq!(code(&args).0, 2);
}
