//! Text and image writers: dB CSV tables, 16-bit PGM and decomposition
//! diagnostics.

use std::io::Write;

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::nsp::DecompositionOutput;

/// Value written for zero magnitudes.
pub const DB_FLOOR: f64 = -400.0;

/// `20·log10|z|`, clamped below at [`DB_FLOOR`].
pub fn magnitude_db(z: num_complex::Complex64) -> f64 {
    let m = z.norm();
    if m > 0.0 {
        (20.0 * m.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// CSV of dB magnitudes. The first row holds `corner` then the column axis;
/// each following row starts with its row-axis value.
pub fn write_db_csv<W: Write>(
    mut w: W,
    values: &ComplexMatrix,
    row_axis: &[f64],
    col_axis: &[f64],
    corner: &str,
) -> Result<()> {
    if row_axis.len() != values.rows() || col_axis.len() != values.cols() {
        return Err(Error::param(format!(
            "axes {}x{} do not match a {}x{} matrix",
            row_axis.len(),
            col_axis.len(),
            values.rows(),
            values.cols()
        )));
    }
    let mut line = String::from(corner);
    for c in col_axis {
        line.push_str(&format!(",{c}"));
    }
    writeln!(w, "{line}")?;
    for (r, y) in row_axis.iter().enumerate() {
        line.clear();
        line.push_str(&y.to_string());
        for z in values.row(r) {
            line.push_str(&format!(",{:.3}", magnitude_db(*z)));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Default dB window for images: the peak and 60 dB below it. An all-zero
/// matrix gets a window starting at [`DB_FLOOR`] so it renders black.
pub fn default_db_window(values: &ComplexMatrix) -> (f64, f64) {
    let peak = values.as_slice().iter().map(|z| magnitude_db(*z)).fold(DB_FLOOR, f64::max);
    if peak <= DB_FLOOR {
        (DB_FLOOR, DB_FLOOR + 60.0)
    } else {
        (peak - 60.0, peak)
    }
}

/// Binary 16-bit PGM. Matrix rows map to image rows with the last row at the
/// top, so ascending frequency bins read bottom to top. dB values map
/// linearly from `floor_db` (0) to `ceiling_db` (65535).
pub fn write_pgm<W: Write>(mut w: W, values: &ComplexMatrix, floor_db: f64, ceiling_db: f64) -> Result<()> {
    if !(ceiling_db > floor_db) {
        return Err(Error::param(format!("dB ceiling {ceiling_db} must exceed floor {floor_db}")));
    }
    let (rows, cols) = values.shape();
    write!(
        w,
        "P5\n# floor_db={floor_db} ceiling_db={ceiling_db} top_row=last\n{cols} {rows}\n65535\n"
    )?;
    let mut buf = Vec::with_capacity(rows * cols * 2);
    for r in (0..rows).rev() {
        for z in values.row(r) {
            let x = ((magnitude_db(*z) - floor_db) / (ceiling_db - floor_db)).clamp(0.0, 1.0);
            buf.extend_from_slice(&((x * 65535.0).round() as u16).to_be_bytes());
        }
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// Plain-text per-pass diagnostics of a decomposition.
pub fn write_diagnostics<W: Write>(mut w: W, out: &DecompositionOutput) -> Result<()> {
    writeln!(w, "variant={}", out.variant)?;
    writeln!(w, "passes={}", out.passes.len())?;
    writeln!(w, "converged={}", out.converged())?;
    for (i, p) in out.passes.iter().enumerate() {
        for (part, d) in [("real", &p.real), ("imag", &p.imag)] {
            writeln!(
                w,
                "pass={} part={part} iterations={} converged={} gamma={:e} lambda1={:e} scale={:e}",
                i + 1,
                d.iterations,
                d.converged,
                d.gamma,
                d.lambda1,
                d.scale
            )?;
        }
        writeln!(w, "pass={} reconstruction_error={:e}", i + 1, p.reconstruction_error)?;
    }
    w.flush()?;
    Ok(())
}
