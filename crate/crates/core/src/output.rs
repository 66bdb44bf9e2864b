//! CSV output. Floats use the shortest representation that parses back to
//! the same value; lines end in `\n`.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::lyapunov::{LambdaAtTime, LambdaSweep};
use crate::solver::{FrontState, Trajectory};
use crate::thresholds::{Probe, ShiftedLambda};
use crate::verify::ConvergenceStudy;

pub const BOUNDARIES_HEADER: [&str; 7] = ["t", "g", "h", "gdot", "hdot", "supU", "supV"];
pub const SNAPSHOT_HEADER: [&str; 4] = ["x", "y", "U", "V"];

fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Writes a header and rows to `path`, creating parent directories.
pub fn write_table<S: AsRef<str>>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<S>>) -> Result<()> {
    let io = |e: std::io::Error| Error::io(path, e);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|s| s.as_ref())).map_err(csv_err)?;
    }
    w.flush().map_err(io)
}

/// File name of the snapshot taken at `t`.
pub fn snapshot_name(t: f64) -> String {
    format!("snapshot_{t}.csv")
}

/// `boundaries.csv` (one row per accepted step plus the initial state) and
/// one `snapshot_<t>.csv` per snapshot. Returns the paths written.
pub fn write_trajectory_csv(traj: &Trajectory, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let path = dir.join("boundaries.csv");
    write_table(
        &path,
        &BOUNDARIES_HEADER,
        traj.summaries.iter().map(|s| {
            [s.t, s.g, s.h, s.gdot, s.hdot, s.sup_u, s.sup_v]
                .into_iter()
                .map(num)
                .collect()
        }),
    )?;
    written.push(path);
    for snap in &traj.snapshots {
        let path = dir.join(snapshot_name(snap.t));
        write_snapshot(snap, &path)?;
        written.push(path);
    }
    if !traj.probe_series.is_empty() {
        let path = dir.join("probes.csv");
        let mut header = vec!["t".to_string()];
        for x in &traj.probes {
            header.push(format!("U({x})"));
            header.push(format!("V({x})"));
        }
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_table(
            &path,
            &header,
            traj.probe_series.iter().map(|p| {
                std::iter::once(num(p.t))
                    .chain(p.values.iter().flat_map(|&(u, v)| [num(u), num(v)]))
                    .collect()
            }),
        )?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_snapshot(state: &FrontState, path: &Path) -> Result<()> {
    let xs = state.x_grid();
    write_table(
        path,
        &SNAPSHOT_HEADER,
        (0..=state.cells()).map(|j| vec![num(xs[j]), num(state.y(j)), num(state.m[j]), num(state.n[j])]),
    )
}

pub fn write_sweep_csv(sweep: &LambdaSweep, path: &Path) -> Result<()> {
    if sweep.points.is_empty() {
        return Err(Error::EmptyData("lambda sweep"));
    }
    write_table(
        path,
        &["L", "lambda", "ci_low", "ci_high", "converged", "renorm_count"],
        sweep.points.iter().map(|p| {
            let e = &p.estimate;
            vec![
                num(p.half_width),
                num(e.lambda),
                num(e.tail_slope_ci.0),
                num(e.tail_slope_ci.1),
                e.converged.to_string(),
                e.renorm_count.to_string(),
            ]
        }),
    )
}

pub fn write_lambda_series_csv(series: &[LambdaAtTime], path: &Path) -> Result<()> {
    write_table(
        path,
        &["t", "half_width", "center", "lambda", "ci_low", "ci_high", "converged"],
        series.iter().map(|s| {
            vec![
                num(s.t),
                num(s.half_width),
                num(s.center),
                num(s.estimate.lambda),
                num(s.estimate.tail_slope_ci.0),
                num(s.estimate.tail_slope_ci.1),
                s.estimate.converged.to_string(),
            ]
        }),
    )
}

/// Transcript of a simulation-driven threshold search.
pub fn write_probe_transcript(probes: &[Probe], parameter: &str, path: &Path) -> Result<()> {
    write_table(
        path,
        &[parameter, "verdict", "t_end", "final_width", "final_norm"],
        probes.iter().map(|p| {
            vec![
                num(p.value),
                p.verdict.name().to_string(),
                num(p.t_end),
                num(p.final_width),
                num(p.final_norm),
            ]
        }),
    )
}

/// Transcript of the `L*` bisection.
pub fn write_lstar_transcript(points: &[ShiftedLambda], path: &Path) -> Result<()> {
    write_table(
        path,
        &["L", "worst_shift", "lambda", "ci_low", "ci_high", "converged"],
        points.iter().map(|p| {
            vec![
                num(p.half_width),
                num(p.worst_shift),
                num(p.estimate.lambda),
                num(p.estimate.tail_slope_ci.0),
                num(p.estimate.tail_slope_ci.1),
                p.estimate.converged.to_string(),
            ]
        }),
    )
}

pub fn write_convergence_csv(study: &ConvergenceStudy, path: &Path) -> Result<()> {
    write_table(
        path,
        &["J", "dt", "error", "order"],
        study.rows.iter().map(|r| {
            vec![
                r.cells.to_string(),
                num(r.dt),
                num(r.error),
                r.order.map(num).unwrap_or_default(),
            ]
        }),
    )
}

/// Reads a numeric CSV with a header row back into rows of floats.
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 2,
                    message: format!("`{s}` is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}
