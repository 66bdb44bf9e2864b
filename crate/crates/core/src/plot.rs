//! Self-contained SVG charts: front positions, sup-norms, lambda sweeps and
//! a space-time heatmap of the bird density.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::lyapunov::LambdaSweep;
use crate::solver::{RasterRow, Trajectory, RASTER_MAX_CELLS};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
/// Polylines are thinned to at most this many vertices.
const MAX_VERTICES: usize = 2000;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub log_y: bool,
    /// Optional vertical error bars, one per point of the first series.
    pub error_bars: Vec<(f64, f64, f64)>,
    /// Draws `y = 0` when it is in range.
    pub zero_line: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return None;
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        Some((lo - pad, hi + pad))
    } else {
        Some((lo, hi))
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn open_svg(s: &mut String, title: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(s: &mut String, f: &Frame, x_label: &str, y_label: &str, log_y: bool) {
    let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        s,
        r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        r - l,
        b - t
    );
    for x in ticks(f.x0, f.x1, 8) {
        let px = f.px(x);
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{}" stroke="black"/>"#, b + 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            b + 18.0,
            label(x)
        );
    }
    for y in ticks(f.y0, f.y1, 6) {
        let py = f.py(y);
        let text = if log_y { label(10f64.powf(y)) } else { label(y) };
        let _ = writeln!(s, r#"<line x1="{}" y1="{py:.2}" x2="{l}" y2="{py:.2}" stroke="black"/>"#, l - 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{text}</text>"#,
            l - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (l + r) / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        (t + b) / 2.0,
        escape(y_label)
    );
}

impl LineChart {
    pub fn render(&self) -> Result<String> {
        let tf = |y: f64| if self.log_y { y.log10() } else { y };
        let keep = |y: f64| !self.log_y || y > 0.0;
        let all = || {
            self.series
                .iter()
                .flat_map(|s| s.points.iter())
                .filter(|p| keep(p.1))
        };
        let (x0, x1) = range(all().map(|p| p.0)).ok_or(Error::EmptyData("chart"))?;
        let extra = self
            .error_bars
            .iter()
            .flat_map(|e| [e.1, e.2])
            .filter(|&v| keep(v));
        let (y0, y1) = range(all().map(|p| tf(p.1)).chain(extra.map(tf))).ok_or(Error::EmptyData("chart"))?;
        let f = Frame { x0, x1, y0, y1 };
        let mut s = String::new();
        open_svg(&mut s, &self.title);
        axes(&mut s, &f, &self.x_label, &self.y_label, self.log_y);
        if self.zero_line && !self.log_y && y0 < 0.0 && y1 > 0.0 {
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
                f.py(0.0),
                WIDTH - RIGHT
            );
        }
        for (i, series) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<&(f64, f64)> = series.points.iter().filter(|p| keep(p.1) && p.1.is_finite()).collect();
            let stride = pts.len().div_ceil(MAX_VERTICES).max(1);
            let mut path = String::new();
            for (k, p) in pts.iter().enumerate() {
                if k % stride == 0 || k + 1 == pts.len() {
                    let _ = write!(path, "{:.2},{:.2} ", f.px(p.0), f.py(tf(p.1)));
                }
            }
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.trim_end()
            );
            if pts.len() <= 50 {
                for p in &pts {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                        f.px(p.0),
                        f.py(tf(p.1))
                    );
                }
            }
            let ly = TOP + 16.0 + 16.0 * i as f64;
            let lx = WIDTH - RIGHT - 150.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
                lx + 20.0
            );
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&series.name));
        }
        for &(x, lo, hi) in &self.error_bars {
            if keep(lo) && keep(hi) {
                let _ = writeln!(
                    s,
                    r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="black"/>"#,
                    f.px(x),
                    f.py(tf(lo)),
                    f.py(tf(hi))
                );
            }
        }
        s.push_str("</svg>\n");
        Ok(s)
    }
}

pub fn fronts_svg(traj: &Trajectory) -> Result<String> {
    LineChart {
        title: "Front positions".into(),
        x_label: "t".into(),
        y_label: "x".into(),
        series: vec![
            Series {
                name: "h(t)".into(),
                points: traj.summaries.iter().map(|s| (s.t, s.h)).collect(),
            },
            Series {
                name: "g(t)".into(),
                points: traj.summaries.iter().map(|s| (s.t, s.g)).collect(),
            },
        ],
        log_y: false,
        error_bars: Vec::new(),
        zero_line: true,
    }
    .render()
}

pub fn norms_svg(traj: &Trajectory, log_y: bool) -> Result<String> {
    LineChart {
        title: "Sup norms".into(),
        x_label: "t".into(),
        y_label: if log_y { "sup (log10)".into() } else { "sup".into() },
        series: vec![
            Series {
                name: "sup U".into(),
                points: traj.summaries.iter().map(|s| (s.t, s.sup_u)).collect(),
            },
            Series {
                name: "sup V".into(),
                points: traj.summaries.iter().map(|s| (s.t, s.sup_v)).collect(),
            },
        ],
        log_y,
        error_bars: Vec::new(),
        zero_line: false,
    }
    .render()
}

pub fn sweep_svg(sweep: &LambdaSweep) -> Result<String> {
    if sweep.points.is_empty() {
        return Err(Error::EmptyData("lambda sweep"));
    }
    LineChart {
        title: "Principal Lyapunov exponent".into(),
        x_label: "L".into(),
        y_label: "lambda".into(),
        series: vec![Series {
            name: "lambda(L)".into(),
            points: sweep.points.iter().map(|p| (p.half_width, p.estimate.lambda)).collect(),
        }],
        log_y: false,
        error_bars: sweep
            .points
            .iter()
            .map(|p| (p.half_width, p.estimate.tail_slope_ci.0, p.estimate.tail_slope_ci.1))
            .collect(),
        zero_line: true,
    }
    .render()
}

/// Heatmap rows after averaging groups of raster rows down to at most
/// [`RASTER_MAX_CELLS`] rows. Columns are already capped by the solver.
pub fn heatmap_rows(raster: &[RasterRow]) -> Vec<RasterRow> {
    let n = raster.len();
    let rows = n.min(RASTER_MAX_CELLS);
    (0..rows)
        .map(|r| {
            let (lo, hi) = (r * n / rows, ((r + 1) * n / rows).max(r * n / rows + 1));
            let group = &raster[lo..hi];
            let k = group.len() as f64;
            let bins = group.iter().map(|g| g.u.len()).min().unwrap_or(0);
            RasterRow {
                t: group.iter().map(|g| g.t).sum::<f64>() / k,
                g: group.iter().map(|g| g.g).sum::<f64>() / k,
                h: group.iter().map(|g| g.h).sum::<f64>() / k,
                u: (0..bins)
                    .map(|b| group.iter().map(|g| g.u[b * g.u.len() / bins]).sum::<f64>() / k)
                    .collect(),
            }
        })
        .collect()
}

/// White through orange and red to dark red.
fn color(q: f64) -> (u8, u8, u8) {
    const STOPS: [(f64, f64, f64); 4] = [
        (255.0, 255.0, 255.0),
        (253.0, 174.0, 97.0),
        (215.0, 48.0, 39.0),
        (90.0, 0.0, 30.0),
    ];
    let s = q.clamp(0.0, 1.0) * 3.0;
    let i = (s.floor() as usize).min(2);
    let w = s - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * w).round() as u8;
    (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

pub fn heatmap_svg(traj: &Trajectory) -> Result<String> {
    let rows = heatmap_rows(&traj.raster);
    if rows.is_empty() {
        return Err(Error::EmptyData("heatmap raster"));
    }
    let (x0, x1) = range(rows.iter().flat_map(|r| [r.g, r.h])).ok_or(Error::EmptyData("heatmap raster"))?;
    let t_last = traj.last().t.max(rows.last().unwrap().t);
    let f = Frame {
        x0,
        x1,
        y0: 0.0,
        y1: t_last.max(f64::MIN_POSITIVE),
    };
    let peak = rows.iter().flat_map(|r| r.u.iter()).copied().fold(0.0, f64::max);
    let mut s = String::new();
    open_svg(&mut s, "U(x, t)");
    let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
    for (r, row) in rows.iter().enumerate() {
        let t_hi = rows.get(r + 1).map_or(t_last, |n| n.t);
        let (py_top, py_bot) = (f.py(t_hi), f.py(row.t));
        let bins = row.u.len();
        for (b, &u) in row.u.iter().enumerate() {
            let q = if peak > 0.0 { u / peak } else { 0.0 };
            let (cr, cg, cb) = color(q);
            if (cr, cg, cb) == (255, 255, 255) {
                continue;
            }
            let xa = row.g + (row.h - row.g) * b as f64 / bins as f64;
            let xb = row.g + (row.h - row.g) * (b + 1) as f64 / bins as f64;
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#{cr:02x}{cg:02x}{cb:02x}"/>"##,
                f.px(xa),
                py_top,
                (f.px(xb) - f.px(xa)).max(0.01),
                (py_bot - py_top).max(0.01)
            );
        }
    }
    s.push_str("</g>\n");
    axes(&mut s, &f, "x", "t", false);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">max U = {}</text>"#,
        WIDTH - RIGHT,
        TOP - 6.0,
        label(peak)
    );
    s.push_str("</svg>\n");
    Ok(s)
}

fn write(path: &Path, svg: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

/// `fronts.svg`, `norms.svg` and, when the raster was recorded, `heatmap.svg`.
pub fn write_plots(traj: &Trajectory, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = vec![
        (dir.join("fronts.svg"), fronts_svg(traj)?),
        (dir.join("norms.svg"), norms_svg(traj, true)?),
    ];
    if !traj.raster.is_empty() {
        out.push((dir.join("heatmap.svg"), heatmap_svg(traj)?));
    }
    for (path, svg) in &out {
        write(path, svg)?;
    }
    Ok(out.into_iter().map(|p| p.0).collect())
}

pub fn write_sweep_plot(sweep: &LambdaSweep, path: &Path) -> Result<()> {
    let svg = sweep_svg(sweep)?;
    write(path, &svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{default_paper_spec, InitialData};
    use crate::solver::{simulate, SolverConfig};

    fn well_formed(svg: &str) -> bool {
        let mut reader = quick_xml::Reader::from_str(svg);
        let mut depth = 0i64;
        loop {
            match reader.read_event() {
                Ok(quick_xml::events::Event::Start(_)) => depth += 1,
                Ok(quick_xml::events::Event::End(_)) => depth -= 1,
                Ok(quick_xml::events::Event::Eof) => return depth == 0,
                Err(_) => return false,
                _ => {}
            }
        }
    }

    fn run(h0: f64, t_end: f64) -> Trajectory {
        let cfg = SolverConfig {
            cells: 64,
            t_end,
            raster_rows: 400,
            ..SolverConfig::default()
        };
        simulate(&default_paper_spec().with_h0(h0), &InitialData::default(), &cfg).unwrap()
    }

    #[test]
    fn charts_are_well_formed() {
        let traj = run(1.0, 5.0);
        for svg in [
            fronts_svg(&traj).unwrap(),
            norms_svg(&traj, true).unwrap(),
            norms_svg(&traj, false).unwrap(),
            heatmap_svg(&traj).unwrap(),
        ] {
            assert!(well_formed(&svg));
        }
        assert!(!well_formed("<svg><g></svg>"));
    }

    #[test]
    fn heatmap_is_capped() {
        let traj = run(1.0, 40.0);
        assert!(traj.raster.len() > RASTER_MAX_CELLS);
        let rows = heatmap_rows(&traj.raster);
        assert_eq!(rows.len(), RASTER_MAX_CELLS);
        assert!(rows.iter().all(|r| r.u.len() <= RASTER_MAX_CELLS));
    }

    #[test]
    fn vanishing_heatmap_fades() {
        let traj = run(0.5, 60.0);
        let rows = heatmap_rows(&traj.raster);
        let peak = |r: &RasterRow| r.u.iter().copied().fold(0.0, f64::max);
        let early = peak(&rows[0]);
        let late = peak(rows.last().unwrap());
        assert!(late < 1e-3 * early, "{late} vs {early}");
    }

    #[test]
    fn empty_sweep_is_an_error_and_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.svg");
        let sweep = LambdaSweep {
            points: Vec::new(),
            monotonicity_violations: Vec::new(),
        };
        assert!(write_sweep_plot(&sweep, &path).is_err());
        assert!(!path.exists());
    }

    #[test]
    fn tick_positions_are_round() {
        assert_eq!(ticks(0.0, 10.0, 5), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(label(0.5), "0.5");
        assert_eq!(label(2.0), "2");
    }
}
