//! SVG figures and the CSV series behind them.
//!
//! For each solved cell four figures are drawn: the xy-plane trajectories
//! with start and terminal markers, altitude per slot, sum rate per slot and
//! the per-iteration precision on a log axis. Every figure has a CSV twin
//! holding the exact plotted numbers.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{CliError, CliResult};
use crate::report::{Cell, RunReport, SchemeRun};

const SIZE: (u32, u32) = (800, 600);
/// Floor for log-scale precision values.
const LOG_FLOOR: f64 = 1e-16;

fn plot_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Plot(e.to_string())
}

/// Writes through a temporary sibling and renames, so a failed write never
/// leaves a truncated file behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let tmp = path.with_extension("partial");
    if let Err(e) = std::fs::write(&tmp, bytes) {
        let _ = std::fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(plot_err)?;
    for r in rows {
        w.write_record(&r).map_err(plot_err)?;
    }
    w.into_inner().map_err(plot_err)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let pad = 0.05 * (hi - lo).max(1.0);
    (lo - pad, hi + pad)
}

fn validate(run: &SchemeRun) -> CliResult<()> {
    if run.positions.is_empty() || run.positions.iter().any(Vec::is_empty) {
        return Err(CliError::Invalid("empty trajectory".into()));
    }
    if run.slot_rates.is_empty() {
        return Err(CliError::Invalid("empty rate series".into()));
    }
    Ok(())
}

fn xy_svg(run: &SchemeRun, title: &str) -> CliResult<String> {
    let mut svg = String::new();
    {
        let pts = run.positions.iter().flatten().chain(&run.ground_terminals);
        let (x0, x1) = bounds(pts.clone().map(|p| p[0]));
        let (y0, y1) = bounds(pts.map(|p| p[1]));
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("x (m)")
            .y_desc("y (m)")
            .draw()
            .map_err(plot_err)?;
        for (k, path) in run.positions.iter().enumerate() {
            let color = Palette99::pick(k).to_rgba();
            chart
                .draw_series(LineSeries::new(
                    path.iter().map(|p| (p[0], p[1])),
                    color.stroke_width(2),
                ))
                .map_err(plot_err)?
                .label(format!("UAV {}", k + 1))
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
            chart
                .draw_series(std::iter::once(Circle::new(
                    (path[0][0], path[0][1]),
                    4,
                    color.filled(),
                )))
                .map_err(plot_err)?;
        }
        chart
            .draw_series(
                run.ground_terminals
                    .iter()
                    .enumerate()
                    .map(|(k, g)| TriangleMarker::new((g[0], g[1]), 7, Palette99::pick(k).to_rgba().filled())),
            )
            .map_err(plot_err)?;
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}

/// Line plot of one or more series against the slot or iteration index.
fn series_svg(
    title: &str,
    x_desc: &str,
    y_desc: &str,
    series: &[(String, Vec<f64>)],
    log_y: bool,
) -> CliResult<String> {
    let mut svg = String::new();
    {
        let n = series.iter().map(|(_, s)| s.len()).max().unwrap_or(0).max(2);
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut builder = ChartBuilder::on(&root);
        builder
            .caption(title, ("sans-serif", 20))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(70);
        let x_range = 1.0..n as f64;
        let values = series.iter().flat_map(|(_, s)| s.iter().copied());
        macro_rules! draw {
            ($chart:expr, $map:expr) => {{
                let mut chart = $chart;
                chart
                    .configure_mesh()
                    .x_desc(x_desc)
                    .y_desc(y_desc)
                    .draw()
                    .map_err(plot_err)?;
                for (k, (label, s)) in series.iter().enumerate() {
                    let color = Palette99::pick(k).to_rgba();
                    chart
                        .draw_series(LineSeries::new(
                            s.iter().enumerate().map(|(i, v)| ((i + 1) as f64, $map(*v))),
                            color.stroke_width(2),
                        ))
                        .map_err(plot_err)?
                        .label(label.clone())
                        .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
                }
                chart
                    .configure_series_labels()
                    .background_style(WHITE.mix(0.8))
                    .border_style(BLACK)
                    .draw()
                    .map_err(plot_err)?;
            }};
        }
        if log_y {
            let (lo, hi) = values.fold((f64::INFINITY, 0.0f64), |(a, b), v| {
                let v = v.max(LOG_FLOOR);
                (a.min(v), b.max(v))
            });
            let (lo, hi) = if lo.is_finite() {
                (lo / 2.0, hi * 2.0)
            } else {
                (LOG_FLOOR, 1.0)
            };
            let chart = builder
                .build_cartesian_2d(x_range, (lo..hi).log_scale())
                .map_err(plot_err)?;
            draw!(chart, |v: f64| v.max(LOG_FLOOR));
        } else {
            let (lo, hi) = bounds(values);
            let chart = builder.build_cartesian_2d(x_range, lo..hi).map_err(plot_err)?;
            draw!(chart, |v: f64| v);
        }
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}

/// Renders one run into `(file name, contents)` pairs without touching disk.
fn render(run: &SchemeRun, prefix: &str) -> CliResult<Vec<(String, Vec<u8>)>> {
    validate(run)?;
    let k = run.positions.len();
    let mut files = Vec::new();

    let traj = csv_bytes(
        &["uav", "slot", "x_m", "y_m", "z_m", "power_w"],
        (0..k).flat_map(|u| {
            run.positions[u].iter().enumerate().map(move |(n, p)| {
                vec![
                    u.to_string(),
                    (n + 1).to_string(),
                    p[0].to_string(),
                    p[1].to_string(),
                    p[2].to_string(),
                    run.powers[u][n].to_string(),
                ]
            })
        }),
    )?;
    files.push((format!("{prefix}_trajectory.csv"), traj));
    files.push((
        format!("{prefix}_xy.svg"),
        xy_svg(run, "Trajectories (x-y plane)")?.into_bytes(),
    ));

    let altitudes: Vec<(String, Vec<f64>)> = (0..k)
        .map(|u| {
            (
                format!("UAV {}", u + 1),
                run.positions[u].iter().map(|p| p[2]).collect(),
            )
        })
        .collect();
    files.push((
        format!("{prefix}_altitude.svg"),
        series_svg("Altitude", "slot", "altitude (m)", &altitudes, false)?.into_bytes(),
    ));

    let rate = csv_bytes(
        &["slot", "sum_rate_bps"],
        run.slot_rates
            .iter()
            .enumerate()
            .map(|(n, r)| vec![(n + 1).to_string(), r.to_string()]),
    )?;
    files.push((format!("{prefix}_rate.csv"), rate));
    files.push((
        format!("{prefix}_rate.svg"),
        series_svg(
            "Sum rate per slot",
            "slot",
            "sum rate (bit/s)",
            &[("sum rate".to_string(), run.slot_rates.clone())],
            false,
        )?
        .into_bytes(),
    ));

    let conv = csv_bytes(
        &["iteration", "objective_nats", "precision"],
        run.objectives.iter().enumerate().map(|(i, o)| {
            let p = if i == 0 {
                String::new()
            } else {
                run.precision[i - 1].to_string()
            };
            vec![i.to_string(), o.to_string(), p]
        }),
    )?;
    files.push((format!("{prefix}_convergence.csv"), conv));
    files.push((
        format!("{prefix}_convergence.svg"),
        series_svg(
            "Convergence",
            "iteration",
            "relative precision",
            &[("precision".to_string(), run.precision.clone())],
            true,
        )?
        .into_bytes(),
    ));
    Ok(files)
}

/// File name prefix of a cell.
pub fn cell_prefix(cell: &Cell) -> String {
    format!("s{:02}_{}", cell.scenario, cell.scheme.name())
}

/// Writes the figures and CSV series of every solved cell into `dir`.
/// Nothing is written unless every solved cell renders.
pub fn emit_plots(report: &RunReport, dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut rendered = Vec::new();
    for cell in &report.cells {
        if let Some(run) = cell.run() {
            rendered.extend(render(run, &cell_prefix(cell))?);
        }
    }
    if rendered.is_empty() {
        return Err(CliError::Invalid("report holds no solved trajectories".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::with_capacity(rendered.len());
    for (name, bytes) in rendered {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

/// Figures and CSV series of a single run.
pub fn emit_run_plots(run: &SchemeRun, prefix: &str, dir: &Path) -> CliResult<Vec<PathBuf>> {
    let rendered = render(run, prefix)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    rendered
        .into_iter()
        .map(|(name, bytes)| {
            let path = dir.join(name);
            write_atomic(&path, &bytes).map(|_| path)
        })
        .collect()
}
