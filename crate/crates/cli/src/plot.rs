//! SVG rendering of the θ comparison and the loss curves.

use std::path::Path;

use plotters::coord::Shift;
use plotters::prelude::*;

use crate::csvio::{LossRow, ThetaColumns};
use crate::error::{CliError, Result};

pub const THETA_PLOT_FILE: &str = "theta.svg";
pub const LOSS_PLOT_FILE: &str = "losses.svg";
/// Number of leading samples drawn in the θ plot.
pub const THETA_PLOT_ROWS: usize = 500;

const SIZE: (u32, u32) = (960, 540);

fn plot_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Plot(e.to_string())
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    (lo - pad, hi + pad)
}

fn write_svg(path: &Path, svg: String) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| CliError::io(path, e))
}

fn draw_theta(root: &DrawingArea<SVGBackend, Shift>, theta: &ThetaColumns) -> Result<()> {
    let n = theta.theta_true.len().min(THETA_PLOT_ROWS);
    let series: [(&str, &[f64], RGBColor); 3] = [
        ("theta_true", &theta.theta_true[..n], BLACK),
        ("theta_hat", &theta.theta_hat[..n], RGBColor(120, 160, 220)),
        ("theta_smooth", &theta.theta_smooth[..n], RED),
    ];
    let (lo, hi) = padded_range(series.iter().flat_map(|(_, v, _)| v.iter().copied()));

    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(root)
        .caption("True vs estimated treatment effect", ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(56)
        .build_cartesian_2d(0f64..(n.max(2) - 1) as f64, lo..hi)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("sample index")
        .y_desc("theta")
        .draw()
        .map_err(plot_err)?;
    for (name, values, color) in series {
        chart
            .draw_series(LineSeries::new(values.iter().enumerate().map(|(i, &v)| (i as f64, v)), color))
            .map_err(plot_err)?
            .label(name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)
}

/// Plots the first [`THETA_PLOT_ROWS`] samples (all of them if fewer).
pub fn render_theta(path: &Path, theta: &ThetaColumns) -> Result<()> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        draw_theta(&root, theta)?;
    }
    write_svg(path, svg)
}

type Curve<'a> = (&'a str, Vec<(f64, f64)>, RGBColor);

fn draw_losses(root: &DrawingArea<SVGBackend, Shift>, rows: &[LossRow], switch_epoch: usize) -> Result<()> {
    let max_epoch = rows.iter().map(|r| r.0).max().unwrap_or(1).max(2) as f64;
    let values = || rows.iter().flat_map(|r| [Some(r.1), Some(r.2), r.3]).flatten();
    let positive = values().all(|v| v > 0.0);
    root.fill(&WHITE).map_err(plot_err)?;

    let curves: [Curve; 3] = [
        ("total", rows.iter().map(|r| (r.0 as f64, r.1)).collect(), BLACK),
        ("mse", rows.iter().map(|r| (r.0 as f64, r.2)).collect(), BLUE),
        ("ortho", rows.iter().filter_map(|r| r.3.map(|o| (r.0 as f64, o))).collect(), RED),
    ];
    let marker = (switch_epoch as f64) < max_epoch;

    macro_rules! finish {
        ($chart:expr, $lo:expr, $hi:expr) => {{
            let mut chart = $chart;
            chart
                .configure_mesh()
                .x_desc("epoch")
                .y_desc("loss")
                .draw()
                .map_err(plot_err)?;
            for (name, points, color) in curves {
                chart
                    .draw_series(LineSeries::new(points, color))
                    .map_err(plot_err)?
                    .label(name)
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
            }
            if marker {
                let s = switch_epoch as f64;
                chart
                    .draw_series(LineSeries::new(vec![(s, $lo), (s, $hi)], GREEN.stroke_width(2)))
                    .map_err(plot_err)?
                    .label("switch epoch")
                    .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], GREEN));
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(plot_err)?;
        }};
    }

    let builder = || {
        let mut b = ChartBuilder::on(root);
        b.caption("Training losses", ("sans-serif", 22))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(64);
        b
    };
    if positive {
        let lo = values().fold(f64::INFINITY, f64::min) * 0.8;
        let hi = values().fold(f64::NEG_INFINITY, f64::max) * 1.25;
        let chart = builder()
            .build_cartesian_2d(1f64..max_epoch, (lo..hi).log_scale())
            .map_err(plot_err)?;
        finish!(chart, lo, hi);
    } else {
        let (lo, hi) = padded_range(values());
        let chart = builder().build_cartesian_2d(1f64..max_epoch, lo..hi).map_err(plot_err)?;
        finish!(chart, lo, hi);
    }
    root.present().map_err(plot_err)
}

/// Loss curves on a log axis (linear if any value is not positive), with a
/// vertical marker at `switch_epoch`.
pub fn render_losses(path: &Path, rows: &[LossRow], switch_epoch: usize) -> Result<()> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        draw_losses(&root, rows, switch_epoch)?;
    }
    write_svg(path, svg)
}
