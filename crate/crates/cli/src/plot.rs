//! SVG figures. CSVs are the contract; these are convenience output.

use std::path::Path;

use anyhow::Result;
use plotters::prelude::*;

use dtheory::observables::{perturbative_step_scaling, Loops, StepScalingPoint};

pub fn step_scaling_svg(path: &Path, points: &[&StepScalingPoint], s: f64) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let root = SVGBackend::new(path, (900, 620)).into_drawing_area();
    root.fill(&WHITE)?;
    let z_max = points.iter().map(|p| p.z).fold(0.8f64, f64::max) * 1.1;
    let f_lo = points.iter().map(|p| p.f).fold(0.95f64, f64::min).min(0.95) * 0.98;
    let f_hi = points.iter().map(|p| p.f).fold(s * 1.1, f64::max) * 1.05;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(45)
        .y_label_area_size(55)
        .caption(format!("step scaling F_{s:.3}(z)"), ("sans-serif", 22))
        .build_cartesian_2d(0.0..z_max, f_lo..f_hi)?;
    chart
        .configure_mesh()
        .x_desc("z = gbar(L)")
        .y_desc("F_s(z)")
        .label_style(("sans-serif", 14))
        .draw()?;

    // Perturbative reference (dashed).
    let curve: Vec<(f64, f64)> = (1..200)
        .map(|k| {
            let z = z_max * k as f64 / 200.0;
            (z, perturbative_step_scaling(z, s, Loops::Two).map(|r| r.f).unwrap_or(f64::NAN))
        })
        .filter(|(_, f)| f.is_finite())
        .collect();
    chart
        .draw_series(DashedLineSeries::new(curve, 6, 3, BLUE.stroke_width(2)))?
        .label("two-loop reference")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], BLUE.stroke_width(2)));

    chart
        .draw_series(points.iter().map(|p| {
            let err = p.f_err.unwrap_or(0.0);
            ErrorBar::new_vertical(p.z, p.f - err, p.f, p.f + err, RED.filled(), 6)
        }))?
        .label("measured")
        .legend(|(x, y)| Circle::new((x + 9, y), 4, RED.filled()));

    chart.configure_series_labels().border_style(BLACK).background_style(WHITE).draw()?;
    root.present()?;
    Ok(())
}

/// Generic y-vs-x line figure used for reference tables.
pub fn curve_svg(path: &Path, title: &str, xlabel: &str, ylabel: &str, series: &[(f64, f64)]) -> Result<()> {
    if series.is_empty() {
        return Ok(());
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let root = SVGBackend::new(path, (900, 620)).into_drawing_area();
    root.fill(&WHITE)?;
    let x_lo = series.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_hi = series.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let y_lo = series.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let y_hi = series.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let pad = (y_hi - y_lo).max(1e-9) * 0.05;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(45)
        .y_label_area_size(55)
        .caption(title, ("sans-serif", 22))
        .build_cartesian_2d(x_lo..x_hi, (y_lo - pad)..(y_hi + pad))?;
    chart.configure_mesh().x_desc(xlabel).y_desc(ylabel).label_style(("sans-serif", 14)).draw()?;
    chart.draw_series(LineSeries::new(series.iter().copied(), BLUE.stroke_width(2)))?;
    root.present()?;
    Ok(())
}
