//! Minimal SVG line charts of training metrics.

use std::fmt::Write as _;

use easter_core::trainer::MetricsRow;

pub struct Run {
    pub label: String,
    pub rows: Vec<MetricsRow>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 260.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_T: f64 = 40.0;
const GAP: f64 = 90.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else if v.abs() >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

struct Panel<'a> {
    title: &'a str,
    x0: f64,
    series: Vec<(usize, Vec<(f64, f64)>)>,
}

fn draw_panel(svg: &mut String, panel: &Panel<'_>, x_range: (f64, f64)) {
    let (x0, y0) = (panel.x0, MARGIN_T);
    let _ = writeln!(
        svg,
        r##"<rect x="{x0}" y="{y0}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
        x0 + PANEL_W / 2.0,
        y0 - 12.0,
        escape(panel.title)
    );
    let points = panel.series.iter().flat_map(|(_, p)| p.iter());
    let y_max = points.clone().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let y_min = points.map(|p| p.1).fold(f64::INFINITY, f64::min).min(0.0);
    if !y_max.is_finite() {
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{}" text-anchor="middle" font-size="12" fill="#666">no data</text>"##,
            x0 + PANEL_W / 2.0,
            y0 + PANEL_H / 2.0
        );
        return;
    }
    let y_max = if y_max > y_min { y_max } else { y_min + 1.0 };
    let (xa, xb) = x_range;
    let sx = |x: f64| x0 + (x - xa) / (xb - xa) * PANEL_W;
    let sy = |y: f64| y0 + PANEL_H - (y - y_min) / (y_max - y_min) * PANEL_H;
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (xa + f * (xb - xa), y_min + f * (y_max - y_min));
        let _ = writeln!(
            svg,
            r##"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#ddd"/><text x="{0}" y="{3}" text-anchor="middle" font-size="10">{4}</text>"##,
            sx(xv),
            y0,
            y0 + PANEL_H,
            y0 + PANEL_H + 14.0,
            tick_label(xv)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="#ddd"/><text x="{3}" y="{4}" text-anchor="end" font-size="10">{5}</text>"##,
            x0,
            sy(yv),
            x0 + PANEL_W,
            x0 - 6.0,
            sy(yv) + 3.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">step</text>"#,
        x0 + PANEL_W / 2.0,
        y0 + PANEL_H + 32.0
    );
    for (run, pts) in &panel.series {
        let color = PALETTE[run % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#,
            coords.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="2.2" fill="{color}"/>"#, sx(x), sy(y));
        }
    }
}

/// Training loss and validation CER against step, one colored series per run.
pub fn render_svg(runs: &[Run]) -> String {
    let steps = runs.iter().flat_map(|r| r.rows.iter().map(|row| row.step as f64));
    let x_min = steps.clone().fold(f64::INFINITY, f64::min).min(0.0);
    let mut x_max = steps.fold(f64::NEG_INFINITY, f64::max);
    if !(x_max > x_min) {
        x_max = x_min + 1.0;
    }
    let series = |f: fn(&MetricsRow) -> Option<f64>| -> Vec<(usize, Vec<(f64, f64)>)> {
        runs.iter()
            .enumerate()
            .map(|(i, r)| (i, r.rows.iter().filter_map(|row| f(row).map(|v| (row.step as f64, v))).collect()))
            .filter(|(_, p): &(usize, Vec<_>)| !p.is_empty())
            .collect()
    };
    let panels = [
        Panel {
            title: "training loss",
            x0: MARGIN_L,
            series: series(|r| r.train_loss),
        },
        Panel {
            title: "validation CER",
            x0: MARGIN_L + PANEL_W + GAP,
            series: series(|r| r.val_cer),
        },
    ];
    let legend_h = 20.0 * runs.len() as f64;
    let width = MARGIN_L + 2.0 * PANEL_W + GAP + 30.0;
    let height = MARGIN_T + PANEL_H + 50.0 + legend_h;
    let mut svg = format!(
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">
<rect width="100%" height="100%" fill="white"/>
"#
    );
    for p in &panels {
        draw_panel(&mut svg, p, (x_min, x_max));
    }
    let _ = writeln!(svg, r#"<g id="legend">"#);
    for (i, run) in runs.iter().enumerate() {
        let y = MARGIN_T + PANEL_H + 50.0 + 20.0 * i as f64;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{color}" stroke-width="3"/><text x="{3}" y="{4}" font-size="12">{5}</text>"#,
            MARGIN_L,
            y,
            MARGIN_L + 24.0,
            MARGIN_L + 30.0,
            y + 4.0,
            escape(&run.label)
        );
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(step: u64, loss: f64, cer: Option<f64>) -> MetricsRow {
        MetricsRow {
            step,
            train_loss: Some(loss),
            val_cer: cer,
            val_wer: cer,
            wall_time: 0.0,
            train_cer: None,
        }
    }

    #[test]
    fn two_runs_have_legend_and_curves() {
        let runs = vec![
            Run {
                label: "a<b".into(),
                rows: vec![row(10, 3.0, Some(0.9)), row(20, 2.0, Some(0.5))],
            },
            Run {
                label: "second".into(),
                rows: vec![row(10, 4.0, None), row(20, 1.0, None)],
            },
        ];
        let svg = render_svg(&runs);
        assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains("a&lt;b") && svg.contains("second"));
        assert_eq!(svg.matches("<svg").count(), 1);
    }

    #[test]
    fn single_point_run() {
        let svg = render_svg(&[Run {
            label: "x".into(),
            rows: vec![row(0, 1.0, None)],
        }]);
        assert!(svg.contains("no data"));
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
