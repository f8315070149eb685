//! Minimal static SVG charts. Each chart carries its data as CSV inside a
//! `<metadata>` element so the numbers survive without the plotting code.

use std::fmt::Write as _;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

const WIDTH: f64 = 760.0;
const PANEL_H: f64 = 180.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 140.0;
const TOP: f64 = 36.0;
const GAP: f64 = 34.0;

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    /// One value per x label; gaps break the line.
    pub values: Vec<Option<f64>>,
}

impl Series {
    pub fn new(name: impl Into<String>, values: Vec<Option<f64>>) -> Series {
        Series {
            name: name.into(),
            values,
        }
    }

    pub fn dense(name: impl Into<String>, values: &[f64]) -> Series {
        Series::new(name, values.iter().map(|v| Some(*v)).collect())
    }
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub series: Vec<Series>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn header(out: &mut String, title: &str, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        esc(title)
    );
}

fn metadata(out: &mut String, csv: &str) {
    let _ = writeln!(out, "<metadata><![CDATA[\n{}]]></metadata>", csv.replace("]]>", "]] >"));
}

fn table_csv(x_labels: &[String], panels: &[Panel]) -> String {
    let mut csv = String::from("x");
    for p in panels {
        for s in &p.series {
            let _ = write!(csv, ",{}", s.name);
        }
    }
    csv.push('\n');
    for (i, x) in x_labels.iter().enumerate() {
        csv.push_str(x);
        for s in panels.iter().flat_map(|p| &p.series) {
            match s.values.get(i).copied().flatten() {
                Some(v) => {
                    let _ = write!(csv, ",{v}");
                }
                None => csv.push(','),
            }
        }
        csv.push('\n');
    }
    csv
}

/// Vertically stacked line panels sharing one x axis.
pub fn line_panels(title: &str, x_labels: &[String], panels: &[Panel]) -> String {
    let height = TOP + panels.len() as f64 * (PANEL_H + GAP) + 20.0;
    let mut out = String::new();
    header(&mut out, title, height);
    metadata(&mut out, &table_csv(x_labels, panels));
    let plot_w = WIDTH - LEFT - RIGHT;
    let n = x_labels.len().max(2);
    let xpos = |i: usize| LEFT + plot_w * i as f64 / (n - 1) as f64;
    for (pi, panel) in panels.iter().enumerate() {
        let y0 = TOP + pi as f64 * (PANEL_H + GAP) + 14.0;
        let vals = panel.series.iter().flat_map(|s| s.values.iter().flatten().copied());
        let (mut lo, mut hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let ypos = |v: f64| y0 + PANEL_H - (v - lo) / (hi - lo) * PANEL_H;
        let _ = writeln!(
            out,
            r#"<text x="{LEFT}" y="{:.2}" font-weight="bold">{}</text>"#,
            y0 - 4.0,
            esc(&panel.title)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT}" y="{y0:.2}" width="{plot_w:.2}" height="{PANEL_H}" fill="none" stroke="#999"/>"##
        );
        for (v, anchor_y) in [(hi, y0), (lo, y0 + PANEL_H)] {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 4.0,
                anchor_y + 4.0,
                fmt_tick(v)
            );
        }
        for (si, s) in panel.series.iter().enumerate() {
            let color = PALETTE[si % PALETTE.len()];
            let mut d = String::new();
            let mut pen_down = false;
            for (i, v) in s.values.iter().enumerate() {
                match v {
                    Some(v) => {
                        let _ = write!(d, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, xpos(i), ypos(*v));
                        pen_down = true;
                    }
                    None => pen_down = false,
                }
            }
            let _ = writeln!(
                out,
                r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                d.trim_end()
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
                WIDTH - RIGHT + 8.0,
                y0 + 12.0 + 14.0 * si as f64,
                esc(&s.name)
            );
        }
    }
    let base = TOP + panels.len() as f64 * (PANEL_H + GAP) - GAP + 30.0;
    if let (Some(first), Some(last)) = (x_labels.first(), x_labels.last()) {
        let _ = writeln!(out, r#"<text x="{LEFT}" y="{base:.2}">{}</text>"#, esc(first));
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{base:.2}" text-anchor="end">{}</text>"#,
            WIDTH - RIGHT,
            esc(last)
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn line_chart(title: &str, x_labels: &[String], series: Vec<Series>) -> String {
    line_panels(
        title,
        x_labels,
        &[Panel {
            title: String::new(),
            series,
        }],
    )
}

/// Horizontal bars, one per labelled value.
pub fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let row = 22.0;
    let height = TOP + bars.len() as f64 * row + 30.0;
    let mut out = String::new();
    header(&mut out, title, height);
    let mut csv = String::from("label,value\n");
    for (l, v) in bars {
        let _ = writeln!(csv, "{l},{v}");
    }
    metadata(&mut out, &csv);
    let label_w = 150.0;
    let plot_w = WIDTH - label_w - 90.0;
    let max = bars.iter().map(|b| b.1).fold(0.0_f64, f64::max).max(1e-12);
    for (i, (label, v)) in bars.iter().enumerate() {
        let y = TOP + i as f64 * row;
        let w = (v.max(0.0) / max) * plot_w;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            label_w - 6.0,
            y + 14.0,
            esc(label)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{label_w}" y="{:.2}" width="{w:.2}" height="{:.2}" fill="{}"/>"#,
            y + 3.0,
            row - 6.0,
            PALETTE[0]
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            label_w + w + 4.0,
            y + 14.0,
            fmt_tick(*v)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_embed_their_data() {
        let x: Vec<String> = (0..3).map(|i| format!("d{i}")).collect();
        let svg = line_chart("t<1>", &x, vec![Series::new("a", vec![Some(1.0), None, Some(2.5)])]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("x,a\nd0,1\nd1,\nd2,2.5\n"));
        assert!(svg.contains("t&lt;1&gt;"));
        // The gap splits the path into two moves.
        assert_eq!(svg.matches('M').count(), 2);
        let bars = bar_chart("b", &[("Dhaka".into(), 3.0), ("Sylhet".into(), 1.0)]);
        assert!(bars.contains("label,value\nDhaka,3\nSylhet,1\n"));
    }
}
