//! Self-contained SVG line and bar charts.

use std::fmt::Write as _;

use crate::xml::escape;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Logarithmic x axis over `[x_min, 1]`; non-positive x are clamped.
    pub log_x: bool,
    pub x_min: f64,
    pub series: Vec<Series>,
    /// Shown in place of the plot area when there are no series.
    pub empty_note: String,
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
}

fn legend(out: &mut String, names: &[&str]) {
    let x = WIDTH - RIGHT + 12.0;
    for (i, name) in names.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"12\" height=\"4\" fill=\"{}\"/><text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            y - 4.0,
            PALETTE[i % PALETTE.len()],
            x + 18.0,
            y,
            escape(name)
        );
    }
}

fn plot_box() -> (f64, f64, f64, f64) {
    (LEFT, TOP, WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM)
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    let (x0, y0, w, h) = plot_box();
    let _ = writeln!(
        out,
        "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{w:.1}\" height=\"{h:.1}\" fill=\"none\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        x0 + w / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
        y0 + h / 2.0,
        y0 + h / 2.0,
        escape(y_label)
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let y = y0 + h * (1.0 - v);
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{x0:.1}\" y2=\"{y:.1}\" stroke=\"black\"/><text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v:.1}</text>",
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0
        );
    }
}

fn no_data(out: &mut String, note: &str) {
    let (x0, y0, w, h) = plot_box();
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"#666\">{}</text>",
        x0 + w / 2.0,
        y0 + h / 2.0,
        escape(note)
    );
}

impl LinePlot {
    fn x_pos(&self, x: f64) -> f64 {
        let (x0, _, w, _) = plot_box();
        let t = if self.log_x {
            let lo = self.x_min.log10();
            (x.max(self.x_min).log10() - lo) / -lo
        } else {
            x
        };
        x0 + w * t.clamp(0.0, 1.0)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        header(&mut out, &self.title);
        axes(&mut out, &self.x_label, &self.y_label);
        let (_, y0, _, h) = plot_box();
        if self.log_x {
            let decades = (-self.x_min.log10()).round() as i32;
            for d in (0..=decades).rev() {
                let v = 10f64.powi(-d);
                let x = self.x_pos(v);
                let _ = writeln!(
                    out,
                    "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\"/><text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">1e-{d}</text>",
                    y0 + h,
                    y0 + h + 4.0,
                    y0 + h + 18.0
                );
            }
        } else {
            for i in 0..=5 {
                let v = i as f64 / 5.0;
                let x = self.x_pos(v);
                let _ = writeln!(
                    out,
                    "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\"/><text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{v:.1}</text>",
                    y0 + h,
                    y0 + h + 4.0,
                    y0 + h + 18.0
                );
            }
        }
        if self.series.is_empty() {
            no_data(&mut out, &self.empty_note);
        }
        for (i, s) in self.series.iter().enumerate() {
            let mut d = String::new();
            for (j, &(x, y)) in s.points.iter().enumerate() {
                let py = y0 + h * (1.0 - y.clamp(0.0, 1.0));
                let _ = write!(d, "{}{:.1},{py:.1}", if j == 0 { "M" } else { " L" }, self.x_pos(x));
            }
            let _ = writeln!(
                out,
                "<path d=\"{d}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
                PALETTE[i % PALETTE.len()]
            );
        }
        let names: Vec<&str> = self.series.iter().map(|s| s.name.as_str()).collect();
        legend(&mut out, &names);
        out.push_str("</svg>\n");
        out
    }
}

/// Grouped bars; a `None` value is drawn as a "no data" marker.
#[derive(Debug, Clone, PartialEq)]
pub struct BarChart {
    pub title: String,
    pub y_label: String,
    pub series: Vec<String>,
    pub groups: Vec<(String, Vec<Option<f64>>)>,
}

impl BarChart {
    pub fn render(&self) -> String {
        let mut out = String::new();
        header(&mut out, &self.title);
        axes(&mut out, "", &self.y_label);
        let (x0, y0, w, h) = plot_box();
        let n = self.groups.len().max(1) as f64;
        let gw = w / n;
        let k = self.series.len().max(1) as f64;
        let bw = gw * 0.8 / k;
        for (gi, (label, values)) in self.groups.iter().enumerate() {
            let gx = x0 + gw * gi as f64;
            let _ = writeln!(
                out,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"10\">{}</text>",
                gx + gw / 2.0,
                y0 + h + 16.0,
                escape(label)
            );
            for (si, v) in values.iter().enumerate() {
                let bx = gx + gw * 0.1 + bw * si as f64;
                match v {
                    Some(v) => {
                        let bh = h * v.clamp(0.0, 1.0);
                        let _ = writeln!(
                            out,
                            "<rect x=\"{bx:.1}\" y=\"{:.1}\" width=\"{bw:.1}\" height=\"{bh:.1}\" fill=\"{}\"/>",
                            y0 + h - bh,
                            PALETTE[si % PALETTE.len()]
                        );
                    }
                    None => {
                        let _ = writeln!(
                            out,
                            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"8\" fill=\"#666\">n/d</text>",
                            bx + bw / 2.0,
                            y0 + h - 4.0
                        );
                    }
                }
            }
        }
        if self.groups.is_empty() {
            no_data(&mut out, "no data");
        }
        let names: Vec<&str> = self.series.iter().map(String::as_str).collect();
        legend(&mut out, &names);
        out.push_str("</svg>\n");
        out
    }
}
