//! Minimal grouped-bar SVG charts. Each bar carries its value as text, in
//! the same number format used by the CSV reports.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 70.0;
const PALETTE: [&str; 4] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// One value per group; `None` draws no bar and labels it `n/a`.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedBarChart {
    pub title: String,
    pub y_label: String,
    pub groups: Vec<String>,
    pub series: Vec<Series>,
}

/// Number format shared by charts and CSV files.
pub fn format_value(v: f64) -> String {
    format!("{v}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl GroupedBarChart {
    pub fn render(&self) -> String {
        let max = self
            .series
            .iter()
            .flat_map(|s| s.values.iter().flatten())
            .fold(0.0f64, |m, v| m.max(*v));
        let y_max = if max > 0.0 { max * 1.15 } else { 1.0 };
        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let base_y = MARGIN_TOP + plot_h;
        let group_w = plot_w / self.groups.len().max(1) as f64;
        let bar_w = group_w * 0.7 / self.series.len().max(1) as f64;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
        );
        let _ = writeln!(
            svg,
            r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            svg,
            r#"<text x="18" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 18 {:.2})">{}</text>"#,
            MARGIN_TOP + plot_h / 2.0,
            MARGIN_TOP + plot_h / 2.0,
            escape(&self.y_label)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{MARGIN_LEFT}" y1="{base_y:.2}" x2="{:.2}" y2="{base_y:.2}" stroke="black"/>"#,
            MARGIN_LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{base_y:.2}" stroke="black"/>"#
        );

        for (g, group) in self.groups.iter().enumerate() {
            let gx = MARGIN_LEFT + g as f64 * group_w + group_w * 0.15;
            for (s, series) in self.series.iter().enumerate() {
                let x = gx + s as f64 * bar_w;
                let colour = PALETTE[s % PALETTE.len()];
                match series.values.get(g).copied().flatten() {
                    Some(v) => {
                        let h = (v / y_max * plot_h).max(0.0);
                        let _ = writeln!(
                            svg,
                            r#"<rect class="bar" x="{x:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="{colour}"/>"#,
                            base_y - h,
                            bar_w * 0.95
                        );
                        let _ = writeln!(
                            svg,
                            r#"<text class="value" data-group="{}" data-series="{}" x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"#,
                            escape(group),
                            escape(&series.name),
                            x + bar_w * 0.475,
                            base_y - h - 4.0,
                            format_value(v)
                        );
                    }
                    None => {
                        let _ = writeln!(
                            svg,
                            r#"<text class="value" data-group="{}" data-series="{}" x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">n/a</text>"#,
                            escape(group),
                            escape(&series.name),
                            x + bar_w * 0.475,
                            base_y - 4.0
                        );
                    }
                }
            }
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
                MARGIN_LEFT + (g as f64 + 0.5) * group_w,
                base_y + 18.0,
                escape(group)
            );
        }

        for (s, series) in self.series.iter().enumerate() {
            let lx = MARGIN_LEFT + s as f64 * 170.0;
            let ly = HEIGHT - 22.0;
            let _ = writeln!(
                svg,
                r#"<rect x="{lx:.2}" y="{:.2}" width="12" height="12" fill="{}"/>"#,
                ly - 10.0,
                PALETTE[s % PALETTE.len()]
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{ly:.2}" font-size="12">{}</text>"#,
                lx + 18.0,
                escape(&series.name)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// Pulls `(group, series, text)` triples back out of a rendered chart.
pub fn extract_values(svg: &str) -> Vec<(String, String, String)> {
    let attr = |line: &str, name: &str| -> Option<String> {
        let key = format!("{name}=\"");
        let start = line.find(&key)? + key.len();
        let end = line[start..].find('"')? + start;
        Some(line[start..end].to_string())
    };
    svg.lines()
        .filter(|l| l.contains(r#"class="value""#))
        .filter_map(|l| {
            let text_start = l.find('>')? + 1;
            let text_end = l.rfind("</text>")?;
            Some((
                attr(l, "data-group")?,
                attr(l, "data-series")?,
                l[text_start..text_end].to_string(),
            ))
        })
        .collect()
}
