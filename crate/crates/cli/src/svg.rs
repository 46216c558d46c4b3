//! Horizontal bar charts as plain SVG text.

use std::fmt::Write;

/// Bars kept after sorting.
pub const MAX_BARS: usize = 20;

const WIDTH: f64 = 720.0;
const LABEL_WIDTH: f64 = 240.0;
const VALUE_WIDTH: f64 = 90.0;
const ROW_HEIGHT: f64 = 22.0;
const TOP: f64 = 40.0;
const MARGIN: f64 = 10.0;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Entries sorted by descending `|score|` (input order among equals),
/// truncated to [`MAX_BARS`].
pub fn bar_order(scores: &[(String, f64)]) -> Vec<(String, f64)> {
    let mut v = scores.to_vec();
    v.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    v.truncate(MAX_BARS);
    v
}

/// Renders `scores` as a bar chart, one `<rect class="bar">` per entry.
/// Bar length is proportional to `|score|`; negative scores are drawn in a
/// second colour. Identical input gives identical bytes.
pub fn emit_bar_svg(scores: &[(String, f64)], title: &str) -> String {
    let bars = bar_order(scores);
    let height = TOP + ROW_HEIGHT * bars.len() as f64 + MARGIN;
    let span = WIDTH - LABEL_WIDTH - VALUE_WIDTH - 2.0 * MARGIN;
    let max = bars
        .iter()
        .map(|b| b.1.abs())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="24" font-size="15" font-weight="bold">{}</text>"#,
        escape(title)
    );
    for (i, (name, value)) in bars.iter().enumerate() {
        let y = TOP + ROW_HEIGHT * i as f64;
        let len = if max > 0.0 && value.is_finite() {
            span * value.abs() / max
        } else {
            0.0
        };
        let fill = if *value < 0.0 { "#d9534f" } else { "#337ab7" };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LABEL_WIDTH - 6.0,
            y + 15.0,
            escape(name)
        );
        let _ = writeln!(
            s,
            r#"<rect class="bar" data-label="{}" x="{LABEL_WIDTH:.1}" y="{:.1}" width="{len:.2}" height="{:.1}" fill="{fill}"/>"#,
            escape(name),
            y + 3.0,
            ROW_HEIGHT - 6.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{value:.4}</text>"#,
            LABEL_WIDTH + len + 6.0,
            y + 15.0
        );
    }
    s.push_str("</svg>\n");
    s
}
