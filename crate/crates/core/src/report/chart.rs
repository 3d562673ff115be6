//! Deterministic horizontal bar charts as standalone SVG.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    /// Keep the caller's order.
    #[default]
    None,
    Ascending,
    Descending,
    /// Alphabetical by key.
    Key,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChartOptions {
    pub log_scale: bool,
    pub sort: SortOrder,
    pub title: Option<String>,
    /// Width of the plotting area in pixels.
    pub width: f64,
}

impl Default for ChartOptions {
    fn default() -> Self {
        Self { log_scale: false, sort: SortOrder::None, title: None, width: 480.0 }
    }
}

const LABEL_WIDTH: f64 = 180.0;
const VALUE_WIDTH: f64 = 80.0;
const BAR_HEIGHT: f64 = 18.0;
const BAR_GAP: f64 = 6.0;
const TOP: f64 = 40.0;
const AXIS_HEIGHT: f64 = 30.0;

/// One `<rect class="bar">` per entry. With `log_scale` the axis spans whole
/// decades from `10^floor(log10 min)` to `10^ceil(log10 max)`.
pub fn emit_bar_chart(values: &[(String, f64)], options: &ChartOptions) -> Result<String> {
    if values.is_empty() {
        return Err(Error::EmptyInput("chart values"));
    }
    if !(options.width > 0.0 && options.width.is_finite()) {
        return Err(Error::InvalidArgument("chart width must be positive".into()));
    }
    for (k, v) in values {
        let ok = v.is_finite() && if options.log_scale { *v > 0.0 } else { *v >= 0.0 };
        if !ok {
            let need = if options.log_scale { "positive" } else { "non-negative" };
            return Err(Error::InvalidArgument(format!("value for `{k}` must be finite and {need}, got {v}")));
        }
    }

    let mut rows: Vec<&(String, f64)> = values.iter().collect();
    match options.sort {
        SortOrder::None => {}
        SortOrder::Ascending => rows.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0))),
        SortOrder::Descending => rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))),
        SortOrder::Key => rows.sort_by(|a, b| a.0.cmp(&b.0)),
    }

    let scale = Scale::new(&rows, options.log_scale);
    let w = options.width;
    let plot_h = rows.len() as f64 * (BAR_HEIGHT + BAR_GAP);
    let total_w = LABEL_WIDTH + w + VALUE_WIDTH;
    let total_h = TOP + plot_h + AXIS_HEIGHT;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">"#,
        fmt(total_w),
        fmt(total_h),
        fmt(total_w),
        fmt(total_h)
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(title) = &options.title {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            fmt(total_w / 2.0),
            escape(title)
        );
    }

    for (value, label) in scale.ticks() {
        let x = LABEL_WIDTH + scale.frac(value) * w;
        let _ = writeln!(
            s,
            r##"<line class="tick" x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#ddd"/>"##,
            fmt(TOP - 4.0),
            fmt(TOP + plot_h),
            x = fmt(x)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            fmt(x),
            fmt(TOP + plot_h + 16.0),
            label
        );
    }

    for (i, (key, value)) in rows.iter().map(|r| (&r.0, r.1)).enumerate() {
        let y = TOP + i as f64 * (BAR_HEIGHT + BAR_GAP);
        let len = scale.frac(value) * w;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            fmt(LABEL_WIDTH - 6.0),
            fmt(y + BAR_HEIGHT * 0.75),
            escape(key)
        );
        let _ = writeln!(
            s,
            r##"<rect class="bar" x="{}" y="{}" width="{}" height="{}" fill="#4c72b0"><title>{}</title></rect>"##,
            fmt(LABEL_WIDTH),
            fmt(y),
            fmt(len),
            fmt(BAR_HEIGHT),
            escape(key)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            fmt(LABEL_WIDTH + len + 4.0),
            fmt(y + BAR_HEIGHT * 0.75),
            fmt(value)
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#333"/>"##,
        fmt(TOP - 4.0),
        fmt(TOP + plot_h),
        x = fmt(LABEL_WIDTH)
    );
    s.push_str("</svg>\n");
    Ok(s)
}

enum Scale {
    Linear { max: f64 },
    Log { lo: i32, hi: i32 },
}

impl Scale {
    fn new(rows: &[&(String, f64)], log: bool) -> Self {
        let max = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        if log {
            let min = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
            let lo = min.log10().floor() as i32;
            let mut hi = max.log10().ceil() as i32;
            if hi == lo {
                hi += 1;
            }
            Scale::Log { lo, hi }
        } else {
            Scale::Linear { max: if max > 0.0 { max } else { 1.0 } }
        }
    }

    fn frac(&self, v: f64) -> f64 {
        match *self {
            Scale::Linear { max } => v / max,
            Scale::Log { lo, hi } => (v.log10() - lo as f64) / (hi - lo) as f64,
        }
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        match *self {
            Scale::Linear { max } => (0..=4).map(|i| {
                let v = max * i as f64 / 4.0;
                (v, fmt(v))
            }).collect(),
            Scale::Log { lo, hi } => (lo..=hi).map(|e| (10f64.powi(e), format!("1e{e}"))).collect(),
        }
    }
}

/// Two decimals, trailing zeros trimmed, never `-0`.
fn fmt(v: f64) -> String {
    let s = format!("{:.2}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bar_widths(svg: &str) -> Vec<f64> {
        let doc = roxmltree::Document::parse(svg).unwrap();
        doc.descendants()
            .filter(|n| n.attribute("class") == Some("bar"))
            .map(|n| n.attribute("width").unwrap().parse().unwrap())
            .collect()
    }

    fn kv(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn equal_values_equal_bars() {
        let svg = emit_bar_chart(&kv(&[("a", 3.0), ("b", 3.0)]), &ChartOptions::default()).unwrap();
        let w = bar_widths(&svg);
        assert_eq!(w.len(), 2);
        assert_eq!(w[0], w[1]);
    }

    #[test]
    fn log_decades_are_equally_spaced() {
        let opts = ChartOptions { log_scale: true, ..ChartOptions::default() };
        let w = bar_widths(&emit_bar_chart(&kv(&[("a", 1.0), ("b", 10.0), ("c", 100.0)]), &opts).unwrap());
        assert!((w[1] - w[0] - (w[2] - w[1])).abs() < 1e-9);
    }

    #[test]
    fn sorting_and_escaping() {
        let opts = ChartOptions { sort: SortOrder::Descending, title: Some("a < b & c".into()), ..ChartOptions::default() };
        let svg = emit_bar_chart(&kv(&[("x<y", 1.0), ("z", 2.0)]), &opts).unwrap();
        let w = bar_widths(&svg);
        assert!(w[0] > w[1]);
        assert!(svg.contains("x&lt;y"));
    }

    #[test]
    fn invalid_inputs() {
        assert!(emit_bar_chart(&[], &ChartOptions::default()).is_err());
        let log = ChartOptions { log_scale: true, ..ChartOptions::default() };
        assert!(emit_bar_chart(&kv(&[("a", 0.0)]), &log).is_err());
        assert!(emit_bar_chart(&kv(&[("a", -1.0)]), &ChartOptions::default()).is_err());
    }

    #[test]
    fn output_is_deterministic() {
        let v = kv(&[("en", 4.5), ("de", 7.25)]);
        assert_eq!(emit_bar_chart(&v, &ChartOptions::default()).unwrap(), emit_bar_chart(&v, &ChartOptions::default()).unwrap());
    }
}
