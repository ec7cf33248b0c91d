//! CSV and SVG writers with deterministic number formatting.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Round-trip formatting with 17 significant digits.
pub fn fmt_csv(v: f64) -> String {
    format!("{v:.16e}")
}

/// Six significant digits, shortest decimal form.
pub fn fmt_svg(v: f64) -> String {
    if !v.is_finite() {
        return "0".into();
    }
    let rounded: f64 = format!("{v:.5e}").parse().unwrap_or(0.0);
    if rounded == 0.0 {
        "0".into()
    } else {
        format!("{rounded}")
    }
}

/// In-memory CSV table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_numbers(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|v| fmt_csv(*v)).collect());
    }

    pub fn push_row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Curve {
    pub fn new(label: &str, color: &str, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), color: color.into(), points, dashed: false }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvgStyle {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Text placed at data coordinates.
    pub annotations: Vec<(f64, f64, String)>,
}

impl Default for SvgStyle {
    fn default() -> Self {
        Self { width: 640.0, height: 480.0, margin: 56.0, title: String::new(), x_label: "x".into(), y_label: "y".into(), annotations: Vec::new() }
    }
}

fn bounds(curves: &[Curve]) -> Option<(f64, f64, f64, f64)> {
    let pts = curves.iter().flat_map(|c| c.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let mut b: Option<(f64, f64, f64, f64)> = None;
    for &(x, y) in pts {
        b = Some(match b {
            None => (x, x, y, y),
            Some((x0, x1, y0, y1)) => (x0.min(x), x1.max(x), y0.min(y), y1.max(y)),
        });
    }
    b.map(|(mut x0, mut x1, mut y0, mut y1)| {
        if x1 - x0 < 1e-12 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 < 1e-12 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let (px, py) = (0.05 * (x1 - x0), 0.05 * (y1 - y0));
        (x0 - px, x1 + px, y0 - py, y1 + py)
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Standalone SVG line plot, one polyline per curve.
pub fn render_svg(curves: &[Curve], style: &SvgStyle) -> Result<String> {
    if curves.is_empty() || curves.iter().all(|c| c.points.is_empty()) {
        return Err(Error::InvalidInput("nothing to plot".into()));
    }
    let (x0, x1, y0, y1) = bounds(curves).ok_or_else(|| Error::InvalidInput("no finite points".into()))?;
    let (w, h, m) = (style.width, style.height, style.margin);
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        fmt_svg(w),
        fmt_svg(h),
        fmt_svg(w),
        fmt_svg(h)
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#, fmt_svg(w), fmt_svg(h));
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        fmt_svg(m),
        fmt_svg(m),
        fmt_svg(w - 2.0 * m),
        fmt_svg(h - 2.0 * m)
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
            fmt_svg(sx(fx)),
            fmt_svg(h - m + 16.0),
            fmt_svg(fx)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#,
            fmt_svg(m - 6.0),
            fmt_svg(sy(fy) + 4.0),
            fmt_svg(fy)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{}</text>"#,
        fmt_svg(w / 2.0),
        fmt_svg(h - 12.0),
        escape(&style.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        fmt_svg(h / 2.0),
        fmt_svg(h / 2.0),
        escape(&style.y_label)
    );
    if !style.title.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
            fmt_svg(w / 2.0),
            escape(&style.title)
        );
    }
    for c in curves.iter().filter(|c| !c.points.is_empty()) {
        let pts: Vec<String> = c
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{},{}", fmt_svg(sx(x)), fmt_svg(sy(y))))
            .collect();
        let dash = if c.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="2"{} points="{}"/>"#,
            escape(&c.color),
            dash,
            pts.join(" ")
        );
    }
    for (x, y, text) in &style.annotations {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
            fmt_svg(sx(*x)),
            fmt_svg(sy(*y)),
            escape(text)
        );
    }
    for (i, c) in curves.iter().enumerate() {
        let y = m + 14.0 + 16.0 * i as f64;
        let x = w - m - 150.0;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="2"/>"#,
            fmt_svg(x),
            fmt_svg(y),
            fmt_svg(x + 24.0),
            fmt_svg(y),
            escape(&c.color)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12">{}</text>"#,
            fmt_svg(x + 30.0),
            fmt_svg(y + 4.0),
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_numbers() {
        assert_eq!(fmt_svg(1.0), "1");
        assert_eq!(fmt_svg(0.123456789), "0.123457");
        assert_eq!(fmt_svg(-1234567.0), "-1234570");
        assert_eq!(fmt_svg(0.0), "0");
    }

    #[test]
    fn csv_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23] {
            assert_eq!(fmt_csv(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn single_curve_single_polyline() {
        let svg = render_svg(&[Curve::new("c", "blue", vec![(0.0, 0.0), (1.0, 1.0)])], &SvgStyle::default()).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(render_svg(&[], &SvgStyle::default()).is_err());
    }
}
