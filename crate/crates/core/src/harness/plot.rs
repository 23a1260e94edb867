//! Static SVG line charts, one `<polyline>` per series.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    SemilogY,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Series {
    pub fn new(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { label: label.into(), x, y }
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"];

/// Renders the chart. On a semilog scale points with `y ≤ 0` are dropped.
pub fn render_svg(title: &str, series: &[Series], scale: Scale) -> Result<String> {
    if series.is_empty() {
        return Err(Error::Invalid("nothing to plot".into()));
    }
    let ty = |y: f64| match scale {
        Scale::Linear => Some(y),
        Scale::SemilogY => (y > 0.0).then(|| y.log10()),
    };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.x.iter()
                .zip(&s.y)
                .filter_map(|(&x, &y)| Some((x, ty(y)?)).filter(|(x, y)| x.is_finite() && y.is_finite()))
                .collect()
        })
        .collect();
    let all = || pts.iter().flatten();
    if all().next().is_none() {
        return Err(Error::Invalid("no finite points to plot".into()));
    }
    let span = |lo: f64, hi: f64| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let (x0, x1) = span(
        all().map(|p| p.0).fold(f64::INFINITY, f64::min),
        all().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = span(
        all().map(|p| p.1).fold(f64::INFINITY, f64::min),
        all().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    );
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#, LEFT + pw / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let ylab = match scale {
            Scale::Linear => format!("{yv:.3e}"),
            Scale::SemilogY => format!("1e{yv:.2}"),
        };
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xv:.3}</text>"#,
            px(xv),
            TOP + ph + 16.0
        );
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{ylab}</text>"#, LEFT - 6.0, py(yv) + 4.0);
    }
    for (k, (s, p)) in series.iter().zip(&pts).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut coords = String::new();
        for (i, &(x, y)) in p.iter().enumerate() {
            if i > 0 {
                coords.push(' ');
            }
            let _ = write!(coords, "{:.2},{:.2}", px(x), py(y));
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>"#
        );
        let ly = TOP + 14.0 * (k as f64 + 1.0);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{ly:.2}" fill="{color}">{}</text>"#,
            WIDTH - RIGHT + 10.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Writes [`render_svg`] to `path`.
pub fn emit_plot(title: &str, series: &[Series], scale: Scale, path: &Path) -> Result<()> {
    let svg = render_svg(title, series, scale)?;
    std::fs::write(path, svg)?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_series_one_polyline() {
        let svg = render_svg("t", &[Series::new("a", vec![0.0, 1.0], vec![1.0, 2.0])], Scale::Linear).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn semilog_of_exponential_is_straight() {
        let x: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|t| (-2.0 * t).exp()).collect();
        let svg = render_svg("e", &[Series::new("e^-2t", x, y)], Scale::SemilogY).unwrap();
        let pts: Vec<(f64, f64)> = svg
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap()
            .split(' ')
            .map(|p| {
                let (a, b) = p.split_once(',').unwrap();
                (a.parse().unwrap(), b.parse().unwrap())
            })
            .collect();
        let slope = |i: usize| (pts[i + 1].1 - pts[i].1) / (pts[i + 1].0 - pts[i].0);
        for i in 0..pts.len() - 1 {
            assert!((slope(i) - slope(0)).abs() < 0.05 * slope(0).abs());
        }
    }

    #[test]
    fn errors_and_determinism() {
        assert!(render_svg("x", &[], Scale::Linear).is_err());
        let s = [Series::new("a<b", vec![0.0, 1.0, 2.0], vec![3.0, 1.0, 2.0]), Series::new("c", vec![0.0, 2.0], vec![0.5, 0.5])];
        assert_eq!(render_svg("x", &s, Scale::Linear).unwrap(), render_svg("x", &s, Scale::Linear).unwrap());
        assert!(render_svg("x", &s, Scale::Linear).unwrap().contains("a&lt;b"));
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_plot("x", &s, Scale::Linear, &dir.path().join("missing/dir/p.svg")).is_err());
        emit_plot("x", &s, Scale::Linear, &dir.path().join("p.svg")).unwrap();
    }
}
