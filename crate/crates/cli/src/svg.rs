//! Minimal SVG line plots: one polyline run per stability segment, solid when
//! formally stable and dashed otherwise.

use std::fmt::Write;

pub struct Series {
    pub label: String,
    /// (x, y, stable)
    pub points: Vec<(f64, f64, bool)>,
}

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.filter(|x| x.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        let pad = 0.5 * (1.0 + lo.abs()) * 1e-3;
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

pub fn render(series: &[Series], x_label: &str, y_label: &str, width: u32, height: u32) -> String {
    let (w, h) = (width as f64, height as f64);
    let (left, right, top, bottom) = (70.0, 20.0, 20.0, 50.0 + 18.0 * series.len() as f64);
    let pw = w - left - right;
    let ph = (h - top - bottom).max(40.0);
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = range(all().map(|p| p.0));
    let (y0, y1) = range(all().map(|p| p.1));
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

    let mut out = String::new();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#).unwrap();
    writeln!(out, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#).unwrap();
    writeln!(out, r#"<rect x="{left}" y="{top}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#).unwrap();
    for (x, anchor) in [(x0, "start"), (x1, "end")] {
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="{anchor}">{x:.4}</text>"#, sx(x), top + ph + 14.0).unwrap();
    }
    for y in [y0, y1] {
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{y:.4}</text>"#, left - 4.0, sy(y) + 4.0).unwrap();
    }
    writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#, left + pw / 2.0, top + ph + 30.0, escape(x_label)).unwrap();
    writeln!(
        out,
        r#"<text x="14" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    )
    .unwrap();

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut start = 0;
        while start < s.points.len() {
            let stable = s.points[start].2;
            let mut end = start;
            while end + 1 < s.points.len() && s.points[end + 1].2 == stable {
                end += 1;
            }
            // include the next point so segments join
            let stop = (end + 1).min(s.points.len() - 1);
            let pts: Vec<String> = s.points[start..=stop].iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
            let dash = if stable { "" } else { r#" stroke-dasharray="6,4""# };
            if pts.len() == 1 {
                let p = &s.points[start];
                writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(p.0), sy(p.1)).unwrap();
            } else {
                writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#, pts.join(" ")).unwrap();
            }
            start = end + 1;
        }
        let ly = h - bottom + 44.0 + 18.0 * i as f64;
        writeln!(out, r#"<line x1="{left}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#, ly - 4.0, left + 24.0, ly - 4.0).unwrap();
        writeln!(out, r#"<text x="{:.2}" y="{ly:.2}" font-size="12">{}</text>"#, left + 30.0, escape(&s.label)).unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">solid: stable, dashed: unstable</text>"#,
        left + pw - 4.0,
        top + 14.0
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stability_segments_and_legend() {
        let s = Series { label: "branch 0 <S1xZ2>".into(), points: vec![(0.0, 0.0, true), (1.0, 1.0, true), (2.0, 1.5, false), (3.0, 1.8, false)] };
        let svg = render(&[s], "x", "y", 400, 300);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("stroke-dasharray").count(), 1);
        assert!(svg.contains("&lt;S1xZ2&gt;"));
    }
}
