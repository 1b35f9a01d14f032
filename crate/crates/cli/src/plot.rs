//! Minimal static SVG line charts for sweep results.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 120.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub struct Series {
    pub name: String,
    /// `None` marks a failed point; the line breaks there.
    pub points: Vec<(f64, Option<f64>)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Error (0 to 1) against x, with a log x axis when every x is positive and
/// the values span more than a factor of ten.
pub fn line_chart(title: &str, x_label: &str, series: &[Series]) -> String {
    let xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    let (mut lo, mut hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let log_x = lo > 0.0 && hi / lo > 10.0;
    let tx = |x: f64| if log_x { x.log10() } else { x };
    if xs.is_empty() {
        (lo, hi) = (0.0, 1.0);
    }
    let (mut x0, mut x1) = (tx(lo), tx(hi));
    if x1 - x0 <= 0.0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let y_max = series
        .iter()
        .flat_map(|s| s.points.iter().filter_map(|p| p.1))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let y_top = if y_max <= 0.5 { 0.5 } else { 1.0 };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (tx(x) - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| TOP + (1.0 - y / y_top) * plot_h;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    )
    .unwrap();

    for i in 0..=4 {
        let y = y_top * i as f64 / 4.0;
        let yy = py(y);
        writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{yy:.1}" x2="{}" y2="{yy:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{y:.3}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            yy + 4.0
        )
        .unwrap();
    }
    let mut ticks: Vec<f64> = xs.clone();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for x in ticks {
        let xx = px(x);
        let label = if log_x { format!("{x:e}") } else { format!("{x}") };
        writeln!(
            svg,
            r#"<line x1="{xx:.1}" y1="{}" x2="{xx:.1}" y2="{}" stroke="black"/><text x="{xx:.1}" y="{}" text-anchor="middle">{}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 18.0,
            escape(&label)
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">clustering error</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    )
    .unwrap();

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts: Vec<(f64, Option<f64>)> = s.points.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, svg: &mut String| {
            if run.len() > 1 {
                writeln!(
                    svg,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                    run.join(" ")
                )
                .unwrap();
            }
            run.clear();
        };
        for &(x, y) in &pts {
            match y {
                Some(y) => {
                    let (xx, yy) = (px(x), py(y));
                    run.push(format!("{xx:.1},{yy:.1}"));
                    writeln!(svg, r#"<circle cx="{xx:.1}" cy="{yy:.1}" r="3" fill="{color}"/>"#).unwrap();
                }
                None => flush(&mut run, &mut svg),
            }
        }
        flush(&mut run, &mut svg);
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 12.0;
        writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.name)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_unbroken_run() {
        let s = Series {
            name: "a<1".into(),
            points: vec![(1e-3, Some(0.2)), (1e-2, None), (1e-1, Some(0.1)), (1.0, Some(0.0))],
        };
        let svg = line_chart("t", "lambda", &[s]);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("a&lt;1"));
        assert!(svg.contains("1e-3"));
    }

    #[test]
    fn single_point_is_drawn() {
        let s = Series {
            name: "x".into(),
            points: vec![(0.5, Some(0.0))],
        };
        let svg = line_chart("t", "lambda", &[s]);
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(!svg.contains("NaN"));
    }
}
