//! Minimal SVG line charts: axes with ticks, one polyline per series and a
//! legend.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub series: Vec<Series>,
}

impl Chart {
    /// Series for columns `y_columns` of a CSV table against column `x_column`.
    /// Empty or non-numeric cells are skipped.
    pub fn from_csv(title: &str, csv: &str, x_column: &str, y_columns: &[&str]) -> Option<Self> {
        let mut lines = csv.lines();
        let header: Vec<&str> = lines.next()?.split(',').collect();
        let xi = header.iter().position(|h| *h == x_column)?;
        let ys: Vec<usize> = y_columns
            .iter()
            .map(|c| header.iter().position(|h| h == c))
            .collect::<Option<_>>()?;
        let mut series: Vec<Series> = y_columns
            .iter()
            .map(|c| Series {
                name: (*c).to_owned(),
                points: Vec::new(),
            })
            .collect();
        for line in lines {
            let cells: Vec<&str> = line.split(',').collect();
            let Some(x) = cells.get(xi).and_then(|c| c.parse::<f64>().ok()) else {
                continue;
            };
            for (s, &yi) in series.iter_mut().zip(&ys) {
                if let Some(y) = cells.get(yi).and_then(|c| c.parse::<f64>().ok()) {
                    if y.is_finite() {
                        s.points.push((x, y));
                    }
                }
            }
        }
        Some(Self {
            title: title.to_owned(),
            x_label: x_column.to_owned(),
            series,
        })
    }
}

/// Tick positions at 1, 2 or 5 times a power of ten, and the decimals needed
/// to print them.
fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let raw = (hi - lo) / 5.0;
    let magnitude = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * magnitude)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * magnitude);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), decimals)
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn render_svg(chart: &Chart) -> String {
    let all = || chart.series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = padded_range(all().map(|p| p.0));
    let (y0, y1) = padded_range(all().map(|p| p.1));
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&chart.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let (xt, xd) = ticks(x0, x1);
    for x in xt {
        let px = sx(x);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{b2}" stroke="black"/><text x="{px:.2}" y="{t}" text-anchor="middle">{x:.xd$}</text>"#,
            b = TOP + plot_h,
            b2 = TOP + plot_h + 5.0,
            t = TOP + plot_h + 18.0,
        );
    }
    let (yt, yd) = ticks(y0, y1);
    for y in yt {
        let py = sy(y);
        let _ = writeln!(
            s,
            r#"<line x1="{l2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{t}" y="{ty:.2}" text-anchor="end">{y:.yd$}</text>"#,
            l2 = LEFT - 5.0,
            t = LEFT - 8.0,
            ty = py + 4.0,
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0,
        escape(&chart.x_label)
    );

    for (i, series) in chart.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = series
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if pts.len() > 1 {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                pts.join(" ")
            );
        }
        for p in &pts {
            let (cx, cy) = p.split_once(',').expect("formatted pair");
            let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>"#);
        }
        let ly = TOP + 15.0 + 16.0 * i as f64;
        let lx = WIDTH - RIGHT - 170.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&series.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_steps_are_round() {
        let (t, d) = ticks(0.0, 1.0);
        assert_eq!(t.len(), 6);
        assert_eq!(d, 1);
        let (t, d) = ticks(-3.0, 47.0);
        assert_eq!(t.first(), Some(&0.0));
        assert_eq!(d, 0);
    }

    #[test]
    fn chart_from_table() {
        let csv = "p,a,b\n0,1,\n1,2,5\nx,3,4\n";
        let c = Chart::from_csv("t", csv, "p", &["a", "b"]).unwrap();
        assert_eq!(c.series[0].points, vec![(0.0, 1.0), (1.0, 2.0)]);
        assert_eq!(c.series[1].points, vec![(1.0, 5.0)]);
        assert!(Chart::from_csv("t", csv, "p", &["zz"]).is_none());

        let svg = render_svg(&c);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn empty_chart_renders() {
        let c = Chart {
            title: "a < b".into(),
            x_label: "x".into(),
            series: vec![],
        };
        assert!(render_svg(&c).contains("a &lt; b"));
    }
}
