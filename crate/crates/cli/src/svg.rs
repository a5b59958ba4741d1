//! Minimal static SVG line charts. Series data rides along in
//! machine-readable attributes (`data-series`, `data-points`), and the
//! polyline points are the raw data coordinates under a scaling transform.

use std::fmt::Write as _;

use crate::error::CliError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 48.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

impl LineChart {
    pub fn render(&self) -> Result<String, CliError> {
        let series: Vec<&Series> = self.series.iter().filter(|s| !s.points.is_empty()).collect();
        if series.is_empty() {
            return Err(CliError::Validation(
                "EmptyInput: no data series to plot".into(),
            ));
        }
        let (mut min_x, mut max_x) = (f64::MAX, f64::MIN);
        let (mut min_y, mut max_y) = (f64::MAX, f64::MIN);
        for s in &series {
            for &(x, y) in &s.points {
                if !(x.is_finite() && y.is_finite()) {
                    return Err(CliError::Validation("non-finite plot value".into()));
                }
                min_x = min_x.min(x);
                max_x = max_x.max(x);
                min_y = min_y.min(y);
                max_y = max_y.max(y);
            }
        }
        if max_x - min_x < 1e-12 {
            min_x -= 0.5;
            max_x += 0.5;
        }
        if max_y - min_y < 1e-12 {
            min_y -= 0.5;
            max_y += 0.5;
        }
        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let sx = plot_w / (max_x - min_x);
        let sy = plot_h / (max_y - min_y);

        let mut out = String::new();
        let _ = writeln!(out, "<!-- outbreak-chart v1 -->");
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        // Axes in pixel space.
        let x0 = MARGIN_LEFT;
        let y0 = HEIGHT - MARGIN_BOTTOM;
        let _ = writeln!(
            out,
            r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#,
            WIDTH - MARGIN_RIGHT
        );
        let _ = writeln!(
            out,
            r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{MARGIN_TOP}" stroke="black"/>"#
        );
        let fmt_tick = |v: f64| {
            if v.abs() >= 1000.0 {
                format!("{v:.0}")
            } else {
                format!("{v:.3}")
                    .trim_end_matches('0')
                    .trim_end_matches('.')
                    .to_string()
            }
        };
        let _ = writeln!(
            out,
            r#"<text x="{x0}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            y0 + 16.0,
            fmt_tick(min_x)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
            WIDTH - MARGIN_RIGHT,
            y0 + 16.0,
            fmt_tick(max_x)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y0}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
            x0 - 6.0,
            fmt_tick(min_y)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
            x0 - 6.0,
            MARGIN_TOP + 4.0,
            fmt_tick(max_y)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );

        // Data space group: y axis flipped, raw coordinates preserved.
        let _ = writeln!(
            out,
            r#"<g transform="translate({x0} {y0}) scale({sx} -{sy}) translate({} {})">"#,
            -min_x, -min_y
        );
        for (idx, s) in series.iter().enumerate() {
            let color = PALETTE[idx % PALETTE.len()];
            let points: String = s
                .points
                .iter()
                .map(|(x, y)| format!("{x},{y}"))
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" vector-effect="non-scaling-stroke" data-series="{}" data-points="{points}" points="{points}"/>"#,
                escape(&s.name)
            );
        }
        let _ = writeln!(out, "</g>");

        // Legend.
        for (idx, s) in series.iter().enumerate() {
            let color = PALETTE[idx % PALETTE.len()];
            let y = MARGIN_TOP + 14.0 * idx as f64;
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#,
                WIDTH - MARGIN_RIGHT - 120.0,
                y
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
                WIDTH - MARGIN_RIGHT - 106.0,
                y + 9.0,
                escape(&s.name)
            );
        }
        let _ = writeln!(out, "</svg>");
        Ok(out)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_line_embeds_coordinates() {
        let chart = LineChart {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series {
                name: "s".into(),
                points: vec![(0.0, 0.0), (1.0, 1.0)],
            }],
        };
        let svg = chart.render().unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains(r#"data-points="0,0 1,1""#));
        assert!(svg.contains(r#"points="0,0 1,1""#));
    }

    #[test]
    fn empty_series_is_rejected() {
        let chart = LineChart {
            title: String::new(),
            x_label: String::new(),
            y_label: String::new(),
            series: vec![],
        };
        let err = chart.render().unwrap_err();
        assert!(err.to_string().contains("EmptyInput"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn one_polyline_per_series() {
        let mk = |name: &str| Series {
            name: name.into(),
            points: vec![(0.0, 1.0), (1.0, 2.0), (2.0, 0.5)],
        };
        let chart = LineChart {
            title: "m".into(),
            x_label: "t_o".into(),
            y_label: "auc".into(),
            series: vec![mk("a"), mk("b"), mk("c")],
        };
        let svg = chart.render().unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        for name in ["a", "b", "c"] {
            assert!(svg.contains(&format!(r#"data-series="{name}""#)));
        }
    }
}
