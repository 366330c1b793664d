//! Deterministic CSV emission and self-contained SVG log-log plots.
//!
//! CSV files are UTF-8, comma separated, LF line endings, one header row,
//! floats printed with 17 significant digits so they round-trip. The SVG
//! plots carry their own axes, markers, legend, and slope annotations; no
//! external assets.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// Round-trip-safe float: one leading digit plus 16 decimals.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV table accumulated row by row, written once.
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>, I: IntoIterator<Item = S>>(header: I) -> Self {
        CsvTable {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row<S: Into<String>, I: IntoIterator<Item = S>>(&mut self, row: I) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        assert_eq!(row.len(), self.header.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.render().as_bytes())
    }
}

/// One plotted series with optional legend annotation (slope).
pub struct Series {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub annotation: Option<String>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 560.0;
const MARGIN_L: f64 = 86.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 48.0;
const MARGIN_B: f64 = 64.0;

fn decades(lo: f64, hi: f64) -> Vec<i32> {
    let a = lo.log10().floor() as i32;
    let b = hi.log10().ceil() as i32;
    (a..=b).collect()
}

/// Render a log-log plot of the series. Returns the SVG document.
pub fn loglog_svg(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let mut xmin = f64::INFINITY;
    let mut xmax: f64 = 0.0;
    let mut ymin = f64::INFINITY;
    let mut ymax: f64 = 0.0;
    for s in series {
        for (&x, &y) in s.xs.iter().zip(&s.ys) {
            if x > 0.0 && y > 0.0 {
                xmin = xmin.min(x);
                xmax = xmax.max(x);
                ymin = ymin.min(y);
                ymax = ymax.max(y);
            }
        }
    }
    if !(xmin.is_finite() && ymin.is_finite()) {
        xmin = 1e-2;
        xmax = 1.0;
        ymin = 1e-2;
        ymax = 1.0;
    }
    // pad one tenth of a decade on each side
    let (lx0, lx1) = (xmin.log10() - 0.1, xmax.log10() + 0.1);
    let (ly0, ly1) = (ymin.log10() - 0.1, ymax.log10() + 0.1);
    let px = |x: f64| MARGIN_L + (x.log10() - lx0) / (lx1 - lx0) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| {
        HEIGHT - MARGIN_B - (y.log10() - ly0) / (ly1 - ly0) * (HEIGHT - MARGIN_T - MARGIN_B)
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(
        svg,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"26\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        xml_escape(title)
    );

    // frame
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>",
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    );

    // decade grid and tick labels
    for d in decades(10f64.powf(lx0), 10f64.powf(lx1)) {
        let x = 10f64.powi(d);
        if x.log10() < lx0 || x.log10() > lx1 {
            continue;
        }
        let xp = px(x);
        let _ = writeln!(
            svg,
            "<line x1=\"{xp}\" y1=\"{MARGIN_T}\" x2=\"{xp}\" y2=\"{}\" stroke=\"#ddd\"/>",
            HEIGHT - MARGIN_B
        );
        let _ = writeln!(
            svg,
            "<text x=\"{xp}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">1e{d}</text>",
            HEIGHT - MARGIN_B + 18.0
        );
    }
    for d in decades(10f64.powf(ly0), 10f64.powf(ly1)) {
        let y = 10f64.powi(d);
        if y.log10() < ly0 || y.log10() > ly1 {
            continue;
        }
        let yp = py(y);
        let _ = writeln!(
            svg,
            "<line x1=\"{MARGIN_L}\" y1=\"{yp}\" x2=\"{}\" y2=\"{yp}\" stroke=\"#ddd\"/>",
            WIDTH - MARGIN_R
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">1e{d}</text>",
            MARGIN_L - 8.0,
            yp + 4.0
        );
    }

    // axis labels
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 16.0,
        xml_escape(xlabel)
    );
    let _ = writeln!(
        svg,
        "<text x=\"20\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 {})\">{}</text>",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        xml_escape(ylabel)
    );

    // series
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> =
            s.xs.iter()
                .zip(&s.ys)
                .filter(|(&x, &y)| x > 0.0 && y > 0.0)
                .map(|(&x, &y)| (px(x), py(y)))
                .collect();
        if pts.len() >= 2 {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>",
                path.join(" ")
            );
        }
        for &(x, y) in &pts {
            marker(&mut svg, k, x, y, color);
        }
    }

    // legend
    let legend_x = MARGIN_L + 12.0;
    let mut legend_y = MARGIN_T + 18.0;
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        marker(&mut svg, k, legend_x, legend_y - 4.0, color);
        let text = match &s.annotation {
            Some(a) => format!("{} ({})", s.label, a),
            None => s.label.clone(),
        };
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            legend_x + 12.0,
            legend_y,
            xml_escape(&text)
        );
        legend_y += 18.0;
    }

    svg.push_str("</svg>\n");
    svg
}

fn marker(svg: &mut String, k: usize, x: f64, y: f64, color: &str) {
    let _ = match k % 4 {
        0 => writeln!(
            svg,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3.4\" fill=\"{color}\"/>"
        ),
        1 => writeln!(
            svg,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"6\" height=\"6\" fill=\"{color}\"/>",
            x - 3.0,
            y - 3.0
        ),
        2 => writeln!(
            svg,
            "<polygon points=\"{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}\" fill=\"{color}\"/>",
            x,
            y - 4.0,
            x - 3.6,
            y + 3.0,
            x + 3.6,
            y + 3.0
        ),
        _ => writeln!(
            svg,
            "<polygon points=\"{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}\" fill=\"{color}\"/>",
            x,
            y - 4.2,
            x + 4.2,
            y,
            x,
            y + 4.2,
            x - 4.2,
            y
        ),
    };
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_seventeen_digits() {
        for &v in &[
            1.0 / 3.0,
            std::f64::consts::PI,
            1.2345678901234567e-13,
            -7.5,
            0.0,
        ] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v, back, "{s}");
        }
    }

    #[test]
    fn csv_has_header_and_lf_endings() {
        let mut t = CsvTable::new(["a", "b"]);
        t.push_row([fmt_f64(1.0), fmt_f64(0.5)]);
        let s = t.render();
        assert!(s.starts_with("a,b\n"));
        assert!(!s.contains('\r'));
        assert_eq!(s.lines().count(), 2);
    }

    #[test]
    fn svg_is_self_contained_and_small() {
        let series = vec![
            Series {
                label: "sgfem p=1".into(),
                xs: vec![0.1, 0.05, 0.025],
                ys: vec![1e-2, 5e-3, 2.5e-3],
                annotation: Some("slope 1.00".into()),
            },
            Series {
                label: "fem p=1".into(),
                xs: vec![0.1, 0.05, 0.025],
                ys: vec![3e-2, 2.1e-2, 1.5e-2],
                annotation: Some("slope 0.50".into()),
            },
        ];
        let svg = loglog_svg("errors vs h", "h", "error", &series);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(!svg.contains("href"));
        assert!(svg.len() < 2_000_000);
        assert!(svg.contains("slope 1.00"));
    }
}
