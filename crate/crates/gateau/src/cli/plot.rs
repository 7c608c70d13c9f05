use std::fmt::Write;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Csv {
        file: String,
        line: usize,
        message: String,
    },
    #[error("no data rows in {0}")]
    Empty(String),
}

/// One rating curve: (iteration, rating, sigma) points.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64, f64)>,
}

/// Reads a ratings CSV. Accepts `iteration,rating,sigma` (the series is
/// named after the file stem) or `series,iteration,rating,sigma`.
pub fn read_series(path: &Path) -> Result<Vec<Series>, PlotError> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| PlotError::Io {
        path: file.clone(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(PlotError::Empty(file));
    };
    let labeled = match header.trim() {
        "iteration,rating,sigma" => false,
        "series,iteration,rating,sigma" => true,
        other => {
            return Err(PlotError::Csv {
                file,
                line: 1,
                message: format!("unexpected header '{other}'"),
            })
        }
    };
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into());
    let mut series: Vec<Series> = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = if labeled { 4 } else { 3 };
        if fields.len() != expected {
            return Err(PlotError::Csv {
                file,
                line: lineno + 1,
                message: format!("expected {expected} fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64, PlotError> {
            s.trim().parse().map_err(|_| PlotError::Csv {
                file: file.clone(),
                line: lineno + 1,
                message: format!("bad number '{s}'"),
            })
        };
        let (label, rest) = if labeled {
            (fields[0].to_string(), &fields[1..])
        } else {
            (stem.clone(), &fields[..])
        };
        let point = (parse(rest[0])?, parse(rest[1])?, parse(rest[2])?);
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push(point),
            None => series.push(Series {
                label,
                points: vec![point],
            }),
        }
    }
    if series.is_empty() {
        return Err(PlotError::Empty(file));
    }
    Ok(series)
}

/// The merged CSV accompanying the SVG: `series,iteration,rating,sigma`.
pub fn merged_csv(series: &[Series]) -> String {
    let mut out = String::from("series,iteration,rating,sigma\n");
    for s in series {
        let mut points = s.points.clone();
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (x, y, sigma) in points {
            let _ = writeln!(out, "{},{},{},{}", s.label, fmt(x), fmt(y), fmt(sigma));
        }
    }
    out
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];
const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 50.0;

fn fmt(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() {
        "0".into()
    } else {
        s.to_string()
    }
}

/// Hand-emitted SVG: axes with ticks, one shaded two-sigma band and
/// polyline per series, and a legend. Output is bit-stable for a given
/// input.
pub fn render_svg(series: &[Series]) -> String {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for &(x, y, sigma) in &s.points {
            xs.push(x);
            ys.push(y - 2.0 * sigma);
            ys.push(y + 2.0 * sigma);
        }
    }
    let (x_min, x_max) = bounds(&xs);
    let (y_min, y_max) = bounds(&ys);
    let sx = move |x: f64| {
        MARGIN_L + (x - x_min) / (x_max - x_min).max(1e-12) * (WIDTH - MARGIN_L - MARGIN_R)
    };
    let sy = move |y: f64| {
        HEIGHT - MARGIN_B - (y - y_min) / (y_max - y_min).max(1e-12) * (HEIGHT - MARGIN_T - MARGIN_B)
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );

    // Axes.
    let _ = writeln!(
        svg,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        fmt(MARGIN_L),
        fmt(HEIGHT - MARGIN_B),
        fmt(WIDTH - MARGIN_R),
        fmt(HEIGHT - MARGIN_B)
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        fmt(MARGIN_L),
        fmt(MARGIN_T),
        fmt(MARGIN_L),
        fmt(HEIGHT - MARGIN_B)
    );
    for t in ticks(x_min, x_max) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>"#,
            fmt(x),
            fmt(HEIGHT - MARGIN_B),
            fmt(HEIGHT - MARGIN_B + 5.0)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
            fmt(x),
            fmt(HEIGHT - MARGIN_B + 20.0),
            fmt(t)
        );
    }
    for t in ticks(y_min, y_max) {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{1}" y1="{0}" x2="{2}" y2="{0}" stroke="black"/>"#,
            fmt(y),
            fmt(MARGIN_L - 5.0),
            fmt(MARGIN_L)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{}</text>"#,
            fmt(MARGIN_L - 8.0),
            fmt(y + 4.0),
            fmt(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">iteration</text>"#,
        fmt((MARGIN_L + WIDTH - MARGIN_R) / 2.0),
        fmt(HEIGHT - 10.0)
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 15 {})">rating</text>"#,
        fmt((MARGIN_T + HEIGHT - MARGIN_B) / 2.0),
        fmt((MARGIN_T + HEIGHT - MARGIN_B) / 2.0)
    );

    // Bands and lines.
    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut points = s.points.clone();
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let mut band = String::new();
        for &(x, y, sigma) in &points {
            let _ = write!(band, "{},{} ", fmt(sx(x)), fmt(sy(y + 2.0 * sigma)));
        }
        for &(x, y, sigma) in points.iter().rev() {
            let _ = write!(band, "{},{} ", fmt(sx(x)), fmt(sy(y - 2.0 * sigma)));
        }
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );

        let mut line = String::new();
        for &(x, y, _) in &points {
            let _ = write!(line, "{},{} ", fmt(sx(x)), fmt(sy(y)));
        }
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.trim_end()
        );
    }

    // Legend.
    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let y = MARGIN_T + 14.0 + idx as f64 * 18.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="12" height="12" fill="{color}"/>"#,
            fmt(MARGIN_L + 10.0),
            fmt(y - 10.0)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12">{}</text>"#,
            fmt(MARGIN_L + 28.0),
            fmt(y),
            xml_escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        (min - 1.0, max + 1.0)
    } else {
        (min, max)
    }
}

/// Around six round-number ticks spanning [min, max].
fn ticks(min: f64, max: f64) -> Vec<f64> {
    let span = (max - min).max(1e-12);
    let raw_step = span / 6.0;
    let magnitude = 10f64.powf(raw_step.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * magnitude)
        .find(|&s| s >= raw_step)
        .unwrap_or(10.0 * magnitude);
    let mut t = (min / step).ceil() * step;
    let mut out = Vec::new();
    while t <= max + 1e-9 {
        out.push(t);
        t += step;
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_series_renders_line_and_band() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run_a.csv");
        std::fs::write(&path, "iteration,rating,sigma\n1,1000,20\n2,1100,18\n3,1150,15\n")
            .unwrap();
        let series = read_series(&path).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].label, "run_a");
        let svg = render_svg(&series);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<polygon").count(), 1);
        // Bit-stable output.
        assert_eq!(svg, render_svg(&series));
    }

    #[test]
    fn two_series_get_a_legend() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("both.csv");
        std::fs::write(
            &path,
            "series,iteration,rating,sigma\nfirst,1,900,30\nfirst,2,1000,25\nsecond,1,1100,30\nsecond,2,1050,25\n",
        )
        .unwrap();
        let series = read_series(&path).unwrap();
        assert_eq!(series.len(), 2);
        let svg = render_svg(&series);
        assert!(svg.contains(">first</text>"));
        assert!(svg.contains(">second</text>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        let merged = merged_csv(&series);
        assert_eq!(merged.lines().count(), 5);
    }

    #[test]
    fn empty_csv_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "iteration,rating,sigma\n").unwrap();
        assert!(matches!(read_series(&path), Err(PlotError::Empty(_))));
        std::fs::write(&path, "").unwrap();
        assert!(matches!(read_series(&path), Err(PlotError::Empty(_))));
    }
}
