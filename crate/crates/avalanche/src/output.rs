//! CSV / JSON / SVG output helpers.
//!
//! Every data file starts with a comment line carrying the schema version
//! and the config hash, followed by a CSV header row. Formatting is fully
//! deterministic so equal configs produce byte-identical files.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

pub struct CsvFile {
    path: PathBuf,
    buf: String,
}

impl CsvFile {
    pub fn new(path: PathBuf, schema: &str, config_hash: &str, header: &[&str]) -> Self {
        let mut buf = String::new();
        let _ = writeln!(buf, "# schema={schema} config={config_hash}");
        let _ = writeln!(buf, "{}", header.join(","));
        Self { path, buf }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.buf, "{}", fields.join(","));
    }

    pub fn finish(self) -> Result<PathBuf, OutputError> {
        write_bytes(&self.path, self.buf.as_bytes())?;
        Ok(self.path)
    }
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "nan".to_string()
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| OutputError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    let mut file = std::fs::File::create(path).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(bytes).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OutputError> {
    let text = serde_json::to_string_pretty(value)?;
    write_bytes(path, format!("{text}\n").as_bytes())
}

/// Minimal line plot: one polyline per series on a shared x axis.
pub fn line_svg(
    xs: &[f64],
    series: &[(&str, &[f64])],
    x_label: &str,
    y_label: &str,
) -> String {
    const W: f64 = 720.0;
    const H: f64 = 420.0;
    const M: f64 = 50.0;
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let x_min = xs.iter().cloned().fold(f64::MAX, f64::min);
    let x_max = xs.iter().cloned().fold(f64::MIN, f64::max);
    let mut y_min = f64::MAX;
    let mut y_max = f64::MIN;
    for (_, ys) in series {
        for &y in ys.iter() {
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if y_max <= y_min {
        y_max = y_min + 1.0;
    }
    let sx = |x: f64| M + (x - x_min) / (x_max - x_min).max(1e-300) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y_min) / (y_max - y_min) * (H - 2.0 * M);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <line x1=\"{M}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <text x=\"{xc}\" y=\"{yl}\" text-anchor=\"middle\" font-size=\"14\">{x_label}</text>\n\
         <text x=\"14\" y=\"{ymid}\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 14 {ymid})\">{y_label}</text>\n",
        y0 = H - M,
        x1 = W - M,
        xc = W / 2.0,
        yl = H - 12.0,
        ymid = H / 2.0,
    );
    for (i, (name, ys)) in series.iter().enumerate() {
        let color = colors[i % colors.len()];
        let points: String = xs
            .iter()
            .zip(ys.iter())
            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{points}\"/>"
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{name}</text>",
            W - M + 4.0 - 60.0,
            M + 16.0 * (i + 1) as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Category heatmap on a rectangular grid: one colored cell per `(x, y)`
/// point, color chosen by the category index.
pub fn heatmap_svg(
    xs: &[f64],
    ys: &[f64],
    categories: &[usize],
    palette: &[&str],
    x_label: &str,
    y_label: &str,
) -> String {
    const W: f64 = 560.0;
    const H: f64 = 480.0;
    const M: f64 = 50.0;
    let mut ux: Vec<f64> = xs.to_vec();
    ux.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ux.dedup();
    let mut uy: Vec<f64> = ys.to_vec();
    uy.sort_by(|a, b| a.partial_cmp(b).unwrap());
    uy.dedup();
    let cw = (W - 2.0 * M) / ux.len() as f64;
    let ch = (H - 2.0 * M) / uy.len() as f64;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{xc}\" y=\"{yl}\" text-anchor=\"middle\" font-size=\"14\">{x_label}</text>\n\
         <text x=\"14\" y=\"{ymid}\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 14 {ymid})\">{y_label}</text>\n",
        xc = W / 2.0,
        yl = H - 12.0,
        ymid = H / 2.0,
    );
    for ((&x, &y), &cat) in xs.iter().zip(ys.iter()).zip(categories.iter()) {
        let i = ux.iter().position(|&v| v == x).unwrap();
        let j = uy.iter().position(|&v| v == y).unwrap();
        let color = palette[cat % palette.len()];
        let _ = writeln!(
            svg,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{color}\"/>",
            M + i as f64 * cw,
            H - M - (j + 1) as f64 * ch,
            cw,
            ch
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let mut file = CsvFile::new(
            dir.path().join("t.csv"),
            "test-v1",
            "cafe",
            &["a", "b"],
        );
        file.row(&["1".into(), "2".into()]);
        let path = file.finish().unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text, "# schema=test-v1 config=cafe\na,b\n1,2\n");
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let svg = line_svg(&[0.0, 1.0, 2.0], &[("n_c", &[0.0, 1.0, 0.5][..])], "t", "n");
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("polyline"));
    }
}
