use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use qnr_core::Point2;
use serde::Serialize;

use crate::CliError;

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| io_error(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }
}

/// Header line plus one comma-separated row per entry; `None` cells stay empty.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<Option<f64>>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| c.map_or_else(String::new, |v| format!("{v:?}"))).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn point_csv(points: &[Point2]) -> String {
    csv(&["a", "b"], points.iter().map(|p| vec![Some(p.x), Some(p.y)]))
}

/// Minimal SVG canvas in bild coordinates, `b` pointing up.
pub struct Svg {
    body: String,
    x0: f64,
    y1: f64,
    scale: f64,
    width: f64,
    height: f64,
}

impl Svg {
    pub fn new(bounds: &[Point2]) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in bounds {
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
        }
        let pad = 0.05 * (x1 - x0).max(y1 - y0).max(1e-9);
        let (x0, x1, y0, y1) = (x0 - pad, x1 + pad, y0 - pad, y1 + pad);
        let scale = 600.0 / (x1 - x0).max(y1 - y0);
        Self {
            body: String::new(),
            x0,
            y1,
            scale,
            width: (x1 - x0) * scale,
            height: (y1 - y0) * scale,
        }
    }

    fn map(&self, p: Point2) -> (f64, f64) {
        ((p.x - self.x0) * self.scale, (self.y1 - p.y) * self.scale)
    }

    pub fn polygon(&mut self, points: &[Point2], fill: &str, stroke: &str, opacity: f64) {
        if points.is_empty() {
            return;
        }
        let mut d = String::new();
        for (k, &p) in points.iter().enumerate() {
            let (x, y) = self.map(p);
            let _ = write!(d, "{}{x:.3},{y:.3} ", if k == 0 { "M" } else { "L" });
        }
        d.push('Z');
        let _ = writeln!(
            self.body,
            r#"<path d="{d}" fill="{fill}" fill-opacity="{opacity}" stroke="{stroke}" stroke-width="1"/>"#
        );
    }

    pub fn dots(&mut self, points: &[Point2], color: &str) {
        for &p in points {
            let (x, y) = self.map(p);
            let _ = writeln!(self.body, r#"<circle cx="{x:.3}" cy="{y:.3}" r="1" fill="{color}"/>"#);
        }
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.3} {h:.3}\">\n{body}</svg>\n",
            w = self.width,
            h = self.height,
            body = self.body
        )
    }
}
