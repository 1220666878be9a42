//! Error grids over the training box and their CSV / PGM / JSON exports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Domain;
use super::target::target_eval;
use crate::error::{Error, Result};
use crate::numeric::Vector;

/// `‖model(x) − T(x)‖₂` at every node of a uniform grid.
///
/// Cells are stored row-major: `x` varies fastest, rows run from the lower
/// to the upper `y` bound. Both box corners are grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub resolution: usize,
    pub points: Vec<[f64; 2]>,
    pub errors: Vec<f64>,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub resolution: usize,
    pub mean: f64,
    pub max: f64,
    pub domain: Domain,
}

fn axis(lo: f64, hi: f64, res: usize, i: usize) -> f64 {
    if i + 1 == res {
        hi
    } else {
        lo + (hi - lo) * i as f64 / (res - 1) as f64
    }
}

pub fn eval_grid<F>(model: F, resolution: usize, domain: &Domain) -> Result<GridReport>
where
    F: Fn(&[f64]) -> Result<Vector>,
{
    if resolution < 2 {
        return Err(Error::invalid(format!("grid resolution must be at least 2, got {resolution}")));
    }
    domain.validate()?;
    if domain.dim() != 2 {
        return Err(Error::dims("eval_grid domain", 2, domain.dim()));
    }
    let mut points = Vec::with_capacity(resolution * resolution);
    let mut errors = Vec::with_capacity(resolution * resolution);
    for j in 0..resolution {
        let y = axis(domain.lower[1], domain.upper[1], resolution, j);
        for i in 0..resolution {
            let x = axis(domain.lower[0], domain.upper[0], resolution, i);
            let p = [x, y];
            let out = model(&p)?;
            let t = target_eval(&p)?;
            if out.len() != 2 {
                return Err(Error::dims("eval_grid model output", 2, out.len()));
            }
            let e = ((out[0] - t[0]).powi(2) + (out[1] - t[1]).powi(2)).sqrt();
            points.push(p);
            errors.push(e);
        }
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let max = errors.iter().copied().fold(0.0, f64::max);
    Ok(GridReport {
        resolution,
        points,
        errors,
        mean,
        max,
    })
}

impl GridReport {
    pub fn summary(&self, domain: &Domain) -> GridSummary {
        GridSummary {
            resolution: self.resolution,
            mean: self.mean,
            max: self.max,
            domain: domain.clone(),
        }
    }

    /// `x,y,error` rows with 9 significant digits, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,error\n");
        for (p, e) in self.points.iter().zip(&self.errors) {
            writeln!(s, "{:.8e},{:.8e},{:.8e}", p[0], p[1], e).expect("writing to a String");
        }
        s
    }

    /// Plain `P2` grayscale image, errors mapped linearly from `[0, max]` to
    /// `0..=255`. The top image row is the upper `y` bound.
    pub fn to_pgm(&self) -> String {
        let r = self.resolution;
        let mut s = format!("P2\n{r} {r}\n255\n");
        for j in (0..r).rev() {
            let row: Vec<String> = (0..r)
                .map(|i| {
                    let e = self.errors[j * r + i];
                    let px = if self.max > 0.0 { (255.0 * e / self.max).round() as u32 } else { 0 };
                    px.min(255).to_string()
                })
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Parses CSV written by [`GridReport::to_csv`] into `(x, y, error)` rows.
pub fn parse_grid_csv(text: &str) -> Result<Vec<[f64; 3]>> {
    let mut lines = text.lines();
    if lines.next() != Some("x,y,error") {
        return Err(Error::Parse("grid csv: missing `x,y,error` header".into()));
    }
    lines
        .enumerate()
        .map(|(n, line)| {
            let cells = line
                .split(',')
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("grid csv line {}: {e}", n + 2)))?;
            <[f64; 3]>::try_from(cells)
                .map_err(|c| Error::Parse(format!("grid csv line {}: expected 3 fields, got {}", n + 2, c.len())))
        })
        .collect()
}

/// Output locations for [`export_report`]; `None` skips that file.
#[derive(Debug, Clone, Default)]
pub struct ReportPaths {
    pub csv: Option<PathBuf>,
    pub pgm: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl ReportPaths {
    /// `grid.csv`, `grid.pgm` and `grid_summary.json` under `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        ReportPaths {
            csv: Some(dir.join("grid.csv")),
            pgm: Some(dir.join("grid.pgm")),
            summary: Some(dir.join("grid_summary.json")),
        }
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn export_report(report: &GridReport, domain: &Domain, paths: &ReportPaths) -> Result<()> {
    if let Some(p) = &paths.csv {
        write_file(p, &report.to_csv())?;
    }
    if let Some(p) = &paths.pgm {
        write_file(p, &report.to_pgm())?;
    }
    if let Some(p) = &paths.summary {
        let text = serde_json::to_string_pretty(&report.summary(domain)).map_err(|e| Error::Parse(e.to_string()))?;
        write_file(p, &(text + "\n"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(x: &[f64]) -> Result<Vector> {
        target_eval(x)
    }

    #[test]
    fn exact_model_has_zero_grid() {
        let g = eval_grid(exact, 16, &Domain::unit_square()).unwrap();
        assert!(g.errors.iter().all(|&e| e == 0.0));
        assert_eq!((g.mean, g.max), (0.0, 0.0));
        assert!(g.to_pgm().lines().skip(3).all(|l| l.split(' ').all(|p| p == "0")));
    }

    #[test]
    fn layout_and_corners() {
        let g = eval_grid(|_| Ok(Vector::zeros(2)), 3, &Domain::unit_square()).unwrap();
        assert_eq!(g.points.len(), 9);
        assert_eq!(g.points[0], [0.0, 0.0]);
        assert_eq!(g.points[1], [0.5, 0.0]);
        assert_eq!(g.points[3], [0.0, 0.5]);
        assert_eq!(g.points[8], [1.0, 1.0]);
        assert!((g.errors[8] - (5.5f64.powi(2) + 2.5f64.powi(2)).sqrt()).abs() < 1e-15);
        assert_eq!(g.to_csv().lines().count(), 10);
        assert!(eval_grid(exact, 1, &Domain::unit_square()).is_err());
    }

    #[test]
    fn summary_mean_is_arithmetic_mean() {
        let g = eval_grid(|x| Ok(Vector::from_raw(vec![x[1], x[0] * x[0]])), 17, &Domain::unit_square()).unwrap();
        // Compensated summation as an independent reference.
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for &e in &g.errors {
            let y = e - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        let mean = sum / g.errors.len() as f64;
        assert!((g.mean - mean).abs() / mean < 1e-15);
        assert_eq!(g.max, g.errors.iter().copied().fold(f64::MIN, f64::max));
    }

    #[test]
    fn csv_roundtrip_at_nine_digits() {
        let g = eval_grid(|x| Ok(Vector::from_raw(vec![x[0].sin(), 1.0 / 3.0])), 5, &Domain::unit_square()).unwrap();
        let rows = parse_grid_csv(&g.to_csv()).unwrap();
        assert_eq!(rows.len(), 25);
        for (r, (p, e)) in rows.iter().zip(g.points.iter().zip(&g.errors)) {
            for (a, b) in [(r[0], p[0]), (r[1], p[1]), (r[2], *e)] {
                assert!((a - b).abs() <= 5e-9 * b.abs(), "{a} vs {b}");
            }
        }
        assert!(parse_grid_csv("a,b\n").is_err());
        assert!(parse_grid_csv("x,y,error\n1,2\n").is_err());
    }

    #[test]
    fn pgm_scaling() {
        let g = eval_grid(|_| Ok(Vector::zeros(2)), 4, &Domain::unit_square()).unwrap();
        let pgm = g.to_pgm();
        let mut lines = pgm.lines();
        assert_eq!(lines.next(), Some("P2"));
        assert_eq!(lines.next(), Some("4 4"));
        assert_eq!(lines.next(), Some("255"));
        let top: Vec<u32> = lines.next().unwrap().split(' ').map(|v| v.parse().unwrap()).collect();
        assert_eq!(top.len(), 4);
        assert_eq!(top[3], 255);
        assert_eq!(pgm.lines().last().unwrap().split(' ').next(), Some("0"));
    }

    #[test]
    fn export_writes_files_and_reports_paths() {
        let dir = tempfile::tempdir().unwrap();
        let g = eval_grid(exact, 3, &Domain::unit_square()).unwrap();
        export_report(&g, &Domain::unit_square(), &ReportPaths::in_dir(dir.path())).unwrap();
        for f in ["grid.csv", "grid.pgm", "grid_summary.json"] {
            assert!(dir.path().join(f).exists());
        }
        let bad = ReportPaths {
            csv: Some(dir.path().join("missing").join("grid.csv")),
            ..ReportPaths::default()
        };
        let err = export_report(&g, &Domain::unit_square(), &bad).unwrap_err();
        assert!(err.to_string().contains("missing"));
    }
}
