//! Plain CSV with full-precision numbers and UNIX line endings.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, CliResult};
use crate::pipeline::RunOutput;

/// 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn render(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_num(*v)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn trajectory_header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("x{i}")));
    h.extend((1..=m).map(|i| format!("u{i}")));
    h.push("minEigP".into());
    h.push("runningCost".into());
    h
}

/// `t, x1..xn, u1..um, minEigP, runningCost`, one row per node.
pub fn render_run(out: &RunOutput) -> String {
    let traj = &out.trajectory;
    let n = traj.states[0].len();
    let m = traj.controls[0].len();
    let rows: Vec<Vec<f64>> = traj
        .grid
        .nodes()
        .enumerate()
        .map(|(k, t)| {
            let mut row = vec![t];
            row.extend(traj.states[k].iter());
            row.extend(traj.controls[k].iter());
            row.push(out.min_p[k]);
            row.push(out.running_costs[k]);
            row
        })
        .collect();
    render(&trajectory_header(n, m), &rows)
}

pub fn write(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn parse(text: &str) -> CliResult<Table> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::Config("empty CSV".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let rows = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let row: Vec<f64> = l
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| CliError::Config(format!("bad CSV cell `{c}`: {e}"))))
                .collect::<CliResult<_>>()?;
            if row.len() != header.len() {
                return Err(CliError::Config("ragged CSV row".into()));
            }
            Ok(row)
        })
        .collect::<CliResult<_>>()?;
    Ok(Table { header, rows })
}

pub fn read(path: &Path) -> CliResult<Table> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, -2.268_928_027_592_628_5, 1e-300, 6.02e23, f64::INFINITY] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
        assert!(fmt_num(f64::NAN).parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn parse_render() {
        let text = render(&["t".into(), "x1".into()], &[vec![0.0, 1.5], vec![0.5, -2.0]]);
        assert!(!text.contains('\r'));
        let t = parse(&text).unwrap();
        assert_eq!(t.column("x1").unwrap(), vec![1.5, -2.0]);
        assert!(parse("a,b\n1\n").is_err());
    }
}
