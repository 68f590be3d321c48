//! Plot-ready CSV tables.
//!
//! All pipeline tables share one shape: `# key=value` comment lines with
//! provenance (manifest reference, λ, fit summaries), one header row, then
//! comma-separated data rows. Floats are written with Rust's shortest
//! round-trip formatting, so reading a table back loses nothing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::anomaly::{ScoreRow, ScoreSeries};
use crate::metrology::AllanSeries;
use crate::{Error, Result};

/// A parsed CSV file: comment metadata, column names, numeric rows.
/// Empty fields read back as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub comments: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| {
                Error::Invalid(format!(
                    "no column {name:?}; file has {:?}",
                    self.columns
                ))
            })?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }
}

fn render(comments: &BTreeMap<String, String>, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    for (k, v) in comments {
        let _ = writeln!(out, "# {k}={v}");
    }
    let _ = writeln!(out, "{}", columns.join(","));
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Generic writer used by every table emitter.
pub fn write_table(
    path: &Path,
    comments: &BTreeMap<String, String>,
    columns: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    for row in rows {
        if row.len() != columns.len() {
            return Err(Error::Invalid(format!(
                "row has {} fields for {} columns",
                row.len(),
                columns.len()
            )));
        }
    }
    std::fs::write(path, render(comments, columns, rows))?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<CsvTable> {
    let text = std::fs::read_to_string(path)?;
    let mut comments = BTreeMap::new();
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(body) = line.strip_prefix('#') {
            if let Some((k, v)) = body.trim().split_once('=') {
                comments.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        match &columns {
            None => columns = Some(line.split(',').map(|c| c.trim().to_string()).collect()),
            Some(cols) => {
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() != cols.len() {
                    return Err(Error::Format(format!(
                        "{}:{}: {} fields for {} columns",
                        path.display(),
                        lineno + 1,
                        fields.len(),
                        cols.len()
                    )));
                }
                let mut row = Vec::with_capacity(fields.len());
                for f in fields {
                    let f = f.trim();
                    if f.is_empty() {
                        row.push(f64::NAN);
                    } else {
                        row.push(f.parse::<f64>().map_err(|_| {
                            Error::Format(format!(
                                "{}:{}: bad number {f:?}",
                                path.display(),
                                lineno + 1
                            ))
                        })?);
                    }
                }
                rows.push(row);
            }
        }
    }
    let columns = columns
        .ok_or_else(|| Error::Format(format!("{}: no header row", path.display())))?;
    Ok(CsvTable {
        comments,
        columns,
        rows,
    })
}

/// Score table: `shot_index,impulse,A_R,A_D,A`. The series' λ is stored in
/// the comments so the table round-trips to a full [`ScoreSeries`].
pub fn write_score_csv(
    path: &Path,
    series: &ScoreSeries,
    extra_comments: &BTreeMap<String, String>,
) -> Result<()> {
    let mut comments = extra_comments.clone();
    comments.insert("lambda".into(), format!("{}", series.lambda));
    let rows: Vec<Vec<String>> = series
        .rows
        .iter()
        .map(|r| {
            vec![
                r.shot_index.to_string(),
                format!("{}", r.impulse),
                format!("{}", r.residual_loss),
                format!("{}", r.discrimination_loss),
                format!("{}", r.score),
            ]
        })
        .collect();
    write_table(
        path,
        &comments,
        &["shot_index", "impulse", "A_R", "A_D", "A"],
        &rows,
    )
}

pub fn read_score_csv(path: &Path) -> Result<(ScoreSeries, BTreeMap<String, String>)> {
    let table = read_table(path)?;
    let lambda: f64 = table
        .comments
        .get("lambda")
        .ok_or_else(|| Error::Format(format!("{}: missing '# lambda=' comment", path.display())))?
        .parse()
        .map_err(|_| Error::Format(format!("{}: bad lambda comment", path.display())))?;
    let idx = table.column("shot_index")?;
    let impulse = table.column("impulse")?;
    let a_r = table.column("A_R")?;
    let a_d = table.column("A_D")?;
    let a = table.column("A")?;
    let rows: Vec<ScoreRow> = (0..table.rows.len())
        .map(|i| ScoreRow {
            shot_index: idx[i] as usize,
            impulse: impulse[i],
            residual_loss: a_r[i],
            discrimination_loss: a_d[i],
            score: a[i],
        })
        .collect();
    let series = ScoreSeries::from_rows(lambda, rows)?;
    Ok((series, table.comments))
}

/// Calibration curve: `lambda,sensitivity`, one row per grid point; grid
/// points where no sensitivity exists leave the field empty.
pub fn write_lambda_curve_csv(
    path: &Path,
    curve: &[(f64, Option<f64>)],
    comments: &BTreeMap<String, String>,
) -> Result<()> {
    let rows: Vec<Vec<String>> = curve
        .iter()
        .map(|(l, s)| {
            vec![
                format!("{l}"),
                s.map_or_else(String::new, |v| format!("{v}")),
            ]
        })
        .collect();
    write_table(path, comments, &["lambda", "sensitivity"], &rows)
}

/// Stability table: `tau_seconds,deviation,n_clusters`.
pub fn write_allan_csv(
    path: &Path,
    series: &AllanSeries,
    extra_comments: &BTreeMap<String, String>,
) -> Result<()> {
    let mut comments = extra_comments.clone();
    if let Some(slope) = series.loglog_slope {
        comments.insert("loglog_slope".into(), format!("{slope}"));
    }
    let rows: Vec<Vec<String>> = series
        .taus
        .iter()
        .zip(&series.deviations)
        .zip(&series.n_clusters)
        .map(|((tau, dev), n)| vec![format!("{tau}"), format!("{dev}"), n.to_string()])
        .collect();
    write_table(
        path,
        &comments,
        &["tau_seconds", "deviation", "n_clusters"],
        &rows,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_series() -> ScoreSeries {
        let rows = (0..5)
            .map(|i| ScoreRow {
                shot_index: i,
                impulse: if i % 2 == 0 { 0.0 } else { 7.81e-26 },
                residual_loss: 1.0 + i as f64 * 0.1,
                discrimination_loss: 0.5 / (i + 1) as f64,
                score: 0.0,
            })
            .map(|mut r| {
                r.score = r.residual_loss - 0.76 * r.discrimination_loss;
                r
            })
            .collect();
        ScoreSeries::from_rows(-0.76, rows).unwrap()
    }

    #[test]
    fn score_csv_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let series = sample_series();
        let mut extra = BTreeMap::new();
        extra.insert("manifest".to_string(), "run.manifest.json".to_string());
        write_score_csv(&path, &series, &extra).unwrap();

        let (back, comments) = read_score_csv(&path).unwrap();
        assert_eq!(back, series);
        assert_eq!(comments.get("manifest").unwrap(), "run.manifest.json");
    }

    #[test]
    fn lambda_curve_leaves_degenerate_points_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let curve = vec![(-1.0, Some(2.5)), (0.0, None), (1.0, Some(3.25))];
        write_lambda_curve_csv(&path, &curve, &BTreeMap::new()).unwrap();
        let table = read_table(&path).unwrap();
        assert_eq!(table.columns, vec!["lambda", "sensitivity"]);
        let s = table.column("sensitivity").unwrap();
        assert_eq!(s[0], 2.5);
        assert!(s[1].is_nan());
        assert_eq!(s[2], 3.25);
    }

    #[test]
    fn malformed_tables_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");

        std::fs::write(&path, "a,b\n1.0\n").unwrap();
        assert!(matches!(read_table(&path), Err(Error::Format(_))));

        std::fs::write(&path, "a,b\n1.0,zebra\n").unwrap();
        assert!(matches!(read_table(&path), Err(Error::Format(_))));

        std::fs::write(&path, "# only=comments\n").unwrap();
        assert!(matches!(read_table(&path), Err(Error::Format(_))));

        std::fs::write(&path, "a,b\n1.0,2.0\n").unwrap();
        let table = read_table(&path).unwrap();
        assert!(matches!(table.column("zebra"), Err(Error::Invalid(_))));
    }
}
