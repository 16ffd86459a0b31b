use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::measures::{MeasureReport, RobustnessResult};

use super::Evaluation;

pub const REPORT_FILE: &str = "report.json";
pub const TIMING_FILE: &str = "timing.json";
pub const CSV_FILE: &str = "report.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// `report.json` with everything except timings, plus `timing.json`.
    Json,
    /// `report.csv`, one row per metric.
    Csv,
    /// Per-metric TSV files: `scatter_*.tsv`, `size_*.tsv`, `imbalance_*.tsv`.
    Plotdata,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Plotdata];
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "plotdata" | "tsv" => Ok(ReportFormat::Plotdata),
            other => Err(Error::InvalidParameter(format!(
                "unknown report format {other:?}"
            ))),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn file_stem(metric: &str) -> String {
    metric
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

fn write_sweep(path: &Path, sweep: &RobustnessResult) -> Result<()> {
    let mut out = String::from("size_a\tsize_b\trep\tdistance\tasymptote\n");
    for p in &sweep.points {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            p.size_a, p.size_b, p.rep, p.distance, sweep.asymptote
        ));
    }
    write_file(path, out.as_bytes())
}

fn to_json(value: &impl serde::Serialize) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Write the requested formats into `dir` and return the files written.
/// File names are fixed, so repeated runs overwrite each other.
pub fn emit_report(ev: &Evaluation, formats: &[ReportFormat], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    for format in formats {
        match format {
            ReportFormat::Json => {
                let mut stable = ev.clone();
                let mut timing = BTreeMap::new();
                for run in &mut stable.runs {
                    if let Some(t) = run.report.time_t.take() {
                        timing.insert(run.report.metric.clone(), t);
                    }
                }
                let path = dir.join(REPORT_FILE);
                write_file(&path, &to_json(&stable)?)?;
                written.push(path);
                if !timing.is_empty() {
                    let path = dir.join(TIMING_FILE);
                    write_file(&path, &to_json(&timing)?)?;
                    written.push(path);
                }
            }
            ReportFormat::Csv => {
                let path = dir.join(CSV_FILE);
                let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Format(e.to_string()))?;
                let csv_err = |e: csv::Error| Error::Format(e.to_string());
                w.write_record(MeasureReport::CSV_HEADER).map_err(csv_err)?;
                for run in &ev.runs {
                    w.write_record(run.report.csv_row()).map_err(csv_err)?;
                }
                w.flush().map_err(|e| Error::io(&path, e))?;
                written.push(path);
            }
            ReportFormat::Plotdata => {
                for run in &ev.runs {
                    let stem = file_stem(&run.report.metric);
                    if let Some(table) = &run.table {
                        let path = dir.join(format!("scatter_{stem}.tsv"));
                        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                        let mut out = String::from("rep\ti\tj\tell\traw\tz\n");
                        for e in &table.entries {
                            out.push_str(&format!(
                                "{}\t{}\t{}\t{}\t{}\t{}\n",
                                e.rep, e.i, e.j, e.ell, e.raw, e.z
                            ));
                        }
                        f.write_all(out.as_bytes()).map_err(|e| Error::io(&path, e))?;
                        written.push(path);
                    }
                    if let Some(s) = &run.size_sweep {
                        let path = dir.join(format!("size_{stem}.tsv"));
                        write_sweep(&path, s)?;
                        written.push(path);
                    }
                    if let Some(s) = &run.imbalance_sweep {
                        let path = dir.join(format!("imbalance_{stem}.tsv"));
                        write_sweep(&path, s)?;
                        written.push(path);
                    }
                }
            }
        }
    }
    Ok(written)
}

/// Read `report.json` from `dir`, merging `timing.json` when present.
pub fn load_report(dir: impl AsRef<Path>) -> Result<Evaluation> {
    let dir = dir.as_ref();
    let path = dir.join(REPORT_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut ev: Evaluation =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let timing_path = dir.join(TIMING_FILE);
    if timing_path.exists() {
        let text = fs::read_to_string(&timing_path).map_err(|e| Error::io(&timing_path, e))?;
        let timing: BTreeMap<String, f64> = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", timing_path.display())))?;
        for run in &mut ev.runs {
            run.report.time_t = timing.get(&run.report.metric).copied();
        }
    }
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{MetricRun, RunConfig};
    use crate::ksc::DistanceTable;
    use crate::measures::SweepPoint;

    fn evaluation() -> Evaluation {
        let table = DistanceTable::from_fn("CHI", 4, 2, |r, i, j| (j - i + r) as f64).unwrap();
        let mut report = MeasureReport::from_table(&table, &crate::ksc::judgement_set(4)).unwrap();
        report.size_robustness = Some(0.75);
        report.time_t = Some(12.5);
        let sweep = RobustnessResult {
            score: 0.75,
            asymptote: 1.0,
            points: vec![SweepPoint {
                size_a: 5,
                size_b: 5,
                rep: 0,
                distance: 1.25,
            }],
        };
        let mut failed = MeasureReport::empty("FID", 2);
        failed.error = Some("boom".into());
        Evaluation {
            config: RunConfig::default(),
            runs: vec![
                MetricRun {
                    report,
                    table: Some(table),
                    size_sweep: Some(sweep),
                    imbalance_sweep: None,
                },
                MetricRun {
                    report: failed,
                    table: None,
                    size_sweep: None,
                    imbalance_sweep: None,
                },
            ],
        }
    }

    #[test]
    fn json_round_trip_with_separate_timing() {
        let dir = tempfile::tempdir().unwrap();
        let ev = evaluation();
        emit_report(&ev, &[ReportFormat::Json], dir.path()).unwrap();
        let report = fs::read_to_string(dir.path().join(REPORT_FILE)).unwrap();
        assert!(!report.contains("time_t"));
        assert_eq!(load_report(dir.path()).unwrap(), ev);
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(&evaluation(), &[ReportFormat::Csv], dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join(CSV_FILE)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "metric,A,A_w,T,rho,omega2,R2,S,I");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("CHI,"));
        assert_eq!(lines[2], "FID,,,,,,,,");
    }

    #[test]
    fn plotdata_row_counts() {
        let dir = tempfile::tempdir().unwrap();
        let ev = evaluation();
        let files = emit_report(&ev, &[ReportFormat::Plotdata], dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let scatter = fs::read_to_string(dir.path().join("scatter_chi.tsv")).unwrap();
        assert_eq!(
            scatter.lines().count(),
            1 + ev.runs[0].table.as_ref().unwrap().entries.len()
        );
        let size = fs::read_to_string(dir.path().join("size_chi.tsv")).unwrap();
        assert_eq!(size.lines().nth(1).unwrap(), "5\t5\t0\t1.25\t1");
    }

    #[test]
    fn format_names() {
        assert_eq!("JSON".parse::<ReportFormat>().unwrap(), ReportFormat::Json);
        assert_eq!(
            "plotdata".parse::<ReportFormat>().unwrap(),
            ReportFormat::Plotdata
        );
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
