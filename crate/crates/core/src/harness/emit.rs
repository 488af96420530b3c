//! Result files: `record.json`, `results.csv` and one `plot_<SCHEME>.dat`
//! per scheme. Everything except the runtime section is byte-stable for a
//! given scenario.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::ResultRecord;
use crate::baselines::SchemeId;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputFiles {
    pub record: PathBuf,
    pub csv: PathBuf,
    pub plots: Vec<PathBuf>,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// `scheme,M,mean_rate,stderr,bound`, one row per point in record order.
pub fn write_csv<W: Write>(record: &ResultRecord, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::io("results.csv", std::io::Error::other(e));
    w.write_record(["scheme", "M", "mean_rate", "stderr", "bound"]).map_err(wrap)?;
    for p in &record.points {
        w.write_record([
            p.scheme.name().to_string(),
            p.cache_size.to_string(),
            p.mean_rate.to_string(),
            p.stderr.to_string(),
            fmt_opt(p.bound),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("results.csv", e))
}

/// Whitespace-separated `M rate stderr` columns sorted by `M`, for gnuplot.
pub fn write_plot_data<W: Write>(record: &ResultRecord, scheme: SchemeId, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# {scheme}: M mean_rate stderr")?;
    for p in record.series(scheme) {
        writeln!(out, "{} {} {}", p.cache_size, p.mean_rate, p.stderr)?;
    }
    Ok(())
}

/// Writes all result files into `dir`, creating it if needed.
pub fn emit(record: &ResultRecord, dir: &Path) -> Result<OutputFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let record_path = dir.join("record.json");
    let json = serde_json::to_string_pretty(record).expect("record serializes");
    fs::write(&record_path, json + "\n").map_err(|e| Error::io(&record_path, e))?;

    let csv_path = dir.join("results.csv");
    let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_csv(record, file)?;

    let mut schemes: Vec<SchemeId> = record.points.iter().map(|p| p.scheme).collect();
    schemes.sort();
    schemes.dedup();
    let mut plots = Vec::new();
    for scheme in schemes {
        let path = dir.join(format!("plot_{scheme}.dat"));
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_plot_data(record, scheme, std::io::BufWriter::new(file)).map_err(|e| Error::io(&path, e))?;
        plots.push(path);
    }
    Ok(OutputFiles {
        record: record_path,
        csv: csv_path,
        plots,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{PointResult, RuntimeInfo};
    use super::*;

    fn record(points: Vec<PointResult>) -> ResultRecord {
        ResultRecord {
            tool_version: "0".into(),
            scenario_name: "t".into(),
            scenario_digest: "d".into(),
            seed: 0,
            points,
            runtime: RuntimeInfo {
                elapsed_seconds: 0.0,
                threads: 1,
            },
        }
    }

    fn point(scheme: SchemeId, m: f64, rate: f64, bound: Option<f64>) -> PointResult {
        PointResult {
            scheme,
            cache_size: m,
            mean_rate: rate,
            stderr: 0.5,
            samples: 2,
            bound,
            delta: None,
            p_digest: None,
            mean_colors: None,
            decode_failures: 0,
            realizations: Vec::new(),
        }
    }

    #[test]
    fn csv_layout() {
        let r = record(vec![
            point(SchemeId::LcU, 2.0, 3.25, None),
            point(SchemeId::RapCm, 2.0, 1.5, Some(1.75)),
        ]);
        let mut buf = Vec::new();
        write_csv(&r, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "scheme,M,mean_rate,stderr,bound\nLC_U,2,3.25,0.5,\nRAP_CM,2,1.5,0.5,1.75\n"
        );
    }

    #[test]
    fn empty_sweep_writes_headers() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit(&record(Vec::new()), dir.path()).unwrap();
        assert_eq!(fs::read_to_string(files.csv).unwrap(), "scheme,M,mean_rate,stderr,bound\n");
        assert!(files.plots.is_empty());
    }

    #[test]
    fn plot_is_sorted_by_cache_size() {
        let r = record(vec![
            point(SchemeId::LcNm, 5.0, 1.0, None),
            point(SchemeId::LcNm, 1.0, 2.0, None),
        ]);
        let mut buf = Vec::new();
        write_plot_data(&r, SchemeId::LcNm, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# LC_NM: M mean_rate stderr\n1 2 0.5\n5 1 0.5\n");
    }
}
