use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{AnalyticsError, CongestionRegion, CorrelationMatrix, CountTable, OdMatrix};
use crate::VehicleClass;

fn io_err(path: &Path, e: impl std::fmt::Display) -> AnalyticsError {
    AnalyticsError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

fn write_rows(
    path: &Path,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
) -> Result<(), AnalyticsError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn class_header(first: &str) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain(VehicleClass::ALL.iter().map(|c| c.as_str().to_string()))
        .collect()
}

/// Long format: `point,class,count`, every gate and class.
pub fn write_counts_csv(path: &Path, t: &CountTable) -> Result<(), AnalyticsError> {
    let rows = t
        .gates
        .iter()
        .zip(&t.cells)
        .flat_map(|(g, r)| {
            VehicleClass::ALL
                .iter()
                .map(move |c| vec![g.clone(), c.as_str().to_string(), r[c.index()].to_string()])
        })
        .collect();
    write_rows(
        path,
        vec!["point".into(), "class".into(), "count".into()],
        rows,
    )
}

/// Square matrix with origins as rows and destinations as columns.
pub fn write_od_csv(path: &Path, od: &OdMatrix) -> Result<(), AnalyticsError> {
    let header = std::iter::once("origin".to_string())
        .chain(od.gates.iter().cloned())
        .collect();
    let rows = od
        .gates
        .iter()
        .zip(&od.cells)
        .map(|(g, r)| {
            std::iter::once(g.clone())
                .chain(r.iter().map(u64::to_string))
                .collect()
        })
        .collect();
    write_rows(path, header, rows)
}

pub fn write_heatmap_csv(
    path: &Path,
    gates: &[String],
    grid: &[[f64; 5]],
) -> Result<(), AnalyticsError> {
    let rows = gates
        .iter()
        .zip(grid)
        .map(|(g, r)| {
            std::iter::once(g.clone())
                .chain(r.iter().map(f64::to_string))
                .collect()
        })
        .collect();
    write_rows(path, class_header("point"), rows)
}

/// Undefined coefficients are written as empty cells.
pub fn write_correlation_csv(path: &Path, m: &CorrelationMatrix) -> Result<(), AnalyticsError> {
    let rows = VehicleClass::ALL
        .iter()
        .zip(m)
        .map(|(c, r)| {
            std::iter::once(c.as_str().to_string())
                .chain(
                    r.iter()
                        .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
                )
                .collect()
        })
        .collect();
    write_rows(path, class_header("class"), rows)
}

pub fn write_congestion_jsonl(
    path: &Path,
    regions: &[CongestionRegion],
) -> Result<(), AnalyticsError> {
    let mut out = String::new();
    for r in regions {
        out.push_str(&serde_json::to_string(r).map_err(|e| io_err(path, e))?);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), AnalyticsError> {
    let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| io_err(path, e))?;
    f.write_all(b"\n").map_err(|e| io_err(path, e))
}
