use std::fs;
use std::path::{Path, PathBuf};

use super::{EmpiricalMeasure, MeasureMeta};
use crate::error::{Error, Result};

/// `measure.csv` -> `measure.csv.meta.json`.
fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Writes `x1..xd,weight` rows plus a JSON sidecar with the provenance record.
pub fn write_measure_csv(path: &Path, m: &EmpiricalMeasure) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=m.dim()).map(|i| format!("x{i}")).collect();
    header.push("weight".into());
    w.write_record(&header)?;
    for (x, weight) in m.iter() {
        let row: Vec<String> = x.iter().chain(std::iter::once(&weight)).map(|v| v.to_string()).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    fs::write(sidecar(path), serde_json::to_string_pretty(m.meta())? + "\n")?;
    Ok(())
}

/// Reads a measure written by [`write_measure_csv`]. A missing sidecar yields
/// a single-chain record with unknown step size (NaN).
pub fn read_measure_csv(path: &Path) -> Result<EmpiricalMeasure> {
    let mut r = csv::Reader::from_path(path)?;
    let dim = r.headers()?.len().checked_sub(1).filter(|d| *d > 0).ok_or_else(|| {
        Error::InvalidArgument("measure CSV needs at least one coordinate column and a weight column".into())
    })?;
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let values: Vec<f64> = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad number `{f}`: {e}"))))
            .collect::<Result<_>>()?;
        coords.extend_from_slice(&values[..dim]);
        weights.push(values[dim]);
    }
    let meta_path = sidecar(path);
    let meta = if meta_path.exists() {
        serde_json::from_str(&fs::read_to_string(meta_path)?)?
    } else {
        MeasureMeta::single(f64::NAN)
    };
    EmpiricalMeasure::new(dim, coords, weights, meta)
}
