//! On-disk formats: parameter checkpoints and datasets.
//!
//! Parameter checkpoint: a little-endian `u32` dimension header
//! followed by that many little-endian `f64` values, plus a text debug
//! format with one value per line.
//!
//! Dataset binary: header `magic "OFDS", version u32, class_count u32,
//! feature_dim u32, count u32`, then `count × feature_dim` `f32`
//! inputs row-major, then `count` `u32` labels — all little-endian.
//! The CSV form has a `label,x0,...` header row, label first. Binary
//! inputs are stored at `f32` precision; generated datasets remain
//! bit-exactly reproducible from their provenance rather than from
//! round-tripped files.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ofmu_core::data::{Dataset, Provenance};
use ofmu_core::ParameterVector;

use crate::error::{LabError, Result};

const DATASET_MAGIC: &[u8; 4] = b"OFDS";
const DATASET_VERSION: u32 = 1;

pub fn write_theta(path: &Path, theta: &ParameterVector) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(&(theta.dim() as u32).to_le_bytes())?;
    for v in theta.as_slice() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_theta(path: &Path) -> Result<ParameterVector> {
    let mut input = BufReader::new(fs::File::open(path)?);
    let mut header = [0u8; 4];
    input.read_exact(&mut header)?;
    let dim = u32::from_le_bytes(header) as usize;
    let mut values = Vec::with_capacity(dim);
    let mut buf = [0u8; 8];
    for _ in 0..dim {
        input.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    ParameterVector::new(values).map_err(|e| LabError::runtime(format!("checkpoint: {e}")))
}

/// One value per line, shortest round-trip decimal representation.
pub fn write_theta_text(path: &Path, theta: &ParameterVector) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for v in theta.as_slice() {
        writeln!(out, "{v:?}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_theta_text(path: &Path) -> Result<ParameterVector> {
    let input = BufReader::new(fs::File::open(path)?);
    let mut values = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        values.push(
            line.trim()
                .parse::<f64>()
                .map_err(|e| LabError::runtime(format!("checkpoint line {}: {e}", i + 1)))?,
        );
    }
    ParameterVector::new(values).map_err(|e| LabError::runtime(format!("checkpoint: {e}")))
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(DATASET_MAGIC)?;
    out.write_all(&DATASET_VERSION.to_le_bytes())?;
    out.write_all(&(data.class_count() as u32).to_le_bytes())?;
    out.write_all(&(data.feature_dim() as u32).to_le_bytes())?;
    out.write_all(&(data.len() as u32).to_le_bytes())?;
    for v in data.inputs() {
        out.write_all(&(*v as f32).to_le_bytes())?;
    }
    for &y in data.labels() {
        out.write_all(&(y as u32).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut input = BufReader::new(fs::File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != DATASET_MAGIC {
        return Err(LabError::runtime(format!(
            "{}: not a dataset file (bad magic)",
            path.display()
        )));
    }
    let mut word = [0u8; 4];
    let mut read_u32 = |input: &mut BufReader<fs::File>| -> Result<u32> {
        input.read_exact(&mut word)?;
        Ok(u32::from_le_bytes(word))
    };
    let version = read_u32(&mut input)?;
    if version != DATASET_VERSION {
        return Err(LabError::runtime(format!(
            "unsupported dataset version {version}"
        )));
    }
    let class_count = read_u32(&mut input)? as usize;
    let feature_dim = read_u32(&mut input)? as usize;
    let count = read_u32(&mut input)? as usize;
    let mut inputs = Vec::with_capacity(count * feature_dim);
    let mut f32buf = [0u8; 4];
    for _ in 0..count * feature_dim {
        input.read_exact(&mut f32buf)?;
        inputs.push(f32::from_le_bytes(f32buf) as f64);
    }
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        input.read_exact(&mut f32buf)?;
        labels.push(u32::from_le_bytes(f32buf) as usize);
    }
    Dataset::new(
        inputs,
        labels,
        class_count,
        feature_dim,
        Provenance::External {
            label: format!("file:{}", path.display()),
        },
    )
    .map_err(|e| LabError::runtime(format!("{}: {e}", path.display())))
}

/// Label first, then features; a header row names the columns.
pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["label".to_string()];
    header.extend((0..data.feature_dim()).map(|j| format!("x{j}")));
    writer
        .write_record(&header)
        .map_err(|e| LabError::runtime(format!("csv: {e}")))?;
    for i in 0..data.len() {
        let mut record = vec![data.label(i).to_string()];
        record.extend(data.row(i).iter().map(|v| format!("{v:?}")));
        writer
            .write_record(&record)
            .map_err(|e| LabError::runtime(format!("csv: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| LabError::runtime(format!("csv: {e}")))?;
    Ok(())
}

/// Reads the CSV form; the class count is inferred as `max label + 1`.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| LabError::runtime(format!("csv: {e}")))?;
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut feature_dim = None;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| LabError::runtime(format!("csv row {row}: {e}")))?;
        if record.is_empty() {
            continue;
        }
        let label: usize = record[0]
            .trim()
            .parse()
            .map_err(|e| LabError::runtime(format!("csv row {row} label: {e}")))?;
        let features: Vec<f64> = record
            .iter()
            .skip(1)
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| LabError::runtime(format!("csv row {row}: {e}")))
            })
            .collect::<Result<_>>()?;
        match feature_dim {
            None => feature_dim = Some(features.len()),
            Some(d) if d != features.len() => {
                return Err(LabError::runtime(format!(
                    "csv row {row}: expected {d} features, got {}",
                    features.len()
                )))
            }
            _ => {}
        }
        labels.push(label);
        inputs.extend(features);
    }
    let feature_dim =
        feature_dim.ok_or_else(|| LabError::runtime("csv contains no data rows".to_string()))?;
    let class_count = labels.iter().max().map_or(0, |m| m + 1);
    Dataset::new(
        inputs,
        labels,
        class_count,
        feature_dim,
        Provenance::External {
            label: format!("file:{}", path.display()),
        },
    )
    .map_err(|e| LabError::runtime(format!("{}: {e}", path.display())))
}

/// Dispatches on extension: `.csv` text form, anything else binary.
pub fn read_dataset_auto(path: &Path) -> Result<Dataset> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_dataset_csv(path),
        _ => read_dataset(path),
    }
}
