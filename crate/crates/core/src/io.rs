//! File formats.
//!
//! `HOTP1` binary tensors: the magic bytes `HOTP`, a version byte `1`, the
//! order `r` as one byte, `r` little-endian `u32` dimensions, then the
//! row-major coefficients as little-endian `f64`.
//!
//! Feature CSV: one vector per row. A header row is optional; when present
//! and its last column is named `weight`, that column holds per-vector
//! weights. Matrix CSV: one matrix row per line, no header.
//!
//! Numbers are written with Rust's shortest round-trip formatting.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::hosvd::HosvdFactors;
use crate::tensor::{DenseTensor, FeatureSet};

pub const HOTP_MAGIC: &[u8; 4] = b"HOTP";
pub const HOTP_VERSION: u8 = 1;

pub fn encode_hotp(t: &DenseTensor) -> Result<Vec<u8>> {
    if t.order() > u8::MAX as usize {
        return invalid(format!("order {} does not fit in one byte", t.order()));
    }
    let mut out = Vec::with_capacity(6 + 4 * t.order() + 8 * t.data().len());
    out.extend_from_slice(HOTP_MAGIC);
    out.push(HOTP_VERSION);
    out.push(t.order() as u8);
    for &d in t.dims() {
        let d = u32::try_from(d).map_err(|_| Error::InvalidInput(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &x in t.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_hotp(bytes: &[u8]) -> Result<DenseTensor> {
    let bad = |msg: String| Err(Error::InvalidInput(format!("HOTP1: {msg}")));
    if bytes.len() < 6 || &bytes[..4] != HOTP_MAGIC {
        return bad("missing HOTP magic".into());
    }
    if bytes[4] != HOTP_VERSION {
        return bad(format!("unsupported version {}", bytes[4]));
    }
    let order = bytes[5] as usize;
    if order == 0 {
        return bad("order 0".into());
    }
    let header = 6 + 4 * order;
    if bytes.len() < header {
        return bad("truncated dimensions".into());
    }
    let dims: Vec<usize> = bytes[6..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let len = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::InvalidInput("HOTP1: dimensions overflow".into()))?;
    let body = &bytes[header..];
    if body.len() != 8 * len {
        return bad(format!("expected {} data bytes, found {}", 8 * len, body.len()));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseTensor::new(dims, data)
}

pub fn write_hotp(path: &Path, t: &DenseTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_hotp(t)?)?;
    w.flush()?;
    Ok(())
}

pub fn read_hotp(path: &Path) -> Result<DenseTensor> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_hotp(&bytes)
}

/// Rows of a feature CSV, with the weight column split off if present.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub header: Option<Vec<String>>,
    pub vectors: Vec<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
}

impl FeatureTable {
    pub fn to_feature_set(&self) -> Result<FeatureSet> {
        match &self.weights {
            Some(w) => FeatureSet::with_weights(self.vectors.clone(), w.clone()),
            None => FeatureSet::new(self.vectors.clone()),
        }
    }
}

fn parse_error(source_name: &str, row: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source_name.to_string(),
        row,
        column,
        message: message.into(),
    }
}

fn csv_records(text: &str, source_name: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            parse_error(source_name, row, 0, e.to_string())
        })?;
        let line = rec.position().map_or(rows.len() + 1, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

fn parse_numeric_row(fields: &[String], source_name: &str, line: usize) -> Result<Vec<f64>> {
    fields
        .iter()
        .enumerate()
        .map(|(c, f)| match f.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(v) => Err(parse_error(source_name, line, c + 1, format!("non-finite value {v}"))),
            Err(_) => Err(parse_error(source_name, line, c + 1, format!("not a number: {f:?}"))),
        })
        .collect()
}

/// Parse feature CSV text. `source_name` is used in diagnostics; rows and
/// columns in errors are 1-based.
pub fn parse_features(text: &str, source_name: &str) -> Result<FeatureTable> {
    let mut rows = csv_records(text, source_name)?;
    if rows.is_empty() {
        return Err(parse_error(source_name, 1, 0, "no rows"));
    }
    let first_is_header = rows[0].1.iter().any(|f| f.parse::<f64>().is_err());
    let header = if first_is_header { Some(rows.remove(0).1) } else { None };
    let weighted = header
        .as_ref()
        .is_some_and(|h| h.last().is_some_and(|c| c.eq_ignore_ascii_case("weight")));
    if rows.is_empty() {
        return Err(parse_error(source_name, 2, 0, "header without data rows"));
    }
    let width = header.as_ref().map_or(rows[0].1.len(), Vec::len);
    if weighted && width < 2 {
        return Err(parse_error(source_name, 1, 1, "a weight column needs at least one feature column"));
    }
    let mut vectors = Vec::with_capacity(rows.len());
    let mut weights = Vec::new();
    for (line, fields) in &rows {
        if fields.len() != width {
            return Err(parse_error(
                source_name,
                *line,
                fields.len().min(width) + 1,
                format!("expected {width} columns, found {}", fields.len()),
            ));
        }
        let mut v = parse_numeric_row(fields, source_name, *line)?;
        if weighted {
            let w = v.pop().unwrap();
            if w < 0.0 {
                return Err(parse_error(source_name, *line, width, format!("negative weight {w}")));
            }
            weights.push(w);
        }
        vectors.push(v);
    }
    Ok(FeatureTable {
        header,
        vectors,
        weights: weighted.then_some(weights),
    })
}

pub fn read_features(path: &Path) -> Result<FeatureTable> {
    let text = std::fs::read_to_string(path)?;
    parse_features(&text, &path.display().to_string())
}

fn write_rows<'a>(path: &Path, header: Option<&[String]>, rows: impl Iterator<Item = Vec<f64>> + 'a) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    if let Some(h) = header {
        w.write_record(h).map_err(to_io)?;
    }
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v}"))).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Write a feature table; a weight column is written (with a header) when
/// weights are present.
pub fn write_features(path: &Path, table: &FeatureTable) -> Result<()> {
    let d = table.vectors.first().map_or(0, Vec::len);
    let header = match (&table.header, &table.weights) {
        (Some(h), _) if h.len() == d + usize::from(table.weights.is_some()) => Some(h.clone()),
        (_, Some(_)) => Some((0..d).map(|i| format!("f{i}")).chain(["weight".to_string()]).collect()),
        _ => None,
    };
    let rows = table.vectors.iter().enumerate().map(|(n, v)| {
        let mut r = v.clone();
        if let Some(w) = &table.weights {
            r.push(w[n]);
        }
        r
    });
    write_rows(path, header.as_deref(), rows)
}

pub fn parse_matrix(text: &str, source_name: &str) -> Result<DMatrix<f64>> {
    let rows = csv_records(text, source_name)?;
    if rows.is_empty() {
        return Err(parse_error(source_name, 1, 0, "no rows"));
    }
    let width = rows[0].1.len();
    let mut data = Vec::with_capacity(rows.len() * width);
    for (line, fields) in &rows {
        if fields.len() != width {
            return Err(parse_error(
                source_name,
                *line,
                fields.len().min(width) + 1,
                format!("expected {width} columns, found {}", fields.len()),
            ));
        }
        data.extend(parse_numeric_row(fields, source_name, *line)?);
    }
    Ok(DMatrix::from_row_slice(rows.len(), width, &data))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix(&text, &path.display().to_string())
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_rows(path, None, m.row_iter().map(|r| r.iter().copied().collect()))
}

/// Two-column CSV with a header.
pub fn write_xy_csv(path: &Path, x_name: &str, y_name: &str, points: &[(f64, f64)]) -> Result<()> {
    let header = [x_name.to_string(), y_name.to_string()];
    write_rows(path, Some(&header), points.iter().map(|&(x, y)| vec![x, y]))
}

/// Read a matrix from CSV or, for `.hotp`/`.hotp1` files, from an order-2
/// HOTP1 tensor.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("hotp") || ext.eq_ignore_ascii_case("hotp1") => {
            read_hotp(path)?.to_matrix()
        }
        _ => read_matrix_csv(path),
    }
}

/// Store factors as a HOTP1 core plus a CSV factor matrix.
pub fn write_factors(core_path: &Path, factor_path: &Path, f: &HosvdFactors) -> Result<()> {
    write_hotp(core_path, &f.core)?;
    write_matrix_csv(factor_path, &f.factor)
}

pub fn read_factors(core_path: &Path, factor_path: &Path) -> Result<HosvdFactors> {
    let core = read_hotp(core_path)?;
    let factor = read_matrix_csv(factor_path)?;
    if core.dims().iter().any(|&d| d != factor.ncols()) {
        return Err(Error::Shape(format!(
            "core dims {:?} do not match factor rank {}",
            core.dims(),
            factor.ncols()
        )));
    }
    Ok(HosvdFactors {
        kappa: crate::hosvd::kappa(core.order()),
        core,
        factor,
    })
}
