//! CSV readers and writers for clouds, diagrams, features and reports.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a value
//! read back compares equal and repeated runs produce identical bytes.
//! Infinite deaths are written as `inf`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result, ResultExt};
use crate::pdb_ingest::WeightedPointCloud;
use crate::persistence::{PersistenceDiagram, TransformedDiagram};
use crate::stats::HexCell;

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn parse_f64(cell: &str, row: usize, col: &str) -> Result<f64> {
    match cell {
        "inf" | "Inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        _ => cell
            .parse()
            .map_err(|_| Error::Data(format!("row {row}, column {col}: cannot parse {cell:?} as a number"))),
    }
}

fn field<'a>(record: &'a csv::StringRecord, i: usize, row: usize, col: &str) -> Result<&'a str> {
    record
        .get(i)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::Data(format!("row {row}: missing column {col}")))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| path.display().to_string())
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
    }
    fs::write(path, contents).with_context(|| path.display().to_string())
}

/// Cloud CSV: `x,y,z,r`.
pub fn write_cloud_csv(out: impl Write, cloud: &WeightedPointCloud) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "z", "r"])?;
    for (p, r) in cloud.points.iter().zip(&cloud.radii) {
        w.write_record([p[0].to_string(), p[1].to_string(), p[2].to_string(), r.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `x,y,z[,r]`; a missing radius column means radius 0.
pub fn read_cloud_csv(text: &str) -> Result<WeightedPointCloud> {
    let mut rd = reader(text);
    let has_r = rd.headers()?.len() >= 4;
    let mut points = Vec::new();
    let mut radii = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let mut p = [0.0; 3];
        for (k, name) in ["x", "y", "z"].iter().enumerate() {
            p[k] = parse_f64(field(&rec, k, row, name)?, row, name)?;
        }
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::Data(format!("row {row}: non-finite coordinate")));
        }
        let r = if has_r { parse_f64(field(&rec, 3, row, "r")?, row, "r")? } else { 0.0 };
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::Data(format!("row {row}: radius must be finite and non-negative")));
        }
        points.push(p);
        radii.push(r);
    }
    Ok(WeightedPointCloud::new(points, radii))
}

/// Diagram CSV: `id,dim,birth,death`.
pub fn write_diagrams_csv<'a>(out: impl Write, diagrams: impl IntoIterator<Item = &'a PersistenceDiagram>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "dim", "birth", "death"])?;
    for d in diagrams {
        for p in &d.pairs {
            w.write_record([d.id.clone(), d.dimension.to_string(), p.birth.to_string(), p.death.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Diagrams grouped by `(id, dim)`, ids in order of first appearance.
/// Samples with no pairs in a dimension simply have no entry for it.
pub fn read_diagrams_csv(text: &str) -> Result<Vec<PersistenceDiagram>> {
    let mut rd = reader(text);
    let mut order: Vec<(String, usize)> = Vec::new();
    let mut map: BTreeMap<(String, usize), PersistenceDiagram> = BTreeMap::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let id = field(&rec, 0, row, "id")?.to_string();
        let dim: usize = field(&rec, 1, row, "dim")?
            .parse()
            .map_err(|_| Error::Data(format!("row {row}: dim must be a non-negative integer")))?;
        let birth = parse_f64(field(&rec, 2, row, "birth")?, row, "birth")?;
        let death = parse_f64(field(&rec, 3, row, "death")?, row, "death")?;
        if birth.is_nan() || death.is_nan() || death < birth {
            return Err(Error::Data(format!("row {row}: invalid pair ({birth}, {death})")));
        }
        let key = (id.clone(), dim);
        map.entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                PersistenceDiagram::new(id, dim)
            })
            .push(birth, death);
    }
    Ok(order.into_iter().map(|k| map.remove(&k).expect("inserted")).collect())
}

/// Transformed diagram CSV: `id,dim,u,v`.
pub fn write_transformed_csv<'a>(out: impl Write, diagrams: impl IntoIterator<Item = &'a TransformedDiagram>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "dim", "u", "v"])?;
    for d in diagrams {
        for p in &d.points {
            w.write_record([d.id.clone(), d.dimension.to_string(), p[0].to_string(), p[1].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Feature CSV: `id,<name>...`. Readable with
/// [`load_sme_csv`](crate::pdb_ingest::load_sme_csv).
pub fn write_features_csv(out: impl Write, names: &[String], ids: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (id, row) in ids.iter().zip(rows) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Importance CSV: `feature,importance`.
pub fn write_importance_csv(out: impl Write, names: &[String], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "importance"])?;
    for (n, v) in names.iter().zip(values) {
        w.write_record([n.clone(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_importance_csv(text: &str) -> Result<Vec<(String, f64)>> {
    let mut rd = reader(text);
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let name = field(&rec, 0, row, "feature")?.to_string();
        let v = parse_f64(field(&rec, 1, row, "importance")?, row, "importance")?;
        out.push((name, v));
    }
    Ok(out)
}

/// Hexbin CSV: `hex_center_u,hex_center_v,signed_count,log_signed_value`.
pub fn write_hexbin_csv(out: impl Write, cells: &[HexCell]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["hex_center_u", "hex_center_v", "signed_count", "log_signed_value"])?;
    for c in cells {
        w.write_record([
            c.center_u.to_string(),
            c.center_v.to_string(),
            c.signed_count.to_string(),
            c.log_signed_value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One `(CDER feature, SME feature)` correlation with both importances.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub cder_feature: String,
    pub sme_feature: String,
    pub r: f64,
    pub cder_importance: Option<f64>,
    pub sme_importance: Option<f64>,
}

/// Correlation CSV: `cder_feature,sme_feature,r,cder_importance,sme_importance`.
/// Missing importances and undefined correlations are left empty.
pub fn write_correlation_csv(out: impl Write, rows: &[CorrelationRow]) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cder_feature", "sme_feature", "r", "cder_importance", "sme_importance"])?;
    for r in rows {
        w.write_record([
            r.cder_feature.clone(),
            r.sme_feature.clone(),
            if r.r.is_nan() { String::new() } else { r.r.to_string() },
            opt(r.cder_importance),
            opt(r.sme_importance),
        ])?;
    }
    w.flush()?;
    Ok(())
}
