//! CSV ingestion and export.
//!
//! Schema: header `subject_id,label,` followed by feature columns prefixed
//! `rf_`, `cog_`, `mri_`, each prefix group contiguous. The label cell is
//! CN/MCI/AD or empty (unlabeled). UTF-8, comma separator, `.` decimal
//! point. `save_csv` emits the identical schema, so load(save(d)) == d.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use super::{Dataset, DiagnosisClass, ModalityPartition, Relation, SubjectRecord, NUM_RELATIONS};
use crate::error::{Error, Result};

/// Infer the modality partition from feature column names.
fn infer_partition(feature_headers: &[String]) -> Result<ModalityPartition> {
    let mut ranges: [Option<(usize, usize)>; NUM_RELATIONS] = [None; NUM_RELATIONS];
    for (col, name) in feature_headers.iter().enumerate() {
        let rel = Relation::ALL
            .into_iter()
            .find(|r| name.starts_with(r.prefix()))
            .ok_or_else(|| {
                Error::Schema(format!(
                    "feature column '{name}' has no rf_/cog_/mri_ prefix"
                ))
            })?;
        match &mut ranges[rel.index()] {
            None => ranges[rel.index()] = Some((col, col + 1)),
            Some((_, end)) => {
                if *end != col {
                    return Err(Error::Schema(format!(
                        "columns for prefix {} are not contiguous",
                        rel.prefix()
                    )));
                }
                *end = col + 1;
            }
        }
    }
    let mut out = [(0, 0); NUM_RELATIONS];
    for rel in Relation::ALL {
        out[rel.index()] = ranges[rel.index()].ok_or_else(|| {
            Error::Schema(format!("missing all columns with prefix {}", rel.prefix()))
        })?;
    }
    let partition = ModalityPartition { ranges: out };
    partition.validate()?;
    Ok(partition)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())
        .map_err(|e| Error::Schema(format!("cannot open csv: {e}")))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("bad header: {e}")))?
        .clone();
    if headers.len() < 3 || &headers[0] != "subject_id" || &headers[1] != "label" {
        return Err(Error::Schema(
            "header must start with subject_id,label followed by feature columns".into(),
        ));
    }
    let feature_headers: Vec<String> = headers.iter().skip(2).map(str::to_owned).collect();
    let partition = infer_partition(&feature_headers)?;
    let f = partition.total_dim();

    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, row) in reader.records().enumerate() {
        // Header is line 1; first data row is line 2.
        let line = idx + 2;
        let row = row.map_err(|e| Error::Row {
            line,
            reason: format!("unreadable row: {e}"),
        })?;
        if row.len() != f + 2 {
            return Err(Error::Row {
                line,
                reason: format!("expected {} cells, got {}", f + 2, row.len()),
            });
        }
        let subject_id = row[0].to_string();
        if let Some(prev) = seen.insert(subject_id.clone(), line) {
            return Err(Error::Schema(format!(
                "duplicate subject_id '{subject_id}' (lines {prev} and {line})"
            )));
        }
        let label = match &row[1] {
            "" => None,
            s => Some(DiagnosisClass::parse(s).ok_or_else(|| Error::Row {
                line,
                reason: format!("label '{s}' is not CN/MCI/AD or empty"),
            })?),
        };
        let mut features = Vec::with_capacity(f);
        for (j, cell) in row.iter().skip(2).enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Row {
                line,
                reason: format!(
                    "non-numeric feature '{}' in column {}",
                    cell, feature_headers[j]
                ),
            })?;
            if !v.is_finite() {
                return Err(Error::Row {
                    line,
                    reason: format!("non-finite feature in column {}", feature_headers[j]),
                });
            }
            features.push(v);
        }
        records.push(SubjectRecord {
            subject_id,
            label,
            features,
        });
    }

    Dataset::new(records, partition, DiagnosisClass::ALL.to_vec())
}

/// Write the dataset in the load_csv schema. Load of a saved file is an
/// exact round trip for datasets carrying the full class list (the only
/// kind `load_csv` produces); class-filtered datasets regain the full
/// list on reload since the schema has no class-universe column.
pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    write_csv(dataset, &mut out)
}

pub fn write_csv(dataset: &Dataset, out: &mut impl Write) -> Result<()> {
    // Header columns follow the partition's column order.
    let f = dataset.num_features();
    let mut names = vec![String::new(); f];
    for rel in Relation::ALL {
        for (k, col) in dataset.partition.range(rel).enumerate() {
            names[col] = format!("{}{}", rel.prefix(), k);
        }
    }
    write!(out, "subject_id,label")?;
    for name in &names {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for r in &dataset.records {
        write!(
            out,
            "{},{}",
            r.subject_id,
            r.label.map_or("", DiagnosisClass::name)
        )?;
        for v in &r.features {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
