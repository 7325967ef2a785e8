//! Subject records, modality partitioning, and dataset containers.

pub mod io;
pub mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diagnostic classes in canonical order (class indices 0, 1, 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagnosisClass {
    Cn,
    Mci,
    Ad,
}

impl DiagnosisClass {
    pub const ALL: [DiagnosisClass; 3] =
        [DiagnosisClass::Cn, DiagnosisClass::Mci, DiagnosisClass::Ad];

    pub fn name(self) -> &'static str {
        match self {
            DiagnosisClass::Cn => "CN",
            DiagnosisClass::Mci => "MCI",
            DiagnosisClass::Ad => "AD",
        }
    }

    pub fn parse(s: &str) -> Option<DiagnosisClass> {
        match s {
            "CN" => Some(DiagnosisClass::Cn),
            "MCI" => Some(DiagnosisClass::Mci),
            "AD" => Some(DiagnosisClass::Ad),
            _ => None,
        }
    }
}

/// Feature relations (modalities), in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Rf,
    Cog,
    Mri,
}

pub const NUM_RELATIONS: usize = 3;

impl Relation {
    pub const ALL: [Relation; NUM_RELATIONS] = [Relation::Rf, Relation::Cog, Relation::Mri];

    pub fn index(self) -> usize {
        match self {
            Relation::Rf => 0,
            Relation::Cog => 1,
            Relation::Mri => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Relation::Rf => "rf",
            Relation::Cog => "cog",
            Relation::Mri => "mri",
        }
    }

    /// CSV column prefix, e.g. `rf_`.
    pub fn prefix(self) -> &'static str {
        match self {
            Relation::Rf => "rf_",
            Relation::Cog => "cog_",
            Relation::Mri => "mri_",
        }
    }
}

/// Column index ranges per relation; the ranges are disjoint and tile
/// `[0, F)` exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalityPartition {
    /// Half-open `[start, end)` per relation, indexed by `Relation::index`.
    pub ranges: [(usize, usize); NUM_RELATIONS],
}

impl ModalityPartition {
    /// Contiguous canonical layout: RF columns, then COG, then MRI.
    pub fn contiguous(d_rf: usize, d_cog: usize, d_mri: usize) -> Result<Self> {
        let p = ModalityPartition {
            ranges: [
                (0, d_rf),
                (d_rf, d_rf + d_cog),
                (d_rf + d_cog, d_rf + d_cog + d_mri),
            ],
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let mut sorted = self.ranges;
        sorted.sort_by_key(|r| r.0);
        let mut cursor = 0;
        for (start, end) in sorted {
            if start != cursor || end <= start {
                return Err(Error::Schema(format!(
                    "partition ranges must tile [0, F) with nonempty groups, got {:?}",
                    self.ranges
                )));
            }
            cursor = end;
        }
        Ok(())
    }

    pub fn range(&self, g: Relation) -> std::ops::Range<usize> {
        let (s, e) = self.ranges[g.index()];
        s..e
    }

    pub fn dim(&self, g: Relation) -> usize {
        let (s, e) = self.ranges[g.index()];
        e - s
    }

    pub fn total_dim(&self) -> usize {
        self.ranges.iter().map(|(s, e)| e - s).sum()
    }
}

/// One subject: id, optional diagnostic label, and the full feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub label: Option<DiagnosisClass>,
    pub features: Vec<f64>,
}

/// An immutable cohort: records plus the modality partition and the active
/// class list (length 3 for three-class tasks, 2 for binary tasks).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<SubjectRecord>,
    pub partition: ModalityPartition,
    pub class_names: Vec<DiagnosisClass>,
}

impl Dataset {
    pub fn new(
        records: Vec<SubjectRecord>,
        partition: ModalityPartition,
        class_names: Vec<DiagnosisClass>,
    ) -> Result<Self> {
        partition.validate()?;
        let f = partition.total_dim();
        let mut seen = std::collections::HashSet::new();
        for r in &records {
            if r.features.len() != f {
                return Err(Error::Schema(format!(
                    "subject {} has {} features, dataset declares {f}",
                    r.subject_id,
                    r.features.len()
                )));
            }
            if r.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::Schema(format!(
                    "subject {} has non-finite features",
                    r.subject_id
                )));
            }
            if let Some(label) = r.label {
                if !class_names.contains(&label) {
                    return Err(Error::Schema(format!(
                        "subject {} labeled {} outside active classes",
                        r.subject_id,
                        label.name()
                    )));
                }
            }
            if !seen.insert(r.subject_id.clone()) {
                return Err(Error::Schema(format!(
                    "duplicate subject_id {}",
                    r.subject_id
                )));
            }
        }
        Ok(Dataset {
            records,
            partition,
            class_names,
        })
    }

    pub fn num_features(&self) -> usize {
        self.partition.total_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Class index of a label within the active class list.
    pub fn class_index(&self, label: DiagnosisClass) -> Option<usize> {
        self.class_names.iter().position(|&c| c == label)
    }

    pub fn label_index(&self, record: &SubjectRecord) -> Option<usize> {
        record.label.and_then(|l| self.class_index(l))
    }

    /// Indices of labeled records, grouped by class index.
    pub fn labeled_by_class(&self, subset: &[usize]) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.num_classes()];
        for &i in subset {
            if let Some(c) = self.label_index(&self.records[i]) {
                groups[c].push(i);
            }
        }
        groups
    }

    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.records.len())
            .filter(|&i| self.label_index(&self.records[i]).is_some())
            .collect()
    }

    /// Restrict to the given class pair/list; unlabeled records are kept,
    /// records of other classes are dropped. Realizes binary tasks like
    /// CN vs AD without separate code paths.
    pub fn filter_classes(&self, classes: &[DiagnosisClass]) -> Result<Dataset> {
        if classes.len() < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        let mut names = Vec::new();
        for c in DiagnosisClass::ALL {
            if classes.contains(&c) {
                names.push(c);
            }
        }
        if names.len() != classes.len() {
            return Err(Error::Config("duplicate classes in filter".into()));
        }
        let records = self
            .records
            .iter()
            .filter(|r| r.label.is_none_or(|l| names.contains(&l)))
            .cloned()
            .collect();
        Dataset::new(records, self.partition.clone(), names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, label: Option<DiagnosisClass>, f: Vec<f64>) -> SubjectRecord {
        SubjectRecord {
            subject_id: id.into(),
            label,
            features: f,
        }
    }

    #[test]
    fn partition_tiles_feature_space() {
        let p = ModalityPartition::contiguous(2, 3, 2).unwrap();
        assert_eq!(p.range(Relation::Rf), 0..2);
        assert_eq!(p.range(Relation::Cog), 2..5);
        assert_eq!(p.range(Relation::Mri), 5..7);
        assert_eq!(p.total_dim(), 7);
        assert!(ModalityPartition::contiguous(0, 1, 1).is_err());
    }

    #[test]
    fn dataset_rejects_duplicates_and_bad_lengths() {
        let p = ModalityPartition::contiguous(1, 1, 1).unwrap();
        let classes = DiagnosisClass::ALL.to_vec();
        let dup = vec![
            record("a", None, vec![0.0; 3]),
            record("a", None, vec![0.0; 3]),
        ];
        assert!(Dataset::new(dup, p.clone(), classes.clone()).is_err());
        let short = vec![record("a", None, vec![0.0; 2])];
        assert!(Dataset::new(short, p, classes).is_err());
    }

    #[test]
    fn filter_classes_relabels_indices() {
        let p = ModalityPartition::contiguous(1, 1, 1).unwrap();
        let records = vec![
            record("a", Some(DiagnosisClass::Cn), vec![0.0; 3]),
            record("b", Some(DiagnosisClass::Mci), vec![0.0; 3]),
            record("c", Some(DiagnosisClass::Ad), vec![0.0; 3]),
        ];
        let d = Dataset::new(records, p, DiagnosisClass::ALL.to_vec()).unwrap();
        let binary = d
            .filter_classes(&[DiagnosisClass::Cn, DiagnosisClass::Ad])
            .unwrap();
        assert_eq!(binary.records.len(), 2);
        assert_eq!(binary.num_classes(), 2);
        assert_eq!(binary.class_index(DiagnosisClass::Ad), Some(1));
    }
}
