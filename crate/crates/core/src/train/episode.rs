//! Episode sampling and per-episode graph construction.
//!
//! Node ordering is class-major support (q subjects of class 0, then
//! class 1, ...) with the query last, so N = C*q + 1. Copula statistics
//! are computed inside the episode by default; the split scope instead
//! reuses rank statistics and covariances estimated once on the whole
//! training split.

use serde::{Deserialize, Serialize};

use super::TrainingConfig;
use crate::copula::{mahalanobis_matrix, rank_gaussianize, shrink_covariance, ShrunkCovariance};
use crate::data::{Dataset, Relation, NUM_RELATIONS};
use crate::error::{Error, Result};
use crate::graph::{build_relational_graphs, RelationalGraph};
use crate::numeric::matrix::Matrix;
use crate::numeric::rng::RngStream;
use crate::numeric::special::inv_norm_cdf;

/// Scope of the rank/covariance statistics feeding the graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaScope {
    /// Ranks and covariances over the episode's own N nodes.
    Episode,
    /// Ranks and covariances estimated once over the training split.
    Split,
}

/// One self-contained few-shot task with its derived graphs.
#[derive(Debug, Clone)]
pub struct Episode {
    /// Raw features, one row per node (N x F).
    pub features: Matrix,
    /// Support labels for the label channel; the query entry is None.
    pub node_labels: Vec<Option<usize>>,
    pub subject_ids: Vec<String>,
    pub query_index: usize,
    /// Ground-truth query class when known (training / evaluation).
    pub query_label: Option<usize>,
    pub copula: Vec<Matrix>,
    pub covariances: Vec<ShrunkCovariance>,
    pub distances: Vec<Matrix>,
    pub graphs: Vec<RelationalGraph>,
}

impl Episode {
    pub fn node_count(&self) -> usize {
        self.features.rows()
    }
}

/// An externally supplied query subject (inductive inference).
#[derive(Debug, Clone, Copy)]
pub struct QueryInput<'a> {
    pub subject_id: &'a str,
    pub features: &'a [f64],
}

/// Draw a balanced support set (q per class, uniform without
/// replacement) from the labeled part of `split`, plus a query drawn
/// uniformly from the remaining labeled subjects.
pub fn sample_episode(
    dataset: &Dataset,
    split: &[usize],
    config: &TrainingConfig,
    stream: &mut RngStream,
    split_copula: Option<&SplitCopula>,
) -> Result<Episode> {
    let support = sample_support(dataset, split, config.q, stream)?;
    let flat: Vec<usize> = support.iter().flatten().copied().collect();
    let remaining: Vec<usize> = dataset
        .labeled_by_class(split)
        .into_iter()
        .flatten()
        .filter(|i| !flat.contains(i))
        .collect();
    if remaining.is_empty() {
        return Err(Error::Sampling(
            "no labeled subject left to serve as the query".into(),
        ));
    }
    let query = remaining[stream.index(remaining.len())];
    build_episode_for_subject(dataset, &flat, query, config, split_copula)
}

/// Balanced support draw: class-major, q per class.
pub fn sample_support(
    dataset: &Dataset,
    split: &[usize],
    q: usize,
    stream: &mut RngStream,
) -> Result<Vec<Vec<usize>>> {
    let groups = dataset.labeled_by_class(split);
    let mut support = Vec::with_capacity(groups.len());
    for (c, group) in groups.iter().enumerate() {
        if group.len() < q {
            return Err(Error::Sampling(format!(
                "class {} has {} labeled subjects in the split, need q={q}",
                dataset.class_names[c].name(),
                group.len()
            )));
        }
        let picks = stream.sample_without_replacement(group.len(), q);
        support.push(picks.into_iter().map(|i| group[i]).collect());
    }
    Ok(support)
}

/// Episode around a dataset-resident query subject.
pub fn build_episode_for_subject(
    dataset: &Dataset,
    support: &[usize],
    query: usize,
    config: &TrainingConfig,
    split_copula: Option<&SplitCopula>,
) -> Result<Episode> {
    let record = &dataset.records[query];
    let query_label = dataset.label_index(record);
    let input = QueryInput {
        subject_id: &record.subject_id,
        features: &record.features,
    };
    let mut episode = build_episode(dataset, support, input, config, split_copula)?;
    episode.query_label = query_label;
    Ok(episode)
}

/// Episode around an arbitrary query feature vector.
pub fn build_episode(
    dataset: &Dataset,
    support: &[usize],
    query: QueryInput,
    config: &TrainingConfig,
    split_copula: Option<&SplitCopula>,
) -> Result<Episode> {
    if query.features.len() != dataset.num_features() {
        return Err(Error::Shape(format!(
            "query has {} features, dataset declares {}",
            query.features.len(),
            dataset.num_features()
        )));
    }
    let n = support.len() + 1;
    let mut features = Matrix::zeros(n, dataset.num_features());
    let mut node_labels = Vec::with_capacity(n);
    let mut subject_ids = Vec::with_capacity(n);
    for (row, &idx) in support.iter().enumerate() {
        let r = &dataset.records[idx];
        features.row_mut(row).copy_from_slice(&r.features);
        let label = dataset.label_index(r).ok_or_else(|| {
            Error::Sampling(format!("support subject {} is unlabeled", r.subject_id))
        })?;
        node_labels.push(Some(label));
        subject_ids.push(r.subject_id.clone());
    }
    features.row_mut(n - 1).copy_from_slice(query.features);
    node_labels.push(None);
    subject_ids.push(query.subject_id.to_string());

    let mut copula = Vec::with_capacity(NUM_RELATIONS);
    let mut covariances = Vec::with_capacity(NUM_RELATIONS);
    let mut distances = Vec::with_capacity(NUM_RELATIONS);
    for rel in Relation::ALL {
        let range = dataset.partition.range(rel);
        let (z, cov) = match (config.copula_scope, split_copula) {
            (CopulaScope::Episode, _) => {
                let sub = Matrix::from_fn(n, range.len(), |i, j| features[(i, range.start + j)]);
                let z = rank_gaussianize(&sub)?;
                let cov = shrink_covariance(&z, config.lambda)?;
                (z, cov)
            }
            (CopulaScope::Split, Some(sc)) => {
                let z = sc.gather(rel, support, query.features)?;
                (z, sc.covariances[rel.index()].clone())
            }
            (CopulaScope::Split, None) => {
                return Err(Error::Config(
                    "split copula scope requires precomputed split statistics".into(),
                ))
            }
        };
        let d = mahalanobis_matrix(&z, &cov.sigma)?;
        copula.push(z);
        covariances.push(cov);
        distances.push(d);
    }

    let (graphs, _) =
        build_relational_graphs(&distances, config.knn_k, config.tau, config.fallback)?;

    Ok(Episode {
        features,
        node_labels,
        subject_ids,
        query_index: n - 1,
        query_label: None,
        copula,
        covariances,
        distances,
        graphs,
    })
}

/// Rank statistics and shrunk covariances estimated once over a training
/// split, for the split copula scope. Split members reuse their
/// precomputed rows; an external query is rank-inserted into the split
/// sample (u = (r + 1)/(n_split + 2)).
#[derive(Debug, Clone)]
pub struct SplitCopula {
    /// Gaussianized row per dataset record index (split members only).
    rows: std::collections::HashMap<usize, Vec<f64>>,
    /// Sorted column values per feature column, for query insertion.
    sorted_columns: Vec<Vec<f64>>,
    pub covariances: Vec<ShrunkCovariance>,
    split_len: usize,
}

impl SplitCopula {
    pub fn build(dataset: &Dataset, split: &[usize], lambda: Option<f64>) -> Result<Self> {
        let n = split.len();
        if n < 2 {
            return Err(Error::DegenerateEpisode(format!(
                "split of {n} subjects cannot support rank statistics"
            )));
        }
        let f = dataset.num_features();
        let raw = Matrix::from_fn(n, f, |i, j| dataset.records[split[i]].features[j]);
        let z = rank_gaussianize(&raw)?;
        let mut rows = std::collections::HashMap::new();
        for (i, &idx) in split.iter().enumerate() {
            rows.insert(idx, z.row(i).to_vec());
        }
        let sorted_columns = (0..f)
            .map(|j| {
                let mut col: Vec<f64> = (0..n).map(|i| raw[(i, j)]).collect();
                col.sort_by(f64::total_cmp);
                col
            })
            .collect();
        let mut covariances = Vec::with_capacity(NUM_RELATIONS);
        for rel in Relation::ALL {
            let range = dataset.partition.range(rel);
            let sub = Matrix::from_fn(n, range.len(), |i, j| z[(i, range.start + j)]);
            covariances.push(shrink_covariance(&sub, lambda)?);
        }
        Ok(SplitCopula {
            rows,
            sorted_columns,
            covariances,
            split_len: n,
        })
    }

    /// Gaussianized value for an out-of-split observation: averaged
    /// insertion rank against the split column.
    fn insert_value(&self, column: usize, value: f64) -> Result<f64> {
        let col = &self.sorted_columns[column];
        let less = col.partition_point(|&v| v < value);
        let leq = col.partition_point(|&v| v <= value);
        let rank = less as f64 + (leq - less) as f64 / 2.0;
        let u = (rank + 1.0) / (self.split_len as f64 + 2.0);
        inv_norm_cdf(u)
    }

    /// Episode copula rows for one relation: support members from the
    /// precomputed table, the query by insertion.
    fn gather(&self, rel: Relation, support: &[usize], query_features: &[f64]) -> Result<Matrix> {
        let range = {
            // Columns of this relation within the full feature vector.
            let start = self.relation_start(rel)?;
            start.0..start.1
        };
        let d = range.len();
        let n = support.len() + 1;
        let mut z = Matrix::zeros(n, d);
        for (row, &idx) in support.iter().enumerate() {
            let full = self.rows.get(&idx).ok_or_else(|| {
                Error::Sampling(format!("subject index {idx} is outside the training split"))
            })?;
            z.row_mut(row).copy_from_slice(&full[range.clone()]);
        }
        for (j, col) in range.enumerate() {
            z[(n - 1, j)] = self.insert_value(col, query_features[col])?;
        }
        Ok(z)
    }

    fn relation_start(&self, rel: Relation) -> Result<(usize, usize)> {
        // Covariance dims recover the partition layout in canonical order.
        let mut start = 0;
        for r in Relation::ALL {
            let d = self.covariances[r.index()].sigma.rows();
            if r == rel {
                return Ok((start, start + d));
            }
            start += d;
        }
        Err(Error::Shape("relation outside partition".into()))
    }
}
