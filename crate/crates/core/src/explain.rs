//! Machine-readable exports of the gating and attention coefficients:
//! a gating CSV across episodes, per-episode attention graphs as JSON,
//! and a plain edge-list text format for graph tooling.

use std::io::Write;

use serde::Serialize;

use crate::data::{Dataset, Relation, NUM_RELATIONS};
use crate::error::{Error, Result};
use crate::model::{forward, AttentionRecord, DropoutSpec, EpisodeInputs, ModelParameters};
use crate::numeric::rng::{streams, RngStream};
use crate::train::episode::sample_episode;
use crate::train::{Episode, TrainingConfig};

/// Query-node gate weights of one episode and layer.
#[derive(Debug, Clone, Serialize)]
pub struct GatingRow {
    pub episode: usize,
    /// 1-based attention layer.
    pub layer: usize,
    pub gamma_rf: f64,
    pub gamma_cog: f64,
    pub gamma_mri: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct GatingHeatmapData {
    pub rows: Vec<GatingRow>,
}

/// One evaluated episode with its recorded coefficients.
pub struct EvaluatedEpisode {
    pub episode: Episode,
    pub record: AttentionRecord,
    pub probabilities: Vec<f64>,
}

/// Run inference (dropout off, recording on) over `count` episodes
/// sampled from the labeled data.
pub fn evaluate_episodes(
    params: &ModelParameters,
    dataset: &Dataset,
    config: &TrainingConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<EvaluatedEpisode>> {
    let labeled = dataset.labeled_indices();
    let root = RngStream::new(seed, streams::EXPLAIN);
    let mut out = Vec::with_capacity(count);
    for e in 0..count {
        let mut stream = root.substream(e as u64);
        let episode = sample_episode(dataset, &labeled, config, &mut stream, None)?;
        let fwd = forward(
            &EpisodeInputs {
                features: &episode.features,
                node_labels: &episode.node_labels,
                graphs: &episode.graphs,
                query_index: episode.query_index,
            },
            params,
            DropoutSpec::Inference,
        )?;
        out.push(EvaluatedEpisode {
            episode,
            record: fwd.record,
            probabilities: fwd.probabilities,
        });
    }
    Ok(out)
}

/// Query-node gating weights per episode and layer.
pub fn export_gating(evaluated: &[EvaluatedEpisode]) -> Result<GatingHeatmapData> {
    let mut rows = Vec::new();
    for (e, ev) in evaluated.iter().enumerate() {
        let q = ev.episode.query_index;
        for (layer_idx, layer) in ev.record.layers.iter().enumerate() {
            if layer.gates.len() != NUM_RELATIONS {
                return Err(Error::Shape("gate record missing a relation".into()));
            }
            rows.push(GatingRow {
                episode: e,
                layer: layer_idx + 1,
                gamma_rf: layer.gates[Relation::Rf.index()][q],
                gamma_cog: layer.gates[Relation::Cog.index()][q],
                gamma_mri: layer.gates[Relation::Mri.index()][q],
            });
        }
    }
    Ok(GatingHeatmapData { rows })
}

pub fn write_gating_csv(data: &GatingHeatmapData, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "episode,layer,gamma_rf,gamma_cog,gamma_mri")?;
    for r in &data.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.episode, r.layer, r.gamma_rf, r.gamma_cog, r.gamma_mri
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct AttentionNode {
    pub index: usize,
    pub subject_id: String,
    /// Class name of support nodes; None on the query.
    pub class: Option<String>,
    pub is_query: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttentionEdge {
    pub src: usize,
    pub dst: usize,
    /// 1-based attention layer.
    pub layer: usize,
    /// Mean attention over the layer's heads.
    pub alpha: f64,
    pub per_head: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttentionRelationGraph {
    pub relation: String,
    pub edges: Vec<AttentionEdge>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttentionGraphData {
    pub nodes: Vec<AttentionNode>,
    pub relations: Vec<AttentionRelationGraph>,
}

/// Attention graphs of one evaluated episode, with per-edge head-mean
/// attention per layer.
pub fn export_attention(evaluated: &EvaluatedEpisode) -> Result<AttentionGraphData> {
    let episode = &evaluated.episode;
    let nodes = (0..episode.node_count())
        .map(|i| AttentionNode {
            index: i,
            subject_id: episode.subject_ids[i].clone(),
            class: episode.node_labels[i].map(|c| format!("{c}")),
            is_query: i == episode.query_index,
        })
        .collect();

    let mut relations = Vec::with_capacity(NUM_RELATIONS);
    for rel in Relation::ALL {
        let mut edges = Vec::new();
        for (layer_idx, layer) in evaluated.record.layers.iter().enumerate() {
            let heads = &layer.attention[rel.index()];
            if heads.is_empty() {
                return Err(Error::Shape("attention record missing heads".into()));
            }
            let edge_count = heads[0].len();
            for e in 0..edge_count {
                let per_head: Vec<f64> = heads.iter().map(|h| h[e].alpha).collect();
                let alpha = per_head.iter().sum::<f64>() / per_head.len() as f64;
                edges.push(AttentionEdge {
                    src: heads[0][e].src,
                    dst: heads[0][e].dst,
                    layer: layer_idx + 1,
                    alpha,
                    per_head,
                });
            }
        }
        relations.push(AttentionRelationGraph {
            relation: rel.name().to_string(),
            edges,
        });
    }
    Ok(AttentionGraphData { nodes, relations })
}

/// Resolve class indices to names for the JSON export.
pub fn export_attention_named(
    evaluated: &EvaluatedEpisode,
    dataset: &Dataset,
) -> Result<AttentionGraphData> {
    let mut data = export_attention(evaluated)?;
    for node in &mut data.nodes {
        if let Some(class_idx) = evaluated.episode.node_labels[node.index] {
            node.class = Some(dataset.class_names[class_idx].name().to_string());
        }
    }
    Ok(data)
}

/// Plain text edge list: `relation layer src dst alpha`, alpha in fixed
/// 6-decimal formatting.
pub fn write_attention_edge_list(
    data: &AttentionGraphData,
    out: &mut impl Write,
) -> std::io::Result<()> {
    for rel in &data.relations {
        for e in &rel.edges {
            writeln!(
                out,
                "{} {} {} {} {:.6}",
                rel.relation, e.layer, e.src, e.dst, e.alpha
            )?;
        }
    }
    Ok(())
}

pub fn attention_json(data: &AttentionGraphData) -> Result<String> {
    Ok(serde_json::to_string_pretty(data)?)
}
