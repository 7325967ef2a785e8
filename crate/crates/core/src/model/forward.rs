//! Episode forward pass on the differentiation tape.
//!
//! Pipeline: per-relation one-hop attention (heads concatenated) ->
//! node-wise gated fusion -> fused embeddings broadcast to all relation
//! graphs -> per-relation two-hop attention (heads averaged) -> second
//! fusion -> MLP with ReLU hidden layer -> softmax class probabilities
//! for the query row. Attention coefficients (pre-dropout) and fusion
//! gates are recorded for normalization checks and export.

use std::rc::Rc;

use super::{AttentionRecord, EdgeAttention, LayerRecord, ModelParameters, LEAKY_SLOPE};
use crate::data::NUM_RELATIONS;
use crate::error::{Error, Result};
use crate::graph::RelationalGraph;
use crate::numeric::matrix::Matrix;
use crate::numeric::rng::RngStream;
use crate::numeric::tape::{Axis, NodeId, Tape};

/// Dropout behavior of one forward pass. Training draws an inverted
/// Bernoulli mask over the attention coefficients from the given stream;
/// inference applies no dropout and needs no rescaling.
#[derive(Debug, Clone)]
pub enum DropoutSpec {
    Inference,
    Train { rate: f64, stream: RngStream },
}

/// Everything the model consumes for one episode. `node_labels` feeds the
/// optional label channel only; the query row is always zeroed there.
pub struct EpisodeInputs<'a> {
    pub features: &'a Matrix,
    pub node_labels: &'a [Option<usize>],
    pub graphs: &'a [RelationalGraph],
    pub query_index: usize,
}

pub struct ForwardOutput {
    pub tape: Tape,
    /// Node holding the 1 x C query probability row.
    pub prob_node: NodeId,
    pub probabilities: Vec<f64>,
    /// Parameter leaf nodes in canonical tensor order.
    pub param_nodes: Vec<NodeId>,
    pub record: AttentionRecord,
}

struct RelationEdges {
    edges: Rc<Vec<(usize, usize)>>,
    dst_segments: Rc<Vec<usize>>,
}

pub fn forward(
    inputs: &EpisodeInputs,
    params: &ModelParameters,
    dropout: DropoutSpec,
) -> Result<ForwardOutput> {
    let config = &params.config;
    let n = inputs.features.rows();
    if inputs.features.cols() != config.feature_dim {
        return Err(Error::Shape(format!(
            "episode features width {} vs config {}",
            inputs.features.cols(),
            config.feature_dim
        )));
    }
    if inputs.graphs.len() != NUM_RELATIONS {
        return Err(Error::Shape(format!(
            "expected {NUM_RELATIONS} relational graphs, got {}",
            inputs.graphs.len()
        )));
    }
    if inputs.node_labels.len() != n || inputs.query_index >= n {
        return Err(Error::Shape(
            "node labels / query index out of range".into(),
        ));
    }
    for g in inputs.graphs {
        if g.n != n {
            return Err(Error::Shape(format!(
                "graph over {} nodes, episode has {n}",
                g.n
            )));
        }
    }

    let mut dropout = dropout;
    let mut tape = Tape::new();

    // Parameter leaves, in canonical tensor order.
    let mut param_nodes = Vec::new();
    // Per relation: ((w, a) per head, gate).
    type RelationNodes = (Vec<(NodeId, NodeId)>, NodeId);
    let mut layer_nodes: [Vec<RelationNodes>; 2] = [Vec::new(), Vec::new()];
    for (slot, layer) in [&params.layer1, &params.layer2].into_iter().enumerate() {
        for rel in layer.iter() {
            let mut heads = Vec::new();
            for head in &rel.heads {
                let w = tape.leaf(head.w.clone());
                let a = tape.leaf(head.a.clone());
                param_nodes.extend([w, a]);
                heads.push((w, a));
            }
            let gate = tape.leaf(rel.gate.clone());
            param_nodes.push(gate);
            layer_nodes[slot].push((heads, gate));
        }
    }
    let w1 = tape.leaf(params.classifier.w1.clone());
    let b1 = tape.leaf(params.classifier.b1.clone());
    let w2 = tape.leaf(params.classifier.w2.clone());
    let b2 = tape.leaf(params.classifier.b2.clone());
    param_nodes.extend([w1, b1, w2, b2]);

    // Input features with the optional label channel.
    let mut x = Matrix::zeros(n, config.input_dim());
    for i in 0..n {
        x.row_mut(i)[..config.feature_dim].copy_from_slice(inputs.features.row(i));
        if config.label_channel && i != inputs.query_index {
            if let Some(label) = inputs.node_labels[i] {
                if label >= config.num_classes {
                    return Err(Error::Shape(format!(
                        "label index {label} out of {} classes",
                        config.num_classes
                    )));
                }
                x[(i, config.feature_dim + label)] = 1.0;
            }
        }
    }
    let input_node = tape.leaf(x);

    let rel_edges: Vec<RelationEdges> = inputs
        .graphs
        .iter()
        .map(|g| {
            let edges: Vec<(usize, usize)> = g.edges.iter().map(|e| (e.src, e.dst)).collect();
            let dst_segments: Vec<usize> = g.edges.iter().map(|e| e.dst).collect();
            RelationEdges {
                edges: Rc::new(edges),
                dst_segments: Rc::new(dst_segments),
            }
        })
        .collect();

    let mut record = AttentionRecord::default();
    let mut h = input_node;
    for layer_idx in 0..2 {
        let mut layer_record = LayerRecord::default();
        let concat_heads = layer_idx == 0;
        let mut per_relation = Vec::with_capacity(NUM_RELATIONS);
        for rel_idx in 0..NUM_RELATIONS {
            let (heads, _) = &layer_nodes[layer_idx][rel_idx];
            let mut head_records = Vec::with_capacity(heads.len());
            let mut head_outputs = Vec::with_capacity(heads.len());
            for &(w, a) in heads {
                let (out, rec) =
                    attention_head(&mut tape, h, w, a, &rel_edges[rel_idx], n, &mut dropout)?;
                head_outputs.push(out);
                head_records.push(rec);
            }
            layer_record.attention.push(head_records);
            let combined = if concat_heads {
                tape.concat(&head_outputs, Axis::Cols)?
            } else {
                let mut acc = head_outputs[0];
                for &extra in &head_outputs[1..] {
                    acc = tape.add(acc, extra)?;
                }
                tape.scalar_mul(acc, 1.0 / head_outputs.len() as f64)
            };
            per_relation.push(combined);
        }

        let gates: Vec<NodeId> = layer_nodes[layer_idx].iter().map(|(_, g)| *g).collect();
        let (fused, gammas) = gated_fusion(&mut tape, &per_relation, &gates, n)?;
        layer_record.gates = gammas;
        record.layers.push(layer_record);
        h = fused;
    }

    // Classifier on the query row.
    let q = tape.gather_row(h, inputs.query_index)?;
    let z1 = tape.matmul(q, false, w1, true)?;
    let z1 = tape.add(z1, b1)?;
    let z1 = tape.relu(z1);
    let logits = tape.matmul(z1, false, w2, true)?;
    let logits = tape.add(logits, b2)?;
    let prob_node = tape.segment_softmax(logits, Rc::new(vec![0; config.num_classes]))?;
    let probabilities = tape.value(prob_node).data().to_vec();

    Ok(ForwardOutput {
        tape,
        prob_node,
        probabilities,
        param_nodes,
        record,
    })
}

/// One attention head on one relation graph: project, score directed
/// edges, normalize per destination, aggregate, ELU.
fn attention_head(
    tape: &mut Tape,
    h: NodeId,
    w: NodeId,
    a: NodeId,
    rel: &RelationEdges,
    n: usize,
    dropout: &mut DropoutSpec,
) -> Result<(NodeId, Vec<EdgeAttention>)> {
    let projected = tape.matmul(h, false, w, true)?;
    let dsts: Rc<Vec<usize>> = Rc::new(rel.edges.iter().map(|&(_, d)| d).collect());
    let srcs: Rc<Vec<usize>> = Rc::new(rel.edges.iter().map(|&(s, _)| s).collect());
    let p_dst = tape.gather_rows(projected, dsts)?;
    let p_src = tape.gather_rows(projected, srcs)?;
    let pair = tape.concat(&[p_dst, p_src], Axis::Cols)?;
    let logits = tape.matmul(pair, false, a, false)?;
    let logits = tape.leaky_relu(logits, LEAKY_SLOPE);
    let alpha = tape.segment_softmax(logits, Rc::clone(&rel.dst_segments))?;

    let recorded: Vec<EdgeAttention> = rel
        .edges
        .iter()
        .zip(tape.value(alpha).data())
        .map(|(&(src, dst), &alpha)| EdgeAttention { src, dst, alpha })
        .collect();

    let alpha = match dropout {
        DropoutSpec::Inference => alpha,
        DropoutSpec::Train { rate, stream } => {
            let keep = 1.0 - *rate;
            let mask: Vec<f64> = (0..rel.edges.len())
                .map(|_| {
                    if stream.next_f64() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                })
                .collect();
            tape.dropout(alpha, Rc::new(mask))?
        }
    };

    let message = tape.weighted_neighbor_sum(alpha, projected, Rc::clone(&rel.edges), n)?;
    Ok((tape.elu(message), recorded))
}

/// Node-wise softmax gate over the per-relation embeddings.
fn gated_fusion(
    tape: &mut Tape,
    relation_embeddings: &[NodeId],
    gates: &[NodeId],
    n: usize,
) -> Result<(NodeId, Vec<Vec<f64>>)> {
    let mut scores = Vec::with_capacity(relation_embeddings.len());
    for (&h_rel, &gate) in relation_embeddings.iter().zip(gates) {
        scores.push(tape.matmul(h_rel, false, gate, false)?);
    }
    let stacked_scores = tape.concat(&scores, Axis::Rows)?;
    // Entry g*n + i belongs to node i's gate group.
    let segments: Rc<Vec<usize>> = Rc::new(
        (0..relation_embeddings.len() * n)
            .map(|idx| idx % n)
            .collect(),
    );
    let gamma = tape.segment_softmax(stacked_scores, segments)?;

    let gamma_values = tape.value(gamma).data().to_vec();
    let per_relation_gamma: Vec<Vec<f64>> = (0..relation_embeddings.len())
        .map(|g| gamma_values[g * n..(g + 1) * n].to_vec())
        .collect();

    let stacked_embeddings = tape.concat(relation_embeddings, Axis::Rows)?;
    let mix_edges: Rc<Vec<(usize, usize)>> = Rc::new(
        (0..relation_embeddings.len() * n)
            .map(|idx| (idx, idx % n))
            .collect(),
    );
    let fused = tape.weighted_neighbor_sum(gamma, stacked_embeddings, mix_edges, n)?;
    Ok((fused, per_relation_gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ModalityPartition;
    use crate::graph::{build_relational_graph, FallbackMode};
    use crate::model::ModelConfig;

    fn config(feature_dim: usize) -> ModelConfig {
        ModelConfig {
            num_classes: 3,
            feature_dim,
            partition: ModalityPartition::contiguous(1, 1, feature_dim - 2).unwrap(),
            label_channel: true,
            head_dim_1: 4,
            heads_1: 2,
            head_dim_2: 3,
            heads_2: 2,
            classifier_hidden: 4,
        }
    }

    fn episode_fixture(n: usize, seed: u64) -> (Matrix, Vec<Option<usize>>, Vec<RelationalGraph>) {
        let mut s = RngStream::new(seed, 0);
        let feats = Matrix::from_fn(n, 4, |_, _| s.next_f64() * 2.0 - 1.0);
        let labels: Vec<Option<usize>> = (0..n)
            .map(|i| if i + 1 == n { None } else { Some(i % 3) })
            .collect();
        let mut d = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = s.next_f64() * 2.0 + 0.1;
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        let graphs: Vec<RelationalGraph> = (0..3)
            .map(|_| {
                build_relational_graph(&d, 3, 1.5, FallbackMode::On)
                    .unwrap()
                    .0
            })
            .collect();
        (feats, labels, graphs)
    }

    #[test]
    fn zero_parameters_give_uniform_query_probabilities() {
        let (feats, labels, graphs) = episode_fixture(7, 1);
        let params = ModelParameters::zeros(config(4)).unwrap();
        let out = forward(
            &EpisodeInputs {
                features: &feats,
                node_labels: &labels,
                graphs: &graphs,
                query_index: 6,
            },
            &params,
            DropoutSpec::Inference,
        )
        .unwrap();
        for p in &out.probabilities {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_is_deterministic_given_dropout_stream() {
        let (feats, labels, graphs) = episode_fixture(9, 2);
        let params = ModelParameters::init(config(4), &mut RngStream::new(3, 0)).unwrap();
        let inputs = EpisodeInputs {
            features: &feats,
            node_labels: &labels,
            graphs: &graphs,
            query_index: 8,
        };
        let run = || {
            forward(
                &inputs,
                &params,
                DropoutSpec::Train {
                    rate: 0.2,
                    stream: RngStream::new(11, 0),
                },
            )
            .unwrap()
            .probabilities
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn attention_and_gates_are_normalized() {
        let (feats, labels, graphs) = episode_fixture(8, 4);
        let params = ModelParameters::init(config(4), &mut RngStream::new(5, 0)).unwrap();
        let out = forward(
            &EpisodeInputs {
                features: &feats,
                node_labels: &labels,
                graphs: &graphs,
                query_index: 7,
            },
            &params,
            DropoutSpec::Inference,
        )
        .unwrap();
        for layer in &out.record.layers {
            for rel_heads in &layer.attention {
                for head in rel_heads {
                    let mut per_dst = [0.0; 8];
                    for e in head {
                        per_dst[e.dst] += e.alpha;
                    }
                    for (i, sum) in per_dst.iter().enumerate() {
                        assert!((sum - 1.0).abs() <= 1e-9, "dst {i}: {sum}");
                    }
                }
            }
            for i in 0..8 {
                let total: f64 = layer.gates.iter().map(|g| g[i]).sum();
                assert!((total - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn identical_features_yield_uniform_attention() {
        let n = 5;
        let feats = Matrix::from_fn(n, 4, |_, j| j as f64 * 0.5 + 1.0);
        let labels = [Some(0), Some(1), Some(2), Some(0), None];
        let mut d = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    d[(i, j)] = 0.5;
                }
            }
        }
        let graphs: Vec<RelationalGraph> = (0..3)
            .map(|_| {
                build_relational_graph(&d, 4, 1.0, FallbackMode::On)
                    .unwrap()
                    .0
            })
            .collect();
        // Label channel off so every node's input row is identical.
        let mut cfg = config(4);
        cfg.label_channel = false;
        let params = ModelParameters::init(cfg, &mut RngStream::new(8, 0)).unwrap();
        let out = forward(
            &EpisodeInputs {
                features: &feats,
                node_labels: &labels,
                graphs: &graphs,
                query_index: 4,
            },
            &params,
            DropoutSpec::Inference,
        )
        .unwrap();
        for head in &out.record.layers[0].attention[0] {
            for e in head {
                assert!((e.alpha - 0.25).abs() < 1e-12, "alpha {}", e.alpha);
            }
        }
    }

    #[test]
    fn fusion_saturates_under_a_large_gate_margin() {
        let mut tape = Tape::new();
        let h_rf = tape.leaf(Matrix::from_vec(2, 1, vec![1.0, 0.8]).unwrap());
        let h_cog = tape.leaf(Matrix::from_vec(2, 1, vec![-0.4, 0.2]).unwrap());
        let h_mri = tape.leaf(Matrix::from_vec(2, 1, vec![0.3, -0.9]).unwrap());
        // Gate scores 100*h_rf vs 0: margin far above 40.
        let g_rf = tape.leaf(Matrix::column(&[100.0]));
        let g_zero = tape.leaf(Matrix::column(&[0.0]));
        let g_zero2 = tape.leaf(Matrix::column(&[0.0]));
        let (fused, gammas) = gated_fusion(
            &mut tape,
            &[h_rf, h_cog, h_mri],
            &[g_rf, g_zero, g_zero2],
            2,
        )
        .unwrap();
        let out = tape.value(fused);
        assert!((out[(0, 0)] - 1.0).abs() <= 1e-12);
        assert!((out[(1, 0)] - 0.8).abs() <= 1e-12);
        assert!(gammas[0].iter().all(|&g| (g - 1.0).abs() < 1e-12));
    }

    #[test]
    fn fusion_mixture_matches_the_scalar_softmax_oracle() {
        let mut tape = Tape::new();
        // One node, one-dimensional embeddings 1, 2, 4; gate scores (1,0,0).
        let h_rf = tape.leaf(Matrix::column(&[1.0]));
        let h_cog = tape.leaf(Matrix::column(&[2.0]));
        let h_mri = tape.leaf(Matrix::column(&[4.0]));
        let g_one = tape.leaf(Matrix::column(&[1.0]));
        let g_zero = tape.leaf(Matrix::column(&[0.0]));
        let g_zero2 = tape.leaf(Matrix::column(&[0.0]));
        let (fused, gammas) = gated_fusion(
            &mut tape,
            &[h_rf, h_cog, h_mri],
            &[g_one, g_zero, g_zero2],
            1,
        )
        .unwrap();
        let weights = crate::numeric::special::stable_softmax(&[1.0, 0.0, 0.0]).unwrap();
        assert!((weights[0] - 0.5761168847658291).abs() < 1e-12);
        assert!((weights[1] - 0.21194155761708544).abs() < 1e-12);
        for (g, w) in gammas.iter().zip(&weights) {
            assert!((g[0] - w).abs() <= 1e-12);
        }
        let expect = weights[0] + 2.0 * weights[1] + 4.0 * weights[2];
        assert!((tape.value(fused)[(0, 0)] - expect).abs() <= 1e-12);
    }

    #[test]
    fn single_in_edge_gets_full_attention() {
        let (feats, labels, _) = episode_fixture(4, 6);
        let mut d = Matrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    d[(i, j)] = 5.0;
                }
            }
        }
        // tau below every distance: single fallback edge per node.
        let graphs: Vec<RelationalGraph> = (0..3)
            .map(|_| {
                build_relational_graph(&d, 2, 1.0, FallbackMode::On)
                    .unwrap()
                    .0
            })
            .collect();
        let params = ModelParameters::init(config(4), &mut RngStream::new(9, 0)).unwrap();
        let out = forward(
            &EpisodeInputs {
                features: &feats,
                node_labels: &labels,
                graphs: &graphs,
                query_index: 3,
            },
            &params,
            DropoutSpec::Inference,
        )
        .unwrap();
        for head in &out.record.layers[0].attention[0] {
            for e in head {
                assert_eq!(e.alpha, 1.0);
            }
        }
    }
}
