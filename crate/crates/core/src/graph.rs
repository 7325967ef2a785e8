//! Directed relational graph construction from distance matrices:
//! inverse-distance weights, per-node k-nearest-neighbor selection, and
//! threshold gating with a nearest-neighbor fallback for nodes the
//! threshold would isolate.

use std::io::Write;

use crate::error::{Error, Result};
use crate::numeric::matrix::Matrix;

/// Directed edge src -> dst: dst aggregates from src.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
    /// True when the edge survived only through the isolation fallback.
    pub fallback: bool,
}

/// Behavior when threshold gating isolates a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FallbackMode {
    /// Re-attach the single nearest neighbor, flagged as fallback.
    On,
    /// Fail graph construction instead.
    Error,
}

#[derive(Debug, Clone)]
pub struct RelationalGraph {
    pub n: usize,
    pub k: usize,
    pub tau: f64,
    /// Sorted by (dst, distance rank); every node has at least one in-edge.
    pub edges: Vec<Edge>,
}

impl RelationalGraph {
    /// Edge indices grouped by destination node.
    pub fn in_edges(&self) -> Vec<Vec<usize>> {
        let mut by_dst = vec![Vec::new(); self.n];
        for (e, edge) in self.edges.iter().enumerate() {
            by_dst[edge.dst].push(e);
        }
        by_dst
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|e| e.dst == node).count()
    }
}

/// Dense similarity weights w_ij = 1 / (1 + D_ij), zero diagonal.
pub fn dense_weights(d: &Matrix) -> Matrix {
    let n = d.rows();
    Matrix::from_fn(
        n,
        n,
        |i, j| {
            if i == j {
                0.0
            } else {
                1.0 / (1.0 + d[(i, j)])
            }
        },
    )
}

/// For each node i, the k nearest sources j != i by distance; exact ties
/// broken by lower node index. The result defines in-edges j -> i.
pub fn knn_select(d: &Matrix, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = d.rows();
    if d.cols() != n {
        return Err(Error::Shape(format!("distance matrix {:?}", d.shape())));
    }
    if k < 1 || k >= n {
        return Err(Error::Config(format!(
            "knn budget k={k} must satisfy 1 <= k <= N-1 (N={n})"
        )));
    }
    let mut neighbors = Vec::with_capacity(n);
    for i in 0..n {
        let mut candidates: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        candidates.sort_by(|&a, &b| d[(i, a)].total_cmp(&d[(i, b)]).then(a.cmp(&b)));
        candidates.truncate(k);
        neighbors.push(candidates);
    }
    Ok(neighbors)
}

/// Drop selected edges with D > tau; nodes left with no in-edge regain
/// their single nearest neighbor (flagged) or trigger an error, per mode.
pub fn threshold_gate(
    neighbors: &[Vec<usize>],
    d: &Matrix,
    k: usize,
    tau: f64,
    mode: FallbackMode,
) -> Result<RelationalGraph> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!("tau must be positive, got {tau}")));
    }
    let n = neighbors.len();
    let mut edges = Vec::new();
    for (i, cands) in neighbors.iter().enumerate() {
        let mut kept = 0;
        for &j in cands {
            if d[(i, j)] <= tau {
                edges.push(Edge {
                    src: j,
                    dst: i,
                    weight: 1.0 / (1.0 + d[(i, j)]),
                    fallback: false,
                });
                kept += 1;
            }
        }
        if kept == 0 {
            match mode {
                FallbackMode::On => {
                    // Candidates are distance-sorted, so the nearest is first.
                    let j = cands[0];
                    edges.push(Edge {
                        src: j,
                        dst: i,
                        weight: 1.0 / (1.0 + d[(i, j)]),
                        fallback: true,
                    });
                }
                FallbackMode::Error => {
                    return Err(Error::Graph(format!(
                        "node {i} isolated by tau={tau} and fallback is disabled"
                    )));
                }
            }
        }
    }
    Ok(RelationalGraph { n, k, tau, edges })
}

/// Per-relation edge statistics from a build.
#[derive(Debug, Clone, Default)]
pub struct GraphStats {
    pub edges: usize,
    pub fallback_edges: usize,
}

pub fn build_relational_graph(
    d: &Matrix,
    k: usize,
    tau: f64,
    mode: FallbackMode,
) -> Result<(RelationalGraph, GraphStats)> {
    let neighbors = knn_select(d, k)?;
    let graph = threshold_gate(&neighbors, d, k, tau, mode)?;
    let stats = GraphStats {
        edges: graph.edges.len(),
        fallback_edges: graph.edges.iter().filter(|e| e.fallback).count(),
    };
    Ok((graph, stats))
}

pub fn build_relational_graphs(
    distances: &[Matrix],
    k: usize,
    tau: f64,
    mode: FallbackMode,
) -> Result<(Vec<RelationalGraph>, Vec<GraphStats>)> {
    let mut graphs = Vec::with_capacity(distances.len());
    let mut stats = Vec::with_capacity(distances.len());
    for d in distances {
        let (g, s) = build_relational_graph(d, k, tau, mode)?;
        graphs.push(g);
        stats.push(s);
    }
    Ok((graphs, stats))
}

/// Debug dump: one `relation src dst weight fallback_flag` line per edge,
/// weights in fixed 6-decimal formatting.
pub fn write_edge_list(
    out: &mut impl Write,
    labeled: &[(&str, &RelationalGraph)],
) -> std::io::Result<()> {
    for (name, graph) in labeled {
        for e in &graph.edges {
            writeln!(
                out,
                "{name} {} {} {:.6} {}",
                e.src,
                e.dst,
                e.weight,
                u8::from(e.fallback)
            )?;
        }
    }
    Ok(())
}
