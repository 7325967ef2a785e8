//! Minimal reverse-mode differentiation tape over dense matrices.
//!
//! The primitive set covers exactly what the attention/fusion/classifier
//! stack needs: matmul (with transpose flags), add, concat, scalar
//! multiply, leaky_relu, elu, relu, log, segment softmax, weighted
//! neighbor sum, dropout by recorded mask, and row gathering. Each forward
//! node stores its inputs so the backward pass can compute exact adjoints
//! in reverse topological order. A tape is used by one thread at a time;
//! parallelism happens across independent tapes.

use std::rc::Rc;

use super::matrix::{gemm, Matrix};
use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul {
        a: NodeId,
        trans_a: bool,
        b: NodeId,
        trans_b: bool,
    },
    Add(NodeId, NodeId),
    Concat {
        parts: Vec<NodeId>,
        axis: Axis,
    },
    ScalarMul(NodeId, f64),
    LeakyRelu(NodeId, f64),
    Elu(NodeId),
    Relu(NodeId),
    Log(NodeId),
    SegmentSoftmax {
        input: NodeId,
        segments: Rc<Vec<usize>>,
    },
    WeightedNeighborSum {
        weights: NodeId,
        features: NodeId,
        edges: Rc<Vec<(usize, usize)>>,
    },
    Dropout {
        input: NodeId,
        mask: Rc<Vec<f64>>,
    },
    GatherRows {
        input: NodeId,
        rows: Rc<Vec<usize>>,
    },
}

struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Per-node adjoints produced by a backward pass.
pub struct Gradients {
    adjoints: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Matrix> {
        self.adjoints.get(id).and_then(Option::as_ref)
    }

    pub fn take(&mut self, id: NodeId) -> Option<Matrix> {
        self.adjoints.get_mut(id).and_then(Option::take)
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id].value
    }

    fn push(&mut self, value: Matrix, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: NodeId, trans_a: bool, b: NodeId, trans_b: bool) -> Result<NodeId> {
        let value = gemm(self.value(a), trans_a, self.value(b), trans_b)?;
        Ok(self.push(
            value,
            Op::MatMul {
                a,
                trans_a,
                b,
                trans_b,
            },
        ))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn concat(&mut self, parts: &[NodeId], axis: Axis) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Shape("concat of zero parts".into()));
        }
        let first = self.value(parts[0]).shape();
        let value = match axis {
            Axis::Rows => {
                let cols = first.1;
                let mut data = Vec::new();
                let mut rows = 0;
                for &p in parts {
                    let m = self.value(p);
                    if m.cols() != cols {
                        return Err(Error::Shape(format!(
                            "concat rows: {} cols vs {cols}",
                            m.cols()
                        )));
                    }
                    rows += m.rows();
                    data.extend_from_slice(m.data());
                }
                Matrix::from_vec(rows, cols, data)?
            }
            Axis::Cols => {
                let rows = first.0;
                let mut widths = Vec::with_capacity(parts.len());
                let mut total = 0;
                for &p in parts {
                    let m = self.value(p);
                    if m.rows() != rows {
                        return Err(Error::Shape(format!(
                            "concat cols: {} rows vs {rows}",
                            m.rows()
                        )));
                    }
                    widths.push(m.cols());
                    total += m.cols();
                }
                let mut out = Matrix::zeros(rows, total);
                for r in 0..rows {
                    let mut offset = 0;
                    for (idx, &p) in parts.iter().enumerate() {
                        let m = self.value(p);
                        out.row_mut(r)[offset..offset + widths[idx]].copy_from_slice(m.row(r));
                        offset += widths[idx];
                    }
                }
                out
            }
        };
        Ok(self.push(
            value,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
        ))
    }

    pub fn scalar_mul(&mut self, x: NodeId, c: f64) -> NodeId {
        let value = self.value(x).scale(c);
        self.push(value, Op::ScalarMul(x, c))
    }

    pub fn leaky_relu(&mut self, x: NodeId, slope: f64) -> NodeId {
        let value = self.value(x).map(|v| if v > 0.0 { v } else { slope * v });
        self.push(value, Op::LeakyRelu(x, slope))
    }

    pub fn elu(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| if v > 0.0 { v } else { v.exp_m1() });
        self.push(value, Op::Elu(x))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| if v > 0.0 { v } else { 0.0 });
        self.push(value, Op::Relu(x))
    }

    pub fn log(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(f64::ln);
        self.push(value, Op::Log(x))
    }

    /// Softmax over groups of entries. `segments[i]` names the group of
    /// the i-th entry in row-major order; each group is normalized
    /// independently with max-shift stabilization.
    pub fn segment_softmax(&mut self, input: NodeId, segments: Rc<Vec<usize>>) -> Result<NodeId> {
        let x = self.value(input);
        if segments.len() != x.data().len() {
            return Err(Error::Shape(format!(
                "segment_softmax: {} segment ids for {} entries",
                segments.len(),
                x.data().len()
            )));
        }
        let n_seg = segments.iter().copied().max().map_or(0, |m| m + 1);
        let mut maxes = vec![f64::NEG_INFINITY; n_seg];
        for (v, &s) in x.data().iter().zip(segments.iter()) {
            maxes[s] = maxes[s].max(*v);
        }
        let mut sums = vec![0.0; n_seg];
        let mut out = x.clone();
        for (v, &s) in out.data_mut().iter_mut().zip(segments.iter()) {
            *v = (*v - maxes[s]).exp();
            sums[s] += *v;
        }
        for (v, &s) in out.data_mut().iter_mut().zip(segments.iter()) {
            *v /= sums[s];
        }
        Ok(self.push(out, Op::SegmentSoftmax { input, segments }))
    }

    /// For each edge (src, dst): `out[dst] += weights[edge] * features[src]`.
    /// `weights` is one column with one entry per edge; output has `n_out`
    /// rows and the feature width.
    pub fn weighted_neighbor_sum(
        &mut self,
        weights: NodeId,
        features: NodeId,
        edges: Rc<Vec<(usize, usize)>>,
        n_out: usize,
    ) -> Result<NodeId> {
        let w = self.value(weights);
        let f = self.value(features);
        if w.cols() != 1 || w.rows() != edges.len() {
            return Err(Error::Shape(format!(
                "weighted_neighbor_sum: weights {:?} for {} edges",
                w.shape(),
                edges.len()
            )));
        }
        for &(src, dst) in edges.iter() {
            if src >= f.rows() || dst >= n_out {
                return Err(Error::Shape(format!(
                    "weighted_neighbor_sum: edge ({src},{dst}) out of range"
                )));
            }
        }
        let d = f.cols();
        let mut out = Matrix::zeros(n_out, d);
        for (e, &(src, dst)) in edges.iter().enumerate() {
            let we = w.data()[e];
            let frow = f.row(src);
            let orow = out.row_mut(dst);
            for j in 0..d {
                orow[j] += we * frow[j];
            }
        }
        Ok(self.push(
            out,
            Op::WeightedNeighborSum {
                weights,
                features,
                edges,
            },
        ))
    }

    /// Elementwise multiply by a recorded mask (inverted-dropout scaling is
    /// baked into the mask by the caller).
    pub fn dropout(&mut self, input: NodeId, mask: Rc<Vec<f64>>) -> Result<NodeId> {
        let x = self.value(input);
        if mask.len() != x.data().len() {
            return Err(Error::Shape(format!(
                "dropout: mask of {} for {} entries",
                mask.len(),
                x.data().len()
            )));
        }
        let mut out = x.clone();
        for (v, m) in out.data_mut().iter_mut().zip(mask.iter()) {
            *v *= m;
        }
        Ok(self.push(out, Op::Dropout { input, mask }))
    }

    pub fn gather_rows(&mut self, input: NodeId, rows: Rc<Vec<usize>>) -> Result<NodeId> {
        let x = self.value(input);
        let mut out = Matrix::zeros(rows.len(), x.cols());
        for (r, &src) in rows.iter().enumerate() {
            if src >= x.rows() {
                return Err(Error::Shape(format!(
                    "gather_rows: row {src} out of {}",
                    x.rows()
                )));
            }
            out.row_mut(r).copy_from_slice(x.row(src));
        }
        Ok(self.push(out, Op::GatherRows { input, rows }))
    }

    pub fn gather_row(&mut self, input: NodeId, row: usize) -> Result<NodeId> {
        self.gather_rows(input, Rc::new(vec![row]))
    }

    /// Reverse pass from `output` seeded with `seed` (the adjoint of the
    /// output, e.g. dLoss/dOutput). Returns per-node adjoints.
    pub fn backward(&self, output: NodeId, seed: Matrix) -> Result<Gradients> {
        if seed.shape() != self.value(output).shape() {
            return Err(Error::Shape(format!(
                "backward seed {:?} vs output {:?}",
                seed.shape(),
                self.value(output).shape()
            )));
        }
        let mut adj: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[output] = Some(seed);
        for id in (0..=output).rev() {
            let Some(g) = adj[id].take() else { continue };
            self.propagate(id, &g, &mut adj)?;
            adj[id] = Some(g);
        }
        Ok(Gradients { adjoints: adj })
    }

    fn accumulate(adj: &mut [Option<Matrix>], id: NodeId, delta: Matrix) {
        match &mut adj[id] {
            Some(m) => m.add_assign(&delta),
            slot => *slot = Some(delta),
        }
    }

    fn propagate(&self, id: NodeId, g: &Matrix, adj: &mut [Option<Matrix>]) -> Result<()> {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::MatMul {
                a,
                trans_a,
                b,
                trans_b,
            } => {
                let (a, b) = (*a, *b);
                let av = self.value(a);
                let bv = self.value(b);
                let (da, db) = match (trans_a, trans_b) {
                    (false, false) => (gemm(g, false, bv, true)?, gemm(av, true, g, false)?),
                    (false, true) => (gemm(g, false, bv, false)?, gemm(g, true, av, false)?),
                    (true, false) => (gemm(bv, false, g, true)?, gemm(av, false, g, false)?),
                    (true, true) => (gemm(bv, true, g, true)?, gemm(g, true, av, true)?),
                };
                Self::accumulate(adj, a, da);
                Self::accumulate(adj, b, db);
            }
            Op::Add(a, b) => {
                Self::accumulate(adj, *a, g.clone());
                Self::accumulate(adj, *b, g.clone());
            }
            Op::Concat { parts, axis } => match axis {
                Axis::Rows => {
                    let mut offset = 0;
                    for &p in parts {
                        let rows = self.value(p).rows();
                        let cols = self.value(p).cols();
                        let mut part = Matrix::zeros(rows, cols);
                        for r in 0..rows {
                            part.row_mut(r).copy_from_slice(g.row(offset + r));
                        }
                        offset += rows;
                        Self::accumulate(adj, p, part);
                    }
                }
                Axis::Cols => {
                    let mut offset = 0;
                    for &p in parts {
                        let rows = self.value(p).rows();
                        let cols = self.value(p).cols();
                        let mut part = Matrix::zeros(rows, cols);
                        for r in 0..rows {
                            part.row_mut(r)
                                .copy_from_slice(&g.row(r)[offset..offset + cols]);
                        }
                        offset += cols;
                        Self::accumulate(adj, p, part);
                    }
                }
            },
            Op::ScalarMul(x, c) => Self::accumulate(adj, *x, g.scale(*c)),
            Op::LeakyRelu(x, slope) => {
                let xv = self.value(*x);
                let mut dx = g.clone();
                for (d, v) in dx.data_mut().iter_mut().zip(xv.data()) {
                    if *v <= 0.0 {
                        *d *= slope;
                    }
                }
                Self::accumulate(adj, *x, dx);
            }
            Op::Elu(x) => {
                let xv = self.value(*x);
                let mut dx = g.clone();
                for (d, v) in dx.data_mut().iter_mut().zip(xv.data()) {
                    if *v <= 0.0 {
                        *d *= v.exp();
                    }
                }
                Self::accumulate(adj, *x, dx);
            }
            Op::Relu(x) => {
                let xv = self.value(*x);
                let mut dx = g.clone();
                for (d, v) in dx.data_mut().iter_mut().zip(xv.data()) {
                    if *v <= 0.0 {
                        *d = 0.0;
                    }
                }
                Self::accumulate(adj, *x, dx);
            }
            Op::Log(x) => {
                let xv = self.value(*x);
                let mut dx = g.clone();
                for (d, v) in dx.data_mut().iter_mut().zip(xv.data()) {
                    *d /= v;
                }
                Self::accumulate(adj, *x, dx);
            }
            Op::SegmentSoftmax { input, segments } => {
                let y = self.value(id);
                let n_seg = segments.iter().copied().max().map_or(0, |m| m + 1);
                let mut dots = vec![0.0; n_seg];
                for ((gv, yv), &s) in g.data().iter().zip(y.data()).zip(segments.iter()) {
                    dots[s] += gv * yv;
                }
                let mut dx = y.clone();
                for ((dv, gv), &s) in dx.data_mut().iter_mut().zip(g.data()).zip(segments.iter()) {
                    *dv *= gv - dots[s];
                }
                Self::accumulate(adj, *input, dx);
            }
            Op::WeightedNeighborSum {
                weights,
                features,
                edges,
            } => {
                let w = self.value(*weights);
                let f = self.value(*features);
                let d = f.cols();
                let mut dw = Matrix::zeros(edges.len(), 1);
                let mut df = Matrix::zeros(f.rows(), d);
                for (e, &(src, dst)) in edges.iter().enumerate() {
                    let grow = g.row(dst);
                    let frow = f.row(src);
                    let mut dot = 0.0;
                    for j in 0..d {
                        dot += grow[j] * frow[j];
                    }
                    dw.data_mut()[e] = dot;
                    let we = w.data()[e];
                    let drow = df.row_mut(src);
                    for j in 0..d {
                        drow[j] += we * grow[j];
                    }
                }
                Self::accumulate(adj, *weights, dw);
                Self::accumulate(adj, *features, df);
            }
            Op::Dropout { input, mask } => {
                let mut dx = g.clone();
                for (d, m) in dx.data_mut().iter_mut().zip(mask.iter()) {
                    *d *= m;
                }
                Self::accumulate(adj, *input, dx);
            }
            Op::GatherRows { input, rows } => {
                let x = self.value(*input);
                let mut dx = Matrix::zeros(x.rows(), x.cols());
                for (r, &src) in rows.iter().enumerate() {
                    let grow = g.row(r);
                    let drow = dx.row_mut(src);
                    for j in 0..x.cols() {
                        drow[j] += grow[j];
                    }
                }
                Self::accumulate(adj, *input, dx);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng::RngStream;

    /// Check the VJP of `build` against central finite differences for
    /// every entry of every input, with weight matrix `seed` as the output
    /// adjoint. Inputs are rebuilt from scratch for each perturbation.
    fn check_gradient(
        inputs: &[Matrix],
        build: impl Fn(&mut Tape, &[NodeId]) -> NodeId,
        seed_stream: &mut RngStream,
    ) {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = inputs.iter().map(|m| tape.leaf(m.clone())).collect();
        let out = build(&mut tape, &ids);
        let (or, oc) = tape.value(out).shape();
        let w = Matrix::from_fn(or, oc, |_, _| seed_stream.next_f64() * 2.0 - 1.0);
        let grads = tape.backward(out, w.clone()).unwrap();

        let eval = |xs: &[Matrix]| -> f64 {
            let mut t = Tape::new();
            let ids: Vec<NodeId> = xs.iter().map(|m| t.leaf(m.clone())).collect();
            let o = build(&mut t, &ids);
            t.value(o)
                .data()
                .iter()
                .zip(w.data())
                .map(|(a, b)| a * b)
                .sum()
        };

        let h = 1e-5;
        for (i, input) in inputs.iter().enumerate() {
            let analytic = grads
                .get(ids[i])
                .cloned()
                .unwrap_or_else(|| Matrix::zeros(input.rows(), input.cols()));
            for e in 0..input.data().len() {
                let mut plus = inputs.to_vec();
                plus[i].data_mut()[e] += h;
                let mut minus = inputs.to_vec();
                minus[i].data_mut()[e] -= h;
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let a = analytic.data()[e];
                let denom = fd.abs().max(a.abs()).max(1.0);
                assert!(
                    (a - fd).abs() / denom <= 1e-4,
                    "input {i} entry {e}: analytic {a} vs fd {fd}"
                );
            }
        }
    }

    fn rand_matrix(rows: usize, cols: usize, s: &mut RngStream) -> Matrix {
        // Entries kept away from activation kinks at zero.
        Matrix::from_fn(rows, cols, |_, _| {
            let v = s.next_f64() * 4.0 - 2.0;
            if v.abs() < 0.15 {
                v + 0.3
            } else {
                v
            }
        })
    }

    #[test]
    fn elu_and_leaky_relu_pointwise_slopes() {
        let mut tape = Tape::new();
        let x = tape.leaf(Matrix::row_vector(&[1.0, -1.0]));
        let y = tape.elu(x);
        let g = tape.backward(y, Matrix::row_vector(&[1.0, 1.0])).unwrap();
        let dx = g.get(x).unwrap();
        assert_eq!(dx.data()[0], 1.0);
        assert!((dx.data()[1] - (-1.0f64).exp()).abs() < 1e-15);

        let mut tape = Tape::new();
        let x = tape.leaf(Matrix::row_vector(&[-1.0]));
        let y = tape.leaky_relu(x, 0.2);
        let g = tape.backward(y, Matrix::row_vector(&[1.0])).unwrap();
        assert_eq!(g.get(x).unwrap().data()[0], 0.2);
    }

    #[test]
    fn matmul_chain_matches_finite_differences() {
        let mut s = RngStream::new(3, 0);
        let a = rand_matrix(4, 3, &mut s);
        let b = rand_matrix(3, 2, &mut s);
        check_gradient(
            &[a, b],
            |t, ids| {
                let c = t.matmul(ids[0], false, ids[1], false).unwrap();
                t.leaky_relu(c, 0.2)
            },
            &mut s,
        );
    }

    #[test]
    fn matmul_transpose_variants() {
        let mut s = RngStream::new(4, 0);
        for &(ta, tb) in &[(false, true), (true, false), (true, true)] {
            let a = if ta {
                rand_matrix(3, 4, &mut s)
            } else {
                rand_matrix(4, 3, &mut s)
            };
            let b = if tb {
                rand_matrix(2, 3, &mut s)
            } else {
                rand_matrix(3, 2, &mut s)
            };
            check_gradient(
                &[a, b],
                move |t, ids| t.matmul(ids[0], ta, ids[1], tb).unwrap(),
                &mut s,
            );
        }
    }

    #[test]
    fn every_primitive_passes_fd_on_random_shapes() {
        for seed in 0..100 {
            let mut s = RngStream::new(seed, 1);
            let rows = 2 + s.index(3);
            let cols = 1 + s.index(4);
            let x = rand_matrix(rows, cols, &mut s);
            let y = rand_matrix(rows, cols, &mut s);

            match seed % 8 {
                0 => check_gradient(&[x, y], |t, ids| t.add(ids[0], ids[1]).unwrap(), &mut s),
                1 => check_gradient(
                    &[x, y],
                    |t, ids| t.concat(&[ids[0], ids[1]], Axis::Rows).unwrap(),
                    &mut s,
                ),
                2 => check_gradient(
                    &[x, y],
                    |t, ids| t.concat(&[ids[0], ids[1]], Axis::Cols).unwrap(),
                    &mut s,
                ),
                3 => check_gradient(&[x], |t, ids| t.scalar_mul(ids[0], -1.7), &mut s),
                4 => check_gradient(&[x], |t, ids| t.elu(ids[0]), &mut s),
                5 => check_gradient(&[x], |t, ids| t.relu(ids[0]), &mut s),
                6 => {
                    let pos = x.map(|v| v.abs() + 0.5);
                    check_gradient(&[pos], |t, ids| t.log(ids[0]), &mut s);
                }
                _ => {
                    let segments: Rc<Vec<usize>> =
                        Rc::new((0..rows * cols).map(|i| i % rows).collect());
                    let segs = Rc::clone(&segments);
                    check_gradient(
                        &[x],
                        move |t, ids| t.segment_softmax(ids[0], Rc::clone(&segs)).unwrap(),
                        &mut s,
                    );
                }
            }
        }
    }

    #[test]
    fn weighted_neighbor_sum_and_gather_pass_fd() {
        for seed in 0..30 {
            let mut s = RngStream::new(seed, 2);
            let n = 3 + s.index(3);
            let d = 1 + s.index(3);
            let feats = rand_matrix(n, d, &mut s);
            let mut edges = Vec::new();
            for dst in 0..n {
                for _ in 0..=s.index(2) {
                    edges.push((s.index(n), dst));
                }
            }
            let w = rand_matrix(edges.len(), 1, &mut s);
            let edges = Rc::new(edges);
            let e2 = Rc::clone(&edges);
            check_gradient(
                &[w, feats],
                move |t, ids| {
                    t.weighted_neighbor_sum(ids[0], ids[1], Rc::clone(&e2), n)
                        .unwrap()
                },
                &mut s,
            );

            let x = rand_matrix(n, d, &mut s);
            let rows = Rc::new(vec![0, n - 1, 0]);
            let r2 = Rc::clone(&rows);
            check_gradient(
                &[x],
                move |t, ids| t.gather_rows(ids[0], Rc::clone(&r2)).unwrap(),
                &mut s,
            );
        }
    }

    #[test]
    fn dropout_mask_scales_gradients() {
        let mut s = RngStream::new(77, 0);
        let x = rand_matrix(3, 3, &mut s);
        let mask: Rc<Vec<f64>> = Rc::new(
            (0..9)
                .map(|i| if i % 3 == 0 { 0.0 } else { 1.0 / 0.8 })
                .collect(),
        );
        let m2 = Rc::clone(&mask);
        check_gradient(
            &[x],
            move |t, ids| t.dropout(ids[0], Rc::clone(&m2)).unwrap(),
            &mut s,
        );
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut tape = Tape::new();
        let a = tape.leaf(Matrix::zeros(2, 3));
        let b = tape.leaf(Matrix::zeros(2, 3));
        assert!(tape.matmul(a, false, b, false).is_err());
        assert!(tape.concat(&[a, b], Axis::Rows).is_ok());
        let c = tape.leaf(Matrix::zeros(4, 4));
        assert!(tape.concat(&[a, c], Axis::Rows).is_err());
        assert!(tape.dropout(a, Rc::new(vec![1.0; 5])).is_err());
        assert!(tape.gather_row(a, 7).is_err());
    }

    #[test]
    fn segment_softmax_normalizes_each_group() {
        let mut tape = Tape::new();
        let x = tape.leaf(Matrix::column(&[1.0, 0.0, -1.0, 5.0, 5.0]));
        let segs = Rc::new(vec![0, 0, 0, 1, 1]);
        let y = tape.segment_softmax(x, segs).unwrap();
        let v = tape.value(y).data();
        assert!((v[0] + v[1] + v[2] - 1.0).abs() < 1e-12);
        assert!((v[3] + v[4] - 1.0).abs() < 1e-12);
        assert!((v[0] - 0.6652409557748219).abs() < 1e-12);
        assert!((v[1] - 0.24472847105479767).abs() < 1e-12);
        assert!((v[2] - 0.09003057317038046).abs() < 1e-12);
    }
}
