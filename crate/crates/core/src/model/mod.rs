//! The differentiable model: per-relation attention heads, node-wise gated
//! fusion, a second attention layer, and the MLP classifier head, plus
//! parameter initialization and the versioned JSON model file.

pub mod forward;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{ModalityPartition, Relation, NUM_RELATIONS};
use crate::error::{Error, Result};
use crate::numeric::matrix::Matrix;
use crate::numeric::rng::RngStream;

pub use forward::{forward, DropoutSpec, EpisodeInputs, ForwardOutput};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Negative slope of the attention LeakyReLU.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Architecture hyperparameters; trained tensors must match these shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_classes: usize,
    pub feature_dim: usize,
    pub partition: ModalityPartition,
    /// Append a one-hot support-label channel (zeros on the query) to the
    /// node features before the first attention layer.
    pub label_channel: bool,
    /// Per-head width of layer 1 (heads are concatenated).
    pub head_dim_1: usize,
    pub heads_1: usize,
    /// Per-head width of layer 2 (heads are averaged).
    pub head_dim_2: usize,
    pub heads_2: usize,
    pub classifier_hidden: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.partition.validate()?;
        if self.partition.total_dim() != self.feature_dim {
            return Err(Error::Config(format!(
                "partition covers {} features, config declares {}",
                self.partition.total_dim(),
                self.feature_dim
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("need at least 2 classes".into()));
        }
        for (name, v) in [
            ("head_dim_1", self.head_dim_1),
            ("heads_1", self.heads_1),
            ("head_dim_2", self.head_dim_2),
            ("heads_2", self.heads_2),
            ("classifier_hidden", self.classifier_hidden),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Width of the node features entering layer 1.
    pub fn input_dim(&self) -> usize {
        self.feature_dim
            + if self.label_channel {
                self.num_classes
            } else {
                0
            }
    }

    /// Width after layer-1 head concatenation.
    pub fn layer1_width(&self) -> usize {
        self.head_dim_1 * self.heads_1
    }

    /// Width after layer-2 head averaging.
    pub fn layer2_width(&self) -> usize {
        self.head_dim_2
    }

    /// (name, shape) of every tensor, in canonical visitation order.
    pub fn tensor_shapes(&self) -> Vec<(String, (usize, usize))> {
        let mut out = Vec::new();
        for (layer, heads, head_dim, in_dim, gate_dim) in [
            (
                1,
                self.heads_1,
                self.head_dim_1,
                self.input_dim(),
                self.layer1_width(),
            ),
            (
                2,
                self.heads_2,
                self.head_dim_2,
                self.layer1_width(),
                self.layer2_width(),
            ),
        ] {
            for rel in Relation::ALL {
                for m in 0..heads {
                    out.push((
                        format!("layer{layer}.{}.head{m}.w", rel.name()),
                        (head_dim, in_dim),
                    ));
                    out.push((
                        format!("layer{layer}.{}.head{m}.a", rel.name()),
                        (2 * head_dim, 1),
                    ));
                }
                out.push((format!("layer{layer}.{}.gate", rel.name()), (gate_dim, 1)));
            }
        }
        out.push((
            "classifier.w1".into(),
            (self.classifier_hidden, self.layer2_width()),
        ));
        out.push(("classifier.b1".into(), (1, self.classifier_hidden)));
        out.push((
            "classifier.w2".into(),
            (self.num_classes, self.classifier_hidden),
        ));
        out.push(("classifier.b2".into(), (1, self.num_classes)));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    /// Projection, shape (head_dim, in_dim).
    pub w: Matrix,
    /// Attention vector, shape (2 * head_dim, 1); the first half pairs
    /// with the destination projection, the second half with the source.
    pub a: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationLayerParams {
    pub heads: Vec<HeadParams>,
    /// Gating vector, shape (layer output width, 1).
    pub gate: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub config: ModelConfig,
    pub layer1: [RelationLayerParams; NUM_RELATIONS],
    pub layer2: [RelationLayerParams; NUM_RELATIONS],
    pub classifier: ClassifierParams,
}

fn xavier(rows: usize, cols: usize, stream: &mut RngStream) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| stream.range_f64(-bound, bound))
}

fn vector_init(len: usize, stream: &mut RngStream) -> Matrix {
    let bound = (6.0 / len as f64).sqrt();
    Matrix::from_fn(len, 1, |_, _| stream.range_f64(-bound, bound))
}

impl ModelParameters {
    pub fn init(config: ModelConfig, stream: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let build_layer = |heads: usize,
                           head_dim: usize,
                           in_dim: usize,
                           gate_dim: usize,
                           stream: &mut RngStream| {
            let mut out = Vec::new();
            for _ in Relation::ALL {
                let heads_p = (0..heads)
                    .map(|_| HeadParams {
                        w: xavier(head_dim, in_dim, stream),
                        a: vector_init(2 * head_dim, stream),
                    })
                    .collect();
                out.push(RelationLayerParams {
                    heads: heads_p,
                    gate: vector_init(gate_dim, stream),
                });
            }
            out
        };
        let layer1 = build_layer(
            config.heads_1,
            config.head_dim_1,
            config.input_dim(),
            config.layer1_width(),
            stream,
        );
        let layer2 = build_layer(
            config.heads_2,
            config.head_dim_2,
            config.layer1_width(),
            config.layer2_width(),
            stream,
        );
        let w1 = xavier(config.classifier_hidden, config.layer2_width(), stream);
        let w2 = xavier(config.num_classes, config.classifier_hidden, stream);
        let classifier = ClassifierParams {
            b1: Matrix::zeros(1, config.classifier_hidden),
            b2: Matrix::zeros(1, config.num_classes),
            w1,
            w2,
        };
        Ok(ModelParameters {
            layer1: layer1.try_into().expect("three relations"),
            layer2: layer2.try_into().expect("three relations"),
            classifier,
            config,
        })
    }

    /// All-zero parameters (tests and baselines).
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let shapes = config.tensor_shapes();
        let mut iter = shapes.iter();
        let mut layer = |heads: usize| -> [RelationLayerParams; NUM_RELATIONS] {
            let mut rels = Vec::new();
            for _ in Relation::ALL {
                let mut hp = Vec::new();
                for _ in 0..heads {
                    let (_, ws) = iter.next().unwrap();
                    let (_, as_) = iter.next().unwrap();
                    hp.push(HeadParams {
                        w: Matrix::zeros(ws.0, ws.1),
                        a: Matrix::zeros(as_.0, as_.1),
                    });
                }
                let (_, gs) = iter.next().unwrap();
                rels.push(RelationLayerParams {
                    heads: hp,
                    gate: Matrix::zeros(gs.0, gs.1),
                });
            }
            rels.try_into().expect("three relations")
        };
        let layer1 = layer(config.heads_1);
        let layer2 = layer(config.heads_2);
        let mut dims = [(0, 0); 4];
        for d in &mut dims {
            let (_, s) = iter.next().unwrap();
            *d = *s;
        }
        Ok(ModelParameters {
            layer1,
            layer2,
            classifier: ClassifierParams {
                w1: Matrix::zeros(dims[0].0, dims[0].1),
                b1: Matrix::zeros(dims[1].0, dims[1].1),
                w2: Matrix::zeros(dims[2].0, dims[2].1),
                b2: Matrix::zeros(dims[3].0, dims[3].1),
            },
            config,
        })
    }

    /// Tensors in canonical visitation order (matches
    /// [`ModelConfig::tensor_shapes`]).
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        for (layer_no, layer) in [(1, &self.layer1), (2, &self.layer2)] {
            for (rel, p) in Relation::ALL.iter().zip(layer.iter()) {
                for (m, head) in p.heads.iter().enumerate() {
                    out.push((format!("layer{layer_no}.{}.head{m}.w", rel.name()), &head.w));
                    out.push((format!("layer{layer_no}.{}.head{m}.a", rel.name()), &head.a));
                }
                out.push((format!("layer{layer_no}.{}.gate", rel.name()), &p.gate));
            }
        }
        out.push(("classifier.w1".into(), &self.classifier.w1));
        out.push(("classifier.b1".into(), &self.classifier.b1));
        out.push(("classifier.w2".into(), &self.classifier.w2));
        out.push(("classifier.b2".into(), &self.classifier.b2));
        out
    }

    /// Mutable tensors in the same canonical order.
    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = Vec::new();
        for layer in [&mut self.layer1, &mut self.layer2] {
            for p in layer.iter_mut() {
                for head in p.heads.iter_mut() {
                    out.push(&mut head.w);
                    out.push(&mut head.a);
                }
                out.push(&mut p.gate);
            }
        }
        out.push(&mut self.classifier.w1);
        out.push(&mut self.classifier.b1);
        out.push(&mut self.classifier.w2);
        out.push(&mut self.classifier.b2);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut tensors = BTreeMap::new();
        for (name, m) in self.tensors() {
            if !m.is_finite() {
                return Err(Error::Numeric(format!(
                    "tensor {name} has non-finite entries"
                )));
            }
            tensors.insert(
                name,
                TensorData {
                    shape: [m.rows(), m.cols()],
                    values: m.data().to_vec(),
                },
            );
        }
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            config: self.config.clone(),
            tensors,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::ModelFile(format!("bad json: {e}")))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFile(format!(
                "unsupported format_version {}",
                file.format_version
            )));
        }
        file.config.validate()?;
        let expected = file.config.tensor_shapes();
        if file.tensors.len() != expected.len() {
            return Err(Error::ModelFile(format!(
                "expected {} tensors, found {}",
                expected.len(),
                file.tensors.len()
            )));
        }
        let mut params = ModelParameters::zeros(file.config.clone())?;
        {
            let slots = params.tensors_mut();
            for ((name, shape), slot) in expected.into_iter().zip(slots) {
                let t = file
                    .tensors
                    .get(&name)
                    .ok_or_else(|| Error::ModelFile(format!("missing tensor {name}")))?;
                if t.shape != [shape.0, shape.1] {
                    return Err(Error::ModelFile(format!(
                        "tensor {name}: shape {:?} does not match config {:?}",
                        t.shape, shape
                    )));
                }
                if t.values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::ModelFile(format!(
                        "tensor {name} has non-finite values"
                    )));
                }
                *slot = Matrix::from_vec(shape.0, shape.1, t.values.clone())?;
            }
        }
        Ok(params)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    config: ModelConfig,
    tensors: BTreeMap<String, TensorData>,
}

#[derive(Serialize, Deserialize)]
struct TensorData {
    shape: [usize; 2],
    values: Vec<f64>,
}

/// Attention coefficient on one directed edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeAttention {
    pub src: usize,
    pub dst: usize,
    pub alpha: f64,
}

/// Recorded coefficients of one layer: pre-dropout attention per relation
/// and head, and the fusion gate per relation and node.
#[derive(Debug, Clone, Default)]
pub struct LayerRecord {
    pub attention: Vec<Vec<Vec<EdgeAttention>>>,
    pub gates: Vec<Vec<f64>>,
}

/// Attention and gating coefficients recorded during one forward pass.
#[derive(Debug, Clone, Default)]
pub struct AttentionRecord {
    pub layers: Vec<LayerRecord>,
}
