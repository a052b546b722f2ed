use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::Padding;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Wcrn,
    Dccnn,
    Hresnet,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Wcrn => "wcrn",
            Architecture::Dccnn => "dccnn",
            Architecture::Hresnet => "hresnet",
        }
    }

    /// Side length of the square input patch the architecture expects.
    pub fn patch_size(self) -> usize {
        match self {
            Architecture::Wcrn | Architecture::Dccnn => 5,
            Architecture::Hresnet => 7,
        }
    }

    pub fn build(self, input_channels: usize, class_count: usize) -> Result<NetworkGraph> {
        match self {
            Architecture::Wcrn => super::build_wcrn(input_channels, class_count),
            Architecture::Dccnn => super::build_dccnn(input_channels, class_count),
            Architecture::Hresnet => super::build_hresnet(input_channels, class_count),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wcrn" => Ok(Architecture::Wcrn),
            "dccnn" => Ok(Architecture::Dccnn),
            "hresnet" => Ok(Architecture::Hresnet),
            other => Err(Error::Config(format!("unknown network {other:?} (expected wcrn, dccnn, hresnet)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerKind {
    Input,
    Conv {
        kernel: usize,
        filters: usize,
        padding: Padding,
    },
    BatchNorm,
    Relu,
    MaxPool {
        window: usize,
    },
    GlobalAvgPool,
    Concat,
    Add,
    Dropout {
        rate: f64,
    },
    Flatten,
    Dense {
        units: usize,
    },
    Softmax,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub name: String,
    pub kind: LayerKind,
    pub inputs: Vec<usize>,
    /// Row label of the architecture table this node's output corresponds to.
    pub table_row: Option<&'static str>,
}

/// Shape and trainability of one named parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
    pub fan_in: usize,
}

/// Topologically ordered layer graph with per-node output shapes (batch axis excluded).
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    architecture: Architecture,
    nodes: Vec<Node>,
    shapes: Vec<Vec<usize>>,
    input_shape: [usize; 3],
    class_count: usize,
}

impl NetworkGraph {
    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Output shape of node `id` for one instance.
    pub fn output_shape(&self, id: usize) -> &[usize] {
        &self.shapes[id]
    }

    /// `(row, output shape)` for every node tagged with an architecture-table row.
    pub fn shape_trace(&self) -> Vec<(&'static str, Vec<usize>)> {
        self.nodes
            .iter()
            .zip(&self.shapes)
            .filter_map(|(n, s)| n.table_row.map(|r| (r, s.clone())))
            .collect()
    }

    pub fn parameter_specs(&self) -> Vec<ParamSpec> {
        let mut specs = Vec::new();
        for (id, node) in self.nodes.iter().enumerate() {
            let in_shape = node.inputs.first().map(|&i| self.shapes[i].as_slice()).unwrap_or(&[]);
            let spec = |suffix: &str, shape: Vec<usize>, trainable: bool, fan_in: usize| ParamSpec {
                name: format!("{}.{}", node.name, suffix),
                shape,
                trainable,
                fan_in,
            };
            match node.kind {
                LayerKind::Conv { kernel, filters, .. } => {
                    let m = *in_shape.last().expect("conv input has channels");
                    let fan_in = kernel * kernel * m;
                    specs.push(spec("weight", vec![kernel, kernel, m, filters], true, fan_in));
                    specs.push(spec("bias", vec![filters], true, fan_in));
                }
                LayerKind::BatchNorm => {
                    let c = *self.shapes[id].last().expect("bn has channels");
                    specs.push(spec("gamma", vec![c], true, 0));
                    specs.push(spec("beta", vec![c], true, 0));
                    specs.push(spec("running_mean", vec![c], false, 0));
                    specs.push(spec("running_var", vec![c], false, 0));
                }
                LayerKind::Dense { units } => {
                    let d: usize = in_shape.iter().product();
                    specs.push(spec("weight", vec![d, units], true, d));
                    specs.push(spec("bias", vec![units], true, d));
                }
                _ => {}
            }
        }
        specs
    }

    pub fn trainable_parameter_count(&self) -> usize {
        self.parameter_specs()
            .iter()
            .filter(|s| s.trainable)
            .map(|s| s.shape.iter().product::<usize>())
            .sum()
    }

    pub fn has_dropout(&self) -> bool {
        self.nodes.iter().any(|n| matches!(n.kind, LayerKind::Dropout { .. }))
    }

    /// Id of the terminal softmax node.
    pub fn output(&self) -> usize {
        self.nodes.len() - 1
    }
}

/// Incremental graph construction with shape inference at every step.
pub(crate) struct GraphBuilder {
    architecture: Architecture,
    nodes: Vec<Node>,
    shapes: Vec<Vec<usize>>,
    input_shape: [usize; 3],
}

impl GraphBuilder {
    pub(crate) fn new(architecture: Architecture, input_shape: [usize; 3]) -> Self {
        Self {
            architecture,
            nodes: vec![Node {
                name: "input".into(),
                kind: LayerKind::Input,
                inputs: Vec::new(),
                table_row: None,
            }],
            shapes: vec![input_shape.to_vec()],
            input_shape,
        }
    }

    pub(crate) fn input(&self) -> usize {
        0
    }

    pub(crate) fn push(&mut self, name: &str, kind: LayerKind, inputs: &[usize]) -> Result<usize> {
        let shape = self.infer(name, kind, inputs)?;
        self.nodes.push(Node {
            name: name.to_string(),
            kind,
            inputs: inputs.to_vec(),
            table_row: None,
        });
        self.shapes.push(shape);
        Ok(self.nodes.len() - 1)
    }

    pub(crate) fn tag(&mut self, id: usize, row: &'static str) -> usize {
        self.nodes[id].table_row = Some(row);
        id
    }

    pub(crate) fn conv(&mut self, name: &str, from: usize, kernel: usize, filters: usize, padding: Padding) -> Result<usize> {
        self.push(name, LayerKind::Conv { kernel, filters, padding }, &[from])
    }

    pub(crate) fn unary(&mut self, name: &str, kind: LayerKind, from: usize) -> Result<usize> {
        self.push(name, kind, &[from])
    }

    fn infer(&self, name: &str, kind: LayerKind, inputs: &[usize]) -> Result<Vec<usize>> {
        let shape_of = |i: usize| -> Result<&Vec<usize>> {
            self.shapes
                .get(i)
                .ok_or_else(|| Error::shape("graph", format!("{name}: unknown input node {i}")))
        };
        let err = |detail: String| Error::shape("graph", format!("{name}: {detail}"));
        let arity = match kind {
            LayerKind::Input => 0,
            LayerKind::Concat | LayerKind::Add => inputs.len().max(2),
            _ => 1,
        };
        if inputs.len() != arity {
            return Err(err(format!("expected {arity} inputs, got {}", inputs.len())));
        }
        match kind {
            LayerKind::Input => Err(err("only one input node is allowed".into())),
            LayerKind::Conv { kernel, filters, padding } => {
                let s = shape_of(inputs[0])?;
                let [h, w, _] = spatial(s).ok_or_else(|| err(format!("conv needs H x W x C, got {s:?}")))?;
                match padding {
                    Padding::Same => Ok(vec![h, w, filters]),
                    Padding::Valid if kernel <= h && kernel <= w => Ok(vec![h - kernel + 1, w - kernel + 1, filters]),
                    Padding::Valid => Err(err(format!("kernel {kernel} larger than {h} x {w}"))),
                }
            }
            LayerKind::MaxPool { window } => {
                let s = shape_of(inputs[0])?;
                let [h, w, c] = spatial(s).ok_or_else(|| err(format!("pool needs H x W x C, got {s:?}")))?;
                if window == 0 || window > h || window > w {
                    return Err(err(format!("window {window} larger than {h} x {w}")));
                }
                Ok(vec![h / window, w / window, c])
            }
            LayerKind::GlobalAvgPool => {
                let s = shape_of(inputs[0])?;
                let [_, _, c] = spatial(s).ok_or_else(|| err(format!("pool needs H x W x C, got {s:?}")))?;
                Ok(vec![c])
            }
            LayerKind::BatchNorm | LayerKind::Relu | LayerKind::Dropout { .. } | LayerKind::Softmax => {
                Ok(shape_of(inputs[0])?.clone())
            }
            LayerKind::Flatten => Ok(vec![shape_of(inputs[0])?.iter().product()]),
            LayerKind::Dense { units } => {
                let s = shape_of(inputs[0])?;
                if s.len() != 1 {
                    return Err(err(format!("dense needs a flat input, got {s:?}")));
                }
                Ok(vec![units])
            }
            LayerKind::Add => {
                let first = shape_of(inputs[0])?;
                for &i in &inputs[1..] {
                    if shape_of(i)? != first {
                        return Err(err(format!("cannot add {:?} and {:?}", first, shape_of(i)?)));
                    }
                }
                Ok(first.clone())
            }
            LayerKind::Concat => {
                let first = shape_of(inputs[0])?;
                let axis = first.len() - 1;
                let mut out = first.clone();
                for &i in &inputs[1..] {
                    let s = shape_of(i)?;
                    if s.len() != first.len() || s[..axis] != first[..axis] {
                        return Err(err(format!("cannot concatenate {first:?} with {s:?}")));
                    }
                    out[axis] += s[axis];
                }
                Ok(out)
            }
        }
    }

    pub(crate) fn finish(self, class_count: usize) -> Result<NetworkGraph> {
        let last = self.nodes.last().expect("builder holds an input node");
        if last.kind != LayerKind::Softmax || self.shapes.last().map(|s| s.as_slice()) != Some(&[class_count][..]) {
            return Err(Error::shape("graph", "terminal layer must be a softmax over the classes"));
        }
        Ok(NetworkGraph {
            architecture: self.architecture,
            nodes: self.nodes,
            shapes: self.shapes,
            input_shape: self.input_shape,
            class_count,
        })
    }
}

fn spatial(s: &[usize]) -> Option<[usize; 3]> {
    match *s {
        [h, w, c] => Some([h, w, c]),
        _ => None,
    }
}
