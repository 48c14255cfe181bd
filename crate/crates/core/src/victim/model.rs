use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::{GcnCache, GcnInput, GcnStack};
use crate::graph::Graph;
use crate::numerics::{argmax, dot, neg_log_sigmoid, relu, softmax_rows, DenseMatrix, Parameters};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VictimKind {
    Gcn,
    /// GraphSAGE with a mean aggregator.
    Sage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Node classification.
    Nc,
    /// Link prediction.
    Lp,
    /// Pairwise node classification: do two nodes share a class?
    Pnc,
}

macro_rules! text_enum {
    ($ty:ty { $($var:ident => $s:literal),* $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$var => $s),* })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($s => Ok(Self::$var),)*
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($ty), " '{}'"),
                        other
                    ))),
                }
            }
        }
    };
}

text_enum!(VictimKind { Gcn => "gcn", Sage => "sage" });
text_enum!(Task { Nc => "nc", Lp => "lp", Pnc => "pnc" });

impl Task {
    pub fn is_pairwise(self) -> bool {
        !matches!(self, Task::Nc)
    }
}

/// What a victim is asked about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Query {
    Node(usize),
    Pair(usize, usize),
}

/// A query together with its ground-truth label (class id, or 0/1 for pair
/// tasks).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample {
    pub query: Query,
    pub label: usize,
}

/// One mean-aggregator layer: `H W_self + mean_{N(v)} H W_neigh + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SageLayer {
    pub w_self: DenseMatrix,
    pub w_neigh: DenseMatrix,
    pub bias: DenseMatrix,
}

/// Row-normalised adjacency times `x`; isolated nodes aggregate to zero.
pub fn mean_aggregate(g: &Graph, x: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(g.node_count(), x.cols());
    for v in 0..g.node_count() {
        let nb = g.neighbors(v);
        if nb.is_empty() {
            continue;
        }
        let w = 1.0 / nb.len() as f64;
        let row = out.row_mut(v);
        for &u in nb {
            for (o, xu) in row.iter_mut().zip(x.row(u)) {
                *o += w * xu;
            }
        }
    }
    out
}

/// Transpose of [`mean_aggregate`].
fn mean_aggregate_adjoint(g: &Graph, d: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(g.node_count(), d.cols());
    for v in 0..g.node_count() {
        let nb = g.neighbors(v);
        if nb.is_empty() {
            continue;
        }
        let w = 1.0 / nb.len() as f64;
        for &u in nb {
            let src = d.row(v).to_vec();
            for (o, dv) in out.row_mut(u).iter_mut().zip(src) {
                *o += w * dv;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    Gcn(GcnStack),
    Sage(Vec<SageLayer>),
}

enum Cache {
    Gcn(GcnCache),
    Sage {
        /// Input and aggregated input of every layer, plus pre-activations.
        inputs: Vec<DenseMatrix>,
        aggregated: Vec<DenseMatrix>,
        pre: Vec<DenseMatrix>,
        output: DenseMatrix,
    },
}

impl Cache {
    fn output(&self) -> &DenseMatrix {
        match self {
            Cache::Gcn(c) => &c.output,
            Cache::Sage { output, .. } => output,
        }
    }
}

/// A supervised GNN used as the attack's victim. Node classification heads
/// emit one logit per class; pair tasks score `sigmoid(z_u · z_v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VictimModel {
    pub kind: VictimKind,
    pub task: Task,
    pub encoder: Encoder,
    pub trained: bool,
}

impl VictimModel {
    /// `layers` convolutions of width `hidden`; the last emits `output_dim`.
    pub fn new(kind: VictimKind, task: Task, feature_dim: usize, hidden: usize, layers: usize, output_dim: usize, rng: &mut Rng) -> Self {
        let mut dims = vec![feature_dim];
        dims.extend(std::iter::repeat_n(hidden, layers.saturating_sub(1)));
        dims.push(output_dim);
        let encoder = match kind {
            VictimKind::Gcn => Encoder::Gcn(GcnStack::new(&dims, rng)),
            VictimKind::Sage => Encoder::Sage(
                dims.windows(2)
                    .map(|w| SageLayer {
                        w_self: DenseMatrix::xavier(w[0], w[1], rng),
                        w_neigh: DenseMatrix::xavier(w[0], w[1], rng),
                        bias: DenseMatrix::zeros(1, w[1]),
                    })
                    .collect(),
            ),
        };
        Self {
            kind,
            task,
            encoder,
            trained: false,
        }
    }

    pub fn output_dim(&self) -> usize {
        match &self.encoder {
            Encoder::Gcn(s) => s.output_dim(),
            Encoder::Sage(ls) => ls.last().map_or(0, |l| l.w_self.cols()),
        }
    }

    fn forward_cached(&self, g: &Graph) -> Result<Cache> {
        match &self.encoder {
            Encoder::Gcn(stack) => Ok(Cache::Gcn(stack.forward(g, GcnInput::Features(g.features()))?)),
            Encoder::Sage(layers) => {
                let mut inputs = Vec::with_capacity(layers.len());
                let mut aggregated = Vec::with_capacity(layers.len());
                let mut pre = Vec::with_capacity(layers.len());
                let mut h = g.features().clone();
                for (l, layer) in layers.iter().enumerate() {
                    let agg = mean_aggregate(g, &h);
                    let mut z = h.matmul(&layer.w_self)?;
                    z.add_assign(&agg.matmul(&layer.w_neigh)?)?;
                    z.add_row_broadcast(&layer.bias)?;
                    let next = if l + 1 < layers.len() { z.map(relu) } else { z.clone() };
                    inputs.push(h);
                    aggregated.push(agg);
                    pre.push(z);
                    h = next;
                }
                Ok(Cache::Sage {
                    inputs,
                    aggregated,
                    pre,
                    output: h,
                })
            }
        }
    }

    /// Gradients of every tensor (in [`Parameters::tensors`] order) given the
    /// gradient w.r.t. the output matrix.
    fn backward(&self, g: &Graph, cache: &Cache, d_out: &DenseMatrix) -> Result<Vec<DenseMatrix>> {
        match (&self.encoder, cache) {
            (Encoder::Gcn(stack), Cache::Gcn(c)) => Ok(stack
                .backward(g, c, d_out)?
                .into_iter()
                .flat_map(|(w, b)| [w, b])
                .collect()),
            (
                Encoder::Sage(layers),
                Cache::Sage {
                    inputs,
                    aggregated,
                    pre,
                    ..
                },
            ) => {
                let mut grads = vec![Vec::new(); layers.len()];
                let mut d_h = d_out.clone();
                for l in (0..layers.len()).rev() {
                    let d_z = if l + 1 < layers.len() {
                        d_h.hadamard(&pre[l].map(|x| if x > 0.0 { 1.0 } else { 0.0 }))?
                    } else {
                        d_h
                    };
                    let layer = &layers[l];
                    grads[l] = vec![
                        inputs[l].t_matmul(&d_z)?,
                        aggregated[l].t_matmul(&d_z)?,
                        d_z.column_sums(),
                    ];
                    d_h = if l > 0 {
                        let mut d = d_z.matmul_t(&layer.w_self)?;
                        d.add_assign(&mean_aggregate_adjoint(g, &d_z.matmul_t(&layer.w_neigh)?))?;
                        d
                    } else {
                        DenseMatrix::zeros(0, 0)
                    };
                }
                Ok(grads.into_iter().flatten().collect())
            }
            _ => unreachable!("cache built by the same encoder"),
        }
    }

    /// Output matrix on `g`: class logits or pair embeddings per node.
    pub fn forward(&self, g: &Graph) -> Result<DenseMatrix> {
        self.check_graph(g)?;
        Ok(self.forward_cached(g)?.output().clone())
    }

    fn check_graph(&self, g: &Graph) -> Result<()> {
        let expect = match &self.encoder {
            Encoder::Gcn(s) => s.layers[0].input_dim(),
            Encoder::Sage(ls) => ls[0].w_self.rows(),
        };
        if g.feature_dim() != expect {
            return Err(Error::input(format!(
                "victim expects {expect} features, graph has {}",
                g.feature_dim()
            )));
        }
        Ok(())
    }

    /// Mean cross-entropy over `batch` and its gradient.
    pub fn loss_and_grad(&self, g: &Graph, batch: &[Sample]) -> Result<(f64, Vec<DenseMatrix>)> {
        if batch.is_empty() {
            return Err(Error::input("empty training batch"));
        }
        self.check_graph(g)?;
        let cache = self.forward_cached(g)?;
        let out = cache.output();
        let scale = 1.0 / batch.len() as f64;
        let mut d_out = DenseMatrix::zeros(out.rows(), out.cols());
        let mut loss = 0.0;
        match self.task {
            Task::Nc => {
                let probs = softmax_rows(out);
                for s in batch {
                    let v = node_of(s, g)?;
                    if s.label >= out.cols() {
                        return Err(Error::input(format!("label {} with {} classes", s.label, out.cols())));
                    }
                    let row = out.row(v);
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
                    loss += (lse - row[s.label]) * scale;
                    for c in 0..out.cols() {
                        let y = if c == s.label { 1.0 } else { 0.0 };
                        let cur = d_out.get(v, c);
                        d_out.set(v, c, cur + (probs.get(v, c) - y) * scale);
                    }
                }
            }
            Task::Lp | Task::Pnc => {
                for s in batch {
                    let (u, v) = pair_of(s, g)?;
                    let logit = dot(out.row(u), out.row(v));
                    // BCE with logits: y·(−ln σ(s)) + (1−y)·(−ln σ(−s)).
                    let (l, d) = if s.label == 1 {
                        neg_log_sigmoid(logit)
                    } else {
                        let (l, d) = neg_log_sigmoid(-logit);
                        (l, -d)
                    };
                    loss += l * scale;
                    let (zu, zv) = (out.row(u).to_vec(), out.row(v).to_vec());
                    for c in 0..out.cols() {
                        let cu = d_out.get(u, c);
                        d_out.set(u, c, cu + d * scale * zv[c]);
                        let cv = d_out.get(v, c);
                        d_out.set(v, c, cv + d * scale * zu[c]);
                    }
                }
            }
        }
        Ok((loss, self.backward(g, &cache, &d_out)?))
    }

    /// Prediction for `q` from a precomputed output matrix.
    pub fn predict_from(&self, out: &DenseMatrix, q: &Query) -> Result<usize> {
        match (self.task, *q) {
            (Task::Nc, Query::Node(v)) => {
                check_row(out, v)?;
                Ok(argmax(out.row(v)))
            }
            (Task::Lp | Task::Pnc, Query::Pair(u, v)) => {
                check_row(out, u)?;
                check_row(out, v)?;
                // sigmoid(s) > 0.5 exactly when s > 0.
                Ok(usize::from(dot(out.row(u), out.row(v)) > 0.0))
            }
            (task, q) => Err(Error::input(format!("query {q:?} does not fit task {task}"))),
        }
    }
}

fn check_row(out: &DenseMatrix, v: usize) -> Result<()> {
    if v >= out.rows() {
        return Err(Error::input(format!("node {v} out of range ({} nodes)", out.rows())));
    }
    Ok(())
}

fn node_of(s: &Sample, g: &Graph) -> Result<usize> {
    match s.query {
        Query::Node(v) => {
            g.check_node(v)?;
            Ok(v)
        }
        Query::Pair(..) => Err(Error::input("pair sample given to a node task")),
    }
}

fn pair_of(s: &Sample, g: &Graph) -> Result<(usize, usize)> {
    match s.query {
        Query::Pair(u, v) => {
            g.check_node(u)?;
            g.check_node(v)?;
            Ok((u, v))
        }
        Query::Node(_) => Err(Error::input("node sample given to a pair task")),
    }
}

impl Parameters for VictimModel {
    fn tensors(&self) -> Vec<&DenseMatrix> {
        match &self.encoder {
            Encoder::Gcn(s) => s.tensors(),
            Encoder::Sage(ls) => ls.iter().flat_map(|l| [&l.w_self, &l.w_neigh, &l.bias]).collect(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        match &mut self.encoder {
            Encoder::Gcn(s) => s.tensors_mut(),
            Encoder::Sage(ls) => ls
                .iter_mut()
                .flat_map(|l| [&mut l.w_self, &mut l.w_neigh, &mut l.bias])
                .collect(),
        }
    }
}
