//! Graph convolution with symmetric normalisation `D^-1/2 (A + I) D^-1/2`,
//! shared by the attacker's Q-network, the victim models and the GCN
//! embedding backend.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::{relu, DenseMatrix};
use crate::rng::Rng;

/// Multiplies `x` by the normalised adjacency of `g` (with self-loops).
/// The operator is symmetric, so this is also its own adjoint.
pub fn propagate(g: &Graph, x: &DenseMatrix) -> Result<DenseMatrix> {
    let n = g.node_count();
    if x.rows() != n {
        return Err(Error::input(format!("propagate: {} rows for {n} nodes", x.rows())));
    }
    let inv_sqrt: Vec<f64> = (0..n).map(|v| 1.0 / ((g.degree(v) + 1) as f64).sqrt()).collect();
    let mut out = DenseMatrix::zeros(n, x.cols());
    for v in 0..n {
        let self_w = inv_sqrt[v] * inv_sqrt[v];
        let row = out.row_mut(v);
        for (o, xv) in row.iter_mut().zip(x.row(v)) {
            *o += self_w * xv;
        }
        for &u in g.neighbors(v) {
            let w = inv_sqrt[v] * inv_sqrt[u];
            for (o, xu) in row.iter_mut().zip(x.row(u)) {
                *o += w * xu;
            }
        }
    }
    Ok(out)
}

/// Weight and bias of one dense transform.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: DenseMatrix,
    pub bias: DenseMatrix,
}

impl DenseLayer {
    pub fn new(input: usize, output: usize, rng: &mut Rng) -> Self {
        Self {
            weight: DenseMatrix::xavier(input, output, rng),
            bias: DenseMatrix::zeros(1, output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }
}

/// Input to the first convolution.
#[derive(Debug, Clone, Copy)]
pub enum GcnInput<'a> {
    /// Node-id one-hot vectors (`node_count` columns), never materialised.
    OneHot,
    Features(&'a DenseMatrix),
}

/// A stack of graph convolutions; ReLU between layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnStack {
    pub layers: Vec<DenseLayer>,
}

/// Intermediate values needed for the backward pass.
#[derive(Debug, Clone)]
pub struct GcnCache {
    /// Propagated input of each layer (`None` for a one-hot first layer).
    propagated: Vec<Option<DenseMatrix>>,
    /// Pre-activation of each layer.
    pre: Vec<DenseMatrix>,
    /// Final node embeddings.
    pub output: DenseMatrix,
}

impl GcnStack {
    /// `dims = [input, hidden..., output]`.
    pub fn new(dims: &[usize], rng: &mut Rng) -> Self {
        let layers = dims.windows(2).map(|w| DenseLayer::new(w[0], w[1], rng)).collect();
        Self { layers }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::output_dim)
    }

    pub fn forward(&self, g: &Graph, input: GcnInput<'_>) -> Result<GcnCache> {
        let n = g.node_count();
        let mut propagated = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h: Option<DenseMatrix> = None;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = match (l, input, &h) {
                (0, GcnInput::OneHot, _) => {
                    if layer.input_dim() != n {
                        return Err(Error::input(format!(
                            "one-hot layer expects {} nodes, graph has {n}",
                            layer.input_dim()
                        )));
                    }
                    propagated.push(None);
                    propagate(g, &layer.weight)?
                }
                (0, GcnInput::Features(x), _) => {
                    let p = propagate(g, x)?;
                    let z = p.matmul(&layer.weight)?;
                    propagated.push(Some(p));
                    z
                }
                (_, _, Some(prev)) => {
                    let p = propagate(g, prev)?;
                    let z = p.matmul(&layer.weight)?;
                    propagated.push(Some(p));
                    z
                }
                _ => unreachable!("hidden state exists after the first layer"),
            };
            z.add_row_broadcast(&layer.bias)?;
            let out = if l + 1 < self.layers.len() { z.map(relu) } else { z.clone() };
            pre.push(z);
            h = Some(out);
        }
        let output = h.unwrap_or_else(|| match input {
            GcnInput::Features(x) => x.clone(),
            GcnInput::OneHot => DenseMatrix::identity(n),
        });
        Ok(GcnCache {
            propagated,
            pre,
            output,
        })
    }

    /// Back-propagates `d_output` (gradient w.r.t. the final embeddings) and
    /// returns `(d_weight, d_bias)` for every layer, in order.
    pub fn backward(&self, g: &Graph, cache: &GcnCache, d_output: &DenseMatrix) -> Result<Vec<(DenseMatrix, DenseMatrix)>> {
        let mut grads = vec![None; self.layers.len()];
        let mut d_h = d_output.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let d_z = if l + 1 < self.layers.len() {
                let mask = cache.pre[l].map(|x| if x > 0.0 { 1.0 } else { 0.0 });
                d_h.hadamard(&mask)?
            } else {
                d_h
            };
            let d_b = d_z.column_sums();
            let d_w = match &cache.propagated[l] {
                Some(p) => p.t_matmul(&d_z)?,
                // One-hot input: d_W = Âᵀ d_Z = Â d_Z.
                None => propagate(g, &d_z)?,
            };
            if l > 0 {
                d_h = propagate(g, &d_z.matmul_t(&layer.weight)?)?;
            } else {
                d_h = DenseMatrix::zeros(0, 0);
            }
            grads[l] = Some((d_w, d_b));
        }
        Ok(grads.into_iter().map(|g| g.expect("filled")).collect())
    }

    pub fn tensors(&self) -> Vec<&DenseMatrix> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}
