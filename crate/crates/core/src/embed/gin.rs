//! Graph Isomorphism Network over one-hot node inputs.
//!
//! Layer `i` computes `MLP_i((1 + eps_i) * h_v + sum_{u in N(v)} h_u)` where
//! each MLP is `Linear -> ReLU -> Linear`. The first layer's input is the
//! identity matrix, so its aggregation is folded into the first weight matrix
//! and the `n x n` one-hot block is never built.

use crate::error::{Error, Result};
use crate::gcn::DenseLayer;
use crate::graph::Graph;
use crate::numerics::{relu, DenseMatrix};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct GinLayer {
    /// Learnable self-weight offset, stored as a `1 x 1` tensor.
    pub epsilon: DenseMatrix,
    pub hidden: DenseLayer,
    pub output: DenseLayer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GinParams {
    pub layers: Vec<GinLayer>,
}

pub(crate) struct GinCache {
    /// Layer inputs `h_{i-1}` (unused for the one-hot first layer).
    inputs: Vec<Option<DenseMatrix>>,
    aggregated: Vec<Option<DenseMatrix>>,
    pre_hidden: Vec<DenseMatrix>,
    act_hidden: Vec<DenseMatrix>,
    pub output: DenseMatrix,
}

/// `out[v] = (1 + eps) x[v] + sum_{u in N(v)} x[u]`. Symmetric in the graph,
/// hence self-adjoint.
pub(crate) fn sum_aggregate(g: &Graph, x: &DenseMatrix, eps: f64) -> DenseMatrix {
    let mut out = x.scaled(1.0 + eps);
    for v in 0..g.node_count() {
        for &u in g.neighbors(v) {
            for (o, s) in out.row_mut(v).iter_mut().zip(x.row(u)) {
                *o += s;
            }
        }
    }
    out
}

impl GinParams {
    /// `layer_count` layers of width `hidden_dim`; epsilons start at zero.
    pub fn new(node_count: usize, layer_count: usize, hidden_dim: usize, rng: &mut Rng) -> Self {
        let layers = (0..layer_count)
            .map(|i| {
                let input = if i == 0 { node_count } else { hidden_dim };
                GinLayer {
                    epsilon: DenseMatrix::scalar(0.0),
                    hidden: DenseLayer::new(input, hidden_dim, rng),
                    output: DenseLayer::new(hidden_dim, hidden_dim, rng),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn node_count(&self) -> usize {
        self.layers.first().map_or(0, |l| l.hidden.input_dim())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output.output_dim())
    }

    pub(crate) fn forward_cached(&self, g: &Graph) -> Result<GinCache> {
        let n = g.node_count();
        if self.layers.is_empty() {
            return Err(Error::input("GIN needs at least one layer"));
        }
        if self.node_count() != n {
            return Err(Error::input(format!(
                "GIN parameters sized for {} nodes, graph has {n}",
                self.node_count()
            )));
        }
        let mut cache = GinCache {
            inputs: Vec::new(),
            aggregated: Vec::new(),
            pre_hidden: Vec::new(),
            act_hidden: Vec::new(),
            output: DenseMatrix::zeros(0, 0),
        };
        let mut h: Option<DenseMatrix> = None;
        for layer in &self.layers {
            let eps = layer.epsilon.get(0, 0);
            let mut pre = match h.take() {
                None => {
                    cache.inputs.push(None);
                    cache.aggregated.push(None);
                    sum_aggregate(g, &layer.hidden.weight, eps)
                }
                Some(prev) => {
                    let agg = sum_aggregate(g, &prev, eps);
                    let pre = agg.matmul(&layer.hidden.weight)?;
                    cache.inputs.push(Some(prev));
                    cache.aggregated.push(Some(agg));
                    pre
                }
            };
            pre.add_row_broadcast(&layer.hidden.bias)?;
            let act = pre.map(relu);
            let mut out = act.matmul(&layer.output.weight)?;
            out.add_row_broadcast(&layer.output.bias)?;
            cache.pre_hidden.push(pre);
            cache.act_hidden.push(act);
            h = Some(out);
        }
        cache.output = h.expect("at least one layer");
        Ok(cache)
    }

    pub fn forward(&self, g: &Graph) -> Result<DenseMatrix> {
        Ok(self.forward_cached(g)?.output)
    }

    /// Gradients in [`GinParams::tensors`] order given `d_output`.
    pub(crate) fn backward(&self, g: &Graph, cache: &GinCache, d_output: &DenseMatrix) -> Result<Vec<DenseMatrix>> {
        let mut per_layer: Vec<Vec<DenseMatrix>> = vec![Vec::new(); self.layers.len()];
        let mut d_h = d_output.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let eps = layer.epsilon.get(0, 0);
            let d_w2 = cache.act_hidden[l].t_matmul(&d_h)?;
            let d_b2 = d_h.column_sums();
            let d_act = d_h.matmul_t(&layer.output.weight)?;
            let mask = cache.pre_hidden[l].map(|x| if x > 0.0 { 1.0 } else { 0.0 });
            let d_pre = d_act.hadamard(&mask)?;
            let d_b1 = d_pre.column_sums();
            let (d_eps, d_w1) = match (&cache.inputs[l], &cache.aggregated[l]) {
                (Some(input), Some(agg)) => {
                    let d_w1 = agg.t_matmul(&d_pre)?;
                    let d_agg = d_pre.matmul_t(&layer.hidden.weight)?;
                    let d_eps = input.frobenius_dot(&d_agg)?;
                    d_h = sum_aggregate(g, &d_agg, eps);
                    (d_eps, d_w1)
                }
                _ => {
                    let d_eps = layer.hidden.weight.frobenius_dot(&d_pre)?;
                    (d_eps, sum_aggregate(g, &d_pre, eps))
                }
            };
            per_layer[l] = vec![DenseMatrix::scalar(d_eps), d_w1, d_b1, d_w2, d_b2];
        }
        Ok(per_layer.into_iter().flatten().collect())
    }

    pub fn tensors(&self) -> Vec<&DenseMatrix> {
        self.layers
            .iter()
            .flat_map(|l| [&l.epsilon, &l.hidden.weight, &l.hidden.bias, &l.output.weight, &l.output.bias])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    &mut l.epsilon,
                    &mut l.hidden.weight,
                    &mut l.hidden.bias,
                    &mut l.output.weight,
                    &mut l.output.bias,
                ]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_check;
    use crate::rng::seeded;
    use rand::seq::SliceRandom;

    fn identity_layer(n: usize) -> GinLayer {
        GinLayer {
            epsilon: DenseMatrix::scalar(0.0),
            hidden: DenseLayer {
                weight: DenseMatrix::identity(n),
                bias: DenseMatrix::zeros(1, n),
            },
            output: DenseLayer {
                weight: DenseMatrix::identity(n),
                bias: DenseMatrix::zeros(1, n),
            },
        }
    }

    fn eight_node_graph() -> Graph {
        let edges = [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 6), (6, 3), (1, 7)];
        Graph::structural(8, &edges).unwrap()
    }

    #[test]
    fn identity_mlp_yields_closed_neighborhood_indicator() {
        let g = eight_node_graph();
        let params = GinParams {
            layers: vec![identity_layer(8)],
        };
        let z = params.forward(&g).unwrap();
        for v in 0..8 {
            for u in 0..8 {
                let expect = if u == v || g.has_edge(u, v) { 1.0 } else { 0.0 };
                assert_eq!(z.get(v, u), expect);
            }
        }
    }

    #[test]
    fn edgeless_identity_gin_returns_one_hot() {
        let g = Graph::structural(5, &[]).unwrap();
        let params = GinParams {
            layers: vec![identity_layer(5), identity_layer(5)],
        };
        assert_eq!(params.forward(&g).unwrap(), DenseMatrix::identity(5));
    }

    /// Evaluates the GIN update node by node from the raw definition.
    fn naive_forward(params: &GinParams, g: &Graph) -> DenseMatrix {
        let n = g.node_count();
        let mut h = DenseMatrix::identity(n);
        for layer in &params.layers {
            let eps = layer.epsilon.get(0, 0);
            let width = layer.output.output_dim();
            let mut next = DenseMatrix::zeros(n, width);
            for v in 0..n {
                let mut agg: Vec<f64> = h.row(v).iter().map(|x| (1.0 + eps) * x).collect();
                for &u in g.neighbors(v) {
                    for (a, x) in agg.iter_mut().zip(h.row(u)) {
                        *a += x;
                    }
                }
                let hid: Vec<f64> = (0..layer.hidden.output_dim())
                    .map(|j| {
                        let s: f64 = (0..agg.len()).map(|i| agg[i] * layer.hidden.weight.get(i, j)).sum();
                        relu(s + layer.hidden.bias.get(0, j))
                    })
                    .collect();
                for j in 0..width {
                    let s: f64 = (0..hid.len()).map(|i| hid[i] * layer.output.weight.get(i, j)).sum();
                    next.set(v, j, s + layer.output.bias.get(0, j));
                }
            }
            h = next;
        }
        h
    }

    fn randomized(node_count: usize, seed: u64) -> GinParams {
        let mut rng = seeded(seed);
        let mut p = GinParams::new(node_count, 2, 6, &mut rng);
        for (i, l) in p.layers.iter_mut().enumerate() {
            l.epsilon = DenseMatrix::scalar(0.1 + 0.2 * i as f64);
            l.hidden.bias = DenseMatrix::xavier(1, 6, &mut rng);
            l.output.bias = DenseMatrix::xavier(1, 6, &mut rng);
        }
        p
    }

    #[test]
    fn forward_matches_naive_per_node_evaluation() {
        let g = eight_node_graph();
        let params = randomized(8, 31);
        let fast = params.forward(&g).unwrap();
        let slow = naive_forward(&params, &g);
        for (a, b) in fast.as_slice().iter().zip(slow.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_is_permutation_equivariant() {
        let g = eight_node_graph();
        let params = randomized(8, 17);
        let z = params.forward(&g).unwrap();
        let mut rng = seeded(2);
        for _ in 0..5 {
            let mut perm: Vec<usize> = (0..8).collect();
            perm.shuffle(&mut rng);
            // perm[old] = new
            let edges: Vec<_> = g.edges().iter().map(|&(u, v)| (perm[u], perm[v])).collect();
            let gp = Graph::structural(8, &edges).unwrap();
            // One-hot inputs are permuted too, i.e. row perm[u] of W1 holds old row u.
            let mut pp = params.clone();
            let w = &params.layers[0].hidden.weight;
            pp.layers[0].hidden.weight = DenseMatrix::from_fn(8, w.cols(), |r, c| {
                let old = perm.iter().position(|&p| p == r).unwrap();
                w.get(old, c)
            });
            let zp = pp.forward(&gp).unwrap();
            for old in 0..8 {
                for (a, b) in z.row(old).iter().zip(zp.row(perm[old])) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shape_mismatch_is_input_error() {
        let params = randomized(8, 1);
        let g = Graph::structural(6, &[(0, 1)]).unwrap();
        assert!(matches!(params.forward(&g), Err(Error::Input(_))));
    }

    #[test]
    fn backward_passes_finite_differences() {
        let g = eight_node_graph();
        let params = randomized(8, 5);
        let mut rng = seeded(77);
        let probe = DenseMatrix::xavier(8, 6, &mut rng);
        let cache = params.forward_cached(&g).unwrap();
        let grads = params.backward(&g, &cache, &probe).unwrap();
        for (idx, grad) in grads.iter().enumerate() {
            let base = params.tensors()[idx].clone();
            let err = finite_diff_check(
                |t| {
                    let mut p = params.clone();
                    *p.tensors_mut()[idx] = t.clone();
                    p.forward(&g).unwrap().frobenius_dot(&probe).unwrap()
                },
                &base,
                grad,
                1e-6,
            )
            .unwrap();
            assert!(err < 1e-6, "tensor {idx}: {err}");
        }
    }
}
