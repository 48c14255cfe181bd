//! Q-network: a feature GCN producing node embeddings `μ`, a state vector
//! summed over the target's k-hop neighborhood, signed action vectors
//! `±[μ_v, μ_t]`, and a two-layer MLP head `w1ᵀ·ReLU(W2ᵀ·[state, action])`.

use crate::error::{Error, Result};
use crate::gcn::{GcnCache, GcnInput, GcnStack};
use crate::graph::{EdgeEdit, Graph, NodeSet};
use crate::numerics::{relu, DenseMatrix, Parameters};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct QNetParams {
    pub gcn: GcnStack,
    /// `(3·h_g) × h_m`, applied to the concatenated state and action.
    pub w2: DenseMatrix,
    /// `h_m × 1`.
    pub w1: DenseMatrix,
}

/// Node embeddings of one graph plus what backpropagation needs.
#[derive(Debug, Clone)]
pub struct NodeEmbeddings {
    cache: GcnCache,
}

impl NodeEmbeddings {
    pub fn mu(&self) -> &DenseMatrix {
        &self.cache.output
    }
}

impl QNetParams {
    pub fn new(feature_dim: usize, gcn_layers: usize, gcn_hidden: usize, mlp_hidden: usize, rng: &mut Rng) -> Self {
        let mut dims = vec![feature_dim];
        dims.extend(std::iter::repeat_n(gcn_hidden, gcn_layers));
        let gcn = GcnStack::new(&dims, rng);
        Self {
            w2: DenseMatrix::xavier(3 * gcn_hidden, mlp_hidden, rng),
            w1: DenseMatrix::xavier(mlp_hidden, 1, rng),
            gcn,
        }
    }

    /// `h_g`, the node-embedding width.
    pub fn embed_dim(&self) -> usize {
        self.gcn.output_dim()
    }

    pub fn mlp_hidden(&self) -> usize {
        self.w1.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.gcn.layers.first().map_or(0, |l| l.input_dim())
    }

    pub fn node_embeddings(&self, g: &Graph) -> Result<NodeEmbeddings> {
        if g.feature_dim() != self.feature_dim() {
            return Err(Error::input(format!(
                "Q-network expects {} features, graph has {}",
                self.feature_dim(),
                g.feature_dim()
            )));
        }
        Ok(NodeEmbeddings {
            cache: self.gcn.forward(g, GcnInput::Features(g.features()))?,
        })
    }

    pub fn q_forward(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        Ok(self.head(state, action)?.q)
    }

    fn head(&self, state: &[f64], action: &[f64]) -> Result<Head> {
        let h = self.embed_dim();
        if state.len() != h || action.len() != 2 * h || self.w2.rows() != 3 * h {
            return Err(Error::input(format!(
                "Q head expects state {h} and action {}, got {} and {}",
                2 * h,
                state.len(),
                action.len()
            )));
        }
        let x: Vec<f64> = state.iter().chain(action).copied().collect();
        let pre = DenseMatrix::row_vector(&x).matmul(&self.w2)?;
        let hidden = pre.map(relu);
        let q = hidden.matmul(&self.w1)?.get(0, 0);
        Ok(Head { x, pre, hidden, q })
    }

    /// Q-values of `edits` (all incident on `t`) in graph `g`, ordered like
    /// `edits`. One GCN pass is shared by all candidates.
    pub fn score_edits(&self, g: &Graph, t: usize, k: usize, edits: &[EdgeEdit]) -> Result<Vec<f64>> {
        let emb = self.node_embeddings(g)?;
        let state = state_repr(emb.mu(), &g.k_hop_neighborhood(t, k)?);
        edits
            .iter()
            .map(|e| {
                let v = e.other(t).ok_or_else(|| Error::input(format!("edit {e} not incident on {t}")))?;
                self.q_forward(&state, &action_repr(emb.mu(), v, t, e.sign.factor()))
            })
            .collect()
    }

    /// Squared loss `mean_i (y_i − Q(s_i, a_i))²` over `samples` and its
    /// gradient for [`Parameters::tensors`].
    pub fn squared_loss(&self, samples: &[QSample<'_>], k: usize) -> Result<(f64, Vec<DenseMatrix>)> {
        if samples.is_empty() {
            return Err(Error::input("empty training batch"));
        }
        let h = self.embed_dim();
        let scale = 1.0 / samples.len() as f64;
        let mut grads: Vec<DenseMatrix> = self.tensors().iter().map(|t| DenseMatrix::zeros(t.rows(), t.cols())).collect();
        let mut loss = 0.0;
        for s in samples {
            let v = s
                .action
                .other(s.target)
                .ok_or_else(|| Error::input("action not incident on target"))?;
            let sign = s.action.sign.factor();
            let emb = self.node_embeddings(s.graph)?;
            let nbhd = s.graph.k_hop_neighborhood(s.target, k)?;
            let state = state_repr(emb.mu(), &nbhd);
            let action = action_repr(emb.mu(), v, s.target, sign);
            let head = self.head(&state, &action)?;
            let err = s.y - head.q;
            loss += scale * err * err;
            let dq = -2.0 * scale * err;

            // Head.
            let d_w1 = head.hidden.transpose().scaled(dq);
            let d_pre = DenseMatrix::from_fn(1, self.mlp_hidden(), |_, j| {
                if head.pre.get(0, j) > 0.0 {
                    dq * self.w1.get(j, 0)
                } else {
                    0.0
                }
            });
            let d_w2 = DenseMatrix::row_vector(&head.x).t_matmul(&d_pre)?;
            let d_x = d_pre.matmul_t(&self.w2)?;
            let d_x = d_x.row(0);

            // Back into the node embeddings.
            let mut d_mu = DenseMatrix::zeros(s.graph.node_count(), h);
            for u in nbhd.iter() {
                for (a, b) in d_mu.row_mut(u).iter_mut().zip(&d_x[..h]) {
                    *a += b;
                }
            }
            for (a, b) in d_mu.row_mut(v).iter_mut().zip(&d_x[h..2 * h]) {
                *a += sign * b;
            }
            for (a, b) in d_mu.row_mut(s.target).iter_mut().zip(&d_x[2 * h..]) {
                *a += sign * b;
            }
            let layer_grads = self.gcn.backward(s.graph, &emb.cache, &d_mu)?;
            for (i, (dw, db)) in layer_grads.into_iter().enumerate() {
                grads[2 * i].add_assign(&dw)?;
                grads[2 * i + 1].add_assign(&db)?;
            }
            let n = grads.len();
            grads[n - 2].add_assign(&d_w2)?;
            grads[n - 1].add_assign(&d_w1)?;
        }
        Ok((loss, grads))
    }
}

struct Head {
    x: Vec<f64>,
    pre: DenseMatrix,
    hidden: DenseMatrix,
    q: f64,
}

/// One regression example: the graph state, target, action and the target
/// value `y`.
#[derive(Debug, Clone, Copy)]
pub struct QSample<'a> {
    pub graph: &'a Graph,
    pub target: usize,
    pub action: EdgeEdit,
    pub y: f64,
}

/// Sum of embedding rows over `nbhd`.
pub fn state_repr(mu: &DenseMatrix, nbhd: &NodeSet) -> Vec<f64> {
    let mut s = vec![0.0; mu.cols()];
    for u in nbhd.iter() {
        for (a, b) in s.iter_mut().zip(mu.row(u)) {
            *a += b;
        }
    }
    s
}

/// `sign · [μ_v, μ_t]`.
pub fn action_repr(mu: &DenseMatrix, v: usize, t: usize, sign: f64) -> Vec<f64> {
    mu.row(v).iter().chain(mu.row(t)).map(|x| sign * x).collect()
}

impl Parameters for QNetParams {
    fn tensors(&self) -> Vec<&DenseMatrix> {
        let mut out = self.gcn.tensors();
        out.push(&self.w2);
        out.push(&self.w1);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        let mut out = self.gcn.tensors_mut();
        out.push(&mut self.w2);
        out.push(&mut self.w1);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::check_model_gradients;
    use crate::rng::seeded;
    use crate::sbm::{generate, SbmSpec};

    fn fixture(n: usize, seed: u64) -> Graph {
        let spec = SbmSpec {
            feature_dim: 6,
            ..SbmSpec::two_blocks(n, 0.4, 0.1)
        };
        generate(&spec, seed).unwrap()
    }

    #[test]
    fn state_is_neighborhood_sum() {
        let g = fixture(8, 1);
        let q = QNetParams::new(6, 2, 4, 5, &mut seeded(2));
        let emb = q.node_embeddings(&g).unwrap();
        let nb = g.k_hop_neighborhood(0, 2).unwrap();
        let s = state_repr(emb.mu(), &nb);
        for c in 0..4 {
            let mut expect = 0.0;
            for u in 0..8 {
                if nb.contains(u) {
                    expect += emb.mu().get(u, c);
                }
            }
            assert!((s[c] - expect).abs() < 1e-14);
        }
        let lonely = Graph::from_edges(3, &[(1, 2)], DenseMatrix::identity(3).map(|x| x * 2.0), None).unwrap();
        let q3 = QNetParams::new(3, 2, 4, 5, &mut seeded(2));
        let emb = q3.node_embeddings(&lonely).unwrap();
        assert_eq!(state_repr(emb.mu(), &lonely.k_hop_neighborhood(0, 2).unwrap()), emb.mu().row(0));
    }

    #[test]
    fn zero_weights_give_zero_state_and_q() {
        let g = fixture(8, 1);
        let mut q = QNetParams::new(6, 2, 4, 5, &mut seeded(2));
        for t in q.gcn.tensors_mut() {
            *t = DenseMatrix::zeros(t.rows(), t.cols());
        }
        let emb = q.node_embeddings(&g).unwrap();
        assert!(state_repr(emb.mu(), &g.k_hop_neighborhood(0, 2).unwrap()).iter().all(|&x| x == 0.0));
        let mut q = QNetParams::new(6, 2, 4, 5, &mut seeded(3));
        q.w1 = DenseMatrix::zeros(5, 1);
        assert!(q.score_edits(&g, 0, 2, &g.candidate_edits(0, &g.all_but(0)).unwrap()).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn action_sign_and_linearity_in_w1() {
        let g = fixture(8, 4);
        let mut q = QNetParams::new(6, 2, 4, 5, &mut seeded(5));
        let emb = q.node_embeddings(&g).unwrap();
        let add = action_repr(emb.mu(), 3, 0, 1.0);
        let del = action_repr(emb.mu(), 3, 0, -1.0);
        assert_eq!(add.len(), 8);
        assert!(add.iter().zip(&del).all(|(a, d)| *a == -d));
        assert_eq!(&add[..4], emb.mu().row(3));
        assert_eq!(&add[4..], emb.mu().row(0));
        let s = state_repr(emb.mu(), &g.k_hop_neighborhood(0, 2).unwrap());
        let before = q.q_forward(&s, &add).unwrap();
        q.w1.scale_in_place(2.0);
        assert!((q.q_forward(&s, &add).unwrap() - 2.0 * before).abs() < 1e-12);
        assert!(q.q_forward(&s[..3], &add).is_err());
    }

    #[test]
    fn squared_loss_gradient_passes_finite_differences() {
        let g = fixture(10, 6);
        let g2 = g.apply_edit(&g.toggle_edit(1, 7)).unwrap();
        let mut rng = seeded(7);
        let mut q = QNetParams::new(6, 2, 4, 5, &mut rng);
        // Non-zero biases keep pre-activations away from the ReLU kink that
        // all-zero feature rows would otherwise sit on.
        for layer in &mut q.gcn.layers {
            layer.bias = DenseMatrix::xavier(1, layer.output_dim(), &mut rng);
        }
        let samples = [
            QSample {
                graph: &g,
                target: 0,
                action: g.toggle_edit(0, 6),
                y: 0.7,
            },
            QSample {
                graph: &g2,
                target: 1,
                action: g2.toggle_edit(1, 2),
                y: -0.3,
            },
            QSample {
                graph: &g2,
                target: 1,
                action: g2.toggle_edit(1, 7),
                y: 1.1,
            },
        ];
        let (_, grads) = q.squared_loss(&samples, 2).unwrap();
        let err = check_model_gradients(&q, |m| m.squared_loss(&samples, 2).unwrap().0, &grads, 1e-5).unwrap();
        assert!(err < 1e-4, "max rel err {err}");
    }
}
