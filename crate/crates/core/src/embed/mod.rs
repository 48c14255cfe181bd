//! Unsupervised neighborhood embeddings.
//!
//! The default backend is a GIN over one-hot node ids trained with a
//! skip-gram objective on random-walk co-occurrences and non-neighbor
//! negatives. A GCN backend trained the same way is available for ablations.
//! Once trained, the parameters are frozen and re-applied to perturbed graphs
//! to measure embedding-space distortion.

mod gin;
pub mod walks;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::debug;
use serde::{Deserialize, Serialize};

pub use gin::{GinLayer, GinParams};
pub use walks::{negative_sample, sample_positive_pairs, WalkConfig};

use crate::codec::{read_file, write_file, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::gcn::{DenseLayer, GcnInput, GcnStack};
use crate::graph::Graph;
use crate::numerics::{dot, neg_log_sigmoid, Adam, AdamConfig, DenseMatrix, Parameters};
use crate::rng::{derive_indexed, derive_seed, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Gin,
    Gcn,
}

impl Backend {
    fn tag(self) -> u8 {
        match self {
            Backend::Gin => 0,
            Backend::Gcn => 1,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Backend::Gin),
            1 => Some(Backend::Gcn),
            _ => None,
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Gin => "gin",
            Backend::Gcn => "gcn",
        })
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gin" => Ok(Backend::Gin),
            "gcn" => Ok(Backend::Gcn),
            other => Err(Error::Config(format!("unknown embedding backend {other:?}"))),
        }
    }
}

/// One embedding row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    values: DenseMatrix,
    backend: Backend,
}

const TABLE_MAGIC: &[u8; 8] = b"NBEMBTB1";
const MODEL_MAGIC: &[u8; 8] = b"NBEMBMD1";

impl EmbeddingTable {
    pub fn new(values: DenseMatrix, backend: Backend) -> Result<Self> {
        if !values.all_finite() {
            return Err(Error::input("embedding table has non-finite entries"));
        }
        Ok(Self { values, backend })
    }

    pub fn node_count(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn row(&self, v: usize) -> &[f64] {
        self.values.row(v)
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    /// Returns a copy with every row transformed by `f`.
    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..self.node_count()).map(|v| f(self.row(v))).collect();
        Self::new(DenseMatrix::from_rows(&rows)?, self.backend)
    }

    /// Header `(node_count, dim, backend)` followed by row-major `f64` bits.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(TABLE_MAGIC);
        enc.u64(self.node_count() as u64)
            .u64(self.dim() as u64)
            .u8(self.backend.tag())
            .f64s(self.values.as_slice());
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut dec = Decoder::new(bytes, TABLE_MAGIC, origin)?;
        let n = dec.usize()?;
        let dim = dec.usize()?;
        let backend = Backend::from_tag(dec.u8()?).ok_or_else(|| Error::format(origin, "unknown backend tag"))?;
        let len = n.checked_mul(dim).ok_or_else(|| Error::format(origin, "size overflow"))?;
        if len > bytes.len() / 8 {
            return Err(Error::format(origin, "table larger than file"));
        }
        let values = dec.f64s(len)?;
        dec.finish()?;
        let values = DenseMatrix::new(n, dim, values).map_err(|e| Error::format(origin, e.to_string()))?;
        Ok(Self { values, backend })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?, path)
    }
}

/// A trainable embedding network.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingModel {
    Gin(GinParams),
    Gcn(GcnStack),
}

impl EmbeddingModel {
    pub fn new(backend: Backend, node_count: usize, layers: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        match backend {
            Backend::Gin => EmbeddingModel::Gin(GinParams::new(node_count, layers, hidden_dim, &mut rng)),
            Backend::Gcn => {
                let mut dims = vec![node_count];
                dims.extend(std::iter::repeat_n(hidden_dim, layers));
                EmbeddingModel::Gcn(GcnStack::new(&dims, &mut rng))
            }
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            EmbeddingModel::Gin(_) => Backend::Gin,
            EmbeddingModel::Gcn(_) => Backend::Gcn,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            EmbeddingModel::Gin(p) => p.node_count(),
            EmbeddingModel::Gcn(s) => s.layers.first().map_or(0, DenseLayer::input_dim),
        }
    }

    /// Forward pass with the current (frozen) parameters.
    pub fn embed(&self, g: &Graph) -> Result<EmbeddingTable> {
        let z = match self {
            EmbeddingModel::Gin(p) => p.forward(g)?,
            EmbeddingModel::Gcn(s) => s.forward(g, GcnInput::OneHot)?.output,
        };
        if !z.all_finite() {
            return Err(Error::Training("embedding forward produced non-finite values".into()));
        }
        EmbeddingTable::new(z, self.backend())
    }

    /// Evaluates `loss(Z) -> (value, dZ)` on the embeddings of `g` and
    /// returns the value together with gradients for [`Parameters::tensors`].
    pub fn loss_and_grad(
        &self,
        g: &Graph,
        loss: impl FnOnce(&DenseMatrix) -> Result<(f64, DenseMatrix)>,
    ) -> Result<(f64, Vec<DenseMatrix>)> {
        match self {
            EmbeddingModel::Gin(p) => {
                let cache = p.forward_cached(g)?;
                let (value, dz) = loss(&cache.output)?;
                Ok((value, p.backward(g, &cache, &dz)?))
            }
            EmbeddingModel::Gcn(s) => {
                let cache = s.forward(g, GcnInput::OneHot)?;
                let (value, dz) = loss(&cache.output)?;
                let grads = s.backward(g, &cache, &dz)?;
                Ok((value, grads.into_iter().flat_map(|(w, b)| [w, b]).collect()))
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(MODEL_MAGIC);
        enc.u8(self.backend().tag());
        let tensors = self.tensors();
        enc.u64(tensors.len() as u64);
        for t in tensors {
            enc.matrix(t);
        }
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut dec = Decoder::new(bytes, MODEL_MAGIC, origin)?;
        let backend = Backend::from_tag(dec.u8()?).ok_or_else(|| Error::format(origin, "unknown backend tag"))?;
        let count = dec.usize()?;
        let tensors: Vec<DenseMatrix> = (0..count).map(|_| dec.matrix()).collect::<Result<_>>()?;
        dec.finish()?;
        let bad = || Error::format(origin, "tensor layout does not match backend");
        match backend {
            Backend::Gin => {
                if tensors.is_empty() || !tensors.len().is_multiple_of(5) {
                    return Err(bad());
                }
                let layers = tensors
                    .chunks(5)
                    .map(|c| GinLayer {
                        epsilon: c[0].clone(),
                        hidden: DenseLayer {
                            weight: c[1].clone(),
                            bias: c[2].clone(),
                        },
                        output: DenseLayer {
                            weight: c[3].clone(),
                            bias: c[4].clone(),
                        },
                    })
                    .collect();
                Ok(EmbeddingModel::Gin(GinParams { layers }))
            }
            Backend::Gcn => {
                if tensors.is_empty() || !tensors.len().is_multiple_of(2) {
                    return Err(bad());
                }
                let layers = tensors
                    .chunks(2)
                    .map(|c| DenseLayer {
                        weight: c[0].clone(),
                        bias: c[1].clone(),
                    })
                    .collect();
                Ok(EmbeddingModel::Gcn(GcnStack { layers }))
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?, path)
    }
}

impl Parameters for EmbeddingModel {
    fn tensors(&self) -> Vec<&DenseMatrix> {
        match self {
            EmbeddingModel::Gin(p) => p.tensors(),
            EmbeddingModel::Gcn(s) => s.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        match self {
            EmbeddingModel::Gin(p) => p.tensors_mut(),
            EmbeddingModel::Gcn(s) => s.tensors_mut(),
        }
    }
}

/// Skip-gram loss with negative sampling:
/// `mean_pos[-log σ(z_u·z_v)] + mean_neg[-log σ(-z_u·z_w)]`.
/// Returns the loss and its gradient with respect to every row of `z`.
pub fn unsup_loss(
    z: &DenseMatrix,
    positives: &[(usize, usize)],
    negatives: &[(usize, usize)],
) -> Result<(f64, DenseMatrix)> {
    if positives.is_empty() {
        return Err(Error::input("unsupervised loss needs at least one positive pair"));
    }
    let n = z.rows();
    if positives.iter().chain(negatives).any(|&(a, b)| a >= n || b >= n) {
        return Err(Error::input("pair references a node outside the embedding table"));
    }
    let mut grad = DenseMatrix::zeros(n, z.cols());
    let mut total = 0.0;
    for (pairs, sign) in [(positives, 1.0), (negatives, -1.0)] {
        if pairs.is_empty() {
            continue;
        }
        let scale = 1.0 / pairs.len() as f64;
        let mut part = 0.0;
        for &(u, v) in pairs {
            let s = dot(z.row(u), z.row(v));
            let (l, dl) = neg_log_sigmoid(sign * s);
            part += l;
            let coeff = scale * sign * dl;
            if coeff == 0.0 {
                continue;
            }
            let zu = z.row(u).to_vec();
            let zv = z.row(v).to_vec();
            for (gu, x) in grad.row_mut(u).iter_mut().zip(&zv) {
                *gu += coeff * x;
            }
            for (gv, x) in grad.row_mut(v).iter_mut().zip(&zu) {
                *gv += coeff * x;
            }
        }
        total += part * scale;
    }
    Ok((total, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub backend: Backend,
    pub layers: usize,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub walk: WalkConfig,
    pub learning_rate: f64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Gin,
            layers: 2,
            hidden_dim: 16,
            epochs: 100,
            walk: WalkConfig::default(),
            learning_rate: 0.01,
        }
    }
}

/// Output of [`train_embedder`].
#[derive(Debug, Clone)]
pub struct TrainedEmbedder {
    pub model: EmbeddingModel,
    pub table: EmbeddingTable,
    /// Loss of every epoch, in order.
    pub losses: Vec<f64>,
}

/// Trains the embedding network: each epoch samples a fresh round of walks,
/// draws one negative per positive pair and takes one Adam step on the mean
/// loss over the whole round.
pub fn train_embedder(g: &Graph, cfg: &EmbedConfig, seed: u64) -> Result<TrainedEmbedder> {
    cfg.walk.validate()?;
    if cfg.layers == 0 || cfg.hidden_dim == 0 {
        return Err(Error::Config("embedder needs positive layers and hidden_dim".into()));
    }
    let mut model = EmbeddingModel::new(
        cfg.backend,
        g.node_count(),
        cfg.layers,
        cfg.hidden_dim,
        derive_seed(seed, "embed-init"),
    );
    let mut opt = Adam::for_params(
        &model,
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
    );
    let walk_root = derive_seed(seed, "embed-walks");
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut rng = seeded(derive_indexed(walk_root, epoch as u64));
        let positives = sample_positive_pairs(g, &cfg.walk, &mut rng)?;
        if positives.is_empty() {
            return Err(Error::Training("graph produced no positive walk pairs".into()));
        }
        let negatives = walks::negatives_for(g, &positives, &mut rng);
        let (loss, grads) = model.loss_and_grad(g, |z| unsup_loss(z, &positives, &negatives))?;
        if !loss.is_finite() {
            return Err(Error::Training(format!("non-finite embedding loss at epoch {epoch}")));
        }
        opt.step(&mut model, &grads)?;
        debug!("embed epoch {epoch}: loss {loss:.6}");
        losses.push(loss);
    }
    let table = model.embed(g)?;
    Ok(TrainedEmbedder { model, table, losses })
}
