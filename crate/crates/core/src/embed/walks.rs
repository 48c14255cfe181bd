//! Second-order (node2vec-style) random walks, skip-gram context pairs and
//! non-neighbor negative sampling.

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeSet};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Number of nodes in each walk, start included.
    pub walk_length: usize,
    /// Window width: a node pairs with the next `context_size - 1` nodes.
    pub context_size: usize,
    pub walks_per_node: usize,
    pub return_p: f64,
    pub inout_q: f64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            walk_length: 20,
            context_size: 10,
            walks_per_node: 10,
            return_p: 1.0,
            inout_q: 1.0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walk_length == 0 || self.context_size == 0 || self.walks_per_node == 0 {
            return Err(Error::Config("walk parameters must be positive".into()));
        }
        if self.context_size > self.walk_length {
            return Err(Error::Config(format!(
                "context_size {} exceeds walk_length {}",
                self.context_size, self.walk_length
            )));
        }
        if !(self.return_p > 0.0 && self.inout_q > 0.0) {
            return Err(Error::Config("return_p and inout_q must be positive".into()));
        }
        Ok(())
    }
}

/// One walk from `start`. Walks stop early at nodes without neighbors, so an
/// isolated start yields `[start]`.
pub fn random_walk(g: &Graph, start: usize, cfg: &WalkConfig, rng: &mut Rng) -> Vec<usize> {
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start);
    let uniform = cfg.return_p == 1.0 && cfg.inout_q == 1.0;
    while walk.len() < cfg.walk_length {
        let cur = *walk.last().expect("non-empty");
        let nbrs = g.neighbors(cur);
        if nbrs.is_empty() {
            break;
        }
        let next = match (uniform, walk.len() >= 2) {
            (false, true) => {
                let prev = walk[walk.len() - 2];
                let weights: Vec<f64> = nbrs
                    .iter()
                    .map(|&x| {
                        if x == prev {
                            1.0 / cfg.return_p
                        } else if g.has_edge(prev, x) {
                            1.0
                        } else {
                            1.0 / cfg.inout_q
                        }
                    })
                    .collect();
                let total: f64 = weights.iter().sum();
                let mut r = rng.gen::<f64>() * total;
                let mut pick = nbrs[nbrs.len() - 1];
                for (&x, w) in nbrs.iter().zip(&weights) {
                    if r < *w {
                        pick = x;
                        break;
                    }
                    r -= w;
                }
                pick
            }
            _ => nbrs[rng.gen_range(0..nbrs.len())],
        };
        walk.push(next);
    }
    walk
}

/// `walks_per_node` walks from every node, rounds outermost.
pub fn sample_walks(g: &Graph, cfg: &WalkConfig, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut walks = Vec::with_capacity(cfg.walks_per_node * g.node_count());
    for _ in 0..cfg.walks_per_node {
        for v in 0..g.node_count() {
            walks.push(random_walk(g, v, cfg, rng));
        }
    }
    walks
}

/// Skip-gram `(center, context)` pairs within the window.
pub fn context_pairs(walks: &[Vec<usize>], context_size: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for w in walks {
        for i in 0..w.len() {
            for j in i + 1..w.len().min(i + context_size) {
                pairs.push((w[i], w[j]));
            }
        }
    }
    pairs
}

pub fn sample_positive_pairs(g: &Graph, cfg: &WalkConfig, rng: &mut Rng) -> Result<Vec<(usize, usize)>> {
    cfg.validate()?;
    Ok(context_pairs(&sample_walks(g, cfg, rng), cfg.context_size))
}

fn non_neighbors(g: &Graph, v: usize) -> Vec<usize> {
    (0..g.node_count()).filter(|&u| u != v && !g.has_edge(v, u)).collect()
}

/// `count` distinct nodes drawn uniformly from `V \ (N(v) ∪ {v})`.
pub fn negative_sample(g: &Graph, v: usize, count: usize, rng: &mut Rng) -> Result<NodeSet> {
    g.check_node(v)?;
    let eligible = non_neighbors(g, v);
    if eligible.len() < count {
        return Err(Error::Sampling(format!(
            "node {v} has {} non-neighbors, {count} requested",
            eligible.len()
        )));
    }
    Ok(index::sample(rng, eligible.len(), count)
        .into_iter()
        .map(|i| eligible[i])
        .collect())
}

/// One uniform non-neighbor of `v`, or `None` if `v` is adjacent to every
/// other node.
pub fn one_negative(g: &Graph, v: usize, rng: &mut Rng) -> Option<usize> {
    let n = g.node_count();
    if g.degree(v) + 1 >= n {
        return None;
    }
    // Rejection sampling is uniform over the eligible set; fall back to
    // enumeration for very dense rows.
    for _ in 0..32 {
        let u = rng.gen_range(0..n);
        if u != v && !g.has_edge(v, u) {
            return Some(u);
        }
    }
    let eligible = non_neighbors(g, v);
    Some(eligible[rng.gen_range(0..eligible.len())])
}

/// One negative per positive pair, drawn for the pair's center node. Pairs
/// whose center has no non-neighbors contribute no negative.
pub fn negatives_for(g: &Graph, positives: &[(usize, usize)], rng: &mut Rng) -> Vec<(usize, usize)> {
    positives
        .iter()
        .filter_map(|&(u, _)| one_negative(g, u, rng).map(|w| (u, w)))
        .collect()
}
