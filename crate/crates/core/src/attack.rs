//! A common interface over every attacker, so the benchmark can treat the
//! learned attack and the baselines alike.

use crate::dqn::{infer_attack, DqnAttacker};
use crate::embed::EmbeddingModel;
use crate::error::Result;
use crate::graph::{EdgeEdit, Graph, NodeSet};
use crate::oracle::{degree_attack, greedy_attack, random_attack, GreedyEmbedding};

pub trait Attacker: Send + Sync {
    fn name(&self) -> String;

    /// At most `budget` flips incident to `t`, towards nodes in `accessible`.
    fn attack(&self, g: &Graph, t: usize, budget: usize, accessible: &NodeSet) -> Result<Vec<EdgeEdit>>;
}

/// Never edits anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoOp;

impl Attacker for NoOp {
    fn name(&self) -> String {
        "noop".into()
    }

    fn attack(&self, g: &Graph, t: usize, _budget: usize, _accessible: &NodeSet) -> Result<Vec<EdgeEdit>> {
        g.check_node(t)?;
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RandomFlips {
    pub seed: u64,
}

impl Attacker for RandomFlips {
    fn name(&self) -> String {
        "random".into()
    }

    fn attack(&self, g: &Graph, t: usize, budget: usize, accessible: &NodeSet) -> Result<Vec<EdgeEdit>> {
        random_attack(g, t, budget, accessible, self.seed)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HighDegree;

impl Attacker for HighDegree {
    fn name(&self) -> String {
        "degree".into()
    }

    fn attack(&self, g: &Graph, t: usize, budget: usize, accessible: &NodeSet) -> Result<Vec<EdgeEdit>> {
        degree_attack(g, t, budget, accessible)
    }
}

#[derive(Debug, Clone)]
pub struct Greedy {
    pub model: EmbeddingModel,
    pub k: usize,
    pub mode: GreedyEmbedding,
}

impl Attacker for Greedy {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn attack(&self, g: &Graph, t: usize, budget: usize, accessible: &NodeSet) -> Result<Vec<EdgeEdit>> {
        Ok(greedy_attack(g, t, budget, self.k, accessible, &self.model, &self.mode)?.edits)
    }
}

impl Attacker for DqnAttacker {
    fn name(&self) -> String {
        "dqn".into()
    }

    fn attack(&self, g: &Graph, t: usize, budget: usize, accessible: &NodeSet) -> Result<Vec<EdgeEdit>> {
        infer_attack(self, g, t, budget, accessible)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dqn::QNetParams;
    use crate::embed::Backend;
    use crate::rng::seeded;
    use crate::sbm::{generate, SbmSpec};

    #[test]
    fn every_attacker_respects_budget_and_target() {
        let g = generate(&SbmSpec::two_blocks(14, 0.4, 0.1), 3).unwrap();
        let attackers: Vec<Box<dyn Attacker>> = vec![
            Box::new(NoOp),
            Box::new(RandomFlips { seed: 1 }),
            Box::new(HighDegree),
            Box::new(Greedy {
                model: EmbeddingModel::new(Backend::Gin, 14, 2, 4, 1),
                k: 2,
                mode: GreedyEmbedding::Frozen,
            }),
            Box::new(DqnAttacker {
                qnet: QNetParams::new(g.feature_dim(), 2, 4, 4, &mut seeded(2)),
                k: 2,
                n_step: 2,
                gamma: 0.99,
            }),
        ];
        let t = 5;
        let acc = g.all_but(t);
        for a in &attackers {
            for b in [0, 1, 3] {
                let edits = a.attack(&g, t, b, &acc).unwrap();
                assert!(edits.len() <= b, "{}", a.name());
                assert!(edits.iter().all(|e| e.other(t).is_some()));
                let g2 = g.apply_edits(&edits).unwrap();
                assert!(g.graph_distance(&g2).unwrap() <= b);
            }
        }
    }
}
