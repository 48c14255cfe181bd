use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::train::argmax;
use super::DqnAttacker;
use crate::error::{Error, Result};
use crate::graph::{EdgeEdit, Graph, NodeSet};
use crate::oracle::{fresh_candidates, touched};

/// `budget` greedy passes through the Q-network. Each pass scores every
/// candidate on the current graph, commits the best (ties: lowest node id)
/// and refreshes the node embeddings. No pair is flipped twice.
pub fn infer_attack(attacker: &DqnAttacker, g: &Graph, t: usize, budget: usize, accessible: &NodeSet) -> Result<Vec<EdgeEdit>> {
    g.check_node(t)?;
    let mut current = g.clone();
    let mut edits = Vec::with_capacity(budget);
    for step in 0..budget {
        let cands = fresh_candidates(&current, t, accessible, &touched(&edits, t));
        if cands.is_empty() {
            if step == 0 {
                return Err(Error::NoActions(t));
            }
            log::warn!("attack on {t}: candidates exhausted after {step} edits");
            break;
        }
        let q = attacker.qnet.score_edits(&current, t, attacker.k, &cands)?;
        let e = cands[argmax(&q)];
        current.apply_edit_in_place(&e)?;
        edits.push(e);
    }
    Ok(edits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub target: usize,
    pub budget: usize,
    pub seconds: f64,
}

/// Wall-clock time of [`infer_attack`] for every `(target, budget)` pair,
/// with full access for each target.
pub fn inference_timer(attacker: &DqnAttacker, g: &Graph, targets: &[usize], budgets: &[usize]) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::with_capacity(targets.len() * budgets.len());
    for &t in targets {
        let acc = g.all_but(t);
        for &b in budgets {
            let start = Instant::now();
            infer_attack(attacker, g, t, b, &acc)?;
            rows.push(TimingRow {
                target: t,
                budget: b,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::super::QNetParams;
    use super::*;
    use crate::rng::seeded;
    use crate::sbm::{generate, SbmSpec};

    fn attacker(seed: u64, feature_dim: usize) -> DqnAttacker {
        DqnAttacker {
            qnet: QNetParams::new(feature_dim, 2, 6, 5, &mut seeded(seed)),
            k: 2,
            n_step: 2,
            gamma: 0.99,
        }
    }

    fn fixture() -> Graph {
        generate(&SbmSpec::two_blocks(12, 0.4, 0.1), 5).unwrap()
    }

    #[test]
    fn budget_zero_and_prefix_consistency() {
        let g = fixture();
        let a = attacker(1, g.feature_dim());
        let acc = g.all_but(0);
        assert!(infer_attack(&a, &g, 0, 0, &acc).unwrap().is_empty());
        let one = infer_attack(&a, &g, 0, 1, &acc).unwrap();
        let two = infer_attack(&a, &g, 0, 2, &acc).unwrap();
        assert_eq!(one[0], two[0]);
        g.apply_edits(&two).unwrap();
        assert_eq!(g.graph_distance(&g.apply_edits(&two).unwrap()).unwrap(), 2);
    }

    #[test]
    fn matches_exhaustive_per_step_oracle() {
        let g = fixture();
        let a = attacker(3, g.feature_dim());
        let t = 4;
        let got = infer_attack(&a, &g, t, 3, &g.all_but(t)).unwrap();
        let mut cur = g.clone();
        let mut used = vec![t];
        for &e in &got {
            let emb = a.qnet.node_embeddings(&cur).unwrap();
            let s = super::super::state_repr(emb.mu(), &cur.k_hop_neighborhood(t, 2).unwrap());
            let mut best = (f64::NEG_INFINITY, usize::MAX);
            for v in 0..cur.node_count() {
                if used.contains(&v) {
                    continue;
                }
                let sign = if cur.has_edge(t, v) { -1.0 } else { 1.0 };
                let q = a.qnet.q_forward(&s, &super::super::action_repr(emb.mu(), v, t, sign)).unwrap();
                if q > best.0 {
                    best = (q, v);
                }
            }
            assert_eq!(e.other(t), Some(best.1));
            used.push(best.1);
            cur = cur.apply_edit(&e).unwrap();
        }
    }

    #[test]
    fn no_candidates_is_an_error() {
        let g = Graph::structural(1, &[]).unwrap();
        let a = attacker(1, 1);
        assert!(matches!(infer_attack(&a, &g, 0, 1, &g.all_but(0)), Err(Error::NoActions(0))));
    }

    #[test]
    fn timer_reports_each_cell() {
        let g = fixture();
        let a = attacker(1, g.feature_dim());
        let rows = inference_timer(&a, &g, &[0, 1], &[0, 2]).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.seconds >= 0.0));
    }
}
