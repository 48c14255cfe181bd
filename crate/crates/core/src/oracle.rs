//! Reference attackers: the set-cover hardness construction, an exhaustive
//! maximizer of graph-space distortion, a greedy maximizer of embedding
//! distortion, and the random and degree baselines.

use log::warn;
use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::distortion::embedding_distortion;
use crate::embed::{train_embedder, EmbedConfig, EmbeddingModel};
use crate::error::{Error, Result};
use crate::graph::{EdgeEdit, Graph, NodeSet};
use crate::rng::{derive_indexed, seeded, Rng};

/// A set-cover decision instance. Elements are `0..universe_size`; subsets
/// are kept sorted and de-duplicated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetCoverInstance {
    pub universe_size: usize,
    pub subsets: Vec<Vec<usize>>,
    pub budget: usize,
}

impl SetCoverInstance {
    pub fn new(universe_size: usize, mut subsets: Vec<Vec<usize>>, budget: usize) -> Result<Self> {
        for s in &mut subsets {
            s.sort_unstable();
            s.dedup();
            if s.last().is_some_and(|&e| e >= universe_size) {
                return Err(Error::input(format!("element outside universe of size {universe_size}")));
            }
        }
        let mut covered = vec![false; universe_size];
        subsets.iter().flatten().for_each(|&e| covered[e] = true);
        if let Some(e) = covered.iter().position(|c| !c) {
            return Err(Error::input(format!("element {e} appears in no subset")));
        }
        if budget > subsets.len() {
            return Err(Error::input(format!("budget {budget} exceeds {} subsets", subsets.len())));
        }
        Ok(Self {
            universe_size,
            subsets,
            budget,
        })
    }

    /// Random instance with every element covered at least once.
    pub fn random(universe_size: usize, subset_count: usize, budget: usize, rng: &mut Rng) -> Result<Self> {
        if subset_count == 0 {
            return Err(Error::input("need at least one subset"));
        }
        let mut subsets: Vec<Vec<usize>> = (0..subset_count)
            .map(|_| (0..universe_size).filter(|_| rng.gen_bool(0.35)).collect())
            .collect();
        for e in 0..universe_size {
            if !subsets.iter().any(|s| s.contains(&e)) {
                subsets[rng.gen_range(0..subset_count)].push(e);
            }
        }
        Self::new(universe_size, subsets, budget)
    }

    /// Smallest-index cover of at most `budget` subsets, by exhaustive search
    /// over index combinations in lexicographic order. Universes beyond 64
    /// elements are not supported.
    pub fn exhaustive_cover(&self) -> Option<Vec<usize>> {
        let full: u64 = if self.universe_size == 64 { u64::MAX } else { (1u64 << self.universe_size) - 1 };
        let masks: Vec<u64> = self
            .subsets
            .iter()
            .map(|s| s.iter().fold(0u64, |m, &e| m | (1 << e)))
            .collect();
        fn search(masks: &[u64], start: usize, left: usize, acc: u64, full: u64, chosen: &mut Vec<usize>) -> bool {
            if acc == full {
                return true;
            }
            if left == 0 {
                return false;
            }
            for i in start..masks.len() {
                chosen.push(i);
                if search(masks, i + 1, left - 1, acc | masks[i], full, chosen) {
                    return true;
                }
                chosen.pop();
            }
            false
        }
        let mut chosen = Vec::new();
        search(&masks, 0, self.budget, 0, full, &mut chosen).then_some(chosen)
    }
}

/// Attack instance produced by [`reduction_graph`].
#[derive(Debug, Clone)]
pub struct ReductionInstance {
    pub graph: Graph,
    pub target: usize,
    pub accessible: NodeSet,
    pub budget: usize,
}

impl ReductionInstance {
    /// Node id of subset `i`.
    pub fn subset_node(&self, i: usize) -> usize {
        i
    }

    /// Node id of element `j`.
    pub fn element_node(&self, j: usize) -> usize {
        self.accessible.len() + j
    }
}

/// Bipartite subset/element graph plus an isolated target. Subsets take ids
/// `0..m`, elements `m..m+n` and the target `m+n`; only subset nodes are
/// accessible.
pub fn reduction_graph(inst: &SetCoverInstance) -> Result<ReductionInstance> {
    let m = inst.subsets.len();
    let n = inst.universe_size;
    let edges: Vec<(usize, usize)> = inst
        .subsets
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.iter().map(move |&e| (i, m + e)))
        .collect();
    let graph = Graph::structural(m + n + 1, &edges)?;
    Ok(ReductionInstance {
        graph,
        target: m + n,
        accessible: NodeSet::from_sorted_unchecked((0..m).collect()),
        budget: inst.budget,
    })
}

pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

fn subsets_up_to(c: u64, budget: u64) -> u64 {
    let mut total: u64 = 0;
    let mut choose: u64 = 1;
    for i in 0..=budget.min(c) {
        total = total.saturating_add(choose);
        choose = choose.saturating_mul(c - i) / (i + 1);
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub edits: Vec<EdgeEdit>,
    pub value: f64,
    pub evaluated: u64,
}

/// Exact maximizer of the Jaccard neighborhood distortion over every set of at
/// most `budget` target-incident edits. Subsets are visited in lexicographic
/// order and only a strictly better value replaces the incumbent, so ties go
/// to the lexicographically smallest edit list.
pub fn brute_force_max_distortion(
    g: &Graph,
    t: usize,
    budget: usize,
    k: usize,
    accessible: &NodeSet,
    cap: u64,
) -> Result<BruteForceResult> {
    let base = g.k_hop_neighborhood(t, k)?;
    if budget == 0 {
        return Ok(BruteForceResult {
            edits: Vec::new(),
            value: 0.0,
            evaluated: 1,
        });
    }
    let candidates = g.candidate_edits(t, accessible)?;
    let total = subsets_up_to(candidates.len() as u64, budget as u64);
    if total > cap {
        return Err(Error::Size(format!(
            "{total} edit subsets exceed the cap of {cap}; shrink the accessible set or budget"
        )));
    }
    struct Search<'a> {
        base: &'a NodeSet,
        candidates: &'a [EdgeEdit],
        t: usize,
        k: usize,
        best: BruteForceResult,
        stack: Vec<EdgeEdit>,
    }
    impl Search<'_> {
        fn visit(&mut self, g: &mut Graph, start: usize, left: usize) -> Result<()> {
            let value = self.base.jaccard_distance(&g.k_hop_neighborhood(self.t, self.k)?);
            self.best.evaluated += 1;
            if value > self.best.value {
                self.best.value = value;
                self.best.edits = self.stack.clone();
            }
            if left == 0 {
                return Ok(());
            }
            for i in start..self.candidates.len() {
                let e = self.candidates[i];
                g.apply_edit_in_place(&e)?;
                self.stack.push(e);
                self.visit(g, i + 1, left - 1)?;
                self.stack.pop();
                g.apply_edit_in_place(&e.inverse())?;
            }
            Ok(())
        }
    }
    let mut search = Search {
        base: &base,
        candidates: &candidates,
        t,
        k,
        best: BruteForceResult {
            edits: Vec::new(),
            value: 0.0,
            evaluated: 0,
        },
        stack: Vec::new(),
    };
    let mut work = g.clone();
    search.visit(&mut work, 0, budget)?;
    Ok(search.best)
}

/// How the greedy attacker obtains embeddings of a candidate graph.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum GreedyEmbedding {
    /// Re-apply the trained embedder with frozen parameters.
    #[default]
    Frozen,
    /// Train a fresh embedder on every candidate graph (tiny graphs only).
    Retrain { config: EmbedConfig, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyOutcome {
    pub edits: Vec<EdgeEdit>,
    /// Cumulative distortion after each committed edit.
    pub scores: Vec<f64>,
}

/// Nodes other than `t` touched by `edits`.
pub(crate) fn touched(edits: &[EdgeEdit], t: usize) -> Vec<usize> {
    edits.iter().filter_map(|e| e.other(t)).collect()
}

/// Candidate edits on `g` that do not revisit a node already edited.
pub(crate) fn fresh_candidates(g: &Graph, t: usize, accessible: &NodeSet, used: &[usize]) -> Vec<EdgeEdit> {
    accessible
        .iter()
        .filter(|&v| v != t && !used.contains(&v))
        .map(|v| g.toggle_edit(t, v))
        .collect()
}

/// Distortion of `t` after applying `e` to `current`, measured against the
/// neighborhood `base` of the unattacked graph.
pub fn greedy_candidate_score(
    model: &EmbeddingModel,
    current: &Graph,
    base: &NodeSet,
    t: usize,
    k: usize,
    e: &EdgeEdit,
    mode: &GreedyEmbedding,
) -> Result<f64> {
    let next = current.apply_edit(e)?;
    let z = match mode {
        GreedyEmbedding::Frozen => model.embed(&next)?,
        GreedyEmbedding::Retrain { config, seed } => train_embedder(&next, config, *seed)?.table,
    };
    Ok(embedding_distortion(&z, t, base, &next.k_hop_neighborhood(t, k)?)?.value)
}

/// At every step, commits the candidate edit maximizing the cumulative
/// embedding distortion relative to the unattacked graph (ties: lowest node
/// id). Each node is edited at most once.
pub fn greedy_attack(
    g: &Graph,
    t: usize,
    budget: usize,
    k: usize,
    accessible: &NodeSet,
    model: &EmbeddingModel,
    mode: &GreedyEmbedding,
) -> Result<GreedyOutcome> {
    let base = g.k_hop_neighborhood(t, k)?;
    let mut current = g.clone();
    let mut out = GreedyOutcome {
        edits: Vec::new(),
        scores: Vec::new(),
    };
    for step in 0..budget {
        let cands = fresh_candidates(&current, t, accessible, &touched(&out.edits, t));
        if cands.is_empty() {
            if step == 0 {
                return Err(Error::NoActions(t));
            }
            warn!("greedy attack on {t}: candidates exhausted after {step} edits");
            break;
        }
        let mut best: Option<(EdgeEdit, f64)> = None;
        for e in cands {
            let s = greedy_candidate_score(model, &current, &base, t, k, &e, mode)?;
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((e, s));
            }
        }
        let (e, s) = best.expect("non-empty candidates");
        current.apply_edit_in_place(&e)?;
        out.edits.push(e);
        out.scores.push(s);
    }
    Ok(out)
}

fn truncated_budget(budget: usize, available: usize, what: &str) -> usize {
    if budget > available {
        warn!("{what}: budget {budget} exceeds {available} candidates; truncating");
        available
    } else {
        budget
    }
}

/// `budget` distinct candidate edits drawn uniformly without replacement.
pub fn random_attack(g: &Graph, t: usize, budget: usize, accessible: &NodeSet, seed: u64) -> Result<Vec<EdgeEdit>> {
    if budget == 0 {
        return Ok(Vec::new());
    }
    let cands = g.candidate_edits(t, accessible)?;
    let b = truncated_budget(budget, cands.len(), "random attack");
    let mut rng = seeded(derive_indexed(seed, t as u64));
    Ok(index::sample(&mut rng, cands.len(), b)
        .into_iter()
        .map(|i| cands[i])
        .collect())
}

/// Flips the pairs to the highest-degree candidates (ties: lowest id).
pub fn degree_attack(g: &Graph, t: usize, budget: usize, accessible: &NodeSet) -> Result<Vec<EdgeEdit>> {
    if budget == 0 {
        return Ok(Vec::new());
    }
    let mut cands = g.candidate_edits(t, accessible)?;
    let b = truncated_budget(budget, cands.len(), "degree attack");
    cands.sort_by_key(|e| {
        let v = e.other(t).expect("incident on target");
        (std::cmp::Reverse(g.degree(v)), v)
    });
    cands.truncate(b);
    Ok(cands)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::Backend;
    use crate::graph::tests::random_graph;

    fn all_edges_subsets(cands: &[EdgeEdit], budget: usize) -> Vec<Vec<EdgeEdit>> {
        let mut out = vec![Vec::new()];
        for mask in 1u32..(1 << cands.len()) {
            if mask.count_ones() as usize <= budget {
                out.push((0..cands.len()).filter(|i| mask >> i & 1 == 1).map(|i| cands[i]).collect());
            }
        }
        out
    }

    #[test]
    fn paper_style_reduction_example() {
        let inst = SetCoverInstance::new(2, vec![vec![0], vec![1], vec![0, 1]], 1).unwrap();
        let red = reduction_graph(&inst).unwrap();
        assert_eq!(red.graph.node_count(), 6);
        let g2 = red.graph.apply_edit(&EdgeEdit::add(red.target, red.subset_node(2))).unwrap();
        let n2 = g2.k_hop_neighborhood(red.target, 2).unwrap().without(red.target);
        assert_eq!(n2.len(), inst.budget + inst.universe_size);
        let bf = brute_force_max_distortion(&red.graph, red.target, 1, 2, &red.accessible, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(bf.edits, vec![EdgeEdit::add(5, 2)]);
        assert_eq!(inst.exhaustive_cover(), Some(vec![2]));
    }

    #[test]
    fn brute_force_matches_full_enumeration() {
        for seed in 0..5 {
            let g = random_graph(10, 0.25, seed);
            let acc = g.all_but(0);
            let bf = brute_force_max_distortion(&g, 0, 2, 2, &acc, DEFAULT_ENUMERATION_CAP).unwrap();
            let cands = g.candidate_edits(0, &acc).unwrap();
            let subsets = all_edges_subsets(&cands, 2);
            assert_eq!(subsets.len(), 1 + 9 + 36);
            assert_eq!(bf.evaluated, 46);
            let best = subsets
                .iter()
                .map(|s| g.neighborhood_distortion(&g.apply_edits(s).unwrap(), 0, 2).unwrap())
                .fold(f64::MIN, f64::max);
            assert_eq!(bf.value, best);
            let replay = g.neighborhood_distortion(&g.apply_edits(&bf.edits).unwrap(), 0, 2).unwrap();
            assert_eq!(replay, bf.value);
        }
    }

    #[test]
    fn brute_force_budget_zero_and_cap() {
        let g = random_graph(30, 0.1, 1);
        let r = brute_force_max_distortion(&g, 0, 0, 2, &g.all_but(0), 10).unwrap();
        assert!(r.edits.is_empty() && r.value == 0.0);
        assert!(matches!(
            brute_force_max_distortion(&g, 0, 8, 2, &g.all_but(0), DEFAULT_ENUMERATION_CAP),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn unique_cover_is_recovered_exactly() {
        // Only subsets 1 and 3 together cover {0,1,2,3}.
        let inst = SetCoverInstance::new(4, vec![vec![0], vec![0, 1], vec![2], vec![2, 3], vec![1]], 2).unwrap();
        let red = reduction_graph(&inst).unwrap();
        let bf = brute_force_max_distortion(&red.graph, red.target, 2, 2, &red.accessible, DEFAULT_ENUMERATION_CAP).unwrap();
        let mut chosen: Vec<usize> = bf.edits.iter().map(|e| e.other(red.target).unwrap()).collect();
        chosen.sort_unstable();
        assert_eq!(chosen, vec![1, 3]);
    }

    #[test]
    fn degree_attack_prefers_hubs() {
        // Star on 1..=5 centered at 1; target 0 isolated.
        let g = Graph::structural(7, &[(1, 2), (1, 3), (1, 4), (1, 5), (5, 6), (2, 3)]).unwrap();
        let acc = g.all_but(0);
        let edits = degree_attack(&g, 0, 3, &acc).unwrap();
        assert_eq!(edits[0], EdgeEdit::add(0, 1));
        let mut oracle: Vec<usize> = (1..7).collect();
        oracle.sort_by_key(|&v| (std::cmp::Reverse(g.degree(v)), v));
        let got: Vec<usize> = edits.iter().map(|e| e.other(0).unwrap()).collect();
        assert_eq!(got, oracle[..3]);
        assert_eq!(degree_attack(&g, 0, 50, &acc).unwrap().len(), 6);
    }

    #[test]
    fn random_attack_is_seeded_and_distinct() {
        let g = random_graph(15, 0.2, 3);
        let acc = g.all_but(4);
        let a = random_attack(&g, 4, 5, &acc, 9).unwrap();
        assert_eq!(a, random_attack(&g, 4, 5, &acc, 9).unwrap());
        let mut nodes: Vec<_> = a.iter().map(|e| e.other(4).unwrap()).collect();
        nodes.sort_unstable();
        nodes.dedup();
        assert_eq!(nodes.len(), 5);
        g.apply_edits(&a).unwrap();
    }

    fn naive_greedy(g: &Graph, model: &EmbeddingModel, t: usize, budget: usize) -> Vec<EdgeEdit> {
        let base = g.k_hop_neighborhood(t, 2).unwrap();
        let mut chosen: Vec<EdgeEdit> = Vec::new();
        for _ in 0..budget {
            let cur = g.apply_edits(&chosen).unwrap();
            let mut best = (f64::NEG_INFINITY, None);
            for v in 0..g.node_count() {
                if v == t || chosen.iter().any(|e| e.other(t) == Some(v)) {
                    continue;
                }
                let e = cur.toggle_edit(t, v);
                let next = cur.apply_edit(&e).unwrap();
                let z = model.embed(&next).unwrap();
                let nb = next.k_hop_neighborhood(t, 2).unwrap();
                let d = crate::distortion::embedding_distortion(&z, t, &base, &nb).unwrap().value;
                if d > best.0 {
                    best = (d, Some(e));
                }
            }
            chosen.push(best.1.unwrap());
        }
        chosen
    }

    #[test]
    fn greedy_matches_two_level_oracle_and_dominates_random() {
        let g = random_graph(12, 0.25, 8);
        let model = EmbeddingModel::new(Backend::Gin, 12, 2, 8, 2);
        let acc = g.all_but(3);
        let out = greedy_attack(&g, 3, 2, 2, &acc, &model, &GreedyEmbedding::Frozen).unwrap();
        assert_eq!(out.edits, naive_greedy(&g, &model, 3, 2));
        let base = g.k_hop_neighborhood(3, 2).unwrap();
        for e in g.candidate_edits(3, &acc).unwrap() {
            let s = greedy_candidate_score(&model, &g, &base, 3, 2, &e, &GreedyEmbedding::Frozen).unwrap();
            assert!(out.scores[0] >= s);
        }
        let one = greedy_attack(&g, 3, 1, 2, &acc, &model, &GreedyEmbedding::Frozen).unwrap();
        assert_eq!(one.edits[..], out.edits[..1]);
    }

    #[test]
    fn greedy_retrain_mode_runs_on_tiny_graphs() {
        let g = random_graph(8, 0.3, 2);
        let model = EmbeddingModel::new(Backend::Gin, 8, 2, 4, 2);
        let mode = GreedyEmbedding::Retrain {
            config: EmbedConfig {
                epochs: 2,
                walk: crate::embed::WalkConfig {
                    walk_length: 5,
                    context_size: 3,
                    walks_per_node: 1,
                    ..Default::default()
                },
                ..EmbedConfig::default()
            },
            seed: 1,
        };
        let out = greedy_attack(&g, 0, 2, 2, &g.all_but(0), &model, &mode).unwrap();
        assert_eq!(out.edits.len(), 2);
    }

    #[test]
    fn set_cover_instance_validation() {
        assert!(SetCoverInstance::new(2, vec![vec![0]], 1).is_err());
        assert!(SetCoverInstance::new(2, vec![vec![0, 1]], 2).is_err());
        assert!(SetCoverInstance::new(2, vec![vec![0, 5]], 1).is_err());
        let mut rng = seeded(1);
        for _ in 0..20 {
            let inst = SetCoverInstance::random(5, 4, 2, &mut rng).unwrap();
            if let Some(c) = inst.exhaustive_cover() {
                let mut cov: Vec<usize> = c.iter().flat_map(|&i| inst.subsets[i].clone()).collect();
                cov.sort_unstable();
                cov.dedup();
                assert_eq!(cov.len(), 5);
            }
        }
    }
}
