use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::model::{Query, Sample, Task};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{derive_seed, seeded, Rng};

/// Fractions of the task's sample pool assigned to each split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    /// Down-sample the majority class of every pair-task split.
    pub balance: bool,
    pub seed: u64,
}

impl SplitSpec {
    /// 10% train, 10% validation, the rest test.
    pub fn node_default(seed: u64) -> Self {
        Self {
            train: 0.1,
            val: 0.1,
            test: 0.8,
            balance: false,
            seed,
        }
    }

    /// 10% / 10% / 30% of the pair pool, class-balanced.
    pub fn pair_default(seed: u64) -> Self {
        Self {
            train: 0.1,
            val: 0.1,
            test: 0.3,
            balance: true,
            seed,
        }
    }

    pub fn for_task(task: Task, seed: u64) -> Self {
        if task.is_pairwise() {
            Self::pair_default(seed)
        } else {
            Self::node_default(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fr = [self.train, self.val, self.test];
        if fr.iter().any(|f| !(0.0..=1.0).contains(f)) || fr.iter().sum::<f64>() > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "split fractions {:?} must lie in [0, 1] and sum to at most 1",
                fr
            )));
        }
        Ok(())
    }
}

/// Supervision for one task, plus the edges hidden from message passing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskData {
    pub task: Task,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
    /// Positive link-prediction pairs outside the training split; they are
    /// removed from the graph the victim sees.
    pub held_out: Vec<(usize, usize)>,
}

impl TaskData {
    /// The graph seen by the victim during training and evaluation.
    pub fn observed_graph(&self, g: &Graph) -> Graph {
        g.without_pairs(&self.held_out)
    }
}

/// Candidate pairs per node drawn for pairwise classification.
const PNC_PAIRS_PER_NODE: usize = 4;

pub fn build_task_data(g: &Graph, task: Task, split: &SplitSpec) -> Result<TaskData> {
    split.validate()?;
    let mut rng = seeded(derive_seed(split.seed, "victim-split"));
    let pool = match task {
        Task::Nc => {
            let labels = g
                .labels()
                .ok_or_else(|| Error::input("node classification needs labels"))?;
            labels
                .iter()
                .enumerate()
                .map(|(v, &label)| Sample {
                    query: Query::Node(v),
                    label,
                })
                .collect()
        }
        Task::Lp => link_pool(g, &mut rng),
        Task::Pnc => {
            let labels = g
                .labels()
                .ok_or_else(|| Error::input("pairwise node classification needs labels"))?;
            let target = PNC_PAIRS_PER_NODE * g.node_count();
            random_pairs(g.node_count(), target, &mut rng, |_, _| true)
                .into_iter()
                .map(|(u, v)| Sample {
                    query: Query::Pair(u, v),
                    label: usize::from(labels[u] == labels[v]),
                })
                .collect()
        }
    };
    let mut pool: Vec<Sample> = pool;
    pool.shuffle(&mut rng);
    let n = pool.len();
    let n_train = (split.train * n as f64).floor() as usize;
    let n_val = (split.val * n as f64).floor() as usize;
    let n_test = ((split.test * n as f64).floor() as usize).min(n - n_train - n_val);
    let mut rest = pool.into_iter();
    let mut take = |k: usize| -> Vec<Sample> { rest.by_ref().take(k).collect() };
    let (mut train, mut val, mut test) = (take(n_train), take(n_val), take(n_test));
    if split.balance && task.is_pairwise() {
        for part in [&mut train, &mut val, &mut test] {
            balance_binary(part, &mut rng);
        }
    }
    let held_out = if task == Task::Lp {
        // Only evaluation positives are hidden; edges in no split stay visible.
        let eval_pos: BTreeSet<(usize, usize)> = val.iter().chain(&test).filter(|s| s.label == 1).map(|s| pair(s.query)).collect();
        eval_pos.into_iter().collect()
    } else {
        Vec::new()
    };
    Ok(TaskData {
        task,
        train,
        val,
        test,
        held_out,
    })
}

fn pair(q: Query) -> (usize, usize) {
    match q {
        Query::Pair(u, v) => (u.min(v), u.max(v)),
        Query::Node(v) => (v, v),
    }
}

/// Every edge as a positive plus as many random non-edges as negatives.
fn link_pool(g: &Graph, rng: &mut Rng) -> Vec<Sample> {
    let mut out: Vec<Sample> = g
        .edges()
        .into_iter()
        .map(|(u, v)| Sample {
            query: Query::Pair(u, v),
            label: 1,
        })
        .collect();
    let negatives = random_pairs(g.node_count(), g.edge_count(), rng, |u, v| !g.has_edge(u, v));
    out.extend(negatives.into_iter().map(|(u, v)| Sample {
        query: Query::Pair(u, v),
        label: 0,
    }));
    out
}

/// Up to `count` distinct unordered pairs `u < v` accepted by `keep`, in
/// ascending order.
fn random_pairs(n: usize, count: usize, rng: &mut Rng, keep: impl Fn(usize, usize) -> bool) -> Vec<(usize, usize)> {
    let total = n * n.saturating_sub(1) / 2;
    let mut chosen = BTreeSet::new();
    if total == 0 {
        return Vec::new();
    }
    if count * 2 >= total {
        // Dense request: enumerate and shuffle.
        let mut all: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| keep(u, v))
            .collect();
        all.shuffle(rng);
        all.truncate(count);
        all.sort_unstable();
        return all;
    }
    let mut attempts = 0usize;
    while chosen.len() < count && attempts < 100 * count + 100 {
        attempts += 1;
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v {
            continue;
        }
        let p = (u.min(v), u.max(v));
        if keep(p.0, p.1) {
            chosen.insert(p);
        }
    }
    chosen.into_iter().collect()
}

/// Randomly drops majority-class samples until both classes are equal.
fn balance_binary(part: &mut Vec<Sample>, rng: &mut Rng) {
    let pos = part.iter().filter(|s| s.label == 1).count();
    let neg = part.len() - pos;
    let (major, excess) = if pos > neg { (1, pos - neg) } else { (0, neg - pos) };
    if excess == 0 {
        return;
    }
    let idx: Vec<usize> = part.iter().enumerate().filter(|(_, s)| s.label == major).map(|(i, _)| i).collect();
    let drop: BTreeSet<usize> = idx.choose_multiple(rng, excess).copied().collect();
    let mut i = 0;
    part.retain(|_| {
        let keep = !drop.contains(&i);
        i += 1;
        keep
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbm::{generate, SbmSpec};

    fn sbm() -> Graph {
        generate(&SbmSpec::two_blocks(60, 0.3, 0.05), 2).unwrap()
    }

    fn disjoint(d: &TaskData) -> bool {
        let mut seen = BTreeSet::new();
        d.train.iter().chain(&d.val).chain(&d.test).all(|s| seen.insert(s.query))
    }

    #[test]
    fn node_split_sizes() {
        let d = build_task_data(&sbm(), Task::Nc, &SplitSpec::node_default(1)).unwrap();
        assert_eq!((d.train.len(), d.val.len(), d.test.len()), (6, 6, 48));
        assert!(disjoint(&d));
        assert!(d.held_out.is_empty());
    }

    #[test]
    fn pair_splits_are_balanced() {
        let g = sbm();
        for task in [Task::Lp, Task::Pnc] {
            let d = build_task_data(&g, task, &SplitSpec::pair_default(3)).unwrap();
            assert!(disjoint(&d));
            for part in [&d.train, &d.val, &d.test] {
                let pos = part.iter().filter(|s| s.label == 1).count();
                assert_eq!(2 * pos, part.len(), "{task}");
            }
            assert!(!d.test.is_empty());
        }
    }

    #[test]
    fn link_labels_and_holdout() {
        let g = sbm();
        let d = build_task_data(&g, Task::Lp, &SplitSpec::pair_default(4)).unwrap();
        for s in d.train.iter().chain(&d.test) {
            let (u, v) = pair(s.query);
            assert_eq!(g.has_edge(u, v), s.label == 1);
        }
        let obs = d.observed_graph(&g);
        for s in d.test.iter().filter(|s| s.label == 1) {
            let (u, v) = pair(s.query);
            assert!(!obs.has_edge(u, v));
        }
        for s in d.train.iter().filter(|s| s.label == 1) {
            let (u, v) = pair(s.query);
            assert!(obs.has_edge(u, v));
        }
    }

    #[test]
    fn missing_labels_and_bad_fractions() {
        let g = Graph::structural(5, &[(0, 1)]).unwrap();
        assert!(build_task_data(&g, Task::Nc, &SplitSpec::node_default(1)).is_err());
        assert!(build_task_data(&g, Task::Pnc, &SplitSpec::pair_default(1)).is_err());
        let bad = SplitSpec {
            train: 0.6,
            val: 0.6,
            ..SplitSpec::node_default(1)
        };
        assert!(build_task_data(&sbm(), Task::Nc, &bad).is_err());
    }

    #[test]
    fn same_seed_same_split() {
        let g = sbm();
        let a = build_task_data(&g, Task::Pnc, &SplitSpec::pair_default(9)).unwrap();
        let b = build_task_data(&g, Task::Pnc, &SplitSpec::pair_default(9)).unwrap();
        assert_eq!(a, b);
    }
}
