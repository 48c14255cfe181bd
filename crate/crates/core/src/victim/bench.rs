use std::fmt::Write as _;
use std::time::Instant;

use log::warn;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::model::{Query, Sample, Task};
use super::train::{drop_in_accuracy, evaluate_batch, evaluate_target, TrainedVictim};
use crate::attack::Attacker;
use crate::distortion::distortion_between;
use crate::embed::EmbeddingModel;
use crate::error::{Error, Result};
use crate::graph::{EdgeEdit, Graph};
use crate::rng::{derive_indexed, derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub budgets: Vec<usize>,
    /// Number of test samples attacked per victim (fewer if the test split
    /// is smaller).
    pub target_count: usize,
    /// Restrict attacks to these nodes; ids without a test sample are
    /// skipped with a warning.
    pub targets: Option<Vec<usize>>,
    /// Neighborhood radius used for the recorded distortion values.
    pub k: usize,
    pub seed: u64,
    /// Worker threads per cell; results do not depend on it.
    pub threads: usize,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            budgets: vec![1, 2, 3, 4, 5],
            target_count: 20,
            targets: None,
            k: 2,
            seed: 0,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub query: Query,
    /// Node whose incident pairs were flipped.
    pub attack_node: usize,
    pub edits: Vec<EdgeEdit>,
    pub original_correct: bool,
    pub attacked_correct: bool,
    /// Jaccard distance of the k-hop neighborhood.
    pub neighborhood_distortion: f64,
    /// Embedding distortion under the supplied embedder, if any.
    pub embedding_distortion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub attacker: String,
    pub victim: String,
    pub task: Task,
    pub budget: usize,
    pub original_accuracy: f64,
    pub attacked_accuracy: f64,
    /// `None` when the original accuracy is zero.
    pub drop_in_accuracy: Option<f64>,
    pub targets: Vec<TargetRecord>,
}

/// Outcome of a benchmark run. Wall-clock timings live separately in
/// [`TimingRecord`]s so the report itself is reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub seed: u64,
    pub k: usize,
    pub budgets: Vec<usize>,
    pub cells: Vec<CellRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub attacker: String,
    pub victim: String,
    pub budget: usize,
    pub attack_node: usize,
    pub seconds: f64,
}

impl AttackReport {
    pub fn empty(spec: &BenchmarkSpec) -> Self {
        Self {
            seed: spec.seed,
            k: spec.k,
            budgets: spec.budgets.clone(),
            cells: Vec::new(),
        }
    }

    pub fn cell(&self, attacker: &str, victim: &str, budget: usize) -> Option<&CellRecord> {
        self.cells
            .iter()
            .find(|c| c.attacker == attacker && c.victim == victim && c.budget == budget)
    }

    /// DA% against budget for one attacker/victim pair.
    pub fn curve(&self, attacker: &str, victim: &str) -> Vec<(usize, Option<f64>)> {
        self.cells
            .iter()
            .filter(|c| c.attacker == attacker && c.victim == victim)
            .map(|c| (c.budget, c.drop_in_accuracy))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::input(format!("report serialization: {e}")))
    }

    /// `attacker,victim,task,budget,original,attacked,da` rows.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("attacker,victim,task,budget,original_accuracy,attacked_accuracy,drop_in_accuracy\n");
        for c in &self.cells {
            let da = c.drop_in_accuracy.map_or(String::new(), |d| d.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.attacker, c.victim, c.task, c.budget, c.original_accuracy, c.attacked_accuracy, da
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutcome {
    pub report: AttackReport,
    pub timings: Vec<TimingRecord>,
}

/// The node attacked for a sample: the node itself, or a seeded random
/// end-node of a pair.
pub fn attack_node(query: &Query, seed: u64) -> usize {
    match *query {
        Query::Node(v) => v,
        Query::Pair(u, v) => {
            let key = ((u.min(v) as u64) << 32) ^ u.max(v) as u64;
            if derive_indexed(derive_seed(seed, "pair-end"), key) & 1 == 0 {
                u
            } else {
                v
            }
        }
    }
}

fn select_targets(victim: &TrainedVictim, spec: &BenchmarkSpec) -> Vec<Sample> {
    let test = &victim.data.test;
    let pool: Vec<Sample> = match &spec.targets {
        Some(ids) => {
            let mut out = Vec::new();
            for &id in ids {
                let hits: Vec<Sample> = test.iter().filter(|s| attack_node(&s.query, spec.seed) == id).copied().collect();
                if hits.is_empty() {
                    warn!("target {id} has no test sample; skipped");
                }
                out.extend(hits);
            }
            out
        }
        None => test.clone(),
    };
    if pool.len() <= spec.target_count {
        return pool;
    }
    let mut rng = seeded(derive_seed(spec.seed, "bench-targets"));
    let mut idx = index::sample(&mut rng, pool.len(), spec.target_count).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i]).collect()
}

/// Attacks every selected target of every victim with every attacker at
/// every budget. Each target is attacked on a fresh copy of the graph the
/// victim observes; victim parameters are never touched. One target sample
/// per victim is shared by all budgets and attackers.
pub fn run_benchmark(
    g: &Graph,
    attackers: &[&dyn Attacker],
    victims: &[(&str, &TrainedVictim)],
    spec: &BenchmarkSpec,
    embedder: Option<&EmbeddingModel>,
) -> Result<BenchmarkOutcome> {
    let mut report = AttackReport::empty(spec);
    let mut timings = Vec::new();
    for &(vname, victim) in victims {
        let base = victim.observed_graph(g);
        let targets = select_targets(victim, spec);
        if targets.is_empty() {
            warn!("victim {vname}: no targets to attack");
            continue;
        }
        let original = evaluate_batch(&victim.model, &base, &targets)?;
        let orig_acc = original.iter().filter(|&&c| c).count() as f64 / targets.len() as f64;
        for &attacker in attackers {
            for &budget in &spec.budgets {
                let rows = parallel_map(&targets, spec.threads, |s| {
                    attack_one(attacker, victim, &base, s, budget, spec, embedder)
                })?;
                let mut records = Vec::with_capacity(rows.len());
                for ((mut rec, secs), &orig) in rows.into_iter().zip(&original) {
                    rec.original_correct = orig;
                    timings.push(TimingRecord {
                        attacker: attacker.name(),
                        victim: vname.to_string(),
                        budget,
                        attack_node: rec.attack_node,
                        seconds: secs,
                    });
                    records.push(rec);
                }
                let att_acc = records.iter().filter(|r| r.attacked_correct).count() as f64 / records.len() as f64;
                report.cells.push(CellRecord {
                    attacker: attacker.name(),
                    victim: vname.to_string(),
                    task: victim.model.task,
                    budget,
                    original_accuracy: orig_acc,
                    attacked_accuracy: att_acc,
                    drop_in_accuracy: drop_in_accuracy(orig_acc, att_acc).ok(),
                    targets: records,
                });
            }
        }
    }
    Ok(BenchmarkOutcome { report, timings })
}

fn attack_one(
    attacker: &dyn Attacker,
    victim: &TrainedVictim,
    base: &Graph,
    sample: &Sample,
    budget: usize,
    spec: &BenchmarkSpec,
    embedder: Option<&EmbeddingModel>,
) -> Result<(TargetRecord, f64)> {
    let t = attack_node(&sample.query, spec.seed);
    let accessible = base.all_but(t);
    let start = Instant::now();
    let edits = attacker.attack(base, t, budget, &accessible)?;
    let secs = start.elapsed().as_secs_f64();
    let perturbed = base.apply_edits(&edits)?;
    let d = base.graph_distance(&perturbed)?;
    if d > budget {
        return Err(Error::Contract(format!(
            "{} used {d} flips on target {t} with budget {budget}",
            attacker.name()
        )));
    }
    let embedding_distortion = match embedder {
        Some(m) => Some(distortion_between(m, base, &perturbed, t, spec.k)?.value),
        None => None,
    };
    Ok((
        TargetRecord {
            query: sample.query,
            attack_node: t,
            neighborhood_distortion: base.neighborhood_distortion(&perturbed, t, spec.k)?,
            attacked_correct: evaluate_target(&victim.model, &perturbed, sample)?,
            original_correct: false,
            edits,
            embedding_distortion,
        },
        secs,
    ))
}

/// Order-preserving map over `items` on up to `threads` scoped workers.
pub(crate) fn parallel_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let f = &f;
    let parts: Vec<Result<Vec<R>>> = std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(f).collect::<Result<Vec<R>>>()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("benchmark worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(items.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}
