//! Subcommand implementations behind the `nbattack` binary.
//!
//! Each stage reads its prerequisites from and writes its artifacts to one
//! output directory, together with the effective configuration it ran with.
//! All randomness derives from the root seed through a per-stage label, so
//! a stage rerun with the same configuration rewrites identical bytes.
//! Wall-clock measurements go to separate `*timings*` files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    candidate_embedding_distortions, candidate_neighborhood_distortions, correlation_study, StudyContext, StudyRow,
};
use crate::attack::{Attacker, Greedy, HighDegree, NoOp, RandomFlips};
use crate::config::{DatasetSource, RunConfig, StudyDistortion};
use crate::distortion::distortion_between;
use crate::dqn::{infer_attack, train_dqn, DqnAttacker, DqnTraining};
use crate::embed::{train_embedder, EmbeddingModel, TrainedEmbedder};
use crate::error::{Error, Result};
use crate::graph::{EdgeEdit, Graph};
use crate::io::{load_graph, save_graph};
use crate::oracle::{greedy_attack, GreedyEmbedding};
use crate::rng::{derive_seed, seeded};
use crate::sbm::generate;
use crate::victim::{parallel_map, run_benchmark, train_victim, BenchmarkOutcome, BenchmarkSpec, SplitSpec, TrainedVictim};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "NBATTACK_OUT_DIR";

pub const EMBEDDER_FILE: &str = "embedder.bin";
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";
pub const ATTACKER_FILE: &str = "attacker.bin";

/// The output directory: `$NBATTACK_OUT_DIR` if set and non-empty, else the
/// configured one.
pub fn resolve_out_dir(cfg: &RunConfig) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(&cfg.out_dir),
    }
}

/// Seed of one pipeline stage.
pub fn stage_seed(cfg: &RunConfig, stage: &str) -> u64 {
    derive_seed(cfg.seed, stage)
}

fn threads(cfg: &RunConfig) -> usize {
    if cfg.threads == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        cfg.threads
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::input(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

fn write_effective_config(cfg: &RunConfig, out: &Path, stage: &str) -> Result<()> {
    write_text(&out.join(format!("{stage}.config.txt")), &cfg.to_text())
}

fn series_csv(header: &str, values: &[f64]) -> String {
    let mut s = format!("{header}\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(s, "{i},{v}");
    }
    s
}

/// The graph described by the configuration: a seeded SBM sample or the
/// dataset files.
pub fn load_input_graph(cfg: &RunConfig) -> Result<Graph> {
    match cfg.dataset {
        DatasetSource::Sbm => generate(&cfg.sbm_spec(), stage_seed(cfg, "sbm")),
        DatasetSource::Files => {
            if cfg.dataset_edges.is_empty() {
                return Err(Error::Config("dataset = files requires dataset_edges".into()));
            }
            let opt = |s: &str| (!s.is_empty()).then(|| PathBuf::from(s));
            let features = opt(&cfg.dataset_features);
            let labels = opt(&cfg.dataset_labels);
            load_graph(Path::new(&cfg.dataset_edges), features.as_deref(), labels.as_deref())
        }
    }
}

fn prepare(cfg: &RunConfig, out: &Path, stage: &str) -> Result<Graph> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_effective_config(cfg, out, stage)?;
    load_input_graph(cfg)
}

pub fn load_embedder(out: &Path) -> Result<EmbeddingModel> {
    EmbeddingModel::load(&out.join(EMBEDDER_FILE))
}

pub fn load_attacker(out: &Path) -> Result<DqnAttacker> {
    DqnAttacker::load(&out.join(ATTACKER_FILE))
}

/// Samples `count` distinct node ids (sorted) unless explicit targets are
/// configured; explicit ids are validated against `g`.
fn choose_targets(cfg: &RunConfig, g: &Graph, count: usize, stage: &str) -> Result<Vec<usize>> {
    if !cfg.targets.0.is_empty() {
        for &t in &cfg.targets.0 {
            g.check_node(t)?;
        }
        return Ok(cfg.targets.0.clone());
    }
    let n = g.node_count();
    let mut rng = seeded(stage_seed(cfg, stage));
    let mut ids = index::sample(&mut rng, n, count.min(n)).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

/// Writes the configured graph under `graph/`.
pub fn cmd_gen_sbm(cfg: &RunConfig, out: &Path) -> Result<Graph> {
    let g = prepare(cfg, out, "gen-sbm")?;
    save_graph(&g, &out.join("graph"))?;
    info!("graph: {} nodes, {} edges", g.node_count(), g.edge_count());
    Ok(g)
}

/// Trains the embedder; writes the model, its embedding table and the loss
/// curve.
pub fn cmd_train_embed(cfg: &RunConfig, out: &Path) -> Result<TrainedEmbedder> {
    let g = prepare(cfg, out, "train-embed")?;
    let trained = train_embedder(&g, &cfg.embed_config(), stage_seed(cfg, "embed"))?;
    trained.model.save(&out.join(EMBEDDER_FILE))?;
    trained.table.save(&out.join(EMBEDDINGS_FILE))?;
    write_text(&out.join("embed_losses.csv"), &series_csv("epoch,loss", &trained.losses))?;
    info!("embedder trained; final loss {:?}", trained.losses.last());
    Ok(trained)
}

/// Trains the attacker against the stored embedder; writes the attacker and
/// its reward and loss curves.
pub fn cmd_train_attack(cfg: &RunConfig, out: &Path) -> Result<DqnTraining> {
    let g = prepare(cfg, out, "train-attack")?;
    let gin = load_embedder(out)?;
    let trained = train_dqn(&g, &gin, &cfg.dqn_config(), stage_seed(cfg, "dqn"))?;
    trained.attacker.save(&out.join(ATTACKER_FILE))?;
    write_text(&out.join("dqn_rewards.csv"), &series_csv("episode,reward", &trained.episode_rewards))?;
    write_text(&out.join("dqn_losses.csv"), &series_csv("update,loss", &trained.losses))?;
    Ok(trained)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEdits {
    pub target: usize,
    pub edits: Vec<EdgeEdit>,
    pub graph_distance: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutput {
    pub budget: usize,
    pub targets: Vec<TargetEdits>,
}

/// Runs the stored attacker on each target; writes `attack.json`.
pub fn cmd_attack(cfg: &RunConfig, out: &Path, targets: &[usize], budget: usize) -> Result<AttackOutput> {
    let g = prepare(cfg, out, "attack")?;
    if targets.is_empty() {
        return Err(Error::Config("attack needs at least one target".into()));
    }
    for &t in targets {
        g.check_node(t)?;
    }
    let attacker = load_attacker(out)?;
    let rows = parallel_map(targets, threads(cfg), |&t| {
        let edits = if budget == 0 {
            Vec::new()
        } else {
            infer_attack(&attacker, &g, t, budget, &g.all_but(t))?
        };
        let graph_distance = g.graph_distance(&g.apply_edits(&edits)?)?;
        if graph_distance > budget {
            return Err(Error::Contract(format!("target {t}: distance {graph_distance} exceeds budget {budget}")));
        }
        Ok(TargetEdits {
            target: t,
            edits,
            graph_distance,
        })
    })?;
    let output = AttackOutput { budget, targets: rows };
    write_json(&out.join("attack.json"), &output)?;
    Ok(output)
}

/// Trains one victim per configured kind and task.
pub fn train_victims(cfg: &RunConfig, g: &Graph) -> Result<Vec<(String, TrainedVictim)>> {
    let mut victims = Vec::new();
    for &task in &cfg.tasks.0 {
        let split = SplitSpec::for_task(task, stage_seed(cfg, "victim-split"));
        for &kind in &cfg.victims.0 {
            let name = format!("{kind}-{task}");
            let seed = derive_seed(stage_seed(cfg, "victim"), &name);
            let v = train_victim(g, task, &split, &cfg.victim_config(kind), seed)?;
            info!("victim {name}: test accuracy {:.3}", v.test_accuracy(g)?);
            victims.push((name, v));
        }
    }
    Ok(victims)
}

/// The configured attackers, loading their artifacts as needed.
pub fn build_attackers(cfg: &RunConfig, out: &Path) -> Result<Vec<Box<dyn Attacker>>> {
    let mut attackers: Vec<Box<dyn Attacker>> = Vec::new();
    for name in &cfg.attackers.0 {
        attackers.push(match name.as_str() {
            "dqn" => Box::new(load_attacker(out)?),
            "greedy" => Box::new(Greedy {
                model: load_embedder(out)?,
                k: cfg.k,
                mode: GreedyEmbedding::Frozen,
            }),
            "random" => Box::new(RandomFlips {
                seed: stage_seed(cfg, "random-attack"),
            }),
            "degree" => Box::new(HighDegree),
            "noop" => Box::new(NoOp),
            other => return Err(Error::Config(format!("unknown attacker '{other}'"))),
        });
    }
    Ok(attackers)
}

/// Mean seconds per `(attacker, victim, budget)`.
fn timing_csv(outcome: &BenchmarkOutcome) -> String {
    let mut keys: Vec<(String, String, usize)> = Vec::new();
    for t in &outcome.timings {
        let key = (t.attacker.clone(), t.victim.clone(), t.budget);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut s = String::from("attacker,victim,budget,mean_seconds\n");
    for (a, v, b) in keys {
        let xs: Vec<f64> = outcome
            .timings
            .iter()
            .filter(|t| t.attacker == a && t.victim == v && t.budget == b)
            .map(|t| t.seconds)
            .collect();
        let _ = writeln!(s, "{a},{v},{b},{}", xs.iter().sum::<f64>() / xs.len() as f64);
    }
    s
}

/// Benchmarks every attacker against every victim; writes `report.json`,
/// `curves.csv` and the timing sidecars.
pub fn cmd_evaluate(cfg: &RunConfig, out: &Path) -> Result<BenchmarkOutcome> {
    let g = prepare(cfg, out, "evaluate")?;
    let attackers = build_attackers(cfg, out)?;
    let embedder = match out.join(EMBEDDER_FILE).exists() {
        true => Some(load_embedder(out)?),
        false => None,
    };
    let victims = train_victims(cfg, &g)?;
    let spec = BenchmarkSpec {
        budgets: cfg.budgets.0.clone(),
        target_count: cfg.target_count,
        targets: (!cfg.targets.0.is_empty()).then(|| cfg.targets.0.clone()),
        k: cfg.k,
        seed: stage_seed(cfg, "bench"),
        threads: threads(cfg),
    };
    let refs: Vec<&dyn Attacker> = attackers.iter().map(|a| a.as_ref()).collect();
    let vrefs: Vec<(&str, &TrainedVictim)> = victims.iter().map(|(n, v)| (n.as_str(), v)).collect();
    let outcome = run_benchmark(&g, &refs, &vrefs, &spec, embedder.as_ref())?;
    write_text(&out.join("report.json"), &(outcome.report.to_json()? + "\n"))?;
    write_text(&out.join("curves.csv"), &outcome.report.curves_csv())?;
    write_json(&out.join("report.timings.json"), &outcome.timings)?;
    write_text(&out.join("timings.csv"), &timing_csv(&outcome))?;
    Ok(outcome)
}

/// Correlates node and community properties with per-candidate distortion;
/// writes `correlation.json`.
pub fn cmd_analyze(cfg: &RunConfig, out: &Path) -> Result<Vec<StudyRow>> {
    let g = prepare(cfg, out, "analyze")?;
    let properties = cfg.study_properties();
    let needs_model = cfg.analysis_distortion == StudyDistortion::Embedding
        || properties.iter().any(|p| p.needs_embedder());
    let model = needs_model.then(|| load_embedder(out)).transpose()?;
    let targets = choose_targets(cfg, &g, cfg.analysis_targets, "analysis-targets")?;
    let scores = parallel_map(&targets, threads(cfg), |&t| match (&cfg.analysis_distortion, &model) {
        (StudyDistortion::Embedding, Some(m)) => candidate_embedding_distortions(m, &g, t, cfg.k, &g.all_but(t)),
        _ => candidate_neighborhood_distortions(&g, t, cfg.k, &g.all_but(t)),
    })?;
    let ctx = StudyContext {
        embedder: model.as_ref(),
        community_size: cfg.community_size,
        knn_k: (cfg.knn_k > 0).then_some(cfg.knn_k),
        ncs_corrected: cfg.ncs_corrected,
    };
    let rows = correlation_study(&g, &scores, &properties, &ctx)?;
    write_json(&out.join("correlation.json"), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub target: usize,
    pub greedy_edits: Vec<EdgeEdit>,
    pub greedy_distortion: f64,
    pub dqn_edits: Vec<EdgeEdit>,
    pub dqn_distortion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub budget: usize,
    pub k: usize,
    pub rows: Vec<OracleRow>,
    pub greedy_mean: f64,
    pub dqn_mean: f64,
    /// Targets on which greedy reaches at least the attacker's distortion.
    pub greedy_at_least_dqn: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTiming {
    pub target: usize,
    pub greedy_seconds: f64,
    pub dqn_seconds: f64,
}

/// Greedy against the stored attacker at `oracle_budget`, scored by the
/// final embedding distortion. Writes `oracle.json` and
/// `oracle.timings.json`. Targets run one at a time so timings are not
/// disturbed by other workers.
pub fn cmd_oracle(cfg: &RunConfig, out: &Path) -> Result<(OracleComparison, Vec<OracleTiming>)> {
    let g = prepare(cfg, out, "oracle")?;
    let model = load_embedder(out)?;
    let attacker = load_attacker(out)?;
    let budget = cfg.oracle_budget;
    let targets = choose_targets(cfg, &g, cfg.oracle_targets, "oracle-targets")?;
    let mut rows = Vec::with_capacity(targets.len());
    let mut timings = Vec::with_capacity(targets.len());
    for &t in &targets {
        let acc = g.all_but(t);
        let start = Instant::now();
        let greedy = greedy_attack(&g, t, budget, cfg.k, &acc, &model, &GreedyEmbedding::Frozen)?.edits;
        let greedy_seconds = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let dqn = infer_attack(&attacker, &g, t, budget, &acc)?;
        let dqn_seconds = start.elapsed().as_secs_f64();
        let score = |edits: &[EdgeEdit]| -> Result<f64> {
            Ok(distortion_between(&model, &g, &g.apply_edits(edits)?, t, cfg.k)?.value)
        };
        rows.push(OracleRow {
            target: t,
            greedy_distortion: score(&greedy)?,
            dqn_distortion: score(&dqn)?,
            greedy_edits: greedy,
            dqn_edits: dqn,
        });
        timings.push(OracleTiming {
            target: t,
            greedy_seconds,
            dqn_seconds,
        });
    }
    let mean = |f: fn(&OracleRow) -> f64| {
        if rows.is_empty() {
            0.0
        } else {
            rows.iter().map(f).sum::<f64>() / rows.len() as f64
        }
    };
    let cmp = OracleComparison {
        budget,
        k: cfg.k,
        greedy_mean: mean(|r| r.greedy_distortion),
        dqn_mean: mean(|r| r.dqn_distortion),
        greedy_at_least_dqn: rows.iter().filter(|r| r.greedy_distortion >= r.dqn_distortion).count(),
        rows,
    };
    write_json(&out.join("oracle.json"), &cmp)?;
    write_json(&out.join("oracle.timings.json"), &timings)?;
    Ok((cmp, timings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EmbeddingTable;

    fn small_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.apply_overrides(&[
            "sbm_blocks=12,12",
            "embed_epochs=3",
            "walks_per_node=2",
            "dqn_episodes=3",
            "dqn_steps=2",
            "dqn_batch_size=4",
            "victim_epochs=20",
            "budgets=1,2",
            "target_count=4",
            "analysis_targets=2",
            "community_size=5",
            "oracle_targets=2",
            "oracle_budget=2",
            "threads=2",
        ])
        .unwrap();
        cfg
    }

    fn run_all(cfg: &RunConfig, out: &Path) {
        cmd_gen_sbm(cfg, out).unwrap();
        cmd_train_embed(cfg, out).unwrap();
        cmd_train_attack(cfg, out).unwrap();
        cmd_attack(cfg, out, &[0, 5], 2).unwrap();
        cmd_evaluate(cfg, out).unwrap();
        cmd_analyze(cfg, out).unwrap();
        cmd_oracle(cfg, out).unwrap();
    }

    #[test]
    fn stages_are_byte_reproducible() {
        let cfg = small_config();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_all(&cfg, a.path());
        run_all(&cfg, b.path());
        let mut names: Vec<String> = std::fs::read_dir(a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| !n.contains("timings") && n != "graph")
            .collect();
        names.sort();
        assert!(names.len() >= 15, "{names:?}");
        for n in names {
            assert_eq!(std::fs::read(a.path().join(&n)).unwrap(), std::fs::read(b.path().join(&n)).unwrap(), "{n}");
        }
        for f in ["edges.tsv", "features.txt", "labels.txt"] {
            let p = Path::new("graph").join(f);
            assert_eq!(std::fs::read(a.path().join(&p)).unwrap(), std::fs::read(b.path().join(&p)).unwrap());
        }
    }

    #[test]
    fn embedding_file_has_graph_dimensions() {
        let cfg = small_config();
        let dir = tempfile::tempdir().unwrap();
        cmd_train_embed(&cfg, dir.path()).unwrap();
        let z = EmbeddingTable::load(&dir.path().join(EMBEDDINGS_FILE)).unwrap();
        assert_eq!((z.node_count(), z.dim()), (24, 16));
        let text = std::fs::read_to_string(dir.path().join("train-embed.config.txt")).unwrap();
        assert_eq!(RunConfig::from_text(&text).unwrap(), cfg);
    }

    #[test]
    fn missing_inputs_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config();
        assert!(matches!(cmd_train_attack(&cfg, dir.path()), Err(Error::Io { .. })));
        cfg.dataset = DatasetSource::Files;
        assert!(matches!(cmd_train_embed(&cfg, dir.path()), Err(Error::Config(_))));
        cfg.dataset_edges = dir.path().join("nope.tsv").display().to_string();
        assert!(matches!(cmd_train_embed(&cfg, dir.path()), Err(Error::Io { .. })));
    }

    #[test]
    fn attack_edge_cases() {
        let mut cfg = small_config();
        cfg.dqn_episodes = 0;
        let dir = tempfile::tempdir().unwrap();
        cmd_train_embed(&cfg, dir.path()).unwrap();
        let trained = cmd_train_attack(&cfg, dir.path()).unwrap();
        assert!(trained.episode_rewards.is_empty());
        let out = cmd_attack(&cfg, dir.path(), &[1, 2], 0).unwrap();
        assert!(out.targets.iter().all(|t| t.edits.is_empty() && t.graph_distance == 0));
        assert!(matches!(cmd_attack(&cfg, dir.path(), &[99], 1), Err(Error::Input(_))));
        let out = cmd_attack(&cfg, dir.path(), &[3], 3).unwrap();
        assert!(out.targets[0].graph_distance <= 3);
    }

    #[test]
    fn empty_attacker_set_gives_empty_report() {
        let mut cfg = small_config();
        cfg.attackers.0.clear();
        let dir = tempfile::tempdir().unwrap();
        let outcome = cmd_evaluate(&cfg, dir.path()).unwrap();
        assert!(outcome.report.cells.is_empty());
    }

    #[test]
    fn report_drop_in_accuracy_is_recomputable() {
        let mut cfg = small_config();
        cfg.apply_overrides(&["attackers=random,degree", "victims=gcn"]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        cmd_evaluate(&cfg, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
        let report: crate::victim::AttackReport = serde_json::from_str(&text).unwrap();
        assert_eq!(report.cells.len(), 4);
        for c in &report.cells {
            let n = c.targets.len() as f64;
            let orig = c.targets.iter().filter(|t| t.original_correct).count() as f64 / n;
            let att = c.targets.iter().filter(|t| t.attacked_correct).count() as f64 / n;
            assert!((orig - c.original_accuracy).abs() < 1e-12 && (att - c.attacked_accuracy).abs() < 1e-12);
            if let Some(da) = c.drop_in_accuracy {
                assert!((da - (orig - att) / orig * 100.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn out_dir_override() {
        let cfg = RunConfig::default();
        // Only the unset case is checked here; setting process environment
        // in a multi-threaded test binary would race other tests.
        if std::env::var_os(OUT_DIR_ENV).is_none() {
            assert_eq!(resolve_out_dir(&cfg), PathBuf::from("out"));
        }
    }
}
