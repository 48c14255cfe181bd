use neighborhood_attack::attack::{Attacker, HighDegree, NoOp, RandomFlips};
use neighborhood_attack::distortion::distortion_between;
use neighborhood_attack::dqn::{infer_attack, train_dqn, DqnAttacker, DqnConfig};
use neighborhood_attack::embed::{train_embedder, EmbedConfig, EmbeddingModel};
use neighborhood_attack::io::{load_graph, save_graph};
use neighborhood_attack::sbm::{generate, SbmSpec};
use neighborhood_attack::victim::{run_benchmark, train_victim, BenchmarkSpec, SplitSpec, Task, VictimConfig};

fn small_embed() -> EmbedConfig {
    EmbedConfig { epochs: 5, ..EmbedConfig::default() }
}

#[test]
fn graph_files_round_trip() {
    let g = generate(&SbmSpec::two_blocks(30, 0.3, 0.05), 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_graph(&g, dir.path()).unwrap();
    let back = load_graph(
        &dir.path().join("edges.tsv"),
        Some(&dir.path().join("features.txt")),
        Some(&dir.path().join("labels.txt")),
    )
    .unwrap();
    assert_eq!(back.edges(), g.edges());
    assert_eq!(back.labels(), g.labels());
    assert_eq!(back.features(), g.features());
    assert_eq!(back.graph_distance(&g).unwrap(), 0);
}

#[test]
fn models_survive_save_and_load() {
    let g = generate(&SbmSpec::two_blocks(24, 0.3, 0.05), 2).unwrap();
    let model = train_embedder(&g, &small_embed(), 2).unwrap().model;
    let cfg = DqnConfig { episodes: 3, ..DqnConfig::default() };
    let attacker = train_dqn(&g, &model, &cfg, 2).unwrap().attacker;
    let dir = tempfile::tempdir().unwrap();
    model.save(&dir.path().join("e.bin")).unwrap();
    attacker.save(&dir.path().join("a.bin")).unwrap();
    let model2 = EmbeddingModel::load(&dir.path().join("e.bin")).unwrap();
    let attacker2 = DqnAttacker::load(&dir.path().join("a.bin")).unwrap();
    assert_eq!(model.embed(&g).unwrap(), model2.embed(&g).unwrap());
    let acc = g.all_but(3);
    assert_eq!(infer_attack(&attacker, &g, 3, 3, &acc).unwrap(), infer_attack(&attacker2, &g, 3, 3, &acc).unwrap());
}

#[test]
fn train_attack_and_benchmark_end_to_end() {
    let g = generate(&SbmSpec::two_blocks(40, 0.3, 0.03), 5).unwrap();
    let model = train_embedder(&g, &small_embed(), 5).unwrap().model;
    let cfg = DqnConfig { episodes: 6, ..DqnConfig::default() };
    let attacker = train_dqn(&g, &model, &cfg, 5).unwrap().attacker;

    // Budgeted inference only touches the target and changes exactly b edges.
    for t in [0, 13, 39] {
        let edits = infer_attack(&attacker, &g, t, 4, &g.all_but(t)).unwrap();
        assert_eq!(edits.len(), 4);
        assert!(edits.iter().all(|e| e.other(t).is_some()));
        let g2 = g.apply_edits(&edits).unwrap();
        assert_eq!(g.graph_distance(&g2).unwrap(), 4);
        assert!(distortion_between(&model, &g, &g2, t, 2).unwrap().value.is_finite());
    }

    let victim = train_victim(&g, Task::Nc, &SplitSpec::node_default(5), &VictimConfig { epochs: 40, ..VictimConfig::default() }, 5).unwrap();
    let random = RandomFlips { seed: 5 };
    let attackers: [&dyn Attacker; 4] = [&attacker, &random, &HighDegree, &NoOp];
    let spec = BenchmarkSpec { budgets: vec![1, 3], target_count: 8, seed: 5, ..BenchmarkSpec::default() };
    let out = run_benchmark(&g, &attackers, &[("gcn", &victim)], &spec, None).unwrap();
    for name in ["dqn", "random", "degree", "noop"] {
        for b in [1, 3] {
            let cell = out.report.cell(name, "gcn", b).unwrap_or_else(|| panic!("missing cell {name} B={b}"));
            assert!(cell.attacked_accuracy <= 1.0 && cell.original_accuracy <= 1.0);
        }
    }
    // The no-op attacker never changes a prediction.
    let none = out.report.cell("noop", "gcn", 3).unwrap();
    assert_eq!(none.attacked_accuracy, none.original_accuracy);
}
