//! Drop in accuracy of a GCN and a mean-aggregator victim under the
//! random and degree baselines.

use neighborhood_attack::attack::{Attacker, HighDegree, RandomFlips};
use neighborhood_attack::sbm::{generate, SbmSpec};
use neighborhood_attack::victim::{run_benchmark, train_victim, BenchmarkSpec, SplitSpec, Task, VictimConfig, VictimKind};

fn main() -> neighborhood_attack::Result<()> {
    let g = generate(&SbmSpec::two_blocks(100, 0.3, 0.02), 3)?;
    let gcn = train_victim(&g, Task::Nc, &SplitSpec::node_default(3), &VictimConfig::default(), 3)?;
    let sage_cfg = VictimConfig { kind: VictimKind::Sage, ..VictimConfig::default() };
    let sage = train_victim(&g, Task::Nc, &SplitSpec::node_default(3), &sage_cfg, 3)?;
    println!("test accuracy: gcn {:.3}, sage {:.3}", gcn.test_accuracy(&g)?, sage.test_accuracy(&g)?);

    let random = RandomFlips { seed: 3 };
    let attackers: [&dyn Attacker; 2] = [&random, &HighDegree];
    let spec = BenchmarkSpec { budgets: vec![1, 5, 10], target_count: 20, seed: 3, ..BenchmarkSpec::default() };
    let outcome = run_benchmark(&g, &attackers, &[("gcn", &gcn), ("sage", &sage)], &spec, None)?;
    print!("{}", outcome.report.curves_csv());
    Ok(())
}
