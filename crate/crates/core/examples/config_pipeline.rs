//! Drives the pipeline stages from a `key = value` configuration.

use neighborhood_attack::config::RunConfig;
use neighborhood_attack::pipeline;

fn main() -> neighborhood_attack::Result<()> {
    let cfg = RunConfig::from_text(
        "sbm_blocks = 20,20\n\
         embed_epochs = 20\n\
         dqn_episodes = 10\n\
         victims = gcn\n\
         budgets = 1,3\n\
         target_count = 8\n",
    )?;
    let out = std::env::temp_dir().join("nb-pipeline");
    pipeline::cmd_train_embed(&cfg, &out)?;
    pipeline::cmd_train_attack(&cfg, &out)?;
    let outcome = pipeline::cmd_evaluate(&cfg, &out)?;
    for c in &outcome.report.cells {
        println!("{} on {} at B={}: DA {:?}", c.attacker, c.victim, c.budget, c.drop_in_accuracy);
    }
    println!("artifacts in {}", out.display());
    Ok(())
}
