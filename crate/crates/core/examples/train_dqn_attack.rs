//! Trains the Q-network attacker on a small SBM and attacks one node.

use neighborhood_attack::dqn::{infer_attack, train_dqn, DqnConfig};
use neighborhood_attack::embed::{train_embedder, EmbedConfig};
use neighborhood_attack::distortion::distortion_between;
use neighborhood_attack::sbm::{generate, SbmSpec};

fn main() -> neighborhood_attack::Result<()> {
    let g = generate(&SbmSpec::two_blocks(60, 0.3, 0.05), 2)?;
    let gin = train_embedder(&g, &EmbedConfig::default(), 2)?.model;
    let cfg = DqnConfig { episodes: 60, ..DqnConfig::default() };
    let trained = train_dqn(&g, &gin, &cfg, 2)?;
    let tail = &trained.losses[trained.losses.len().saturating_sub(50)..];
    println!(
        "{} episodes, last-50 mean loss {:.5}",
        trained.episode_rewards.len(),
        tail.iter().sum::<f64>() / tail.len().max(1) as f64
    );

    let t = 7;
    let edits = infer_attack(&trained.attacker, &g, t, 5, &g.all_but(t))?;
    let g2 = g.apply_edits(&edits)?;
    let shown: Vec<String> = edits.iter().map(ToString::to_string).collect();
    println!("target {t}: {}", shown.join(" "));
    println!("embedding distortion {:+.4}", distortion_between(&gin, &g, &g2, t, 2)?.value);
    Ok(())
}
