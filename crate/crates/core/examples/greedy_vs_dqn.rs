//! Greedy oracle against the Q-network attacker: distortion and time.

use std::time::Instant;

use neighborhood_attack::distortion::distortion_between;
use neighborhood_attack::dqn::{infer_attack, train_dqn, DqnConfig};
use neighborhood_attack::embed::{train_embedder, EmbedConfig};
use neighborhood_attack::oracle::{greedy_attack, GreedyEmbedding};
use neighborhood_attack::sbm::{generate, SbmSpec};

fn main() -> neighborhood_attack::Result<()> {
    let g = generate(&SbmSpec::two_blocks(60, 0.3, 0.05), 6)?;
    let gin = train_embedder(&g, &EmbedConfig::default(), 6)?.model;
    let attacker = train_dqn(&g, &gin, &DqnConfig { episodes: 40, ..DqnConfig::default() }, 6)?.attacker;

    let (mut tg, mut td) = (0.0, 0.0);
    for t in (1..60).step_by(12) {
        let acc = g.all_but(t);
        let s = Instant::now();
        let greedy = greedy_attack(&g, t, 5, 2, &acc, &gin, &GreedyEmbedding::Frozen)?.edits;
        tg += s.elapsed().as_secs_f64();
        let s = Instant::now();
        let dqn = infer_attack(&attacker, &g, t, 5, &acc)?;
        td += s.elapsed().as_secs_f64();
        let dg = distortion_between(&gin, &g, &g.apply_edits(&greedy)?, t, 2)?.value;
        let dd = distortion_between(&gin, &g, &g.apply_edits(&dqn)?, t, 2)?.value;
        println!("target {t:>2}: greedy {dg:+.4}  dqn {dd:+.4}");
    }
    println!("greedy took {:.1}x the attacker's time", tg / td);
    Ok(())
}
