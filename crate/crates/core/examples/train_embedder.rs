//! Trains the unsupervised GIN embedder on an SBM and checks that nodes of
//! the same block end up closer together.

use neighborhood_attack::embed::{train_embedder, EmbedConfig};
use neighborhood_attack::numerics::l2_distance;
use neighborhood_attack::sbm::{generate, SbmSpec};

fn main() -> neighborhood_attack::Result<()> {
    let g = generate(&SbmSpec::two_blocks(60, 0.3, 0.02), 1)?;
    let trained = train_embedder(&g, &EmbedConfig::default(), 1)?;
    for (epoch, loss) in trained.losses.iter().enumerate().step_by(10) {
        println!("epoch {epoch:>3}  loss {loss:.4}");
    }

    let z = &trained.table;
    let labels = g.labels().unwrap();
    let (mut same, mut diff, mut ns, mut nd) = (0.0, 0.0, 0, 0);
    for u in 0..g.node_count() {
        for v in u + 1..g.node_count() {
            let d = l2_distance(z.row(u), z.row(v));
            if labels[u] == labels[v] {
                same += d;
                ns += 1;
            } else {
                diff += d;
                nd += 1;
            }
        }
    }
    println!("mean distance within blocks {:.4}, across {:.4}", same / ns as f64, diff / nd as f64);
    Ok(())
}
