//! Samples a two-block stochastic block model and writes it as plain text.
//!
//! cargo run --example gen_sbm -- [out_dir]

use neighborhood_attack::io::save_graph;
use neighborhood_attack::sbm::{generate, SbmSpec};

fn main() -> neighborhood_attack::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("nb-sbm").display().to_string());
    let spec = SbmSpec::two_blocks(100, 0.3, 0.02);
    let g = generate(&spec, 7)?;

    let labels = g.labels().expect("SBM graphs are labelled");
    let cross = g.edges().iter().filter(|&&(u, v)| labels[u] != labels[v]).count();
    println!("{} nodes, {} edges ({cross} between blocks)", g.node_count(), g.edge_count());
    println!("mean degree {:.2}", 2.0 * g.edge_count() as f64 / g.node_count() as f64);

    save_graph(&g, out.as_ref())?;
    println!("wrote {out}/edges.tsv, features.txt, labels.txt");
    Ok(())
}
