//! Builds the set-cover reduction graph and confirms that the exhaustive
//! distortion maximizer reaches `b + n` second-hop nodes exactly when a
//! cover of size `b` exists.

use neighborhood_attack::oracle::{brute_force_max_distortion, reduction_graph, SetCoverInstance, DEFAULT_ENUMERATION_CAP};
use neighborhood_attack::rng::seeded;
use neighborhood_attack::Graph;

fn main() -> neighborhood_attack::Result<()> {
    let mut rng = seeded(5);
    for _ in 0..8 {
        let inst = SetCoverInstance::random(5, 5, 2, &mut rng)?;
        let red = reduction_graph(&inst)?;
        let best = brute_force_max_distortion(&red.graph, red.target, red.budget, 2, &red.accessible, DEFAULT_ENUMERATION_CAP)?;
        let attacked: Graph = red.graph.apply_edits(&best.edits)?;
        let reach = attacked.k_hop_neighborhood(red.target, 2)?.len() - 1;
        let cover = inst.exhaustive_cover();
        println!(
            "subsets {:?}: cover {:?}, |N²(t)| - 1 = {reach} (b + n = {}), {} subsets evaluated",
            inst.subsets,
            cover,
            inst.budget + inst.universe_size,
            best.evaluated
        );
        assert_eq!(cover.is_some(), reach == inst.budget + inst.universe_size);
    }
    Ok(())
}
