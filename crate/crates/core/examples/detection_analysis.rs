//! Correlates simple candidate properties with per-flip distortion.

use neighborhood_attack::analysis::{
    candidate_neighborhood_distortions, clustering_fixture, correlation_study, Property, StudyContext,
};
use neighborhood_attack::sbm::{generate, SbmSpec};

fn main() -> neighborhood_attack::Result<()> {
    let props = [Property::FeatureSimilarity, Property::Degree, Property::LocalClustering, Property::ReverseTwoHopRank];

    let g = generate(&SbmSpec::two_blocks(80, 0.2, 0.03), 4)?;
    let scores = (0..80)
        .step_by(8)
        .map(|t| candidate_neighborhood_distortions(&g, t, 2, &g.all_but(t)))
        .collect::<neighborhood_attack::Result<Vec<_>>>()?;
    println!("SBM, graph-space distortion:");
    for r in correlation_study(&g, &scores, &props, &StudyContext::default())? {
        println!("  {:<22} {:+.3} ± {:.3}  p={:.2e}", r.property, r.mean_coefficient, r.std_coefficient, r.p_value);
    }

    let f = clustering_fixture();
    let scores = candidate_neighborhood_distortions(&f, 0, 2, &f.all_but(0))?;
    let rows = correlation_study(&f, &[scores], &[Property::LocalClustering], &StudyContext::default())?;
    println!("clustering fixture: {:+.3} (p={:.2e})", rows[0].mean_coefficient, rows[0].p_value);
    Ok(())
}
