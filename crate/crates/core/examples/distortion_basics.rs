//! Graph-space and embedding-space distortion of a single edge flip.

use neighborhood_attack::distortion::distortion_between;
use neighborhood_attack::embed::{Backend, EmbeddingModel};
use neighborhood_attack::{EdgeEdit, Graph};

fn main() -> neighborhood_attack::Result<()> {
    // Two triangles joined by the bridge 2-3.
    let g = Graph::structural(6, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)])?;
    let model = EmbeddingModel::new(Backend::Gin, 6, 2, 8, 1);
    let t = 0;

    for edit in [EdgeEdit::add(0, 4), EdgeEdit::delete(0, 1), EdgeEdit::add(1, 4)] {
        if g.validate_edit(&edit).is_err() {
            continue;
        }
        let g2 = g.apply_edit(&edit)?;
        let jaccard = g.neighborhood_distortion(&g2, t, 2)?;
        let score = distortion_between(&model, &g, &g2, t, 2)?;
        println!(
            "{edit}: N² {:?} -> {:?}, jaccard {jaccard:.3}, embedding {:+.4} (d_o {:.4}, d_p {:.4})",
            g.k_hop_neighborhood(t, 2)?.as_slice(),
            g2.k_hop_neighborhood(t, 2)?.as_slice(),
            score.value,
            score.d_o,
            score.d_p
        );
    }
    // A far-away flip leaves N²(0) unchanged, so both distortions vanish.
    let g3 = g.apply_edit(&EdgeEdit::add(1, 3))?.apply_edit(&EdgeEdit::delete(4, 5))?;
    let g4 = g3.apply_edit(&EdgeEdit::add(4, 5))?;
    println!("unchanged neighborhood: embedding {:+.4}", distortion_between(&model, &g3, &g4, t, 1)?.value);
    Ok(())
}
