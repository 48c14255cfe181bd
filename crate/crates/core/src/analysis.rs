//! Detectability analysis: how well simple node and community properties of
//! a candidate `v` predict the distortion caused by flipping `(t, v)`.
//!
//! For every target, each property ranks the candidates; the ranking is
//! compared with the distortion ranking by Spearman's coefficient, and the
//! per-target results are summarized across targets.

use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::distortion::distortion_between;
use crate::embed::{EmbeddingModel, EmbeddingTable};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeSet};
use crate::numerics::l2_distance;

/// Jaccard similarity of the non-zero supports of two feature rows. Two
/// all-zero rows are identical and score 1.
pub fn feature_similarity(g: &Graph, a: usize, b: usize) -> Result<f64> {
    g.check_node(a)?;
    g.check_node(b)?;
    let x = g.features();
    let (mut inter, mut union) = (0usize, 0usize);
    for (p, q) in x.row(a).iter().zip(x.row(b)) {
        let (p, q) = (*p != 0.0, *q != 0.0);
        inter += usize::from(p && q);
        union += usize::from(p || q);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Fraction of neighbor pairs of `v` that are themselves adjacent; 0 for
/// nodes with fewer than two neighbors.
pub fn local_clustering(g: &Graph, v: usize) -> Result<f64> {
    g.check_node(v)?;
    let nb = g.neighbors(v);
    let d = nb.len();
    if d < 2 {
        return Ok(0.0);
    }
    let mut links = 0usize;
    for (i, &a) in nb.iter().enumerate() {
        for &b in &nb[i + 1..] {
            links += usize::from(g.has_edge(a, b));
        }
    }
    Ok(links as f64 / (d * (d - 1) / 2) as f64)
}

/// For every node, how many other nodes have it in their 2-hop
/// neighborhood. By symmetry of shortest-path distance this is
/// `|N²(v)| − 1`.
pub fn reverse_two_hop_counts(g: &Graph) -> Vec<usize> {
    (0..g.node_count())
        .map(|v| g.k_hop_neighborhood(v, 2).expect("valid node").len() - 1)
        .collect()
}

/// For every node, how many other nodes list it among their `k` nearest
/// neighbors in `z` (L2; ties broken by lower id).
pub fn reverse_knn_counts(z: &EmbeddingTable, k: usize) -> Vec<usize> {
    let n = z.node_count();
    let mut counts = vec![0usize; n];
    for u in 0..n {
        for v in nearest(z, u, k) {
            counts[v] += 1;
        }
    }
    counts
}

/// The `k` nodes closest to `u` in `z`, excluding `u`.
fn nearest(z: &EmbeddingTable, u: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<(f64, usize)> = (0..z.node_count())
        .filter(|&v| v != u)
        .map(|v| (l2_distance(z.row(u), z.row(v)), v))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others.into_iter().take(k).map(|(_, v)| v).collect()
}

/// Default neighbor count of the embedding reverse-kNN list, capped at
/// `n − 1` on small graphs.
pub fn default_knn_k(node_count: usize) -> usize {
    100.min(node_count.saturating_sub(1))
}

/// 1-based positions in descending order of `values`; tied values share
/// the average of their positions.
pub fn descending_ranks(values: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = values.iter().map(|v| -v).collect();
    average_ranks(&neg)
}

/// 1-based ascending ranks with ties averaged.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        // Positions i+1 ..= j share their mean.
        let avg = (i + 1 + j) as f64 / 2.0;
        for &p in &idx[i..j] {
            ranks[p] = avg;
        }
        i = j;
    }
    ranks
}

/// Candidate ids ordered by descending value (ties: lower id first), plus
/// the values themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyRanking {
    pub property: String,
    pub candidates: Vec<usize>,
    pub values: Vec<f64>,
    pub order: Vec<usize>,
}

impl PropertyRanking {
    pub fn new(property: impl Into<String>, candidates: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if candidates.len() != values.len() {
            return Err(Error::input("one value per candidate required"));
        }
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(candidates[a].cmp(&candidates[b])));
        let order = idx.into_iter().map(|i| candidates[i]).collect();
        Ok(Self {
            property: property.into(),
            candidates,
            values,
            order,
        })
    }

    pub fn ranks(&self) -> Vec<f64> {
        descending_ranks(&self.values)
    }
}

// ---------------------------------------------------------------------------
// Community metrics

/// `(m(S), c(S))`: edges inside `s` and edges leaving it.
pub fn community_counts(g: &Graph, s: &NodeSet) -> Result<(usize, usize)> {
    let (mut twice_inside, mut cut) = (0usize, 0usize);
    for v in s.iter() {
        g.check_node(v)?;
        for &u in g.neighbors(v) {
            if s.contains(u) {
                twice_inside += 1;
            } else {
                cut += 1;
            }
        }
    }
    Ok((twice_inside / 2, cut))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommunityMetric {
    EdgeExpansion,
    Conductance,
    Volume,
    /// Normalized cut with the complement term `2(|E| + m(S)) − c(S)`,
    /// transcribed as published.
    NormalizedCut,
    /// Normalized cut with the complement volume `2(|E| − m(S)) − c(S)`.
    NormalizedCutCorrected,
}

fn recip_or_zero(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        1.0 / x
    }
}

/// Quality of the node set `s`, which must be a non-empty proper subset.
pub fn community_metric(g: &Graph, s: &NodeSet, which: CommunityMetric) -> Result<f64> {
    let n = g.node_count();
    if s.is_empty() || s.len() >= n {
        return Err(Error::input(format!("community of size {} in a graph of {n} nodes", s.len())));
    }
    let (m, c) = community_counts(g, s)?;
    let (m, c, e) = (m as f64, c as f64, g.edge_count() as f64);
    let vol = 2.0 * m + c;
    Ok(match which {
        CommunityMetric::EdgeExpansion => c / s.len().min(n - s.len()) as f64,
        CommunityMetric::Conductance => {
            if vol == 0.0 {
                0.0
            } else {
                c / vol
            }
        }
        CommunityMetric::Volume => vol,
        CommunityMetric::NormalizedCut => c * (recip_or_zero(vol) + recip_or_zero(2.0 * (e + m) - c)),
        CommunityMetric::NormalizedCutCorrected => c * (recip_or_zero(vol) + recip_or_zero(2.0 * (e - m) - c)),
    })
}

/// `t` and its `size` nearest nodes in `z`, capped so the set stays a
/// proper subset.
pub fn embedding_community(z: &EmbeddingTable, t: usize, size: usize) -> NodeSet {
    let cap = z.node_count().saturating_sub(2);
    let mut ids = nearest(z, t, size.min(cap));
    ids.push(t);
    NodeSet::new(ids)
}

// ---------------------------------------------------------------------------
// Rank correlation

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub coefficient: f64,
    pub p_value: f64,
    pub n: usize,
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Undefined("rank correlation of a constant list".into()));
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::input(format!("lists of length {} and {}", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::input("rank correlation needs at least 3 observations"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::input("rank correlation of non-finite values"));
    }
    Ok(())
}

/// Spearman's coefficient (Pearson correlation of average-tied ranks) with a
/// two-sided p-value from the Student-t approximation on `n − 2` degrees of
/// freedom.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult> {
    check_pair(xs, ys)?;
    let r = pearson(&average_ranks(xs), &average_ranks(ys))?;
    let n = xs.len();
    let df = (n - 2) as f64;
    let p_value = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::input(format!("t distribution: {e}")))?;
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok(CorrelationResult {
        coefficient: r,
        p_value,
        n,
    })
}

/// Largest sample for which [`spearman_exact`] enumerates permutations.
pub const EXACT_MAX_N: usize = 10;

/// Spearman's coefficient with an exact two-sided permutation p-value: the
/// fraction of all orderings of `ys` whose |coefficient| reaches the
/// observed one.
pub fn spearman_exact(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult> {
    check_pair(xs, ys)?;
    if xs.len() > EXACT_MAX_N {
        return Err(Error::Size(format!("exact permutation test limited to n <= {EXACT_MAX_N}")));
    }
    let rx = average_ranks(xs);
    let mut ry = average_ranks(ys);
    let observed = pearson(&rx, &ry)?;
    let n = ry.len();
    let (mut extreme, mut total) = (0u64, 0u64);
    let tol = 1e-12;
    // Heap's algorithm over all n! orderings.
    let mut c = vec![0usize; n];
    let mut tally = |ry: &[f64]| {
        total += 1;
        if pearson(&rx, ry).expect("non-constant").abs() >= observed.abs() - tol {
            extreme += 1;
        }
    };
    tally(&ry);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                ry.swap(0, i);
            } else {
                ry.swap(c[i], i);
            }
            tally(&ry);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(CorrelationResult {
        coefficient: observed,
        p_value: extreme as f64 / total as f64,
        n,
    })
}

/// Fisher's combined p-value: `−2 Σ ln p_i ~ χ²(2m)` under the joint null.
pub fn fisher_combined(p_values: &[f64]) -> Result<f64> {
    if p_values.is_empty() {
        return Err(Error::input("no p-values to combine"));
    }
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::input("p-values must lie in [0, 1]"));
    }
    let stat: f64 = p_values.iter().map(|p| -2.0 * p.max(f64::MIN_POSITIVE).ln()).sum();
    let dist = ChiSquared::new(2.0 * p_values.len() as f64).map_err(|e| Error::input(format!("chi-squared: {e}")))?;
    Ok((1.0 - dist.cdf(stat)).clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// Correlation study

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    FeatureSimilarity,
    Degree,
    LocalClustering,
    /// Rank by occurrences in other nodes' 2-hop neighborhoods.
    ReverseTwoHopRank,
    /// Rank by occurrences in other nodes' embedding k-NN lists.
    ReverseKnnRank,
    EdgeExpansionDiff,
    ConductanceDiff,
    NormalizedCutDiff,
    VolumeDiff,
}

impl Property {
    pub const ALL: [Property; 9] = [
        Property::FeatureSimilarity,
        Property::Degree,
        Property::LocalClustering,
        Property::ReverseTwoHopRank,
        Property::ReverseKnnRank,
        Property::EdgeExpansionDiff,
        Property::ConductanceDiff,
        Property::NormalizedCutDiff,
        Property::VolumeDiff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::FeatureSimilarity => "feature_similarity",
            Property::Degree => "degree",
            Property::LocalClustering => "local_clustering",
            Property::ReverseTwoHopRank => "reverse_two_hop_rank",
            Property::ReverseKnnRank => "reverse_knn_rank",
            Property::EdgeExpansionDiff => "edge_expansion_diff",
            Property::ConductanceDiff => "conductance_diff",
            Property::NormalizedCutDiff => "normalized_cut_diff",
            Property::VolumeDiff => "volume_diff",
        }
    }

    fn community_metric(self, ncs_corrected: bool) -> Option<CommunityMetric> {
        match self {
            Property::EdgeExpansionDiff => Some(CommunityMetric::EdgeExpansion),
            Property::ConductanceDiff => Some(CommunityMetric::Conductance),
            Property::VolumeDiff => Some(CommunityMetric::Volume),
            Property::NormalizedCutDiff if ncs_corrected => Some(CommunityMetric::NormalizedCutCorrected),
            Property::NormalizedCutDiff => Some(CommunityMetric::NormalizedCut),
            _ => None,
        }
    }

    /// Whether evaluating the property requires a trained embedder.
    pub fn needs_embedder(self) -> bool {
        matches!(self, Property::ReverseKnnRank) || self.community_metric(false).is_some()
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Property::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown property '{s}'")))
    }
}

/// Settings shared by every property evaluation of a study.
#[derive(Debug, Clone, Copy)]
pub struct StudyContext<'a> {
    /// Needed for the embedding reverse-kNN rank and the community
    /// differences.
    pub embedder: Option<&'a EmbeddingModel>,
    /// Nearest neighbors forming a target's community.
    pub community_size: usize,
    /// `None` uses [`default_knn_k`].
    pub knn_k: Option<usize>,
    pub ncs_corrected: bool,
}

impl Default for StudyContext<'_> {
    fn default() -> Self {
        Self {
            embedder: None,
            community_size: 50,
            knn_k: None,
            ncs_corrected: false,
        }
    }
}

/// Distortion of flipping `(target, v)` for each candidate `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScores {
    pub target: usize,
    pub candidates: Vec<usize>,
    pub distortion: Vec<f64>,
}

/// Graph-space (Jaccard) distortion of every single flip `(t, v)`.
pub fn candidate_neighborhood_distortions(g: &Graph, t: usize, k: usize, accessible: &NodeSet) -> Result<TargetScores> {
    let edits = g.candidate_edits(t, accessible)?;
    let mut out = TargetScores {
        target: t,
        candidates: Vec::with_capacity(edits.len()),
        distortion: Vec::with_capacity(edits.len()),
    };
    for e in edits {
        out.candidates.push(e.other(t).expect("incident"));
        out.distortion.push(g.neighborhood_distortion(&g.apply_edit(&e)?, t, k)?);
    }
    Ok(out)
}

/// Embedding distortion of every single flip `(t, v)` under `model`.
pub fn candidate_embedding_distortions(
    model: &EmbeddingModel,
    g: &Graph,
    t: usize,
    k: usize,
    accessible: &NodeSet,
) -> Result<TargetScores> {
    let edits = g.candidate_edits(t, accessible)?;
    let mut out = TargetScores {
        target: t,
        candidates: Vec::with_capacity(edits.len()),
        distortion: Vec::with_capacity(edits.len()),
    };
    for e in edits {
        out.candidates.push(e.other(t).expect("incident"));
        out.distortion.push(distortion_between(model, g, &g.apply_edit(&e)?, t, k)?.value);
    }
    Ok(out)
}

/// One row of the study table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub property: String,
    pub mean_coefficient: f64,
    /// Sample standard deviation across targets (0 for a single target).
    pub std_coefficient: f64,
    /// Fisher combination of the per-target p-values.
    pub p_value: f64,
    pub targets: usize,
    pub per_target: Vec<(usize, CorrelationResult)>,
}

/// Values of `prop` for every candidate of `scores`.
pub fn property_values(g: &Graph, scores: &TargetScores, prop: Property, ctx: &StudyContext<'_>) -> Result<Vec<f64>> {
    let t = scores.target;
    let cands = &scores.candidates;
    match prop {
        Property::FeatureSimilarity => cands.iter().map(|&v| feature_similarity(g, t, v)).collect(),
        Property::Degree => cands.iter().map(|&v| Ok(g.degree(v) as f64)).collect(),
        Property::LocalClustering => cands.iter().map(|&v| local_clustering(g, v)).collect(),
        Property::ReverseTwoHopRank | Property::ReverseKnnRank => {
            let counts: Vec<f64> = if prop == Property::ReverseTwoHopRank {
                reverse_two_hop_counts(g).into_iter().map(|c| c as f64).collect()
            } else {
                let model = require_embedder(ctx, prop)?;
                let k = ctx.knn_k.unwrap_or_else(|| default_knn_k(g.node_count()));
                reverse_knn_counts(&model.embed(g)?, k).into_iter().map(|c| c as f64).collect()
            };
            let rank = descending_ranks(&counts);
            Ok(cands.iter().map(|&v| rank[v]).collect())
        }
        _ => {
            let metric = prop.community_metric(ctx.ncs_corrected).expect("community property");
            let model = require_embedder(ctx, prop)?;
            let s = embedding_community(&model.embed(g)?, t, ctx.community_size);
            let before = community_metric(g, &s, metric)?;
            cands
                .iter()
                .map(|&v| {
                    let g2 = g.apply_edit(&g.toggle_edit(t, v))?;
                    let s2 = embedding_community(&model.embed(&g2)?, t, ctx.community_size);
                    Ok(before - community_metric(&g2, &s2, metric)?)
                })
                .collect()
        }
    }
}

fn require_embedder<'a>(ctx: &StudyContext<'a>, prop: Property) -> Result<&'a EmbeddingModel> {
    ctx.embedder
        .ok_or_else(|| Error::input(format!("property {prop} needs an embedder")))
}

/// Per-property Spearman correlation between property values and
/// distortion, summarized across targets. Targets with fewer than three
/// candidates, or with a constant list, are skipped.
pub fn correlation_study(g: &Graph, targets: &[TargetScores], properties: &[Property], ctx: &StudyContext<'_>) -> Result<Vec<StudyRow>> {
    let mut rows = Vec::with_capacity(properties.len());
    for &prop in properties {
        if prop.needs_embedder() && ctx.embedder.is_none() {
            return Err(Error::input(format!("property {prop} needs an embedder")));
        }
        let mut per_target = Vec::new();
        for ts in targets {
            if ts.candidates.len() < 3 {
                warn!("target {}: {} candidates; skipped", ts.target, ts.candidates.len());
                continue;
            }
            if ts.candidates.len() != ts.distortion.len() {
                return Err(Error::input(format!("target {}: candidate/score length mismatch", ts.target)));
            }
            let values = property_values(g, ts, prop, ctx)?;
            match spearman(&values, &ts.distortion) {
                Ok(r) => per_target.push((ts.target, r)),
                Err(Error::Undefined(_)) => warn!("target {}: {prop} or distortion is constant; skipped", ts.target),
                Err(e) => return Err(e),
            }
        }
        if per_target.is_empty() {
            warn!("property {prop}: no usable targets");
            continue;
        }
        let coeffs: Vec<f64> = per_target.iter().map(|(_, r)| r.coefficient).collect();
        let m = coeffs.len() as f64;
        let mean = coeffs.iter().sum::<f64>() / m;
        let std = if coeffs.len() > 1 {
            (coeffs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        } else {
            0.0
        };
        let ps: Vec<f64> = per_target.iter().map(|(_, r)| r.p_value).collect();
        rows.push(StudyRow {
            property: prop.name().to_string(),
            mean_coefficient: mean,
            std_coefficient: std,
            p_value: fisher_combined(&ps)?,
            targets: per_target.len(),
            per_target,
        });
    }
    Ok(rows)
}

/// A graph on which flips to high-clustering candidates cause the largest
/// neighborhood distortion around target 0.
///
/// Target 0 sits on a short path `0-1-2`; leaves hang off node 1 (clustering
/// 0, already inside the target's 2-hop ball), isolated chains contribute a
/// few new nodes (clustering 0), and several disjoint cliques of increasing
/// size contribute many new nodes (clustering 1).
pub fn clustering_fixture() -> Graph {
    let mut edges = vec![(0, 1), (1, 2)];
    let mut next = 3;
    // Leaves on node 1.
    for _ in 0..6 {
        edges.push((1, next));
        next += 1;
    }
    // Paths of length 2: a-b-c, clustering 0.
    for _ in 0..4 {
        edges.push((next, next + 1));
        edges.push((next + 1, next + 2));
        next += 3;
    }
    // Cliques of sizes 4..=7.
    for size in 4..=7 {
        let ids: Vec<usize> = (next..next + size).collect();
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                edges.push((a, b));
            }
        }
        next += size;
    }
    Graph::structural(next, &edges).expect("valid fixture")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::Backend;
    use crate::graph::tests::random_graph;
    use crate::numerics::DenseMatrix;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn with_features(g: &Graph, rows: Vec<Vec<f64>>) -> Graph {
        let x = DenseMatrix::from_rows(&rows).unwrap();
        Graph::from_edges(g.node_count(), &g.edges(), x, None).unwrap()
    }

    #[test]
    fn feature_jaccard_extremes() {
        let g = with_features(
            &Graph::structural(3, &[(0, 1)]).unwrap(),
            vec![vec![1.0, 0.0, 1.0, 0.0], vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]],
        );
        assert_eq!(feature_similarity(&g, 0, 1).unwrap(), 1.0);
        assert_eq!(feature_similarity(&g, 0, 2).unwrap(), 0.0);
    }

    #[test]
    fn clustering_triangle_and_star() {
        let tri = Graph::structural(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(local_clustering(&tri, 0).unwrap(), 1.0);
        let star = Graph::structural(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        assert_eq!(local_clustering(&star, 0).unwrap(), 0.0);
        assert_eq!(local_clustering(&star, 1).unwrap(), 0.0);
    }

    #[test]
    fn clustering_matches_triangle_count_oracle() {
        let g = random_graph(15, 0.35, 4);
        for v in 0..15 {
            // Triangles through v counted over all node triples.
            let mut tri = 0;
            for a in 0..15 {
                for b in a + 1..15 {
                    if a != v && b != v && g.has_edge(v, a) && g.has_edge(v, b) && g.has_edge(a, b) {
                        tri += 1;
                    }
                }
            }
            let d = g.degree(v);
            let expect = if d < 2 { 0.0 } else { tri as f64 / (d * (d - 1) / 2) as f64 };
            assert!((local_clustering(&g, v).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn reverse_counts_match_brute_force() {
        let g = random_graph(14, 0.2, 8);
        let fast = reverse_two_hop_counts(&g);
        for v in 0..14 {
            let slow = (0..14)
                .filter(|&u| u != v && g.k_hop_neighborhood(u, 2).unwrap().contains(v))
                .count();
            assert_eq!(fast[v], slow);
        }
        let z = EmbeddingModel::new(Backend::Gin, 14, 2, 4, 3).embed(&g).unwrap();
        let counts = reverse_knn_counts(&z, 3);
        assert_eq!(counts.iter().sum::<usize>(), 14 * 3);
        assert_eq!(default_knn_k(14), 13);
        assert_eq!(default_knn_k(1000), 100);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
        assert_eq!(descending_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![3.0, 1.5, 1.5, 4.0]);
        let r = PropertyRanking::new("x", vec![7, 3, 9], vec![0.5, 0.9, 0.5]).unwrap();
        assert_eq!(r.order, vec![3, 7, 9]);
    }

    /// Brute-force edge counting over all node pairs.
    fn oracle_counts(g: &Graph, s: &NodeSet) -> (usize, usize) {
        let (mut m, mut c) = (0, 0);
        for (u, v) in g.edges() {
            match (s.contains(u), s.contains(v)) {
                (true, true) => m += 1,
                (true, false) | (false, true) => c += 1,
                _ => {}
            }
        }
        (m, c)
    }

    #[test]
    fn community_metrics_match_edge_counting() {
        let g = crate::sbm::generate(&crate::sbm::SbmSpec::two_blocks(12, 0.6, 0.1), 3).unwrap();
        let s = NodeSet::new((0..6).collect());
        let (m, c) = oracle_counts(&g, &s);
        let (m, c, e) = (m as f64, c as f64, g.edge_count() as f64);
        let deg_sum: usize = (0..6).map(|v| g.degree(v)).sum();
        let cases = [
            (CommunityMetric::EdgeExpansion, c / 6.0),
            (CommunityMetric::Conductance, c / (2.0 * m + c)),
            (CommunityMetric::Volume, deg_sum as f64),
            (CommunityMetric::NormalizedCut, c * (1.0 / (2.0 * m + c) + 1.0 / (2.0 * (e + m) - c))),
            (CommunityMetric::NormalizedCutCorrected, c * (1.0 / (2.0 * m + c) + 1.0 / (2.0 * (e - m) - c))),
        ];
        for (metric, expect) in cases {
            assert!((community_metric(&g, &s, metric).unwrap() - expect).abs() < 1e-12, "{metric:?}");
        }
    }

    #[test]
    fn community_edge_cases() {
        // Two disjoint triangles: a whole component has no cut.
        let g = Graph::structural(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        let comp = NodeSet::new(vec![0, 1, 2]);
        assert_eq!(community_metric(&g, &comp, CommunityMetric::EdgeExpansion).unwrap(), 0.0);
        assert_eq!(community_metric(&g, &comp, CommunityMetric::Conductance).unwrap(), 0.0);
        let single = NodeSet::new(vec![0]);
        assert_eq!(community_metric(&g, &single, CommunityMetric::Volume).unwrap(), 2.0);
        assert_eq!(community_metric(&g, &single, CommunityMetric::Conductance).unwrap(), 1.0);
        let g2 = Graph::structural(3, &[(1, 2)]).unwrap();
        assert_eq!(community_metric(&g2, &NodeSet::new(vec![0]), CommunityMetric::Conductance).unwrap(), 0.0);
        assert!(community_metric(&g, &NodeSet::new(vec![]), CommunityMetric::Volume).is_err());
        assert!(community_metric(&g, &NodeSet::new((0..6).collect()), CommunityMetric::Volume).is_err());
    }

    #[test]
    fn spearman_hand_cases() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&xs, &xs).unwrap().coefficient - 1.0).abs() < 1e-12);
        let rev = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&xs, &rev).unwrap().coefficient + 1.0).abs() < 1e-12);
        // Rank-difference formula: 1 − 6·Σd² / (n(n² − 1)) with Σd² = 4.
        let ys = [2.0, 1.0, 4.0, 3.0, 5.0];
        let expect = 1.0 - 6.0 * 4.0 / (5.0 * 24.0);
        let r = spearman(&xs, &ys).unwrap();
        assert!((r.coefficient - expect).abs() < 1e-12);
        assert!((r.coefficient - 0.8).abs() < 1e-12);
        // Σd² = 4 + 1 + 1 = 6 gives 0.7.
        let r = spearman(&xs, &[3.0, 1.0, 2.0, 4.0, 5.0]).unwrap();
        assert!((r.coefficient - (1.0 - 6.0 * 6.0 / 120.0)).abs() < 1e-12);
        assert!((r.coefficient - 0.7).abs() < 1e-12);
        assert!(matches!(spearman(&xs, &[1.0; 5]), Err(Error::Undefined(_))));
        assert!(spearman(&xs[..2], &ys[..2]).is_err());
    }

    #[test]
    fn spearman_p_value_against_table() {
        // r = 0.8, n = 5: t = 0.8·sqrt(3/0.36) = 2.3094, two-sided p ≈ 0.1041.
        let r = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((r.p_value - 0.1041).abs() < 5e-4, "{}", r.p_value);
    }

    #[test]
    fn exact_permutation_p_value() {
        // For n = 5 exactly 10 of 120 orderings reach |r| >= 0.8.
        let r = spearman_exact(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        let mut hits = 0;
        let base = [1.0, 2.0, 3.0, 4.0, 5.0];
        let perms = permutations(&base);
        for p in &perms {
            if spearman(&base, p).unwrap().coefficient.abs() >= 0.8 - 1e-12 {
                hits += 1;
            }
        }
        assert_eq!(perms.len(), 120);
        assert!((r.p_value - hits as f64 / 120.0).abs() < 1e-15);
        assert!(spearman_exact(&[0.0; 11], &[0.0; 11]).is_err());
    }

    fn permutations(xs: &[f64]) -> Vec<Vec<f64>> {
        if xs.len() <= 1 {
            return vec![xs.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..xs.len() {
            let mut rest = xs.to_vec();
            let head = rest.remove(i);
            for mut p in permutations(&rest) {
                p.insert(0, head);
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn fisher_combination() {
        // Single p: statistic −2 ln p on 2 dof has survival exp(ln p) = p.
        assert!((fisher_combined(&[0.3]).unwrap() - 0.3).abs() < 1e-12);
        assert!(fisher_combined(&[0.01, 0.02, 0.03]).unwrap() < 0.01);
        assert!(fisher_combined(&[]).is_err());
    }

    #[test]
    fn study_identity_and_independent_property() {
        let g = random_graph(101, 0.08, 2);
        let scores = candidate_neighborhood_distortions(&g, 0, 2, &g.all_but(0)).unwrap();
        let r = spearman(&scores.distortion, &scores.distortion).unwrap();
        assert!((r.coefficient - 1.0).abs() < 1e-12);
        let mut rng = seeded(9);
        let noise: Vec<f64> = (0..100).map(|_| rng.gen::<f64>()).collect();
        let r = spearman(&noise, &scores.distortion).unwrap();
        assert!(r.coefficient.abs() < 0.25, "{}", r.coefficient);
    }

    #[test]
    fn engineered_fixture_gives_positive_clustering_correlation() {
        let g = clustering_fixture();
        let scores = candidate_neighborhood_distortions(&g, 0, 2, &g.all_but(0)).unwrap();
        let rows = correlation_study(&g, &[scores], &[Property::LocalClustering, Property::Degree], &StudyContext::default()).unwrap();
        assert_eq!(rows[0].property, "local_clustering");
        assert!(rows[0].mean_coefficient > 0.0 && rows[0].p_value < 0.05, "{:?}", rows[0]);
    }

    #[test]
    fn embedding_properties_require_an_embedder() {
        let g = clustering_fixture();
        let scores = candidate_neighborhood_distortions(&g, 0, 2, &g.all_but(0)).unwrap();
        assert!(correlation_study(&g, std::slice::from_ref(&scores), &[Property::VolumeDiff], &StudyContext::default()).is_err());
        let model = EmbeddingModel::new(Backend::Gin, g.node_count(), 2, 4, 1);
        let ctx = StudyContext {
            embedder: Some(&model),
            community_size: 10,
            ..StudyContext::default()
        };
        let rows = correlation_study(&g, &[scores], &Property::ALL, &ctx).unwrap();
        for r in &rows {
            assert!(r.mean_coefficient.abs() <= 1.0 && (0.0..=1.0).contains(&r.p_value));
        }
    }

    #[test]
    fn property_names_round_trip() {
        for p in Property::ALL {
            assert_eq!(p.name().parse::<Property>().unwrap(), p);
        }
    }

    proptest! {
        #[test]
        fn spearman_invariant_under_monotone_maps(xs in proptest::collection::vec(-50.0f64..50.0, 3..30), seed in 0u64..1000) {
            let mut rng = seeded(seed);
            let ys: Vec<f64> = xs.iter().map(|x| x + rng.gen_range(-30.0..30.0)).collect();
            let (Ok(a), Ok(b)) = (spearman(&xs, &ys), spearman(&xs.iter().map(|x| x.exp() ).collect::<Vec<_>>(), &ys.iter().map(|y| y * 3.0 + 1.0).collect::<Vec<_>>())) else {
                return Ok(());
            };
            prop_assert!((a.coefficient - b.coefficient).abs() < 1e-9);
        }

        #[test]
        fn community_metrics_invariant_under_relabeling(seed in 0u64..500, size in 1usize..9) {
            let mut rng = seeded(seed);
            let g = random_graph(10, 0.4, seed);
            let mut perm: Vec<usize> = (0..10).collect();
            use rand::seq::SliceRandom;
            perm.shuffle(&mut rng);
            let edges: Vec<(usize, usize)> = g.edges().into_iter().map(|(u, v)| (perm[u], perm[v])).collect();
            let h = Graph::structural(10, &edges).unwrap();
            let s = NodeSet::new((0..size).collect());
            let s2 = NodeSet::new((0..size).map(|v| perm[v]).collect());
            for metric in [CommunityMetric::EdgeExpansion, CommunityMetric::Conductance, CommunityMetric::Volume, CommunityMetric::NormalizedCut, CommunityMetric::NormalizedCutCorrected] {
                let a = community_metric(&g, &s, metric).unwrap();
                let b = community_metric(&h, &s2, metric).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
                if metric == CommunityMetric::Conductance {
                    prop_assert!((0.0..=1.0).contains(&a));
                }
                if metric == CommunityMetric::EdgeExpansion {
                    prop_assert!(a >= 0.0);
                }
            }
            let deg: usize = (0..size).map(|v| g.degree(v)).sum();
            prop_assert_eq!(community_metric(&g, &s, CommunityMetric::Volume).unwrap(), deg as f64);
        }
    }
}
