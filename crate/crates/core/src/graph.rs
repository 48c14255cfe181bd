//! Undirected attributed graphs, k-hop neighborhoods, single-edge flips and
//! graph-space neighborhood distortion.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Whether an edit inserts or removes an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditSign {
    Add,
    Delete,
}

impl EditSign {
    /// `+1` for additions, `-1` for deletions.
    pub fn factor(self) -> f64 {
        match self {
            EditSign::Add => 1.0,
            EditSign::Delete => -1.0,
        }
    }
}

/// A single undirected edge flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeEdit {
    pub u: usize,
    pub v: usize,
    pub sign: EditSign,
}

impl EdgeEdit {
    pub fn add(u: usize, v: usize) -> Self {
        Self { u, v, sign: EditSign::Add }
    }

    pub fn delete(u: usize, v: usize) -> Self {
        Self {
            u,
            v,
            sign: EditSign::Delete,
        }
    }

    /// The edit that undoes this one.
    pub fn inverse(&self) -> Self {
        let sign = match self.sign {
            EditSign::Add => EditSign::Delete,
            EditSign::Delete => EditSign::Add,
        };
        Self { sign, ..*self }
    }

    /// The endpoint that is not `t`, if `t` is one of the endpoints.
    pub fn other(&self, t: usize) -> Option<usize> {
        if self.u == t {
            Some(self.v)
        } else if self.v == t {
            Some(self.u)
        } else {
            None
        }
    }

    fn pair(&self) -> (usize, usize) {
        (self.u.min(self.v), self.u.max(self.v))
    }
}

impl fmt::Display for EdgeEdit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.sign {
            EditSign::Add => '+',
            EditSign::Delete => '-',
        };
        write!(f, "{s}({},{})", self.u, self.v)
    }
}

/// Sorted set of node ids without duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct NodeSet(Vec<usize>);

impl NodeSet {
    pub fn new(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Self(ids)
    }

    pub fn from_sorted_unchecked(ids: Vec<usize>) -> Self {
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        Self(ids)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn without(&self, v: usize) -> NodeSet {
        NodeSet(self.0.iter().copied().filter(|&x| x != v).collect())
    }

    /// Size of the intersection, by merge.
    pub fn intersection_len(&self, other: &NodeSet) -> usize {
        sorted_intersection_len(&self.0, &other.0)
    }

    pub fn union_len(&self, other: &NodeSet) -> usize {
        self.len() + other.len() - self.intersection_len(other)
    }

    /// Jaccard distance `1 - |A ∩ B| / |A ∪ B|`; zero for two empty sets.
    pub fn jaccard_distance(&self, other: &NodeSet) -> f64 {
        let union = self.union_len(other);
        if union == 0 {
            return 0.0;
        }
        1.0 - self.intersection_len(other) as f64 / union as f64
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

pub(crate) fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

impl FromIterator<usize> for NodeSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        NodeSet::new(iter.into_iter().collect())
    }
}

/// Simple undirected graph with dense node ids, per-node features and
/// optional class labels.
///
/// Features and labels are shared between a graph and all graphs derived from
/// it by edge edits.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
    features: Arc<DenseMatrix>,
    labels: Option<Arc<Vec<usize>>>,
    num_classes: usize,
}

impl Graph {
    /// Builds a graph from an edge list. Reversed duplicates are merged;
    /// self-loops and out-of-range ids are rejected.
    pub fn from_edges(
        node_count: usize,
        edges: &[(usize, usize)],
        features: DenseMatrix,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if features.rows() != node_count {
            return Err(Error::input(format!(
                "{} feature rows for {node_count} nodes",
                features.rows()
            )));
        }
        let mut adjacency = vec![Vec::new(); node_count];
        for &(u, v) in edges {
            if u >= node_count || v >= node_count {
                return Err(Error::input(format!(
                    "edge ({u},{v}) out of range for {node_count} nodes"
                )));
            }
            if u == v {
                return Err(Error::input(format!("self-loop on node {u}")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
            nbrs.dedup();
        }
        let edge_count = adjacency.iter().map(Vec::len).sum::<usize>() / 2;
        let num_classes = match &labels {
            Some(l) => {
                if l.len() != node_count {
                    return Err(Error::input(format!(
                        "{} labels for {node_count} nodes",
                        l.len()
                    )));
                }
                l.iter().max().map_or(0, |m| m + 1)
            }
            None => 0,
        };
        Ok(Self {
            adjacency,
            edge_count,
            features: Arc::new(features),
            labels: labels.map(Arc::new),
            num_classes,
        })
    }

    /// Graph without node attributes: a single constant feature per node.
    pub fn structural(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::from_edges(
            node_count,
            edges,
            DenseMatrix::from_fn(node_count, 1, |_, _| 1.0),
            None,
        )
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref().map(Vec::as_slice)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Returns the same topology with labels replaced.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.node_count() {
            return Err(Error::input("label count mismatch"));
        }
        let mut g = self.clone();
        g.num_classes = labels.iter().max().map_or(0, |m| m + 1);
        g.labels = Some(Arc::new(labels));
        Ok(g)
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.node_count() && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// All edges as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (u, nbrs) in self.adjacency.iter().enumerate() {
            out.extend(nbrs.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    pub fn check_node(&self, v: usize) -> Result<()> {
        if v >= self.node_count() {
            return Err(Error::input(format!(
                "node {v} out of range for {} nodes",
                self.node_count()
            )));
        }
        Ok(())
    }

    /// All nodes at shortest-path distance at most `k` from `v`, including `v`.
    pub fn k_hop_neighborhood(&self, v: usize, k: usize) -> Result<NodeSet> {
        self.check_node(v)?;
        if k == 0 {
            return Err(Error::input("k must be at least 1"));
        }
        Ok(self.bfs_within(v, k))
    }

    fn bfs_within(&self, v: usize, k: usize) -> NodeSet {
        let n = self.node_count();
        let mut dist = vec![usize::MAX; n];
        dist[v] = 0;
        let mut queue = VecDeque::from([v]);
        let mut seen = vec![v];
        while let Some(u) = queue.pop_front() {
            if dist[u] == k {
                continue;
            }
            for &w in &self.adjacency[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    seen.push(w);
                    queue.push_back(w);
                }
            }
        }
        NodeSet::new(seen)
    }

    /// Checks that `e` can be applied to this graph.
    pub fn validate_edit(&self, e: &EdgeEdit) -> Result<()> {
        self.check_node(e.u)?;
        self.check_node(e.v)?;
        if e.u == e.v {
            return Err(Error::Contract(format!("edit {e} is a self-loop")));
        }
        match (e.sign, self.has_edge(e.u, e.v)) {
            (EditSign::Add, true) => Err(Error::Contract(format!("edit {e}: edge already present"))),
            (EditSign::Delete, false) => Err(Error::Contract(format!("edit {e}: edge absent"))),
            _ => Ok(()),
        }
    }

    /// Returns a new graph with `e` applied; `self` is unchanged.
    pub fn apply_edit(&self, e: &EdgeEdit) -> Result<Graph> {
        let mut g = self.clone();
        g.apply_edit_in_place(e)?;
        Ok(g)
    }

    pub fn apply_edits(&self, edits: &[EdgeEdit]) -> Result<Graph> {
        let mut g = self.clone();
        for e in edits {
            g.apply_edit_in_place(e)?;
        }
        Ok(g)
    }

    pub(crate) fn apply_edit_in_place(&mut self, e: &EdgeEdit) -> Result<()> {
        self.validate_edit(e)?;
        match e.sign {
            EditSign::Add => {
                for (a, b) in [(e.u, e.v), (e.v, e.u)] {
                    let list = &mut self.adjacency[a];
                    let pos = list.binary_search(&b).unwrap_err();
                    list.insert(pos, b);
                }
                self.edge_count += 1;
            }
            EditSign::Delete => {
                for (a, b) in [(e.u, e.v), (e.v, e.u)] {
                    let list = &mut self.adjacency[a];
                    let pos = list.binary_search(&b).expect("validated edge");
                    list.remove(pos);
                }
                self.edge_count -= 1;
            }
        }
        Ok(())
    }

    /// Removes the given pairs where present (used by victims that hold out
    /// edges from message passing).
    pub fn without_pairs(&self, pairs: &[(usize, usize)]) -> Graph {
        let mut g = self.clone();
        for &(u, v) in pairs {
            if g.has_edge(u, v) {
                g.apply_edit_in_place(&EdgeEdit::delete(u, v))
                    .expect("edge checked present");
            }
        }
        g
    }

    /// Number of undirected edge flips separating `self` and `other`
    /// (half the L1 distance of the adjacency matrices).
    pub fn graph_distance(&self, other: &Graph) -> Result<usize> {
        if self.node_count() != other.node_count() {
            return Err(Error::input(format!(
                "node count mismatch: {} vs {}",
                self.node_count(),
                other.node_count()
            )));
        }
        let mut diff = 0;
        for (a, b) in self.adjacency.iter().zip(&other.adjacency) {
            diff += a.len() + b.len() - 2 * sorted_intersection_len(a, b);
        }
        Ok(diff / 2)
    }

    /// Jaccard distance between the k-hop neighborhoods of `v` in `self` and
    /// in `perturbed`.
    pub fn neighborhood_distortion(&self, perturbed: &Graph, v: usize, k: usize) -> Result<f64> {
        if self.node_count() != perturbed.node_count() {
            return Err(Error::input("node count mismatch"));
        }
        let a = self.k_hop_neighborhood(v, k)?;
        let b = perturbed.k_hop_neighborhood(v, k)?;
        Ok(a.jaccard_distance(&b))
    }

    /// Connected components, each sorted ascending, ordered by smallest id.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            comp[s] = id;
            let mut members = vec![s];
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &w in &self.adjacency[u] {
                    if comp[w] == usize::MAX {
                        comp[w] = id;
                        members.push(w);
                        stack.push(w);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Induced subgraph on `nodes` (ascending), re-densified in that order.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Graph> {
        let mut new_id = vec![usize::MAX; self.node_count()];
        for (i, &v) in nodes.iter().enumerate() {
            self.check_node(v)?;
            new_id[v] = i;
        }
        let mut edges = Vec::new();
        for &u in nodes {
            for &w in &self.adjacency[u] {
                if u < w && new_id[w] != usize::MAX {
                    edges.push((new_id[u], new_id[w]));
                }
            }
        }
        let feats = DenseMatrix::from_fn(nodes.len(), self.feature_dim(), |r, c| {
            self.features.get(nodes[r], c)
        });
        let labels = self
            .labels()
            .map(|l| nodes.iter().map(|&v| l[v]).collect::<Vec<_>>());
        let mut g = Graph::from_edges(nodes.len(), &edges, feats, labels)?;
        // Keep the class count of the parent even if a class vanished.
        if g.labels.is_some() {
            g.num_classes = self.num_classes;
        }
        Ok(g)
    }

    /// The largest connected component (ties: the one containing the smallest
    /// id) plus the ascending list of original ids, so that `mapping[new] = old`.
    pub fn largest_connected_component(&self) -> Result<(Graph, Vec<usize>)> {
        if self.node_count() == 0 {
            return Err(Error::input("empty graph has no components"));
        }
        let comps = self.connected_components();
        let best = comps
            .into_iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
            .map(|(_, c)| c)
            .expect("non-empty graph");
        let g = self.induced_subgraph(&best)?;
        Ok((g, best))
    }

    /// One edit per accessible node other than `t`: a deletion if the edge
    /// `(t, v)` exists, an addition otherwise. Ordered by node id.
    pub fn candidate_edits(&self, t: usize, accessible: &NodeSet) -> Result<Vec<EdgeEdit>> {
        self.check_node(t)?;
        let mut out = Vec::with_capacity(accessible.len());
        for v in accessible.iter() {
            if v == t {
                continue;
            }
            self.check_node(v)?;
            out.push(self.toggle_edit(t, v));
        }
        if out.is_empty() {
            return Err(Error::NoActions(t));
        }
        Ok(out)
    }

    /// The edit that flips the pair `(t, v)` in this graph.
    pub fn toggle_edit(&self, t: usize, v: usize) -> EdgeEdit {
        if self.has_edge(t, v) {
            EdgeEdit::delete(t, v)
        } else {
            EdgeEdit::add(t, v)
        }
    }

    /// Every node except `t`.
    pub fn all_but(&self, t: usize) -> NodeSet {
        NodeSet::from_sorted_unchecked((0..self.node_count()).filter(|&v| v != t).collect())
    }
}

/// Edits that touch the same unordered pair twice cancel out; this returns
/// the number of distinct pairs flipped an odd number of times.
pub fn net_flip_count(edits: &[EdgeEdit]) -> usize {
    let mut pairs: Vec<(usize, usize)> = edits.iter().map(EdgeEdit::pair).collect();
    pairs.sort_unstable();
    let mut count = 0;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        while j < pairs.len() && pairs[j] == pairs[i] {
            j += 1;
        }
        if (j - i) % 2 == 1 {
            count += 1;
        }
        i = j;
    }
    count
}
