//! Plain-text graph, feature, label and set-cover files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::DenseMatrix;
use crate::oracle::SetCoverInstance;

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// `u<TAB>v` per line, 0-based. Blank lines and `#` comments are skipped.
pub fn parse_edge_list(text: &str, origin: &Path) -> Result<Vec<(usize, usize)>> {
    content_lines(text)
        .map(|(no, line)| {
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                tok.ok_or_else(|| Error::format(origin, format!("line {no}: expected two ids")))?
                    .parse()
                    .map_err(|_| Error::format(origin, format!("line {no}: bad node id")))
            };
            let u = parse(it.next())?;
            let v = parse(it.next())?;
            if it.next().is_some() {
                return Err(Error::format(origin, format!("line {no}: trailing tokens")));
            }
            if u == v {
                return Err(Error::format(origin, format!("line {no}: self-loop on {u}")));
            }
            Ok((u, v))
        })
        .collect()
}

pub fn parse_features(text: &str, origin: &Path) -> Result<DenseMatrix> {
    let rows: Vec<Vec<f64>> = content_lines(text)
        .map(|(no, line)| {
            line.split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::format(origin, format!("line {no}: bad feature value {t:?}")))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    if let Some(first) = rows.first() {
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != first.len()) {
            return Err(Error::format(origin, format!("feature row {i} has inconsistent dimension")));
        }
    }
    DenseMatrix::from_rows(&rows).map_err(|e| Error::format(origin, e.to_string()))
}

pub fn parse_labels(text: &str, origin: &Path) -> Result<Vec<usize>> {
    content_lines(text)
        .map(|(no, line)| {
            line.parse()
                .map_err(|_| Error::format(origin, format!("line {no}: bad label {line:?}")))
        })
        .collect()
}

/// Loads a graph. The node count is the feature-row count when features are
/// given, otherwise one more than the largest id in the edge list.
pub fn load_graph(edges: &Path, features: Option<&Path>, labels: Option<&Path>) -> Result<Graph> {
    let edge_list = parse_edge_list(&read_text(edges)?, edges)?;
    let x = features.map(|p| parse_features(&read_text(p)?, p)).transpose()?;
    let y = labels.map(|p| parse_labels(&read_text(p)?, p)).transpose()?;
    let max_id = edge_list.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    let n = match (&x, &y) {
        (Some(x), _) => x.rows(),
        (None, Some(y)) => y.len(),
        (None, None) => max_id,
    };
    if max_id > n {
        return Err(Error::format(edges, format!("node id {} exceeds node count {n}", max_id - 1)));
    }
    if let (Some(x), Some(y)) = (&x, &y) {
        if x.rows() != y.len() {
            return Err(Error::input(format!("{} feature rows but {} labels", x.rows(), y.len())));
        }
    }
    let x = x.unwrap_or_else(|| DenseMatrix::from_fn(n, 1, |_, _| 1.0));
    Graph::from_edges(n, &edge_list, x, y)
}

pub fn format_edge_list(g: &Graph) -> String {
    let mut s = String::new();
    for (u, v) in g.edges() {
        let _ = writeln!(s, "{u}\t{v}");
    }
    s
}

pub fn format_features(x: &DenseMatrix) -> String {
    let mut s = String::new();
    for r in 0..x.rows() {
        let row: Vec<String> = x.row(r).iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

/// Writes `edges.tsv`, `features.txt` and, if present, `labels.txt` into `dir`.
pub fn save_graph(g: &Graph, dir: &Path) -> Result<()> {
    write_text(&dir.join("edges.tsv"), &format_edge_list(g))?;
    write_text(&dir.join("features.txt"), &format_features(g.features()))?;
    if let Some(labels) = g.labels() {
        let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
        write_text(&dir.join("labels.txt"), &text)?;
    }
    Ok(())
}

/// First line `n m b`, then `m` lines of space-separated 0-based element ids.
pub fn parse_set_cover(text: &str, origin: &Path) -> Result<SetCoverInstance> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| Error::format(origin, "empty set-cover file"))?;
    let nums: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::format(origin, "bad header")))
        .collect::<Result<_>>()?;
    let [n, m, b] = nums[..] else {
        return Err(Error::format(origin, "header must be `n m b`"));
    };
    let mut subsets = Vec::with_capacity(m);
    for (no, line) in lines.take(m) {
        let set: Vec<usize> = line
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::format(origin, format!("line {}: bad element", no + 1)))
            })
            .collect::<Result<_>>()?;
        subsets.push(set);
    }
    if subsets.len() != m {
        return Err(Error::format(origin, format!("expected {m} subsets, found {}", subsets.len())));
    }
    SetCoverInstance::new(n, subsets, b).map_err(|e| Error::format(origin, e.to_string()))
}

pub fn format_set_cover(inst: &SetCoverInstance) -> String {
    let mut s = format!("{} {} {}\n", inst.universe_size, inst.subsets.len(), inst.budget);
    for set in &inst.subsets {
        let ids: Vec<String> = set.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "{}", ids.join(" "));
    }
    s
}

pub fn load_set_cover(path: &Path) -> Result<SetCoverInstance> {
    parse_set_cover(&read_text(path)?, path)
}
