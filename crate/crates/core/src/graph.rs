//! Immutable undirected simple graphs in compressed adjacency form.
//!
//! Vertices are dense ids `0..n`. Each vertex keeps the external token it was
//! read with, so results can be reported in the caller's vocabulary after
//! any amount of relabelling by [`Graph::induced_subgraph`].

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VertexId = u32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<VertexId>,
    labels: Vec<String>,
}

/// Degree summary used as graph-level features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub avg_degree: f64,
    pub max_degree: u32,
}

impl Graph {
    /// Graph on `n` isolated vertices labelled by their ids.
    pub fn empty(n: usize) -> Self {
        Self {
            offsets: vec![0; n + 1],
            targets: Vec::new(),
            labels: (0..n).map(|v| v.to_string()).collect(),
        }
    }

    /// Builds a graph from an edge list over `0..n`. Self-loops are dropped
    /// and parallel edges collapsed.
    pub fn from_edges(n: usize, edges: &[(VertexId, VertexId)]) -> Result<Self> {
        let labels = (0..n).map(|v| v.to_string()).collect();
        Self::from_edges_labeled(labels, edges)
    }

    pub(crate) fn from_edges_labeled(
        labels: Vec<String>,
        edges: &[(VertexId, VertexId)],
    ) -> Result<Self> {
        let n = labels.len();
        if n > VertexId::MAX as usize {
            return Err(Error::Contract(format!("{n} vertices overflow the id type")));
        }
        let mut adj: Vec<Vec<VertexId>> = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::Contract(format!(
                    "edge ({u}, {v}) out of range for {n} vertices"
                )));
            }
            if u == v {
                continue;
            }
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for mut list in adj {
            list.sort_unstable();
            list.dedup();
            targets.extend_from_slice(&list);
            offsets.push(targets.len());
        }
        Ok(Self {
            offsets,
            targets,
            labels,
        })
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    /// Sorted neighbours of `v`.
    #[inline]
    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        #[cfg(test)]
        access_counter::bump();
        let v = v as usize;
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: VertexId) -> usize {
        let v = v as usize;
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        let (a, b) = if self.degree(u) <= self.degree(v) {
            (u, v)
        } else {
            (v, u)
        };
        self.neighbors(a).binary_search(&b).is_ok()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        0..self.vertex_count() as VertexId
    }

    /// Edges with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.vertices().flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    pub fn label(&self, v: VertexId) -> &str {
        &self.labels[v as usize]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn stats(&self) -> GraphStats {
        let n = self.vertex_count();
        if n == 0 {
            return GraphStats {
                avg_degree: 0.0,
                max_degree: 0,
            };
        }
        let max_degree = self.vertices().map(|v| self.degree(v)).max().unwrap_or(0) as u32;
        GraphStats {
            avg_degree: self.targets.len() as f64 / n as f64,
            max_degree,
        }
    }

    /// Subgraph induced by `keep`. Surviving vertices are renumbered in
    /// ascending order of their old ids and keep their labels.
    pub fn induced_subgraph(&self, keep: &[VertexId]) -> Result<Self> {
        let n = self.vertex_count();
        let mut kept: Vec<VertexId> = keep.to_vec();
        kept.sort_unstable();
        kept.dedup();
        if let Some(&bad) = kept.iter().find(|&&v| v as usize >= n) {
            return Err(Error::Contract(format!(
                "vertex {bad} out of range for {n} vertices"
            )));
        }
        let mut remap = vec![VertexId::MAX; n];
        for (new, &old) in kept.iter().enumerate() {
            remap[old as usize] = new as VertexId;
        }
        let mut offsets = Vec::with_capacity(kept.len() + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for &old in &kept {
            // old neighbour lists are sorted and remap is monotone, so the
            // filtered list stays sorted
            targets.extend(
                self.neighbors(old)
                    .iter()
                    .map(|&w| remap[w as usize])
                    .filter(|&w| w != VertexId::MAX),
            );
            offsets.push(targets.len());
        }
        let labels = kept.iter().map(|&v| self.labels[v as usize].clone()).collect();
        Ok(Self {
            offsets,
            targets,
            labels,
        })
    }

    /// Writes the graph as an edge list using the original labels.
    ///
    /// Each vertex `u` emits its edges to lower-numbered neighbours with `u`
    /// as the first token; a vertex with no such neighbour is introduced by a
    /// self-loop line. Reloading therefore reproduces the same numbering.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for u in self.vertices() {
            let lower: Vec<VertexId> = self
                .neighbors(u)
                .iter()
                .copied()
                .take_while(|&v| v < u)
                .collect();
            if lower.is_empty() {
                writeln!(out, "{} {}", self.label(u), self.label(u))?;
            }
            for v in lower {
                writeln!(out, "{} {}", self.label(u), self.label(v))?;
            }
        }
        Ok(())
    }

    pub fn save_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_edge_list(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Reads a whitespace-separated edge list. Lines starting with `#` or `%`
/// are comments; vertex tokens are arbitrary strings numbered by first
/// appearance.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(BufReader::new(file), path)
}

pub fn parse_edge_list<R: BufRead>(reader: R, path: &Path) -> Result<Graph> {
    let mut ids: HashMap<String, VertexId> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut edges = Vec::new();
    let mut intern = |tok: &str, labels: &mut Vec<String>| -> VertexId {
        if let Some(&id) = ids.get(tok) {
            return id;
        }
        let id = labels.len() as VertexId;
        ids.insert(tok.to_owned(), id);
        labels.push(tok.to_owned());
        id
    };
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: idx + 1,
                msg: format!("expected two vertex tokens, found {}", tokens.len()),
            });
        }
        let u = intern(tokens[0], &mut labels);
        let v = intern(tokens[1], &mut labels);
        edges.push((u, v));
    }
    Graph::from_edges_labeled(labels, &edges)
}
