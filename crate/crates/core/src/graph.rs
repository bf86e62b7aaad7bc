//! Undirected weighted graphs in compressed adjacency form.
//!
//! Vertices are `0..n`. Every undirected edge `{u, v}` is stored twice, once in
//! each endpoint's sorted neighbor list, with identical weight. The Laplacian
//! `L = D - A` is never materialized; [`Graph::laplacian_matvec`] applies it
//! edge-wise.
//!
//! Edge-list text format: one edge per line, `u v [w]`, whitespace separated,
//! 0-based ids, weight defaults to 1. Everything after `#` is a comment.
//! Inputs with 1-based ids must be shifted before loading.

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, Write};

use crate::error::{check_len, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
    edge_count: usize,
    total_weight: f64,
    components: usize,
}

/// Bookkeeping from [`Graph::from_edges`] and the edge-list loader.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub self_loops_dropped: usize,
    pub duplicates_merged: usize,
}

impl Graph {
    /// Builds a graph on `n` vertices. Parallel edges (in either orientation)
    /// are merged by summing weights; self-loops are dropped and counted.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<(Graph, BuildStats)>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut stats = BuildStats::default();
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) references a vertex outside 0..{n}"
                )));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) has non-positive or non-finite weight {w}"
                )));
            }
            if u == v {
                stats.self_loops_dropped += 1;
                continue;
            }
            let key = (u.min(v), u.max(v));
            match merged.get_mut(&key) {
                Some(acc) => {
                    *acc += w;
                    stats.duplicates_merged += 1;
                }
                None => {
                    merged.insert(key, w);
                }
            }
        }
        Ok((Self::from_canonical(n, &merged), stats))
    }

    fn from_canonical(n: usize, merged: &BTreeMap<(usize, usize), f64>) -> Graph {
        let mut counts = vec![0usize; n];
        for &(u, v) in merged.keys() {
            counts[u] += 1;
            counts[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for c in &counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        let nnz = *offsets.last().unwrap();
        let mut neighbors = vec![0usize; nnz];
        let mut weights = vec![0.0; nnz];
        let mut fill = offsets[..n].to_vec();
        // keys are sorted by (min, max); both insertions below therefore land
        // in ascending neighbor order per vertex.
        let mut by_vertex: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(u, v), &w) in merged {
            by_vertex[u].push((v, w));
            by_vertex[v].push((u, w));
        }
        for (u, list) in by_vertex.iter_mut().enumerate() {
            list.sort_by_key(|&(v, _)| v);
            for &(v, w) in list.iter() {
                neighbors[fill[u]] = v;
                weights[fill[u]] = w;
                fill[u] += 1;
            }
        }
        let degrees = (0..n)
            .map(|u| crate::numeric::sum(&weights[offsets[u]..offsets[u + 1]]))
            .collect();
        let total_weight = crate::numeric::sum(&merged.values().copied().collect::<Vec<_>>());
        let mut g = Graph {
            offsets,
            neighbors,
            weights,
            degrees,
            edge_count: merged.len(),
            total_weight,
            components: 0,
        };
        g.components = g.component_labels().1;
        g
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    /// Number of undirected edges.
    pub fn m(&self) -> usize {
        self.edge_count
    }

    /// Total weight `W`, each undirected edge counted once.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Weighted degrees (diagonal of `D`).
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn max_degree(&self) -> f64 {
        self.degrees.iter().copied().fold(0.0, f64::max)
    }

    /// Sorted `(neighbor, weight)` pairs of `u`.
    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[u]..self.offsets[u + 1];
        self.neighbors[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    /// Every undirected edge once, as `(u, v, w)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |u| {
            self.neighbors(u)
                .filter(move |&(v, _)| v > u)
                .map(move |(v, w)| (u, v, w))
        })
    }

    pub fn component_count(&self) -> usize {
        self.components
    }

    pub fn is_connected(&self) -> bool {
        self.n() > 0 && self.components == 1
    }

    /// Errors unless the graph is non-empty and connected.
    pub fn require_connected(&self) -> Result<()> {
        if self.n() == 0 {
            Err(Error::EmptyGraph)
        } else if self.components != 1 {
            Err(Error::Disconnected {
                components: self.components,
            })
        } else {
            Ok(())
        }
    }

    /// BFS component label per vertex, components numbered in order of their
    /// smallest vertex.
    pub fn component_labels(&self) -> (Vec<usize>, usize) {
        let n = self.n();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &v in &self.neighbors[self.offsets[u]..self.offsets[u + 1]] {
                    if label[v] == usize::MAX {
                        label[v] = count;
                        queue.push_back(v);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    /// Induced subgraph on the largest connected component, vertices renumbered
    /// densely in their original order. Ties go to the component holding the
    /// smallest vertex id. The second value maps old ids to new ones.
    pub fn largest_connected_component(&self) -> Result<(Graph, Vec<Option<usize>>)> {
        if self.n() == 0 {
            return Err(Error::EmptyGraph);
        }
        let (labels, count) = self.component_labels();
        let mut sizes = vec![0usize; count];
        for &l in &labels {
            sizes[l] += 1;
        }
        let mut best = 0;
        for (c, &s) in sizes.iter().enumerate() {
            if s > sizes[best] {
                best = c;
            }
        }
        let mut mapping = vec![None; self.n()];
        let mut next = 0;
        for (u, &l) in labels.iter().enumerate() {
            if l == best {
                mapping[u] = Some(next);
                next += 1;
            }
        }
        let merged: BTreeMap<(usize, usize), f64> = self
            .edges()
            .filter_map(|(u, v, w)| match (mapping[u], mapping[v]) {
                (Some(a), Some(b)) => Some(((a, b), w)),
                _ => None,
            })
            .collect();
        Ok((Self::from_canonical(next, &merged), mapping))
    }

    /// `out = (D - A) v` without bounds checks on the lengths.
    pub fn laplacian_apply(&self, v: &[f64], out: &mut [f64]) {
        for u in 0..self.n() {
            let range = self.offsets[u]..self.offsets[u + 1];
            let vu = v[u];
            let mut acc = 0.0;
            for (&j, &w) in self.neighbors[range.clone()]
                .iter()
                .zip(&self.weights[range])
            {
                acc += w * (vu - v[j]);
            }
            out[u] = acc;
        }
    }

    /// `(D - A) v`.
    pub fn laplacian_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("laplacian_matvec", self.n(), v.len())?;
        let mut out = vec![0.0; self.n()];
        self.laplacian_apply(v, &mut out);
        Ok(out)
    }

    /// `Σ_{(i,j)∈E} w_ij (v_i − v_j)^2`.
    pub fn laplacian_quadratic_form(&self, v: &[f64]) -> Result<f64> {
        check_len("laplacian_quadratic_form", self.n(), v.len())?;
        let mut acc = crate::numeric::NeumaierSum::new();
        for (u, w, weight) in self.edges() {
            let d = v[u] - v[w];
            acc.add(weight * d * d);
        }
        Ok(acc.value())
    }

    /// Parses the edge-list format. `n` is one more than the largest id seen.
    pub fn read_edge_list<R: BufRead>(reader: R) -> Result<(Graph, BuildStats)> {
        let mut edges = Vec::new();
        let mut n = 0usize;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected `u v [w]`, got {} fields", fields.len()),
                });
            }
            let parse_id = |s: &str| {
                s.parse::<usize>().map_err(|e| Error::Parse {
                    line: lineno,
                    message: format!("bad vertex id `{s}`: {e}"),
                })
            };
            let u = parse_id(fields[0])?;
            let v = parse_id(fields[1])?;
            let w = match fields.get(2) {
                Some(s) => s.parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno,
                    message: format!("bad weight `{s}`: {e}"),
                })?,
                None => 1.0,
            };
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Validation(format!(
                    "line {lineno}: weight must be positive and finite, got {w}"
                )));
            }
            n = n.max(u + 1).max(v + 1);
            edges.push((u, v, w));
        }
        Self::from_edges(n, edges)
    }

    pub fn parse_edge_list(text: &str) -> Result<(Graph, BuildStats)> {
        Self::read_edge_list(text.as_bytes())
    }

    /// Writes `u v w` lines (`u < v`) with 17 significant digits.
    ///
    /// An isolated highest vertex cannot be expressed in the format and is
    /// lost on reload.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        for (u, v, w) in self.edges() {
            writeln!(out, "{u} {v} {w:.16e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn path(n: usize) -> Graph {
        Graph::from_edges(n, (1..n).map(|i| (i - 1, i, 1.0)))
            .unwrap()
            .0
    }

    #[test]
    fn loads_path() {
        let (g, stats) = Graph::parse_edge_list("0 1\n1 2").unwrap();
        assert_eq!((g.n(), g.m(), g.total_weight()), (3, 2, 2.0));
        assert_eq!(stats, BuildStats::default());
        assert!(g.is_connected());
    }

    #[test]
    fn merges_symmetric_duplicates() {
        let (g, stats) = Graph::parse_edge_list("0 1 0.5\n1 0 0.5").unwrap();
        assert_eq!(g.m(), 1);
        assert_eq!(g.total_weight(), 1.0);
        assert_eq!(g.neighbors(0).collect::<Vec<_>>(), vec![(1, 1.0)]);
        assert_eq!(g.neighbors(1).collect::<Vec<_>>(), vec![(0, 1.0)]);
        assert_eq!(stats.duplicates_merged, 1);
    }

    #[test]
    fn drops_self_loops() {
        let (g, stats) = Graph::parse_edge_list("0 0 1.0").unwrap();
        assert_eq!(g.m(), 0);
        assert_eq!(g.n(), 1);
        assert_eq!(stats.self_loops_dropped, 1);
    }

    #[test]
    fn comments_and_blank_lines() {
        let (g, _) = Graph::parse_edge_list("# header\n\n0 1 2.5 # trailing\n  \n1 2\n").unwrap();
        assert_eq!(g.m(), 2);
        assert_eq!(g.total_weight(), 3.5);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match Graph::parse_edge_list("0 1\n0 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match Graph::parse_edge_list("0 1 2 3") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            Graph::parse_edge_list("0 1 -1.0"),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            Graph::parse_edge_list("0 1 0"),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn lcc_of_connected_path_is_identity() {
        let g = path(3);
        let (h, map) = g.largest_connected_component().unwrap();
        assert_eq!(h, g);
        assert_eq!(map, vec![Some(0), Some(1), Some(2)]);
    }

    #[test]
    fn lcc_picks_larger_component() {
        let (g, _) = Graph::parse_edge_list("0 1\n2 3\n3 4").unwrap();
        let (h, map) = g.largest_connected_component().unwrap();
        assert_eq!((h.n(), h.m()), (3, 2));
        assert_eq!(map, vec![None, None, Some(0), Some(1), Some(2)]);
        assert!(h.is_connected());
    }

    #[test]
    fn lcc_tie_goes_to_smallest_vertex() {
        // components {1,3} and {0,2} (by edges), plus isolated 4
        let (g, _) = Graph::parse_edge_list("1 3\n2 0\n4 4").unwrap();
        let (h, map) = g.largest_connected_component().unwrap();
        assert_eq!(h.n(), 2);
        assert_eq!(map, vec![Some(0), None, Some(1), None, None]);
    }

    #[test]
    fn lcc_empty_graph_errors() {
        let (g, _) = Graph::from_edges(0, Vec::new()).unwrap();
        assert!(matches!(
            g.largest_connected_component(),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn laplacian_on_single_edge() {
        let g = path(2);
        assert_eq!(g.laplacian_matvec(&[1.0, -1.0]).unwrap(), vec![2.0, -2.0]);
        assert!(matches!(
            g.laplacian_matvec(&[1.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn write_then_read_is_bit_exact() {
        let (g, _) =
            Graph::parse_edge_list("0 1 0.1\n1 2 0.30000000000000004\n0 2 1e-300").unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let (h, _) = Graph::read_edge_list(buf.as_slice()).unwrap();
        assert_eq!(g, h);
    }
}
