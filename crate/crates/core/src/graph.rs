//! Finite multigraphs, the double construction and path enumeration.
//!
//! Vertex and edge ids are opaque strings. Internally every vertex and edge
//! is addressed by its dense index in declaration order, so matrices built
//! from a graph have a stable layout.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Default cap on the number of paths a single enumeration may return.
pub const DEFAULT_PATH_CEILING: usize = 10_000_000;

#[derive(Debug, Clone, Default, PartialEq)]
struct VertexSet {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl VertexSet {
    fn new<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = VertexSet::default();
        for id in ids {
            let id = id.into();
            if set.index.contains_key(&id) {
                return Err(Error::DuplicateId { kind: "vertex", id });
            }
            set.index.insert(id.clone(), set.ids.len());
            set.ids.push(id);
        }
        Ok(set)
    }

    fn lookup(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(id.to_string()))
    }
}

fn check_unique_edge_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId {
                kind: "edge",
                id: id.to_string(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct UndirectedEdge {
    pub id: String,
    /// Endpoint indices in declaration order; always distinct.
    pub endpoints: [usize; 2],
}

/// Undirected multigraph without loops.
#[derive(Debug, Clone, PartialEq)]
pub struct UndirectedGraph {
    vertices: VertexSet,
    edges: Vec<UndirectedEdge>,
}

impl UndirectedGraph {
    /// Builds a graph from vertex ids and `(edge id, endpoint, endpoint)` triples.
    pub fn new<V, S, E>(vertices: V, edges: E) -> Result<Self>
    where
        V: IntoIterator<Item = S>,
        S: Into<String>,
        E: IntoIterator<Item = (String, String, String)>,
    {
        let vertices = VertexSet::new(vertices)?;
        let mut out = Vec::new();
        for (id, a, b) in edges {
            let ia = vertices.lookup(&a)?;
            let ib = vertices.lookup(&b)?;
            if ia == ib {
                return Err(Error::LoopEdge { edge: id, vertex: a });
            }
            out.push(UndirectedEdge {
                id,
                endpoints: [ia, ib],
            });
        }
        check_unique_edge_ids(out.iter().map(|e| e.id.as_str()))?;
        Ok(UndirectedGraph {
            vertices,
            edges: out,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.ids.len()
    }

    pub fn vertex_ids(&self) -> &[String] {
        &self.vertices.ids
    }

    pub fn vertex_index(&self, id: &str) -> Result<usize> {
        self.vertices.lookup(id)
    }

    pub fn edges(&self) -> &[UndirectedEdge] {
        &self.edges
    }

    /// Number of edges meeting each vertex (multi-edges counted separately).
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertex_count()];
        for e in &self.edges {
            deg[e.endpoints[0]] += 1;
            deg[e.endpoints[1]] += 1;
        }
        deg
    }

    /// The double: each undirected edge `α` with endpoints `{i, j}` becomes
    /// the directed edges `(i, α): i → j` and `(j, α): j → i`, stored at
    /// indices `2k` and `2k + 1` for the `k`-th undirected edge.
    pub fn double(&self) -> DirectedGraph {
        let mut edges = Vec::with_capacity(2 * self.edges.len());
        for e in &self.edges {
            let [i, j] = e.endpoints;
            edges.push(DirectedEdge {
                id: double_edge_id(&self.vertices.ids[i], &e.id),
                source: i,
                target: j,
            });
            edges.push(DirectedEdge {
                id: double_edge_id(&self.vertices.ids[j], &e.id),
                source: j,
                target: i,
            });
        }
        DirectedGraph::from_parts(self.vertices.clone(), edges)
    }
}

/// Id of the directed edge `(vertex, edge)` in a double.
pub fn double_edge_id(vertex: &str, edge: &str) -> String {
    format!("{vertex}:{edge}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedEdge {
    pub id: String,
    pub source: usize,
    pub target: usize,
}

/// Directed multigraph without loops.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    vertices: VertexSet,
    edges: Vec<DirectedEdge>,
    edge_index: HashMap<String, usize>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
}

impl DirectedGraph {
    /// Builds a graph from vertex ids and `(edge id, source, target)` triples.
    pub fn new<V, S, E>(vertices: V, edges: E) -> Result<Self>
    where
        V: IntoIterator<Item = S>,
        S: Into<String>,
        E: IntoIterator<Item = (String, String, String)>,
    {
        let vertices = VertexSet::new(vertices)?;
        let mut out = Vec::new();
        for (id, s, t) in edges {
            let source = vertices.lookup(&s)?;
            let target = vertices.lookup(&t)?;
            if source == target {
                return Err(Error::LoopEdge { edge: id, vertex: s });
            }
            out.push(DirectedEdge { id, source, target });
        }
        check_unique_edge_ids(out.iter().map(|e| e.id.as_str()))?;
        Ok(Self::from_parts(vertices, out))
    }

    fn from_parts(vertices: VertexSet, edges: Vec<DirectedEdge>) -> Self {
        let n = vertices.ids.len();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        let mut edge_index = HashMap::with_capacity(edges.len());
        for (k, e) in edges.iter().enumerate() {
            out_edges[e.source].push(k);
            in_edges[e.target].push(k);
            edge_index.insert(e.id.clone(), k);
        }
        DirectedGraph {
            vertices,
            edges,
            edge_index,
            out_edges,
            in_edges,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_ids(&self) -> &[String] {
        &self.vertices.ids
    }

    pub fn vertex_id(&self, v: usize) -> &str {
        &self.vertices.ids[v]
    }

    pub fn vertex_index(&self, id: &str) -> Result<usize> {
        self.vertices.lookup(id)
    }

    pub fn edge_index(&self, id: &str) -> Result<usize> {
        self.edge_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownEdge(id.to_string()))
    }

    pub fn edges(&self) -> &[DirectedEdge] {
        &self.edges
    }

    pub fn edge(&self, k: usize) -> &DirectedEdge {
        &self.edges[k]
    }

    /// Indices of edges leaving `v`.
    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out_edges[v]
    }

    /// Indices of edges entering `v`.
    pub fn in_edges(&self, v: usize) -> &[usize] {
        &self.in_edges[v]
    }

    /// Forgetful map: every directed edge becomes an undirected edge with the
    /// same id and endpoints `{source, target}`.
    pub fn underlying(&self) -> UndirectedGraph {
        UndirectedGraph {
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| UndirectedEdge {
                    id: e.id.clone(),
                    endpoints: [e.source, e.target],
                })
                .collect(),
        }
    }

    /// Returns a copy of this graph with extra edges appended.
    pub(crate) fn with_extra_edges(&self, extra: Vec<DirectedEdge>) -> Result<Self> {
        let mut edges = self.edges.clone();
        edges.extend(extra);
        check_unique_edge_ids(edges.iter().map(|e| e.id.as_str()))?;
        Ok(Self::from_parts(self.vertices.clone(), edges))
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let in_degree: Vec<usize> = self.in_edges.iter().map(Vec::len).collect();
        let out_degree: Vec<usize> = self.out_edges.iter().map(Vec::len).collect();
        let bound = in_degree
            .iter()
            .chain(out_degree.iter())
            .copied()
            .max()
            .unwrap_or(0);
        DegreeStats {
            in_degree,
            out_degree,
            bound,
        }
    }

    /// Entry `[x][y]` counts the edges `x → y`.
    pub fn multi_adjacency(&self) -> Vec<Vec<u64>> {
        let n = self.vertex_count();
        let mut adj = vec![vec![0u64; n]; n];
        for e in &self.edges {
            adj[e.source][e.target] += 1;
        }
        adj
    }

    /// Exact enumeration of length-`n` paths under `constraint`.
    pub fn enumerate_paths(&self, n: usize, constraint: PathConstraint) -> Result<Vec<Path>> {
        self.enumerate_paths_with_ceiling(n, constraint, DEFAULT_PATH_CEILING)
    }

    pub fn enumerate_paths_with_ceiling(
        &self,
        n: usize,
        constraint: PathConstraint,
        ceiling: usize,
    ) -> Result<Vec<Path>> {
        let mut out = Vec::new();
        match constraint {
            PathConstraint::Terminus(y) => {
                self.check_vertex(y)?;
                let mut rev_edges = Vec::with_capacity(n);
                self.backward_dfs(y, n, &mut rev_edges, &mut out, ceiling)?;
            }
            PathConstraint::Between { source, terminus } => {
                self.check_vertex(source)?;
                self.check_vertex(terminus)?;
                let reach = self.reaches_within(terminus, n);
                let mut edges = Vec::with_capacity(n);
                self.forward_dfs(source, n, Some(&reach), &mut edges, &mut out, ceiling)?;
            }
            PathConstraint::Unconstrained => {
                for v in 0..self.vertex_count() {
                    let mut edges = Vec::with_capacity(n);
                    self.forward_dfs(v, n, None, &mut edges, &mut out, ceiling)?;
                }
            }
        }
        Ok(out)
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.vertex_count() {
            Ok(())
        } else {
            Err(Error::UnknownVertex(format!("#{v}")))
        }
    }

    /// `reach[k][v]` is true when some path of length exactly `k` runs from
    /// `v` to `terminus`.
    fn reaches_within(&self, terminus: usize, n: usize) -> Vec<Vec<bool>> {
        let nv = self.vertex_count();
        let mut reach = Vec::with_capacity(n + 1);
        let mut cur = vec![false; nv];
        cur[terminus] = true;
        reach.push(cur);
        for k in 1..=n {
            let prev = &reach[k - 1];
            let mut next = vec![false; nv];
            for e in &self.edges {
                if prev[e.target] {
                    next[e.source] = true;
                }
            }
            reach.push(next);
        }
        reach
    }

    fn push_path(&self, path: Path, out: &mut Vec<Path>, ceiling: usize) -> Result<()> {
        if out.len() >= ceiling {
            return Err(Error::EnumerationCeiling { ceiling });
        }
        out.push(path);
        Ok(())
    }

    fn forward_dfs(
        &self,
        at: usize,
        remaining: usize,
        reach: Option<&Vec<Vec<bool>>>,
        edges: &mut Vec<usize>,
        out: &mut Vec<Path>,
        ceiling: usize,
    ) -> Result<()> {
        if let Some(reach) = reach {
            if !reach[remaining][at] {
                return Ok(());
            }
        }
        if remaining == 0 {
            let start = edges.first().map_or(at, |&e| self.edges[e].source);
            return self.push_path(Path::from_trusted(self, start, edges.clone()), out, ceiling);
        }
        for &e in &self.out_edges[at] {
            edges.push(e);
            self.forward_dfs(self.edges[e].target, remaining - 1, reach, edges, out, ceiling)?;
            edges.pop();
        }
        Ok(())
    }

    fn backward_dfs(
        &self,
        at: usize,
        remaining: usize,
        rev_edges: &mut Vec<usize>,
        out: &mut Vec<Path>,
        ceiling: usize,
    ) -> Result<()> {
        if remaining == 0 {
            let edges: Vec<usize> = rev_edges.iter().rev().copied().collect();
            return self.push_path(Path::from_trusted(self, at, edges), out, ceiling);
        }
        for &e in &self.in_edges[at] {
            rev_edges.push(e);
            self.backward_dfs(self.edges[e].source, remaining - 1, rev_edges, out, ceiling)?;
            rev_edges.pop();
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeStats {
    pub in_degree: Vec<usize>,
    pub out_degree: Vec<usize>,
    /// `max` over vertices of `max(in, out)`.
    pub bound: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathConstraint {
    Terminus(usize),
    Between { source: usize, terminus: usize },
    Unconstrained,
}

/// A contiguous sequence of directed edges together with its vertex sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    vertices: Vec<usize>,
    edges: Vec<usize>,
}

impl Path {
    /// Length-0 path sitting at `v`.
    pub fn trivial(v: usize) -> Self {
        Path {
            vertices: vec![v],
            edges: Vec::new(),
        }
    }

    /// Validates contiguity of `edges` in `graph`, starting at `start`.
    pub fn new(graph: &DirectedGraph, start: usize, edges: Vec<usize>) -> Result<Self> {
        graph.check_vertex(start)?;
        let mut vertices = Vec::with_capacity(edges.len() + 1);
        vertices.push(start);
        let mut at = start;
        for (k, &e) in edges.iter().enumerate() {
            let edge = graph
                .edges
                .get(e)
                .ok_or_else(|| Error::UnknownEdge(format!("#{e}")))?;
            if edge.source != at {
                return Err(Error::NotContiguous(k));
            }
            at = edge.target;
            vertices.push(at);
        }
        Ok(Path { vertices, edges })
    }

    /// Path from edge ids; `start` is only consulted for the empty path.
    pub fn from_edge_ids(graph: &DirectedGraph, start: &str, edge_ids: &[&str]) -> Result<Self> {
        let edges = edge_ids
            .iter()
            .map(|id| graph.edge_index(id))
            .collect::<Result<Vec<_>>>()?;
        let start = match edges.first() {
            Some(&e) => graph.edges[e].source,
            None => graph.vertex_index(start)?,
        };
        Path::new(graph, start, edges)
    }

    fn from_trusted(graph: &DirectedGraph, start: usize, edges: Vec<usize>) -> Self {
        let mut vertices = Vec::with_capacity(edges.len() + 1);
        vertices.push(start);
        vertices.extend(edges.iter().map(|&e| graph.edges[e].target));
        Path { vertices, edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    /// Visited vertices `i_1, …, i_{n+1}`.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn source(&self) -> usize {
        self.vertices[0]
    }

    pub fn terminus(&self) -> usize {
        *self.vertices.last().expect("path has at least one vertex")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ug(vertices: &[&str], edges: &[(&str, &str, &str)]) -> UndirectedGraph {
        UndirectedGraph::new(
            vertices.iter().copied(),
            edges
                .iter()
                .map(|(id, a, b)| (id.to_string(), a.to_string(), b.to_string())),
        )
        .unwrap()
    }

    fn dg(vertices: &[&str], edges: &[(&str, &str, &str)]) -> DirectedGraph {
        DirectedGraph::new(
            vertices.iter().copied(),
            edges
                .iter()
                .map(|(id, a, b)| (id.to_string(), a.to_string(), b.to_string())),
        )
        .unwrap()
    }

    fn triangle() -> UndirectedGraph {
        ug(
            &["1", "2", "3"],
            &[("a", "1", "2"), ("b", "2", "3"), ("c", "3", "1")],
        )
    }

    #[test]
    fn double_of_single_edge() {
        let d = ug(&["1", "2"], &[("e", "1", "2")]).double();
        assert_eq!(d.edge_count(), 2);
        assert_eq!((d.edge(0).source, d.edge(0).target), (0, 1));
        assert_eq!((d.edge(1).source, d.edge(1).target), (1, 0));
        assert_eq!(d.edge(0).id, "1:e");
        assert_eq!(d.edge(1).id, "2:e");
    }

    #[test]
    fn double_of_path_and_triangle() {
        let p = ug(&["1", "2", "3"], &[("a", "1", "2"), ("b", "2", "3")]).double();
        assert_eq!(p.edge_count(), 4);
        let t = triangle().double();
        assert_eq!(t.edge_count(), 6);
        let stats = t.degree_stats();
        assert_eq!(stats.in_degree, vec![2, 2, 2]);
        assert_eq!(stats.out_degree, vec![2, 2, 2]);
        assert_eq!(stats.bound, 2);
    }

    #[test]
    fn underlying_does_not_collapse_double() {
        let x = triangle();
        let u = x.double().underlying();
        assert_eq!(u.edges().len(), 2 * x.edges().len());
        let single = dg(&["1", "2"], &[("e", "1", "2")]).underlying();
        assert_eq!(single.edges().len(), 1);
        assert_eq!(single.edges()[0].endpoints, [0, 1]);
        let empty = dg(&["1"], &[]).underlying();
        assert!(empty.edges().is_empty());
    }

    #[test]
    fn loops_and_dangling_refs_rejected() {
        let err = DirectedGraph::new(["a"], [("x".into(), "a".into(), "a".into())]).unwrap_err();
        assert!(matches!(err, Error::LoopEdge { .. }));
        let err = UndirectedGraph::new(["a"], [("x".into(), "a".into(), "b".into())]).unwrap_err();
        assert_eq!(err, Error::UnknownVertex("b".into()));
        let err = DirectedGraph::new(["a", "a"], Vec::new()).unwrap_err();
        assert!(matches!(err, Error::DuplicateId { kind: "vertex", .. }));
    }

    #[test]
    fn multi_edges_allowed() {
        let g = dg(&["1", "2"], &[("a", "1", "2"), ("b", "1", "2")]);
        assert_eq!(g.multi_adjacency()[0][1], 2);
        assert_eq!(g.degree_stats().bound, 2);
    }

    #[test]
    fn star_degree_bound() {
        let g = dg(
            &["c", "x", "y", "z"],
            &[("a", "c", "x"), ("b", "c", "y"), ("d", "c", "z")],
        );
        assert_eq!(g.degree_stats().bound, 3);
    }

    #[test]
    fn cycle_paths() {
        let g = dg(
            &["1", "2", "3"],
            &[("a", "1", "2"), ("b", "2", "3"), ("c", "3", "1")],
        );
        let paths = g
            .enumerate_paths(3, PathConstraint::Between { source: 0, terminus: 0 })
            .unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].vertices(), &[0, 1, 2, 0]);
    }

    #[test]
    fn k2_double_return_paths() {
        let g = ug(&["1", "2"], &[("e", "1", "2")]).double();
        let paths = g
            .enumerate_paths(2, PathConstraint::Between { source: 0, terminus: 0 })
            .unwrap();
        assert_eq!(paths.len(), 1);
    }

    #[test]
    fn zero_length_paths() {
        let g = triangle().double();
        let paths = g.enumerate_paths(0, PathConstraint::Terminus(1)).unwrap();
        assert_eq!(paths, vec![Path::trivial(1)]);
        assert_eq!(g.enumerate_paths(0, PathConstraint::Unconstrained).unwrap().len(), 3);
        let none = g
            .enumerate_paths(0, PathConstraint::Between { source: 0, terminus: 1 })
            .unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn terminus_paths_bounded_by_degree_power() {
        let g = triangle().double();
        for n in 0..6 {
            let paths = g.enumerate_paths(n, PathConstraint::Terminus(2)).unwrap();
            assert_eq!(paths.len(), 2usize.pow(n as u32));
            assert!(paths.iter().all(|p| p.terminus() == 2 && p.len() == n));
        }
    }

    #[test]
    fn ceiling_enforced() {
        let g = triangle().double();
        let err = g
            .enumerate_paths_with_ceiling(5, PathConstraint::Unconstrained, 10)
            .unwrap_err();
        assert_eq!(err, Error::EnumerationCeiling { ceiling: 10 });
    }

    #[test]
    fn path_contiguity_checked() {
        let g = dg(&["1", "2", "3"], &[("a", "1", "2"), ("b", "2", "3")]);
        assert!(Path::new(&g, 0, vec![0, 1]).is_ok());
        assert_eq!(Path::new(&g, 0, vec![1]).unwrap_err(), Error::NotContiguous(0));
        assert_eq!(Path::new(&g, 0, vec![0, 0]).unwrap_err(), Error::NotContiguous(1));
        let p = Path::from_edge_ids(&g, "1", &["a", "b"]).unwrap();
        assert_eq!(p.vertices(), &[0, 1, 2]);
    }
}
