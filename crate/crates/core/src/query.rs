//! Query graphs and subgraph join trees.
//!
//! A [`QueryGraph`] is the pattern; a [`SjTree`] is a binary decomposition of
//! it. Leaves hold the search primitives matched around every arriving edge,
//! internal nodes hold the join of their children. Query subgraphs are
//! bitsets over the query's vertex and edge indices, so queries are limited
//! to 64 vertices and 64 edges.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::graph::{EdgeId, EdgeType, Timestamp, VertexId, VertexType};

pub const MAX_QUERY_ITEMS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("invalid query graph: {0}")]
    InvalidQuery(String),
    #[error("malformed join tree: {0}")]
    MalformedTree(String),
    #[error("join tree failed validation: {0}")]
    Invalid(ValidationReport),
    #[error("projection target is not contained in the mapping's domain")]
    DomainMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryVertex {
    pub name: String,
    pub vtype: VertexType,
    pub label: Option<String>,
    /// Marks the temporal "event" vertices whose order the joins enforce.
    pub is_event: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryEdge {
    pub name: String,
    pub a: usize,
    pub b: usize,
    pub etype: EdgeType,
}

impl QueryEdge {
    pub fn touches(&self, v: usize) -> bool {
        self.a == v || self.b == v
    }

    pub fn other(&self, v: usize) -> usize {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }
}

/// A vertex/edge subset of a query graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Subgraph {
    pub vertices: u64,
    pub edges: u64,
}

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| mask & (1u64 << i) != 0)
}

impl Subgraph {
    pub const EMPTY: Subgraph = Subgraph { vertices: 0, edges: 0 };

    /// The subgraph induced by a set of query edges and their endpoints.
    pub fn from_edges(query: &QueryGraph, edges: &[usize]) -> Self {
        let mut s = Subgraph::EMPTY;
        for &e in edges {
            let qe = &query.edges[e];
            s.edges |= 1 << e;
            s.vertices |= (1 << qe.a) | (1 << qe.b);
        }
        s
    }

    pub fn union(self, other: Subgraph) -> Subgraph {
        Subgraph {
            vertices: self.vertices | other.vertices,
            edges: self.edges | other.edges,
        }
    }

    pub fn intersection(self, other: Subgraph) -> Subgraph {
        Subgraph {
            vertices: self.vertices & other.vertices,
            edges: self.edges & other.edges,
        }
    }

    pub fn is_subset_of(self, other: Subgraph) -> bool {
        self.vertices & !other.vertices == 0 && self.edges & !other.edges == 0
    }

    pub fn is_empty(self) -> bool {
        self.vertices == 0 && self.edges == 0
    }

    pub fn has_vertex(self, v: usize) -> bool {
        self.vertices & (1 << v) != 0
    }

    pub fn has_edge(self, e: usize) -> bool {
        self.edges & (1 << e) != 0
    }

    pub fn vertex_indices(self) -> impl Iterator<Item = usize> {
        bits(self.vertices)
    }

    pub fn edge_indices(self) -> impl Iterator<Item = usize> {
        bits(self.edges)
    }

    pub fn edge_count(self) -> usize {
        self.edges.count_ones() as usize
    }
}

/// Pattern graph. Vertices and edges are addressed by their index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryGraph {
    pub vertices: Vec<QueryVertex>,
    pub edges: Vec<QueryEdge>,
}

impl QueryGraph {
    /// Checks the structural invariants: at most 64 items of each kind,
    /// k-partite, no duplicate edges, non-empty labels, connected.
    pub fn new(vertices: Vec<QueryVertex>, edges: Vec<QueryEdge>) -> Result<Self, QueryError> {
        let bad = |m: String| Err(QueryError::InvalidQuery(m));
        if vertices.is_empty() {
            return bad("query has no vertices".into());
        }
        if vertices.len() > MAX_QUERY_ITEMS || edges.len() > MAX_QUERY_ITEMS {
            return bad(format!("queries are limited to {MAX_QUERY_ITEMS} vertices and edges"));
        }
        for v in &vertices {
            if matches!(&v.label, Some(l) if l.is_empty()) {
                return bad(format!("vertex {} has an empty label", v.name));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for e in &edges {
            if e.a >= vertices.len() || e.b >= vertices.len() {
                return bad(format!("edge {} references a missing vertex", e.name));
            }
            if vertices[e.a].vtype == vertices[e.b].vtype {
                return bad(format!("edge {} joins two vertices of the same type", e.name));
            }
            let key = (e.a.min(e.b), e.a.max(e.b), e.etype);
            if !seen.insert(key) {
                return bad(format!("duplicate query edge {}", e.name));
            }
        }
        let q = QueryGraph { vertices, edges };
        if q.vertices.len() > 1 && q.component_of(0).count_ones() as usize != q.vertices.len() {
            return bad("query graph is not connected".into());
        }
        Ok(q)
    }

    fn component_of(&self, start: usize) -> u64 {
        let mut seen = 1u64 << start;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for e in &self.edges {
                if e.touches(v) {
                    let o = e.other(v);
                    if seen & (1 << o) == 0 {
                        seen |= 1 << o;
                        stack.push(o);
                    }
                }
            }
        }
        seen
    }

    pub fn full(&self) -> Subgraph {
        let n = self.vertices.len();
        let m = self.edges.len();
        let mask = |k: usize| if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
        Subgraph {
            vertices: mask(n),
            edges: mask(m),
        }
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.name == name)
    }

    pub fn edge_index(&self, name: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.name == name)
    }

    /// Queries without any label match on types alone.
    pub fn is_low_selectivity(&self) -> bool {
        self.vertices.iter().all(|v| v.label.is_none())
    }

    pub fn incident_edges(&self, v: usize, within: Subgraph) -> impl Iterator<Item = usize> + '_ {
        within.edge_indices().filter(move |&e| self.edges[e].touches(v))
    }

    /// Longest shortest path, ignoring edge direction.
    pub fn diameter(&self) -> usize {
        let n = self.vertices.len();
        let mut best = 0;
        for s in 0..n {
            let mut dist = vec![usize::MAX; n];
            dist[s] = 0;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for e in &self.edges {
                    if e.touches(v) {
                        let o = e.other(v);
                        if dist[o] == usize::MAX {
                            dist[o] = dist[v] + 1;
                            queue.push_back(o);
                        }
                    }
                }
            }
            best = best.max(dist.into_iter().filter(|&d| d != usize::MAX).max().unwrap_or(0));
        }
        best
    }

    /// The center vertex if every edge of `sub` shares one endpoint.
    /// Event vertices are preferred when more than one vertex qualifies.
    pub fn star_center(&self, sub: Subgraph) -> Option<usize> {
        let candidates: Vec<usize> = sub
            .vertex_indices()
            .filter(|&v| sub.edge_indices().all(|e| self.edges[e].touches(v)))
            .collect();
        if sub.edge_count() == 0 {
            return None;
        }
        candidates
            .iter()
            .copied()
            .find(|&v| self.vertices[v].is_event)
            .or_else(|| candidates.first().copied())
    }
}

/// Partial assignment of query vertices and edges to data vertices and edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mapping {
    pub vertices: Vec<Option<VertexId>>,
    pub edges: Vec<Option<EdgeId>>,
}

impl Mapping {
    pub fn empty(query: &QueryGraph) -> Self {
        Self {
            vertices: vec![None; query.vertices.len()],
            edges: vec![None; query.edges.len()],
        }
    }

    /// The query subgraph this mapping assigns.
    pub fn domain(&self) -> Subgraph {
        let mut s = Subgraph::EMPTY;
        for (i, v) in self.vertices.iter().enumerate() {
            if v.is_some() {
                s.vertices |= 1 << i;
            }
        }
        for (i, e) in self.edges.iter().enumerate() {
            if e.is_some() {
                s.edges |= 1 << i;
            }
        }
        s
    }

    /// Restriction of the mapping to `sub`.
    pub fn project(&self, sub: Subgraph) -> Result<Mapping, QueryError> {
        if !sub.is_subset_of(self.domain()) {
            return Err(QueryError::DomainMismatch);
        }
        Ok(Mapping {
            vertices: self
                .vertices
                .iter()
                .enumerate()
                .map(|(i, v)| if sub.has_vertex(i) { *v } else { None })
                .collect(),
            edges: self
                .edges
                .iter()
                .enumerate()
                .map(|(i, e)| if sub.has_edge(i) { *e } else { None })
                .collect(),
        })
    }

    /// Mapped data edges listed in query-edge order. Distinct vertex
    /// assignments of the same data subgraph (query automorphisms) yield
    /// distinct signatures.
    pub fn signature(&self) -> MatchSignature {
        MatchSignature(self.edges.iter().map(|e| e.map_or(u32::MAX, |e| e.0)).collect())
    }

    pub fn is_injective(&self) -> bool {
        let mut vs: Vec<_> = self.vertices.iter().flatten().collect();
        let n = vs.len();
        vs.sort_unstable();
        vs.dedup();
        let mut es: Vec<_> = self.edges.iter().flatten().collect();
        let m = es.len();
        es.sort_unstable();
        es.dedup();
        vs.len() == n && es.len() == m
    }
}

/// Collision-free identity of a match: its data edge ids in query-edge order,
/// with `u32::MAX` standing in for unmapped query edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatchSignature(pub Vec<u32>);

impl fmt::Display for MatchSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for e in &self.0 {
            if !first {
                f.write_str("-")?;
            }
            first = false;
            if *e == u32::MAX {
                f.write_str("_")?;
            } else {
                write!(f, "{e}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SjNode {
    pub id: NodeId,
    pub name: String,
    pub parent: Option<NodeId>,
    pub sibling: Option<NodeId>,
    pub left: Option<NodeId>,
    pub right: Option<NodeId>,
    pub subgraph: Subgraph,
    /// Intersection of the children's subgraphs; `None` on leaves.
    pub cut: Option<Subgraph>,
    /// Require every edge of the left child's match to precede every edge of
    /// the right child's match.
    pub ordered_join: bool,
}

impl SjNode {
    pub fn is_leaf(&self) -> bool {
        self.left.is_none() && self.right.is_none()
    }
}

/// Declaration of one tree node, before linking.
#[derive(Debug, Clone)]
pub enum NodeDecl {
    Leaf {
        name: String,
        edges: Vec<usize>,
    },
    Join {
        name: String,
        left: usize,
        right: usize,
        /// Defaults to true when both children contain an event vertex.
        ordered: Option<bool>,
        /// Defaults to the union of the children.
        subgraph: Option<Subgraph>,
        /// Defaults to the intersection of the children.
        cut: Option<Subgraph>,
    },
}

impl NodeDecl {
    pub fn leaf(name: &str, edges: &[usize]) -> Self {
        NodeDecl::Leaf {
            name: name.to_string(),
            edges: edges.to_vec(),
        }
    }

    pub fn join(name: &str, left: usize, right: usize) -> Self {
        NodeDecl::Join {
            name: name.to_string(),
            left,
            right,
            ordered: None,
            subgraph: None,
            cut: None,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            NodeDecl::Leaf { name, .. } | NodeDecl::Join { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// The root's subgraph is not the whole query.
    RootNotQuery,
    /// An internal node's subgraph differs from the union of its children's.
    NotJoinOfChildren,
    /// An internal node's cut differs from the intersection of its children's.
    CutNotIntersection,
    LeafWithoutEdges,
    /// A subgraph holds an edge whose endpoints it does not hold.
    DanglingEdge(usize),
    /// A query edge appears in no leaf.
    EdgeUncovered(usize),
    /// A query edge appears in more than one leaf.
    EdgeInSeveralLeaves(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub failures: Vec<(NodeId, Violation)>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn at(&self, node: NodeId) -> impl Iterator<Item = &Violation> {
        self.failures.iter().filter(move |(n, _)| *n == node).map(|(_, v)| v)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.failures.is_empty() {
            return f.write_str("ok");
        }
        for (i, (node, v)) in self.failures.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "node {node}: {v:?}")?;
        }
        Ok(())
    }
}

/// Binary subgraph join tree over a query graph, plus the match window.
#[derive(Debug, Clone)]
pub struct SjTree {
    query: Arc<QueryGraph>,
    nodes: Vec<SjNode>,
    root: NodeId,
    leaves: Vec<NodeId>,
    window: Timestamp,
}

impl SjTree {
    /// Links and validates a tree. Fails on structural problems and on any
    /// violated tree property.
    pub fn new(query: Arc<QueryGraph>, decls: Vec<NodeDecl>, window: Timestamp) -> Result<Self, QueryError> {
        let tree = Self::assemble(query, decls, window)?;
        let report = tree.validate();
        if report.is_ok() {
            Ok(tree)
        } else {
            Err(QueryError::Invalid(report))
        }
    }

    /// Links the declared nodes without checking the tree properties. Only
    /// structural errors (bad references, cycles, several roots, shared
    /// children) are reported.
    pub fn assemble(query: Arc<QueryGraph>, decls: Vec<NodeDecl>, window: Timestamp) -> Result<Self, QueryError> {
        let bad = |m: String| Err(QueryError::MalformedTree(m));
        if window == 0 {
            return bad("window must be positive".into());
        }
        if decls.is_empty() {
            return bad("tree has no nodes".into());
        }
        let n = decls.len();
        let mut parent: Vec<Option<usize>> = vec![None; n];
        for (i, d) in decls.iter().enumerate() {
            if let NodeDecl::Join { left, right, .. } = d {
                for &c in [left, right] {
                    if c >= n || c == i {
                        return bad(format!("node {} has an invalid child reference", d.name()));
                    }
                    if parent[c].is_some() {
                        return bad(format!("node {} has more than one parent", decls[c].name()));
                    }
                    parent[c] = Some(i);
                }
                if left == right {
                    return bad(format!("node {} joins a node with itself", d.name()));
                }
            }
            if let NodeDecl::Leaf { edges, .. } = d {
                if let Some(&e) = edges.iter().find(|&&e| e >= query.edges.len()) {
                    return bad(format!("leaf {} references missing query edge {e}", d.name()));
                }
            }
        }
        let roots: Vec<usize> = (0..n).filter(|&i| parent[i].is_none()).collect();
        if roots.len() != 1 {
            return bad(format!("expected one root, found {}", roots.len()));
        }
        let root = roots[0];

        // children before parents; also detects cycles and unreachable nodes
        let mut order = Vec::with_capacity(n);
        let mut leaves = Vec::new();
        let mut stack = vec![(root, false)];
        let mut visited = vec![false; n];
        while let Some((i, expanded)) = stack.pop() {
            match &decls[i] {
                NodeDecl::Leaf { .. } => {
                    if visited[i] {
                        return bad("cycle in tree".into());
                    }
                    visited[i] = true;
                    leaves.push(NodeId(i));
                    order.push(i);
                }
                NodeDecl::Join { left, right, .. } => {
                    if expanded {
                        order.push(i);
                    } else {
                        if visited[i] {
                            return bad("cycle in tree".into());
                        }
                        visited[i] = true;
                        stack.push((i, true));
                        stack.push((*right, false));
                        stack.push((*left, false));
                    }
                }
            }
        }
        if order.len() != n {
            return bad("tree has unreachable nodes".into());
        }

        let mut nodes: Vec<Option<SjNode>> = vec![None; n];
        for &i in &order {
            let node = match &decls[i] {
                NodeDecl::Leaf { name, edges } => SjNode {
                    id: NodeId(i),
                    name: name.clone(),
                    parent: parent[i].map(NodeId),
                    sibling: None,
                    left: None,
                    right: None,
                    subgraph: Subgraph::from_edges(&query, edges),
                    cut: None,
                    ordered_join: false,
                },
                NodeDecl::Join {
                    name,
                    left,
                    right,
                    ordered,
                    subgraph,
                    cut,
                } => {
                    let l = nodes[*left].as_ref().expect("children precede parents").subgraph;
                    let r = nodes[*right].as_ref().expect("children precede parents").subgraph;
                    let has_event = |s: Subgraph| s.vertex_indices().any(|v| query.vertices[v].is_event);
                    SjNode {
                        id: NodeId(i),
                        name: name.clone(),
                        parent: parent[i].map(NodeId),
                        sibling: None,
                        left: Some(NodeId(*left)),
                        right: Some(NodeId(*right)),
                        subgraph: subgraph.unwrap_or_else(|| l.union(r)),
                        cut: Some(cut.unwrap_or_else(|| l.intersection(r))),
                        ordered_join: ordered.unwrap_or_else(|| has_event(l) && has_event(r)),
                    }
                }
            };
            nodes[i] = Some(node);
        }
        let mut nodes: Vec<SjNode> = nodes.into_iter().map(|n| n.expect("all nodes visited")).collect();
        for i in 0..n {
            if let (Some(l), Some(r)) = (nodes[i].left, nodes[i].right) {
                nodes[l.0].sibling = Some(r);
                nodes[r.0].sibling = Some(l);
            }
        }
        Ok(SjTree {
            query,
            nodes,
            root: NodeId(root),
            leaves,
            window,
        })
    }

    /// Checks the root, join, cut and leaf-partition properties. Every
    /// failure is listed with the offending node.
    pub fn validate(&self) -> ValidationReport {
        let mut failures = Vec::new();
        let q = &self.query;
        let root = self.node(self.root);
        if root.subgraph != q.full() {
            failures.push((self.root, Violation::RootNotQuery));
        }
        for node in &self.nodes {
            for e in node.subgraph.edge_indices() {
                let qe = &q.edges[e];
                if !node.subgraph.has_vertex(qe.a) || !node.subgraph.has_vertex(qe.b) {
                    failures.push((node.id, Violation::DanglingEdge(e)));
                }
            }
            match (node.left, node.right) {
                (Some(l), Some(r)) => {
                    let (ls, rs) = (self.node(l).subgraph, self.node(r).subgraph);
                    if node.subgraph != ls.union(rs) {
                        failures.push((node.id, Violation::NotJoinOfChildren));
                    }
                    if node.cut != Some(ls.intersection(rs)) {
                        failures.push((node.id, Violation::CutNotIntersection));
                    }
                }
                _ => {
                    if node.subgraph.edges == 0 {
                        failures.push((node.id, Violation::LeafWithoutEdges));
                    }
                }
            }
        }
        let mut owners: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
        for &leaf in &self.leaves {
            for e in self.node(leaf).subgraph.edge_indices() {
                owners.entry(e).or_default().push(leaf);
            }
        }
        for e in 0..q.edges.len() {
            match owners.get(&e) {
                None => failures.push((self.root, Violation::EdgeUncovered(e))),
                Some(ls) if ls.len() > 1 => {
                    for &l in ls {
                        failures.push((l, Violation::EdgeInSeveralLeaves(e)));
                    }
                }
                _ => {}
            }
        }
        ValidationReport { failures }
    }

    pub fn query(&self) -> &Arc<QueryGraph> {
        &self.query
    }

    pub fn node(&self, id: NodeId) -> &SjNode {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> &[SjNode] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn window(&self) -> Timestamp {
        self.window
    }

    pub fn with_window(mut self, window: Timestamp) -> Self {
        assert!(window > 0, "window must be positive");
        self.window = window;
        self
    }

    /// Leaves in left-to-right order, with their query subgraphs.
    pub fn leaf_primitives(&self) -> Vec<(NodeId, Subgraph)> {
        self.leaves.iter().map(|&l| (l, self.node(l).subgraph)).collect()
    }

    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.name == name).map(|n| n.id)
    }

    pub fn height(&self) -> usize {
        fn depth(t: &SjTree, n: NodeId) -> usize {
            let node = t.node(n);
            match (node.left, node.right) {
                (Some(l), Some(r)) => 1 + depth(t, l).max(depth(t, r)),
                _ => 0,
            }
        }
        depth(self, self.root)
    }

    /// The temporal constraints the ordered joins impose on a complete match.
    pub fn order_spec(&self) -> OrderSpec {
        let pairs = self
            .nodes
            .iter()
            .filter(|n| n.ordered_join)
            .filter_map(|n| Some((self.node(n.left?).subgraph.edges, self.node(n.right?).subgraph.edges)))
            .collect();
        OrderSpec { pairs }
    }
}

/// Temporal ordering requirements over query edges: for each pair, the
/// latest edge of the first set must be strictly earlier than the earliest
/// edge of the second.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OrderSpec {
    pub pairs: Vec<(u64, u64)>,
}

impl OrderSpec {
    pub fn unordered() -> Self {
        Self::default()
    }

    pub fn is_unordered(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `ts(e)` gives the timestamp mapped to query edge `e`.
    pub fn accepts(&self, ts: impl Fn(usize) -> Timestamp) -> bool {
        self.pairs.iter().all(|&(before, after)| {
            let latest = bits(before).map(&ts).max();
            let earliest = bits(after).map(&ts).min();
            match (latest, earliest) {
                (Some(l), Some(e)) => l < e,
                _ => true,
            }
        })
    }
}
