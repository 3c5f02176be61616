//! Query spec files: a query graph plus its join tree.
//!
//! ```text
//! #sjstream-query v1
//! window 100
//! vertex e1 article event
//! vertex e2 article event
//! vertex f keyword label="fire"
//! edge q1 e1 f has_kw
//! edge q2 e2 f has_kw
//! leaf L1 q1
//! leaf L2 q2
//! node root L1 L2 ordered
//! ```
//!
//! Join nodes derive their subgraph and cut from the children. `ordered` or
//! `unordered` overrides the default ordering; `edges=q1,q2` replaces the
//! derived subgraph, which the tree validation will then check. `slack N`
//! and `prune N|off` set the engine options; `window` is required.

use std::sync::Arc;

use thiserror::Error;

use crate::engine::EngineConfig;
use crate::graph::{Schema, Timestamp};
use crate::query::{NodeDecl, QueryEdge, QueryError, QueryGraph, QueryVertex, SjTree, Subgraph};

pub const QUERY_HEADER: &str = "#sjstream-query v1";

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("query spec has no window line")]
    MissingWindow,
    #[error("unknown {kind} {name:?}")]
    UnknownType { kind: &'static str, name: String },
    #[error(transparent)]
    Query(#[from] QueryError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct RawVertex {
    name: String,
    vtype: String,
    label: Option<String>,
    event: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct RawEdge {
    name: String,
    a: String,
    b: String,
    etype: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum RawNode {
    Leaf {
        name: String,
        edges: Vec<String>,
    },
    Join {
        name: String,
        left: String,
        right: String,
        ordered: Option<bool>,
        edges: Option<Vec<String>>,
        line: usize,
    },
}

/// A parsed spec with type names still unresolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySpec {
    pub window: Option<Timestamp>,
    pub disorder_slack: Timestamp,
    /// `None` keeps the engine default, `Some(None)` disables pruning.
    pub prune_interval: Option<Option<u64>>,
    vertices: Vec<RawVertex>,
    edges: Vec<RawEdge>,
    nodes: Vec<RawNode>,
}

/// A spec resolved against a schema.
#[derive(Debug, Clone)]
pub struct CompiledQuery {
    pub query: Arc<QueryGraph>,
    pub tree: Arc<SjTree>,
    pub config: EngineConfig,
}

/// Splits on whitespace; double quotes group, so `label="new york"` is one
/// token `label=new york`.
fn tokenize(line: &str, line_no: usize) -> Result<Vec<String>, SpecError> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut in_token = false;
    let mut quoted = false;
    for c in line.chars() {
        match c {
            '"' => {
                quoted = !quoted;
                in_token = true;
            }
            c if c.is_whitespace() && !quoted => {
                if in_token {
                    tokens.push(std::mem::take(&mut cur));
                    in_token = false;
                }
            }
            c => {
                cur.push(c);
                in_token = true;
            }
        }
    }
    if quoted {
        return Err(SpecError::Syntax {
            line: line_no,
            reason: "unterminated quote".into(),
        });
    }
    if in_token {
        tokens.push(cur);
    }
    Ok(tokens)
}

fn list(s: &str) -> Vec<String> {
    s.split(',').filter(|x| !x.is_empty()).map(String::from).collect()
}

impl QuerySpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let mut spec = QuerySpec {
            window: None,
            disorder_slack: 0,
            prune_interval: None,
            vertices: Vec::new(),
            edges: Vec::new(),
            nodes: Vec::new(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |reason: String| SpecError::Syntax { line: line_no, reason };
            let trimmed = raw.trim();
            if let Some(rest) = trimmed.strip_prefix("#sjstream-query") {
                if rest.trim() != "v1" {
                    return Err(err(format!("unsupported version {:?}", rest.trim())));
                }
                continue;
            }
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let tok = tokenize(trimmed, line_no)?;
            let number = |s: &str| s.parse::<u64>().map_err(|_| err(format!("expected a number, found {s:?}")));
            match (tok[0].as_str(), tok.len()) {
                ("window", 2) => {
                    let w = number(&tok[1])?;
                    if w == 0 {
                        return Err(err("window must be positive".into()));
                    }
                    spec.window = Some(w);
                }
                ("slack", 2) => spec.disorder_slack = number(&tok[1])?,
                ("prune", 2) => {
                    spec.prune_interval = Some(match tok[1].as_str() {
                        "off" | "0" => None,
                        s => Some(number(s)?),
                    })
                }
                ("vertex", n) if n >= 3 => {
                    let mut v = RawVertex {
                        name: tok[1].clone(),
                        vtype: tok[2].clone(),
                        label: None,
                        event: false,
                    };
                    for opt in &tok[3..] {
                        if opt == "event" {
                            v.event = true;
                        } else if let Some(l) = opt.strip_prefix("label=") {
                            v.label = Some(l.to_string());
                        } else {
                            return Err(err(format!("unknown vertex option {opt:?}")));
                        }
                    }
                    spec.vertices.push(v);
                }
                ("edge", 5) => spec.edges.push(RawEdge {
                    name: tok[1].clone(),
                    a: tok[2].clone(),
                    b: tok[3].clone(),
                    etype: tok[4].clone(),
                }),
                ("leaf", 3) => spec.nodes.push(RawNode::Leaf {
                    name: tok[1].clone(),
                    edges: list(&tok[2]),
                }),
                ("node", n) if n >= 4 => {
                    let mut ordered = None;
                    let mut edges = None;
                    for opt in &tok[4..] {
                        match opt.as_str() {
                            "ordered" => ordered = Some(true),
                            "unordered" => ordered = Some(false),
                            o => match o.strip_prefix("edges=") {
                                Some(l) => edges = Some(list(l)),
                                None => return Err(err(format!("unknown node option {o:?}"))),
                            },
                        }
                    }
                    spec.nodes.push(RawNode::Join {
                        name: tok[1].clone(),
                        left: tok[2].clone(),
                        right: tok[3].clone(),
                        ordered,
                        edges,
                        line: line_no,
                    });
                }
                (kw, _) => return Err(err(format!("malformed {kw:?} line"))),
            }
        }
        if spec.window.is_none() {
            return Err(SpecError::MissingWindow);
        }
        Ok(spec)
    }

    /// Type of the first query vertex carrying exactly `label`.
    pub fn labeled_vertex_type(&self, label: &str) -> Option<&str> {
        self.vertices
            .iter()
            .find(|v| v.label.as_deref() == Some(label))
            .map(|v| v.vtype.as_str())
    }

    /// Adds the vertex and edge types this spec mentions. Edge endpoint
    /// types come from the declared query vertices.
    pub fn register(&self, schema: &mut Schema) {
        for v in &self.vertices {
            schema.register_vertex_type(&v.vtype);
        }
        for e in &self.edges {
            let ty = |n: &str| self.vertices.iter().find(|v| v.name == n).map(|v| v.vtype.as_str());
            if let (Some(a), Some(b)) = (ty(&e.a), ty(&e.b)) {
                let _ = schema.register_edge_type(&e.etype, a, b);
            }
        }
    }

    pub fn compile(&self, schema: &Schema) -> Result<CompiledQuery, SpecError> {
        let window = self.window.ok_or(SpecError::MissingWindow)?;
        let unknown = |kind, name: &str| SpecError::UnknownType {
            kind,
            name: name.to_string(),
        };
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for v in &self.vertices {
            vertices.push(QueryVertex {
                name: v.name.clone(),
                vtype: schema.vertex_type(&v.vtype).ok_or_else(|| unknown("vertex type", &v.vtype))?,
                label: v.label.clone(),
                is_event: v.event,
            });
        }
        let vertex = |n: &str| {
            self.vertices
                .iter()
                .position(|v| v.name == n)
                .ok_or_else(|| unknown("query vertex", n))
        };
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            edges.push(QueryEdge {
                name: e.name.clone(),
                a: vertex(&e.a)?,
                b: vertex(&e.b)?,
                etype: schema.edge_type(&e.etype).ok_or_else(|| unknown("edge type", &e.etype))?,
            });
        }
        let query = Arc::new(QueryGraph::new(vertices, edges)?);

        let edge_list = |names: &[String]| -> Result<Vec<usize>, SpecError> {
            names
                .iter()
                .map(|n| query.edge_index(n).ok_or_else(|| unknown("query edge", n)))
                .collect()
        };
        let node_index = |n: &str| {
            self.nodes
                .iter()
                .position(|d| match d {
                    RawNode::Leaf { name, .. } | RawNode::Join { name, .. } => name == n,
                })
                .ok_or_else(|| unknown("tree node", n))
        };
        let mut decls = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            decls.push(match node {
                RawNode::Leaf { name, edges } => NodeDecl::Leaf {
                    name: name.clone(),
                    edges: edge_list(edges)?,
                },
                RawNode::Join {
                    name,
                    left,
                    right,
                    ordered,
                    edges,
                    line,
                } => {
                    let subgraph = match edges {
                        Some(names) => {
                            let idx = edge_list(names)?;
                            if idx.is_empty() {
                                return Err(SpecError::Syntax {
                                    line: *line,
                                    reason: "edges= needs at least one edge".into(),
                                });
                            }
                            Some(Subgraph::from_edges(&query, &idx))
                        }
                        None => None,
                    };
                    NodeDecl::Join {
                        name: name.clone(),
                        left: node_index(left)?,
                        right: node_index(right)?,
                        ordered: *ordered,
                        subgraph,
                        cut: None,
                    }
                }
            });
        }
        let tree = Arc::new(SjTree::new(query.clone(), decls, window)?);
        let mut config = EngineConfig::new(window);
        config.disorder_slack = self.disorder_slack;
        if let Some(p) = self.prune_interval {
            config.prune_interval = p;
        }
        Ok(CompiledQuery { query, tree, config })
    }
}

/// Parses `text` and resolves it against `schema`.
pub fn parse_query_spec(text: &str, schema: &Schema) -> Result<CompiledQuery, SpecError> {
    QuerySpec::parse(text)?.compile(schema)
}
