//! Continuous subgraph queries over timestamped, typed edge streams.
//!
//! A query graph is split into small search primitives arranged in a binary
//! join tree ([`SjTree`]). Every arriving edge triggers a local search for
//! the primitives it can complete; partial matches are stored per tree node
//! under a key built from the vertices shared with the sibling, so joining
//! is a hash lookup. Complete matches reach the root and are emitted once.
//!
//! ```no_run
//! use std::sync::Arc;
//! use sjstream::{infer_schema, parse_query_spec, read_edge_file, DynamicGraph, Engine, QuerySpec};
//!
//! let edges = read_edge_file("fixtures/tiny.edges").unwrap();
//! let spec = QuerySpec::parse(&std::fs::read_to_string("queries/template_2event.q").unwrap()).unwrap();
//! let schema = Arc::new(infer_schema(&edges, [&spec]));
//! let compiled = spec.compile(&schema).unwrap();
//! let mut graph = DynamicGraph::new(schema);
//! let mut engine = Engine::new(compiled.tree, compiled.config).unwrap();
//! for m in engine.process_cont_query(&mut graph, &edges).unwrap() {
//!     println!("{}", m.to_line(&compiled.query, &graph));
//! }
//! ```

pub mod baseline;
pub mod engine;
pub mod graph;
pub mod harness;
pub mod oracle;
pub mod query;
pub mod search;
pub mod store;
pub mod streamio;

pub use baseline::{inc_iso_match, khop_subgraph, Baseline, SubgraphView};
pub use engine::{join_matches, Engine, EngineConfig, EngineError, EngineStats, MatchRecord};
pub use graph::{DynamicGraph, EdgeId, EdgeType, GraphError, Schema, StreamEdge, TemporalEdge, Timestamp, VertexId, VertexSpec, VertexType};
pub use oracle::{enumerate_all, OracleError, OracleMatch};
pub use query::{Mapping, MatchSignature, NodeDecl, NodeId, OrderSpec, QueryEdge, QueryError, QueryGraph, QueryVertex, SjTree, Subgraph};
pub use search::{local_search, star_search, Embedding};
pub use store::{make_join_key, JoinKey, MatchStore, PartialMatch};
pub use streamio::{
    generate_stream, infer_schema, parse_edge_stream, parse_query_spec, read_edge_file, write_edge_stream, GeneratorConfig,
    QuerySpec,
};
