//! Edge stream and query spec files, and the synthetic stream generator.

mod edges;
mod generator;
mod spec;

pub use edges::{parse_edge_stream, read_edge_file, write_edge_stream, EdgeStreamReader, ParseError, EDGE_HEADER};
pub use generator::{generate_stream, ConfigError, GeneratorConfig, Relation};
pub use spec::{parse_query_spec, CompiledQuery, QuerySpec, SpecError, QUERY_HEADER};

use crate::graph::{Schema, StreamEdge};

/// Builds a schema covering every relation seen in `edges` and declared by
/// `specs`. Relations between two vertices of one type are left out so the
/// graph rejects such edges on insertion.
pub fn infer_schema<'a>(edges: &[StreamEdge], specs: impl IntoIterator<Item = &'a QuerySpec>) -> Schema {
    let mut schema = Schema::new();
    for spec in specs {
        spec.register(&mut schema);
    }
    for e in edges {
        schema.register_vertex_type(&e.src.vtype);
        schema.register_vertex_type(&e.dst.vtype);
        let _ = schema.register_edge_type(&e.etype, &e.src.vtype, &e.dst.vtype);
    }
    schema
}
