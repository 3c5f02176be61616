//! Searching a single primitive around an arriving edge, with and without a
//! time cutoff.
//!
//! cargo run --example local_search

use std::sync::Arc;

use sjstream::{local_search, DynamicGraph, QueryEdge, QueryGraph, QueryVertex, Schema, StreamEdge, Subgraph, VertexSpec};

fn tag(t: u64, article: &str, kind: &str, key: &str, label: &str, etype: &str) -> StreamEdge {
    StreamEdge {
        timestamp: t,
        src: VertexSpec::new(article, "article", ""),
        dst: VertexSpec::new(key, kind, label),
        etype: etype.into(),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut schema = Schema::new();
    schema.register_edge_type("has_kw", "article", "keyword")?;
    schema.register_edge_type("in_loc", "article", "location")?;
    let schema = Arc::new(schema);

    // star: an article with keyword `storm` and some location
    let query = QueryGraph::new(
        vec![
            QueryVertex { name: "a".into(), vtype: schema.vertex_type("article").unwrap(), label: None, is_event: true },
            QueryVertex {
                name: "k".into(),
                vtype: schema.vertex_type("keyword").unwrap(),
                label: Some("storm".into()),
                is_event: false,
            },
            QueryVertex { name: "p".into(), vtype: schema.vertex_type("location").unwrap(), label: None, is_event: false },
        ],
        vec![
            QueryEdge { name: "kw".into(), a: 0, b: 1, etype: schema.edge_type("has_kw").unwrap() },
            QueryEdge { name: "loc".into(), a: 0, b: 2, etype: schema.edge_type("in_loc").unwrap() },
        ],
    )?;
    let star = query.full();

    let mut graph = DynamicGraph::new(schema);
    for e in [
        tag(1, "a1", "location", "p1", "oslo", "in_loc"),
        tag(2, "a1", "location", "p2", "bergen", "in_loc"),
        tag(3, "a2", "location", "p1", "oslo", "in_loc"),
        tag(8, "a1", "keyword", "k1", "storm", "has_kw"),
    ] {
        let anchor = graph.update_graph(&e)?;
        let found = local_search(&graph, &query, star, &anchor, 0);
        println!("t={} {}: {} embedding(s)", e.timestamp, e.dst.key, found.len());
    }

    // the same anchor, but only edges from t >= 2 may take part
    let anchor = *graph.edges().last().unwrap();
    for min_ts in [0, 2, 5] {
        let found = local_search(&graph, &query, star, &anchor, min_ts);
        let places: Vec<String> = found
            .iter()
            .map(|m| format!("{} [{}, {}]", graph.vertex(m.mapping.vertices[2].unwrap()).label, m.t_low, m.t_high))
            .collect();
        println!("min_ts {min_ts}: {places:?}");
    }

    let single = Subgraph::from_edges(&query, &[0]);
    println!("keyword edge alone: {} embedding(s)", local_search(&graph, &query, single, &anchor, 0).len());
    Ok(())
}
