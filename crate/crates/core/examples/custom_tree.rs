//! Building a query and its join tree in code, and what validation reports
//! when a tree is wired wrong.
//!
//! cargo run --example custom_tree

use std::sync::Arc;

use sjstream::{NodeDecl, QueryEdge, QueryGraph, QueryVertex, Schema, SjTree, Subgraph};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut schema = Schema::new();
    schema.register_edge_type("has_kw", "article", "keyword")?;
    schema.register_edge_type("in_loc", "article", "location")?;
    let (article, keyword, location) = (
        schema.vertex_type("article").unwrap(),
        schema.vertex_type("keyword").unwrap(),
        schema.vertex_type("location").unwrap(),
    );
    let vertex = |name: &str, vtype, label: Option<&str>, is_event| QueryVertex {
        name: name.into(),
        vtype,
        label: label.map(String::from),
        is_event,
    };
    let edge = |name: &str, a, b, etype| QueryEdge { name: name.into(), a, b, etype };
    let kw = schema.edge_type("has_kw").unwrap();
    let loc = schema.edge_type("in_loc").unwrap();

    // two articles about `flood` from the same place
    let query = Arc::new(QueryGraph::new(
        vec![
            vertex("a1", article, None, true),
            vertex("a2", article, None, true),
            vertex("k", keyword, Some("flood"), false),
            vertex("p", location, None, false),
        ],
        vec![edge("k1", 0, 2, kw), edge("l1", 0, 3, loc), edge("k2", 1, 2, kw), edge("l2", 1, 3, loc)],
    )?);

    // one star per article, joined on the shared keyword and location
    let decls = vec![NodeDecl::leaf("first", &[0, 1]), NodeDecl::leaf("second", &[2, 3]), NodeDecl::join("root", 0, 1)];
    let tree = SjTree::new(query.clone(), decls.clone(), 30)?;
    for node in tree.nodes() {
        let edges: Vec<&str> = node.subgraph.edge_indices().map(|e| query.edges[e].name.as_str()).collect();
        let cut: Vec<&str> = node
            .cut
            .map(|c| c.vertex_indices().map(|v| query.vertices[v].name.as_str()).collect())
            .unwrap_or_default();
        println!("{:<7} edges {:?} cut {:?} ordered {}", node.name, edges, cut, node.ordered_join);
    }
    println!("height {}, diameter {}", tree.height(), query.diameter());

    // a root that claims fewer edges than its children hold
    let mut broken = decls;
    if let NodeDecl::Join { subgraph, .. } = &mut broken[2] {
        *subgraph = Some(Subgraph::from_edges(&query, &[0, 1, 2]));
    }
    let assembled = SjTree::assemble(query, broken, 30)?;
    println!("broken tree:\n{}", assembled.validate());
    Ok(())
}
