//! What periodic pruning does to stored partial matches and batch latency
//! when a few hot keywords keep producing them.
//!
//! cargo run --release --example window_pruning

use std::sync::Arc;

use sjstream::harness::{instantiate, label_degrees, run_stream, EngineKind, RunOptions};
use sjstream::streamio::{generate_stream, infer_schema, GeneratorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = env!("CARGO_MANIFEST_DIR");
    let mut config = GeneratorConfig::from_file(format!("{root}/configs/accumulate.conf"))?;
    config.total_edges = 60_000;
    let edges = generate_stream(&config)?;
    let (label, _) = label_degrees(&edges, "keyword").into_iter().max_by_key(|(_, d)| *d).unwrap();
    let template = std::fs::read_to_string(format!("{root}/queries/template_2event.q"))?;
    let spec = instantiate(&template, Some(&label))?;
    let schema = Arc::new(infer_schema(&edges, [&spec]));
    let mut compiled = spec.compile(&schema)?;

    let opts = RunOptions { engine: EngineKind::SjTree, batch_size: 1_000, keep_matches: false };
    for interval in [None, Some(10_000), Some(1_000), Some(100)] {
        compiled.config.prune_interval = interval;
        let report = run_stream(schema.clone(), &compiled, &edges, &opts)?;
        let last = report.batches.last().unwrap();
        println!(
            "prune every {:>6}: peak stored {:>6}, final stored {:>6}, peak batch {:.4}s, total {:.3}s, {} matches",
            interval.map_or("never".to_string(), |n| n.to_string()),
            report.peak_stored_matches(),
            last.stored_matches,
            report.peak_batch_seconds(),
            report.processing_seconds(),
            report.match_count
        );
    }
    Ok(())
}
