//! Per-edge cost of one query template as the label's degree grows.
//!
//! cargo run --release --example degree_sweep

use sjstream::harness::{bench_degree_sweep, SweepOptions};
use sjstream::streamio::{generate_stream, GeneratorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = env!("CARGO_MANIFEST_DIR");
    let mut config = GeneratorConfig::from_file(format!("{root}/configs/degree_sweep.conf"))?;
    config.total_edges = 40_000;
    let edges = generate_stream(&config)?;
    let template = std::fs::read_to_string(format!("{root}/queries/template_2event.q"))?;

    let opts = SweepOptions { bins: 10, per_bin: 5, batch_size: 1_000, seed: 0 };
    let sweep = bench_degree_sweep(&template, &edges, &opts)?;
    for (bin, median) in sweep.bin_medians().iter().enumerate() {
        let degrees: Vec<usize> = sweep.rows.iter().filter(|r| r.bin == bin).map(|r| r.degree).collect();
        println!("bin {bin}: {:>6.3} us/edge, degrees {degrees:?}", median * 1e6);
    }
    println!("spearman {:.3}", sweep.spearman());
    Ok(())
}
