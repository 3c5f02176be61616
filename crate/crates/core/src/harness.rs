//! Batched runs with per-batch metrics, and the label degree sweep.
//!
//! Timings cover query processing only: graph insertion, local search and
//! tree updates. Parsing and output happen outside the timed region.

use std::collections::HashMap;
use std::io::{self, Write};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::baseline::Baseline;
use crate::engine::{Engine, EngineError, MatchRecord};
use crate::graph::{DynamicGraph, GraphError, Schema, StreamEdge};
use crate::streamio::{infer_schema, CompiledQuery, ConfigError, ParseError, QuerySpec, SpecError};

/// Placeholder replaced by a concrete label when a template is instantiated.
pub const LABEL_SLOT: &str = "{label}";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("edge {index}: {source}")]
    Graph {
        index: usize,
        #[source]
        source: GraphError,
    },
    #[error("degree bin {bin} [{low:.1}, {high:.1}] has no candidate labels")]
    InsufficientLabels { bin: usize, low: f64, high: f64 },
    #[error("template has no vertex labeled {LABEL_SLOT}")]
    NoLabelSlot,
    #[error("query has an unfilled {LABEL_SLOT} slot; pass a label")]
    UnfilledSlot,
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl HarnessError {
    /// 2 for malformed input files, 3 for unreadable files and failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Parse(ParseError::Io(_)) | HarnessError::Config(ConfigError::Io(_)) => 3,
            HarnessError::Parse(_) | HarnessError::Spec(_) | HarnessError::Config(_) | HarnessError::NoLabelSlot
            | HarnessError::UnfilledSlot => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    SjTree,
    Baseline,
}

impl FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sjtree" => Ok(EngineKind::SjTree),
            "baseline" => Ok(EngineKind::Baseline),
            _ => Err(format!("unknown engine {s:?}, expected sjtree or baseline")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub engine: EngineKind,
    pub batch_size: usize,
    /// Keep every emitted record in the report; otherwise only count them.
    pub keep_matches: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            engine: EngineKind::SjTree,
            batch_size: 1_000,
            keep_matches: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchMetrics {
    pub batch_index: usize,
    /// Cumulative edges processed at the end of the batch.
    pub edges_processed: usize,
    pub batch_seconds: f64,
    pub cumulative_matches: u64,
    pub stored_matches: usize,
    pub peak_stored_matches: usize,
    pub stored_per_node: Vec<usize>,
}

#[derive(Debug)]
pub struct RunReport {
    pub batches: Vec<BatchMetrics>,
    pub matches: Vec<MatchRecord>,
    pub match_count: u64,
    pub node_names: Vec<String>,
    pub graph: DynamicGraph,
}

impl RunReport {
    pub fn processing_seconds(&self) -> f64 {
        self.batches.iter().map(|b| b.batch_seconds).sum()
    }

    pub fn edges(&self) -> usize {
        self.batches.last().map_or(0, |b| b.edges_processed)
    }

    pub fn edges_per_second(&self) -> f64 {
        self.edges() as f64 / self.processing_seconds().max(f64::MIN_POSITIVE)
    }

    pub fn peak_batch_seconds(&self) -> f64 {
        self.batches.iter().map(|b| b.batch_seconds).fold(0.0, f64::max)
    }

    pub fn peak_stored_matches(&self) -> usize {
        self.batches.last().map_or(0, |b| b.peak_stored_matches)
    }

    /// Median over batches of batch time divided by batch size.
    pub fn median_per_edge_seconds(&self) -> f64 {
        let mut prev = 0;
        let per_edge: Vec<f64> = self
            .batches
            .iter()
            .map(|b| {
                let n = b.edges_processed - prev;
                prev = b.edges_processed;
                b.batch_seconds / n.max(1) as f64
            })
            .collect();
        median(per_edge)
    }

    pub fn write_metrics_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(
            out,
            "batch_index,edges_processed,batch_seconds,cumulative_matches,stored_matches,peak_stored_matches"
        )?;
        for name in &self.node_names {
            write!(out, ",stored_{name}")?;
        }
        writeln!(out)?;
        for b in &self.batches {
            write!(
                out,
                "{},{},{:.9},{},{},{}",
                b.batch_index, b.edges_processed, b.batch_seconds, b.cumulative_matches, b.stored_matches, b.peak_stored_matches
            )?;
            for n in &b.stored_per_node {
                write!(out, ",{n}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// One line per kept match, see [`MatchRecord::to_line`].
    pub fn write_matches<W: Write>(&self, query: &crate::query::QueryGraph, mut out: W) -> io::Result<()> {
        for m in &self.matches {
            writeln!(out, "{}", m.to_line(query, &self.graph))?;
        }
        Ok(())
    }
}

enum Runner {
    Tree(Engine),
    Scan(Baseline),
}

/// Streams `edges` through the chosen engine in batches of
/// `opts.batch_size`.
pub fn run_stream(
    schema: Arc<Schema>,
    compiled: &CompiledQuery,
    edges: &[StreamEdge],
    opts: &RunOptions,
) -> Result<RunReport, HarnessError> {
    let config = compiled.config.clone();
    config.validate()?;
    let mut graph = DynamicGraph::with_disorder_slack(schema, config.disorder_slack);
    let mut runner = match opts.engine {
        EngineKind::SjTree => Runner::Tree(Engine::new(compiled.tree.clone(), config.clone())?),
        EngineKind::Baseline => Runner::Scan(Baseline::new(
            compiled.query.clone(),
            config.window,
            compiled.tree.order_spec(),
        )),
    };
    let node_names: Vec<String> = compiled.tree.nodes().iter().map(|n| n.name.clone()).collect();
    let batch_size = opts.batch_size.max(1);
    let mut report = RunReport {
        batches: Vec::with_capacity(edges.len().div_ceil(batch_size)),
        matches: Vec::new(),
        match_count: 0,
        node_names,
        graph: DynamicGraph::new(Arc::new(Schema::new())),
    };
    let mut out = Vec::new();
    let mut processed = 0;
    for (batch_index, batch) in edges.chunks(batch_size).enumerate() {
        let start = Instant::now();
        for (i, edge) in batch.iter().enumerate() {
            let res = match &mut runner {
                Runner::Tree(engine) => engine.process_edge(&mut graph, edge, &mut out).map(|_| ()),
                Runner::Scan(baseline) => baseline.process_edge(&mut graph, edge, &mut out).map(|_| ()),
            };
            res.map_err(|source| HarnessError::Graph {
                index: processed + i,
                source,
            })?;
        }
        let batch_seconds = start.elapsed().as_secs_f64();
        processed += batch.len();
        report.match_count += out.len() as u64;
        if opts.keep_matches {
            report.matches.append(&mut out);
        } else {
            out.clear();
        }
        let (stored_per_node, peak) = match &runner {
            Runner::Tree(engine) => (engine.store().counts(), engine.stats().peak_stored),
            Runner::Scan(_) => (vec![0; report.node_names.len()], 0),
        };
        report.batches.push(BatchMetrics {
            batch_index,
            edges_processed: processed,
            batch_seconds,
            cumulative_matches: report.match_count,
            stored_matches: stored_per_node.iter().sum(),
            peak_stored_matches: peak,
            stored_per_node,
        });
    }
    report.graph = graph;
    Ok(report)
}

/// Parses a spec text, filling the label slot when `label` is given. A slot
/// left unfilled is an error.
pub fn instantiate(template: &str, label: Option<&str>) -> Result<QuerySpec, HarnessError> {
    let spec = QuerySpec::parse(&template.replace(LABEL_SLOT, label.unwrap_or(LABEL_SLOT)))?;
    if spec.labeled_vertex_type(LABEL_SLOT).is_some() {
        return Err(HarnessError::UnfilledSlot);
    }
    Ok(spec)
}

/// Parses a spec, infers the schema from it and the stream, and runs.
pub fn run_spec(spec: &QuerySpec, edges: &[StreamEdge], opts: &RunOptions) -> Result<(CompiledQuery, RunReport), HarnessError> {
    let schema = Arc::new(infer_schema(edges, [spec]));
    let compiled = spec.compile(&schema)?;
    let report = run_stream(schema, &compiled, edges, opts)?;
    Ok((compiled, report))
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Ranks starting at 1, ties sharing their mean rank.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; NaN when either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx).powi(2);
        vy += (b - my).powi(2);
    }
    cov / (vx * vy).sqrt()
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub bins: usize,
    pub per_bin: usize,
    pub batch_size: usize,
    /// Breaks ties between labels equally close to a bin center.
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            bins: 10,
            per_bin: 5,
            batch_size: 1_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelCandidate {
    pub bin: usize,
    pub label: String,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub bin: usize,
    pub label: String,
    pub degree: usize,
    pub median_batch_seconds: f64,
    pub median_per_edge_seconds: f64,
    pub matches: u64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub bins: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Per bin, the median over its labels of the median per-edge time.
    pub fn bin_medians(&self) -> Vec<f64> {
        (0..self.bins)
            .map(|b| {
                median(
                    self.rows
                        .iter()
                        .filter(|r| r.bin == b)
                        .map(|r| r.median_per_edge_seconds)
                        .collect(),
                )
            })
            .collect()
    }

    /// Rank correlation between bin index and bin median per-edge time.
    pub fn spearman(&self) -> f64 {
        let idx: Vec<f64> = (0..self.bins).map(|b| b as f64).collect();
        spearman(&idx, &self.bin_medians())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "bin,label,degree,median_batch_seconds,median_per_edge_seconds,matches")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{:.9},{:.12},{}",
                r.bin, r.label, r.degree, r.median_batch_seconds, r.median_per_edge_seconds, r.matches
            )?;
        }
        Ok(())
    }
}

/// Final degree of every labeled vertex of `vtype`, keyed by label.
pub fn label_degrees(edges: &[StreamEdge], vtype: &str) -> HashMap<String, usize> {
    let mut deg = HashMap::new();
    for e in edges {
        for v in [&e.src, &e.dst] {
            if v.vtype == vtype && !v.label.is_empty() {
                *deg.entry(v.label.clone()).or_insert(0) += 1;
            }
        }
    }
    deg
}

/// Splits `[min, max]` degree into equal-width bins and picks up to
/// `per_bin` labels inside each bin, closest to its center first.
pub fn select_labels(
    degrees: &HashMap<String, usize>,
    bins: usize,
    per_bin: usize,
    seed: u64,
) -> Result<Vec<LabelCandidate>, HarnessError> {
    let bins = bins.max(1);
    let lo = degrees.values().copied().min().unwrap_or(0) as f64;
    let hi = degrees.values().copied().max().unwrap_or(0) as f64;
    let width = (hi - lo) / bins as f64;
    let mut sorted: Vec<(&String, usize)> = degrees.iter().map(|(l, d)| (l, *d)).collect();
    sorted.sort();
    // seeded shuffle, then a stable sort by distance, so only exact ties move
    sorted.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::new();
    for b in 0..bins {
        let low = lo + width * b as f64;
        let high = if b + 1 == bins { hi } else { lo + width * (b + 1) as f64 };
        let center = (low + high) / 2.0;
        let mut inside: Vec<&(&String, usize)> = sorted
            .iter()
            .filter(|(_, d)| {
                let d = *d as f64;
                d >= low && (d < high || (b + 1 == bins && d <= high))
            })
            .collect();
        if inside.is_empty() {
            return Err(HarnessError::InsufficientLabels { bin: b, low, high });
        }
        inside.sort_by(|x, y| (x.1 as f64 - center).abs().total_cmp(&(y.1 as f64 - center).abs()));
        out.extend(inside.into_iter().take(per_bin).map(|(l, d)| LabelCandidate {
            bin: b,
            label: (*l).clone(),
            degree: *d,
        }));
    }
    Ok(out)
}

/// Runs the template once per selected label over the whole stream with the
/// tree engine and records per-edge processing times.
pub fn bench_degree_sweep(template: &str, edges: &[StreamEdge], opts: &SweepOptions) -> Result<SweepReport, HarnessError> {
    let raw = QuerySpec::parse(template)?;
    let vtype = raw.labeled_vertex_type(LABEL_SLOT).ok_or(HarnessError::NoLabelSlot)?.to_string();
    let schema = Arc::new(infer_schema(edges, [&raw]));
    let candidates = select_labels(&label_degrees(edges, &vtype), opts.bins, opts.per_bin, opts.seed)?;
    let run_opts = RunOptions {
        engine: EngineKind::SjTree,
        batch_size: opts.batch_size,
        keep_matches: false,
    };
    let mut rows = Vec::with_capacity(candidates.len());
    for c in candidates {
        let spec = instantiate(template, Some(&c.label))?;
        let compiled = spec.compile(&schema)?;
        let report = run_stream(schema.clone(), &compiled, edges, &run_opts)?;
        log::info!("bin {} label {} degree {}: {:.1} edges/s", c.bin, c.label, c.degree, report.edges_per_second());
        rows.push(SweepRow {
            bin: c.bin,
            label: c.label,
            degree: c.degree,
            median_batch_seconds: median(report.batches.iter().map(|b| b.batch_seconds).collect()),
            median_per_edge_seconds: report.median_per_edge_seconds(),
            matches: report.match_count,
        });
    }
    Ok(SweepReport { bins: opts.bins, rows })
}
