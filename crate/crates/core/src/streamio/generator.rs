//! Seeded synthetic stream generator.
//!
//! Each event is a fresh vertex of the event type (or one drawn from a fixed
//! pool) that links to a few feature vertices per relation. Features are
//! drawn with Zipf weights by rank; `hotspots` lifts the first few ranks to
//! weights spread evenly between 1 and `hotspot_weight`, which plants a range
//! of feature degrees. A feature that reaches `max_degree` is never drawn
//! again.
//!
//! Config files are flat `key = value` lines:
//!
//! ```text
//! seed = 7
//! total_edges = 10000
//! event_type = article
//! features = keyword:500, location:80
//! relations = has_kw:keyword:3, in_loc:location:1
//! zipf_exponent = 1.0
//! ```

use std::collections::HashSet;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Schema, StreamEdge, Timestamp, VertexSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("invalid generator config: {0}")]
    Invalid(String),
    #[error("every {0} vertex reached max_degree")]
    DegreeExhausted(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub edge_type: String,
    pub feature_type: String,
    /// Distinct features linked per event.
    pub per_event: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub total_edges: usize,
    pub event_type: String,
    /// 0 makes every event a new vertex; otherwise events repeat from a pool.
    pub event_population: usize,
    pub features: Vec<(String, usize)>,
    pub relations: Vec<Relation>,
    pub zipf_exponent: f64,
    /// 0 means unlimited.
    pub max_degree: usize,
    pub hotspots: usize,
    pub hotspot_weight: f64,
    pub start_time: Timestamp,
    pub timestamp_step: Timestamp,
    /// Events sharing one timestamp before the clock advances.
    pub events_per_tick: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            total_edges: 10_000,
            event_type: "article".into(),
            event_population: 0,
            features: vec![("keyword".into(), 500)],
            relations: vec![Relation {
                edge_type: "has_kw".into(),
                feature_type: "keyword".into(),
                per_event: 3,
            }],
            zipf_exponent: 1.0,
            max_degree: 0,
            hotspots: 0,
            hotspot_weight: 1.0,
            start_time: 1,
            timestamp_step: 1,
            events_per_tick: 1,
        }
    }
}

impl GeneratorConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = GeneratorConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |reason: String| ConfigError::Syntax { line, reason };
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, found {trimmed:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let int = |v: &str| v.parse::<u64>().map_err(|_| err(format!("{key}: expected an integer, found {v:?}")));
            let float = |v: &str| v.parse::<f64>().map_err(|_| err(format!("{key}: expected a number, found {v:?}")));
            let items = || value.split(',').map(str::trim).filter(|s| !s.is_empty());
            match key {
                "version" if value == "1" => {}
                "version" => return Err(err(format!("unsupported version {value:?}"))),
                "seed" => c.seed = int(value)?,
                "total_edges" => c.total_edges = int(value)? as usize,
                "event_type" => c.event_type = value.to_string(),
                "event_population" => c.event_population = int(value)? as usize,
                "zipf_exponent" => c.zipf_exponent = float(value)?,
                "max_degree" => c.max_degree = int(value)? as usize,
                "hotspots" => c.hotspots = int(value)? as usize,
                "hotspot_weight" => c.hotspot_weight = float(value)?,
                "start_time" => c.start_time = int(value)?,
                "timestamp_step" => c.timestamp_step = int(value)?,
                "events_per_tick" => c.events_per_tick = int(value)? as usize,
                "features" => {
                    c.features = items()
                        .map(|item| {
                            let (t, n) = item
                                .split_once(':')
                                .ok_or_else(|| err(format!("expected type:population, found {item:?}")))?;
                            Ok((t.trim().to_string(), int(n.trim())? as usize))
                        })
                        .collect::<Result<_, ConfigError>>()?
                }
                "relations" => {
                    c.relations = items()
                        .map(|item| {
                            let parts: Vec<&str> = item.split(':').map(str::trim).collect();
                            match parts.as_slice() {
                                [et, ft, n] => Ok(Relation {
                                    edge_type: et.to_string(),
                                    feature_type: ft.to_string(),
                                    per_event: int(n)? as usize,
                                }),
                                _ => Err(err(format!("expected edge_type:feature_type:count, found {item:?}"))),
                            }
                        })
                        .collect::<Result<_, ConfigError>>()?
                }
                _ => return Err(err(format!("unknown key {key:?}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.relations.is_empty() {
            return bad("no relations".into());
        }
        if self.events_per_tick == 0 {
            return bad("events_per_tick must be positive".into());
        }
        if !(self.zipf_exponent >= 0.0 && self.zipf_exponent.is_finite()) {
            return bad(format!("zipf_exponent {} must be a finite number >= 0", self.zipf_exponent));
        }
        if !(self.hotspot_weight > 0.0 && self.hotspot_weight.is_finite()) {
            return bad(format!("hotspot_weight {} must be positive", self.hotspot_weight));
        }
        for r in &self.relations {
            let Some(&(_, pop)) = self.features.iter().find(|(t, _)| *t == r.feature_type) else {
                return bad(format!("relation {} uses undeclared feature type {}", r.edge_type, r.feature_type));
            };
            if r.feature_type == self.event_type {
                return bad(format!("relation {} links the event type to itself", r.edge_type));
            }
            if r.per_event == 0 || r.per_event > pop {
                return bad(format!(
                    "relation {} draws {} features from a population of {pop}",
                    r.edge_type, r.per_event
                ));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        let mut s = Schema::new();
        s.register_vertex_type(&self.event_type);
        for (t, _) in &self.features {
            s.register_vertex_type(t);
        }
        for r in &self.relations {
            s.register_edge_type(&r.edge_type, &self.event_type, &r.feature_type)
                .expect("validated relation");
        }
        s
    }

    /// Label given to the feature of `ftype` at popularity rank `rank`.
    pub fn feature_label(ftype: &str, rank: usize) -> String {
        format!("{ftype}{rank}")
    }

    fn weights(&self, population: usize) -> Vec<f64> {
        (0..population)
            .map(|r| {
                if r < self.hotspots {
                    let spread = if self.hotspots > 1 {
                        (self.hotspots - 1 - r) as f64 / (self.hotspots - 1) as f64
                    } else {
                        1.0
                    };
                    1.0 + spread * (self.hotspot_weight - 1.0)
                } else {
                    1.0 / ((r + 1) as f64).powf(self.zipf_exponent)
                }
            })
            .collect()
    }
}

struct FeaturePool {
    ftype: String,
    sampler: WeightedIndex<f64>,
    degree: Vec<usize>,
    live: usize,
}

/// Generates exactly `total_edges` edges; the same config always yields the
/// same stream.
pub fn generate_stream(config: &GeneratorConfig) -> Result<Vec<StreamEdge>, ConfigError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pools: Vec<FeaturePool> = Vec::with_capacity(config.features.len());
    for (ftype, pop) in &config.features {
        let weights = config.weights(*pop);
        let sampler = WeightedIndex::new(&weights).map_err(|e| ConfigError::Invalid(format!("{ftype}: {e}")))?;
        pools.push(FeaturePool {
            ftype: ftype.clone(),
            sampler,
            degree: vec![0; *pop],
            live: *pop,
        });
    }
    let relation_pool: Vec<usize> = config
        .relations
        .iter()
        .map(|r| pools.iter().position(|p| p.ftype == r.feature_type).expect("validated"))
        .collect();

    let mut out = Vec::with_capacity(config.total_edges);
    let mut event_no = 0usize;
    let mut picked = HashSet::new();
    'events: while out.len() < config.total_edges {
        let tick = (event_no / config.events_per_tick) as Timestamp;
        let timestamp = config.start_time + tick * config.timestamp_step;
        let event_key = if config.event_population == 0 {
            format!("{}{event_no}", config.event_type)
        } else {
            format!("{}{}", config.event_type, rng.gen_range(0..config.event_population))
        };
        event_no += 1;
        for (r, &p) in config.relations.iter().zip(&relation_pool) {
            let pool = &mut pools[p];
            picked.clear();
            while picked.len() < r.per_event {
                let cap = config.max_degree;
                let capped = |degree: &[usize], k: usize| cap > 0 && degree[k] >= cap;
                let picked_live = picked.iter().filter(|&&k| !capped(&pool.degree, k)).count();
                if pool.live == picked_live {
                    return Err(ConfigError::DegreeExhausted(pool.ftype.clone()));
                }
                let rank = pool.sampler.sample(&mut rng);
                if !picked.insert(rank) {
                    continue;
                }
                pool.degree[rank] += 1;
                out.push(edge(config, &event_key, pool, rank, timestamp, &r.edge_type));
                if capped(&pool.degree, rank) {
                    pool.live -= 1;
                    // an all-zero table is rejected, and the live count guards sampling anyway
                    if pool.live > 0 {
                        pool.sampler
                            .update_weights(&[(rank, &0.0)])
                            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                    }
                }
                if out.len() >= config.total_edges {
                    break 'events;
                }
            }
        }
    }
    Ok(out)
}

fn edge(
    config: &GeneratorConfig,
    event_key: &str,
    pool: &FeaturePool,
    rank: usize,
    timestamp: Timestamp,
    etype: &str,
) -> StreamEdge {
    let label = GeneratorConfig::feature_label(&pool.ftype, rank);
    StreamEdge {
        timestamp,
        src: VertexSpec::new(event_key, config.event_type.as_str(), ""),
        dst: VertexSpec::new(format!("{}:{rank}", pool.ftype), pool.ftype.as_str(), label),
        etype: etype.to_string(),
    }
}
