//! Assembling one simulation run from a base topology and run parameters.

use backflow_core::commodity::Commodities;
use backflow_core::controller::Algorithm;
use backflow_core::engine::{self, EngineConfig, MetricsReport};
use backflow_core::topology::{AsId, Topology, CAPACITY_RANGE_BPS};
use backflow_core::traffic::{TrafficMode, TrafficScenario, DEFAULT_BATCH_BYTES};

use crate::error::{Result, SimError};

/// Where external traffic enters.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Distribution {
    Linear,
    /// All traffic enters through the routers of this AS.
    Skewed(AsId),
}

impl Distribution {
    pub fn label(&self) -> String {
        match self {
            Distribution::Linear => "linear".into(),
            Distribution::Skewed(a) => format!("skewed:{}", a.0),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s == "linear" {
            return Ok(Distribution::Linear);
        }
        s.strip_prefix("skewed:")
            .and_then(|a| a.trim_start_matches("AS").parse().ok())
            .map(|a| Distribution::Skewed(AsId(a)))
            .ok_or_else(|| SimError::Config(format!("unknown distribution {s:?}; expected linear or skewed:<asn>")))
    }
}

/// Everything that identifies one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub algorithm: Algorithm,
    pub period_s: f64,
    pub duration_s: f64,
    /// Mean injected load per router, bytes per second.
    pub load: f64,
    pub top_k: usize,
    /// 0 routes whole ASes; otherwise prefixes per AS.
    pub n_prefixes: usize,
    pub distribution: Distribution,
    pub seed: u64,
    pub batch_bytes: u64,
    pub capacity_range: (f64, f64),
    pub stitch_rounds: usize,
    /// Priority-queue allowance of each rule, in batches.
    pub rule_queue_batches: u32,
    /// Mixed into the traffic seed; lets a plan vary traffic independently
    /// of the capacity draw.
    pub traffic_seed: u64,
}

impl RunSpec {
    pub fn new(algorithm: Algorithm, load: f64, seed: u64) -> Self {
        Self {
            algorithm,
            period_s: 10.0,
            duration_s: 3600.0,
            load,
            top_k: 25,
            n_prefixes: 0,
            distribution: Distribution::Linear,
            seed,
            batch_bytes: DEFAULT_BATCH_BYTES,
            capacity_range: CAPACITY_RANGE_BPS,
            stitch_rounds: 64,
            rule_queue_batches: 2,
            traffic_seed: 0,
        }
    }
}

/// The run's topology: filtered, capacity-randomized and, at prefix
/// granularity, with prefixes attached.
pub fn prepare_topology(base: &Topology, spec: &RunSpec) -> Result<Topology> {
    let t = base.filter_pipeline(spec.top_k, true)?;
    let t = t.randomize_capacities(spec.capacity_range.0, spec.capacity_range.1, spec.seed)?;
    if spec.n_prefixes > 0 {
        Ok(t.with_prefixes(spec.n_prefixes)?)
    } else {
        Ok(t)
    }
}

pub fn commodities_for(t: &Topology, spec: &RunSpec) -> Result<Commodities> {
    if spec.n_prefixes > 0 {
        Ok(Commodities::prefix_level(t)?)
    } else {
        Ok(Commodities::as_level(t))
    }
}

pub fn traffic_for(t: &Topology, spec: &RunSpec) -> Result<TrafficScenario> {
    let mode = match spec.distribution {
        Distribution::Linear => TrafficMode::Linear,
        Distribution::Skewed(a) => TrafficMode::Skewed(
            t.as_index(a)
                .ok_or_else(|| SimError::Config(format!("skewed entry {a} is not in the filtered topology")))?,
        ),
    };
    Ok(TrafficScenario {
        mode,
        mean_router_load: spec.load,
        // Distinct stream from the capacity draw.
        seed: spec.seed ^ 0x7472_6166_6669_6321 ^ spec.traffic_seed.rotate_left(17),
        batch_bytes: spec.batch_bytes,
    })
}

pub fn engine_config(spec: &RunSpec) -> EngineConfig {
    let mut cfg = EngineConfig::new(spec.algorithm, spec.duration_s, spec.period_s);
    cfg.controller.stitch_rounds = spec.stitch_rounds;
    cfg.rule_queue_batches = spec.rule_queue_batches;
    cfg
}

/// Run one simulation; returns the prepared topology alongside the metrics.
pub fn run_spec(base: &Topology, spec: &RunSpec) -> Result<(Topology, MetricsReport)> {
    let t = prepare_topology(base, spec)?;
    let c = commodities_for(&t, spec)?;
    let sc = traffic_for(&t, spec)?;
    let report = engine::run(&t, &c, &sc, &engine_config(spec))?;
    Ok((t, report))
}
