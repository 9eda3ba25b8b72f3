//! Experiment plans.
//!
//! A plan sweeps one parameter over a list of points and runs every
//! algorithm at every point once per seed. Plans are read from TOML:
//!
//! ```toml
//! name = "load"
//! topology = "europe25"          # built-in fixture or a directory
//! sweep = "load"                 # load | period_t | distribution | prefixes | topology_size
//! points = [3e8, 5e8, 1e9]
//! algorithms = ["dvr_only", "fbpr+nhops"]
//! repetitions = 10               # seeds 1..=10, or give `seeds = [...]`
//!
//! [run]
//! period_s = 10.0
//! duration_s = 600.0
//! n_ases = 10
//!
//! [traffic]
//! mode = "linear"                # or "skewed:<asn>"
//! mean_router_load_bps = 5e8     # bytes per second per router
//! ```
//!
//! Keys left out fall back to the chosen [`Preset`]. Distribution sweeps
//! take `"linear"`, `"skewed:<asn>"` or `"skewed:each"`, the last expanding
//! to one point per AS of the filtered topology.

use std::fmt;
use std::path::{Path, PathBuf};

use backflow_core::controller::Algorithm;
use backflow_core::topology::{AsId, Topology};
use serde::Deserialize;

use crate::error::{Result, SimError};
use crate::fixtures;
use crate::formats;
use crate::scenario::{Distribution, RunSpec};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Load,
    PeriodT,
    Distribution,
    Prefixes,
    TopologySize,
}

impl SweepKind {
    pub const ALL: [SweepKind; 5] =
        [SweepKind::Load, SweepKind::PeriodT, SweepKind::Distribution, SweepKind::Prefixes, SweepKind::TopologySize];

    pub fn name(&self) -> &'static str {
        match self {
            SweepKind::Load => "load",
            SweepKind::PeriodT => "period_t",
            SweepKind::Distribution => "distribution",
            SweepKind::Prefixes => "prefixes",
            SweepKind::TopologySize => "topology_size",
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum DistributionPoint {
    Fixed(Distribution),
    /// One skewed point per AS of the filtered topology.
    SkewedEach,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum SweepPoint {
    Load(f64),
    Period(f64),
    Distribution(DistributionPoint),
    Prefixes(usize),
    Size(usize),
}

impl SweepPoint {
    pub fn apply(&self, spec: &mut RunSpec) {
        match *self {
            SweepPoint::Load(l) => spec.load = l,
            SweepPoint::Period(t) => spec.period_s = t,
            SweepPoint::Distribution(DistributionPoint::Fixed(d)) => spec.distribution = d,
            SweepPoint::Distribution(DistributionPoint::SkewedEach) => {}
            SweepPoint::Prefixes(n) => spec.n_prefixes = n,
            SweepPoint::Size(k) => spec.top_k = k,
        }
    }
}

/// Where the base topology comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TopologySource {
    Builtin(String),
    Dir(PathBuf),
}

impl TopologySource {
    pub fn parse(s: &str, relative_to: Option<&Path>) -> Self {
        if fixtures::builtin(s).is_some() {
            return TopologySource::Builtin(s.to_string());
        }
        let p = PathBuf::from(s);
        match relative_to {
            Some(base) if p.is_relative() => TopologySource::Dir(base.join(p)),
            _ => TopologySource::Dir(p),
        }
    }

    pub fn load(&self) -> Result<Topology> {
        match self {
            TopologySource::Builtin(name) => fixtures::builtin(name).expect("checked at parse").load(name),
            TopologySource::Dir(d) => formats::load_topology_dir(d),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TopologySource::Builtin(n) => n.clone(),
            TopologySource::Dir(d) => d.display().to_string(),
        }
    }
}

/// Default scale of a plan.
#[derive(Copy, Clone, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Full scale: 25 ASes, one hour, 100 capacity randomizations.
    Paper,
    /// Desk scale: 10 ASes, ten minutes, 10 randomizations.
    Desk,
}

impl Preset {
    pub fn base_spec(&self) -> RunSpec {
        let mut s = RunSpec::new(Algorithm::DvrOnly, 0.0, 0);
        match self {
            Preset::Paper => {
                s.top_k = 25;
                s.duration_s = 3600.0;
                s.load = 4e9;
            }
            Preset::Desk => {
                s.top_k = 10;
                s.duration_s = 600.0;
                s.load = 5e8;
            }
        }
        s
    }

    pub fn repetitions(&self) -> usize {
        match self {
            Preset::Paper => 100,
            Preset::Desk => 10,
        }
    }

    pub fn points(&self, sweep: SweepKind) -> Vec<SweepPoint> {
        use SweepPoint::*;
        let linear = Distribution(DistributionPoint::Fixed(crate::scenario::Distribution::Linear));
        let each = Distribution(DistributionPoint::SkewedEach);
        match (self, sweep) {
            (Preset::Paper, SweepKind::Load) => [1e9, 2e9, 4e9, 6e9, 8e9].map(Load).to_vec(),
            (Preset::Desk, SweepKind::Load) => [3e8, 5e8, 1e9].map(Load).to_vec(),
            (Preset::Paper, SweepKind::PeriodT) => [10.0, 60.0, 120.0, 300.0, 600.0].map(Period).to_vec(),
            (Preset::Desk, SweepKind::PeriodT) => [10.0, 600.0].map(Period).to_vec(),
            (_, SweepKind::Distribution) => vec![linear, each],
            (_, SweepKind::Prefixes) => [1, 10, 50].map(Prefixes).to_vec(),
            (Preset::Paper, SweepKind::TopologySize) => [5, 10, 15, 20, 25].map(Size).to_vec(),
            (Preset::Desk, SweepKind::TopologySize) => [5, 10].map(Size).to_vec(),
        }
    }

    pub fn algorithms(&self, sweep: SweepKind) -> Vec<Algorithm> {
        use backflow_core::controller::{Selection, Stitching};
        match sweep {
            SweepKind::Load | SweepKind::PeriodT => Algorithm::ALL.to_vec(),
            SweepKind::TopologySize => vec![
                Algorithm::DvrOnly,
                Algorithm::bp(Selection::Standard, Stitching::Nhops),
                Algorithm::bp(Selection::Foresight, Stitching::Nhops),
            ],
            SweepKind::Distribution | SweepKind::Prefixes => {
                vec![Algorithm::DvrOnly, Algorithm::bp(Selection::Foresight, Stitching::Nhops)]
            }
        }
    }

    /// The plan this preset runs for one sweep.
    pub fn plan(&self, sweep: SweepKind) -> ExperimentPlan {
        let mut base = self.base_spec();
        if sweep == SweepKind::PeriodT {
            // The longest period still needs several controller ticks.
            base.duration_s = base.duration_s.max(3600.0);
        }
        ExperimentPlan {
            name: sweep.name().to_string(),
            topology: TopologySource::Builtin("europe25".into()),
            sweep,
            points: self.points(sweep),
            algorithms: self.algorithms(sweep),
            seeds: (1..=self.repetitions() as u64).collect(),
            base,
            traffic_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub name: String,
    pub topology: TopologySource,
    pub sweep: SweepKind,
    pub points: Vec<SweepPoint>,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    /// Parameters not varied by the sweep.
    pub base: RunSpec,
    /// Mixed into every run's traffic seed.
    pub traffic_seed: u64,
}

/// One run of a plan.
#[derive(Clone, Debug, PartialEq)]
pub struct Job {
    pub run_id: String,
    /// Index of the sweep point.
    pub point: usize,
    pub point_label: String,
    pub spec: RunSpec,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(SimError::Config("plan has no sweep points".into()));
        }
        if self.algorithms.is_empty() {
            return Err(SimError::Config("plan has no algorithms".into()));
        }
        if self.seeds.is_empty() {
            return Err(SimError::Config("repetitions must be at least 1".into()));
        }
        let b = &self.base;
        if !(b.load >= 0.0) || !b.load.is_finite() {
            return Err(SimError::Config(format!("bad router load {}", b.load)));
        }
        if b.top_k == 0 {
            return Err(SimError::Config("n_ases must be at least 1".into()));
        }
        if !(b.capacity_range.0 > 0.0 && b.capacity_range.0 <= b.capacity_range.1) {
            return Err(SimError::Config(format!("bad capacity range {:?}", b.capacity_range)));
        }
        for p in &self.points {
            let mut s = b.clone();
            p.apply(&mut s);
            if !(s.period_s > 0.0) || !(s.duration_s >= s.period_s) {
                return Err(SimError::Config(format!(
                    "duration {} s must cover at least one period of {} s",
                    s.duration_s, s.period_s
                )));
            }
            if !(s.load >= 0.0) || s.top_k == 0 {
                return Err(SimError::Config(format!("invalid sweep point {p:?}")));
            }
        }
        Ok(())
    }

    /// Expand into runs, in point, algorithm, seed order.
    pub fn jobs(&self, base: &Topology) -> Result<Vec<Job>> {
        let mut points: Vec<(String, SweepPoint, Distribution)> = Vec::new();
        for p in &self.points {
            match p {
                SweepPoint::Distribution(DistributionPoint::SkewedEach) => {
                    let filtered = base.filter_pipeline(self.base.top_k, true)?;
                    for a in filtered.ases() {
                        let d = Distribution::Skewed(a.as_id);
                        points.push((d.label(), *p, d));
                    }
                }
                _ => {
                    let mut s = self.base.clone();
                    p.apply(&mut s);
                    points.push((point_label(p, &s), *p, s.distribution));
                }
            }
        }
        let mut jobs = Vec::new();
        for (ix, (label, p, dist)) in points.iter().enumerate() {
            for &alg in &self.algorithms {
                for &seed in &self.seeds {
                    let mut spec = self.base.clone();
                    p.apply(&mut spec);
                    spec.distribution = *dist;
                    spec.algorithm = alg;
                    spec.seed = seed;
                    spec.traffic_seed = self.traffic_seed;
                    jobs.push(Job {
                        run_id: format!("{}-p{:02}-{}-s{}", self.name, ix, alg.name(), seed),
                        point: ix,
                        point_label: label.clone(),
                        spec,
                    });
                }
            }
        }
        Ok(jobs)
    }
}

fn point_label(p: &SweepPoint, s: &RunSpec) -> String {
    match p {
        SweepPoint::Load(l) => format!("{l:e}"),
        SweepPoint::Period(t) => format!("{t}"),
        SweepPoint::Distribution(_) => s.distribution.label(),
        SweepPoint::Prefixes(n) => n.to_string(),
        SweepPoint::Size(k) => k.to_string(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    name: Option<String>,
    topology: Option<String>,
    sweep: SweepKind,
    points: Option<Vec<toml::Value>>,
    algorithms: Option<Vec<String>>,
    repetitions: Option<usize>,
    seeds: Option<Vec<u64>>,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    traffic: TrafficSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    period_s: Option<f64>,
    duration_s: Option<f64>,
    n_ases: Option<usize>,
    n_prefixes: Option<usize>,
    capacity_range_bps: Option<[f64; 2]>,
    stitch_rounds: Option<usize>,
    rule_queue_batches: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrafficSection {
    mode: Option<String>,
    mean_router_load_bps: Option<f64>,
    seed: Option<u64>,
    batch_bytes: Option<u64>,
}

fn parse_point(sweep: SweepKind, v: &toml::Value) -> Result<SweepPoint> {
    let num = || v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
    let count = || v.as_integer().filter(|&i| i >= 0).map(|i| i as usize);
    let bad = || SimError::Config(format!("invalid {sweep} point {v}"));
    Ok(match sweep {
        SweepKind::Load => SweepPoint::Load(num().filter(|x| *x >= 0.0).ok_or_else(bad)?),
        SweepKind::PeriodT => SweepPoint::Period(num().filter(|x| *x > 0.0).ok_or_else(bad)?),
        SweepKind::Prefixes => SweepPoint::Prefixes(count().ok_or_else(bad)?),
        SweepKind::TopologySize => SweepPoint::Size(count().filter(|&k| k > 0).ok_or_else(bad)?),
        SweepKind::Distribution => {
            let s = v.as_str().ok_or_else(bad)?;
            if s == "skewed:each" {
                SweepPoint::Distribution(DistributionPoint::SkewedEach)
            } else {
                SweepPoint::Distribution(DistributionPoint::Fixed(Distribution::parse(s)?))
            }
        }
    })
}

/// Parse a plan from TOML text; unspecified keys come from `preset`.
pub fn parse_plan(text: &str, preset: Preset, relative_to: Option<&Path>) -> Result<ExperimentPlan> {
    let f: PlanFile = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
    let mut plan = preset.plan(f.sweep);
    if let Some(n) = f.name {
        plan.name = n;
    }
    if let Some(t) = f.topology {
        plan.topology = TopologySource::parse(&t, relative_to);
    }
    if let Some(points) = f.points {
        plan.points = points.iter().map(|v| parse_point(f.sweep, v)).collect::<Result<_>>()?;
    }
    if let Some(algs) = f.algorithms {
        plan.algorithms = algs
            .iter()
            .map(|a| a.parse::<Algorithm>().map_err(|_| SimError::UnknownAlgorithm(a.clone())))
            .collect::<Result<_>>()?;
    }
    match (f.repetitions, f.seeds) {
        (Some(_), Some(_)) => return Err(SimError::Config("give either repetitions or seeds, not both".into())),
        (Some(r), None) => plan.seeds = (1..=r as u64).collect(),
        (None, Some(s)) => plan.seeds = s,
        (None, None) => {}
    }
    let b = &mut plan.base;
    let r = f.run;
    if let Some(v) = r.period_s {
        b.period_s = v;
    }
    if let Some(v) = r.duration_s {
        b.duration_s = v;
    }
    if let Some(v) = r.n_ases {
        b.top_k = v;
    }
    if let Some(v) = r.n_prefixes {
        b.n_prefixes = v;
    }
    if let Some([lo, hi]) = r.capacity_range_bps {
        b.capacity_range = (lo, hi);
    }
    if let Some(v) = r.stitch_rounds {
        b.stitch_rounds = v;
    }
    if let Some(v) = r.rule_queue_batches {
        if v == 0 {
            return Err(SimError::Config("rule_queue_batches must be positive".into()));
        }
        b.rule_queue_batches = v;
    }
    let t = f.traffic;
    if let Some(m) = t.mode {
        b.distribution = Distribution::parse(&m)?;
    }
    if let Some(v) = t.mean_router_load_bps {
        b.load = v;
    }
    if let Some(v) = t.seed {
        plan.traffic_seed = v;
    }
    if let Some(v) = t.batch_bytes {
        if v == 0 {
            return Err(SimError::Config("batch_bytes must be positive".into()));
        }
        b.batch_bytes = v;
    }
    plan.validate()?;
    Ok(plan)
}

pub fn load_plan(path: &Path, preset: Preset) -> Result<ExperimentPlan> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    parse_plan(&text, preset, path.parent()).map_err(|e| match e {
        SimError::Config(msg) => SimError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Skewed-entry AS ids for a filtered topology, for documentation and tests.
pub fn entry_ases(base: &Topology, n_ases: usize) -> Result<Vec<AsId>> {
    Ok(base.filter_pipeline(n_ases, true)?.ases().iter().map(|a| a.as_id).collect())
}
