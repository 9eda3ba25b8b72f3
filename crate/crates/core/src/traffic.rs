//! Degree-driven traffic demand, batch generation and forecasting.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backpressure::ForecastView;
use crate::commodity::Commodities;
use crate::error::{Error, Result};
use crate::topology::Topology;

/// 50 MiB.
pub const DEFAULT_BATCH_BYTES: u64 = 50 << 20;

/// Destination popularity derived from AS degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct PopularityMatrix {
    p: Vec<f64>,
    n: usize,
    pij: Vec<f64>,
}

impl PopularityMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Aggregate popularity of AS `i`.
    pub fn p(&self, i: usize) -> f64 {
        self.p[i]
    }

    /// Share of traffic entering at `i` that is destined to `j`.
    pub fn pij(&self, i: usize, j: usize) -> f64 {
        self.pij[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.pij[i * self.n..(i + 1) * self.n]
    }
}

pub fn popularity(degrees: &[usize]) -> Result<PopularityMatrix> {
    let n = degrees.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 ASes, got {n}")));
    }
    if degrees.iter().any(|&d| d == 0) {
        return Err(Error::InvalidParameter("every AS needs degree >= 1".into()));
    }
    let total: usize = degrees.iter().sum();
    let p: Vec<f64> = degrees.iter().map(|&d| d as f64 / total as f64).collect();
    let mut pij = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                pij[i * n + j] = p[j] / (1.0 - p[i]);
            }
        }
    }
    Ok(PopularityMatrix { p, n, pij })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum TrafficMode {
    /// Every router injects traffic.
    Linear,
    /// The whole load enters through the routers of one AS (index).
    Skewed(usize),
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TrafficScenario {
    pub mode: TrafficMode,
    /// Mean injected load per router, bytes per second.
    pub mean_router_load: f64,
    pub seed: u64,
    pub batch_bytes: u64,
}

impl TrafficScenario {
    pub fn linear(mean_router_load: f64, seed: u64) -> Self {
        Self { mode: TrafficMode::Linear, mean_router_load, seed, batch_bytes: DEFAULT_BATCH_BYTES }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Batch {
    pub id: u64,
    pub size: u64,
    pub source_router: usize,
    pub source_as: usize,
    pub commodity: usize,
    pub created_at: f64,
}

/// Poisson batch source for a whole topology.
///
/// Arrivals from all entry routers are generated as one superposed Poisson
/// stream whose events are assigned to a uniformly chosen entry router, so
/// every router of an entry AS sees the same arrival law and output is
/// already time-ordered.
#[derive(Clone, Debug)]
pub struct TrafficGenerator {
    rng: ChaCha8Rng,
    entry_routers: Vec<(usize, usize)>,
    /// Per entry AS, cumulative destination distribution.
    cumulative: Vec<Vec<f64>>,
    hosted: Vec<Vec<usize>>,
    rate: f64,
    batch_bytes: u64,
    next_at: f64,
    next_id: u64,
}

impl TrafficGenerator {
    pub fn new(t: &Topology, commodities: &Commodities, pm: &PopularityMatrix, sc: &TrafficScenario) -> Result<Self> {
        if sc.batch_bytes == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(sc.mean_router_load >= 0.0) || !sc.mean_router_load.is_finite() {
            return Err(Error::Config(format!("bad router load {}", sc.mean_router_load)));
        }
        let n = t.ases().len();
        if pm.len() != n {
            return Err(Error::Config("popularity matrix does not match topology".into()));
        }
        let entry_as = |a: usize| match sc.mode {
            TrafficMode::Linear => true,
            TrafficMode::Skewed(x) => a == x,
        };
        if let TrafficMode::Skewed(x) = sc.mode {
            if x >= n {
                return Err(Error::Config(format!("skewed entry AS index {x} out of range")));
            }
        }
        let entry_routers: Vec<(usize, usize)> = (0..t.routers().len())
            .map(|r| (r, t.router_as_index(r)))
            .filter(|&(_, a)| entry_as(a))
            .collect();
        let cumulative = (0..n)
            .map(|i| {
                let mut acc = 0.0;
                pm.row(i)
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect()
            })
            .collect();
        let rate = sc.mean_router_load * t.routers().len() as f64 / sc.batch_bytes as f64;
        let mut g = Self {
            rng: ChaCha8Rng::seed_from_u64(sc.seed),
            entry_routers,
            cumulative,
            hosted: (0..n).map(|a| commodities.hosted_by(a).to_vec()).collect(),
            rate,
            batch_bytes: sc.batch_bytes,
            next_at: f64::INFINITY,
            next_id: 0,
        };
        if rate > 0.0 && !g.entry_routers.is_empty() {
            g.next_at = g.draw_gap();
        }
        Ok(g)
    }

    /// Total batch arrival rate, batches per second.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    fn draw_gap(&mut self) -> f64 {
        let u: f64 = self.rng.gen();
        -libm::log1p(-u) / self.rate
    }

    fn destination(&mut self, entry_as: usize) -> usize {
        let u: f64 = self.rng.gen();
        let cum = &self.cumulative[entry_as];
        let last = cum.len() - 1;
        // Skip a trailing zero-probability entry if rounding leaves u beyond it.
        let mut j = cum.partition_point(|&c| c <= u).min(last);
        while j == entry_as || self.hosted[j].is_empty() {
            j = if j == 0 { last } else { j - 1 };
        }
        let list = &self.hosted[j];
        if list.len() == 1 {
            list[0]
        } else {
            list[self.rng.gen_range(0..list.len())]
        }
    }

    /// All batches created in `[start, end)`. Windows must be requested in
    /// increasing, non-overlapping order.
    pub fn generate(&mut self, start: f64, end: f64) -> Vec<Batch> {
        let mut out = Vec::new();
        while self.next_at < end {
            let at = self.next_at;
            let (router, entry_as) = if self.entry_routers.len() == 1 {
                self.entry_routers[0]
            } else {
                self.entry_routers[self.rng.gen_range(0..self.entry_routers.len())]
            };
            let commodity = self.destination(entry_as);
            if at >= start {
                out.push(Batch { id: self.next_id, size: self.batch_bytes, source_router: router, source_as: entry_as, commodity, created_at: at });
                self.next_id += 1;
            }
            self.next_at = at + self.draw_gap();
        }
        out
    }
}

/// Generated bytes per (node, commodity), aggregated per window.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GenerationHistory {
    n_commodities: usize,
    windows: Vec<(f64, f64, Vec<u64>)>,
}

impl GenerationHistory {
    pub fn new(n_commodities: usize) -> Self {
        Self { n_commodities, windows: Vec::new() }
    }

    /// Record a window `[start, end)` with row-major per-(node, commodity)
    /// byte counts.
    pub fn push(&mut self, start: f64, end: f64, bytes: Vec<u64>) {
        debug_assert!(self.windows.last().map_or(true, |w| w.1 <= start + 1e-9), "history must be ordered");
        self.windows.push((start, end, bytes));
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// Bytes generated over the most recent `window_s` seconds of history.
/// Records straddling the window edge contribute pro rata.
pub fn forecast(history: &GenerationHistory, n_nodes: usize, window_s: f64) -> ForecastView {
    let nc = history.n_commodities;
    let mut g = ForecastView::zeros(n_nodes, nc);
    let Some(&(_, horizon, _)) = history.windows.last() else {
        return g;
    };
    let from = horizon - window_s;
    let mut acc = vec![0.0; n_nodes * nc];
    for (start, end, bytes) in history.windows.iter().rev() {
        if *end <= from {
            break;
        }
        let span = end - start;
        let weight = if span <= 0.0 { 1.0 } else { ((end - start.max(from)) / span).clamp(0.0, 1.0) };
        for (a, &b) in acc.iter_mut().zip(bytes) {
            *a += b as f64 * weight;
        }
    }
    for node in 0..n_nodes {
        for c in 0..nc {
            g.set(node, c, acc[node * nc + c]);
        }
    }
    g
}
