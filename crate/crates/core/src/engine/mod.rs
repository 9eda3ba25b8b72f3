//! Deterministic discrete-event simulation of a router-level backbone.
//!
//! Routers hold batches in a shared memory and forward them through per-link
//! NICs with a two-slot buffer (one batch serializing, one staged). Routing
//! is hierarchical: the next AS comes from the AS-level distance-vector table
//! or an installed priority rule, and the egress link is the router's own
//! link to that AS when it has one, otherwise an internal hop to the nearest
//! router that does. A controller tick every actuation period collects
//! backlogs, derives rules and re-routes queued batches.

pub mod metrics;

use alloc::collections::{BinaryHeap, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::backpressure::ForecastView;
use crate::commodity::Commodities;
use crate::controller::{Algorithm, Controller, ControllerConfig, Selection};
use crate::error::{Error, Result};
use crate::policy::{compute_dvr, Granularity, RoutingTable};
use crate::topology::{LinkKind, Topology};
use crate::traffic::{forecast, popularity, Batch, GenerationHistory, TrafficGenerator, TrafficScenario};

pub use metrics::{mean_ci, queue_update, stability_metric, t_quantile_95, MeanCi, MetricsReport, RuleRecord, T_95_DF19};
use metrics::SegmentStats;

/// Routing marker: the router belongs to the commodity's host AS.
const DELIVER: u32 = u32::MAX;
const NO_ROUTE: u32 = u32::MAX - 1;
const NO_RULE: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    pub duration_s: f64,
    /// Actuation period of the controller.
    pub period_s: f64,
    pub controller: ControllerConfig,
    /// Router-level hop limit after which a batch is discarded.
    pub max_hops: u16,
    /// Batch-means segments for confidence intervals.
    pub segments: usize,
    /// Run the per-period queue and conservation audits.
    pub audit: bool,
    /// Batches each rule may have committed to its link's priority queue,
    /// including those still crossing the owner AS towards it.
    pub rule_queue_batches: u32,
    /// Keep the rules of the last controller tick in the report.
    pub record_rules: bool,
}

impl EngineConfig {
    pub fn new(algorithm: Algorithm, duration_s: f64, period_s: f64) -> Self {
        Self {
            duration_s,
            period_s,
            controller: ControllerConfig::new(algorithm),
            max_hops: 64,
            segments: 20,
            audit: true,
            rule_queue_batches: 2,
            record_rules: false,
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.controller.algorithm
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period_s > 0.0) || !self.period_s.is_finite() {
            return Err(Error::Config(format!("period must be positive, got {}", self.period_s)));
        }
        if !(self.duration_s >= self.period_s) || !self.duration_s.is_finite() {
            return Err(Error::Config(format!(
                "duration {} s is shorter than one period of {} s",
                self.duration_s, self.period_s
            )));
        }
        if self.rule_queue_batches == 0 {
            return Err(Error::Config("rule queue must admit at least one batch".into()));
        }
        if self.segments < 2 {
            return Err(Error::Config("at least two batch-means segments are needed".into()));
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
struct Held {
    commodity: u32,
    hops: u16,
    created_at: f64,
    /// Admission order, used to restore FIFO order when re-routing.
    seq: u64,
    /// Rule link this batch is committed to, or `NO_RULE`.
    via: u32,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Tick = 0,
    TxDone = 1,
    Arrival = 2,
    Generation = 3,
}

#[derive(Copy, Clone, Debug)]
struct Event {
    time: f64,
    kind: Kind,
    seq: u64,
    /// Link for transmission events, router for arrivals.
    target: u32,
    batch: Held,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    /// Reversed so that the max-heap yields the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.kind.cmp(&self.kind))
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Clone, Debug, Default)]
struct Nic {
    serializing: Option<Held>,
    staged: Option<Held>,
    priority: VecDeque<Held>,
    normal: VecDeque<Held>,
}

/// One simulation run.
pub struct Simulation<'a> {
    t: &'a Topology,
    cfg: EngineConfig,
    n_c: usize,
    n_a: usize,
    batch_bytes: u64,
    hosts: Vec<usize>,
    router_as: Vec<usize>,
    routers_of: Vec<Vec<usize>>,
    link_from: Vec<u32>,
    link_to: Vec<u32>,
    tx_time: Vec<f64>,
    latency: Vec<f64>,
    peering: Vec<bool>,
    dvr: RoutingTable,
    /// Default egress per (router, next AS).
    egress_dv: Vec<u32>,
    /// Distance-vector egress per (router, commodity).
    route: Vec<u32>,
    /// Internal link per (router, router) inside one AS.
    internal: Vec<u32>,
    /// Committed batches per rule link.
    rule_pending: Vec<u32>,
    /// Rules currently installed on each link.
    rules_on_link: Vec<u32>,
    /// Rule link per (AS, commodity).
    rule_link: Vec<u32>,
    nics: Vec<Nic>,
    mem_used: Vec<u64>,
    mem_cap: Vec<u64>,
    held: Vec<u64>,
    prev_held: Vec<u64>,
    period_out: Vec<u64>,
    period_in: Vec<u64>,
    period_gen: Vec<u64>,
    gen_per_as: Vec<u64>,
    history: GenerationHistory,
    controller: Option<Controller>,
    generator: TrafficGenerator,
    script: Option<Vec<Batch>>,
    pending: Vec<Batch>,
    cursor: usize,
    heap: BinaryHeap<Event>,
    seq: u64,
    admit_seq: u64,
    now: f64,
    last_tick: f64,
    ticks: u64,
    seg: SegmentStats,
    ingress: Vec<u64>,
    backlog_samples: Vec<f64>,
    generated: u64,
    delivered: u64,
    delivered_n: u64,
    latency_sum: f64,
    overflow: u64,
    ttl: u64,
    unroutable: u64,
    in_flight: u64,
    transmitted: u64,
    report: MetricsReport,
    digest: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv(mut h: u64, x: u64) -> u64 {
    for b in x.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

impl<'a> Simulation<'a> {
    pub fn new(t: &'a Topology, commodities: &Commodities, scenario: &TrafficScenario, cfg: EngineConfig) -> Result<Self> {
        cfg.validate()?;
        t.validate()?;
        let n_r = t.routers().len();
        let n_a = t.ases().len();
        let n_c = commodities.len();
        let n_l = t.links().len();
        if n_c == 0 {
            return Err(Error::Config("no commodities".into()));
        }
        let degrees: Vec<usize> = t.ases().iter().map(|a| a.degree.max(1)).collect();
        let pm = popularity(&degrees)?;
        let generator = TrafficGenerator::new(t, commodities, &pm, scenario)?;
        let batch_bytes = scenario.batch_bytes;

        let router_as: Vec<usize> = (0..n_r).map(|r| t.router_as_index(r)).collect();
        let mut routers_of = vec![Vec::new(); n_a];
        for (r, &a) in router_as.iter().enumerate() {
            routers_of[a].push(r);
        }
        let mut link_from = Vec::with_capacity(n_l);
        let mut link_to = Vec::with_capacity(n_l);
        for l in 0..n_l {
            let (a, b) = t.link_endpoints(l);
            link_from.push(a as u32);
            link_to.push(b as u32);
        }
        let tx_time = t.links().iter().map(|l| batch_bytes as f64 * 8.0 / l.capacity_bps).collect();
        let latency = t.links().iter().map(|l| l.latency_s).collect();
        let peering = t.links().iter().map(|l| l.kind == LinkKind::Peering).collect();
        let dvr = compute_dvr(t, Granularity::AsLevel);

        let controller = match cfg.controller.algorithm {
            Algorithm::DvrOnly => None,
            _ => Some(Controller::new(t, commodities, cfg.controller.clone())),
        };

        let mut sim = Self {
            t,
            n_c,
            n_a,
            batch_bytes,
            hosts: commodities.hosts().to_vec(),
            router_as,
            routers_of,
            link_from,
            link_to,
            tx_time,
            latency,
            peering,
            dvr,
            egress_dv: vec![NO_ROUTE; n_r * n_a],
            route: vec![NO_ROUTE; n_r * n_c],
            internal: vec![NO_ROUTE; n_r * n_r],
            rule_pending: vec![0; n_l],
            rules_on_link: vec![0; n_l],
            rule_link: vec![NO_RULE; n_a * n_c],
            nics: vec![Nic::default(); n_l],
            mem_used: vec![0; n_r],
            mem_cap: t.routers().iter().map(|r| r.memory_capacity).collect(),
            held: vec![0; n_r * n_c],
            prev_held: vec![0; n_r * n_c],
            period_out: vec![0; n_r * n_c],
            period_in: vec![0; n_r * n_c],
            period_gen: vec![0; n_r * n_c],
            gen_per_as: vec![0; n_a * n_c],
            history: GenerationHistory::new(n_c),
            controller,
            generator,
            script: None,
            pending: Vec::new(),
            cursor: 0,
            heap: BinaryHeap::new(),
            seq: 0,
            admit_seq: 0,
            now: 0.0,
            last_tick: 0.0,
            ticks: 0,
            seg: SegmentStats::new(cfg.duration_s, cfg.segments),
            ingress: vec![0; n_a],
            backlog_samples: Vec::new(),
            generated: 0,
            delivered: 0,
            delivered_n: 0,
            latency_sum: 0.0,
            overflow: 0,
            ttl: 0,
            unroutable: 0,
            in_flight: 0,
            transmitted: 0,
            report: MetricsReport::default(),
            digest: FNV_OFFSET,
            cfg,
        };
        sim.build_default_egress();
        sim.recompute_routes();
        sim.push(0.0, Kind::Tick, 0, None);
        Ok(sim)
    }

    fn build_default_egress(&mut self) {
        let t = self.t;
        let n_a = self.n_a;
        let n_r = self.router_as.len();
        for r in 0..n_r {
            for &l in t.out_links(r) {
                if t.links()[l].kind == LinkKind::Internal {
                    self.internal[r * n_r + self.link_to[l] as usize] = l as u32;
                }
            }
        }
        // Direct links first.
        for r in 0..n_r {
            for &l in t.out_links(r) {
                if !self.peering[l] {
                    continue;
                }
                let b = self.router_as[self.link_to[l] as usize];
                let slot = &mut self.egress_dv[r * n_a + b];
                if *slot == NO_ROUTE || t.links()[l].id < t.links()[*slot as usize].id {
                    *slot = l as u32;
                }
            }
        }
        // Otherwise the internal link to the nearest router that has one.
        let direct = self.egress_dv.clone();
        for r in 0..n_r {
            let a = self.router_as[r];
            for b in 0..n_a {
                if b == a || direct[r * n_a + b] != NO_ROUTE {
                    continue;
                }
                let mut best: Option<(f64, usize, usize)> = None;
                for &l in t.out_links(r) {
                    if t.links()[l].kind != LinkKind::Internal {
                        continue;
                    }
                    let r2 = self.link_to[l] as usize;
                    if direct[r2 * n_a + b] == NO_ROUTE {
                        continue;
                    }
                    let cand = (self.latency[l], r2, l);
                    if best.map_or(true, |(bl, br, _)| cand.0 < bl || (cand.0 == bl && r2 < br)) {
                        best = Some(cand);
                    }
                }
                if let Some((_, _, l)) = best {
                    self.egress_dv[r * n_a + b] = l as u32;
                }
            }
        }
    }

    fn recompute_routes(&mut self) {
        let n_c = self.n_c;
        for a in 0..self.n_a {
            for c in 0..n_c {
                let host = self.hosts[c];
                let next = if host == a { None } else { self.dvr.next_hop(a, host) };
                for &r in &self.routers_of[a] {
                    self.route[r * n_c + c] = match next {
                        None if host == a => DELIVER,
                        None => NO_ROUTE,
                        Some(b) => self.egress_dv[r * self.n_a + b],
                    };
                }
            }
        }
    }

    fn push(&mut self, time: f64, kind: Kind, target: u32, batch: Option<Held>) {
        self.seq += 1;
        let batch = batch.unwrap_or(Held { commodity: 0, hops: 0, created_at: time, seq: 0, via: NO_RULE });
        self.heap.push(Event { time, kind, seq: self.seq, target, batch });
    }

    /// Replace the Poisson source with a fixed list of batches. Each batch
    /// enters at its `source_router` at `created_at`.
    pub fn with_scripted_traffic(mut self, mut batches: Vec<Batch>) -> Result<Self> {
        let n_r = self.router_as.len();
        for b in &batches {
            if b.source_router >= n_r || b.commodity >= self.n_c || !(b.created_at >= 0.0) {
                return Err(Error::Config(format!("scripted batch {} is out of range", b.id)));
            }
        }
        batches.sort_by(|a, b| a.created_at.total_cmp(&b.created_at).then(a.id.cmp(&b.id)));
        for b in &mut batches {
            b.source_as = self.router_as[b.source_router];
        }
        self.script = Some(batches);
        Ok(self)
    }

    /// Run to the configured duration and return the metrics.
    pub fn run(mut self) -> Result<MetricsReport> {
        let end = self.cfg.duration_s;
        loop {
            let heap_next = self.heap.peek().map(|e| (e.time, e.kind));
            let gen_next = self.pending.get(self.cursor).map(|b| b.created_at);
            let take_gen = match (heap_next, gen_next) {
                (_, None) => false,
                (None, Some(_)) => true,
                (Some((ht, _)), Some(gt)) => gt < ht,
            };
            if take_gen {
                let b = self.pending[self.cursor];
                self.cursor += 1;
                if b.created_at >= end {
                    break;
                }
                self.now = b.created_at;
                self.trace(Kind::Generation, b.source_router as u32);
                self.generate(b);
                continue;
            }
            let Some(ev) = self.heap.pop() else { break };
            if ev.time >= end {
                break;
            }
            self.now = ev.time;
            self.trace(ev.kind, ev.target);
            match ev.kind {
                Kind::Tick => self.tick()?,
                Kind::TxDone => self.tx_done(ev.target as usize),
                Kind::Arrival => {
                    self.in_flight -= self.batch_bytes;
                    self.admit(ev.target as usize, ev.batch, false);
                }
                Kind::Generation => unreachable!("generation events are not queued"),
            }
        }
        self.now = end;
        self.finish()
    }

    fn trace(&mut self, kind: Kind, target: u32) {
        self.report.events += 1;
        let h = fnv(self.digest, self.now.to_bits());
        self.digest = fnv(h, ((kind as u64) << 32) | target as u64);
    }

    fn generate(&mut self, b: Batch) {
        let (r, c) = (b.source_router, b.commodity);
        self.generated += self.batch_bytes;
        self.gen_per_as[b.source_as * self.n_c + c] += self.batch_bytes;
        let held = Held { commodity: c as u32, hops: 0, created_at: b.created_at, seq: 0, via: NO_RULE };
        self.admit(r, held, true);
    }

    fn admit(&mut self, r: usize, mut b: Held, generated: bool) {
        let c = b.commodity as usize;
        let size = self.batch_bytes;
        let route = self.route[r * self.n_c + c];
        if route == DELIVER {
            self.delivered += size;
            self.delivered_n += 1;
            let lat = self.now - b.created_at;
            self.latency_sum += lat;
            let s = self.seg.index(self.now);
            self.seg.latency_sum[s] += lat;
            self.seg.latency_n[s] += 1;
            return;
        }
        let dropped = if b.hops > self.cfg.max_hops {
            self.ttl += size;
            true
        } else if self.mem_used[r] + size > self.mem_cap[r] {
            self.overflow += size;
            let s = self.seg.index(self.now);
            self.seg.overflow[s] += size as f64;
            true
        } else {
            false
        };
        if dropped {
            self.release(&mut b);
            return;
        }
        let Some((link, prio)) = self.dispatch(r, &mut b) else {
            self.unroutable += size;
            return;
        };
        let ix = r * self.n_c + c;
        self.held[ix] += size;
        self.mem_used[r] += size;
        if generated {
            self.period_gen[ix] += size;
        } else {
            self.period_in[ix] += size;
        }
        self.admit_seq += 1;
        b.seq = self.admit_seq;
        self.enqueue(link, prio, b);
        self.try_start(link);
    }

    fn release(&mut self, b: &mut Held) {
        if b.via != NO_RULE {
            self.rule_pending[b.via as usize] -= 1;
            b.via = NO_RULE;
        }
    }

    /// Egress link for a batch at router `r` and whether it joins the
    /// link's priority queue. A batch follows its AS's rule while the rule
    /// link has room in its priority queue, and the distance-vector route
    /// otherwise.
    fn dispatch(&mut self, r: usize, b: &mut Held) -> Option<(usize, bool)> {
        let c = b.commodity as usize;
        let rule = self.rule_link[self.router_as[r] * self.n_c + c];
        if b.via != rule {
            self.release(b);
        }
        if b.via == NO_RULE && rule != NO_RULE && self.rule_has_room(rule as usize) {
            b.via = rule;
            self.rule_pending[rule as usize] += 1;
        }
        if b.via != NO_RULE {
            let l = b.via as usize;
            let s = self.link_from[l] as usize;
            if s == r {
                return Some((l, true));
            }
            let hop = self.internal[r * self.router_as.len() + s];
            if hop != NO_ROUTE {
                return Some((hop as usize, false));
            }
            self.release(b);
        }
        let route = self.route[r * self.n_c + c];
        (route != NO_ROUTE && route != DELIVER).then_some((route as usize, false))
    }

    /// The rule link can take one more committed batch, and its router has
    /// memory for all batches committed to it. Each rule on the link adds
    /// `rule_queue_batches` to the link's allowance.
    fn rule_has_room(&self, l: usize) -> bool {
        let pending = self.rule_pending[l];
        let s = self.link_from[l] as usize;
        pending < self.cfg.rule_queue_batches * self.rules_on_link[l]
            && self.mem_used[s] + (pending as u64 + 1) * self.batch_bytes <= self.mem_cap[s]
    }

    fn enqueue(&mut self, link: usize, prio: bool, b: Held) {
        let nic = &mut self.nics[link];
        if prio {
            nic.priority.push_back(b);
        } else {
            nic.normal.push_back(b);
        }
    }

    fn pull(&mut self, link: usize) -> Option<Held> {
        let nic = &mut self.nics[link];
        let mut b = nic.priority.pop_front().or_else(|| nic.normal.pop_front())?;
        self.mem_used[self.link_from[link] as usize] -= self.batch_bytes;
        if b.via == link as u32 {
            self.release(&mut b);
        }
        Some(b)
    }

    fn try_start(&mut self, link: usize) {
        if self.nics[link].serializing.is_none() {
            let next = match self.nics[link].staged.take() {
                Some(b) => Some(b),
                None => self.pull(link),
            };
            if let Some(b) = next {
                self.nics[link].serializing = Some(b);
                let done = self.now + self.tx_time[link];
                self.push(done, Kind::TxDone, link as u32, None);
            }
        }
        if self.nics[link].staged.is_none() {
            let staged = self.pull(link);
            self.nics[link].staged = staged;
        }
    }

    fn tx_done(&mut self, link: usize) {
        let mut b = self.nics[link].serializing.take().expect("transmission without batch");
        let size = self.batch_bytes;
        let from = self.link_from[link] as usize;
        let to = self.link_to[link] as usize;
        let ix = from * self.n_c + b.commodity as usize;
        self.held[ix] -= size;
        self.period_out[ix] += size;
        self.transmitted += size;
        let s = self.seg.index(self.now);
        self.seg.transmitted[s] += size as f64;
        if self.peering[link] {
            self.ingress[self.router_as[to]] += size;
        }
        self.in_flight += size;
        b.hops = b.hops.saturating_add(1);
        let at = self.now + self.latency[link];
        self.push(at, Kind::Arrival, to as u32, Some(b));
        self.try_start(link);
    }

    fn tick(&mut self) -> Result<()> {
        let now = self.now;
        if self.ticks > 0 {
            self.close_period(now);
        }
        self.ticks += 1;
        self.backlog_samples.push(self.held.iter().sum::<u64>() as f64);

        if self.controller.is_some() {
            self.run_controller(now);
            self.reroute_queued();
        }

        let next = now + self.cfg.period_s;
        if next < self.cfg.duration_s {
            self.push(next, Kind::Tick, 0, None);
        }
        let window_end = next.min(self.cfg.duration_s);
        self.pending = match &self.script {
            Some(s) => s.iter().filter(|b| b.created_at >= now && b.created_at < window_end).copied().collect(),
            None => self.generator.generate(now, window_end),
        };
        self.cursor = 0;
        self.last_tick = now;
        Ok(())
    }

    fn close_period(&mut self, now: f64) {
        let n_c = self.n_c;
        let gen = core::mem::replace(&mut self.gen_per_as, vec![0; self.n_a * n_c]);
        self.history.push(self.last_tick, now, gen);
        if self.cfg.audit {
            for ix in 0..self.held.len() {
                let (u, o, i, g) = (self.prev_held[ix], self.period_out[ix], self.period_in[ix], self.period_gen[ix]);
                let actual = self.held[ix];
                let exact = (u + i + g) as i128 - o as i128;
                let bound = queue_update(u, o, i, g);
                self.report.queue_audit_checks += 1;
                if actual as i128 != exact || actual > bound || (o <= u && actual != bound) {
                    self.report.queue_audit_violations += 1;
                }
            }
            let queued: u64 = self.held.iter().sum();
            let accounted = self.delivered + self.overflow + self.ttl + self.unroutable + self.in_flight + queued;
            if accounted != self.generated {
                self.report.conservation_violations += 1;
            }
            let mem: u64 = self.mem_used.iter().sum();
            let staged: u64 = self
                .nics
                .iter()
                .map(|n| (n.serializing.is_some() as u64 + n.staged.is_some() as u64) * self.batch_bytes)
                .sum();
            if mem + staged != queued {
                self.report.conservation_violations += 1;
            }
        }
        self.prev_held.copy_from_slice(&self.held);
        self.period_out.iter_mut().for_each(|v| *v = 0);
        self.period_in.iter_mut().for_each(|v| *v = 0);
        self.period_gen.iter_mut().for_each(|v| *v = 0);
    }

    fn run_controller(&mut self, now: f64) {
        let n_c = self.n_c;
        let n_a = self.n_a;
        let mut as_backlog = vec![0u64; n_a * n_c];
        for (r, &a) in self.router_as.iter().enumerate() {
            for c in 0..n_c {
                as_backlog[a * n_c + c] += self.held[r * n_c + c];
            }
        }
        let g = forecast(&self.history, n_a, self.cfg.period_s);
        let ctl = self.controller.as_mut().expect("controller present");
        let reports: Vec<_> = (0..n_a).map(|a| ctl.report_for(a, |c| as_backlog[a * n_c + c], now)).collect();
        let out = ctl.tick(now, &reports, &g);
        self.report.report_bytes += out.report_bytes;
        self.report.rule_bytes += out.rule_bytes;
        self.report.partial_stitches += out.partial as u64;
        self.report.rules_installed += out.proposals.len() as u64;

        let foresight = matches!(ctl.config().algorithm, Algorithm::Backpressure { selection: Selection::Foresight, .. });
        let zero = ForecastView::zeros(n_a, n_c);
        let gv = if foresight { &g } else { &zero };
        let u = ctl.backlogs();
        for p in &out.proposals {
            let here = u.get(p.owner, p.commodity) as f64 + gv.get(p.owner, p.commodity);
            let there = u.get(p.neighbor, p.commodity) as f64 + gv.get(p.neighbor, p.commodity);
            if !(here > there) {
                self.report.ordering_violations += 1;
            }
        }

        if self.cfg.record_rules {
            self.report.final_rules = out
                .proposals
                .iter()
                .map(|p| RuleRecord { owner: p.owner, commodity: p.commodity, link_id: p.link_id, neighbor: p.neighbor, potential: p.potential })
                .collect();
        }
        self.rule_link.iter_mut().for_each(|v| *v = NO_RULE);
        self.rules_on_link.iter_mut().for_each(|v| *v = 0);
        let view = ctl.view();
        for p in &out.proposals {
            let l = view.links()[p.link].link_ix;
            self.rule_link[p.owner * n_c + p.commodity] = l as u32;
            self.rules_on_link[l] += 1;
        }
    }

    /// Move queued batches to the NIC their commodity now routes to,
    /// keeping admission order.
    fn reroute_queued(&mut self) {
        let mut moved: Vec<(usize, Held)> = Vec::new();
        for r in 0..self.router_as.len() {
            moved.clear();
            for &l in self.t.out_links(r) {
                let nic = &mut self.nics[l];
                moved.extend(nic.priority.drain(..).map(|b| (l, b)));
                moved.extend(nic.normal.drain(..).map(|b| (l, b)));
            }
            if moved.is_empty() {
                continue;
            }
            moved.sort_by_key(|(_, b)| b.seq);
            for i in 0..moved.len() {
                let mut b = moved[i].1;
                let c = b.commodity as usize;
                match self.dispatch(r, &mut b) {
                    Some((link, prio)) => self.enqueue(link, prio, b),
                    None => {
                        self.held[r * self.n_c + c] -= self.batch_bytes;
                        self.mem_used[r] -= self.batch_bytes;
                        self.period_out[r * self.n_c + c] += self.batch_bytes;
                        self.unroutable += self.batch_bytes;
                    }
                }
            }
            for &l in self.t.out_links(r) {
                self.try_start(l);
            }
        }
    }

    fn finish(mut self) -> Result<MetricsReport> {
        let d = self.cfg.duration_s;
        let mut r = core::mem::take(&mut self.report);
        r.throughput = self.transmitted as f64 / d;
        r.overflow = self.overflow as f64 / d;
        r.mean_batch_latency_s = if self.delivered_n > 0 { self.latency_sum / self.delivered_n as f64 } else { 0.0 };
        r.delivered_batches = self.delivered_n;
        let total_in: u64 = self.ingress.iter().sum();
        r.per_as_share = if total_in == 0 {
            vec![0.0; self.n_a]
        } else {
            self.ingress.iter().map(|&b| b as f64 / total_in as f64).collect()
        };
        r.control_overhead_bytes = self.controller.as_ref().map_or(0, |c| c.overhead_bytes());
        r.controller_ticks = if self.controller.is_some() { self.ticks } else { 0 };
        r.stability_avg_backlog = stability_metric(&self.backlog_samples)?;
        r.throughput_ci = self.seg.rate_ci(&self.seg.transmitted);
        r.overflow_ci = self.seg.rate_ci(&self.seg.overflow);
        r.latency_ci = self.seg.latency_ci();
        r.generated_bytes = self.generated;
        r.delivered_bytes = self.delivered;
        r.ttl_drops = self.ttl;
        r.unroutable_drops = self.unroutable;
        r.trace_digest = self.digest;
        Ok(r)
    }
}

/// Simulate one scenario end to end.
pub fn run(t: &Topology, commodities: &Commodities, scenario: &TrafficScenario, cfg: &EngineConfig) -> Result<MetricsReport> {
    Simulation::new(t, commodities, scenario, cfg.clone())?.run()
}
