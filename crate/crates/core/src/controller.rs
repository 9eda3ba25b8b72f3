//! The central controller: congestion reports in, priority rules out.
//!
//! ASes report per-prefix backlogs every actuation period. The controller
//! keeps the latest view, runs the selected derivation algorithm and groups
//! the resulting rules into one message per owning AS. Both message kinds
//! have a fixed binary layout so control-plane overhead is byte-exact.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::backpressure::{
    bp_dv_stitch, fbpr, nhops_filter, sbpr, BacklogView, BpConfig, ForecastView, IterationBudget, NeighborFilter,
    PeeringPreferences, PeeringView, RuleBudget, RuleProposal,
};
use crate::commodity::{Commodities, CommodityGranularity};
use crate::error::{Error, Result};
use crate::policy::RoutingTable;
use crate::topology::{AsId, LinkId, Prefix, Topology};

/// Width of the AS / link identifier strings.
pub const ID_BYTES: usize = 8;
/// Width of one report entry or rule record.
pub const ENTRY_BYTES: usize = 13;
/// One gigabyte as carried in reports.
pub const BYTES_PER_GB: f64 = 1e9;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum MessageKind {
    Report,
    Rule,
}

/// Serialized size of a control message with `n_entries` records.
pub fn message_size(_kind: MessageKind, n_entries: usize) -> usize {
    ID_BYTES + ENTRY_BYTES * n_entries
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ReportEntry {
    pub prefix: Prefix,
    pub load_gb: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CongestionReport {
    pub as_id: AsId,
    pub entries: Vec<ReportEntry>,
    pub timestamp: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct RuleEntry {
    pub prefix: Prefix,
    pub link_id: LinkId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleMessage {
    pub as_id: AsId,
    pub rules: Vec<RuleEntry>,
}

fn encode_id(value: u32, out: &mut Vec<u8>) -> Result<()> {
    if value > 99_999_999 {
        return Err(Error::Codec(format!("identifier {value} does not fit in {ID_BYTES} digits")));
    }
    out.extend_from_slice(format!("{value:08}").as_bytes());
    Ok(())
}

fn decode_id(bytes: &[u8]) -> Result<u32> {
    let text = core::str::from_utf8(bytes).map_err(|_| Error::Codec("identifier is not ASCII".into()))?;
    if !text.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::Codec(format!("bad identifier {text:?}")));
    }
    text.parse::<u32>().map_err(|_| Error::Codec(format!("bad identifier {text:?}")))
}

fn frame(bytes: &[u8]) -> Result<(u32, &[u8])> {
    if bytes.len() < ID_BYTES || (bytes.len() - ID_BYTES) % ENTRY_BYTES != 0 {
        return Err(Error::Codec(format!("message length {} is not 8 + 13k", bytes.len())));
    }
    Ok((decode_id(&bytes[..ID_BYTES])?, &bytes[ID_BYTES..]))
}

fn prefix_from(chunk: &[u8]) -> Prefix {
    Prefix::new(u32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]), chunk[4])
}

impl CongestionReport {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(message_size(MessageKind::Report, self.entries.len()));
        encode_id(self.as_id.0, &mut out)?;
        for e in &self.entries {
            out.extend_from_slice(&e.prefix.addr.to_be_bytes());
            out.push(e.prefix.mask);
            out.extend_from_slice(&e.load_gb.to_be_bytes());
        }
        Ok(out)
    }

    /// Inverse of [`encode`](Self::encode). The timestamp is not carried on
    /// the wire and is set by the receiver.
    pub fn decode(bytes: &[u8], timestamp: f64) -> Result<Self> {
        let (id, body) = frame(bytes)?;
        let entries = body
            .chunks_exact(ENTRY_BYTES)
            .map(|c| {
                let mut f = [0u8; 8];
                f.copy_from_slice(&c[5..]);
                ReportEntry { prefix: prefix_from(c), load_gb: f64::from_be_bytes(f) }
            })
            .collect();
        Ok(Self { as_id: AsId(id), entries, timestamp })
    }
}

impl RuleMessage {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(message_size(MessageKind::Rule, self.rules.len()));
        encode_id(self.as_id.0, &mut out)?;
        for r in &self.rules {
            out.extend_from_slice(&r.prefix.addr.to_be_bytes());
            out.push(r.prefix.mask);
            encode_id(r.link_id.0, &mut out)?;
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let (id, body) = frame(bytes)?;
        let rules = body
            .chunks_exact(ENTRY_BYTES)
            .map(|c| Ok(RuleEntry { prefix: prefix_from(c), link_id: LinkId(decode_id(&c[5..])?) }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { as_id: AsId(id), rules })
    }
}

/// How backpressure commodities are selected.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Selection {
    Standard,
    Foresight,
}

/// How rules are combined with the distance-vector underlay.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stitching {
    None,
    Nhops,
    Exploratory,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    DvrOnly,
    Backpressure { selection: Selection, stitching: Stitching },
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::DvrOnly,
        Algorithm::bp(Selection::Standard, Stitching::None),
        Algorithm::bp(Selection::Foresight, Stitching::None),
        Algorithm::bp(Selection::Standard, Stitching::Nhops),
        Algorithm::bp(Selection::Foresight, Stitching::Nhops),
        Algorithm::bp(Selection::Standard, Stitching::Exploratory),
        Algorithm::bp(Selection::Foresight, Stitching::Exploratory),
    ];

    pub const fn bp(selection: Selection, stitching: Stitching) -> Self {
        Algorithm::Backpressure { selection, stitching }
    }

    pub fn name(&self) -> &'static str {
        use Selection::*;
        use Stitching::*;
        match self {
            Algorithm::DvrOnly => "dvr_only",
            Algorithm::Backpressure { selection: Standard, stitching: None } => "sbpr",
            Algorithm::Backpressure { selection: Foresight, stitching: None } => "fbpr",
            Algorithm::Backpressure { selection: Standard, stitching: Nhops } => "sbpr+nhops",
            Algorithm::Backpressure { selection: Foresight, stitching: Nhops } => "fbpr+nhops",
            Algorithm::Backpressure { selection: Standard, stitching: Exploratory } => "sbpr+stitch",
            Algorithm::Backpressure { selection: Foresight, stitching: Exploratory } => "fbpr+stitch",
        }
    }

    /// Base algorithm name without the stitching suffix.
    pub fn base_name(&self) -> &'static str {
        match self {
            Algorithm::DvrOnly => "dvr_only",
            Algorithm::Backpressure { selection: Selection::Standard, .. } => "sbpr",
            Algorithm::Backpressure { selection: Selection::Foresight, .. } => "fbpr",
        }
    }

    pub fn stitch_name(&self) -> &'static str {
        match self {
            Algorithm::DvrOnly | Algorithm::Backpressure { stitching: Stitching::None, .. } => "none",
            Algorithm::Backpressure { stitching: Stitching::Nhops, .. } => "nhops",
            Algorithm::Backpressure { stitching: Stitching::Exploratory, .. } => "stitch",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum RuleState {
    Active,
    Expired,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstalledRule {
    pub proposal: RuleProposal,
    pub installed_at: f64,
    pub last_hit: f64,
    /// Backlog of the owner for the rule's commodity when installed.
    pub backlog_at_install: u64,
    pub state: RuleState,
}

impl InstalledRule {
    pub fn install(proposal: RuleProposal, now: f64, backlog: u64) -> Self {
        Self { proposal, installed_at: now, last_hit: now, backlog_at_install: backlog, state: RuleState::Active }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LifecycleConfig {
    /// Fraction of the install-time backlog below which a rule expires.
    pub safety_fraction: f64,
    pub idle_timeout_s: f64,
}

impl LifecycleConfig {
    pub fn for_period(period_s: f64) -> Self {
        Self { safety_fraction: 0.1, idle_timeout_s: period_s }
    }
}

/// Expire rules whose owner backlog fell below the safety level or that have
/// been idle for longer than the timeout. Expired rules stay expired.
pub fn rule_lifecycle(now: f64, rules: &[InstalledRule], backlogs: &BacklogView, cfg: &LifecycleConfig) -> Vec<InstalledRule> {
    rules
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if r.state == RuleState::Active {
                let safety = cfg.safety_fraction * r.backlog_at_install as f64;
                let current = backlogs.get(r.proposal.owner, r.proposal.commodity) as f64;
                if current < safety || now - r.last_hit > cfg.idle_timeout_s {
                    r.state = RuleState::Expired;
                }
            }
            r
        })
        .collect()
}

/// Coefficients of the drift bound `alpha * T^2 - 2 * beta * T`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct DriftBoundParams {
    pub alpha: f64,
    pub beta: f64,
}

impl DriftBoundParams {
    /// Coefficients from a network state. Capacities are converted to
    /// bytes per second so that every term shares the backlog unit.
    ///
    /// `rates` holds the mean generation rate per (node, commodity) in
    /// bytes per second, row-major like the backlog view.
    pub fn from_state(view: &PeeringView, backlogs: &BacklogView, rates: &[f64]) -> Self {
        let n = view.node_count();
        let mut out_cap = vec![0.0; n];
        let mut in_cap = vec![0.0; n];
        for l in view.links() {
            out_cap[l.from] += l.capacity_bps / 8.0;
            in_cap[l.to] += l.capacity_bps / 8.0;
        }
        let nc = backlogs.commodity_count();
        let (mut alpha, mut beta) = (0.0, 0.0);
        for node in 0..n {
            for c in 0..nc {
                let lambda = rates[node * nc + c];
                let inflow = in_cap[node] + lambda;
                alpha += out_cap[node] * out_cap[node] + inflow * inflow;
                beta += backlogs.get(node, c) as f64 * (out_cap[node] - inflow);
            }
        }
        Self { alpha, beta }
    }
}

pub fn drift_bound(period_s: f64, p: &DriftBoundParams) -> f64 {
    p.alpha * period_s * period_s - 2.0 * p.beta * period_s
}

/// Largest period whose drift bound stays within `l_max`.
pub fn max_acceptable_t(p: &DriftBoundParams, l_max: f64) -> Result<f64> {
    if !(p.alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", p.alpha)));
    }
    if !(l_max > 0.0) {
        return Err(Error::InvalidParameter(format!("bound must be positive, got {l_max}")));
    }
    let s = libm::sqrt(p.beta * p.beta + p.alpha * l_max);
    // Pick the form without cancellation for the sign of beta.
    if p.beta >= 0.0 {
        Ok((p.beta + s) / p.alpha)
    } else {
        Ok(l_max / (s - p.beta))
    }
}

/// The non-zero root `2 * beta / alpha` of the drift bound.
pub fn drift_root(p: &DriftBoundParams) -> f64 {
    2.0 * p.beta / p.alpha
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerConfig {
    pub algorithm: Algorithm,
    pub bp: BpConfig,
    pub preferences: PeeringPreferences,
    /// Derivation rounds allowed to the exploratory stitcher.
    pub stitch_rounds: usize,
    /// Periods after which an unrefreshed backlog entry is treated as zero.
    pub stale_periods: u64,
}

impl ControllerConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            bp: BpConfig::default(),
            preferences: PeeringPreferences::allow_all(),
            stitch_rounds: 64,
            stale_periods: 2,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TickOutput {
    pub proposals: Vec<RuleProposal>,
    pub messages: Vec<RuleMessage>,
    /// The exploratory stitcher ran out of rounds.
    pub partial: bool,
    pub report_bytes: u64,
    pub rule_bytes: u64,
    pub skipped_reports: usize,
}

/// In-process controller state.
pub struct Controller {
    cfg: ControllerConfig,
    as_ids: Vec<AsId>,
    as_index: BTreeMap<AsId, usize>,
    hosts: Vec<usize>,
    prefixes: Vec<Prefix>,
    by_prefix: BTreeMap<Prefix, usize>,
    full_view: PeeringView,
    view: PeeringView,
    dvr: RoutingTable,
    backlogs: BacklogView,
    refreshed_at: Vec<u64>,
    ticks: u64,
    rejected: BTreeSet<LinkId>,
    overhead_bytes: u64,
}

impl Controller {
    /// At prefix granularity a single-rule budget is widened to the
    /// per-prefix budget for the largest prefix count of any AS.
    pub fn new(t: &Topology, commodities: &Commodities, mut cfg: ControllerConfig) -> Self {
        if commodities.granularity() == CommodityGranularity::Prefix && cfg.bp.budget == RuleBudget::Single {
            let n_prefixes = (0..t.ases().len()).map(|a| commodities.hosted_by(a).len()).max().unwrap_or(1);
            cfg.bp.budget = RuleBudget::PerPrefix { n_prefixes };
        }
        let full_view = PeeringView::from_topology(t);
        let dvr = RoutingTable::from_adjacency(&full_view.adjacency());
        let n = t.ases().len();
        let nc = commodities.len();
        let prefixes: Vec<Prefix> = (0..nc).map(|c| commodities.prefix(c)).collect();
        Self {
            cfg,
            as_ids: t.ases().iter().map(|a| a.as_id).collect(),
            as_index: t.ases().iter().enumerate().map(|(i, a)| (a.as_id, i)).collect(),
            hosts: commodities.hosts().to_vec(),
            by_prefix: prefixes.iter().enumerate().map(|(i, p)| (*p, i)).collect(),
            prefixes,
            view: full_view.clone(),
            full_view,
            dvr,
            backlogs: BacklogView::zeros(n, nc),
            refreshed_at: vec![0; n * nc],
            ticks: 0,
            rejected: BTreeSet::new(),
            overhead_bytes: 0,
        }
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn dvr(&self) -> &RoutingTable {
        &self.dvr
    }

    pub fn view(&self) -> &PeeringView {
        &self.view
    }

    pub fn backlogs(&self) -> &BacklogView {
        &self.backlogs
    }

    pub fn hosts(&self) -> &[usize] {
        &self.hosts
    }

    /// Total control bytes exchanged so far.
    pub fn overhead_bytes(&self) -> u64 {
        self.overhead_bytes
    }

    /// An AS refused a rule on `link`; stop using it until re-enabled.
    pub fn reject_link(&mut self, link: LinkId) {
        if self.rejected.insert(link) {
            self.view = self.full_view.without_links(&self.rejected);
        }
    }

    pub fn reenable_link(&mut self, link: LinkId) {
        if self.rejected.remove(&link) {
            self.view = self.full_view.without_links(&self.rejected);
        }
    }

    pub fn rejected_links(&self) -> &BTreeSet<LinkId> {
        &self.rejected
    }

    /// Build the report an AS would send for the given backlog row.
    ///
    /// Every commodity not hosted by the AS is listed, so report size depends
    /// only on the cluster shape.
    pub fn report_for(&self, as_ix: usize, backlog_row: impl Fn(usize) -> u64, now: f64) -> CongestionReport {
        let entries = (0..self.hosts.len())
            .filter(|&c| self.hosts[c] != as_ix)
            .map(|c| ReportEntry { prefix: self.prefixes[c], load_gb: backlog_row(c) as f64 / BYTES_PER_GB })
            .collect();
        CongestionReport { as_id: self.as_ids[as_ix], entries, timestamp: now }
    }

    fn ingest(&mut self, reports: &[CongestionReport], out: &mut TickOutput) {
        let nc = self.hosts.len();
        for r in reports {
            out.report_bytes += message_size(MessageKind::Report, r.entries.len()) as u64;
            let Some(&n) = self.as_index.get(&r.as_id) else {
                log::warn!("report from unknown {} skipped", r.as_id);
                out.skipped_reports += 1;
                continue;
            };
            for e in &r.entries {
                if let Some(&c) = self.by_prefix.get(&e.prefix) {
                    self.backlogs.set(n, c, libm::round(e.load_gb.max(0.0) * BYTES_PER_GB) as u64);
                    self.refreshed_at[n * nc + c] = self.ticks;
                }
            }
        }
        for n in 0..self.as_ids.len() {
            for c in 0..nc {
                if self.ticks - self.refreshed_at[n * nc + c] >= self.cfg.stale_periods {
                    self.backlogs.set(n, c, 0);
                }
            }
        }
    }

    /// One actuation period: ingest reports, derive rules, emit messages.
    pub fn tick(&mut self, _now: f64, reports: &[CongestionReport], forecasts: &ForecastView) -> TickOutput {
        self.ticks += 1;
        let mut out = TickOutput::default();
        self.ingest(reports, &mut out);
        if reports.is_empty() {
            self.overhead_bytes += out.report_bytes;
            return out;
        }
        let (proposals, partial) = self.derive(forecasts);
        out.partial = partial;
        out.messages = self.group(&proposals);
        out.rule_bytes = out.messages.iter().map(|m| message_size(MessageKind::Rule, m.rules.len()) as u64).sum();
        out.proposals = proposals;
        self.overhead_bytes += out.report_bytes + out.rule_bytes;
        out
    }

    fn derive(&self, forecasts: &ForecastView) -> (Vec<RuleProposal>, bool) {
        let Algorithm::Backpressure { selection, stitching } = self.cfg.algorithm else {
            return (Vec::new(), false);
        };
        let zeros;
        let g = match selection {
            Selection::Foresight => forecasts,
            Selection::Standard => {
                zeros = ForecastView::zeros(self.view.node_count(), self.hosts.len());
                &zeros
            }
        };
        let v = &self.view;
        match stitching {
            Stitching::None => {
                let f = NeighborFilter::all(v, self.hosts.len(), &self.cfg.preferences);
                let p = match selection {
                    Selection::Standard => sbpr(v, &self.hosts, &self.backlogs, &f, &self.cfg.bp),
                    Selection::Foresight => fbpr(v, &self.hosts, &self.backlogs, g, &f, &self.cfg.bp),
                };
                (p, false)
            }
            Stitching::Nhops => {
                let f = nhops_filter(v, &self.hosts, &self.dvr, &self.cfg.preferences);
                (fbpr(v, &self.hosts, &self.backlogs, g, &f, &self.cfg.bp), false)
            }
            Stitching::Exploratory => {
                let f = NeighborFilter::all(v, self.hosts.len(), &self.cfg.preferences);
                let mut budget = IterationBudget::new(self.cfg.stitch_rounds);
                let o = bp_dv_stitch(v, &self.hosts, &self.backlogs, g, &f, &self.dvr, &self.cfg.bp, &mut budget);
                (o.proposals, o.partial)
            }
        }
    }

    fn group(&self, proposals: &[RuleProposal]) -> Vec<RuleMessage> {
        let mut per_as: BTreeMap<usize, Vec<RuleEntry>> = BTreeMap::new();
        for p in proposals {
            per_as.entry(p.owner).or_default().push(RuleEntry { prefix: self.prefixes[p.commodity], link_id: p.link_id });
        }
        per_as.into_iter().map(|(n, rules)| RuleMessage { as_id: self.as_ids[n], rules }).collect()
    }
}

/// Human-readable rendering of a rule for logs.
pub fn describe(msg: &RuleMessage) -> String {
    let mut s = format!("{}:", msg.as_id);
    for r in &msg.rules {
        s.push_str(&format!(" {}->{}", r.prefix, r.link_id));
    }
    s
}
