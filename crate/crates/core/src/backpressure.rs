//! Priority-rule derivation: standard and foresight-enabled backpressure,
//! multi-link reordering, and the two ways of stitching rules onto a
//! distance-vector underlay without forming loops.
//!
//! All derivations run on the AS-level [`PeeringView`]: nodes are AS indices
//! and links are the directed router-level peering links between them, so two
//! ASes joined by several physical links form a multi-link.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::policy::{loop_on_insert, PolicyState, RoutingTable};
use crate::topology::{LinkId, Topology};

/// One directed peering link seen at AS level.
#[derive(Clone, Debug, PartialEq)]
pub struct PeeringLink {
    /// Index into `Topology::links`.
    pub link_ix: usize,
    pub link_id: LinkId,
    pub from: usize,
    pub to: usize,
    /// Router index of the source endpoint.
    pub from_router: usize,
    pub capacity_bps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeeringView {
    n_nodes: usize,
    links: Vec<PeeringLink>,
    out: Vec<Vec<usize>>,
    router_out_degree: BTreeMap<usize, usize>,
}

impl PeeringView {
    pub fn new(n_nodes: usize, mut links: Vec<PeeringLink>) -> Self {
        links.sort_by_key(|l| l.link_id);
        let mut out = vec![Vec::new(); n_nodes];
        let mut router_out_degree = BTreeMap::new();
        for (i, l) in links.iter().enumerate() {
            out[l.from].push(i);
            *router_out_degree.entry(l.from_router).or_insert(0) += 1;
        }
        Self { n_nodes, links, out, router_out_degree }
    }

    pub fn from_topology(t: &Topology) -> Self {
        let links = t
            .peering_links()
            .map(|l| {
                let ix = t.link_index(l.id).expect("link indexed");
                let (a, b) = t.link_endpoints(ix);
                PeeringLink {
                    link_ix: ix,
                    link_id: l.id,
                    from: t.router_as_index(a),
                    to: t.router_as_index(b),
                    from_router: a,
                    capacity_bps: l.capacity_bps,
                }
            })
            .collect();
        Self::new(t.ases().len(), links)
    }

    pub fn node_count(&self) -> usize {
        self.n_nodes
    }

    pub fn links(&self) -> &[PeeringLink] {
        &self.links
    }

    /// View-local indices of links leaving `node`, ascending link id.
    pub fn out_links(&self, node: usize) -> &[usize] {
        &self.out[node]
    }

    pub fn neighbors(&self, node: usize) -> BTreeSet<usize> {
        self.out[node].iter().map(|&l| self.links[l].to).collect()
    }

    /// Directed adjacency lists for distance-vector computation.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.n_nodes).map(|n| self.neighbors(n).into_iter().collect()).collect()
    }

    /// Outgoing peering links of a router.
    pub fn router_out_degree(&self, router: usize) -> usize {
        self.router_out_degree.get(&router).copied().unwrap_or(0)
    }

    /// Copy of the view without the given links.
    pub fn without_links(&self, excluded: &BTreeSet<LinkId>) -> Self {
        let links = self.links.iter().filter(|l| !excluded.contains(&l.link_id)).cloned().collect();
        Self::new(self.n_nodes, links)
    }
}

/// Queued bytes per (node, commodity).
#[derive(Clone, Debug, PartialEq)]
pub struct BacklogView {
    n_commodities: usize,
    u: Vec<u64>,
    pub snapshot_time: f64,
}

impl BacklogView {
    pub fn zeros(n_nodes: usize, n_commodities: usize) -> Self {
        Self { n_commodities, u: vec![0; n_nodes * n_commodities], snapshot_time: 0.0 }
    }

    pub fn get(&self, node: usize, commodity: usize) -> u64 {
        self.u[node * self.n_commodities + commodity]
    }

    pub fn set(&mut self, node: usize, commodity: usize, bytes: u64) {
        self.u[node * self.n_commodities + commodity] = bytes;
    }

    pub fn add(&mut self, node: usize, commodity: usize, bytes: u64) {
        self.u[node * self.n_commodities + commodity] += bytes;
    }

    pub fn commodity_count(&self) -> usize {
        self.n_commodities
    }

    pub fn node_count(&self) -> usize {
        if self.n_commodities == 0 {
            0
        } else {
            self.u.len() / self.n_commodities
        }
    }

    /// Sum over every node and commodity.
    pub fn total(&self) -> u64 {
        self.u.iter().sum()
    }
}

/// Expected locally generated bytes per (node, commodity) over the next period.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastView {
    n_commodities: usize,
    g: Vec<f64>,
}

impl ForecastView {
    pub fn zeros(n_nodes: usize, n_commodities: usize) -> Self {
        Self { n_commodities, g: vec![0.0; n_nodes * n_commodities] }
    }

    /// Mean-value form: `g = rate * period` with rates in bytes per second.
    pub fn from_rates(rates: &[f64], n_commodities: usize, period_s: f64) -> Self {
        Self { n_commodities, g: rates.iter().map(|r| r * period_s).collect() }
    }

    pub fn get(&self, node: usize, commodity: usize) -> f64 {
        self.g[node * self.n_commodities + commodity]
    }

    pub fn set(&mut self, node: usize, commodity: usize, bytes: f64) {
        self.g[node * self.n_commodities + commodity] = bytes;
    }

    pub fn values(&self) -> &[f64] {
        &self.g
    }
}

/// Routing-preference deny list over (AS, neighbour AS) pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PeeringPreferences {
    denied: BTreeSet<(usize, usize)>,
}

impl PeeringPreferences {
    pub fn allow_all() -> Self {
        Self::default()
    }

    pub fn deny(&mut self, node: usize, neighbor: usize) {
        self.denied.insert((node, neighbor));
    }

    pub fn permits(&self, node: usize, neighbor: usize) -> bool {
        !self.denied.contains(&(node, neighbor))
    }
}

/// Neighbours each (node, commodity) may offload to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborFilter {
    n_commodities: usize,
    allowed: Vec<BTreeSet<usize>>,
}

impl NeighborFilter {
    /// Every adjacent, preference-compliant neighbour.
    pub fn all(view: &PeeringView, n_commodities: usize, prefs: &PeeringPreferences) -> Self {
        let mut allowed = Vec::with_capacity(view.node_count() * n_commodities);
        for n in 0..view.node_count() {
            let nbs: BTreeSet<usize> = view.neighbors(n).into_iter().filter(|&d| prefs.permits(n, d)).collect();
            for _ in 0..n_commodities {
                allowed.push(nbs.clone());
            }
        }
        Self { n_commodities, allowed }
    }

    pub fn allowed(&self, node: usize, commodity: usize) -> &BTreeSet<usize> {
        &self.allowed[node * self.n_commodities + commodity]
    }

    pub fn allows(&self, node: usize, commodity: usize, neighbor: usize) -> bool {
        self.allowed(node, commodity).contains(&neighbor)
    }

    pub fn remove(&mut self, node: usize, commodity: usize, neighbor: usize) {
        self.allowed[node * self.n_commodities + commodity].remove(&neighbor);
    }
}

/// How many commodities one link may carry rules for.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum RuleBudget {
    /// One rule per directed physical link.
    Single,
    /// `ceil(n_prefixes / n_links)` rules per link, where `n_links` counts
    /// the peering links leaving the link's source router.
    PerPrefix { n_prefixes: usize },
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct BpConfig {
    /// Commodities with a smaller local backlog are not considered.
    pub alarm_level: u64,
    pub budget: RuleBudget,
}

impl Default for BpConfig {
    fn default() -> Self {
        Self { alarm_level: 0, budget: RuleBudget::Single }
    }
}

impl BpConfig {
    fn link_budget(&self, view: &PeeringView, link: &PeeringLink) -> usize {
        match self.budget {
            RuleBudget::Single => 1,
            RuleBudget::PerPrefix { n_prefixes } => {
                let n_links = view.router_out_degree(link.from_router).max(1);
                n_prefixes.div_ceil(n_links).max(1)
            }
        }
    }
}

/// A proposed priority rule `{from: owner, to: commodity, via: link}`.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleProposal {
    pub owner: usize,
    pub commodity: usize,
    /// Index into the view's links.
    pub link: usize,
    pub link_id: LinkId,
    pub neighbor: usize,
    /// Backlog differential `U(owner) - U(neighbor)`, bytes.
    pub potential: u64,
    /// Forecast-adjusted differential `U(owner) - U(neighbor) - G(neighbor)`.
    pub foresight_delta: f64,
}

/// Standard backpressure: each link carries the commodity with the largest
/// positive backlog differential towards its far end.
///
/// At every node, candidate (link, commodity) pairs are taken in descending
/// differential order; a commodity is assigned to at most one outgoing link
/// and a link accepts at most its rule budget. A commodity therefore goes to
/// its best neighbour unless a larger differential already claimed that
/// link. Wired links run at nominal capacity, so rate selection reduces to
/// using the whole link.
pub fn sbpr(view: &PeeringView, hosts: &[usize], backlogs: &BacklogView, filter: &NeighborFilter, cfg: &BpConfig) -> Vec<RuleProposal> {
    derive(view, hosts, backlogs, None, filter, cfg)
}

/// Foresight-enabled backpressure.
///
/// Candidates are ranked by the forecast-adjusted differential
/// `U(n) - U(d) - G(d)`, so a commodity goes to the neighbour expected to
/// stay least loaded. A selected pair becomes a rule when its plain backlog
/// differential is positive and `U + G` strictly decreases from owner to
/// neighbour; the second condition keeps every chain of rules ordered by
/// `U + G` and therefore loop-free. With all-zero forecasts this is
/// [`sbpr`].
pub fn fbpr(
    view: &PeeringView,
    hosts: &[usize],
    backlogs: &BacklogView,
    forecasts: &ForecastView,
    filter: &NeighborFilter,
    cfg: &BpConfig,
) -> Vec<RuleProposal> {
    derive(view, hosts, backlogs, Some(forecasts), filter, cfg)
}

fn derive(
    view: &PeeringView,
    hosts: &[usize],
    backlogs: &BacklogView,
    forecasts: Option<&ForecastView>,
    filter: &NeighborFilter,
    cfg: &BpConfig,
) -> Vec<RuleProposal> {
    let n_comm = backlogs.commodity_count();
    let mut out = Vec::new();
    let mut visited = vec![false; n_comm];
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for node in 0..view.node_count() {
        let outs = view.out_links(node);
        candidates.clear();
        for (pos, &li) in outs.iter().enumerate() {
            let d = view.links()[li].to;
            for c in 0..n_comm {
                if hosts[c] == node {
                    continue;
                }
                let u = backlogs.get(node, c);
                if u == 0 || u < cfg.alarm_level || !filter.allows(node, c, d) {
                    continue;
                }
                let mut score = u as f64 - backlogs.get(d, c) as f64;
                if let Some(g) = forecasts {
                    score -= g.get(d, c);
                }
                candidates.push((score, c, pos));
            }
        }
        // Largest differential first; lowest commodity, then lowest link on ties.
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        visited.iter_mut().for_each(|v| *v = false);
        let mut budget: Vec<usize> = outs.iter().map(|&li| cfg.link_budget(view, &view.links()[li])).collect();
        let mut bundles: Vec<Vec<RuleProposal>> = vec![Vec::new(); outs.len()];
        for &(score, c, pos) in &candidates {
            if visited[c] || budget[pos] == 0 {
                continue;
            }
            visited[c] = true;
            budget[pos] -= 1;
            let li = outs[pos];
            let link = &view.links()[li];
            let (u, ud) = (backlogs.get(node, c), backlogs.get(link.to, c));
            if u <= ud {
                continue;
            }
            if let Some(g) = forecasts {
                if u as f64 + g.get(node, c) <= ud as f64 + g.get(link.to, c) {
                    continue;
                }
            }
            bundles[pos].push(RuleProposal {
                owner: node,
                commodity: c,
                link: li,
                link_id: link.link_id,
                neighbor: link.to,
                potential: u.saturating_sub(ud),
                foresight_delta: score,
            });
        }
        reorder_multi_links(view, node, cfg, &mut bundles);
        out.extend(bundles.into_iter().flatten());
    }
    out
}

/// Redistribute bundles among parallel links to the same neighbour so that
/// high-potential bundles ride high-capacity links.
fn reorder_multi_links(view: &PeeringView, node: usize, cfg: &BpConfig, bundles: &mut [Vec<RuleProposal>]) {
    let outs = view.out_links(node);
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (pos, &li) in outs.iter().enumerate() {
        groups.entry(view.links()[li].to).or_default().push(pos);
    }
    for positions in groups.values().filter(|p| p.len() > 1) {
        let budgets: BTreeSet<usize> = positions.iter().map(|&p| cfg.link_budget(view, &view.links()[outs[p]])).collect();
        if budgets.len() > 1 || positions.iter().all(|&p| bundles[p].is_empty()) {
            continue;
        }
        let caps: Vec<f64> = positions.iter().map(|&p| view.links()[outs[p]].capacity_bps).collect();
        let dq: Vec<u64> = positions.iter().map(|&p| bundles[p].iter().map(|r| r.potential).sum()).collect();
        let perm = multi_link_reorder(&caps, &dq);
        let taken: Vec<Vec<RuleProposal>> = positions.iter().map(|&p| core::mem::take(&mut bundles[p])).collect();
        for (slot, &p) in positions.iter().enumerate() {
            let li = outs[p];
            let link = &view.links()[li];
            bundles[p] = taken[perm[slot]]
                .iter()
                .cloned()
                .map(|mut r| {
                    r.link = li;
                    r.link_id = link.link_id;
                    r
                })
                .collect();
        }
    }
}

/// Largest multi-link width searched exhaustively.
pub const MAX_EXHAUSTIVE_WIDTH: usize = 8;

/// Assignment maximising `sum(capacity[l] * potential[perm[l]])`.
///
/// Returns `perm` with `perm[l]` the assignment placed on link `l`. Widths up
/// to [`MAX_EXHAUSTIVE_WIDTH`] are searched exhaustively (first maximum in
/// lexicographic order wins); wider multi-links fall back to pairing the
/// largest potential with the largest capacity.
pub fn multi_link_reorder(capacities: &[f64], potentials: &[u64]) -> Vec<usize> {
    assert_eq!(capacities.len(), potentials.len(), "one assignment per link");
    let n = capacities.len();
    if n > MAX_EXHAUSTIVE_WIDTH {
        log::info!("multi-link of width {n} exceeds exhaustive bound, using greedy pairing");
        return greedy_reorder(capacities, potentials);
    }
    let caps: Vec<u128> = capacities.iter().map(|c| libm::round(*c) as u128).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_score = assignment_score_exact(&caps, potentials, &perm);
    while next_permutation(&mut perm) {
        let s = assignment_score_exact(&caps, potentials, &perm);
        if s > best_score {
            best_score = s;
            best.copy_from_slice(&perm);
        }
    }
    best
}

/// Pair links by descending capacity with assignments by descending potential.
pub fn greedy_reorder(capacities: &[f64], potentials: &[u64]) -> Vec<usize> {
    let n = capacities.len();
    let mut links: Vec<usize> = (0..n).collect();
    links.sort_by(|&a, &b| capacities[b].total_cmp(&capacities[a]).then(a.cmp(&b)));
    let mut items: Vec<usize> = (0..n).collect();
    items.sort_by(|&a, &b| potentials[b].cmp(&potentials[a]).then(a.cmp(&b)));
    let mut perm = vec![0; n];
    for (l, i) in links.into_iter().zip(items) {
        perm[l] = i;
    }
    perm
}

/// `sum(capacity[l] * potential[perm[l]])` in floating point.
pub fn assignment_score(capacities: &[f64], potentials: &[u64], perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(l, &a)| capacities[l] * potentials[a] as f64).sum()
}

fn assignment_score_exact(caps: &[u128], potentials: &[u64], perm: &[usize]) -> u128 {
    perm.iter().enumerate().map(|(l, &a)| caps[l] * potentials[a] as u128).sum()
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Allowed neighbours restricted to those strictly closer (in distance-vector
/// hops) to the commodity's host.
pub fn nhops_filter(view: &PeeringView, hosts: &[usize], dvr: &RoutingTable, prefs: &PeeringPreferences) -> NeighborFilter {
    let mut f = NeighborFilter::all(view, hosts.len(), prefs);
    for n in 0..view.node_count() {
        for (c, &host) in hosts.iter().enumerate() {
            let here = dvr.hop_count(n, host);
            let idx = n * hosts.len() + c;
            f.allowed[idx].retain(|&d| match (dvr.hop_count(d, host), here) {
                (Some(there), Some(here)) => there < here,
                _ => false,
            });
        }
    }
    f
}

/// Backpressure restricted to hop-decreasing neighbours. Loop-free for any
/// subset of its rules, so no detection pass is needed.
#[allow(clippy::too_many_arguments)]
pub fn nhops_stitch(
    view: &PeeringView,
    hosts: &[usize],
    backlogs: &BacklogView,
    forecasts: &ForecastView,
    dvr: &RoutingTable,
    prefs: &PeeringPreferences,
    cfg: &BpConfig,
) -> Vec<RuleProposal> {
    let filter = nhops_filter(view, hosts, dvr, prefs);
    fbpr(view, hosts, backlogs, forecasts, &filter, cfg)
}

/// Stops an iterative derivation.
pub trait Deadline {
    fn expired(&mut self) -> bool;
}

/// Deterministic deadline counting derivation rounds.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct IterationBudget {
    remaining: usize,
}

impl IterationBudget {
    pub fn new(rounds: usize) -> Self {
        Self { remaining: rounds }
    }
}

impl Deadline for IterationBudget {
    fn expired(&mut self) -> bool {
        if self.remaining == 0 {
            return true;
        }
        self.remaining -= 1;
        false
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StitchOutcome {
    pub proposals: Vec<RuleProposal>,
    /// The deadline hit before a loop-free derivation was found.
    pub partial: bool,
    pub rounds: usize,
}

/// Rule table `(owner, commodity) -> neighbor` for a proposal set.
pub fn rule_map(proposals: &[RuleProposal]) -> BTreeMap<(usize, usize), usize> {
    proposals.iter().map(|p| ((p.owner, p.commodity), p.neighbor)).collect()
}

/// Proposals whose pathlet endpoint is revisited under the combined policy.
pub fn loop_inducing(proposals: &[RuleProposal], dvr: &RoutingTable, hosts: &[usize]) -> Vec<usize> {
    let rules = rule_map(proposals);
    let state = PolicyState { dvr, rules: &rules, hosts };
    let mut bad: Vec<usize> = (0..proposals.len())
        .filter(|&i| loop_on_insert(state, proposals[i].neighbor, proposals[i].commodity))
        .collect();
    bad.sort_by_key(|&i| (proposals[i].owner, proposals[i].commodity, i));
    bad
}

/// Exploratory stitching: rerun foresight backpressure, each time excluding
/// the neighbours whose pathlets close a loop, until the rule set is
/// loop-free or the deadline expires.
#[allow(clippy::too_many_arguments)]
pub fn bp_dv_stitch(
    view: &PeeringView,
    hosts: &[usize],
    backlogs: &BacklogView,
    forecasts: &ForecastView,
    filter: &NeighborFilter,
    dvr: &RoutingTable,
    cfg: &BpConfig,
    deadline: &mut dyn Deadline,
) -> StitchOutcome {
    let mut filter = filter.clone();
    let mut rounds = 0;
    loop {
        rounds += 1;
        let proposals = fbpr(view, hosts, backlogs, forecasts, &filter, cfg);
        let bad = loop_inducing(&proposals, dvr, hosts);
        if bad.is_empty() {
            return StitchOutcome { proposals, partial: false, rounds };
        }
        if deadline.expired() {
            return StitchOutcome { proposals: prune_loops(proposals, dvr, hosts), partial: true, rounds };
        }
        for i in bad {
            let p = &proposals[i];
            filter.remove(p.owner, p.commodity, p.neighbor);
        }
    }
}

/// Drop loop-inducing proposals until none remain.
pub fn prune_loops(mut proposals: Vec<RuleProposal>, dvr: &RoutingTable, hosts: &[usize]) -> Vec<RuleProposal> {
    loop {
        let bad: BTreeSet<usize> = loop_inducing(&proposals, dvr, hosts).into_iter().collect();
        if bad.is_empty() {
            return proposals;
        }
        let mut i = 0;
        proposals.retain(|_| {
            let keep = !bad.contains(&i);
            i += 1;
            keep
        });
    }
}

/// Differential between a super-prefix backlog at `owner` and the summed
/// backlogs of the sub-prefixes it covers at `neighbor`.
pub fn aggregated_differential(backlogs: &BacklogView, owner: usize, commodity: usize, neighbor: usize, sub_commodities: &[usize]) -> i128 {
    let ours = backlogs.get(owner, commodity) as i128;
    let theirs: i128 = sub_commodities.iter().map(|&c| backlogs.get(neighbor, c) as i128).sum();
    ours - theirs
}
