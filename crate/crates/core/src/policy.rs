//! Distance-vector routing and the iterated-policy view of forwarding.
//!
//! Nodes are dense indices (`0..n`). A commodity is anything routed towards a
//! host node; the `hosts` slice of a [`PolicyState`] maps commodity index to
//! that node. Priority (backpressure) rules are consulted before the
//! distance-vector table, and a node hosting the commodity is a fixed point.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::topology::{LinkKind, Topology};

const NONE: u32 = u32::MAX;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Granularity {
    AsLevel,
    RouterLevel,
}

/// Shortest-hop next-hop table. Unreachable pairs have no entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutingTable {
    n: usize,
    next: Vec<u32>,
    hops: Vec<u32>,
}

impl RoutingTable {
    /// Distance-vector computation over a directed adjacency list.
    ///
    /// Every node repeatedly merges its neighbours' vectors (Bellman-Ford with
    /// unit weights) until no vector changes; the next hop is the lowest-index
    /// neighbour one hop closer to the destination.
    pub fn from_adjacency(adj: &[Vec<usize>]) -> Self {
        let n = adj.len();
        let mut hops = vec![NONE; n * n];
        for d in 0..n {
            hops[d * n + d] = 0;
        }
        loop {
            let mut changed = false;
            for node in 0..n {
                for &nb in &adj[node] {
                    for dest in 0..n {
                        let via = hops[nb * n + dest];
                        if via != NONE && via + 1 < hops[node * n + dest] {
                            hops[node * n + dest] = via + 1;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut next = vec![NONE; n * n];
        for node in 0..n {
            let mut nbs: Vec<usize> = adj[node].clone();
            nbs.sort_unstable();
            nbs.dedup();
            for dest in 0..n {
                let h = hops[node * n + dest];
                if h == NONE {
                    continue;
                }
                if h == 0 {
                    next[node * n + dest] = node as u32;
                    continue;
                }
                if let Some(&nb) = nbs.iter().find(|&&nb| hops[nb * n + dest] == h - 1) {
                    next[node * n + dest] = nb as u32;
                }
            }
        }
        Self { n, next, hops }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn next_hop(&self, node: usize, dest: usize) -> Option<usize> {
        match self.next[node * self.n + dest] {
            NONE => None,
            v => Some(v as usize),
        }
    }

    pub fn hop_count(&self, node: usize, dest: usize) -> Option<u32> {
        match self.hops[node * self.n + dest] {
            NONE => None,
            v => Some(v),
        }
    }
}

/// Shortest-hop routing over the peering graph (AS level) or over peering
/// and internal links (router level). Node indices follow the topology's AS
/// or router order.
pub fn compute_dvr(t: &Topology, granularity: Granularity) -> RoutingTable {
    match granularity {
        Granularity::AsLevel => {
            let adj: Vec<Vec<usize>> = t.as_adjacency().into_iter().map(|s| s.into_iter().collect()).collect();
            RoutingTable::from_adjacency(&adj)
        }
        Granularity::RouterLevel => {
            let adj: Vec<Vec<usize>> = (0..t.routers().len())
                .map(|r| {
                    let set: BTreeSet<usize> = t
                        .out_links(r)
                        .iter()
                        .filter(|&&l| t.links()[l].kind != LinkKind::External)
                        .map(|&l| t.link_endpoints(l).1)
                        .collect();
                    set.into_iter().collect()
                })
                .collect();
            RoutingTable::from_adjacency(&adj)
        }
    }
}

/// Source of priority-rule next hops.
pub trait RuleLookup {
    /// Next node dictated by an active priority rule, if any.
    fn bp_next(&self, node: usize, commodity: usize) -> Option<usize>;
}

impl RuleLookup for BTreeMap<(usize, usize), usize> {
    fn bp_next(&self, node: usize, commodity: usize) -> Option<usize> {
        self.get(&(node, commodity)).copied()
    }
}

/// No priority rules: plain distance-vector forwarding.
pub struct NoRules;

impl RuleLookup for NoRules {
    fn bp_next(&self, _: usize, _: usize) -> Option<usize> {
        None
    }
}

/// Forwarding state: distance-vector table plus a rule snapshot.
pub struct PolicyState<'a, R: RuleLookup + ?Sized> {
    pub dvr: &'a RoutingTable,
    pub rules: &'a R,
    /// Commodity index to host node.
    pub hosts: &'a [usize],
}

impl<'a, R: RuleLookup + ?Sized> Clone for PolicyState<'a, R> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<'a, R: RuleLookup + ?Sized> Copy for PolicyState<'a, R> {}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Step {
    /// The node hosts the commodity.
    Fixed,
    Next(usize),
    NoRoute,
}

/// One application of the combined policy at `node`.
pub fn apply_policy<R: RuleLookup + ?Sized>(state: PolicyState<'_, R>, node: usize, commodity: usize) -> Step {
    let host = state.hosts[commodity];
    if node == host {
        return Step::Fixed;
    }
    if let Some(next) = state.rules.bp_next(node, commodity) {
        return Step::Next(next);
    }
    match state.dvr.next_hop(node, host) {
        Some(next) => Step::Next(next),
        None => Step::NoRoute,
    }
}

/// Nodes visited by iterating a policy from an origin.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraversalSet {
    pub origin: usize,
    pub visited: Vec<usize>,
    pub terminated_at_fixed_point: bool,
    /// Node reached a second time, if the walk looped.
    pub revisited: Option<usize>,
    pub no_route: bool,
}

impl TraversalSet {
    pub fn has_loop(&self) -> bool {
        self.revisited.is_some()
    }
}

/// Iterate the policy from `origin` until a fixed point, a revisit, a missing
/// route or `max_steps` applications.
pub fn traverse<R: RuleLookup + ?Sized>(
    state: PolicyState<'_, R>,
    origin: usize,
    commodity: usize,
    max_steps: usize,
) -> TraversalSet {
    let mut set = TraversalSet {
        origin,
        visited: vec![origin],
        terminated_at_fixed_point: false,
        revisited: None,
        no_route: false,
    };
    let mut node = origin;
    for _ in 0..max_steps.max(1) {
        match apply_policy(state, node, commodity) {
            Step::Fixed => {
                set.terminated_at_fixed_point = true;
                break;
            }
            Step::NoRoute => {
                set.no_route = true;
                break;
            }
            Step::Next(next) => {
                if set.visited.contains(&next) {
                    set.revisited = Some(next);
                    break;
                }
                set.visited.push(next);
                node = next;
            }
        }
    }
    // A walk that stops on the host without one more application still ends
    // at the fixed point.
    if !set.terminated_at_fixed_point && set.revisited.is_none() && node == state.hosts[commodity] {
        set.terminated_at_fixed_point = true;
    }
    set
}

/// Whether a priority pathlet ending at `endpoint` closes a loop: the walk
/// continuing from the endpoint under the combined policy comes back to it.
/// At most `n` steps are needed, since any longer walk repeats a node.
pub fn loop_on_insert<R: RuleLookup + ?Sized>(state: PolicyState<'_, R>, endpoint: usize, commodity: usize) -> bool {
    let mut node = endpoint;
    for _ in 0..state.dvr.node_count() {
        match apply_policy(state, node, commodity) {
            Step::Next(next) if next == endpoint => return true,
            Step::Next(next) => node = next,
            Step::Fixed | Step::NoRoute => return false,
        }
    }
    false
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum PolicyKind {
    Dv,
    Bp,
}

/// A path as consecutive single-policy segments, in path order.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PolicyChain {
    segments: Vec<(PolicyKind, usize)>,
}

impl PolicyChain {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a segment of `steps` applications. Zero-length segments are
    /// rejected.
    pub fn then(mut self, kind: PolicyKind, steps: usize) -> Option<Self> {
        if steps == 0 {
            return None;
        }
        self.segments.push((kind, steps));
        Some(self)
    }

    pub fn segments(&self) -> &[(PolicyKind, usize)] {
        &self.segments
    }

    /// Apply the composed map to `origin`. A `Bp` step at a node without a
    /// rule, or any step at the host, leaves the node unchanged.
    pub fn traverse<R: RuleLookup + ?Sized>(&self, state: PolicyState<'_, R>, origin: usize, commodity: usize) -> TraversalSet {
        let host = state.hosts[commodity];
        let mut set = TraversalSet {
            origin,
            visited: vec![origin],
            terminated_at_fixed_point: false,
            revisited: None,
            no_route: false,
        };
        let mut node = origin;
        'outer: for &(kind, steps) in &self.segments {
            for _ in 0..steps {
                let next = match kind {
                    _ if node == host => node,
                    PolicyKind::Bp => state.rules.bp_next(node, commodity).unwrap_or(node),
                    PolicyKind::Dv => match state.dvr.next_hop(node, host) {
                        Some(n) => n,
                        None => {
                            set.no_route = true;
                            break 'outer;
                        }
                    },
                };
                if next == node {
                    continue;
                }
                if set.visited.contains(&next) {
                    set.revisited = Some(next);
                    break 'outer;
                }
                set.visited.push(next);
                node = next;
            }
        }
        set.terminated_at_fixed_point = node == host && set.revisited.is_none();
        set
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn undirected(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    #[test]
    fn two_nodes() {
        let t = RoutingTable::from_adjacency(&undirected(2, &[(0, 1)]));
        assert_eq!(t.next_hop(0, 1), Some(1));
        assert_eq!(t.hop_count(0, 1), Some(1));
        assert_eq!(t.hop_count(1, 1), Some(0));
    }

    #[test]
    fn line_and_disconnected() {
        let t = RoutingTable::from_adjacency(&undirected(4, &[(0, 1), (1, 2)]));
        assert_eq!(t.next_hop(0, 2), Some(1));
        assert_eq!(t.hop_count(0, 2), Some(2));
        assert_eq!(t.next_hop(0, 3), None);
        assert_eq!(t.hop_count(3, 0), None);
    }

    #[test]
    fn equal_hop_ties_pick_lowest_index() {
        // 0 reaches 3 through 1 or 2.
        let t = RoutingTable::from_adjacency(&undirected(4, &[(0, 2), (0, 1), (1, 3), (2, 3)]));
        assert_eq!(t.next_hop(0, 3), Some(1));
    }

    // A(0)-B(1)-C(2) with a spur D(3) attached to B; commodity hosted at C.
    fn spur_table() -> RoutingTable {
        RoutingTable::from_adjacency(&undirected(4, &[(0, 1), (1, 2), (1, 3)]))
    }

    #[test]
    fn policy_fixed_point_rule_and_expiry() {
        let dvr = spur_table();
        let hosts = [2usize];
        let none = BTreeMap::new();
        let st = PolicyState { dvr: &dvr, rules: &none, hosts: &hosts };
        assert_eq!(apply_policy(st, 2, 0), Step::Fixed);
        assert_eq!(apply_policy(st, 1, 0), Step::Next(2));

        let mut rules = BTreeMap::new();
        rules.insert((1usize, 0usize), 3usize);
        let st = PolicyState { dvr: &dvr, rules: &rules, hosts: &hosts };
        assert_eq!(apply_policy(st, 1, 0), Step::Next(3));
        rules.clear();
        let st = PolicyState { dvr: &dvr, rules: &rules, hosts: &hosts };
        assert_eq!(apply_policy(st, 1, 0), Step::Next(2));
    }

    #[test]
    fn spur_detour_loop_detected() {
        let dvr = spur_table();
        let hosts = [2usize];
        let mut rules = BTreeMap::new();
        rules.insert((1usize, 0usize), 3usize);
        let st = PolicyState { dvr: &dvr, rules: &rules, hosts: &hosts };
        let tr = traverse(st, 0, 0, 10);
        assert_eq!(tr.revisited, Some(1));
        assert_eq!(tr.visited, vec![0, 1, 3]);
        assert!(loop_on_insert(st, 3, 0));

        let chain = PolicyChain::new()
            .then(PolicyKind::Dv, 1)
            .unwrap()
            .then(PolicyKind::Bp, 1)
            .unwrap()
            .then(PolicyKind::Dv, 3)
            .unwrap();
        assert!(chain.traverse(st, 0, 0).has_loop());
        assert!(PolicyChain::new().then(PolicyKind::Dv, 0).is_none());
    }

    #[test]
    fn detour_chain_loop_detected() {
        // A(0)-B(1)-C(2); B-D(3), D-E(4), E-B. Host C.
        let dvr = RoutingTable::from_adjacency(&undirected(5, &[(0, 1), (1, 2), (1, 3), (3, 4), (4, 1)]));
        let hosts = [2usize];
        let mut rules = BTreeMap::new();
        rules.insert((1usize, 0usize), 3usize);
        rules.insert((3usize, 0usize), 4usize);
        let st = PolicyState { dvr: &dvr, rules: &rules, hosts: &hosts };
        // E's distance-vector hop returns to B, whose rule starts the chain again.
        assert!(loop_on_insert(st, 4, 0));
        assert!(traverse(st, 0, 0, 10).has_loop());
    }

    #[test]
    fn clean_pathlet_is_not_flagged() {
        // Square 0-1-2-3-0, host 2; rule 0 -> 3 is fine because 3 -> 2 directly.
        let dvr = RoutingTable::from_adjacency(&undirected(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]));
        let hosts = [2usize];
        let mut rules = BTreeMap::new();
        rules.insert((0usize, 0usize), 3usize);
        let st = PolicyState { dvr: &dvr, rules: &rules, hosts: &hosts };
        assert!(!loop_on_insert(st, 3, 0));
        let tr = traverse(st, 0, 0, 10);
        assert!(tr.terminated_at_fixed_point);
        assert_eq!(tr.visited, vec![0, 3, 2]);
    }

    #[test]
    fn origin_at_host() {
        let dvr = spur_table();
        let hosts = [2usize];
        let st = PolicyState { dvr: &dvr, rules: &NoRules, hosts: &hosts };
        let tr = traverse(st, 2, 0, 5);
        assert_eq!(tr.visited, vec![2]);
        assert!(tr.terminated_at_fixed_point);
    }
}
