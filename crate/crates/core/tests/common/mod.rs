//! Random AS-level instances shared by the integration tests.

#![allow(dead_code)]

pub mod oracle;

use backflow_core::backpressure::{BacklogView, ForecastView, NeighborFilter, PeeringLink, PeeringPreferences, PeeringView};
use backflow_core::policy::RoutingTable;
use backflow_core::topology::{
    AsDecl, AsId, GeoPoint, Link, LinkId, LinkKind, Router, RouterId, Topology, DEFAULT_MEMORY_BYTES,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub const GB: u64 = 1_000_000_000;

pub struct Instance {
    pub view: PeeringView,
    pub hosts: Vec<usize>,
    pub backlogs: BacklogView,
    pub forecasts: ForecastView,
    pub dvr: RoutingTable,
}

/// Connected graph on `n` nodes: a random spanning tree plus extra edges,
/// each AS pair joined by one to `max_parallel` physical links. Every node
/// owns four routers and each physical link leaves from one of them.
pub fn random_view(rng: &mut impl Rng, n: usize, extra_edges: usize, max_parallel: usize) -> PeeringView {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pairs = Vec::new();
    for i in 1..n {
        let a = order[i];
        let b = order[rng.gen_range(0..i)];
        pairs.push((a.min(b), a.max(b)));
    }
    for _ in 0..extra_edges {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && !pairs.contains(&(a.min(b), a.max(b))) {
            pairs.push((a.min(b), a.max(b)));
        }
    }
    let caps = [5e9, 7.5e9, 10e9, 12.5e9, 15e9];
    let mut links = Vec::new();
    let mut next_id = 0u32;
    for &(a, b) in &pairs {
        for _ in 0..rng.gen_range(1..=max_parallel) {
            let cap = caps[rng.gen_range(0..caps.len())];
            for (x, y) in [(a, b), (b, a)] {
                links.push(PeeringLink {
                    link_ix: next_id as usize,
                    link_id: LinkId(next_id),
                    from: x,
                    to: y,
                    from_router: x * 4 + rng.gen_range(0..4),
                    capacity_bps: cap,
                });
                next_id += 1;
            }
        }
    }
    // Shuffle ids so that view order differs from construction order.
    let mut ids: Vec<u32> = (0..next_id).collect();
    ids.shuffle(rng);
    for (l, id) in links.iter_mut().zip(ids) {
        l.link_id = LinkId(id);
    }
    PeeringView::new(n, links)
}

/// Backlogs drawn from a coarse grid so that ties occur.
pub fn random_backlogs(rng: &mut impl Rng, n: usize, nc: usize, hosts: &[usize]) -> BacklogView {
    let mut b = BacklogView::zeros(n, nc);
    for node in 0..n {
        for c in 0..nc {
            if hosts[c] == node || rng.gen_bool(0.25) {
                continue;
            }
            b.set(node, c, rng.gen_range(0..12u64) * GB / 2);
        }
    }
    b
}

pub fn random_forecasts(rng: &mut impl Rng, n: usize, nc: usize) -> ForecastView {
    let mut g = ForecastView::zeros(n, nc);
    for node in 0..n {
        for c in 0..nc {
            if rng.gen_bool(0.7) {
                g.set(node, c, (rng.gen_range(0..8u64) * GB / 2) as f64);
            }
        }
    }
    g
}

pub fn random_instance(rng: &mut impl Rng, max_nodes: usize, max_commodities: usize, max_parallel: usize) -> Instance {
    let n = rng.gen_range(2..=max_nodes);
    let nc = rng.gen_range(1..=max_commodities);
    let extra = rng.gen_range(0..=n);
    let view = random_view(rng, n, extra, max_parallel);
    let hosts: Vec<usize> = (0..nc).map(|_| rng.gen_range(0..n)).collect();
    let backlogs = random_backlogs(rng, n, nc, &hosts);
    let forecasts = random_forecasts(rng, n, nc);
    let dvr = RoutingTable::from_adjacency(&view.adjacency());
    Instance { view, hosts, backlogs, forecasts, dvr }
}

/// All neighbours allowed, then a random share removed.
pub fn random_filter(rng: &mut impl Rng, inst: &Instance, drop_share: f64) -> NeighborFilter {
    let nc = inst.hosts.len();
    let mut f = NeighborFilter::all(&inst.view, nc, &PeeringPreferences::allow_all());
    for node in 0..inst.view.node_count() {
        for c in 0..nc {
            for d in inst.view.neighbors(node) {
                if rng.gen_bool(drop_share) {
                    f.remove(node, c, d);
                }
            }
        }
    }
    f
}

/// Degrees of longitude along the equator that span `km` kilometres.
pub fn equator_degrees(km: f64) -> f64 {
    (km * 1000.0 / backflow_core::topology::EARTH_RADIUS_M).to_degrees()
}

/// `n` ASes in a line along the equator, `routers_per_as` routers each.
/// Consecutive ASes are joined in both directions between their first
/// routers; routers of one AS sit at the same point.
pub fn line_topology(n: usize, routers_per_as: usize, spacing_km: f64, capacity_bps: f64) -> Topology {
    let decls = (0..n)
        .map(|a| AsDecl { as_id: AsId(100 + a as u32), name: format!("as{a}"), country: "ZZ".into() })
        .collect();
    let mut routers = Vec::new();
    for a in 0..n {
        for k in 0..routers_per_as {
            routers.push(Router {
                id: RouterId((a * routers_per_as + k + 1) as u32),
                as_id: AsId(100 + a as u32),
                location: GeoPoint::new(0.0, a as f64 * equator_degrees(spacing_km)),
                memory_capacity: DEFAULT_MEMORY_BYTES,
            });
        }
    }
    let mut links = Vec::new();
    for a in 0..n.saturating_sub(1) {
        let x = RouterId((a * routers_per_as + 1) as u32);
        let y = RouterId(((a + 1) * routers_per_as + 1) as u32);
        for (from, to) in [(x, y), (y, x)] {
            links.push(Link {
                id: LinkId(links.len() as u32 + 1),
                from,
                to,
                capacity_bps,
                latency_s: 0.0,
                kind: LinkKind::Peering,
            });
        }
    }
    Topology::assemble(decls, routers, links).expect("valid line topology")
}

/// Random connected topology: `n` ASes with 1..=3 routers each, a random
/// spanning tree of AS relations plus extras, each realised by one or two
/// bidirectional physical links between random routers.
pub fn random_topology(rng: &mut impl Rng, n: usize, extra_edges: usize) -> Topology {
    let decls = (0..n)
        .map(|a| AsDecl { as_id: AsId(1 + a as u32), name: format!("as{a}"), country: "ZZ".into() })
        .collect();
    let mut routers = Vec::new();
    let mut of_as: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (a, list) in of_as.iter_mut().enumerate() {
        for _ in 0..rng.gen_range(1..=3) {
            let id = routers.len() as u32 + 1;
            routers.push(Router {
                id: RouterId(id),
                as_id: AsId(1 + a as u32),
                location: GeoPoint::new(rng.gen_range(35.0..60.0), rng.gen_range(-10.0..30.0)),
                memory_capacity: DEFAULT_MEMORY_BYTES,
            });
            list.push(id);
        }
    }
    let mut pairs = Vec::new();
    for i in 1..n {
        pairs.push((rng.gen_range(0..i), i));
    }
    for _ in 0..extra_edges {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && !pairs.contains(&(a.min(b), a.max(b))) {
            pairs.push((a.min(b), a.max(b)));
        }
    }
    let mut links = Vec::new();
    let mut used = std::collections::BTreeSet::new();
    for &(a, b) in &pairs {
        for _ in 0..rng.gen_range(1..=2) {
            let x = *of_as[a].choose(rng).unwrap();
            let y = *of_as[b].choose(rng).unwrap();
            if !used.insert((x, y)) {
                continue;
            }
            for (from, to) in [(x, y), (y, x)] {
                links.push(Link {
                    id: LinkId(links.len() as u32 + 1),
                    from: RouterId(from),
                    to: RouterId(to),
                    capacity_bps: [5e9, 10e9, 15e9][rng.gen_range(0..3)],
                    latency_s: 0.0,
                    kind: LinkKind::Peering,
                });
            }
        }
    }
    Topology::assemble(decls, routers, links).expect("valid random topology")
}
