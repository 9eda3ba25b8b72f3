//! Two-level (AS / router) network graph.
//!
//! A [`Topology`] is assembled from declared ASes, routers and inter-AS
//! links. Intra-AS connectivity is never taken from input: every AS gets a
//! regenerated full mesh of internal links whose capacity equals the largest
//! peering capacity of that AS, so intra-AS transit is never the bottleneck.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Router shared memory, 4 GiB.
pub const DEFAULT_MEMORY_BYTES: u64 = 4 << 30;
/// Capacity assumed for links declared without one.
pub const DEFAULT_CAPACITY_BPS: f64 = 10e9;
pub const SPEED_OF_LIGHT_M_S: f64 = 3.0e8;
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
/// Lower/upper bounds of the per-direction peering capacity draw.
pub const CAPACITY_RANGE_BPS: (f64, f64) = (5e9, 15e9);

macro_rules! id_type {
    ($name:ident, $prefix:literal) => {
        #[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(AsId, "AS");
id_type!(RouterId, "R");
id_type!(LinkId, "L");

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LinkKind {
    /// Between routers of two ASes with a peer-to-peer relation.
    Peering,
    /// Between routers of the same AS.
    Internal,
    /// Between routers of two ASes without a peer-to-peer relation.
    External,
}

/// IPv4 CIDR record.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix {
    pub addr: u32,
    pub mask: u8,
}

impl Prefix {
    pub const fn new(addr: u32, mask: u8) -> Self {
        Self { addr, mask }
    }

    pub fn contains(&self, other: &Prefix) -> bool {
        if other.mask < self.mask {
            return false;
        }
        let net = if self.mask == 0 { 0 } else { u32::MAX << (32 - self.mask as u32) };
        (self.addr & net) == (other.addr & net)
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.addr.to_be_bytes();
        write!(f, "{a}.{b}.{c}.{d}/{}", self.mask)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsNode {
    pub as_id: AsId,
    pub name: String,
    pub country: String,
    pub router_ids: Vec<RouterId>,
    /// Distinct peer ASes reachable over peering links.
    pub degree: usize,
}

/// AS declaration as read from an assignment file.
#[derive(Clone, Debug, PartialEq)]
pub struct AsDecl {
    pub as_id: AsId,
    pub name: String,
    pub country: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Router {
    pub id: RouterId,
    pub as_id: AsId,
    pub location: GeoPoint,
    pub memory_capacity: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub id: LinkId,
    pub from: RouterId,
    pub to: RouterId,
    pub capacity_bps: f64,
    pub latency_s: f64,
    pub kind: LinkKind,
}

/// Great-circle distance in meters.
pub fn great_circle_distance_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = p2 - p1;
    let dlambda = (b.lon - a.lon).to_radians();
    let s1 = libm::sin(dphi / 2.0);
    let s2 = libm::sin(dlambda / 2.0);
    let h = s1 * s1 + libm::cos(p1) * libm::cos(p2) * s2 * s2;
    2.0 * EARTH_RADIUS_M * libm::asin(libm::sqrt(h.clamp(0.0, 1.0)))
}

/// Propagation latency between two locations at the speed of light.
pub fn link_latency(from: GeoPoint, to: GeoPoint) -> f64 {
    great_circle_distance_m(from, to) / SPEED_OF_LIGHT_M_S
}

#[derive(Clone, Debug)]
pub struct Topology {
    ases: Vec<AsNode>,
    routers: Vec<Router>,
    links: Vec<Link>,
    prefix_table: BTreeMap<AsId, Vec<Prefix>>,
    as_ix: BTreeMap<AsId, usize>,
    router_ix: BTreeMap<RouterId, usize>,
    link_ix: BTreeMap<LinkId, usize>,
    router_as: Vec<usize>,
    out_links: Vec<Vec<usize>>,
    dropped_routers: usize,
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        self.ases == other.ases
            && self.routers == other.routers
            && self.links == other.links
            && self.prefix_table == other.prefix_table
    }
}

impl Topology {
    /// Assemble a topology from declarations.
    ///
    /// Routers whose AS is undeclared are dropped (counted in
    /// [`Topology::dropped_routers`]) together with their links. A link whose
    /// endpoint is not a declared router is an integrity error. Intra-AS links
    /// in `links` are discarded in favour of a regenerated full mesh.
    pub fn assemble(decls: Vec<AsDecl>, routers: Vec<Router>, links: Vec<Link>) -> Result<Self> {
        let declared: BTreeMap<AsId, AsDecl> = decls.into_iter().map(|d| (d.as_id, d)).collect();
        let mut known_routers = BTreeSet::new();
        let mut kept_routers: Vec<Router> = Vec::new();
        let mut dropped = BTreeSet::new();
        for r in routers {
            if !known_routers.insert(r.id) {
                return Err(Error::Integrity(format!("duplicate router {}", r.id)));
            }
            if r.memory_capacity == 0 {
                return Err(Error::Integrity(format!("router {} has zero memory", r.id)));
            }
            if declared.contains_key(&r.as_id) {
                kept_routers.push(r);
            } else {
                dropped.insert(r.id);
            }
        }
        if !dropped.is_empty() {
            log::warn!("dropped {} routers with unknown AS", dropped.len());
        }
        kept_routers.sort_by_key(|r| r.id);
        let router_as: BTreeMap<RouterId, AsId> = kept_routers.iter().map(|r| (r.id, r.as_id)).collect();

        let mut inter = Vec::new();
        let mut seen_links = BTreeSet::new();
        for l in links {
            for end in [l.from, l.to] {
                if !known_routers.contains(&end) {
                    return Err(Error::Integrity(format!("link {} references unknown router {}", l.id, end)));
                }
            }
            if !seen_links.insert(l.id) {
                return Err(Error::Integrity(format!("duplicate link {}", l.id)));
            }
            if dropped.contains(&l.from) || dropped.contains(&l.to) {
                continue;
            }
            if !(l.capacity_bps > 0.0) {
                return Err(Error::Integrity(format!("link {} has non-positive capacity", l.id)));
            }
            if router_as[&l.from] == router_as[&l.to] {
                continue;
            }
            let kind = if l.kind == LinkKind::Internal { LinkKind::Peering } else { l.kind };
            inter.push(Link { kind, ..l });
        }

        let mut by_as: BTreeMap<AsId, Vec<RouterId>> = BTreeMap::new();
        for r in &kept_routers {
            by_as.entry(r.as_id).or_default().push(r.id);
        }
        let ases: Vec<AsNode> = by_as
            .into_iter()
            .map(|(as_id, router_ids)| {
                let d = &declared[&as_id];
                AsNode { as_id, name: d.name.clone(), country: d.country.clone(), router_ids, degree: 0 }
            })
            .collect();

        let mut t = Topology {
            ases,
            routers: kept_routers,
            links: inter,
            prefix_table: BTreeMap::new(),
            as_ix: BTreeMap::new(),
            router_ix: BTreeMap::new(),
            link_ix: BTreeMap::new(),
            router_as: Vec::new(),
            out_links: Vec::new(),
            dropped_routers: dropped.len(),
        };
        t.rebuild();
        Ok(t)
    }

    /// Recompute latencies, the internal mesh, degrees and lookup indexes.
    fn rebuild(&mut self) {
        self.links.retain(|l| l.kind != LinkKind::Internal);
        self.links.sort_by_key(|l| l.id);
        self.router_ix = self.routers.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
        self.as_ix = self.ases.iter().enumerate().map(|(i, a)| (a.as_id, i)).collect();

        for l in &mut self.links {
            let a = self.routers[self.router_ix[&l.from]].location;
            let b = self.routers[self.router_ix[&l.to]].location;
            l.latency_s = link_latency(a, b);
        }

        let mut max_cap: BTreeMap<AsId, f64> = BTreeMap::new();
        for l in self.links.iter().filter(|l| l.kind == LinkKind::Peering) {
            let owner = self.routers[self.router_ix[&l.from]].as_id;
            let e = max_cap.entry(owner).or_insert(0.0);
            if l.capacity_bps > *e {
                *e = l.capacity_bps;
            }
        }
        let mut next_id = self.links.iter().map(|l| l.id.0 + 1).max().unwrap_or(0);
        let mut mesh = Vec::new();
        for a in &self.ases {
            let cap = max_cap.get(&a.as_id).copied().unwrap_or(DEFAULT_CAPACITY_BPS);
            for &from in &a.router_ids {
                for &to in &a.router_ids {
                    if from == to {
                        continue;
                    }
                    let la = self.routers[self.router_ix[&from]].location;
                    let lb = self.routers[self.router_ix[&to]].location;
                    mesh.push(Link {
                        id: LinkId(next_id),
                        from,
                        to,
                        capacity_bps: cap,
                        latency_s: link_latency(la, lb),
                        kind: LinkKind::Internal,
                    });
                    next_id += 1;
                }
            }
        }
        self.links.extend(mesh);
        self.link_ix = self.links.iter().enumerate().map(|(i, l)| (l.id, i)).collect();

        self.router_as = self.routers.iter().map(|r| self.as_ix[&r.as_id]).collect();
        self.out_links = vec_of_vecs(self.routers.len());
        for (i, l) in self.links.iter().enumerate() {
            self.out_links[self.router_ix[&l.from]].push(i);
        }

        let mut peers: Vec<BTreeSet<usize>> = vec_of_sets(self.ases.len());
        for l in self.links.iter().filter(|l| l.kind == LinkKind::Peering) {
            let a = self.router_as[self.router_ix[&l.from]];
            let b = self.router_as[self.router_ix[&l.to]];
            peers[a].insert(b);
            peers[b].insert(a);
        }
        for (a, p) in self.ases.iter_mut().zip(peers) {
            a.degree = p.len();
        }
        self.prefix_table.retain(|as_id, _| self.as_ix.contains_key(as_id));
    }

    pub fn ases(&self) -> &[AsNode] {
        &self.ases
    }

    pub fn routers(&self) -> &[Router] {
        &self.routers
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn prefix_table(&self) -> &BTreeMap<AsId, Vec<Prefix>> {
        &self.prefix_table
    }

    /// Routers dropped during assembly because their AS was unknown.
    pub fn dropped_routers(&self) -> usize {
        self.dropped_routers
    }

    pub fn as_index(&self, id: AsId) -> Option<usize> {
        self.as_ix.get(&id).copied()
    }

    pub fn router_index(&self, id: RouterId) -> Option<usize> {
        self.router_ix.get(&id).copied()
    }

    pub fn link_index(&self, id: LinkId) -> Option<usize> {
        self.link_ix.get(&id).copied()
    }

    /// Index of the AS owning the router at `router_ix`.
    pub fn router_as_index(&self, router_ix: usize) -> usize {
        self.router_as[router_ix]
    }

    /// Indices of links leaving the router at `router_ix`.
    pub fn out_links(&self, router_ix: usize) -> &[usize] {
        &self.out_links[router_ix]
    }

    pub fn link_endpoints(&self, link_ix: usize) -> (usize, usize) {
        let l = &self.links[link_ix];
        (self.router_ix[&l.from], self.router_ix[&l.to])
    }

    pub fn peering_links(&self) -> impl Iterator<Item = &Link> {
        self.links.iter().filter(|l| l.kind == LinkKind::Peering)
    }

    /// Number of physical peering links (unordered router pairs).
    pub fn physical_peering_links(&self) -> usize {
        self.peering_links()
            .map(|l| if l.from < l.to { (l.from, l.to) } else { (l.to, l.from) })
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Number of AS pairs with at least one peering link.
    pub fn as_peering_relations(&self) -> usize {
        self.as_adjacency().iter().map(|s| s.len()).sum::<usize>() / 2
    }

    /// Peer-AS index sets, symmetric.
    pub fn as_adjacency(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec_of_sets(self.ases.len());
        for l in self.peering_links() {
            let a = self.router_as[self.router_ix[&l.from]];
            let b = self.router_as[self.router_ix[&l.to]];
            adj[a].insert(b);
            adj[b].insert(a);
        }
        adj
    }

    /// Check every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let adj = self.as_adjacency();
        for (i, a) in self.ases.iter().enumerate() {
            if a.router_ids.is_empty() {
                return Err(Error::Integrity(format!("{} has no routers", a.as_id)));
            }
            if a.degree != adj[i].len() {
                return Err(Error::Integrity(format!("{} degree mismatch", a.as_id)));
            }
        }
        for r in &self.routers {
            if r.memory_capacity == 0 {
                return Err(Error::Integrity(format!("{} has zero memory", r.id)));
            }
            if !self.as_ix.contains_key(&r.as_id) {
                return Err(Error::Integrity(format!("{} has unknown AS", r.id)));
            }
        }
        let mut internal = BTreeSet::new();
        for l in &self.links {
            let (Some(a), Some(b)) = (self.router_ix.get(&l.from), self.router_ix.get(&l.to)) else {
                return Err(Error::Integrity(format!("{} has a dangling endpoint", l.id)));
            };
            if !(l.capacity_bps > 0.0) || !(l.latency_s >= 0.0) {
                return Err(Error::Integrity(format!("{} has invalid capacity or latency", l.id)));
            }
            let same = self.router_as[*a] == self.router_as[*b];
            match l.kind {
                LinkKind::Internal if !same => {
                    return Err(Error::Integrity(format!("internal {} crosses ASes", l.id)))
                }
                LinkKind::Peering | LinkKind::External if same => {
                    return Err(Error::Integrity(format!("inter-AS {} stays within one AS", l.id)))
                }
                LinkKind::Internal => {
                    internal.insert((l.from, l.to));
                }
                _ => {}
            }
        }
        for a in &self.ases {
            for &x in &a.router_ids {
                for &y in &a.router_ids {
                    if x != y && !internal.contains(&(x, y)) {
                        return Err(Error::Integrity(format!("{} lacks internal link {x}->{y}", a.as_id)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Keep the `top_k` best-connected ASes (ties by ascending id).
    ///
    /// With `keep_peer_to_peer_only`, non peer-to-peer inter-AS links are
    /// removed as well. A `top_k` above the AS count keeps every AS.
    pub fn filter_pipeline(&self, top_k: usize, keep_peer_to_peer_only: bool) -> Result<Topology> {
        if top_k == 0 {
            return Err(Error::InvalidParameter("top_k must be at least 1".into()));
        }
        let mut order: Vec<&AsNode> = self.ases.iter().collect();
        order.sort_by(|a, b| b.degree.cmp(&a.degree).then(a.as_id.cmp(&b.as_id)));
        let kept: BTreeSet<AsId> = order.iter().take(top_k).map(|a| a.as_id).collect();

        let ases = self
            .ases
            .iter()
            .filter(|a| kept.contains(&a.as_id))
            .cloned()
            .collect();
        let routers: Vec<Router> = self
            .routers
            .iter()
            .filter(|r| kept.contains(&r.as_id))
            .cloned()
            .collect();
        let keep_router: BTreeSet<RouterId> = routers.iter().map(|r| r.id).collect();
        let links = self
            .links
            .iter()
            .filter(|l| l.kind != LinkKind::Internal)
            .filter(|l| !(keep_peer_to_peer_only && l.kind == LinkKind::External))
            .filter(|l| keep_router.contains(&l.from) && keep_router.contains(&l.to))
            .cloned()
            .collect();
        let mut t = Topology {
            ases,
            routers,
            links,
            prefix_table: self.prefix_table.clone(),
            as_ix: BTreeMap::new(),
            router_ix: BTreeMap::new(),
            link_ix: BTreeMap::new(),
            router_as: Vec::new(),
            out_links: Vec::new(),
            dropped_routers: self.dropped_routers,
        };
        t.rebuild();
        Ok(t)
    }

    /// Draw every peering-link capacity uniformly in `[low_bps, high_bps]`.
    pub fn randomize_capacities(&self, low_bps: f64, high_bps: f64, seed: u64) -> Result<Topology> {
        if !(low_bps > 0.0) || !(low_bps <= high_bps) {
            return Err(Error::InvalidParameter(format!("bad capacity range [{low_bps}, {high_bps}]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = self.clone();
        for l in t.links.iter_mut().filter(|l| l.kind == LinkKind::Peering) {
            l.capacity_bps = rng.gen_range(low_bps..=high_bps);
        }
        t.rebuild();
        Ok(t)
    }

    /// Attach `n_prefixes` synthetic /24 prefixes to every AS.
    ///
    /// Prefixes live inside the AS's aggregate /16 (see [`aggregate_prefix`]),
    /// which is a pure function of the AS number.
    pub fn with_prefixes(&self, n_prefixes: usize) -> Result<Topology> {
        if n_prefixes > 256 {
            return Err(Error::InvalidParameter("at most 256 prefixes per AS".into()));
        }
        let mut blocks = BTreeMap::new();
        let mut t = self.clone();
        t.prefix_table.clear();
        for a in &self.ases {
            let agg = aggregate_prefix(a.as_id);
            if let Some(other) = blocks.insert(agg, a.as_id) {
                return Err(Error::InvalidParameter(format!(
                    "{} and {} map to the same address block",
                    other, a.as_id
                )));
            }
            let list = (0..n_prefixes as u32).map(|i| Prefix::new(agg.addr | (i << 8), 24)).collect();
            t.prefix_table.insert(a.as_id, list);
        }
        Ok(t)
    }
}

/// The /16 block owned by an AS, derived from the low 16 bits of its number.
pub fn aggregate_prefix(as_id: AsId) -> Prefix {
    Prefix::new((as_id.0 & 0xFFFF) << 16, 16)
}

fn vec_of_vecs<T>(n: usize) -> Vec<Vec<T>> {
    (0..n).map(|_| Vec::new()).collect()
}

fn vec_of_sets<T: Ord>(n: usize) -> Vec<BTreeSet<T>> {
    (0..n).map(|_| BTreeSet::new()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn decl(id: u32) -> AsDecl {
        AsDecl { as_id: AsId(id), name: format!("as{id}"), country: "CH".to_string() }
    }

    fn router(id: u32, as_id: u32, lat: f64, lon: f64) -> Router {
        Router { id: RouterId(id), as_id: AsId(as_id), location: GeoPoint::new(lat, lon), memory_capacity: DEFAULT_MEMORY_BYTES }
    }

    fn link(id: u32, from: u32, to: u32) -> Link {
        Link {
            id: LinkId(id),
            from: RouterId(from),
            to: RouterId(to),
            capacity_bps: DEFAULT_CAPACITY_BPS,
            latency_s: 0.0,
            kind: LinkKind::Peering,
        }
    }

    /// A line of ASes with one router each, linked in both directions.
    fn line(n: u32) -> Topology {
        let decls = (0..n).map(decl).collect();
        let routers = (0..n).map(|i| router(i, i, 47.0, 8.0 + i as f64)).collect();
        let links = (0..n - 1)
            .flat_map(|i| [link(2 * i, i, i + 1), link(2 * i + 1, i + 1, i)])
            .collect();
        Topology::assemble(decls, routers, links).unwrap()
    }

    #[test]
    fn smallest_fixture_gets_internal_mesh() {
        let t = Topology::assemble(
            vec![decl(1), decl(2)],
            vec![router(1, 1, 47.0, 8.0), router(2, 1, 47.1, 8.1), router(3, 2, 46.0, 7.0)],
            vec![link(1, 2, 3), link(2, 3, 2)],
        )
        .unwrap();
        t.validate().unwrap();
        assert_eq!(t.ases().len(), 2);
        assert_eq!(t.routers().len(), 3);
        let internal = t.links().iter().filter(|l| l.kind == LinkKind::Internal).count();
        assert_eq!(internal, 2);
        assert_eq!(t.ases()[0].degree, 1);
        assert_eq!(t.physical_peering_links(), 1);
    }

    #[test]
    fn unknown_router_in_link_is_integrity_error() {
        let err = Topology::assemble(vec![decl(1)], vec![router(1, 1, 0.0, 0.0)], vec![link(1, 1, 99)]).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
    }

    #[test]
    fn routers_of_unknown_as_are_dropped() {
        let t = Topology::assemble(
            vec![decl(1)],
            vec![router(1, 1, 0.0, 0.0), router(2, 7, 0.0, 0.0)],
            vec![link(1, 1, 2)],
        )
        .unwrap();
        assert_eq!(t.routers().len(), 1);
        assert_eq!(t.dropped_routers(), 1);
        assert!(t.links().is_empty());
    }

    #[test]
    fn latency_examples() {
        let p = GeoPoint::new(46.5, 6.6);
        assert_eq!(link_latency(p, p), 0.0);
        // Along the equator, arc length is radius * delta-longitude.
        let deg = |m: f64| (m / EARTH_RADIUS_M).to_degrees();
        let a = GeoPoint::new(0.0, 0.0);
        let lat = link_latency(a, GeoPoint::new(0.0, deg(300_000.0)));
        assert!((lat - 1.0e-3).abs() < 1e-12);
        let lat = link_latency(a, GeoPoint::new(0.0, deg(150_000.0)));
        assert!((lat - 5.0e-4).abs() < 1e-12);
    }

    #[test]
    fn filter_by_degree() {
        // Star-ish: 0 peers with 1,2,3; 1 peers with 2; degrees 0:3 1:2 2:2 3:1
        let decls = (0..4).map(decl).collect();
        let routers = (0..4).map(|i| router(i, i, 0.0, 0.0)).collect();
        let links = vec![link(0, 0, 1), link(1, 0, 2), link(2, 0, 3), link(3, 1, 2)];
        let t = Topology::assemble(decls, routers, links).unwrap();
        let f = t.filter_pipeline(2, true).unwrap();
        let ids: Vec<u32> = f.ases().iter().map(|a| a.as_id.0).collect();
        assert_eq!(ids, vec![0, 1]);
        f.validate().unwrap();
        assert_eq!(f.filter_pipeline(2, true).unwrap(), f);
        assert_eq!(t.filter_pipeline(10, true).unwrap().ases().len(), 4);
        assert!(t.filter_pipeline(0, true).is_err());
    }

    #[test]
    fn degree_ties_keep_lowest_ids() {
        // Triangle: every degree is 2.
        let decls = vec![decl(5), decl(3), decl(9)];
        let routers = vec![router(1, 5, 0.0, 0.0), router(2, 3, 0.0, 0.0), router(3, 9, 0.0, 0.0)];
        let links = vec![link(0, 1, 2), link(1, 2, 3), link(2, 3, 1)];
        let t = Topology::assemble(decls, routers, links).unwrap();
        let f = t.filter_pipeline(2, false).unwrap();
        let ids: Vec<u32> = f.ases().iter().map(|a| a.as_id.0).collect();
        assert_eq!(ids, vec![3, 5]);
    }

    #[test]
    fn capacities_are_seeded_and_bounded() {
        let t = line(6);
        let a = t.randomize_capacities(5e9, 15e9, 7).unwrap();
        let b = t.randomize_capacities(5e9, 15e9, 7).unwrap();
        assert_eq!(a, b);
        for l in a.peering_links() {
            assert!((5e9..=15e9).contains(&l.capacity_bps));
        }
        let fixed = t.randomize_capacities(10e9, 10e9, 1).unwrap();
        assert!(fixed.links().iter().all(|l| l.capacity_bps == 10e9));
        assert!(t.randomize_capacities(0.0, 1.0, 1).is_err());
        assert!(t.randomize_capacities(2.0, 1.0, 1).is_err());
    }

    #[test]
    fn internal_capacity_tracks_max_peering() {
        let t = Topology::assemble(
            vec![decl(1), decl(2)],
            vec![router(1, 1, 0.0, 0.0), router(2, 1, 0.0, 1.0), router(3, 2, 1.0, 0.0)],
            vec![link(1, 1, 3), link(2, 2, 3), link(3, 3, 1)],
        )
        .unwrap()
        .randomize_capacities(5e9, 15e9, 3)
        .unwrap();
        let max_out = t
            .peering_links()
            .filter(|l| l.from == RouterId(1) || l.from == RouterId(2))
            .map(|l| l.capacity_bps)
            .fold(0.0, f64::max);
        for l in t.links().iter().filter(|l| l.kind == LinkKind::Internal) {
            assert_eq!(l.capacity_bps, max_out);
        }
    }

    #[test]
    fn prefixes_are_deterministic_and_contained() {
        let t = line(3).with_prefixes(10).unwrap();
        for (as_id, list) in t.prefix_table() {
            assert_eq!(list.len(), 10);
            assert!(list.iter().all(|p| aggregate_prefix(*as_id).contains(p)));
        }
        assert_eq!(t.with_prefixes(10).unwrap().prefix_table(), t.prefix_table());
        assert_eq!(Prefix::new(0x0A01_0200, 24).to_string(), "10.1.2.0/24");
    }
}
