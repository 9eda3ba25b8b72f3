//! Line-oriented topology files.
//!
//! * node file: `router_id,lat,lon`
//! * link file: `link_id,from_router,to_router[,capacity_bps]`, one directed link per line
//! * AS file: `router_id,as_id,as_name,country`
//! * optional relationship file in CAIDA `as1|as2|rel` form, where `0` marks
//!   a peer-to-peer relation and `-1` a provider-to-customer one
//!
//! Lines starting with `#` and blank lines are ignored. Identifiers may carry
//! a conventional prefix (`N`/`R` for routers, `L` for links, `AS` for ASes).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use backflow_core::topology::{
    AsDecl, AsId, GeoPoint, Link, LinkId, LinkKind, Router, RouterId, Topology, DEFAULT_CAPACITY_BPS, DEFAULT_MEMORY_BYTES,
};

use crate::error::{Result, SimError};

pub const NODE_FILE: &str = "nodes.csv";
pub const LINK_FILE: &str = "links.csv";
pub const AS_FILE: &str = "ases.csv";
pub const REL_FILE: &str = "as-rel.txt";

struct Lines<'a> {
    path: &'a Path,
    text: String,
}

impl<'a> Lines<'a> {
    fn read(path: &'a Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Ok(Self { path, text })
    }

    fn from_text(path: &'a Path, text: &str) -> Self {
        Self { path, text: text.to_string() }
    }

    fn records(&self) -> impl Iterator<Item = (usize, &str)> {
        self.text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> SimError {
        SimError::Parse { file: self.path.to_path_buf(), line, msg: msg.into() }
    }
}

fn parse_id(field: &str, prefixes: &[&str]) -> Option<u32> {
    let mut s = field.trim();
    for p in prefixes {
        if let Some(rest) = s.strip_prefix(p) {
            s = rest;
            break;
        }
    }
    s.parse().ok()
}

fn fields<'s>(lines: &Lines<'_>, line: usize, text: &'s str, sep: char, min: usize, max: usize) -> Result<Vec<&'s str>> {
    let f: Vec<&str> = text.split(sep).map(str::trim).collect();
    if f.len() < min || f.len() > max {
        let want = if min == max { format!("{min}") } else { format!("{min} to {max}") };
        return Err(lines.err(line, format!("expected {want} fields, found {}", f.len())));
    }
    Ok(f)
}

pub fn read_nodes(path: &Path) -> Result<Vec<(RouterId, GeoPoint)>> {
    parse_nodes(&Lines::read(path)?)
}

fn parse_nodes(lines: &Lines<'_>) -> Result<Vec<(RouterId, GeoPoint)>> {
    let mut out = Vec::new();
    for (n, text) in lines.records() {
        let f = fields(lines, n, text, ',', 3, 3)?;
        let id = parse_id(f[0], &["N", "R"]).ok_or_else(|| lines.err(n, format!("bad router id {:?}", f[0])))?;
        let lat: f64 = f[1].parse().map_err(|_| lines.err(n, format!("bad latitude {:?}", f[1])))?;
        let lon: f64 = f[2].parse().map_err(|_| lines.err(n, format!("bad longitude {:?}", f[2])))?;
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(lines.err(n, format!("coordinates ({lat}, {lon}) out of range")));
        }
        out.push((RouterId(id), GeoPoint::new(lat, lon)));
    }
    Ok(out)
}

/// Directed links; `None` capacity when the column is absent or empty.
pub fn read_links(path: &Path) -> Result<Vec<(LinkId, RouterId, RouterId, Option<f64>)>> {
    parse_links(&Lines::read(path)?)
}

fn parse_links(lines: &Lines<'_>) -> Result<Vec<(LinkId, RouterId, RouterId, Option<f64>)>> {
    let mut out = Vec::new();
    for (n, text) in lines.records() {
        let f = fields(lines, n, text, ',', 3, 4)?;
        let id = parse_id(f[0], &["L"]).ok_or_else(|| lines.err(n, format!("bad link id {:?}", f[0])))?;
        let from = parse_id(f[1], &["N", "R"]).ok_or_else(|| lines.err(n, format!("bad router id {:?}", f[1])))?;
        let to = parse_id(f[2], &["N", "R"]).ok_or_else(|| lines.err(n, format!("bad router id {:?}", f[2])))?;
        let cap = match f.get(3) {
            None | Some(&"") => None,
            Some(c) => {
                let v: f64 = c.parse().map_err(|_| lines.err(n, format!("bad capacity {c:?}")))?;
                if !(v > 0.0) {
                    return Err(lines.err(n, format!("capacity must be positive, got {v}")));
                }
                Some(v)
            }
        };
        out.push((LinkId(id), RouterId(from), RouterId(to), cap));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsAssignment {
    pub router: RouterId,
    pub as_id: AsId,
    pub name: String,
    pub country: String,
}

pub fn read_as_assignments(path: &Path) -> Result<Vec<AsAssignment>> {
    parse_as_assignments(&Lines::read(path)?)
}

fn parse_as_assignments(lines: &Lines<'_>) -> Result<Vec<AsAssignment>> {
    let mut out = Vec::new();
    for (n, text) in lines.records() {
        let f = fields(lines, n, text, ',', 4, 4)?;
        let router = parse_id(f[0], &["N", "R"]).ok_or_else(|| lines.err(n, format!("bad router id {:?}", f[0])))?;
        let as_id = parse_id(f[1], &["AS"]).ok_or_else(|| lines.err(n, format!("bad AS id {:?}", f[1])))?;
        if f[3].len() != 2 {
            return Err(lines.err(n, format!("country must be a 2-letter code, got {:?}", f[3])));
        }
        out.push(AsAssignment { router: RouterId(router), as_id: AsId(as_id), name: f[2].to_string(), country: f[3].to_string() });
    }
    Ok(out)
}

/// Unordered AS pairs with a peer-to-peer relation, and the set of all
/// pairs that have any declared relation.
pub fn read_relationships(path: &Path) -> Result<(BTreeSet<(AsId, AsId)>, BTreeSet<(AsId, AsId)>)> {
    parse_relationships(&Lines::read(path)?)
}

fn parse_relationships(lines: &Lines<'_>) -> Result<(BTreeSet<(AsId, AsId)>, BTreeSet<(AsId, AsId)>)> {
    let mut p2p = BTreeSet::new();
    let mut any = BTreeSet::new();
    for (n, text) in lines.records() {
        let f = fields(lines, n, text, '|', 3, 4)?;
        let a = parse_id(f[0], &["AS"]).ok_or_else(|| lines.err(n, format!("bad AS id {:?}", f[0])))?;
        let b = parse_id(f[1], &["AS"]).ok_or_else(|| lines.err(n, format!("bad AS id {:?}", f[1])))?;
        let key = pair(AsId(a), AsId(b));
        match f[2] {
            "0" => {
                p2p.insert(key);
            }
            "-1" | "1" => {}
            other => return Err(lines.err(n, format!("unknown relationship {other:?}"))),
        }
        any.insert(key);
    }
    Ok((p2p, any))
}

fn pair(a: AsId, b: AsId) -> (AsId, AsId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Paths of one topology file set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopologyFiles {
    pub nodes: PathBuf,
    pub links: PathBuf,
    pub ases: PathBuf,
    pub relationships: Option<PathBuf>,
}

impl TopologyFiles {
    /// Standard file names inside `dir`; the relationship file is used when
    /// present.
    pub fn in_dir(dir: &Path) -> Self {
        let rel = dir.join(REL_FILE);
        Self {
            nodes: dir.join(NODE_FILE),
            links: dir.join(LINK_FILE),
            ases: dir.join(AS_FILE),
            relationships: rel.exists().then_some(rel),
        }
    }
}

pub fn load_topology(files: &TopologyFiles) -> Result<Topology> {
    let nodes = read_nodes(&files.nodes)?;
    let links = read_links(&files.links)?;
    let assignments = read_as_assignments(&files.ases)?;
    let rels = files.relationships.as_deref().map(read_relationships).transpose()?;
    assemble(nodes, links, assignments, rels)
}

/// Parse a topology held in memory; `label` names it in diagnostics.
pub fn parse_topology(label: &str, nodes: &str, links: &str, ases: &str, relationships: Option<&str>) -> Result<Topology> {
    let base = Path::new(label);
    let (n, l, a, r) = (base.join(NODE_FILE), base.join(LINK_FILE), base.join(AS_FILE), base.join(REL_FILE));
    let nodes = parse_nodes(&Lines::from_text(&n, nodes))?;
    let links = parse_links(&Lines::from_text(&l, links))?;
    let assignments = parse_as_assignments(&Lines::from_text(&a, ases))?;
    let rels = relationships.map(|text| parse_relationships(&Lines::from_text(&r, text))).transpose()?;
    assemble(nodes, links, assignments, rels)
}

type Relations = (BTreeSet<(AsId, AsId)>, BTreeSet<(AsId, AsId)>);

fn assemble(
    nodes: Vec<(RouterId, GeoPoint)>,
    links: Vec<(LinkId, RouterId, RouterId, Option<f64>)>,
    assignments: Vec<AsAssignment>,
    rels: Option<Relations>,
) -> Result<Topology> {

    let mut decls: BTreeMap<AsId, AsDecl> = BTreeMap::new();
    let mut router_as: BTreeMap<RouterId, AsId> = BTreeMap::new();
    for a in &assignments {
        decls.entry(a.as_id).or_insert_with(|| AsDecl { as_id: a.as_id, name: a.name.clone(), country: a.country.clone() });
        router_as.insert(a.router, a.as_id);
    }
    // Routers without an assignment get an undeclared AS and are dropped.
    let orphan = AsId(u32::MAX);
    let routers = nodes
        .into_iter()
        .map(|(id, location)| Router {
            id,
            as_id: router_as.get(&id).copied().unwrap_or(orphan),
            location,
            memory_capacity: DEFAULT_MEMORY_BYTES,
        })
        .collect();
    let links = links
        .into_iter()
        .map(|(id, from, to, cap)| {
            let kind = match (&rels, router_as.get(&from), router_as.get(&to)) {
                (Some((p2p, any)), Some(&a), Some(&b)) if a != b => {
                    let key = pair(a, b);
                    if p2p.contains(&key) || !any.contains(&key) {
                        LinkKind::Peering
                    } else {
                        LinkKind::External
                    }
                }
                _ => LinkKind::Peering,
            };
            Link { id, from, to, capacity_bps: cap.unwrap_or(DEFAULT_CAPACITY_BPS), latency_s: 0.0, kind }
        })
        .collect();
    Ok(Topology::assemble(decls.into_values().collect(), routers, links)?)
}

pub fn load_topology_dir(dir: &Path) -> Result<Topology> {
    load_topology(&TopologyFiles::in_dir(dir))
}

/// Serialize the declared parts of a topology (routers, AS assignment and
/// inter-AS links) in the loader's formats.
pub fn render_topology(t: &Topology, with_capacity: bool) -> (String, String, String) {
    let mut nodes = String::from("# router_id,lat,lon\n");
    let mut ases = String::from("# router_id,as_id,as_name,country\n");
    for r in t.routers() {
        let _ = writeln!(nodes, "{},{:.4},{:.4}", r.id.0, r.location.lat, r.location.lon);
        let a = &t.ases()[t.as_index(r.as_id).expect("router AS")];
        let _ = writeln!(ases, "{},{},{},{}", r.id.0, a.as_id.0, a.name, a.country);
    }
    let mut links = String::from("# link_id,from_router,to_router[,capacity_bps]\n");
    for l in t.links().iter().filter(|l| l.kind != LinkKind::Internal) {
        if with_capacity {
            let _ = writeln!(links, "{},{},{},{}", l.id.0, l.from.0, l.to.0, l.capacity_bps);
        } else {
            let _ = writeln!(links, "{},{},{}", l.id.0, l.from.0, l.to.0);
        }
    }
    (nodes, links, ases)
}
