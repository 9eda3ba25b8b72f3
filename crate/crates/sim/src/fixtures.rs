//! Deterministic synthetic topologies.
//!
//! `europe25` is a 25-AS cluster laid out over European cities: a ring-plus-
//! chords core of ten well-connected ASes and fifteen edge ASes attached to
//! three core ASes each. It has 66 AS relations, 351 routers and 273
//! physical peering links; several AS pairs are joined by parallel links.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};
use crate::formats::{self, AS_FILE, LINK_FILE, NODE_FILE, REL_FILE};
use backflow_core::topology::Topology;

/// (city, country, latitude, longitude)
const CITIES: [(&str, &str, f64, f64); 25] = [
    ("zurich", "CH", 47.3769, 8.5417),
    ("frankfurt", "DE", 50.1109, 8.6821),
    ("amsterdam", "NL", 52.3676, 4.9041),
    ("london", "GB", 51.5074, -0.1278),
    ("paris", "FR", 48.8566, 2.3522),
    ("milan", "IT", 45.4642, 9.1900),
    ("vienna", "AT", 48.2082, 16.3738),
    ("madrid", "ES", 40.4168, -3.7038),
    ("stockholm", "SE", 59.3293, 18.0686),
    ("warsaw", "PL", 52.2297, 21.0122),
    ("brussels", "BE", 50.8503, 4.3517),
    ("copenhagen", "DK", 55.6761, 12.5683),
    ("prague", "CZ", 50.0755, 14.4378),
    ("lisbon", "PT", 38.7223, -9.1393),
    ("dublin", "IE", 53.3498, -6.2603),
    ("oslo", "NO", 59.9139, 10.7522),
    ("helsinki", "FI", 60.1699, 24.9384),
    ("budapest", "HU", 47.4979, 19.0402),
    ("athens", "GR", 37.9838, 23.7275),
    ("bucharest", "RO", 44.4268, 26.1025),
    ("sofia", "BG", 42.6977, 23.3219),
    ("zagreb", "HR", 45.8150, 15.9819),
    ("ljubljana", "SI", 46.0569, 14.5058),
    ("luxembourg", "LU", 49.6116, 6.1319),
    ("tallinn", "EE", 59.4370, 24.7536),
];

/// First private AS number.
pub const FIRST_ASN: u32 = 64512;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixtureFiles {
    pub nodes: String,
    pub links: String,
    pub ases: String,
    pub relationships: String,
}

/// Names of the built-in fixtures.
pub const BUILTIN: [&str; 2] = ["tiny", "europe25"];

pub fn builtin(name: &str) -> Option<FixtureFiles> {
    match name {
        "tiny" => Some(tiny()),
        "europe25" => Some(europe25()),
        _ => None,
    }
}

impl FixtureFiles {
    pub fn load(&self, label: &str) -> Result<Topology> {
        formats::parse_topology(label, &self.nodes, &self.links, &self.ases, Some(&self.relationships))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
        for (name, body) in [(NODE_FILE, &self.nodes), (LINK_FILE, &self.links), (AS_FILE, &self.ases), (REL_FILE, &self.relationships)] {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| SimError::io(&p, e))?;
        }
        Ok(())
    }
}

/// Two ASes, three routers, one peering pair.
pub fn tiny() -> FixtureFiles {
    FixtureFiles {
        nodes: "# router_id,lat,lon\n1,47.3769,8.5417\n2,47.0502,8.3093\n3,50.1109,8.6821\n".into(),
        links: "# link_id,from_router,to_router[,capacity_bps]\n1,1,3,10000000000\n2,3,1,10000000000\n".into(),
        ases: "# router_id,as_id,as_name,country\n1,64512,alpine,CH\n2,64512,alpine,CH\n3,64513,rhein,DE\n".into(),
        relationships: "# as1|as2|rel\n64512|64513|0\n".into(),
    }
}

const N_AS: usize = 25;
const N_CORE: usize = 10;
const N_RELATIONS: usize = 66;
const N_ROUTERS: usize = 351;
const N_PEERING: usize = 273;

pub fn europe25() -> FixtureFiles {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6575_726f_7065_3235);

    // AS relations: core ring plus chords, then edge ASes on the least
    // attached core members.
    let mut rel: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 0..N_CORE {
        rel.insert(ordered(i, (i + 1) % N_CORE));
    }
    let mut chords: Vec<(usize, usize)> = (0..N_CORE)
        .flat_map(|a| (a + 2..N_CORE).map(move |b| (a, b)))
        .filter(|&(a, b)| !(a == 0 && b == N_CORE - 1))
        .collect();
    chords.shuffle(&mut rng);
    for c in chords.into_iter().take(10) {
        rel.insert(c);
    }
    let mut attached = [0usize; N_CORE];
    for e in N_CORE..N_AS {
        let mut order: Vec<usize> = (0..N_CORE).collect();
        order.shuffle(&mut rng);
        order.sort_by_key(|&c| attached[c]);
        for &c in &order[..3] {
            attached[c] += 1;
            rel.insert(ordered(c, e));
        }
    }
    rel.insert(ordered(N_CORE, N_CORE + 1));
    assert_eq!(rel.len(), N_RELATIONS);

    // Routers per AS, summing to the target.
    let mut per_as: Vec<usize> = (0..N_AS).map(|_| rng.gen_range(11..=17)).collect();
    while per_as.iter().sum::<usize>() != N_ROUTERS {
        let i = rng.gen_range(0..N_AS);
        let total: usize = per_as.iter().sum();
        if total < N_ROUTERS && per_as[i] < 20 {
            per_as[i] += 1;
        } else if total > N_ROUTERS && per_as[i] > 8 {
            per_as[i] -= 1;
        }
    }

    let mut nodes = String::from("# router_id,lat,lon\n");
    let mut ases = String::from("# router_id,as_id,as_name,country\n");
    let mut routers_of: Vec<Vec<u32>> = vec![Vec::new(); N_AS];
    let mut next_router = 1u32;
    for (a, &count) in per_as.iter().enumerate() {
        let (city, country, lat, lon) = CITIES[a];
        for k in 0..count {
            // Most routers sit around the home city, some in a nearby hub.
            let (la, lo) = if k % 4 == 3 {
                let (_, _, hl, hn) = CITIES[(a + 1 + k % 3) % CITIES.len()];
                (hl, hn)
            } else {
                (lat, lon)
            };
            let jl = la + rng.gen_range(-0.3..0.3);
            let jn = lo + rng.gen_range(-0.3..0.3);
            nodes.push_str(&format!("{next_router},{jl:.4},{jn:.4}\n"));
            ases.push_str(&format!("{next_router},{},{}-net,{}\n", FIRST_ASN + a as u32, city, country));
            routers_of[a].push(next_router);
            next_router += 1;
        }
    }

    // Physical links: every relation gets one, the rest are spread with
    // core-core relations capped at three.
    let rel_list: Vec<(usize, usize)> = rel.iter().copied().collect();
    let mut count: Vec<usize> = vec![1; rel_list.len()];
    let mut extra = N_PEERING - rel_list.len();
    while extra > 0 {
        let i = rng.gen_range(0..rel_list.len());
        let (a, b) = rel_list[i];
        let cap = if a < N_CORE && b < N_CORE { 3 } else { 6 };
        if count[i] < cap {
            count[i] += 1;
            extra -= 1;
        }
    }
    let mut links = String::from("# link_id,from_router,to_router[,capacity_bps]\n");
    let mut pairs: BTreeSet<(u32, u32)> = BTreeSet::new();
    let mut next_link = 1u32;
    for (i, &(a, b)) in rel_list.iter().enumerate() {
        for _ in 0..count[i] {
            let (ra, rb) = loop {
                let ra = *routers_of[a].choose(&mut rng).expect("routers");
                let rb = *routers_of[b].choose(&mut rng).expect("routers");
                if pairs.insert((ra, rb)) {
                    break (ra, rb);
                }
            };
            links.push_str(&format!("{},{},{}\n", next_link, ra, rb));
            links.push_str(&format!("{},{},{}\n", next_link + 1, rb, ra));
            next_link += 2;
        }
    }

    let mut relationships = String::from("# as1|as2|rel\n");
    for &(a, b) in &rel_list {
        relationships.push_str(&format!("{}|{}|0\n", FIRST_ASN + a as u32, FIRST_ASN + b as u32));
    }
    FixtureFiles { nodes, links, ases, relationships }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Write every built-in fixture into `out/<name>/`.
pub fn write_builtin(out: &Path) -> Result<()> {
    for name in BUILTIN {
        builtin(name).expect("listed fixture").write(&out.join(name))?;
    }
    Ok(())
}
