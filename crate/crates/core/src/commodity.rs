//! Routing destinations: whole ASes or individual prefixes.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::topology::{aggregate_prefix, Prefix, Topology};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum CommodityGranularity {
    /// One commodity per AS, addressed by the AS's aggregate prefix.
    As,
    /// One commodity per hosted prefix.
    Prefix,
}

/// Dense commodity index space with host-AS and prefix lookups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Commodities {
    granularity: CommodityGranularity,
    hosts: Vec<usize>,
    prefixes: Vec<Prefix>,
    by_prefix: BTreeMap<Prefix, usize>,
    per_host: Vec<Vec<usize>>,
}

impl Commodities {
    pub fn as_level(t: &Topology) -> Self {
        let hosts: Vec<usize> = (0..t.ases().len()).collect();
        let prefixes: Vec<Prefix> = t.ases().iter().map(|a| aggregate_prefix(a.as_id)).collect();
        Self::build(CommodityGranularity::As, hosts, prefixes, t.ases().len())
    }

    /// Commodities from the topology's prefix table, AS by AS.
    pub fn prefix_level(t: &Topology) -> Result<Self> {
        let mut hosts = Vec::new();
        let mut prefixes = Vec::new();
        for (i, a) in t.ases().iter().enumerate() {
            let list = t
                .prefix_table()
                .get(&a.as_id)
                .filter(|l| !l.is_empty())
                .ok_or_else(|| Error::Config(alloc::format!("{} hosts no prefixes", a.as_id)))?;
            for p in list {
                hosts.push(i);
                prefixes.push(*p);
            }
        }
        Ok(Self::build(CommodityGranularity::Prefix, hosts, prefixes, t.ases().len()))
    }

    fn build(granularity: CommodityGranularity, hosts: Vec<usize>, prefixes: Vec<Prefix>, n_ases: usize) -> Self {
        let by_prefix = prefixes.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let mut per_host = alloc::vec![Vec::new(); n_ases];
        for (c, &h) in hosts.iter().enumerate() {
            per_host[h].push(c);
        }
        Self { granularity, hosts, prefixes, by_prefix, per_host }
    }

    pub fn granularity(&self) -> CommodityGranularity {
        self.granularity
    }

    pub fn len(&self) -> usize {
        self.hosts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hosts.is_empty()
    }

    /// Commodity index to hosting AS index.
    pub fn hosts(&self) -> &[usize] {
        &self.hosts
    }

    pub fn host(&self, commodity: usize) -> usize {
        self.hosts[commodity]
    }

    pub fn prefix(&self, commodity: usize) -> Prefix {
        self.prefixes[commodity]
    }

    pub fn lookup(&self, prefix: &Prefix) -> Option<usize> {
        self.by_prefix.get(prefix).copied()
    }

    /// Commodities hosted by the AS at `as_ix`.
    pub fn hosted_by(&self, as_ix: usize) -> &[usize] {
        &self.per_host[as_ix]
    }
}
