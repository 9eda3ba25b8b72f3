//! Debug dumps of one run: the rules in force after the last controller tick
//! and the forwarding walks they induce.

use std::collections::BTreeMap;
use std::path::Path;

use backflow_core::commodity::{Commodities, CommodityGranularity};
use backflow_core::engine::{MetricsReport, Simulation};
use backflow_core::policy::{compute_dvr, traverse, Granularity, PolicyState};
use backflow_core::topology::Topology;

use crate::error::{Result, SimError};
use crate::scenario::{commodities_for, engine_config, prepare_topology, traffic_for, RunSpec};

pub const PROPOSALS_FILE: &str = "proposals.csv";
pub const TRAVERSAL_FILE: &str = "traversal.csv";

/// A run with its final rule snapshot.
pub struct DumpedRun {
    pub topology: Topology,
    pub commodities: Commodities,
    pub report: MetricsReport,
}

pub fn run_with_rules(base: &Topology, spec: &RunSpec) -> Result<DumpedRun> {
    let topology = prepare_topology(base, spec)?;
    let commodities = commodities_for(&topology, spec)?;
    let sc = traffic_for(&topology, spec)?;
    let mut cfg = engine_config(spec);
    cfg.record_rules = true;
    let report = Simulation::new(&topology, &commodities, &sc, cfg)?.run()?;
    Ok(DumpedRun { topology, commodities, report })
}

fn commodity_label(run: &DumpedRun, c: usize) -> String {
    match run.commodities.granularity() {
        CommodityGranularity::Prefix => run.commodities.prefix(c).to_string(),
        _ => run.topology.ases()[run.commodities.host(c)].as_id.0.to_string(),
    }
}

/// Write `proposals.csv` and `traversal.csv` into `out`.
pub fn write_dump(out: &Path, run: &DumpedRun) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| SimError::io(out, e))?;
    let asn = |i: usize| run.topology.ases()[i].as_id.0;

    let path = out.join(PROPOSALS_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["owner_as", "commodity", "via_link", "potential_bytes"])?;
    for r in &run.report.final_rules {
        w.write_record([
            asn(r.owner).to_string(),
            commodity_label(run, r.commodity),
            r.link_id.0.to_string(),
            r.potential.to_string(),
        ])?;
    }
    w.flush().map_err(|e| SimError::io(&path, e))?;

    let rules: BTreeMap<(usize, usize), usize> =
        run.report.final_rules.iter().map(|r| ((r.owner, r.commodity), r.neighbor)).collect();
    let dvr = compute_dvr(&run.topology, Granularity::AsLevel);
    let state = PolicyState { dvr: &dvr, rules: &rules, hosts: run.commodities.hosts() };
    let n = run.topology.ases().len();
    let path = out.join(TRAVERSAL_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["origin", "commodity", "visited_sequence", "loop_flag"])?;
    for origin in 0..n {
        for c in 0..run.commodities.len() {
            let tr = traverse(state, origin, c, n + 1);
            let seq: Vec<String> = tr.visited.iter().map(|&v| asn(v).to_string()).collect();
            w.write_record([
                asn(origin).to_string(),
                commodity_label(run, c),
                seq.join(" "),
                u8::from(tr.has_loop()).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| SimError::io(&path, e))?;
    Ok(())
}
