//! Executing plans and writing their results.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use backflow_core::controller::Algorithm;
use backflow_core::engine::{mean_ci, MetricsReport};
use backflow_core::topology::{AsId, Topology};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SimError};
use crate::plan::{ExperimentPlan, Job};
use crate::scenario::run_spec;

pub const METRICS_FILE: &str = "metrics.csv";
pub const SHARES_FILE: &str = "shares.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Result of one run.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub job: Job,
    pub outcome: std::result::Result<RunOutput, String>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    /// AS ids of the run's topology, in index order.
    pub as_ids: Vec<AsId>,
    pub report: MetricsReport,
}

impl RunRecord {
    pub fn output(&self) -> Option<&RunOutput> {
        self.outcome.as_ref().ok()
    }
}

fn run_one(base: &Topology, job: &Job) -> RunRecord {
    let outcome = run_spec(base, &job.spec)
        .map(|(t, report)| RunOutput { as_ids: t.ases().iter().map(|a| a.as_id).collect(), report })
        .map_err(|e| e.to_string());
    if let Err(e) = &outcome {
        log::warn!("run {} failed: {e}", job.run_id);
    }
    RunRecord { job: job.clone(), outcome }
}

/// Run jobs on `workers` threads; records come back in job order.
pub fn run_jobs(base: &Topology, jobs: &[Job], workers: usize) -> Result<Vec<RunRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SimError::Config(format!("cannot start workers: {e}")))?;
    Ok(pool.install(|| jobs.par_iter().map(|j| run_one(base, j)).collect()))
}

#[derive(Debug, Serialize)]
struct MetricsRow<'a> {
    run_id: &'a str,
    algorithm: &'a str,
    stitch: &'a str,
    #[serde(rename = "T_s")]
    t_s: f64,
    load_bps: f64,
    n_ases: usize,
    n_prefixes: usize,
    seed: u64,
    throughput_bps: f64,
    overflow_bps: f64,
    mean_latency_s: f64,
    overhead_bytes: u64,
    stability_avg_backlog: f64,
}

#[derive(Debug, Serialize)]
struct ShareRow<'a> {
    run_id: &'a str,
    as_id: u32,
    dvr_share: f64,
    bpr_share: f64,
}

/// Mean, extremes and 95% half-width of one metric.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub ci95: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let m = mean_ci(values);
        Self {
            mean: m.mean,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ci95: if values.len() > 1 { m.half_width } else { 0.0 },
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct PointSummary {
    pub point: String,
    pub algorithm: String,
    pub runs: usize,
    pub throughput_bps: Stat,
    pub overflow_bps: Stat,
    pub mean_latency_s: Stat,
    pub overhead_bytes: Stat,
    pub stability_avg_backlog: Stat,
    /// Throughput relative to dvr_only at the same point and seed, when
    /// the plan contains the baseline.
    pub throughput_gain: Option<Stat>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub run_id: String,
    pub error: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct PlanSummary {
    pub plan: String,
    pub sweep: String,
    pub topology: String,
    pub runs: usize,
    pub failures: Vec<Failure>,
    pub points: Vec<PointSummary>,
}

/// The baseline run matching a job, keyed by (point, seed).
fn baselines(records: &[RunRecord]) -> BTreeMap<(usize, u64), &RunOutput> {
    records
        .iter()
        .filter(|r| r.job.spec.algorithm == Algorithm::DvrOnly)
        .filter_map(|r| r.output().map(|o| ((r.job.point, r.job.spec.seed), o)))
        .collect()
}

pub fn summarize(plan: &ExperimentPlan, records: &[RunRecord]) -> PlanSummary {
    let base = baselines(records);
    let mut groups: BTreeMap<(usize, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let alg_ix = plan.algorithms.iter().position(|a| *a == r.job.spec.algorithm).unwrap_or(usize::MAX);
        groups.entry((r.job.point, alg_ix)).or_default().push(r);
    }
    let points = groups
        .into_values()
        .filter_map(|rs| {
            let ok: Vec<(&RunRecord, &RunOutput)> = rs.iter().filter_map(|r| r.output().map(|o| (*r, o))).collect();
            let first = rs[0];
            if ok.is_empty() {
                return None;
            }
            let stat = |f: &dyn Fn(&MetricsReport) -> f64| Stat::of(&ok.iter().map(|(_, o)| f(&o.report)).collect::<Vec<_>>());
            let gains: Vec<f64> = ok
                .iter()
                .filter_map(|(r, o)| {
                    let b = base.get(&(r.job.point, r.job.spec.seed))?;
                    (b.report.throughput > 0.0).then(|| o.report.throughput / b.report.throughput - 1.0)
                })
                .collect();
            Some(PointSummary {
                point: first.job.point_label.clone(),
                algorithm: first.job.spec.algorithm.name().to_string(),
                runs: ok.len(),
                throughput_bps: stat(&|m| m.throughput),
                overflow_bps: stat(&|m| m.overflow),
                mean_latency_s: stat(&|m| m.mean_batch_latency_s),
                overhead_bytes: stat(&|m| m.control_overhead_bytes as f64),
                stability_avg_backlog: stat(&|m| m.stability_avg_backlog),
                throughput_gain: (!gains.is_empty()).then(|| Stat::of(&gains)),
            })
        })
        .collect();
    PlanSummary {
        plan: plan.name.clone(),
        sweep: plan.sweep.name().to_string(),
        topology: plan.topology.label(),
        runs: records.len(),
        failures: records
            .iter()
            .filter_map(|r| r.outcome.as_ref().err().map(|e| Failure { run_id: r.job.run_id.clone(), error: e.clone() }))
            .collect(),
        points,
    }
}

/// Write `metrics.csv`, `shares.csv` and `summary.json` into `out`.
pub fn write_outputs(out: &Path, plan: &ExperimentPlan, records: &[RunRecord]) -> Result<PlanSummary> {
    fs::create_dir_all(out).map_err(|e| SimError::io(out, e))?;

    let path = out.join(METRICS_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    for r in records {
        let Some(o) = r.output() else { continue };
        let s = &r.job.spec;
        w.serialize(MetricsRow {
            run_id: &r.job.run_id,
            algorithm: s.algorithm.base_name(),
            stitch: s.algorithm.stitch_name(),
            t_s: s.period_s,
            load_bps: s.load,
            n_ases: o.as_ids.len(),
            n_prefixes: s.n_prefixes,
            seed: s.seed,
            throughput_bps: o.report.throughput,
            overflow_bps: o.report.overflow,
            mean_latency_s: o.report.mean_batch_latency_s,
            overhead_bytes: o.report.control_overhead_bytes,
            stability_avg_backlog: o.report.stability_avg_backlog,
        })?;
    }
    w.flush().map_err(|e| SimError::io(&path, e))?;

    let path = out.join(SHARES_FILE);
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&path)?;
    w.write_record(["run_id", "as_id", "dvr_share", "bpr_share"])?;
    let base = baselines(records);
    for r in records.iter().filter(|r| r.job.spec.algorithm != Algorithm::DvrOnly) {
        let (Some(o), Some(b)) = (r.output(), base.get(&(r.job.point, r.job.spec.seed))) else { continue };
        for (i, as_id) in o.as_ids.iter().enumerate() {
            let j = b.as_ids.iter().position(|x| x == as_id);
            w.serialize(ShareRow {
                run_id: &r.job.run_id,
                as_id: as_id.0,
                dvr_share: j.map_or(0.0, |j| b.report.per_as_share[j]),
                bpr_share: o.report.per_as_share[i],
            })?;
        }
    }
    w.flush().map_err(|e| SimError::io(&path, e))?;

    let summary = summarize(plan, records);
    let path = out.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(&path, text + "\n").map_err(|e| SimError::io(&path, e))?;
    Ok(summary)
}

/// Load the topology, run every job of the plan and write the outputs.
pub fn run_plan(plan: &ExperimentPlan, out: &Path, workers: usize) -> Result<PlanSummary> {
    plan.validate()?;
    let base = plan.topology.load()?;
    let jobs = plan.jobs(&base)?;
    log::info!("plan {}: {} runs on {} workers", plan.name, jobs.len(), workers);
    let records = run_jobs(&base, &jobs, workers)?;
    write_outputs(out, plan, &records)
}
