use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::topology::LinkId;

/// One period of queue dynamics: `max(0, u - o) + i + g`.
pub fn queue_update(u: u64, o: u64, i: u64, g: u64) -> u64 {
    u.saturating_sub(o) + i + g
}

/// Time average of aggregate backlog samples.
pub fn stability_metric(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("stability needs at least one sample".into()));
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Two-sided 95% Student t quantile for 19 degrees of freedom.
pub const T_95_DF19: f64 = 2.093;

/// Two-sided 95% Student t quantiles for 1..=30 degrees of freedom.
const T_95: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
    2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
];

/// Two-sided 95% t quantile; normal approximation beyond 30 degrees of freedom.
pub fn t_quantile_95(dof: usize) -> f64 {
    match dof {
        0 => f64::INFINITY,
        d if d <= 30 => T_95[d - 1],
        _ => 1.960,
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct MeanCi {
    pub mean: f64,
    /// Half-width of the 95% confidence interval.
    pub half_width: f64,
}

/// Mean and 95% half-width of independent observations.
pub fn mean_ci(values: &[f64]) -> MeanCi {
    let n = values.len();
    if n == 0 {
        return MeanCi::default();
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanCi { mean, half_width: f64::INFINITY };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    MeanCi { mean, half_width: t_quantile_95(n - 1) * libm::sqrt(var / n as f64) }
}

/// A rule in force after the last controller tick.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleRecord {
    /// AS index of the rule owner.
    pub owner: usize,
    pub commodity: usize,
    pub link_id: LinkId,
    /// AS index at the far end of the link.
    pub neighbor: usize,
    /// Backlog differential at derivation time, bytes.
    pub potential: u64,
}

/// Per-run results.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    /// Bytes carried across all links per second of simulated time.
    pub throughput: f64,
    /// Bytes dropped at full router memory per second.
    pub overflow: f64,
    pub mean_batch_latency_s: f64,
    pub delivered_batches: u64,
    /// Fraction of peering ingress volume received by each AS.
    pub per_as_share: Vec<f64>,
    pub control_overhead_bytes: u64,
    pub report_bytes: u64,
    pub rule_bytes: u64,
    pub controller_ticks: u64,
    /// Time average of the aggregate backlog, bytes.
    pub stability_avg_backlog: f64,
    pub throughput_ci: f64,
    pub overflow_ci: f64,
    pub latency_ci: f64,
    pub generated_bytes: u64,
    pub delivered_bytes: u64,
    pub ttl_drops: u64,
    pub unroutable_drops: u64,
    pub rules_installed: u64,
    pub partial_stitches: u64,
    pub ordering_violations: u64,
    pub conservation_violations: u64,
    pub queue_audit_violations: u64,
    pub queue_audit_checks: u64,
    pub events: u64,
    pub trace_digest: u64,
    /// Filled when rule recording is enabled.
    pub final_rules: Vec<RuleRecord>,
}

/// Accumulates per-segment sums for batch-means confidence intervals.
#[derive(Clone, Debug)]
pub(crate) struct SegmentStats {
    width: f64,
    pub transmitted: Vec<f64>,
    pub overflow: Vec<f64>,
    pub latency_sum: Vec<f64>,
    pub latency_n: Vec<u64>,
}

impl SegmentStats {
    pub fn new(duration: f64, segments: usize) -> Self {
        let s = segments.max(1);
        Self {
            width: duration / s as f64,
            transmitted: alloc::vec![0.0; s],
            overflow: alloc::vec![0.0; s],
            latency_sum: alloc::vec![0.0; s],
            latency_n: alloc::vec![0; s],
        }
    }

    pub fn index(&self, t: f64) -> usize {
        ((t / self.width) as usize).min(self.transmitted.len() - 1)
    }

    pub fn rate_ci(&self, sums: &[f64]) -> f64 {
        let per_s: Vec<f64> = sums.iter().map(|s| s / self.width).collect();
        mean_ci(&per_s).half_width
    }

    pub fn latency_ci(&self) -> f64 {
        let means: Vec<f64> = self
            .latency_sum
            .iter()
            .zip(&self.latency_n)
            .filter(|(_, &n)| n > 0)
            .map(|(s, &n)| s / n as f64)
            .collect();
        mean_ci(&means).half_width
    }
}
