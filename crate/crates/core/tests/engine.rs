mod common;

use backflow_core::commodity::Commodities;
use backflow_core::controller::{Algorithm, Selection, Stitching};
use backflow_core::engine::{self, queue_update, stability_metric, EngineConfig, Simulation};
use backflow_core::traffic::{Batch, TrafficScenario, DEFAULT_BATCH_BYTES};
use common::{line_topology, random_topology};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn batch(id: u64, router: usize, commodity: usize, at: f64) -> Batch {
    Batch { id, size: DEFAULT_BATCH_BYTES, source_router: router, source_as: 0, commodity, created_at: at }
}

#[test]
fn queue_update_examples() {
    assert_eq!(queue_update(0, 0, 0, 0), 0);
    assert_eq!(queue_update(5, 7, 2, 1), 3);
    assert_eq!(queue_update(5, 3, 2, 1), 5);
}

#[test]
fn stability_examples() {
    assert_eq!(stability_metric(&[0.0, 10.0, 20.0]).unwrap(), 10.0);
    assert_eq!(stability_metric(&[7.5; 9]).unwrap(), 7.5);
    assert!(stability_metric(&[]).is_err());
}

#[test]
fn single_batch_store_and_forward_time() {
    // Three single-router ASes, 150 km apart: two 10 Gbps hops, 1 ms of propagation.
    let t = line_topology(3, 1, 150.0, 10e9);
    let c = Commodities::as_level(&t);
    let cfg = EngineConfig::new(Algorithm::DvrOnly, 10.0, 1.0);
    let sim = Simulation::new(&t, &c, &TrafficScenario::linear(0.0, 1), cfg).unwrap();
    let r = sim.with_scripted_traffic(vec![batch(0, 0, 2, 0.5)]).unwrap().run().unwrap();
    assert_eq!(r.delivered_batches, 1);
    let expected = 2.0 * (50.0 * 1048576.0 * 8.0 / 10e9) + 1e-3;
    assert!((r.mean_batch_latency_s - expected).abs() < 1e-9, "{} vs {expected}", r.mean_batch_latency_s);
    assert!((r.mean_batch_latency_s - 0.0849).abs() < 5e-5);
    assert_eq!(r.throughput, 2.0 * DEFAULT_BATCH_BYTES as f64 / 10.0);
    assert_eq!(r.overflow, 0.0);
    assert_eq!(r.generated_bytes, r.delivered_bytes);
}

#[test]
fn internal_hop_precedes_the_peering_link() {
    // Source router 2 of AS 0 has no peering link; it crosses the AS mesh first.
    let t = line_topology(2, 2, 150.0, 10e9);
    let c = Commodities::as_level(&t);
    let cfg = EngineConfig::new(Algorithm::DvrOnly, 10.0, 1.0);
    let sim = Simulation::new(&t, &c, &TrafficScenario::linear(0.0, 1), cfg).unwrap();
    let r = sim.with_scripted_traffic(vec![batch(0, 1, 1, 0.0)]).unwrap().run().unwrap();
    assert_eq!(r.delivered_batches, 1);
    // Co-located routers: zero internal propagation, 0.5 ms across the peering link.
    let expected = 2.0 * (50.0 * 1048576.0 * 8.0 / 10e9) + 0.5e-3;
    assert!((r.mean_batch_latency_s - expected).abs() < 1e-9);
}

#[test]
fn back_to_back_batches_pipeline_through_the_twin_buffer() {
    let t = line_topology(3, 1, 150.0, 10e9);
    let c = Commodities::as_level(&t);
    let cfg = EngineConfig::new(Algorithm::DvrOnly, 10.0, 1.0);
    let sim = Simulation::new(&t, &c, &TrafficScenario::linear(0.0, 1), cfg).unwrap();
    let r = sim.with_scripted_traffic(vec![batch(0, 0, 2, 0.0), batch(1, 0, 2, 0.0)]).unwrap().run().unwrap();
    let tx = 50.0 * 1048576.0 * 8.0 / 10e9;
    // The second batch waits one serialization at the first hop only.
    let expected = ((2.0 * tx + 1e-3) + (3.0 * tx + 1e-3)) / 2.0;
    assert_eq!(r.delivered_batches, 2);
    assert!((r.mean_batch_latency_s - expected).abs() < 1e-9);
}

#[test]
fn zero_traffic_gives_zero_metrics() {
    let t = line_topology(4, 2, 200.0, 10e9);
    let c = Commodities::as_level(&t);
    for alg in Algorithm::ALL {
        let r = engine::run(&t, &c, &TrafficScenario::linear(0.0, 3), &EngineConfig::new(alg, 100.0, 10.0)).unwrap();
        assert_eq!(r.throughput, 0.0, "{}", alg.name());
        assert_eq!(r.overflow, 0.0);
        assert_eq!(r.delivered_batches, 0);
        assert_eq!(r.mean_batch_latency_s, 0.0);
        assert_eq!(r.stability_avg_backlog, 0.0);
    }
}

#[test]
fn invalid_configuration_is_rejected_before_running() {
    let t = line_topology(3, 1, 100.0, 10e9);
    let c = Commodities::as_level(&t);
    let sc = TrafficScenario::linear(1e9, 1);
    let short = EngineConfig::new(Algorithm::DvrOnly, 5.0, 10.0);
    assert!(engine::run(&t, &c, &sc, &short).is_err());
    let mut cfg = EngineConfig::new(Algorithm::DvrOnly, 100.0, 10.0);
    cfg.period_s = 0.0;
    assert!(engine::run(&t, &c, &sc, &cfg).is_err());
    let mut cfg = EngineConfig::new(Algorithm::DvrOnly, 100.0, 10.0);
    cfg.rule_queue_batches = 0;
    assert!(engine::run(&t, &c, &sc, &cfg).is_err());
    let sim = Simulation::new(&t, &c, &sc, EngineConfig::new(Algorithm::DvrOnly, 100.0, 10.0)).unwrap();
    assert!(sim.with_scripted_traffic(vec![batch(0, 7, 0, 0.0)]).is_err());
}

#[test]
fn identical_inputs_give_identical_reports() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = random_topology(&mut rng, 6, 4);
    let c = Commodities::as_level(&t);
    let sc = TrafficScenario::linear(2e9, 11);
    for alg in [Algorithm::DvrOnly, Algorithm::bp(Selection::Foresight, Stitching::Nhops)] {
        let cfg = EngineConfig::new(alg, 300.0, 10.0);
        let a = engine::run(&t, &c, &sc, &cfg).unwrap();
        let b = engine::run(&t, &c, &sc, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.events > 0);
    }
    let other = engine::run(&t, &c, &TrafficScenario::linear(2e9, 12), &EngineConfig::new(Algorithm::DvrOnly, 300.0, 10.0)).unwrap();
    let base = engine::run(&t, &c, &sc, &EngineConfig::new(Algorithm::DvrOnly, 300.0, 10.0)).unwrap();
    assert_ne!(other.trace_digest, base.trace_digest);
}

#[test]
fn audits_hold_under_heavy_load_for_every_algorithm() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let t = random_topology(&mut rng, 7, 5);
    let c = Commodities::as_level(&t);
    // Far above link capacity so that memory overflows.
    let sc = TrafficScenario::linear(6e9, 4);
    for alg in Algorithm::ALL {
        let r = engine::run(&t, &c, &sc, &EngineConfig::new(alg, 300.0, 10.0)).unwrap();
        assert!(r.queue_audit_checks > 0);
        assert_eq!(r.queue_audit_violations, 0, "{}", alg.name());
        assert_eq!(r.conservation_violations, 0, "{}", alg.name());
        assert_eq!(r.ordering_violations, 0, "{}", alg.name());
        assert!(r.overflow > 0.0, "{}", alg.name());
        assert!(r.throughput > 0.0);
        let share: f64 = r.per_as_share.iter().sum();
        assert!((share - 1.0).abs() < 1e-6);
        assert!(r.per_as_share.iter().all(|&s| s >= 0.0));
    }
}

#[test]
fn dvr_baseline_sends_no_control_traffic() {
    let t = line_topology(4, 2, 200.0, 10e9);
    let c = Commodities::as_level(&t);
    let sc = TrafficScenario::linear(5e8, 1);
    let r = engine::run(&t, &c, &sc, &EngineConfig::new(Algorithm::DvrOnly, 100.0, 10.0)).unwrap();
    assert_eq!(r.control_overhead_bytes, 0);
    assert_eq!(r.controller_ticks, 0);
    assert_eq!(r.rules_installed, 0);
    let bp = engine::run(&t, &c, &sc, &EngineConfig::new(Algorithm::bp(Selection::Standard, Stitching::Nhops), 100.0, 10.0)).unwrap();
    assert_eq!(bp.controller_ticks, 10);
    assert!(bp.control_overhead_bytes > 0);
}
