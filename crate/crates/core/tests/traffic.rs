mod common;

use backflow_core::commodity::Commodities;
use backflow_core::traffic::{
    forecast, popularity, GenerationHistory, TrafficGenerator, TrafficMode, TrafficScenario, DEFAULT_BATCH_BYTES,
};
use common::{line_topology, random_topology};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Upper 0.1% chi-square quantiles for 1..=12 degrees of freedom.
const CHI2_999: [f64; 12] = [10.83, 13.82, 16.27, 18.47, 20.52, 22.46, 24.32, 26.12, 27.88, 29.59, 31.26, 32.91];

#[test]
fn batch_size_is_fifty_binary_megabytes() {
    assert_eq!(DEFAULT_BATCH_BYTES, 50 * 1024 * 1024);
}

#[test]
fn popularity_rows_are_stochastic() {
    let pm = popularity(&[1, 4, 2, 7, 3, 3]).unwrap();
    let total: f64 = (0..6).map(|i| pm.p(i)).sum();
    assert!((total - 1.0).abs() < 1e-12);
    for i in 0..6 {
        assert_eq!(pm.pij(i, i), 0.0);
        assert!((pm.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for j in 0..6 {
            if i != j {
                assert!((pm.pij(i, j) - pm.p(j) / (1.0 - pm.p(i))).abs() < 1e-15);
            }
        }
    }
    let uniform = popularity(&[3; 7]).unwrap();
    assert!((uniform.pij(0, 6) - 1.0 / 6.0).abs() < 1e-12);
    assert!(popularity(&[2, 0]).is_err());
    assert!(popularity(&[]).is_err());
}

#[test]
fn zero_load_generates_nothing() {
    let t = line_topology(3, 2, 100.0, 10e9);
    let c = Commodities::as_level(&t);
    let pm = popularity(&[1, 2, 1]).unwrap();
    let mut g = TrafficGenerator::new(&t, &c, &pm, &TrafficScenario::linear(0.0, 1)).unwrap();
    assert!(g.generate(0.0, 3600.0).is_empty());
}

#[test]
fn invalid_scenarios_are_rejected() {
    let t = line_topology(3, 1, 100.0, 10e9);
    let c = Commodities::as_level(&t);
    let pm = popularity(&[1, 2, 1]).unwrap();
    let mut sc = TrafficScenario::linear(-1.0, 1);
    assert!(TrafficGenerator::new(&t, &c, &pm, &sc).is_err());
    sc.mean_router_load = 1e9;
    sc.batch_bytes = 0;
    assert!(TrafficGenerator::new(&t, &c, &pm, &sc).is_err());
    let sc = TrafficScenario { mode: TrafficMode::Skewed(3), ..TrafficScenario::linear(1e9, 1) };
    assert!(TrafficGenerator::new(&t, &c, &pm, &sc).is_err());
}

#[test]
fn destinations_follow_popularity() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let t = random_topology(&mut rng, 7, 6);
    let c = Commodities::as_level(&t);
    let degrees: Vec<usize> = t.ases().iter().map(|a| a.degree).collect();
    let pm = popularity(&degrees).unwrap();
    let n = degrees.len();
    for entry in [0, n / 2, n - 1] {
        let sc = TrafficScenario { mode: TrafficMode::Skewed(entry), ..TrafficScenario::linear(1e9, 99 + entry as u64) };
        let mut g = TrafficGenerator::new(&t, &c, &pm, &sc).unwrap();
        let mut counts = vec![0u64; n];
        let mut total = 0u64;
        let mut start = 0.0;
        while total < 100_000 {
            for b in g.generate(start, start + 100.0) {
                assert_eq!(b.source_as, entry);
                assert_eq!(t.router_as_index(b.source_router), entry);
                counts[b.commodity] += 1;
                total += 1;
            }
            start += 100.0;
        }
        assert_eq!(counts[entry], 0);
        let mut chi2 = 0.0;
        for j in (0..n).filter(|&j| j != entry) {
            let expected = pm.pij(entry, j) * total as f64;
            let share = counts[j] as f64 / total as f64;
            assert!((share - pm.pij(entry, j)).abs() < 0.02, "entry {entry} dest {j}: {share} vs {}", pm.pij(entry, j));
            chi2 += (counts[j] as f64 - expected).powi(2) / expected;
        }
        assert!(chi2 < CHI2_999[n - 2 - 1], "chi-square {chi2} for entry {entry}");
    }
}

#[test]
fn routers_of_one_as_see_the_same_arrival_law() {
    let t = line_topology(3, 4, 100.0, 10e9);
    let c = Commodities::as_level(&t);
    let pm = popularity(&[1, 2, 1]).unwrap();
    let mut g = TrafficGenerator::new(&t, &c, &pm, &TrafficScenario::linear(1e9, 5)).unwrap();
    let mut per_router = vec![0f64; 12];
    for b in g.generate(0.0, 600.0) {
        per_router[b.source_router] += 1.0;
    }
    let mean = per_router.iter().sum::<f64>() / 12.0;
    let chi2: f64 = per_router.iter().map(|c| (c - mean).powi(2) / mean).sum();
    assert!(chi2 < CHI2_999[10], "chi-square {chi2}");
}

#[test]
fn aggregate_rate_matches_target_load() {
    let t = line_topology(5, 3, 100.0, 10e9);
    let c = Commodities::as_level(&t);
    let pm = popularity(&[1, 2, 2, 2, 1]).unwrap();
    for (load, seed) in [(1e9, 1), (3e8, 2), (4e9, 3)] {
        let mut g = TrafficGenerator::new(&t, &c, &pm, &TrafficScenario::linear(load, seed)).unwrap();
        let mut bytes = 0u64;
        let mut start = 0.0;
        while start < 600.0 {
            bytes += g.generate(start, start + 10.0).iter().map(|b| b.size).sum::<u64>();
            start += 10.0;
        }
        let rate = bytes as f64 / 600.0;
        let target = load * 15.0;
        assert!((rate / target - 1.0).abs() < 0.05, "load {load}: {rate} vs {target}");
    }
}

#[test]
fn generation_is_deterministic() {
    let t = line_topology(4, 2, 100.0, 10e9);
    let c = Commodities::as_level(&t);
    let pm = popularity(&[1, 2, 2, 1]).unwrap();
    let sc = TrafficScenario::linear(2e9, 42);
    let mut a = TrafficGenerator::new(&t, &c, &pm, &sc).unwrap();
    let mut b = TrafficGenerator::new(&t, &c, &pm, &sc).unwrap();
    for w in 0..20 {
        let (s, e) = (w as f64 * 10.0, (w + 1) as f64 * 10.0);
        let (x, y) = (a.generate(s, e), b.generate(s, e));
        assert_eq!(x, y);
        assert!(x.iter().all(|b| b.created_at >= s && b.created_at < e));
        assert!(x.windows(2).all(|p| p[0].created_at <= p[1].created_at));
    }
    let mut other = TrafficGenerator::new(&t, &c, &pm, &TrafficScenario::linear(2e9, 43)).unwrap();
    let mut again = TrafficGenerator::new(&t, &c, &pm, &sc).unwrap();
    assert_ne!(other.generate(0.0, 10.0), again.generate(0.0, 10.0));
}

#[test]
fn forecast_of_empty_history_is_zero() {
    let g = forecast(&GenerationHistory::new(3), 4, 10.0);
    assert!(g.values().iter().all(|&v| v == 0.0));
    assert_eq!(g.values().len(), 12);
}

#[test]
fn forecast_of_constant_rate_is_rate_times_window() {
    let r = 125.0;
    let period = 10.0;
    let mut h = GenerationHistory::new(2);
    for k in 0..6 {
        let s = k as f64 * period;
        h.push(s, s + period, vec![(r * period) as u64, 0, 0, (2.0 * r * period) as u64]);
    }
    let g = forecast(&h, 2, period);
    assert_eq!(g.get(0, 0), r * period);
    assert_eq!(g.get(0, 1), 0.0);
    assert_eq!(g.get(1, 1), 2.0 * r * period);
}

#[test]
fn forecast_lags_a_doubling_rate_by_one_window() {
    let period = 10.0;
    let mut h = GenerationHistory::new(1);
    let mut generated = 100u64;
    for k in 0..5 {
        let s = k as f64 * period;
        h.push(s, s + period, vec![generated]);
        let g = forecast(&h, 1, period);
        let next = generated * 2;
        assert_eq!(g.get(0, 0), generated as f64);
        assert_eq!(next as f64 / g.get(0, 0), 2.0);
        generated = next;
    }
}
