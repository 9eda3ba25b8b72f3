use backflow_core::backpressure::{BacklogView, PeeringLink, PeeringView};
use backflow_core::controller::{drift_bound, drift_root, max_acceptable_t, DriftBoundParams};
use backflow_core::topology::LinkId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn draws() -> Vec<DriftBoundParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd21f7);
    (0..100)
        .map(|_| {
            let alpha = 10f64.powf(rng.gen_range(-3.0..6.0));
            let beta = rng.gen_range(-1.0..1.0) * 10f64.powf(rng.gen_range(-3.0..6.0));
            DriftBoundParams { alpha, beta }
        })
        .collect()
}

#[test]
fn roots_at_zero_and_two_beta_over_alpha() {
    for p in draws() {
        assert_eq!(drift_bound(0.0, &p), 0.0);
        let r = drift_root(&p);
        let expected = 2.0 * p.beta / p.alpha;
        assert!((r - expected).abs() <= 1e-12 * expected.abs(), "{p:?}");
        // Each term is of size alpha * r^2; the residual must vanish relative to it.
        let scale = p.alpha * r * r;
        let residual = drift_bound(r, &p);
        assert!(residual.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE), "{p:?}: residual {residual}");
    }
}

#[test]
fn max_acceptable_period_meets_the_bound_with_equality() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a11);
    for p in draws() {
        let l_max = 10f64.powf(rng.gen_range(-2.0..8.0));
        let t = max_acceptable_t(&p, l_max).unwrap();
        assert!(t > 0.0);
        let value = drift_bound(t, &p);
        let scale = (p.alpha * t * t).max(l_max);
        assert!((value - l_max).abs() <= 1e-12 * scale, "{p:?} L={l_max}: bound {value}");
        // Any longer period exceeds the bound.
        assert!(drift_bound(t * (1.0 + 1e-6), &p) > l_max);
    }
}

#[test]
fn hand_example() {
    let p = DriftBoundParams { alpha: 2.0, beta: 1.0 };
    assert_eq!(max_acceptable_t(&p, 4.0).unwrap(), 2.0);
    assert_eq!(drift_root(&p), 1.0);
    assert!(max_acceptable_t(&DriftBoundParams { alpha: 0.0, beta: 1.0 }, 4.0).is_err());
    assert!(max_acceptable_t(&p, 0.0).is_err());
}

#[test]
fn coefficients_from_state() {
    // 0 -> 1 at 1 byte/s, 1 -> 0 at 2 bytes/s; one commodity.
    let link = |id: u32, from: usize, to: usize, bps: f64| PeeringLink {
        link_ix: id as usize,
        link_id: LinkId(id),
        from,
        to,
        from_router: from,
        capacity_bps: bps,
    };
    let view = PeeringView::new(2, vec![link(0, 0, 1, 8.0), link(1, 1, 0, 16.0)]);
    let mut u = BacklogView::zeros(2, 1);
    u.set(0, 0, 10);
    u.set(1, 0, 4);
    let p = DriftBoundParams::from_state(&view, &u, &[0.5, 0.0]);
    // out = (1, 2), inflow = (2 + 0.5, 1)
    assert!((p.alpha - (1.0 + 6.25 + 4.0 + 1.0)).abs() < 1e-12);
    assert!((p.beta - (10.0 * (1.0 - 2.5) + 4.0 * (2.0 - 1.0))).abs() < 1e-12);
}
