mod common;

use common::*;
use jsfs_core::{Segment, SizeHistory};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integrated_rate_is_monotone(h in finite_history(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let total = h.total_duration();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(h.integrated_rate(lo * total).unwrap() <= h.integrated_rate(hi * total).unwrap());
    }

    #[test]
    fn integrated_rate_matches_quadrature(h in finite_history(), u in 0.0f64..1.0) {
        let t = u * h.total_duration();
        let want = piecewise_quad(&h, t, |x| h.rate_at(x).unwrap(), 1e-13);
        prop_assert!(rel_err(h.integrated_rate(t).unwrap(), want) < 1e-9);
    }

    #[test]
    fn inverse_integrated_rate_round_trips(h in infinite_history(), r in 0.0f64..20.0) {
        let t = h.inverse_integrated_rate(r).unwrap();
        prop_assert!(rel_err(h.integrated_rate(t).unwrap(), r) < 1e-10 || (h.integrated_rate(t).unwrap() - r).abs() < 1e-12);
    }

    #[test]
    fn first_coalescence_matches_quadrature(h in finite_history(), m in 2usize..12, u in 0.01f64..1.0) {
        let tau = u * h.total_duration();
        let pairs = (m * (m - 1) / 2) as f64;
        let want = piecewise_quad(&h, tau, |x| (-pairs * h.integrated_rate(x).unwrap()).exp(), 1e-14);
        let got = h.first_coalescence_time(m, tau).unwrap();
        prop_assert!(rel_err(got, want) < 1e-9, "{} vs {}", got, want);
    }

    #[test]
    fn first_coalescence_is_monotone(h in finite_history(), m in 2usize..30, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let total = h.total_duration();
        let (lo, hi) = if a < b { (a * total, b * total) } else { (b * total, a * total) };
        let c_lo = h.first_coalescence_time(m, lo).unwrap();
        let c_hi = h.first_coalescence_time(m, hi).unwrap();
        // quadrature over different intervals may differ in the last ulps
        prop_assert!(c_lo <= c_hi * (1.0 + 1e-14));
        prop_assert!(c_hi <= hi * (1.0 + 1e-14));
        prop_assert!(h.first_coalescence_time(m + 1, hi).unwrap() <= c_hi * (1.0 + 1e-14));
    }

    #[test]
    fn zero_growth_is_constant(d in 0.05f64..3.0, rate in 0.2f64..5.0, m in 2usize..40, u in 0.0f64..1.0) {
        let e = SizeHistory::new(vec![Segment::exponential(d, rate, 0.0).unwrap()]).unwrap();
        let c = SizeHistory::new(vec![Segment::constant(d, rate).unwrap()]).unwrap();
        let tau = u * d;
        prop_assert!(rel_err(e.first_coalescence_time(m, tau).unwrap(), c.first_coalescence_time(m, tau).unwrap()) <= 1e-13);
        prop_assert!(rel_err(e.integrated_rate(tau).unwrap(), c.integrated_rate(tau).unwrap()) <= 1e-13);
    }

    #[test]
    fn tiny_growth_is_nearly_constant(d in 0.05f64..3.0, rate in 0.2f64..5.0, m in 2usize..40) {
        let e = SizeHistory::new(vec![Segment::exponential(d, rate, 1e-12).unwrap()]).unwrap();
        let c = SizeHistory::new(vec![Segment::constant(d, rate).unwrap()]).unwrap();
        prop_assert!(rel_err(e.first_coalescence_time(m, d).unwrap(), c.first_coalescence_time(m, d).unwrap()) <= 1e-9);
    }
}

#[test]
fn exponential_rate_is_anchored_at_recent_end() {
    let h = SizeHistory::exponential(2.0, 3.0, 0.5).unwrap();
    assert_eq!(h.rate_at(0.0).unwrap(), 3.0);
    assert!(rel_err(h.rate_at(2.0).unwrap(), 3.0 * 1f64.exp()) < 1e-15);
    assert!(rel_err(h.integrated_rate(2.0).unwrap(), 6.0 * (1f64.exp() - 1.0)) < 1e-15);
}

#[test]
fn infinite_tail_first_coalescence() {
    // α(u) = e^u on [0, ∞): c_2 = ∫ exp(-(e^t - 1)) dt = e·E1(1)
    let h = SizeHistory::exponential(f64::INFINITY, 1.0, 1.0).unwrap();
    let got = h.first_coalescence_time(2, f64::INFINITY).unwrap();
    assert!(rel_err(got, 0.596_347_362_323_194_1) < 1e-12);
}
