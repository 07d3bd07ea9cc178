use lqm_core::link::{
    desired_outflow, fd_point, fixed_lookback, inflow_limit, max_lookback, queue_density, queue_inflow_fixed,
    queue_inflow_tvfs, queue_lengths, travel_distance_table,
};
use lqm_core::StepSeries;
use proptest::prelude::*;

const JAM: f64 = 0.1;
const W: f64 = 20.0 / 3.6;
const DT: f64 = 10.0;

/// Nondecreasing cumulative curve starting at zero.
fn cumulative(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..3.0, len).prop_map(|inc| {
        let mut acc = 0.0;
        std::iter::once(0.0)
            .chain(inc.into_iter().map(|d| {
                acc += d;
                acc
            }))
            .collect()
    })
}

proptest! {
    #[test]
    fn queue_density_is_bounded_and_decreasing(v in 2.0f64..20.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let fd = fd_point(JAM, W, v);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let r_lo = queue_density(fd, JAM, lo);
        let r_hi = queue_density(fd, JAM, hi);
        prop_assert!(r_hi <= r_lo + 1e-15);
        for r in [r_lo, r_hi] {
            prop_assert!(r >= fd.critical_density - 1e-15 && r <= JAM + 1e-15);
        }
        // capacity point lies on both branches
        prop_assert!((fd.critical_flow - v * fd.critical_density).abs() < 1e-12);
        prop_assert!((fd.critical_flow - W * (JAM - fd.critical_density)).abs() < 1e-12);
    }

    #[test]
    fn queue_and_free_lengths_partition_the_link(queued in 0.0f64..200.0, rho in 0.01f64..0.1, length in 10.0f64..1000.0) {
        let (lq, lf) = queue_lengths(queued, rho, length);
        prop_assert!((0.0..=length).contains(&lq));
        prop_assert!((lq + lf - length).abs() < 1e-9);
    }

    #[test]
    fn fixed_lookback_fraction_in_unit_interval(lf in 0.1f64..2000.0, v in 1.0f64..20.0) {
        let (n, gamma) = fixed_lookback(lf, v, DT);
        prop_assert!(n >= 1);
        prop_assert!((0.0..1.0).contains(&gamma));
        prop_assert!(((n as f64 - gamma) - lf / v / DT).abs() < 1e-9);
    }

    #[test]
    fn fixed_update_matches_time_varying_on_whole_step_distances(
        cum in cumulative(60), m in 2usize..8, v in 3u32..15, k in 20usize..60,
    ) {
        // integer speeds keep the distance sums exact at the tie
        let v = f64::from(v);
        let lf = m as f64 * v * DT;
        let speed = StepSeries::constant(v);
        let table = travel_distance_table(&speed, max_lookback(lf + 50.0, v, DT), DT, k);
        let fixed = queue_inflow_fixed(&cum, lf, v, DT, k).unwrap();
        prop_assert!((fixed - queue_inflow_tvfs(&cum, &table, lf)).abs() < 1e-9);
    }

    #[test]
    fn queue_arrivals_shrink_with_free_length(
        cum in cumulative(60), k in 1usize..60, speeds in prop::collection::vec(2.0f64..15.0, 60), a in 0.0f64..500.0, b in 0.0f64..500.0,
    ) {
        let speed = StepSeries::from_steps(speeds);
        let table = travel_distance_table(&speed, max_lookback(500.0, speed.min(), DT), DT, k);
        let (short, long) = if a < b { (a, b) } else { (b, a) };
        let at_short = queue_inflow_tvfs(&cum, &table, short);
        let at_long = queue_inflow_tvfs(&cum, &table, long);
        prop_assert!(at_long <= at_short + 1e-12);
        prop_assert!(at_short <= cum[k] + 1e-12);
        prop_assert!(desired_outflow(&cum, &table, 500.0) <= at_short + 1e-12 || short > 500.0);
    }

    #[test]
    fn desired_outflow_is_nondecreasing_in_time(cum in cumulative(80), speeds in prop::collection::vec(2.0f64..15.0, 80)) {
        let speed = StepSeries::from_steps(speeds);
        let lookback = max_lookback(300.0, speed.min(), DT);
        let mut prev = 0.0;
        for k in 0..80 {
            let d = desired_outflow(&cum, &travel_distance_table(&speed, lookback, DT, k), 300.0);
            prop_assert!(d + 1e-12 >= prev, "step {}: {} < {}", k, d, prev);
            prop_assert!(d <= cum[k] + 1e-12);
            prev = d;
        }
    }

    #[test]
    fn travel_distances_decrease_along_the_window(speeds in prop::collection::vec(0.5f64..15.0, 40), k in 0usize..40) {
        let speed = StepSeries::from_steps(speeds);
        let table = travel_distance_table(&speed, 12, DT, k);
        prop_assert_eq!(table.distances.len(), k.min(12) + 1);
        for w in table.distances.windows(2) {
            prop_assert!(w[0] > w[1]);
        }
        prop_assert!((table.distances.last().unwrap() - speed.at(k) * DT).abs() < 1e-9);
    }

    #[test]
    fn inflow_limit_never_negative_rate(
        out in cumulative(30), lq in 0.0f64..100.0, rho in 0.03f64..0.1, k in 0usize..30,
    ) {
        let cum_in: Vec<f64> = out.iter().map(|o| o + 2.0).collect();
        let (limit, rate) = inflow_limit(&cum_in, &out, lq, 100.0 - lq, rho, JAM, W, DT, k);
        prop_assert!(rate >= 0.0);
        prop_assert!(limit.is_finite());
    }
}
