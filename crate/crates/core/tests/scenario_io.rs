use std::collections::BTreeMap;

use lqm_core::io::builders::{self, BUILTIN_NAMES};
use lqm_core::io::{load_scenario, parse_scenario, save_scenario};
use lqm_core::network::{build_segment, validate_report, BuiltSegment, Movement, SegmentSpec};
use lqm_core::verify::property_cfl;
use lqm_core::{run, LinkId, NodeId, QueueBranch, StepSeries, TraceSet};
use proptest::prelude::*;

const TOKENS: [&str; 6] = ["L", "T", "R", "LT", "TR", "LTR"];

fn segment_spec(lanes: &[usize], length: f64, turn_length: f64, shares: [f64; 3]) -> SegmentSpec {
    let config: Vec<&str> = lanes.iter().map(|i| TOKENS[*i]).collect();
    let mut distinct: Vec<usize> = lanes.to_vec();
    distinct.dedup();
    distinct.sort_unstable();
    distinct.dedup();
    let total: f64 = shares.iter().sum();
    let served = |m: char| config.iter().any(|t| t.contains(m));
    let shares: BTreeMap<Movement, f64> = [(Movement::Left, 'L'), (Movement::Through, 'T'), (Movement::Right, 'R')]
        .into_iter()
        .zip(shares)
        .filter(|((_, c), _)| served(*c))
        .map(|((m, _), s)| (m, s / total))
        .collect();
    let norm: f64 = shares.values().sum();
    SegmentSpec {
        label: None,
        common_id: LinkId(50),
        node_id: NodeId(9),
        length,
        turn_length,
        lanes: config.join("|"),
        turn_ids: (1..=distinct.len() as u32).map(LinkId).collect(),
        shares: shares.into_iter().map(|(m, s)| (m, s / norm)).collect(),
        common_speed: StepSeries::constant(11.0),
        turn_speeds: [Movement::Left, Movement::Through, Movement::Right]
            .into_iter()
            .map(|m| (m, StepSeries::constant(5.0)))
            .collect(),
        jam_density: 0.1,
        backward_wave_speed: 20.0 / 3.6,
        bay_length: None,
        bay_node_id: None,
        bay_ids: Vec::new(),
    }
}

/// Lengths of every path from the common link to a terminal link.
fn path_lengths(b: &BuiltSegment) -> Vec<f64> {
    fn walk(b: &BuiltSegment, link: LinkId, acc: f64, out: &mut Vec<f64>) {
        let here = acc + b.links.iter().find(|l| l.id == link).unwrap().length;
        match b.nodes.iter().find(|n| n.incoming.contains(&link)) {
            Some(node) => node.outgoing.iter().for_each(|next| walk(b, *next, here, out)),
            None => out.push(here),
        }
    }
    let mut out = Vec::new();
    walk(b, b.segment.common_link, 0.0, &mut out);
    out
}

proptest! {
    #[test]
    fn segments_preserve_length_and_flow(
        lanes in prop::collection::vec(0usize..TOKENS.len(), 1..5),
        length in 150.0f64..1000.0,
        turn in 20.0f64..140.0,
        shares in prop::array::uniform3(0.05f64..1.0),
    ) {
        let spec = segment_spec(&lanes, length, turn, shares);
        let b = build_segment(&spec).unwrap();
        for p in path_lengths(&b) {
            prop_assert!((p - length).abs() < 1e-9, "path {} of {}", p, length);
        }
        let node = b.segment.divider_node.as_ref().unwrap();
        let out: f64 = node.outgoing.iter().map(|l| node.rate(spec.common_id, *l)).sum();
        prop_assert!((out - 1.0).abs() < 1e-9);
        // each movement's flow ends up on the terminal links in full
        for (m, share) in &spec.shares {
            let carried: f64 = b
                .terminal_for(*m)
                .iter()
                .map(|(l, r)| node.rate(spec.common_id, *l) * r)
                .sum();
            prop_assert!((carried - share).abs() < 1e-9, "{:?}: {} vs {}", m, carried, share);
        }
        for t in &b.segment.terminals {
            let sum: f64 = t.movements.iter().map(|s| s.rate).sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn builtins_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for name in BUILTIN_NAMES {
        let s = builders::builtin(name).unwrap();
        let path = dir.path().join(format!("{name}.json"));
        save_scenario(&s, &path).unwrap();
        assert_eq!(load_scenario(&path).unwrap(), s, "{name}");
    }
}

#[test]
fn traces_round_trip_through_files() {
    let s = builders::builtin("single-link").unwrap();
    let trace = run(&s).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    trace.write(&path).unwrap();
    let back = TraceSet::load(&path).unwrap();
    assert_eq!(back, trace.rounded());
}

#[test]
fn validation_is_pure_and_deterministic() {
    let mut s = builders::paper_intersection();
    s.links.retain(|l| l.id != LinkId(20));
    let before = s.clone();
    let a = validate_report(&s);
    let b = validate_report(&s);
    assert_eq!(a, b);
    assert_eq!(s, before);
    assert!(!a.is_valid());
    assert!(a.violations.iter().any(|v| v.to_string().contains("20")), "{:?}", a.violations);
}

#[test]
fn segment_files_expand_on_load() {
    let text = r#"{
        "dt": "10 s",
        "horizon": 5,
        "segments": [{
            "common_id": 50, "node_id": 9, "length": "0.6 km", "turn_length": "100 m",
            "lanes": "L|T|TR", "turn_ids": [1, 2, 3],
            "shares": {"L": 0.2, "T": 0.6, "R": 0.2},
            "common_speed": "40 km/h", "turn_speeds": {"L": 4, "T": 11, "R": 4},
            "jam_density": "100 veh/km", "backward_wave_speed": "20 km/h"
        }]
    }"#;
    let s = parse_scenario(text, std::path::Path::new("mem.json")).unwrap();
    assert_eq!(s.road_links().count(), 4);
    assert_eq!(s.link(LinkId(50)).unwrap().length, 500.0);
}

#[test]
fn short_links_fall_back_to_the_time_varying_update() {
    let r = property_cfl(&builders::paper_intersection()).unwrap();
    assert!(r.checked > 0);
    assert!(r.entries.iter().any(|e| e.link == LinkId(2)), "{:?}", &r.entries[..r.entries.len().min(5)]);
    assert!(r.entries.iter().all(|e| e.branch == QueueBranch::TimeVarying));
    assert!(r.misrouted().is_empty());
}

#[test]
fn ten_second_demand_smoothed_over_five_samples_gives_fifty_second_plateaus() {
    let mut s = builders::builtin("single-link").unwrap();
    let rates: Vec<f64> = (0..20).map(|i| 0.02 * f64::from(i % 7)).collect();
    s.demand.profiles[0].rates = rates.clone();
    s.demand.profiles[0].interval = Some(10.0);
    s.demand.smooth_window = 5;
    let series = s.demand_series(s.demand.profiles[0].origin);
    for (block, chunk) in series[..20].chunks(5).enumerate() {
        let expected = rates[block * 5..block * 5 + 5].iter().sum::<f64>() / 5.0;
        assert!(chunk.iter().all(|v| (v - expected).abs() < 1e-15), "block {block}: {chunk:?}");
    }
}

proptest! {
    #[test]
    fn epsilon_is_symmetric_and_scale_covariant(
        pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..200),
        a in -20.0f64..20.0,
    ) {
        use lqm_core::io::epsilon;
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let e = epsilon(&x, &y).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert_eq!(e, epsilon(&y, &x).unwrap());
        let ax: Vec<f64> = x.iter().map(|v| a * v).collect();
        let ay: Vec<f64> = y.iter().map(|v| a * v).collect();
        prop_assert!((epsilon(&ax, &ay).unwrap() - a.abs() * e).abs() <= 1e-9 * (1.0 + a.abs() * e));
    }
}
