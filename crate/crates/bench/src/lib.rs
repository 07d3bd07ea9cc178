//! Fixtures shared by the benchmarks.

use lqm_core::io::builders::{self, CorridorOptions, IntersectionOptions};
use lqm_core::{LinkId, NodeStepProblem, Scenario};

/// The 32-link intersection with `steps` steps at 10 s.
pub fn intersection(steps: usize) -> Scenario {
    builders::intersection(&IntersectionOptions {
        horizon: steps,
        ..IntersectionOptions::default()
    })
}

/// The three-intersection corridor with `steps` steps at 10 s.
pub fn corridor(steps: usize) -> Scenario {
    builders::corridor(&CorridorOptions {
        horizon: steps,
        ..CorridorOptions::default()
    })
}

/// Four feeders onto four exits, each feeder split evenly over three of
/// them, with supply tight enough that every feeder is constrained.
pub fn congested_node() -> NodeStepProblem {
    let rates = (0..4)
        .map(|j| (0..4).map(|i| if i == j { 0.0 } else { 1.0 / 3.0 }).collect())
        .collect();
    NodeStepProblem {
        incoming: (1..=4).map(LinkId).collect(),
        outgoing: (11..=14).map(LinkId).collect(),
        supply: vec![6.0, 9.0, 4.0, 12.0],
        demand: vec![10.0, 8.0, 12.0, 7.0],
        rates,
    }
}
