//! Seeded generators shared by the integration tests.
#![allow(dead_code)]

use lqm_core::io::builders::{single_link, SingleLinkOptions};
use lqm_core::{LinkId, NodeStepProblem, Scenario, StepSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Node with up to three feeders and three outgoing links. Each feeder
/// routes to a random non-empty subset of the outgoing links; about one in
/// ten outgoing links is a sink with unlimited supply.
pub fn node_problem(r: &mut impl Rng) -> NodeStepProblem {
    let n_in = r.gen_range(1..=3);
    let n_out = r.gen_range(1..=3);
    let mut rates = Vec::with_capacity(n_in);
    for _ in 0..n_in {
        let mut row: Vec<f64> = (0..n_out)
            .map(|_| if r.gen_bool(0.6) { r.gen_range(0.05..1.0) } else { 0.0 })
            .collect();
        if row.iter().all(|e| *e == 0.0) {
            row[r.gen_range(0..n_out)] = 1.0;
        }
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|e| *e /= sum);
        rates.push(row);
    }
    NodeStepProblem {
        incoming: (1..=n_in as u32).map(LinkId).collect(),
        outgoing: (10..10 + n_out as u32).map(LinkId).collect(),
        supply: (0..n_out)
            .map(|_| if r.gen_bool(0.1) { f64::INFINITY } else { r.gen_range(0.0..40.0) })
            .collect(),
        demand: (0..n_in).map(|_| r.gen_range(0.0..30.0)).collect(),
        rates,
    }
}

/// Single-link case: whole vehicles entering during a step and whole-vehicle
/// discharge budgets per step.
pub struct LinkCase {
    pub scenario: Scenario,
    /// Vehicles entering during each step.
    pub arrivals: Vec<usize>,
    pub budgets: Vec<f64>,
}

pub const HORIZON: usize = 200;
pub const DT: f64 = 10.0;

/// Link geometry of the intersection benchmark: common link, left/right
/// turn link, through turn link.
pub const TABLE_LINKS: [(f64, f64); 3] = [(500.0, 11.0), (100.0, 4.0), (100.0, 11.0)];

/// Random arrivals (at most one vehicle per step) and budgets of 0 to 2
/// vehicles per step on one of the benchmark link types.
pub fn link_case(r: &mut impl Rng) -> LinkCase {
    let (length, speed) = TABLE_LINKS[r.gen_range(0..TABLE_LINKS.len())];
    link_case_with(r, length, StepSeries::constant(speed))
}

/// Like [`link_case`] but with a slowdown and a recovery at random steps.
pub fn link_case_time_varying(r: &mut impl Rng) -> LinkCase {
    let (length, base) = TABLE_LINKS[r.gen_range(0..TABLE_LINKS.len())];
    let a = r.gen_range(20..120);
    let b = r.gen_range(a + 5..190);
    let low = r.gen_range(2.0..base);
    let high = r.gen_range(low..=base);
    link_case_with(r, length, StepSeries::piecewise(&[(0, base), (a, low), (b, high)]))
}

fn link_case_with(r: &mut impl Rng, length: f64, speed: StepSeries) -> LinkCase {
    let p = r.gen_range(0.1..0.6);
    let arrivals: Vec<usize> = (0..HORIZON).map(|_| usize::from(r.gen_bool(p))).collect();
    let budgets: Vec<f64> = (0..HORIZON).map(|_| r.gen_range(0..=2) as f64).collect();
    let scenario = single_link(&SingleLinkOptions {
        dt: DT,
        horizon: HORIZON,
        length,
        speed,
        demand: arrivals.iter().map(|n| *n as f64 / DT).collect(),
        saturation_flow: Some(StepSeries::from_steps(budgets.iter().map(|b| b / DT).collect())),
    });
    LinkCase {
        scenario,
        arrivals,
        budgets,
    }
}

/// Entry time of every vehicle: the middle of the step it enters in. The
/// engine spreads a step's inflow over the whole step, so mid-step is the
/// placement that is neither early nor late on average.
pub fn entry_times(arrivals: &[usize]) -> Vec<f64> {
    arrivals
        .iter()
        .enumerate()
        .flat_map(|(k, n)| std::iter::repeat((k as f64 + 0.5) * DT).take(*n))
        .collect()
}

/// Largest deviations between the engine and the vehicle-level reference on
/// one case. `n_qu_ahead` is how far the engine's queue curve runs ahead of
/// the reference, `n_qu_behind` how far it lags.
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleDiff {
    pub n_in: f64,
    pub n_out: f64,
    pub n_qu_ahead: f64,
    pub n_qu_behind: f64,
}

impl OracleDiff {
    pub fn worst(&self) -> f64 {
        self.n_in.max(self.n_out).max(self.n_qu_ahead).max(self.n_qu_behind)
    }
}

/// Runs the engine and the reference on a case. Returns `None` when the
/// reference queue comes close to filling the link: there the engine's
/// inflow limit takes over and the reference, which has no storage bound,
/// stops being a model of the same thing.
pub fn oracle_diff(case: &LinkCase) -> Option<OracleDiff> {
    use lqm_core::io::builders::single_link_ids;
    use lqm_core::verify::oracle_single_link;

    let params = case.scenario.link(lqm_core::LinkId(single_link_ids::LINK)).unwrap().clone();
    let reference = oracle_single_link(&entry_times(&case.arrivals), &params, &case.budgets, DT, HORIZON);
    let crowded = reference.queue_length.iter().any(|l| *l > 0.75 * params.length)
        || reference
            .cum_in
            .iter()
            .zip(&reference.cum_out)
            .any(|(i, o)| i - o > 0.6 * params.jam_density * params.length);
    if crowded {
        return None;
    }

    let mut sim = lqm_core::Simulation::new(&case.scenario).unwrap();
    sim.run_to_end().unwrap();
    let state = sim.into_state();
    let rec = state.record(lqm_core::LinkId(single_link_ids::LINK)).unwrap();
    let mut d = OracleDiff::default();
    for k in 0..=HORIZON {
        d.n_in = d.n_in.max((rec.cum_in[k] - reference.cum_in[k]).abs());
        d.n_out = d.n_out.max((rec.cum_out[k] - reference.cum_out[k]).abs());
        d.n_qu_ahead = d.n_qu_ahead.max(rec.cum_queue[k] - reference.cum_queue[k]);
        d.n_qu_behind = d.n_qu_behind.max(reference.cum_queue[k] - rec.cum_queue[k]);
    }
    Some(d)
}
