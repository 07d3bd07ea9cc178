//! Network loading loop.
//!
//! Each step reads a frozen snapshot of every link's history up to step `k`,
//! computes per-link queue state and flow bounds, solves every node, and
//! only then commits `N_in(k+1)` and `N_out(k+1)` for all links. Links and
//! nodes within a step are independent, so both phases can run in parallel
//! and produce the same bits as the serial path.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::EngineError;
use crate::io::trace::{TraceRow, TraceSet};
use crate::link::{
    inflow_limit, max_lookback, outflow_bounds, queue_density, queue_inflow_fixed, queue_inflow_tvfs,
    queue_lengths, travel_distance_table,
};
use crate::network::{validate_report, LinkId, LinkKind, LinkParams, LinkRecord, NodeId, Scenario};
use crate::node::{allocate, NodeStepProblem, NodeStepSolution};
use crate::series::StepSeries;

/// Slack for floating-point checks on vehicle counts.
pub const COUNT_TOLERANCE: f64 = 1e-9;
/// Slack for the network-wide vehicle balance.
pub const CONSERVATION_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionMode {
    #[default]
    Serial,
    Parallel,
}

/// Which queue-inflow formula produced `N_qu` for a link at a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueueBranch {
    /// Constant speed over the lookback and at least two steps of free-flow travel.
    Fixed,
    /// Travel-distance selection; used for varying speeds and short free-flow sections.
    TimeVarying,
    /// Origins and sinks have no queue.
    Virtual,
}

#[derive(Clone, Debug)]
struct CompiledNode {
    id: NodeId,
    incoming: Vec<usize>,
    outgoing: Vec<usize>,
    incoming_ids: Vec<LinkId>,
    outgoing_ids: Vec<LinkId>,
    rates: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
struct Topology {
    dt: f64,
    horizon: usize,
    links: Vec<LinkParams>,
    /// Green fraction applied to each link's outflow; always-green links have none.
    green: Vec<Option<StepSeries>>,
    lookback: Vec<usize>,
    demand: Vec<Vec<f64>>,
    nodes: Vec<CompiledNode>,
}

impl Topology {
    fn compile(s: &Scenario) -> Result<Self, EngineError> {
        let mut links = s.links.clone();
        links.sort_by_key(|l| l.id);
        let index: BTreeMap<LinkId, usize> = links.iter().enumerate().map(|(i, l)| (l.id, i)).collect();
        let idx = |id: LinkId| index.get(&id).copied().ok_or(EngineError::Dangling(id));

        let mut green = vec![None; links.len()];
        let mut nodes = Vec::with_capacity(s.nodes.len());
        let mut sorted_nodes: Vec<_> = s.nodes.iter().collect();
        sorted_nodes.sort_by_key(|n| n.id);
        for n in sorted_nodes {
            let mut incoming_ids = n.incoming.clone();
            incoming_ids.sort();
            let mut outgoing_ids = n.outgoing.clone();
            outgoing_ids.sort();
            let rates = incoming_ids
                .iter()
                .map(|j| outgoing_ids.iter().map(|i| n.rate(*j, *i)).collect())
                .collect();
            for g in &n.green {
                green[idx(g.link)?] = Some(g.fraction.clone());
            }
            nodes.push(CompiledNode {
                id: n.id,
                incoming: incoming_ids.iter().map(|j| idx(*j)).collect::<Result<_, _>>()?,
                outgoing: outgoing_ids.iter().map(|i| idx(*i)).collect::<Result<_, _>>()?,
                incoming_ids,
                outgoing_ids,
                rates,
            });
        }

        let lookback = links
            .iter()
            .map(|l| if l.kind.is_road() { max_lookback(l.length, l.v_min(), s.dt) } else { 0 })
            .collect();
        let demand = links
            .iter()
            .map(|l| {
                if l.kind == LinkKind::Origin {
                    s.demand_series(l.id)
                } else {
                    Vec::new()
                }
            })
            .collect();
        Ok(Topology {
            dt: s.dt,
            horizon: s.horizon,
            links,
            green,
            lookback,
            demand,
            nodes,
        })
    }
}

/// Queue state of one road link at the current step.
#[derive(Clone, Copy, Debug)]
struct QueueState {
    n_qu: f64,
    length: f64,
    density: f64,
    free_length: f64,
    branch: QueueBranch,
}

/// Everything one link contributes to the node problems of a step.
#[derive(Clone, Copy, Debug)]
struct LinkStep {
    queue: QueueState,
    /// Vehicles the link can accept this step.
    supply: f64,
    /// Vehicles the link wants to release this step.
    demand: f64,
    /// `N_in(k+1)` for origins, which receive demand directly.
    origin_in: Option<f64>,
}

fn estimate_queue(rec: &LinkRecord, lookback: usize, dt: f64, k: usize) -> QueueState {
    let p = &rec.params;
    let fd = p.fd_point(k);
    let n_out = rec.cum_out[k];
    let n_in = rec.cum_in[k];
    let q_out_prev = if k == 0 { 0.0 } else { (n_out - rec.cum_out[k - 1]) / dt };
    let density = queue_density(fd, p.jam_density, q_out_prev);
    let prev_qu = if k == 0 { 0.0 } else { rec.cum_queue[k - 1] };

    // the tail position from the previous queue count decides who has joined
    let (_, lf_prev) = queue_lengths((prev_qu - n_out).max(0.0), density, p.length);
    let from = k.saturating_sub(lookback);
    let fixed = if p.free_flow_speed.is_constant_over(from, k) {
        queue_inflow_fixed(&rec.cum_in, lf_prev, p.speed(k), dt, k)
    } else {
        None
    };
    let (raw, branch) = match fixed {
        Some(v) => (v, QueueBranch::Fixed),
        None => {
            let table = travel_distance_table(&p.free_flow_speed, lookback, dt, k);
            (queue_inflow_tvfs(&rec.cum_in, &table, lf_prev), QueueBranch::TimeVarying)
        }
    };
    let n_qu = raw.min(n_in).max(n_out.max(prev_qu.min(n_in)));
    let (length, free_length) = queue_lengths(n_qu - n_out, density, p.length);
    QueueState {
        n_qu,
        length,
        density,
        free_length,
        branch,
    }
}

fn virtual_queue(rec: &LinkRecord, k: usize) -> QueueState {
    QueueState {
        n_qu: rec.cum_out[k],
        length: 0.0,
        density: 0.0,
        free_length: 0.0,
        branch: QueueBranch::Virtual,
    }
}

fn link_step(topo: &Topology, li: usize, rec: &LinkRecord, k: usize) -> LinkStep {
    let p = &rec.params;
    let dt = topo.dt;
    match p.kind {
        LinkKind::Origin => {
            let arrived = rec.cum_in[k] + topo.demand[li].get(k).copied().unwrap_or(0.0) * dt;
            LinkStep {
                queue: virtual_queue(rec, k),
                supply: 0.0,
                demand: (arrived - rec.cum_out[k]).max(0.0),
                origin_in: Some(arrived),
            }
        }
        LinkKind::Sink => LinkStep {
            queue: virtual_queue(rec, k),
            supply: f64::INFINITY,
            demand: 0.0,
            origin_in: None,
        },
        LinkKind::Common | LinkKind::Turn => {
            let lookback = topo.lookback[li];
            let queue = estimate_queue(rec, lookback, dt, k);
            let (limit, _) = inflow_limit(
                &rec.cum_in,
                &rec.cum_out,
                queue.length,
                queue.free_length,
                queue.density,
                p.jam_density,
                p.backward_wave_speed,
                dt,
                k,
            );
            let table = travel_distance_table(&p.free_flow_speed, lookback, dt, k);
            let green = topo.green[li].as_ref().map_or(1.0, |g| g.at(k));
            let out = outflow_bounds(&rec.cum_in, &rec.cum_out, &table, p.length, p.saturation(k), green, dt);
            LinkStep {
                queue,
                supply: (limit - rec.cum_in[k]).max(0.0),
                demand: out.max - rec.cum_out[k],
                origin_in: None,
            }
        }
    }
}

fn solve_node(node: &CompiledNode, steps: &[LinkStep], k: usize) -> Result<NodeStepSolution, EngineError> {
    let problem = NodeStepProblem {
        incoming: node.incoming_ids.clone(),
        outgoing: node.outgoing_ids.clone(),
        supply: node.outgoing.iter().map(|i| steps[*i].supply).collect(),
        demand: node.incoming.iter().map(|j| steps[*j].demand).collect(),
        rates: node.rates.clone(),
    };
    allocate(&problem).map_err(|source| EngineError::Node {
        node: node.id,
        step: k,
        source,
    })
}

#[derive(Clone, Debug)]
pub struct SimulationState {
    pub step: usize,
    /// One record per link, sorted by link id.
    pub records: Vec<LinkRecord>,
    /// Queue-inflow branch per link per step.
    pub branches: Vec<Vec<QueueBranch>>,
}

impl SimulationState {
    pub fn record(&self, id: LinkId) -> Option<&LinkRecord> {
        self.records.iter().find(|r| r.params.id == id)
    }

    /// Unserved demand waiting at each origin.
    pub fn origin_backlog(&self) -> BTreeMap<LinkId, f64> {
        self.records
            .iter()
            .filter(|r| r.params.kind == LinkKind::Origin)
            .map(|r| (r.params.id, r.occupancy()))
            .collect()
    }

    pub fn total_injected(&self) -> f64 {
        self.kind_sum(LinkKind::Origin, |r| *r.cum_in.last().unwrap())
    }

    pub fn total_absorbed(&self) -> f64 {
        self.kind_sum(LinkKind::Sink, |r| *r.cum_in.last().unwrap())
    }

    pub fn on_road(&self) -> f64 {
        self.records
            .iter()
            .filter(|r| r.params.kind.is_road())
            .map(|r| r.occupancy())
            .sum()
    }

    fn kind_sum(&self, kind: LinkKind, f: impl Fn(&LinkRecord) -> f64) -> f64 {
        self.records.iter().filter(|r| r.params.kind == kind).map(f).sum()
    }
}

pub struct Simulation {
    topo: Topology,
    state: SimulationState,
    mode: ExecutionMode,
    check_invariants: bool,
    finished: bool,
}

impl Simulation {
    /// Validates and compiles a scenario.
    pub fn new(scenario: &Scenario) -> Result<Self, EngineError> {
        let report = validate_report(scenario);
        for w in &report.warnings {
            log::info!("{w}");
        }
        if !report.is_valid() {
            return Err(EngineError::Invalid(report.violations));
        }
        let topo = Topology::compile(scenario)?;
        log::debug!(
            "compiled {} links and {} nodes for {} steps of {} s",
            topo.links.len(),
            scenario.nodes.len(),
            topo.horizon,
            topo.dt
        );
        let records = topo
            .links
            .iter()
            .map(|p| LinkRecord::with_capacity(p.clone(), topo.horizon))
            .collect();
        let branches = vec![Vec::with_capacity(topo.horizon + 1); topo.links.len()];
        Ok(Simulation {
            topo,
            state: SimulationState {
                step: 0,
                records,
                branches,
            },
            mode: ExecutionMode::Serial,
            check_invariants: true,
            finished: false,
        })
    }

    pub fn with_mode(mut self, mode: ExecutionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_invariant_checks(mut self, on: bool) -> Self {
        self.check_invariants = on;
        self
    }

    pub fn state(&self) -> &SimulationState {
        &self.state
    }

    pub fn horizon(&self) -> usize {
        self.topo.horizon
    }

    /// Advance from step `k` to `k + 1`.
    pub fn step(&mut self) -> Result<(), EngineError> {
        let k = self.state.step;
        let topo = &self.topo;
        let records = &self.state.records;

        let steps: Vec<LinkStep> = match self.mode {
            ExecutionMode::Serial => records.iter().enumerate().map(|(li, r)| link_step(topo, li, r, k)).collect(),
            ExecutionMode::Parallel => records
                .par_iter()
                .enumerate()
                .map(|(li, r)| link_step(topo, li, r, k))
                .collect(),
        };
        let solutions: Vec<NodeStepSolution> = match self.mode {
            ExecutionMode::Serial => topo
                .nodes
                .iter()
                .map(|n| solve_node(n, &steps, k))
                .collect::<Result<_, _>>()?,
            ExecutionMode::Parallel => topo
                .nodes
                .par_iter()
                .map(|n| solve_node(n, &steps, k))
                .collect::<Result<_, _>>()?,
        };

        let mut new_in: Vec<f64> = records.iter().map(|r| r.cum_in[k]).collect();
        let mut new_out: Vec<f64> = records.iter().map(|r| r.cum_out[k]).collect();
        for (node, sol) in topo.nodes.iter().zip(&solutions) {
            for (pos, j) in node.incoming.iter().enumerate() {
                new_out[*j] = records[*j].cum_out[k] + sol.outflow[pos];
            }
            for (pos, i) in node.outgoing.iter().enumerate() {
                new_in[*i] = records[*i].cum_in[k] + sol.inflow[pos];
            }
        }
        for (li, s) in steps.iter().enumerate() {
            if let Some(v) = s.origin_in {
                new_in[li] = v;
            }
        }

        for (li, rec) in self.state.records.iter_mut().enumerate() {
            let q = steps[li].queue;
            rec.cum_queue.push(q.n_qu);
            rec.queue_length.push(q.length);
            rec.queue_density.push(q.density);
            rec.cum_in.push(new_in[li]);
            rec.cum_out.push(new_out[li]);
            self.state.branches[li].push(q.branch);
        }
        self.state.step = k + 1;
        if self.check_invariants {
            self.check(k)?;
        }
        Ok(())
    }

    /// Checks record invariants for queue state at `k` and flows at `k + 1`.
    fn check(&self, k: usize) -> Result<(), EngineError> {
        let breach = |entity: String, detail: String| EngineError::InvariantBreach { step: k, entity, detail };
        for rec in &self.state.records {
            let p = &rec.params;
            let e = || format!("link {}", p.id);
            let (i0, i1) = (rec.cum_in[k], rec.cum_in[k + 1]);
            let (o0, o1) = (rec.cum_out[k], rec.cum_out[k + 1]);
            if i1 < i0 - COUNT_TOLERANCE || o1 < o0 - COUNT_TOLERANCE {
                return Err(breach(e(), format!("cumulative curve decreased: in {i0} -> {i1}, out {o0} -> {o1}")));
            }
            if o1 > i1 + COUNT_TOLERANCE {
                return Err(breach(e(), format!("outflow {o1} exceeds inflow {i1}")));
            }
            if !p.kind.is_road() {
                continue;
            }
            let qu = rec.cum_queue[k];
            if qu < o0 - COUNT_TOLERANCE || qu > i0 + COUNT_TOLERANCE {
                return Err(breach(e(), format!("queue inflow {qu} outside [{o0}, {i0}]")));
            }
            if k > 0 && qu < rec.cum_queue[k - 1] - COUNT_TOLERANCE {
                return Err(breach(e(), "queue inflow decreased".into()));
            }
            let lq = rec.queue_length[k];
            if !(0.0..=p.length).contains(&lq) {
                return Err(breach(e(), format!("queue length {lq} outside [0, {}]", p.length)));
            }
            let rho = rec.queue_density[k];
            let rho_cr = p.fd_point(k).critical_density;
            if lq > 0.0 && (rho < rho_cr - COUNT_TOLERANCE || rho > p.jam_density + COUNT_TOLERANCE) {
                return Err(breach(e(), format!("queue density {rho} outside [{rho_cr}, {}]", p.jam_density)));
            }
        }
        let s = &self.state;
        let backlog: f64 = s.origin_backlog().values().sum();
        let balance = s.total_injected() - s.on_road() - s.total_absorbed() - backlog;
        if balance.abs() > CONSERVATION_TOLERANCE {
            return Err(breach("network".into(), format!("vehicle balance off by {balance}")));
        }
        Ok(())
    }

    /// Runs the remaining steps.
    pub fn run_to_end(&mut self) -> Result<(), EngineError> {
        while self.state.step < self.topo.horizon {
            self.step()?;
        }
        Ok(())
    }

    /// Computes the queue state at the final step so every reported step has one.
    fn close(&mut self) {
        if self.finished {
            return;
        }
        let k = self.state.step;
        for (li, rec) in self.state.records.iter_mut().enumerate() {
            let q = if rec.params.kind.is_road() {
                estimate_queue(rec, self.topo.lookback[li], self.topo.dt, k)
            } else {
                virtual_queue(rec, k)
            };
            rec.cum_queue.push(q.n_qu);
            rec.queue_length.push(q.length);
            rec.queue_density.push(q.density);
            self.state.branches[li].push(q.branch);
        }
        self.finished = true;
    }

    /// Final state including the queue estimate at the last step.
    pub fn into_state(mut self) -> SimulationState {
        self.close();
        self.state
    }

    /// Runs to the horizon and returns the trace.
    pub fn finish(mut self) -> Result<TraceSet, EngineError> {
        self.run_to_end()?;
        let dt = self.topo.dt;
        Ok(trace_from_state(&self.into_state(), dt))
    }
}

/// Trace rows for every road link at steps `1..=horizon`.
pub fn trace_from_state(state: &SimulationState, dt: f64) -> TraceSet {
    let road: Vec<&LinkRecord> = state.records.iter().filter(|r| r.params.kind.is_road()).collect();
    let mut rows = Vec::with_capacity(road.len() * state.step);
    for k in 1..=state.step {
        for r in &road {
            rows.push(TraceRow {
                step: k,
                link: r.params.id,
                n_in: r.cum_in[k],
                n_qu: r.cum_queue[k],
                n_out: r.cum_out[k],
                q_in: (r.cum_in[k] - r.cum_in[k - 1]) / dt,
                q_out: (r.cum_out[k] - r.cum_out[k - 1]) / dt,
                queue_length: r.queue_length[k],
                queue_density: r.queue_density[k],
            });
        }
    }
    TraceSet { dt, rows }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunOptions {
    pub mode: ExecutionMode,
    pub check_invariants: bool,
}

impl RunOptions {
    pub fn serial() -> Self {
        RunOptions {
            mode: ExecutionMode::Serial,
            check_invariants: true,
        }
    }

    pub fn parallel() -> Self {
        RunOptions {
            mode: ExecutionMode::Parallel,
            check_invariants: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: Option<String>,
    pub mode: ExecutionMode,
    pub steps: usize,
    pub links: usize,
    pub nodes: usize,
    pub wall_time_s: f64,
    pub mean_step_time_s: f64,
    pub invariant_checks: bool,
    pub vehicles_injected: f64,
    pub vehicles_absorbed: f64,
    pub vehicles_on_road: f64,
    pub origin_backlog: f64,
    /// Link-steps where the fixed-speed formula was not admissible.
    pub time_varying_steps: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<String>,
}

impl RunReport {
    fn new(s: &Scenario, opts: &RunOptions, state: &SimulationState, wall: Duration) -> Self {
        let steps = state.step;
        let wall_time_s = wall.as_secs_f64();
        RunReport {
            scenario: s.name.clone(),
            mode: opts.mode,
            steps,
            links: s.road_links().count(),
            nodes: s.nodes.len(),
            wall_time_s,
            mean_step_time_s: if steps == 0 { 0.0 } else { wall_time_s / steps as f64 },
            invariant_checks: opts.check_invariants,
            vehicles_injected: state.total_injected(),
            vehicles_absorbed: state.total_absorbed(),
            vehicles_on_road: state.on_road(),
            origin_backlog: state.origin_backlog().values().sum(),
            time_varying_steps: state
                .branches
                .iter()
                .flatten()
                .filter(|b| **b == QueueBranch::TimeVarying)
                .count(),
            outputs: Vec::new(),
        }
    }
}

/// Runs a scenario to its horizon in serial mode with invariant checks.
pub fn run(scenario: &Scenario) -> Result<TraceSet, EngineError> {
    run_with(scenario, &RunOptions::serial()).map(|(t, _, _)| t)
}

/// Runs a scenario and returns the trace, the final state and a timing report.
pub fn run_with(scenario: &Scenario, opts: &RunOptions) -> Result<(TraceSet, SimulationState, RunReport), EngineError> {
    let started = Instant::now();
    let mut sim = Simulation::new(scenario)?
        .with_mode(opts.mode)
        .with_invariant_checks(opts.check_invariants);
    sim.run_to_end()?;
    let dt = sim.topo.dt;
    let state = sim.into_state();
    let wall = started.elapsed();
    let trace = trace_from_state(&state, dt);
    let report = RunReport::new(scenario, opts, &state, wall);
    log::info!(
        "{} steps in {:.3} s ({:?}), {:.1} vehicles absorbed",
        report.steps,
        report.wall_time_s,
        report.mode,
        report.vehicles_absorbed
    );
    Ok((trace, state, report))
}
