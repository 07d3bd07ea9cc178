//! Node-model properties: conservation, holding-free solutions and the
//! invariance principle.

use crate::node::{allocate, NodeStepProblem, NodeStepSolution};
use crate::verify::node_oracle::oracle_node;

/// Absolute tolerance for comparing vehicle counts in one node step.
pub const TOLERANCE: f64 = 1e-9;

fn tol(scale: f64) -> f64 {
    TOLERANCE * scale.abs().max(1.0)
}

/// Largest conservation error: total outflow against total inflow, and any
/// outgoing link receiving more than its supply.
pub fn conservation_error(problem: &NodeStepProblem, solution: &NodeStepSolution) -> f64 {
    let out: f64 = solution.outflow.iter().sum();
    let inn: f64 = solution.inflow.iter().sum();
    let over = solution
        .inflow
        .iter()
        .zip(&problem.supply)
        .map(|(q, s)| (q - s).max(0.0))
        .fold(0.0, f64::max);
    (out - inn).abs().max(over)
}

/// Feeders that release less than their demand although every downstream
/// link they route to still has room.
pub fn holding_free_violations(problem: &NodeStepProblem, solution: &NodeStepSolution) -> Vec<usize> {
    let residual: Vec<f64> = problem
        .supply
        .iter()
        .zip(&solution.inflow)
        .map(|(s, q)| s - q)
        .collect();
    (0..problem.demand.len())
        .filter(|&j| {
            let short = solution.outflow[j] < problem.demand[j] - tol(problem.demand[j]);
            let blocked = problem.rates[j]
                .iter()
                .zip(&residual)
                .zip(&problem.supply)
                .any(|((e, r), s)| *e > 0.0 && *r <= tol(*s));
            short && !blocked
        })
        .collect()
}

/// Which side of the invariance principle a perturbation exercised.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Perturbation {
    /// Supply of an outgoing link raised while every feeder was demand-constrained.
    Supply(usize),
    /// Demand of a supply-constrained feeder raised.
    Demand(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceFailure {
    pub perturbation: Perturbation,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InvarianceReport {
    pub supply_checks: usize,
    pub demand_checks: usize,
    /// Supply increases that changed a demand-constrained solution.
    pub supply_failures: Vec<InvarianceFailure>,
    /// Demand increases that changed a supply-constrained feeder's outflow
    /// while the feeders are served in the original settlement order.
    pub demand_failures: Vec<InvarianceFailure>,
    /// Demand increases that changed the feeder's outflow after a fresh
    /// allocation. The higher demand can make a different outgoing link the
    /// most constrained one, which reorders settlement on lane-sharing nodes.
    pub reallocation_changes: Vec<InvarianceFailure>,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.supply_failures.is_empty() && self.demand_failures.is_empty()
    }
}

fn same(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol(x.max(*y)))
}

/// Perturbs `problem` along both halves of the invariance principle:
///
/// * if every feeder releases its full demand, raising any supply must leave
///   the whole solution unchanged;
/// * raising the demand of a feeder that was held below its demand must leave
///   that feeder's outflow unchanged, given the residual supplies left by the
///   feeders settled before it.
///
/// The second check replays the original settlement order; a fresh
/// allocation of the perturbed problem is recorded separately.
pub fn property_invariance(problem: &NodeStepProblem) -> InvarianceReport {
    let base = allocate(problem).expect("valid node problem");
    let mut report = InvarianceReport::default();
    let satisfied = |j: usize| base.outflow[j] >= problem.demand[j] - tol(problem.demand[j]);

    if (0..problem.demand.len()).all(satisfied) {
        for i in 0..problem.supply.len() {
            if !problem.supply[i].is_finite() {
                continue;
            }
            let mut p = problem.clone();
            p.supply[i] = 2.0 * p.supply[i] + 1.0;
            let after = allocate(&p).expect("valid node problem");
            report.supply_checks += 1;
            if !same(&after.outflow, &base.outflow) {
                report.supply_failures.push(InvarianceFailure {
                    perturbation: Perturbation::Supply(i),
                    before: base.outflow.clone(),
                    after: after.outflow,
                });
            }
        }
    }

    for j in (0..problem.demand.len()).filter(|j| !satisfied(*j)) {
        let mut p = problem.clone();
        p.demand[j] = 2.0 * p.demand[j] + 1.0;
        report.demand_checks += 1;
        let failure = |after: Vec<f64>| InvarianceFailure {
            perturbation: Perturbation::Demand(j),
            before: base.outflow.clone(),
            after,
        };
        let replayed = oracle_node(&p, &base.settlement_order);
        if !same(&[replayed.outflow[j]], &[base.outflow[j]]) {
            report.demand_failures.push(failure(replayed.outflow));
        }
        let fresh = allocate(&p).expect("valid node problem");
        if !same(&[fresh.outflow[j]], &[base.outflow[j]]) {
            report.reallocation_changes.push(failure(fresh.outflow));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::LinkId;

    fn problem(supply: &[f64], demand: &[f64], rates: &[&[f64]]) -> NodeStepProblem {
        NodeStepProblem {
            incoming: (1..=demand.len() as u32).map(LinkId).collect(),
            outgoing: (10..10 + supply.len() as u32).map(LinkId).collect(),
            supply: supply.to_vec(),
            demand: demand.to_vec(),
            rates: rates.iter().map(|r| r.to_vec()).collect(),
        }
    }

    #[test]
    fn merge_is_conservative_and_holding_free() {
        let p = problem(&[300.0], &[220.0, 150.0], &[&[1.0], &[1.0]]);
        let s = allocate(&p).unwrap();
        assert_eq!(s.outflow, vec![220.0, 80.0]);
        assert!(conservation_error(&p, &s) <= 1e-9);
        assert!(holding_free_violations(&p, &s).is_empty());
        assert!(property_invariance(&p).passed());
    }

    #[test]
    fn withheld_flow_is_reported() {
        let p = problem(&[300.0], &[220.0, 150.0], &[&[1.0], &[1.0]]);
        let mut s = allocate(&p).unwrap();
        s.outflow[1] = 10.0;
        s.inflow = vec![230.0];
        assert_eq!(holding_free_violations(&p, &s), vec![1]);
    }

    #[test]
    fn lane_sharing_reorder_changes_fresh_allocation_only() {
        // B shares its lane between X and Y; once B wants much more, Y becomes
        // the most constrained link and B is settled before A
        let p = problem(&[10.0, 3.0], &[10.0, 4.0], &[&[1.0, 0.0], &[0.5, 0.5]]);
        let r = property_invariance(&p);
        assert_eq!(r.demand_checks, 1);
        assert!(r.passed());
        let change = &r.reallocation_changes[0];
        assert_eq!(change.before, vec![10.0, 0.0]);
        assert_eq!(change.after, vec![7.0, 6.0]);
    }
}
