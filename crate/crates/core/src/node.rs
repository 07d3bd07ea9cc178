//! Node model: distributes downstream supply over feeding links so that no
//! feeder is held back while both its demand and every supply it needs
//! allow it to move.
//!
//! The problem is stated in per-step increments: residual supply `S_i` of
//! each outgoing link and desired outflow `D_j` of each incoming link, both
//! in vehicles. The most supply-constrained outgoing link is settled first;
//! settling a feeder fixes its outflow at the largest value every one of its
//! downstream supplies can still absorb.

use crate::error::NodeError;
use crate::network::LinkId;

#[derive(Clone, Debug, PartialEq)]
pub struct NodeStepProblem {
    pub incoming: Vec<LinkId>,
    pub outgoing: Vec<LinkId>,
    /// Vehicles each outgoing link can still accept; `f64::INFINITY` for sinks.
    pub supply: Vec<f64>,
    /// Vehicles each incoming link wants to release.
    pub demand: Vec<f64>,
    /// `rates[j][i]`: fraction of incoming `j`'s outflow bound for outgoing `i`.
    pub rates: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeStepSolution {
    /// Realized outflow increment per incoming link.
    pub outflow: Vec<f64>,
    /// Realized inflow increment per outgoing link.
    pub inflow: Vec<f64>,
    /// Incoming indices in the order their outflows were fixed.
    pub settlement_order: Vec<usize>,
}

impl NodeStepProblem {
    pub fn validate(&self) -> Result<(), NodeError> {
        let (n_in, n_out) = (self.incoming.len(), self.outgoing.len());
        let cols = self.rates.iter().map(|r| r.len()).find(|c| *c != n_out);
        if self.rates.len() != n_in || self.demand.len() != n_in || self.supply.len() != n_out || cols.is_some() {
            return Err(NodeError::Shape {
                rows: self.rates.len(),
                cols: cols.unwrap_or(n_out),
                incoming: n_in,
                outgoing: n_out,
            });
        }
        for (j, d) in self.demand.iter().enumerate() {
            if !d.is_finite() {
                return Err(NodeError::NonFinite(format!("demand of link {}", self.incoming[j])));
            }
            if *d < 0.0 {
                return Err(NodeError::Negative(format!("demand of link {} = {d}", self.incoming[j])));
            }
        }
        for (i, s) in self.supply.iter().enumerate() {
            if s.is_nan() {
                return Err(NodeError::NonFinite(format!("supply of link {}", self.outgoing[i])));
            }
            if *s < 0.0 {
                return Err(NodeError::Negative(format!("supply of link {} = {s}", self.outgoing[i])));
            }
        }
        for (j, row) in self.rates.iter().enumerate() {
            for (i, e) in row.iter().enumerate() {
                if !e.is_finite() {
                    return Err(NodeError::NonFinite(format!(
                        "turning rate {}->{}",
                        self.incoming[j], self.outgoing[i]
                    )));
                }
                if *e < 0.0 {
                    return Err(NodeError::Negative(format!(
                        "turning rate {}->{} = {e}",
                        self.incoming[j], self.outgoing[i]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Desired inflow increment of every outgoing link: the routed demand of all feeders.
    pub fn desired_inflow(&self) -> Vec<f64> {
        routed(&self.rates, &self.demand, self.outgoing.len(), |_| true)
    }
}

/// Supply-constraint index of an outgoing link: 1 when nothing is routed to
/// it or it can take everything, otherwise the fraction it can take.
pub fn beta(max_inflow: f64, desired_inflow: f64) -> f64 {
    if desired_inflow <= 0.0 {
        1.0
    } else {
        (max_inflow / desired_inflow).min(1.0)
    }
}

fn routed(rates: &[Vec<f64>], demand: &[f64], n_out: usize, include: impl Fn(usize) -> bool) -> Vec<f64> {
    let mut out = vec![0.0; n_out];
    for (j, row) in rates.iter().enumerate() {
        if !include(j) {
            continue;
        }
        for (i, e) in row.iter().enumerate() {
            out[i] += e * demand[j];
        }
    }
    out
}

/// Largest outflow of a feeder that every outgoing link it uses can absorb.
fn capacity(row: &[f64], residual: &[f64]) -> f64 {
    row.iter()
        .zip(residual)
        .filter(|(e, _)| **e > 0.0)
        .map(|(e, s)| s / e)
        .fold(f64::INFINITY, f64::min)
}

fn release(row: &[f64], amount: f64, residual: &mut [f64]) {
    for (e, s) in row.iter().zip(residual.iter_mut()) {
        if *e > 0.0 {
            *s = (*s - e * amount).max(0.0);
        }
    }
}

pub fn allocate(problem: &NodeStepProblem) -> Result<NodeStepSolution, NodeError> {
    problem.validate()?;
    let n_in = problem.incoming.len();
    let n_out = problem.outgoing.len();
    let mut residual = problem.supply.clone();
    let mut outflow = vec![0.0; n_in];
    let mut settled = vec![false; n_in];
    let mut order = Vec::with_capacity(n_in);

    let mut by_id_in: Vec<usize> = (0..n_in).collect();
    by_id_in.sort_by_key(|j| problem.incoming[*j]);
    let mut by_id_out: Vec<usize> = (0..n_out).collect();
    by_id_out.sort_by_key(|i| problem.outgoing[*i]);

    while order.len() < n_in {
        let wanted = routed(&problem.rates, &problem.demand, n_out, |j| !settled[j]);
        let mut xi = None;
        let mut worst = 1.0;
        for &i in &by_id_out {
            let b = beta(residual[i], wanted[i]);
            if b < worst {
                worst = b;
                xi = Some(i);
            }
        }

        let Some(xi) = xi else {
            // every remaining feeder fits
            for &j in &by_id_in {
                if !settled[j] {
                    outflow[j] = problem.demand[j];
                    release(&problem.rates[j], outflow[j], &mut residual);
                    settled[j] = true;
                    order.push(j);
                }
            }
            break;
        };

        for &j in &by_id_in {
            if settled[j] || problem.rates[j][xi] <= 0.0 {
                continue;
            }
            let row = &problem.rates[j];
            outflow[j] = problem.demand[j].min(capacity(row, &residual)).max(0.0);
            release(row, outflow[j], &mut residual);
            settled[j] = true;
            order.push(j);
        }
    }

    let inflow = routed(&problem.rates, &outflow, n_out, |_| true);
    Ok(NodeStepSolution {
        outflow,
        inflow,
        settlement_order: order,
    })
}
