//! Where the fixed-speed queue update would reach into the current step.

use crate::engine::{QueueBranch, Simulation};
use crate::error::EngineError;
use crate::network::{LinkId, Scenario};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CflEntry {
    pub link: LinkId,
    pub step: usize,
    /// Steps a vehicle needs to cross the free part of the link.
    pub lookback: i64,
    pub branch: QueueBranch,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CflReport {
    /// Constant-speed `(link, step)` pairs checked.
    pub checked: usize,
    /// Pairs where the free part is crossed in under two steps.
    pub entries: Vec<CflEntry>,
}

impl CflReport {
    /// Entries the engine did not route through the time-varying update.
    pub fn misrouted(&self) -> Vec<CflEntry> {
        self.entries
            .iter()
            .filter(|e| e.branch != QueueBranch::TimeVarying)
            .copied()
            .collect()
    }
}

/// Runs `scenario` and lists every constant-speed `(link, step)` whose free
/// part would be crossed in fewer than two steps, together with the queue
/// update the engine actually used there.
pub fn property_cfl(scenario: &Scenario) -> Result<CflReport, EngineError> {
    let mut sim = Simulation::new(scenario)?;
    sim.run_to_end()?;
    let state = sim.into_state();
    let dt = scenario.dt;
    let mut report = CflReport::default();

    for (rec, branches) in state.records.iter().zip(&state.branches) {
        let p = &rec.params;
        if !p.kind.is_road() {
            continue;
        }
        let window = (p.length / p.v_min() / dt).ceil() as usize;
        for (k, branch) in branches.iter().enumerate() {
            let from = k.saturating_sub(window);
            if !p.free_flow_speed.is_constant_over(from, k) {
                continue;
            }
            report.checked += 1;
            // free length seen by the update: the previous queue count discharged to N_out(k)
            let prev = if k == 0 { 0.0 } else { rec.cum_queue[k - 1] };
            let queued = (prev - rec.cum_out[k]).max(0.0);
            let rho = rec.queue_density[k];
            let free = p.length - if rho > 0.0 { (queued / rho).min(p.length) } else { 0.0 };
            let lookback = (free / p.speed(k) / dt).ceil() as i64;
            if lookback < 2 {
                report.entries.push(CflEntry {
                    link: p.id,
                    step: k,
                    lookback,
                    branch: *branch,
                });
            }
        }
    }
    Ok(report)
}
