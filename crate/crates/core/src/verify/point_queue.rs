//! Vehicle-level reference for a single link.
//!
//! Every vehicle is tracked individually: it moves at the link's free-flow
//! speed, joins the queue once it passes the queue tail, and leaves the link
//! in FIFO order after reaching the stop line, at most `budget[k]` vehicles
//! per step. The queue tail sits `Q / ρ_q` upstream of the stop line, where
//! `Q` counts vehicles that joined but have not left.

use crate::network::LinkParams;
use crate::series::StepSeries;

/// Cumulative curves indexed by step; index `k` is the state at `k * dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleCurves {
    pub cum_in: Vec<f64>,
    pub cum_queue: Vec<f64>,
    pub cum_out: Vec<f64>,
    /// Distance from the stop line to the queue tail in meters.
    pub queue_length: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointQueueOracle {
    /// Entry times in seconds, sorted.
    pub entries: Vec<f64>,
    pub length: f64,
    pub jam_density: f64,
    pub backward_wave_speed: f64,
    pub speed: StepSeries,
    /// Vehicles the stop line may discharge during each step.
    pub budgets: Vec<f64>,
    pub dt: f64,
}

impl PointQueueOracle {
    pub fn new(entries: Vec<f64>, params: &LinkParams, budgets: Vec<f64>, dt: f64) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0] <= w[1]), "entries must be sorted");
        PointQueueOracle {
            entries,
            length: params.length,
            jam_density: params.jam_density,
            backward_wave_speed: params.backward_wave_speed,
            speed: params.free_flow_speed.clone(),
            budgets,
            dt,
        }
    }

    /// Meters a vehicle entering at time zero has covered by each step
    /// boundary, up to `horizon + 1` steps.
    fn milestones(&self, horizon: usize) -> Vec<f64> {
        let mut x = vec![0.0];
        for k in 0..=horizon {
            x.push(x[k] + self.speed.at(k) * self.dt);
        }
        x
    }

    /// Position at `t` seconds of a vehicle entering at time zero.
    fn position(&self, milestones: &[f64], t: f64) -> f64 {
        let step = ((t / self.dt + 1e-9).floor() as usize).min(milestones.len() - 2);
        milestones[step] + self.speed.at(step) * (t - step as f64 * self.dt)
    }

    /// Distance covered between `from` and `to` seconds.
    fn distance(&self, milestones: &[f64], from: f64, to: f64) -> f64 {
        if to <= from {
            return 0.0;
        }
        self.position(milestones, to) - self.position(milestones, from)
    }

    /// Density of the queue when it discharges at `q_out` veh/s.
    fn queue_density(&self, k: usize, q_out: f64) -> f64 {
        let (v, w, jam) = (self.speed.at(k), self.backward_wave_speed, self.jam_density);
        // capacity point of the triangular diagram: v·ρ = w·(jam − ρ)
        let rho_cr = jam * w / (v + w);
        let q_cr = v * rho_cr;
        let q = q_out.clamp(0.0, q_cr);
        rho_cr + (jam - rho_cr) * (q_cr - q) / q_cr
    }

    /// Vehicles that entered by `t`, in FIFO order.
    fn entered_by(&self, t: f64) -> usize {
        self.entries.partition_point(|e| *e <= t + 1e-9)
    }

    pub fn run(&self, horizon: usize) -> OracleCurves {
        let dt = self.dt;
        let mut cum_in = Vec::with_capacity(horizon + 1);
        let mut cum_queue = Vec::with_capacity(horizon + 1);
        let mut cum_out = vec![0usize];
        let mut joined = 0usize;
        let mut queue_length = Vec::with_capacity(horizon + 1);
        let x = self.milestones(horizon);

        for k in 0..=horizon {
            let now = k as f64 * dt;
            let present = self.entered_by(now);
            cum_in.push(present as f64);

            let out = cum_out[k];
            let q_prev = if k == 0 { 0.0 } else { (out - cum_out[k - 1]) as f64 / dt };
            let rho = self.queue_density(k, q_prev);
            let queued = joined.saturating_sub(out) as f64;
            let tail = (self.length - queued / rho).max(0.0);
            // earlier entrants are never behind later ones, so joiners form a prefix
            let reached = (0..present)
                .take_while(|v| self.distance(&x, self.entries[*v], now) >= tail)
                .count();
            joined = joined.max(reached).max(out);
            cum_queue.push(joined as f64);
            queue_length.push((joined.saturating_sub(out) as f64 / rho).min(self.length));

            if k < horizon {
                let next = now + dt;
                let at_line = (0..self.entered_by(next))
                    .take_while(|v| self.distance(&x, self.entries[*v], next) >= self.length)
                    .count();
                let budget = self.budgets.get(k).copied().unwrap_or(0.0).max(0.0);
                let released = (budget.floor() as usize).min(at_line.saturating_sub(out));
                cum_out.push(out + released);
            }
        }
        OracleCurves {
            cum_in,
            cum_queue,
            cum_out: cum_out.into_iter().map(|n| n as f64).collect(),
            queue_length,
        }
    }
}

/// Reference cumulative curves of one link fed by `entries` and discharged
/// under `budgets` (whole vehicles per step).
pub fn oracle_single_link(
    entries: &[f64],
    params: &LinkParams,
    budgets: &[f64],
    dt: f64,
    horizon: usize,
) -> OracleCurves {
    PointQueueOracle::new(entries.to_vec(), params, budgets.to_vec(), dt).run(horizon)
}
