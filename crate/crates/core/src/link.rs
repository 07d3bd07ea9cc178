//! Per-link formulas of the queue model: the triangular fundamental diagram,
//! queue density and length, queue inflow under fixed and time-varying
//! free-flow speed, the storage-based inflow limit and the outflow bounds.
//!
//! Everything here is a pure function of one link's history. Cumulative
//! series are indexed by step with index 0 the empty initial state;
//! negative indices read as 0.

use crate::network::record::read;
use crate::series::StepSeries;

/// Apex of the triangular fundamental diagram at one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdPoint {
    /// veh/s
    pub critical_flow: f64,
    /// veh/m
    pub critical_density: f64,
}

pub fn fd_point(jam_density: f64, backward_wave_speed: f64, free_flow_speed: f64) -> FdPoint {
    let (v, w) = (free_flow_speed, backward_wave_speed);
    FdPoint {
        critical_flow: jam_density * v * w / (v + w),
        critical_density: jam_density * w / (v + w),
    }
}

/// Density of the queued part given the current discharge rate, kept on the
/// congested branch `[ρ_cr, ρ_jam]`.
pub fn queue_density(fd: FdPoint, jam_density: f64, q_out: f64) -> f64 {
    let FdPoint {
        critical_flow: q_cr,
        critical_density: rho_cr,
    } = fd;
    let rho = rho_cr + (jam_density - rho_cr) * (q_cr - q_out) / q_cr;
    rho.clamp(rho_cr, jam_density)
}

/// Queue and free-flow lengths `(L_q, L_f)` for `queued` vehicles held at density `rho_q`.
pub fn queue_lengths(queued: f64, rho_q: f64, length: f64) -> (f64, f64) {
    let l_q = (queued / rho_q).clamp(0.0, length);
    (l_q, length - l_q)
}

/// Whole-step lookback `n_f` and interpolation weight `γ_f` for free-flow
/// travel over `l_f` meters at constant speed.
pub fn fixed_lookback(l_f: f64, speed: f64, dt: f64) -> (i64, f64) {
    let steps = (l_f / speed) / dt;
    let n_f = steps.ceil();
    (n_f as i64, n_f - steps)
}

/// Cumulative queue inflow at step `k` when the speed is constant over the
/// lookback. Needs `n_f >= 2`, otherwise the interpolation would read the
/// inflow of the step being computed; returns `None` in that case.
pub fn queue_inflow_fixed(cum_in: &[f64], l_f: f64, speed: f64, dt: f64, k: usize) -> Option<f64> {
    let (n_f, gamma) = fixed_lookback(l_f, speed, dt);
    if n_f < 2 {
        return None;
    }
    let k = k as i64;
    Some(gamma * read(cum_in, k + 1 - n_f) + (1.0 - gamma) * read(cum_in, k - n_f))
}

/// Potential travel distance of every entry step in the lookback window.
#[derive(Clone, Debug, PartialEq)]
pub struct TravelDistanceTable {
    /// Oldest entry step in the window.
    pub window_start: usize,
    /// Step the table was built for.
    pub step: usize,
    /// Lookback length `n̄_f` in steps.
    pub lookback: usize,
    /// Meters traveled by step `step` for vehicles that entered at
    /// `window_start + j`; strictly decreasing when speeds are positive.
    pub distances: Vec<f64>,
}

/// Steps a vehicle needs to cross `length` at the minimum desired speed.
pub fn max_lookback(length: f64, v_min: f64, dt: f64) -> usize {
    ((length / v_min) / dt).ceil().max(1.0) as usize
}

pub fn travel_distance_table(speed: &StepSeries, lookback: usize, dt: f64, k: usize) -> TravelDistanceTable {
    let start = k.saturating_sub(lookback);
    let mut distances = vec![0.0; k - start + 1];
    let mut acc = 0.0;
    for s in (start..=k).rev() {
        acc += speed.at(s) * dt;
        distances[s - start] = acc;
    }
    TravelDistanceTable {
        window_start: start,
        step: k,
        lookback,
        distances,
    }
}

/// Vehicles that have covered more than `threshold` meters by the table's step:
/// everything that entered before the window plus the increments whose
/// distance exceeds the threshold. The oldest window entry's increment is
/// already part of the base count and never added.
fn passed(cum_in: &[f64], table: &TravelDistanceTable, threshold: f64) -> f64 {
    let k = table.step as i64;
    let mut total = read(cum_in, k - table.lookback as i64);
    for (j, d) in table.distances.iter().enumerate().skip(1) {
        if *d > threshold {
            let s = (table.window_start + j) as i64;
            total += read(cum_in, s) - read(cum_in, s - 1);
        }
    }
    total
}

/// Cumulative queue inflow at the table's step under a time-varying speed.
pub fn queue_inflow_tvfs(cum_in: &[f64], table: &TravelDistanceTable, l_f: f64) -> f64 {
    passed(cum_in, table, l_f)
}

/// Desired cumulative outflow for the next step: every vehicle whose travel
/// distance exceeds the link length.
pub fn desired_outflow(cum_in: &[f64], table: &TravelDistanceTable, length: f64) -> f64 {
    passed(cum_in, table, length)
}

/// Storage-based inflow limit at step `k`, returning `(N̄_in(k+1), q̄_in(k))`.
///
/// The queue releases space only once the backward wave from the stop line
/// has reached its tail, `L_q / w` seconds after the discharge.
#[allow(clippy::too_many_arguments)]
pub fn inflow_limit(
    cum_in: &[f64],
    cum_out: &[f64],
    l_q: f64,
    l_f: f64,
    rho_q: f64,
    jam_density: f64,
    backward_wave_speed: f64,
    dt: f64,
    k: usize,
) -> (f64, f64) {
    let t_sh = l_q / backward_wave_speed;
    let n_sh = ((t_sh / dt).ceil() as i64).max(1);
    let gamma = n_sh as f64 - t_sh / dt;
    let k = k as i64;
    // indices past k are not known yet; use the latest known outflow
    let n_sh_in = gamma * read(cum_out, (k + 2 - n_sh).min(k)) + (1.0 - gamma) * read(cum_out, (k + 1 - n_sh).min(k));
    let limit = n_sh_in + rho_q * l_q + jam_density * l_f;
    let rate = ((limit - read(cum_in, k)) / dt).max(0.0);
    (limit, rate)
}

/// `N_in(k+1)` given the inflow limit and the desired inflow rate.
pub fn actual_inflow(max_rate: f64, desired_rate: f64, n_in: f64, dt: f64) -> f64 {
    n_in + max_rate.min(desired_rate) * dt
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutflowBounds {
    /// `N_out_des(k+1)`
    pub desired: f64,
    /// `N̄_out(k+1)`
    pub max: f64,
    /// `q̄_out(k)` in veh/s
    pub max_rate: f64,
}

/// Outflow bounds at step `k`: free-flow arrivals at the stop line capped by
/// a discharge budget of `q_sat · b · dt` vehicles.
pub fn outflow_bounds(
    cum_in: &[f64],
    cum_out: &[f64],
    table: &TravelDistanceTable,
    length: f64,
    saturation_flow: f64,
    green: f64,
    dt: f64,
) -> OutflowBounds {
    let n_out = read(cum_out, table.step as i64);
    let desired = desired_outflow(cum_in, table, length);
    let max = (n_out + saturation_flow * green * dt).min(desired).max(n_out);
    OutflowBounds {
        desired,
        max,
        max_rate: (max - n_out) / dt,
    }
}
