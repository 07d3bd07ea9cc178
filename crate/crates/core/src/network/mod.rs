//! Network data model: links, nodes, demand and the scenario that ties them
//! together, plus structural validation and road-segment construction.

pub(crate) mod record;
mod segment;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::io::units;
use crate::link::{fd_point, FdPoint};
use crate::series::{block_average, StepSeries};

pub use record::LinkRecord;
pub use segment::{
    build_segment, BuiltSegment, Lane, LaneConfig, Movement, MovementShare,
    RoadSegment, SegmentSpec, TerminalLane,
};
pub use validate::{validate_report, validate_scenario, ValidationReport, Violation};

/// Tolerance for turning-rate row sums and conflict-phase sums.
pub const RATE_TOLERANCE: f64 = 1e-9;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Common,
    Turn,
    /// Virtual source that holds unserved demand as a backlog.
    Origin,
    /// Virtual absorber with unlimited supply.
    Sink,
}

impl LinkKind {
    pub fn is_road(self) -> bool {
        matches!(self, LinkKind::Common | LinkKind::Turn)
    }
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

fn zero_speed() -> StepSeries {
    StepSeries::constant(0.0)
}

fn is_zero_series(s: &StepSeries) -> bool {
    s.values() == [0.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    pub id: LinkId,
    pub kind: LinkKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Meters.
    #[serde(default, deserialize_with = "units::length", skip_serializing_if = "is_zero")]
    pub length: f64,
    /// Vehicles per meter.
    #[serde(default, deserialize_with = "units::density", skip_serializing_if = "is_zero")]
    pub jam_density: f64,
    /// Meters per second.
    #[serde(default, deserialize_with = "units::speed", skip_serializing_if = "is_zero")]
    pub backward_wave_speed: f64,
    /// Per-step free-flow speed in m/s.
    #[serde(
        default = "zero_speed",
        deserialize_with = "units::speed_series",
        skip_serializing_if = "is_zero_series"
    )]
    pub free_flow_speed: StepSeries,
    /// Defaults to the minimum of the speed profile.
    #[serde(default, deserialize_with = "units::opt_speed", skip_serializing_if = "Option::is_none")]
    pub min_speed: Option<f64>,
    /// Veh/s. Defaults to the critical flow of the fundamental diagram at each step.
    #[serde(
        default,
        deserialize_with = "units::opt_rate_series",
        skip_serializing_if = "Option::is_none"
    )]
    pub saturation_flow: Option<StepSeries>,
}

impl LinkParams {
    pub fn road(
        id: u32,
        kind: LinkKind,
        length: f64,
        jam_density: f64,
        backward_wave_speed: f64,
        free_flow_speed: StepSeries,
    ) -> Self {
        LinkParams {
            id: LinkId(id),
            kind,
            label: None,
            length,
            jam_density,
            backward_wave_speed,
            free_flow_speed,
            min_speed: None,
            saturation_flow: None,
        }
    }

    pub fn origin(id: u32) -> Self {
        Self::virtual_link(id, LinkKind::Origin)
    }

    pub fn sink(id: u32) -> Self {
        Self::virtual_link(id, LinkKind::Sink)
    }

    fn virtual_link(id: u32, kind: LinkKind) -> Self {
        LinkParams {
            id: LinkId(id),
            kind,
            label: None,
            length: 0.0,
            jam_density: 0.0,
            backward_wave_speed: 0.0,
            free_flow_speed: zero_speed(),
            min_speed: None,
            saturation_flow: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    #[inline]
    pub fn speed(&self, k: usize) -> f64 {
        self.free_flow_speed.at(k)
    }

    pub fn v_min(&self) -> f64 {
        self.min_speed.unwrap_or_else(|| self.free_flow_speed.min())
    }

    pub fn fd_point(&self, k: usize) -> FdPoint {
        fd_point(self.jam_density, self.backward_wave_speed, self.speed(k))
    }

    pub fn saturation(&self, k: usize) -> f64 {
        match &self.saturation_flow {
            Some(s) => s.at(k),
            None => self.fd_point(k).critical_flow,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurningRate {
    pub from: LinkId,
    pub to: LinkId,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenFraction {
    pub link: LinkId,
    pub fraction: StepSeries,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub incoming: Vec<LinkId>,
    pub outgoing: Vec<LinkId>,
    pub turning_rates: Vec<TurningRate>,
    /// Green fraction per incoming link; links not listed are always green.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub green: Vec<GreenFraction>,
    /// Sets of incoming links whose green fractions must not overlap.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conflicts: Vec<Vec<LinkId>>,
}

impl NodeSpec {
    pub fn new(id: u32) -> Self {
        NodeSpec {
            id: NodeId(id),
            label: None,
            incoming: Vec::new(),
            outgoing: Vec::new(),
            turning_rates: Vec::new(),
            green: Vec::new(),
            conflicts: Vec::new(),
        }
    }

    /// Adds a movement, registering both links on first use.
    pub fn connect(&mut self, from: LinkId, to: LinkId, rate: f64) -> &mut Self {
        if !self.incoming.contains(&from) {
            self.incoming.push(from);
        }
        if !self.outgoing.contains(&to) {
            self.outgoing.push(to);
        }
        self.turning_rates.push(TurningRate { from, to, rate });
        self
    }

    pub fn set_green(&mut self, link: LinkId, fraction: StepSeries) -> &mut Self {
        self.green.retain(|g| g.link != link);
        self.green.push(GreenFraction { link, fraction });
        self
    }

    pub fn rate(&self, from: LinkId, to: LinkId) -> f64 {
        self.turning_rates
            .iter()
            .filter(|t| t.from == from && t.to == to)
            .map(|t| t.rate)
            .sum()
    }

    pub fn green_for(&self, link: LinkId) -> Option<&StepSeries> {
        self.green.iter().find(|g| g.link == link).map(|g| &g.fraction)
    }
}

fn default_window() -> usize {
    1
}

fn is_one(w: &usize) -> bool {
    *w == 1
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demand {
    /// Block-averaging window applied to every profile (1 = off).
    #[serde(default = "default_window", skip_serializing_if = "is_one")]
    pub smooth_window: usize,
    #[serde(default)]
    pub profiles: Vec<DemandProfile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandProfile {
    pub origin: LinkId,
    /// Sampling interval of `rates` in seconds; defaults to the scenario step.
    #[serde(default, deserialize_with = "units::opt_time", skip_serializing_if = "Option::is_none")]
    pub interval: Option<f64>,
    /// Desired inflow in veh/s, one value per interval, last value extended.
    #[serde(deserialize_with = "units::rate_vec")]
    pub rates: Vec<f64>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "schema_version")]
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Step length in seconds.
    #[serde(deserialize_with = "units::time")]
    pub dt: f64,
    /// Number of simulated steps.
    pub horizon: usize,
    pub links: Vec<LinkParams>,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub demand: Demand,
}

impl Scenario {
    pub fn new(dt: f64, horizon: usize) -> Self {
        Scenario {
            schema: SCHEMA_VERSION,
            name: None,
            dt,
            horizon,
            links: Vec::new(),
            nodes: Vec::new(),
            demand: Demand {
                smooth_window: 1,
                profiles: Vec::new(),
            },
        }
    }

    pub fn link(&self, id: LinkId) -> Option<&LinkParams> {
        self.links.iter().find(|l| l.id == id)
    }

    pub fn link_mut(&mut self, id: LinkId) -> Option<&mut LinkParams> {
        self.links.iter_mut().find(|l| l.id == id)
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut NodeSpec> {
        self.nodes.iter_mut().find(|n| n.id == id)
    }

    pub fn road_links(&self) -> impl Iterator<Item = &LinkParams> {
        self.links.iter().filter(|l| l.kind.is_road())
    }

    pub fn add_segment(&mut self, built: BuiltSegment) {
        self.links.extend(built.links);
        self.nodes.extend(built.nodes);
    }

    /// Desired inflow of an origin at every simulated step, after smoothing
    /// and resampling from the profile interval to `dt`.
    pub fn demand_series(&self, origin: LinkId) -> Vec<f64> {
        let steps = self.horizon;
        let Some(p) = self.demand.profiles.iter().find(|p| p.origin == origin) else {
            return vec![0.0; steps];
        };
        if p.rates.is_empty() {
            return vec![0.0; steps];
        }
        let smoothed = block_average(&p.rates, self.demand.smooth_window);
        let interval = p.interval.unwrap_or(self.dt);
        (0..steps)
            .map(|k| {
                let idx = ((k as f64 * self.dt) / interval + 1e-9).floor() as usize;
                smoothed[idx.min(smoothed.len() - 1)]
            })
            .collect()
    }

    /// Re-grid every step-indexed input to a new step length.
    pub fn with_dt(&self, new_dt: f64) -> Scenario {
        let mut s = self.clone();
        let span = (self.horizon as f64 * self.dt / new_dt).round() as usize;
        let old = self.dt;
        for l in &mut s.links {
            l.free_flow_speed = l.free_flow_speed.resample(old, new_dt, span);
            if let Some(q) = &l.saturation_flow {
                l.saturation_flow = Some(q.resample(old, new_dt, span));
            }
        }
        for n in &mut s.nodes {
            for g in &mut n.green {
                g.fraction = g.fraction.resample(old, new_dt, span);
            }
        }
        for p in &mut s.demand.profiles {
            p.interval.get_or_insert(old);
        }
        s.dt = new_dt;
        s.horizon = span;
        s
    }
}
