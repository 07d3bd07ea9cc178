use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{LinkId, LinkKind, Scenario, RATE_TOLERANCE};

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub entity: String,
    pub invariant: String,
    pub step: Option<usize>,
}

impl Violation {
    fn new(entity: impl Into<String>, invariant: impl Into<String>) -> Self {
        Violation {
            entity: entity.into(),
            invariant: invariant.into(),
            step: None,
        }
    }

    fn at(mut self, k: usize) -> Self {
        self.step = Some(k);
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.invariant)?;
        if let Some(k) = self.step {
            write!(f, " at step {k}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// All structural violations of `s`. Empty iff the scenario can be simulated.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    validate_report(s).violations
}

pub fn validate_report(s: &Scenario) -> ValidationReport {
    let mut out = ValidationReport::default();
    let v = &mut out.violations;

    if !(s.dt > 0.0 && s.dt.is_finite()) {
        v.push(Violation::new("scenario", format!("dt must be > 0, got {}", s.dt)));
    }
    if s.horizon == 0 {
        out.warnings.push("horizon is 0 steps; nothing will be simulated".into());
    }

    let mut kinds: BTreeMap<LinkId, LinkKind> = BTreeMap::new();
    for l in &s.links {
        if kinds.insert(l.id, l.kind).is_some() {
            v.push(Violation::new(format!("link {}", l.id), "duplicate link id"));
        }
    }
    let mut node_ids = BTreeSet::new();
    for n in &s.nodes {
        if !node_ids.insert(n.id) {
            v.push(Violation::new(format!("node {}", n.id), "duplicate node id"));
        }
    }

    let mut short = Vec::new();
    for l in s.links.iter().filter(|l| l.kind.is_road()) {
        let e = format!("link {}", l.id);
        if !(l.length > 0.0) {
            v.push(Violation::new(&e, format!("length must be > 0, got {}", l.length)));
        }
        if !(l.jam_density > 0.0) {
            v.push(Violation::new(&e, format!("jam density must be > 0, got {}", l.jam_density)));
        }
        if !(l.backward_wave_speed > 0.0) {
            v.push(Violation::new(
                &e,
                format!("backward wave speed must be > 0, got {}", l.backward_wave_speed),
            ));
        }
        let v_min = l.v_min();
        if !(v_min > 0.0 && v_min.is_finite()) {
            v.push(Violation::new(&e, format!("minimum desired speed must be > 0, got {v_min}")));
        }
        for (k, &speed) in l.free_flow_speed.values().iter().enumerate() {
            if !(speed > 0.0 && speed.is_finite()) {
                v.push(Violation::new(&e, format!("free-flow speed must be > 0, got {speed}")).at(k));
            } else if speed < v_min {
                v.push(
                    Violation::new(&e, format!("free-flow speed {speed} below minimum desired speed {v_min}"))
                        .at(k),
                );
            }
        }
        if let Some(q) = &l.saturation_flow {
            for (k, &rate) in q.values().iter().enumerate() {
                if !(rate >= 0.0 && rate.is_finite()) {
                    v.push(Violation::new(&e, format!("saturation flow must be >= 0, got {rate}")).at(k));
                }
            }
        }
        if v_min > 0.0 && s.dt > 0.0 {
            let n_bar = ((l.length / v_min) / s.dt).ceil();
            if n_bar < 1.0 {
                v.push(Violation::new(&e, "lookback window ceil((L/v_min)/dt) must be >= 1"));
            }
            if l.free_flow_speed.is_constant() && l.length / l.speed(0) <= s.dt {
                short.push(l.id.to_string());
            }
        }
    }
    if !short.is_empty() {
        out.warnings.push(format!(
            "{} link(s) are crossed in one step or less ({}); their queue inflow uses the time-varying update",
            short.len(),
            short.join(", ")
        ));
    }

    // topology: every road link has one upstream and one downstream node
    let mut upstream: BTreeMap<LinkId, usize> = BTreeMap::new();
    let mut downstream: BTreeMap<LinkId, usize> = BTreeMap::new();
    for n in &s.nodes {
        let ne = format!("node {}", n.id);
        for id in &n.incoming {
            *downstream.entry(*id).or_default() += 1;
            match kinds.get(id) {
                None => v.push(Violation::new(&ne, format!("incoming link {id} does not exist"))),
                Some(LinkKind::Sink) => v.push(Violation::new(&ne, format!("sink {id} cannot feed a node"))),
                _ => {}
            }
        }
        for id in &n.outgoing {
            *upstream.entry(*id).or_default() += 1;
            match kinds.get(id) {
                None => v.push(Violation::new(&ne, format!("outgoing link {id} does not exist"))),
                Some(LinkKind::Origin) => {
                    v.push(Violation::new(&ne, format!("origin {id} cannot receive flow")))
                }
                _ => {}
            }
        }
        if n.incoming.is_empty() || n.outgoing.is_empty() {
            v.push(Violation::new(&ne, "node needs at least one incoming and one outgoing link"));
        }

        for t in &n.turning_rates {
            if !n.incoming.contains(&t.from) || !n.outgoing.contains(&t.to) {
                v.push(Violation::new(
                    &ne,
                    format!("turning rate {}->{} references a link outside the node", t.from, t.to),
                ));
            }
            if !(0.0..=1.0).contains(&t.rate) {
                v.push(Violation::new(
                    &ne,
                    format!("turning rate {}->{} = {} outside [0, 1]", t.from, t.to, t.rate),
                ));
            }
            if t.rate > 0.0 && !kinds.contains_key(&t.to) {
                v.push(Violation::new(&ne, format!("turning rate targets missing link {}", t.to)));
            }
        }
        for j in &n.incoming {
            let sum: f64 = n.turning_rates.iter().filter(|t| t.from == *j).map(|t| t.rate).sum();
            if (sum - 1.0).abs() > RATE_TOLERANCE {
                v.push(Violation::new(
                    format!("{ne} link {j}"),
                    format!("turning rates sum to {sum}, expected 1"),
                ));
            }
        }

        for g in &n.green {
            if !n.incoming.contains(&g.link) {
                v.push(Violation::new(&ne, format!("green fraction for non-incoming link {}", g.link)));
            }
            for (k, &b) in g.fraction.values().iter().enumerate() {
                if !(0.0..=1.0).contains(&b) {
                    v.push(Violation::new(&ne, format!("green fraction of link {} = {b} outside [0, 1]", g.link)).at(k));
                }
            }
            if kinds.get(&g.link) == Some(&LinkKind::Common)
                && g.fraction.values().iter().any(|b| *b != 1.0)
            {
                v.push(Violation::new(
                    format!("link {}", g.link),
                    "common link must not be signalized (green fraction 1)",
                ));
            }
        }

        for (ci, set) in n.conflicts.iter().enumerate() {
            let series: Vec<_> = set.iter().filter_map(|id| n.green_for(*id)).collect();
            let span = series.iter().map(|s| s.len()).max().unwrap_or(1);
            for k in 0..span {
                let sum: f64 = set
                    .iter()
                    .map(|id| n.green_for(*id).map_or(1.0, |s| s.at(k)))
                    .sum();
                if sum > 1.0 + RATE_TOLERANCE {
                    v.push(
                        Violation::new(
                            format!("{ne} conflict set {ci}"),
                            format!("conflict sum {} > 1", fmt_sum(sum)),
                        )
                        .at(k),
                    );
                    break;
                }
            }
        }
    }

    for l in &s.links {
        let e = format!("link {}", l.id);
        let up = upstream.get(&l.id).copied().unwrap_or(0);
        let down = downstream.get(&l.id).copied().unwrap_or(0);
        let (want_up, want_down) = match l.kind {
            LinkKind::Common | LinkKind::Turn => (1, 1),
            LinkKind::Origin => (0, 1),
            LinkKind::Sink => (1, 0),
        };
        if up != want_up {
            v.push(Violation::new(&e, format!("expected {want_up} upstream node(s), found {up}")));
        }
        if down != want_down {
            v.push(Violation::new(&e, format!("expected {want_down} downstream node(s), found {down}")));
        }
    }

    if s.demand.smooth_window == 0 {
        v.push(Violation::new("demand", "smoothing window must be >= 1"));
    }
    for p in &s.demand.profiles {
        let e = format!("demand for origin {}", p.origin);
        if kinds.get(&p.origin) != Some(&LinkKind::Origin) {
            v.push(Violation::new(&e, "demand must attach to an origin link"));
        }
        if let Some(i) = p.interval {
            if !(i > 0.0) {
                v.push(Violation::new(&e, format!("interval must be > 0, got {i}")));
            }
        }
        for (k, r) in p.rates.iter().enumerate() {
            if !(*r >= 0.0 && r.is_finite()) {
                v.push(Violation::new(&e, format!("rate must be >= 0, got {r}")).at(k));
            }
        }
    }

    out
}

fn fmt_sum(x: f64) -> String {
    let s = format!("{x:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
