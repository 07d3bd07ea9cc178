//! Road-segment decomposition: a common link followed by a divider node and
//! parallel turn links, one per distinct lane group.
//!
//! Lane configurations read left to right, lanes separated by `|`. Each lane
//! lists the movements it serves (`L`, `T`, `R`). A lane in parentheses is a
//! short bay that only opens `bay_length` meters before the stop line; its
//! parent lane group is split again at that point.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{LinkId, LinkKind, LinkParams, NodeId, NodeSpec};
use crate::error::SegmentError;
use crate::io::units;
use crate::series::StepSeries;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Movement {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "T")]
    Through,
    #[serde(rename = "R")]
    Right,
}

impl Movement {
    pub fn letter(self) -> char {
        match self {
            Movement::Left => 'L',
            Movement::Through => 'T',
            Movement::Right => 'R',
        }
    }

    fn from_letter(c: char) -> Option<Self> {
        match c {
            'L' => Some(Movement::Left),
            'T' => Some(Movement::Through),
            'R' => Some(Movement::Right),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lane {
    pub movements: Vec<Movement>,
    pub bay: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LaneConfig {
    pub lanes: Vec<Lane>,
}

impl FromStr for LaneConfig {
    type Err = SegmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(LaneConfig::default());
        }
        let mut lanes = Vec::new();
        for raw in s.split('|') {
            let tok = raw.trim();
            let (body, bay) = match tok.strip_prefix('(').and_then(|t| t.strip_suffix(')')) {
                Some(inner) => (inner, true),
                None => (tok, false),
            };
            let mut movements = Vec::new();
            for c in body.chars() {
                let m = Movement::from_letter(c).ok_or_else(|| SegmentError::UnknownToken(tok.into()))?;
                if movements.contains(&m) {
                    return Err(SegmentError::UnknownToken(tok.into()));
                }
                movements.push(m);
            }
            if movements.is_empty() {
                return Err(SegmentError::UnknownToken(tok.into()));
            }
            movements.sort();
            lanes.push(Lane { movements, bay });
        }
        Ok(LaneConfig { lanes })
    }
}

impl fmt::Display for LaneConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .lanes
            .iter()
            .map(|l| {
                let body: String = l.movements.iter().map(|m| m.letter()).collect();
                if l.bay {
                    format!("({body})")
                } else {
                    body
                }
            })
            .collect();
        f.write_str(&parts.join("|"))
    }
}

impl LaneConfig {
    /// Distinct non-bay movement sets in first-appearance order, with lane counts.
    fn groups(&self) -> Vec<(Vec<Movement>, usize)> {
        let mut out: Vec<(Vec<Movement>, usize)> = Vec::new();
        for lane in self.lanes.iter().filter(|l| !l.bay) {
            match out.iter_mut().find(|(m, _)| *m == lane.movements) {
                Some(g) => g.1 += 1,
                None => out.push((lane.movements.clone(), 1)),
            }
        }
        out
    }
}

/// Movement and its fraction of a link's flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MovementShare {
    pub movement: Movement,
    pub rate: f64,
}

/// Everything needed to expand one road segment into links and nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub common_id: LinkId,
    /// Divider node between the common link and the turn links.
    pub node_id: NodeId,
    /// Total segment length in meters.
    #[serde(deserialize_with = "units::length")]
    pub length: f64,
    #[serde(deserialize_with = "units::length")]
    pub turn_length: f64,
    /// Lane configuration such as `L|T|R`, `L|T|TR` or `(L)|L|TR`.
    pub lanes: String,
    /// One id per distinct lane group, left to right.
    pub turn_ids: Vec<LinkId>,
    /// Fraction of the common link's flow taking each movement.
    pub shares: BTreeMap<Movement, f64>,
    #[serde(deserialize_with = "units::speed_series")]
    pub common_speed: StepSeries,
    #[serde(deserialize_with = "units::speed_series_map")]
    pub turn_speeds: BTreeMap<Movement, StepSeries>,
    #[serde(deserialize_with = "units::density")]
    pub jam_density: f64,
    #[serde(deserialize_with = "units::speed")]
    pub backward_wave_speed: f64,
    #[serde(default, deserialize_with = "units::opt_length", skip_serializing_if = "Option::is_none")]
    pub bay_length: Option<f64>,
    /// Divider node where a bay opens.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bay_node_id: Option<NodeId>,
    /// Ids of the two links after a bay opens: continuation of the parent
    /// lane group, then the bay group.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bay_ids: Vec<LinkId>,
}

/// A lane group that reaches the stop line and the mix of movements it carries.
#[derive(Clone, Debug, PartialEq)]
pub struct TerminalLane {
    pub link: LinkId,
    pub movements: Vec<MovementShare>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoadSegment {
    pub common_link: LinkId,
    /// Every link downstream of the common link, terminal or not.
    pub turn_links: Vec<LinkId>,
    pub divider_node: Option<NodeSpec>,
    /// Links that end at the stop line; these feed the intersection node.
    pub terminals: Vec<TerminalLane>,
    /// Sub-segment created by a bay lane.
    pub nested: Option<Box<RoadSegment>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuiltSegment {
    pub segment: RoadSegment,
    pub links: Vec<LinkParams>,
    pub nodes: Vec<NodeSpec>,
}

impl BuiltSegment {
    /// Terminal link carrying `m`, with the fraction of that link's flow it represents.
    pub fn terminal_for(&self, m: Movement) -> Vec<(LinkId, f64)> {
        self.segment
            .terminals
            .iter()
            .filter_map(|t| {
                t.movements
                    .iter()
                    .find(|s| s.movement == m)
                    .map(|s| (t.link, s.rate))
            })
            .collect()
    }
}

fn lane_speed(spec: &SegmentSpec, movements: &[Movement]) -> Result<StepSeries, SegmentError> {
    let mut profiles = Vec::new();
    for m in movements {
        profiles.push(
            spec.turn_speeds
                .get(m)
                .ok_or(SegmentError::MissingParams(m.letter()))?,
        );
    }
    if profiles.len() == 1 {
        return Ok(profiles[0].clone());
    }
    // vehicles in a shared lane travel together at the slowest movement's speed
    let span = profiles.iter().map(|p| p.len()).max().unwrap_or(1);
    Ok(StepSeries::from_steps(
        (0..span)
            .map(|k| profiles.iter().map(|p| p.at(k)).fold(f64::INFINITY, f64::min))
            .collect(),
    ))
}

pub fn build_segment(spec: &SegmentSpec) -> Result<BuiltSegment, SegmentError> {
    let config: LaneConfig = spec.lanes.parse()?;
    let road = |id: LinkId, kind: LinkKind, length: f64, speed: StepSeries| LinkParams {
        id,
        kind,
        label: None,
        length,
        jam_density: spec.jam_density,
        backward_wave_speed: spec.backward_wave_speed,
        free_flow_speed: speed,
        min_speed: None,
        saturation_flow: None,
    };

    let groups = config.groups();
    if groups.is_empty() {
        let mut common = road(spec.common_id, LinkKind::Common, spec.length, spec.common_speed.clone());
        common.label = spec.label.clone();
        return Ok(BuiltSegment {
            segment: RoadSegment {
                common_link: spec.common_id,
                turn_links: Vec::new(),
                divider_node: None,
                terminals: Vec::new(),
                nested: None,
            },
            links: vec![common],
            nodes: Vec::new(),
        });
    }

    if !(spec.turn_length < spec.length) {
        return Err(SegmentError::TurnTooLong {
            turn: spec.turn_length,
            segment: spec.length,
        });
    }
    if spec.turn_ids.len() != groups.len() {
        return Err(SegmentError::IdCount {
            config: spec.lanes.clone(),
            needed: groups.len(),
            given: spec.turn_ids.len(),
        });
    }

    // lanes per movement, used to split each movement's flow across the groups serving it
    let mut lanes_per: BTreeMap<Movement, usize> = BTreeMap::new();
    for (ms, count) in &groups {
        for m in ms {
            *lanes_per.entry(*m).or_default() += count;
        }
    }
    for m in lanes_per.keys() {
        if !spec.shares.contains_key(m) {
            return Err(SegmentError::MissingRate(m.letter()));
        }
    }
    for (m, r) in &spec.shares {
        if *r > 0.0 && !lanes_per.contains_key(m) {
            return Err(SegmentError::Unsupported {
                config: spec.lanes.clone(),
                reason: format!("movement {} has a turning rate but no lane", m.letter()),
            });
        }
    }

    let bays: Vec<&Lane> = config.lanes.iter().filter(|l| l.bay).collect();
    let bay_group = match bays.first() {
        None => None,
        Some(first) => {
            if bays.iter().any(|b| b.movements != first.movements) {
                return Err(SegmentError::Unsupported {
                    config: spec.lanes.clone(),
                    reason: "bay lanes with different movements".into(),
                });
            }
            let parent = groups
                .iter()
                .position(|(ms, _)| *ms == first.movements)
                .ok_or_else(|| SegmentError::Unsupported {
                    config: spec.lanes.clone(),
                    reason: "a bay lane needs a full-length lane with the same movements".into(),
                })?;
            let bay = spec
                .bay_length
                .ok_or_else(|| SegmentError::MissingBayLength(spec.lanes.clone()))?;
            if !(bay < spec.turn_length) || !(bay > 0.0) {
                return Err(SegmentError::BayTooLong {
                    bay,
                    turn: spec.turn_length,
                });
            }
            if spec.bay_ids.len() != 2 || spec.bay_node_id.is_none() {
                return Err(SegmentError::IdCount {
                    config: spec.lanes.clone(),
                    needed: groups.len() + 2,
                    given: groups.len() + spec.bay_ids.len(),
                });
            }
            Some((parent, bays.len(), bay))
        }
    };

    let mut common = road(
        spec.common_id,
        LinkKind::Common,
        spec.length - spec.turn_length,
        spec.common_speed.clone(),
    );
    common.label = spec.label.clone();
    let mut links = vec![common];
    let mut divider = NodeSpec::new(spec.node_id.0);
    let mut terminals = Vec::new();
    let mut nested = None;
    let mut nodes = Vec::new();

    for (gi, (ms, count)) in groups.iter().enumerate() {
        let id = spec.turn_ids[gi];
        let parts: Vec<(Movement, f64)> = ms
            .iter()
            .map(|m| (*m, spec.shares[m] * *count as f64 / lanes_per[m] as f64))
            .collect();
        let group_share: f64 = parts.iter().map(|p| p.1).sum();
        let mix: Vec<MovementShare> = parts
            .iter()
            .map(|(m, r)| MovementShare {
                movement: *m,
                rate: if group_share > 0.0 {
                    r / group_share
                } else {
                    1.0 / parts.len() as f64
                },
            })
            .collect();
        divider.connect(spec.common_id, id, group_share);
        let speed = lane_speed(spec, ms)?;

        match bay_group {
            Some((parent, bay_lanes, bay)) if parent == gi => {
                let node_id = spec.bay_node_id.unwrap();
                let [cont, side] = [spec.bay_ids[0], spec.bay_ids[1]];
                links.push(road(id, LinkKind::Common, spec.turn_length - bay, speed.clone()));
                links.push(road(cont, LinkKind::Turn, bay, speed.clone()));
                links.push(road(side, LinkKind::Turn, bay, speed));
                let total = (*count + bay_lanes) as f64;
                let mut inner = NodeSpec::new(node_id.0);
                inner.connect(id, cont, *count as f64 / total);
                inner.connect(id, side, bay_lanes as f64 / total);
                let inner_terms = vec![
                    TerminalLane {
                        link: cont,
                        movements: mix.clone(),
                    },
                    TerminalLane {
                        link: side,
                        movements: mix.clone(),
                    },
                ];
                terminals.extend(inner_terms.iter().cloned());
                nested = Some(Box::new(RoadSegment {
                    common_link: id,
                    turn_links: vec![cont, side],
                    divider_node: Some(inner.clone()),
                    terminals: inner_terms,
                    nested: None,
                }));
                nodes.push(inner);
            }
            _ => {
                links.push(road(id, LinkKind::Turn, spec.turn_length, speed));
                terminals.push(TerminalLane { link: id, movements: mix });
            }
        }
    }

    nodes.insert(0, divider.clone());
    let turn_links = links[1..].iter().map(|l| l.id).collect();
    Ok(BuiltSegment {
        segment: RoadSegment {
            common_link: spec.common_id,
            turn_links,
            divider_node: Some(divider),
            terminals,
            nested,
        },
        links,
        nodes,
    })
}
