//! Built-in benchmark scenarios: a four-arm signalized intersection (with
//! bottleneck and speed-drop variants), a three-intersection corridor and a
//! single link.
//!
//! The demand profiles are shape-matched trapezoids: a steady warm-up level,
//! a peak plateau, then a linear decay to zero. Their levels are chosen to
//! produce the intended congestion pattern, not fitted to field counts.

use std::collections::BTreeMap;

use crate::network::{
    build_segment, BuiltSegment, DemandProfile, LinkId, LinkKind, LinkParams, Movement, NodeId, NodeSpec,
    Scenario, SegmentSpec,
};
use crate::series::StepSeries;

pub const JAM_DENSITY: f64 = 0.1;
pub const BACKWARD_WAVE_SPEED: f64 = 20.0 / 3.6;

/// Piecewise-linear demand: `base` until `warmup_end`, `peak` until
/// `peak_end`, then linearly down to zero at `zero_at`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Trapezoid {
    pub base: f64,
    pub peak: f64,
    pub warmup_end: f64,
    pub peak_end: f64,
    pub zero_at: f64,
}

impl Trapezoid {
    pub fn new(base: f64, peak: f64) -> Self {
        Trapezoid {
            base,
            peak,
            warmup_end: 750.0,
            peak_end: 1000.0,
            zero_at: 1500.0,
        }
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        if t < self.warmup_end {
            self.base
        } else if t < self.peak_end {
            self.peak
        } else if t < self.zero_at {
            self.peak * (self.zero_at - t) / (self.zero_at - self.peak_end)
        } else {
            0.0
        }
    }

    pub fn sample(&self, dt: f64, steps: usize) -> Vec<f64> {
        (0..steps).map(|k| self.rate_at(k as f64 * dt)).collect()
    }
}

/// Movement parameters of one approach: turning share and green fraction per movement.
#[derive(Clone, Copy, Debug)]
struct Row {
    left: (f64, f64),
    through: (f64, f64),
    right: (f64, f64),
}

impl Row {
    fn share(&self, m: Movement) -> f64 {
        self.get(m).0
    }

    fn green(&self, m: Movement) -> f64 {
        self.get(m).1
    }

    fn get(&self, m: Movement) -> (f64, f64) {
        match m {
            Movement::Left => self.left,
            Movement::Through => self.through,
            Movement::Right => self.right,
        }
    }
}

const LTR: [Movement; 3] = [Movement::Left, Movement::Through, Movement::Right];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Dir {
    West,
    South,
    East,
    North,
}

impl Dir {
    fn name(self) -> &'static str {
        match self {
            Dir::West => "west",
            Dir::South => "south",
            Dir::East => "east",
            Dir::North => "north",
        }
    }

    /// Side of the intersection a vehicle leaves from, given the side it arrived at.
    fn exit(self, m: Movement) -> Dir {
        use Dir::*;
        use Movement::*;
        match (self, m) {
            (West, Through) => East,
            (West, Left) => North,
            (West, Right) => South,
            (South, Through) => North,
            (South, Left) => West,
            (South, Right) => East,
            (East, Through) => West,
            (East, Left) => South,
            (East, Right) => North,
            (North, Through) => South,
            (North, Left) => East,
            (North, Right) => West,
        }
    }

    /// Arrival side of traffic that leaves through this side going straight.
    fn opposite(self) -> Dir {
        match self {
            Dir::West => Dir::East,
            Dir::East => Dir::West,
            Dir::South => Dir::North,
            Dir::North => Dir::South,
        }
    }
}

struct SegmentParams<'a> {
    label: String,
    common_id: u32,
    node_id: u32,
    length: f64,
    turn_length: f64,
    lanes: &'a str,
    turn_ids: Vec<u32>,
    shares: BTreeMap<Movement, f64>,
    common_speed: f64,
    turn_speed: [f64; 3],
}

fn segment(p: SegmentParams) -> BuiltSegment {
    let turn_speeds = LTR
        .iter()
        .zip(p.turn_speed)
        .map(|(m, v)| (*m, StepSeries::constant(v)))
        .collect();
    let spec = SegmentSpec {
        label: Some(p.label.clone()),
        common_id: LinkId(p.common_id),
        node_id: NodeId(p.node_id),
        length: p.length,
        turn_length: p.turn_length,
        lanes: p.lanes.into(),
        turn_ids: p.turn_ids.into_iter().map(LinkId).collect(),
        shares: p.shares,
        common_speed: StepSeries::constant(p.common_speed),
        turn_speeds,
        jam_density: JAM_DENSITY,
        backward_wave_speed: BACKWARD_WAVE_SPEED,
        bay_length: None,
        bay_node_id: None,
        bay_ids: Vec::new(),
    };
    let mut built = build_segment(&spec).expect("built-in segment is well formed");
    for l in built.links.iter_mut().skip(1) {
        let m = built
            .segment
            .terminals
            .iter()
            .find(|t| t.link == l.id)
            .map(|t| t.movements.iter().map(|s| s.movement.letter()).collect::<String>())
            .unwrap_or_default();
        l.label = Some(format!("{} {m}", p.label));
    }
    built
}

fn shares_of(row: &Row, movements: &[Movement]) -> BTreeMap<Movement, f64> {
    movements.iter().map(|m| (*m, row.share(*m))).collect()
}

/// Table of turning shares and green fractions per arrival side at the
/// four-arm intersection.
fn intersection_rows(d: Dir) -> Row {
    match d {
        Dir::West | Dir::East => Row {
            left: (0.3, 0.15),
            through: (0.6, 0.38),
            right: (0.1, 1.0),
        },
        Dir::South => Row {
            left: (0.1, 0.15),
            through: (0.4, 0.23),
            right: (0.5, 1.0),
        },
        Dir::North => Row {
            left: (0.4, 0.15),
            through: (0.5, 0.23),
            right: (0.1, 1.0),
        },
    }
}

/// Link ids of the four-arm intersection.
pub mod intersection_ids {
    /// Bottleneck turn link: through movement leaving the east exit.
    pub const BOTTLENECK: u32 = 20;
    /// Common link upstream of the bottleneck.
    pub const BOTTLENECK_COMMON: u32 = 31;
    /// Common link carrying the speed-drop episode.
    pub const SPEED_DROP: u32 = 25;
    pub const CENTRAL_NODE: u32 = 1;
}

/// Options for the four-arm intersection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntersectionOptions {
    pub dt: f64,
    pub horizon: usize,
    /// Green fraction of the bottleneck turn link.
    pub bottleneck_green: f64,
    /// Speed profile of the speed-drop link as `(time s, speed m/s)` breakpoints; `None` keeps 11 m/s.
    pub speed_drop: Option<[(f64, f64); 3]>,
    /// Demand per arrival side (west, south, east, north).
    pub demand: [Trapezoid; 4],
}

impl Default for IntersectionOptions {
    fn default() -> Self {
        IntersectionOptions {
            dt: 10.0,
            horizon: 200,
            bottleneck_green: 0.38,
            speed_drop: None,
            demand: [
                Trapezoid::new(0.08, 0.11),
                Trapezoid::new(0.1, 0.16),
                Trapezoid::new(0.08, 0.11),
                Trapezoid::new(0.06, 0.08),
            ],
        }
    }
}

pub fn paper_intersection() -> Scenario {
    intersection(&IntersectionOptions::default())
}

pub fn paper_intersection_bottleneck() -> Scenario {
    let mut s = intersection(&IntersectionOptions {
        bottleneck_green: 0.1,
        ..Default::default()
    });
    s.name = Some("paper-intersection-bottleneck".into());
    s
}

pub fn paper_tfs() -> Scenario {
    let mut s = intersection(&IntersectionOptions {
        speed_drop: Some([(0.0, 11.0), (500.0, 3.0), (900.0, 9.0)]),
        ..Default::default()
    });
    s.name = Some("paper-tfs".into());
    s
}

/// Four-arm intersection: each arm is a 600 m incoming segment (500 m common
/// link, three 100 m turn links) and a mirrored outgoing segment whose turn
/// links discharge under their own green fractions into sinks.
pub fn intersection(o: &IntersectionOptions) -> Scenario {
    let mut s = Scenario::new(o.dt, o.horizon);
    s.name = Some("paper-intersection".into());
    let sides = [Dir::West, Dir::South, Dir::East, Dir::North];
    let turn_speed = [4.0, 11.0, 4.0];

    let mut central = NodeSpec::new(intersection_ids::CENTRAL_NODE);
    central.label = Some("intersection".into());
    let outgoing_common = |d: Dir| 29 + sides.iter().position(|x| *x == d).unwrap() as u32;

    for (a, d) in sides.iter().enumerate() {
        let a = a as u32;
        let row = intersection_rows(*d);
        let common = 25 + a;
        let built = segment(SegmentParams {
            label: format!("{} in", d.name()),
            common_id: common,
            node_id: 11 + a,
            length: 600.0,
            turn_length: 100.0,
            lanes: "L|T|R",
            turn_ids: vec![3 * a + 1, 3 * a + 2, 3 * a + 3],
            shares: shares_of(&row, &LTR),
            common_speed: 11.0,
            turn_speed,
        });
        for (i, m) in LTR.iter().enumerate() {
            let turn = LinkId(3 * a + 1 + i as u32);
            central.connect(turn, LinkId(outgoing_common(d.exit(*m))), 1.0);
            if row.green(*m) < 1.0 {
                central.set_green(turn, StepSeries::constant(row.green(*m)));
            }
        }
        s.add_segment(built);

        let origin = 200 + common;
        s.links.push(LinkParams::origin(origin).with_label(format!("{} origin", d.name())));
        let mut feed = NodeSpec::new(200 + a);
        feed.connect(LinkId(origin), LinkId(common), 1.0);
        s.nodes.push(feed);
        s.demand.profiles.push(DemandProfile {
            origin: LinkId(origin),
            interval: None,
            rates: o.demand[a as usize].sample(o.dt, o.horizon),
        });
    }

    // non-conflicting pairs of approaches never share a set; right turns are excluded
    let id_of = |d: Dir, m: Movement| {
        let a = sides.iter().position(|x| *x == d).unwrap() as u32;
        LinkId(3 * a + 1 + LTR.iter().position(|x| *x == m).unwrap() as u32)
    };
    for (p, q) in [(Dir::West, Dir::South), (Dir::East, Dir::North), (Dir::West, Dir::North), (Dir::East, Dir::South)] {
        central.conflicts.push(vec![
            id_of(p, Movement::Through),
            id_of(q, Movement::Through),
            id_of(p, Movement::Left),
            id_of(q, Movement::Left),
        ]);
    }
    s.nodes.push(central);

    for (a, d) in sides.iter().enumerate() {
        let a = a as u32;
        // traffic leaving through side d travels like traffic arriving from the opposite side
        let row = intersection_rows(d.opposite());
        let common = 29 + a;
        let first = 13 + 3 * a;
        let built = segment(SegmentParams {
            label: format!("{} out", d.name()),
            common_id: common,
            node_id: 21 + a,
            length: 600.0,
            turn_length: 100.0,
            lanes: "L|T|R",
            turn_ids: vec![first, first + 1, first + 2],
            shares: shares_of(&row, &LTR),
            common_speed: 11.0,
            turn_speed,
        });
        s.add_segment(built);
        let mut exit = NodeSpec::new(31 + a);
        exit.label = Some(format!("{} exit", d.name()));
        for (i, m) in LTR.iter().enumerate() {
            let turn = LinkId(first + i as u32);
            let mut green = row.green(*m);
            if turn.0 == intersection_ids::BOTTLENECK {
                green = o.bottleneck_green;
            }
            let sink = 100 + turn.0;
            s.links.push(LinkParams::sink(sink).with_label(format!("{} exit {}", d.name(), m.letter())));
            exit.connect(turn, LinkId(sink), 1.0);
            if green < 1.0 {
                exit.set_green(turn, StepSeries::constant(green));
            }
        }
        s.nodes.push(exit);
    }

    if let Some(profile) = o.speed_drop {
        let breaks: Vec<(usize, f64)> = profile
            .iter()
            .map(|(t, v)| ((t / o.dt).round() as usize, *v))
            .collect();
        let link = s.link_mut(LinkId(intersection_ids::SPEED_DROP)).unwrap();
        link.free_flow_speed = StepSeries::piecewise(&breaks);
    }
    s
}

/// Approach at one corridor intersection: arrival side, turning shares and
/// green fractions of the movements that exist.
struct Approach {
    side: Dir,
    row: Row,
    movements: Vec<Movement>,
}

fn corridor_row(d: Dir) -> Row {
    match d {
        Dir::West | Dir::East => Row {
            left: (0.3, 0.16),
            through: (0.6, 0.33),
            right: (0.1, 1.0),
        },
        Dir::South | Dir::North => Row {
            left: (0.3, 0.16),
            through: (0.6, 0.25),
            right: (0.1, 1.0),
        },
    }
}

fn corridor_approaches(i: usize) -> Vec<Approach> {
    let full = |side| Approach {
        side,
        row: corridor_row(side),
        movements: LTR.to_vec(),
    };
    match i {
        1 => vec![
            Approach {
                side: Dir::West,
                row: Row {
                    left: (0.2, 0.22),
                    through: (0.8, 0.48),
                    right: (0.0, 1.0),
                },
                movements: vec![Movement::Left, Movement::Through],
            },
            Approach {
                side: Dir::East,
                row: Row {
                    left: (0.0, 1.0),
                    through: (0.6, 0.22),
                    right: (0.4, 1.0),
                },
                movements: vec![Movement::Through, Movement::Right],
            },
            Approach {
                side: Dir::North,
                row: Row {
                    left: (0.6, 0.45),
                    through: (0.0, 1.0),
                    right: (0.4, 1.0),
                },
                movements: vec![Movement::Left, Movement::Right],
            },
        ],
        _ => vec![full(Dir::West), full(Dir::South), full(Dir::East), full(Dir::North)],
    }
}

/// Options for the corridor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorridorOptions {
    pub dt: f64,
    pub horizon: usize,
    pub demand: Trapezoid,
}

impl Default for CorridorOptions {
    fn default() -> Self {
        CorridorOptions {
            dt: 10.0,
            horizon: 200,
            demand: Trapezoid::new(0.1, 0.2),
        }
    }
}

pub fn paper_corridor() -> Scenario {
    corridor(&CorridorOptions::default())
}

/// Three signalized intersections in a west-east row; the middle one has no
/// south arm. Boundary approaches are fed by seven origins and boundary exits
/// discharge through signalized turn links into sinks.
pub fn corridor(o: &CorridorOptions) -> Scenario {
    const TURN: f64 = 60.0;
    const BOUNDARY: f64 = 460.0;
    const INTERNAL: f64 = 310.0;
    let turn_speed = [6.0, 11.0, 6.0];

    let mut s = Scenario::new(o.dt, o.horizon);
    s.name = Some("paper-corridor".into());
    let mut next_turn = 1u32;
    let mut next_common = 51u32;
    let mut next_origin = 101u32;
    let mut next_sink = 201u32;
    let mut next_node = 10u32;

    // incoming common link per (intersection, arrival side)
    let mut arrivals: BTreeMap<(usize, Dir), u32> = BTreeMap::new();
    let mut centrals: Vec<NodeSpec> = (0..3).map(|i| NodeSpec::new(1 + i as u32)).collect();
    for (i, c) in centrals.iter_mut().enumerate() {
        c.label = Some(format!("intersection {}", i + 1));
    }
    let internal = |i: usize, d: Dir| (i == 0 && d == Dir::East) || (i == 1 && d != Dir::North) || (i == 2 && d == Dir::West);
    let mut turn_links: BTreeMap<(usize, Dir, Movement), LinkId> = BTreeMap::new();

    for i in 0..3 {
        for ap in corridor_approaches(i) {
            let common = next_common;
            next_common += 1;
            let lanes: String = ap
                .movements
                .iter()
                .map(|m| m.letter().to_string())
                .collect::<Vec<_>>()
                .join("|");
            let ids: Vec<u32> = (0..ap.movements.len() as u32).map(|k| next_turn + k).collect();
            next_turn += ids.len() as u32;
            let built = segment(SegmentParams {
                label: format!("I{} {} in", i + 1, ap.side.name()),
                common_id: common,
                node_id: next_node,
                length: if internal(i, ap.side) { INTERNAL } else { BOUNDARY },
                turn_length: TURN,
                lanes: &lanes,
                turn_ids: ids.clone(),
                shares: shares_of(&ap.row, &ap.movements),
                common_speed: 11.0,
                turn_speed,
            });
            next_node += 1;
            for (m, id) in ap.movements.iter().zip(&ids) {
                turn_links.insert((i, ap.side, *m), LinkId(*id));
                if ap.row.green(*m) < 1.0 {
                    centrals[i].set_green(LinkId(*id), StepSeries::constant(ap.row.green(*m)));
                }
            }
            s.add_segment(built);
            arrivals.insert((i, ap.side), common);

            if !internal(i, ap.side) {
                let origin = next_origin;
                next_origin += 1;
                s.links.push(LinkParams::origin(origin).with_label(format!("O{}", origin - 100)));
                let mut feed = NodeSpec::new(100 + origin);
                feed.connect(LinkId(origin), LinkId(common), 1.0);
                s.nodes.push(feed);
                s.demand.profiles.push(DemandProfile {
                    origin: LinkId(origin),
                    interval: None,
                    rates: o.demand.sample(o.dt, o.horizon),
                });
            }
        }
    }

    // boundary exits: (intersection, side it leaves through)
    let exits = [
        (0, Dir::West),
        (0, Dir::South),
        (0, Dir::North),
        (1, Dir::North),
        (2, Dir::South),
        (2, Dir::North),
        (2, Dir::East),
    ];
    let mut departures: BTreeMap<(usize, Dir), u32> = BTreeMap::new();
    for (i, d) in exits {
        let common = next_common;
        next_common += 1;
        let (lanes, movements, row) = if i == 1 {
            let row = Row {
                left: (0.0, 1.0),
                through: (0.7, 0.45),
                right: (0.3, 1.0),
            };
            ("T|R", vec![Movement::Through, Movement::Right], row)
        } else {
            ("L|T|R", LTR.to_vec(), corridor_row(d.opposite()))
        };
        let ids: Vec<u32> = (0..movements.len() as u32).map(|k| next_turn + k).collect();
        next_turn += ids.len() as u32;
        let built = segment(SegmentParams {
            label: format!("I{} {} out", i + 1, d.name()),
            common_id: common,
            node_id: next_node,
            length: BOUNDARY,
            turn_length: TURN,
            lanes,
            turn_ids: ids.clone(),
            shares: shares_of(&row, &movements),
            common_speed: 11.0,
            turn_speed,
        });
        next_node += 1;
        s.add_segment(built);
        departures.insert((i, d), common);

        let mut exit = NodeSpec::new(next_node);
        next_node += 1;
        for (m, id) in movements.iter().zip(&ids) {
            let sink = next_sink;
            next_sink += 1;
            s.links.push(LinkParams::sink(sink));
            exit.connect(LinkId(*id), LinkId(sink), 1.0);
            if row.green(*m) < 1.0 {
                exit.set_green(LinkId(*id), StepSeries::constant(row.green(*m)));
            }
        }
        s.nodes.push(exit);
    }
    // internal links double as departures from the neighbouring intersection
    departures.insert((0, Dir::East), arrivals[&(1, Dir::West)]);
    departures.insert((1, Dir::West), arrivals[&(0, Dir::East)]);
    departures.insert((1, Dir::East), arrivals[&(2, Dir::West)]);
    departures.insert((2, Dir::West), arrivals[&(1, Dir::East)]);

    for ((i, side, m), id) in &turn_links {
        let to = departures[&(*i, side.exit(*m))];
        centrals[*i].connect(*id, LinkId(to), 1.0);
    }
    for (i, c) in centrals.iter_mut().enumerate() {
        let t = |d, m| turn_links[&(i, d, m)];
        if i == 1 {
            c.conflicts.push(vec![
                t(Dir::West, Movement::Left),
                t(Dir::East, Movement::Through),
                t(Dir::North, Movement::Left),
            ]);
            c.conflicts.push(vec![t(Dir::West, Movement::Through), t(Dir::North, Movement::Left)]);
        } else {
            for (p, q) in [(Dir::West, Dir::South), (Dir::East, Dir::North), (Dir::West, Dir::North), (Dir::East, Dir::South)] {
                c.conflicts.push(vec![
                    t(p, Movement::Through),
                    t(q, Movement::Through),
                    t(p, Movement::Left),
                    t(q, Movement::Left),
                ]);
            }
        }
    }
    s.nodes.extend(centrals);
    s
}

/// Options for the single-link scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleLinkOptions {
    pub dt: f64,
    pub horizon: usize,
    pub length: f64,
    pub speed: StepSeries,
    /// Desired inflow per step in veh/s.
    pub demand: Vec<f64>,
    /// Saturation flow per step in veh/s; `None` uses the critical flow.
    pub saturation_flow: Option<StepSeries>,
}

impl Default for SingleLinkOptions {
    fn default() -> Self {
        SingleLinkOptions {
            dt: 10.0,
            horizon: 200,
            length: 500.0,
            speed: StepSeries::constant(11.0),
            demand: vec![0.2],
            saturation_flow: None,
        }
    }
}

pub mod single_link_ids {
    pub const ORIGIN: u32 = 100;
    pub const LINK: u32 = 1;
    pub const SINK: u32 = 200;
}

/// One origin, one road link, one sink.
pub fn single_link(o: &SingleLinkOptions) -> Scenario {
    use single_link_ids::*;
    let mut s = Scenario::new(o.dt, o.horizon);
    s.name = Some("single-link".into());
    s.links.push(LinkParams::origin(ORIGIN));
    let mut link = LinkParams::road(LINK, LinkKind::Common, o.length, JAM_DENSITY, BACKWARD_WAVE_SPEED, o.speed.clone());
    link.saturation_flow = o.saturation_flow.clone();
    s.links.push(link);
    s.links.push(LinkParams::sink(SINK));
    let mut up = NodeSpec::new(1);
    up.connect(LinkId(ORIGIN), LinkId(LINK), 1.0);
    let mut down = NodeSpec::new(2);
    down.connect(LinkId(LINK), LinkId(SINK), 1.0);
    s.nodes = vec![up, down];
    s.demand.profiles.push(DemandProfile {
        origin: LinkId(ORIGIN),
        interval: None,
        rates: o.demand.clone(),
    });
    s
}

pub const BUILTIN_NAMES: [&str; 5] = [
    "paper-intersection",
    "paper-intersection-bottleneck",
    "paper-tfs",
    "paper-corridor",
    "single-link",
];

/// Built-in scenario by name.
pub fn builtin(name: &str) -> Option<Scenario> {
    Some(match name {
        "paper-intersection" => paper_intersection(),
        "paper-intersection-bottleneck" => paper_intersection_bottleneck(),
        "paper-tfs" => paper_tfs(),
        "paper-corridor" => paper_corridor(),
        "single-link" => single_link(&SingleLinkOptions::default()),
        _ => return None,
    })
}

/// Group label of each road link (its segment label), for grouped reports.
pub fn link_groups(s: &Scenario) -> BTreeMap<LinkId, String> {
    s.road_links()
        .map(|l| {
            let label = l.label.clone().unwrap_or_default();
            // "west in L" and "west in" both group under "west in"
            let group = match label.rsplit_once(' ') {
                Some((head, tail)) if tail.chars().all(|c| "LTR".contains(c)) && !tail.is_empty() => head.to_string(),
                _ => label,
            };
            (l.id, group)
        })
        .collect()
}
