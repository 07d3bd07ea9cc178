//! Scenario files: JSON with explicit links and nodes plus optional road
//! segments that are expanded into links and nodes on load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::IoError;
use crate::network::{
    build_segment, Demand, LinkParams, NodeSpec, Scenario, SegmentSpec, SCHEMA_VERSION,
};
use crate::io::units;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

/// On-disk form of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "schema_version")]
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(deserialize_with = "units::time")]
    pub dt: f64,
    pub horizon: usize,
    #[serde(default)]
    pub links: Vec<LinkParams>,
    #[serde(default)]
    pub nodes: Vec<NodeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<SegmentSpec>,
    #[serde(default)]
    pub demand: Demand,
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        ScenarioFile {
            schema: s.schema,
            name: s.name.clone(),
            dt: s.dt,
            horizon: s.horizon,
            links: s.links.clone(),
            nodes: s.nodes.clone(),
            segments: Vec::new(),
            demand: s.demand.clone(),
        }
    }
}

impl ScenarioFile {
    /// Expands segments; `path` only labels errors.
    pub fn into_scenario(self, path: &Path) -> Result<Scenario, IoError> {
        if self.schema != SCHEMA_VERSION {
            return Err(IoError::Schema {
                path: path.into(),
                found: self.schema,
                expected: SCHEMA_VERSION,
            });
        }
        let mut s = Scenario {
            schema: self.schema,
            name: self.name,
            dt: self.dt,
            horizon: self.horizon,
            links: self.links,
            nodes: self.nodes,
            demand: self.demand,
        };
        for (index, seg) in self.segments.iter().enumerate() {
            let built = build_segment(seg).map_err(|source| IoError::Segment {
                path: path.into(),
                index,
                source,
            })?;
            s.add_segment(built);
        }
        Ok(s)
    }
}

pub fn parse_scenario(text: &str, path: &Path) -> Result<Scenario, IoError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        IoError::Parse {
            path: path.into(),
            field,
            line: inner.line(),
            column: inner.column(),
            message: strip_position(&inner.to_string()),
        }
    })?;
    file.into_scenario(path)
}

/// serde_json appends " at line L column C"; the error type reports those separately.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.into(),
        source,
    })?;
    parse_scenario(&text, path)
}

pub fn scenario_to_json(s: &Scenario) -> String {
    let mut text = serde_json::to_string_pretty(&ScenarioFile::from(s)).expect("scenario serializes");
    text.push('\n');
    text
}

pub fn save_scenario(s: &Scenario, path: &Path) -> Result<(), IoError> {
    fs::write(path, scenario_to_json(s)).map_err(|source| IoError::Io {
        path: path.into(),
        source,
    })
}
