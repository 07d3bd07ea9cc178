//! Unit-aware number parsing for scenario files.
//!
//! A quantity is either a bare number (already SI: m, m/s, veh/m, veh/s, s)
//! or a string `"<value> <unit>"`. Only the units in each kind's table are
//! accepted; anything else is a schema error that names the field.

use serde::de::{self, Deserializer};
use serde::Deserialize;

use crate::series::StepSeries;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Length,
    Speed,
    Density,
    Rate,
    Time,
}

impl Kind {
    fn table(self) -> &'static [(&'static str, f64)] {
        match self {
            Kind::Length => &[("m", 1.0), ("km", 1000.0)],
            Kind::Speed => &[("m/s", 1.0), ("km/h", 1.0 / 3.6)],
            Kind::Density => &[("veh/m", 1.0), ("veh/km", 1e-3)],
            Kind::Rate => &[("veh/s", 1.0)],
            Kind::Time => &[("s", 1.0)],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Kind::Length => "length",
            Kind::Speed => "speed",
            Kind::Density => "density",
            Kind::Rate => "rate",
            Kind::Time => "time",
        }
    }
}

/// Parse `"<value> <unit>"` into SI.
pub fn parse_quantity(text: &str, kind: Kind) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse number in `{text}`"))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok(value);
    }
    kind.table()
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, f)| value * f)
        .ok_or_else(|| {
            let allowed: Vec<_> = kind.table().iter().map(|(u, _)| *u).collect();
            format!(
                "unsupported {} unit `{unit}` (allowed: {})",
                kind.name(),
                allowed.join(", ")
            )
        })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawQuantity {
    Num(f64),
    Text(String),
}

impl RawQuantity {
    fn resolve(self, kind: Kind) -> Result<f64, String> {
        match self {
            RawQuantity::Num(v) => Ok(v),
            RawQuantity::Text(s) => parse_quantity(&s, kind),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawSeries {
    One(RawQuantity),
    Many(Vec<RawQuantity>),
}

impl RawSeries {
    fn resolve(self, kind: Kind) -> Result<StepSeries, String> {
        match self {
            RawSeries::One(q) => Ok(StepSeries::constant(q.resolve(kind)?)),
            RawSeries::Many(v) if v.is_empty() => Err("series must not be empty".into()),
            RawSeries::Many(v) => v
                .into_iter()
                .map(|q| q.resolve(kind))
                .collect::<Result<Vec<_>, _>>()
                .map(StepSeries::from_steps),
        }
    }
}

fn scalar<'de, D: Deserializer<'de>>(d: D, kind: Kind) -> Result<f64, D::Error> {
    RawQuantity::deserialize(d)?.resolve(kind).map_err(de::Error::custom)
}

fn series<'de, D: Deserializer<'de>>(d: D, kind: Kind) -> Result<StepSeries, D::Error> {
    RawSeries::deserialize(d)?.resolve(kind).map_err(de::Error::custom)
}

fn vector<'de, D: Deserializer<'de>>(d: D, kind: Kind) -> Result<Vec<f64>, D::Error> {
    Vec::<RawQuantity>::deserialize(d)?
        .into_iter()
        .map(|q| q.resolve(kind))
        .collect::<Result<_, _>>()
        .map_err(de::Error::custom)
}

pub fn length<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    scalar(d, Kind::Length)
}

pub fn speed<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    scalar(d, Kind::Speed)
}

pub fn density<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    scalar(d, Kind::Density)
}

pub fn time<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    scalar(d, Kind::Time)
}

pub fn opt_speed<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    scalar(d, Kind::Speed).map(Some)
}

pub fn opt_length<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    scalar(d, Kind::Length).map(Some)
}

pub fn opt_time<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    scalar(d, Kind::Time).map(Some)
}

pub fn speed_series<'de, D: Deserializer<'de>>(d: D) -> Result<StepSeries, D::Error> {
    series(d, Kind::Speed)
}

/// Per-movement speed profiles, e.g. `{"L": "4 m/s", "T": [11, 11, 3]}`.
pub fn speed_series_map<'de, D, K>(d: D) -> Result<std::collections::BTreeMap<K, StepSeries>, D::Error>
where
    D: Deserializer<'de>,
    K: Deserialize<'de> + Ord,
{
    std::collections::BTreeMap::<K, RawSeries>::deserialize(d)?
        .into_iter()
        .map(|(k, v)| v.resolve(Kind::Speed).map(|s| (k, s)))
        .collect::<Result<_, _>>()
        .map_err(de::Error::custom)
}

pub fn opt_rate_series<'de, D: Deserializer<'de>>(d: D) -> Result<Option<StepSeries>, D::Error> {
    series(d, Kind::Rate).map(Some)
}

pub fn rate_vec<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    vector(d, Kind::Rate)
}
