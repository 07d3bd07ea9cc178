//! Per-step, per-link simulation output and its CSV form.
//!
//! The file starts with a metadata line `# lqm-trace schema=1 dt=<seconds>`
//! followed by a fixed header row and one row per `(step, link)`.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::IoError;
use crate::network::LinkId;

pub const TRACE_SCHEMA: u32 = 1;
pub const TRACE_HEADER: &str = "step,link,n_in,n_qu,n_out,q_in,q_out,queue_length,queue_density";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub link: LinkId,
    pub n_in: f64,
    pub n_qu: f64,
    pub n_out: f64,
    pub q_in: f64,
    pub q_out: f64,
    pub queue_length: f64,
    pub queue_density: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quantity {
    NIn,
    NQu,
    NOut,
    QIn,
    QOut,
    QueueLength,
    QueueDensity,
}

impl Quantity {
    pub const ALL: [Quantity; 7] = [
        Quantity::NIn,
        Quantity::NQu,
        Quantity::NOut,
        Quantity::QIn,
        Quantity::QOut,
        Quantity::QueueLength,
        Quantity::QueueDensity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::NIn => "n_in",
            Quantity::NQu => "n_qu",
            Quantity::NOut => "n_out",
            Quantity::QIn => "q_in",
            Quantity::QOut => "q_out",
            Quantity::QueueLength => "queue_length",
            Quantity::QueueDensity => "queue_density",
        }
    }

    pub fn of(self, r: &TraceRow) -> f64 {
        match self {
            Quantity::NIn => r.n_in,
            Quantity::NQu => r.n_qu,
            Quantity::NOut => r.n_out,
            Quantity::QIn => r.q_in,
            Quantity::QOut => r.q_out,
            Quantity::QueueLength => r.queue_length,
            Quantity::QueueDensity => r.queue_density,
        }
    }

    fn of_mut(self, r: &mut TraceRow) -> &mut f64 {
        match self {
            Quantity::NIn => &mut r.n_in,
            Quantity::NQu => &mut r.n_qu,
            Quantity::NOut => &mut r.n_out,
            Quantity::QIn => &mut r.q_in,
            Quantity::QOut => &mut r.q_out,
            Quantity::QueueLength => &mut r.queue_length,
            Quantity::QueueDensity => &mut r.queue_density,
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Quantity::ALL.iter().map(|q| q.name()).collect();
                format!("unknown quantity `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceSet {
    pub dt: f64,
    /// Sorted by `(step, link)`.
    pub rows: Vec<TraceRow>,
}

/// Round to 12 significant digits, the precision traces are stored at.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap()
}

impl TraceSet {
    pub fn links(&self) -> Vec<LinkId> {
        self.rows.iter().map(|r| r.link).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn steps(&self) -> usize {
        self.rows.last().map_or(0, |r| r.step)
    }

    pub fn series(&self, link: LinkId, q: Quantity) -> Vec<f64> {
        self.rows.iter().filter(|r| r.link == link).map(|r| q.of(r)).collect()
    }

    pub fn link_rows(&self, link: LinkId) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(move |r| r.link == link)
    }

    /// The trace as it reads back from a CSV file.
    pub fn rounded(&self) -> TraceSet {
        let mut out = self.clone();
        for r in &mut out.rows {
            for q in Quantity::ALL {
                let v = q.of_mut(r);
                *v = round_sig(*v);
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut w = BufWriter::new(w);
        writeln!(w, "# lqm-trace schema={TRACE_SCHEMA} dt={}", self.dt)?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(TRACE_HEADER.split(','))?;
        for r in &self.rows {
            let mut rec = vec![r.step.to_string(), r.link.to_string()];
            rec.extend(Quantity::ALL.iter().map(|q| round_sig(q.of(r)).to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let f = File::create(path).map_err(|source| IoError::Io {
            path: path.into(),
            source,
        })?;
        self.write_csv(f).map_err(|e| IoError::Csv {
            path: path.into(),
            line: 0,
            message: e.to_string(),
        })
    }

    pub fn read_csv<R: Read>(r: R, path: &Path) -> Result<TraceSet, IoError> {
        let csv_err = |line: u64, message: String| IoError::Csv {
            path: path.into(),
            line,
            message,
        };
        let mut reader = BufReader::new(r);
        let mut meta = String::new();
        reader
            .read_line(&mut meta)
            .map_err(|source| IoError::Io { path: path.into(), source })?;
        let dt = parse_meta(meta.trim()).map_err(|m| csv_err(1, m))?;

        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers().map_err(|e| csv_err(2, e.to_string()))?;
        let found = header.iter().collect::<Vec<_>>().join(",");
        if found != TRACE_HEADER {
            return Err(IoError::Header {
                expected: TRACE_HEADER.into(),
                found,
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i as u64 + 3;
            let rec = rec.map_err(|e| csv_err(line, e.to_string()))?;
            let num = |col: usize| -> Result<f64, IoError> {
                rec[col]
                    .parse::<f64>()
                    .map_err(|_| csv_err(line, format!("column `{}`: bad number `{}`", header_name(col), &rec[col])))
            };
            let step = rec[0]
                .parse()
                .map_err(|_| csv_err(line, format!("column `step`: bad integer `{}`", &rec[0])))?;
            let link = rec[1]
                .parse()
                .map(LinkId)
                .map_err(|_| csv_err(line, format!("column `link`: bad integer `{}`", &rec[1])))?;
            rows.push(TraceRow {
                step,
                link,
                n_in: num(2)?,
                n_qu: num(3)?,
                n_out: num(4)?,
                q_in: num(5)?,
                q_out: num(6)?,
                queue_length: num(7)?,
                queue_density: num(8)?,
            });
        }
        if rows.windows(2).any(|w| (w[0].step, w[0].link) >= (w[1].step, w[1].link)) {
            return Err(csv_err(0, "rows must be sorted by (step, link) without duplicates".into()));
        }
        Ok(TraceSet { dt, rows })
    }

    pub fn load(path: &Path) -> Result<TraceSet, IoError> {
        let f = File::open(path).map_err(|source| IoError::Io {
            path: path.into(),
            source,
        })?;
        Self::read_csv(f, path)
    }
}

fn header_name(col: usize) -> &'static str {
    TRACE_HEADER.split(',').nth(col).unwrap_or("?")
}

fn parse_meta(line: &str) -> Result<f64, String> {
    let rest = line
        .strip_prefix("# lqm-trace ")
        .ok_or_else(|| format!("missing trace metadata line, found `{line}`"))?;
    let mut schema = None;
    let mut dt = None;
    for part in rest.split_whitespace() {
        match part.split_once('=') {
            Some(("schema", v)) => schema = v.parse::<u32>().ok(),
            Some(("dt", v)) => dt = v.parse::<f64>().ok(),
            _ => return Err(format!("unexpected metadata field `{part}`")),
        }
    }
    match schema {
        Some(TRACE_SCHEMA) => {}
        Some(other) => return Err(format!("unsupported trace schema {other}, expected {TRACE_SCHEMA}")),
        None => return Err("trace metadata lacks a schema version".into()),
    }
    dt.ok_or_else(|| "trace metadata lacks dt".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TraceSet {
        let mut rows = Vec::new();
        for step in 1..=3 {
            for link in [1, 2] {
                let x = step as f64 / 3.0 + link as f64;
                rows.push(TraceRow {
                    step,
                    link: LinkId(link),
                    n_in: x,
                    n_qu: x / 2.0,
                    n_out: x / 3.0,
                    q_in: 0.1,
                    q_out: 1e-7 * x,
                    queue_length: 12.5,
                    queue_density: 0.1,
                });
            }
        }
        TraceSet { dt: 10.0, rows }
    }

    #[test]
    fn csv_round_trip_is_lossless_at_storage_precision() {
        let t = sample();
        let text = t.to_csv_string();
        assert!(text.starts_with("# lqm-trace schema=1 dt=10\n"));
        let back = TraceSet::read_csv(text.as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(back, t.rounded());
        for (a, b) in back.rows.iter().zip(&t.rows) {
            assert!(((a.n_in - b.n_in) / b.n_in).abs() < 1e-11);
        }
        // a second pass changes nothing
        let again = TraceSet::read_csv(back.to_csv_string().as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(again, back);
    }

    #[test]
    fn rejects_wrong_header_and_schema() {
        let text = "# lqm-trace schema=1 dt=10\nstep,link,n_in\n";
        assert!(matches!(
            TraceSet::read_csv(text.as_bytes(), Path::new("mem")),
            Err(IoError::Header { .. })
        ));
        let text = format!("# lqm-trace schema=2 dt=10\n{TRACE_HEADER}\n");
        assert!(TraceSet::read_csv(text.as_bytes(), Path::new("mem")).is_err());
    }

    #[test]
    fn bad_number_names_line_and_column() {
        let text = format!("# lqm-trace schema=1 dt=10\n{TRACE_HEADER}\n1,1,0,0,x,0,0,0,0\n");
        let err = TraceSet::read_csv(text.as_bytes(), Path::new("t.csv")).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("n_out"), "{err}");
    }

    #[test]
    fn quantity_names_parse() {
        for q in Quantity::ALL {
            assert_eq!(q.name().parse::<Quantity>().unwrap(), q);
        }
        assert!("speed".parse::<Quantity>().is_err());
    }
}
