//! Root-mean-square deviation between two traces.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::MetricError;
use crate::io::trace::{Quantity, TraceSet};
use crate::network::LinkId;

/// `sqrt(mean((x - ψ)²))`.
pub fn epsilon(x: &[f64], psi: &[f64]) -> Result<f64, MetricError> {
    if x.len() != psi.len() {
        return Err(MetricError::LengthMismatch(x.len(), psi.len()));
    }
    if x.is_empty() {
        return Err(MetricError::Empty);
    }
    let sum: f64 = x.iter().zip(psi).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sum / x.len() as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinkComparison {
    pub link: LinkId,
    /// One value per compared quantity, in the report's quantity order.
    pub epsilon: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub quantities: Vec<String>,
    pub links: Vec<LinkComparison>,
    pub mean: Vec<f64>,
    /// Population standard deviation over links.
    pub std_dev: Vec<f64>,
}

impl ComparisonReport {
    pub fn max(&self) -> f64 {
        self.links
            .iter()
            .flat_map(|l| l.epsilon.iter().copied())
            .fold(0.0, f64::max)
    }

    /// Plain-text table. Links are grouped under `groups[link]` when given,
    /// otherwise listed in id order.
    pub fn render(&self, groups: Option<&BTreeMap<LinkId, String>>) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<12}", "link");
        for q in &self.quantities {
            let _ = write!(out, "{q:>14}");
        }
        out.push('\n');

        let mut ordered: Vec<(&str, &LinkComparison)> = self
            .links
            .iter()
            .map(|l| {
                let g = groups.and_then(|m| m.get(&l.link)).map_or("", String::as_str);
                (g, l)
            })
            .collect();
        ordered.sort_by(|a, b| a.0.cmp(b.0).then(a.1.link.cmp(&b.1.link)));

        let mut current = None;
        for (g, l) in ordered {
            if groups.is_some() && current != Some(g) {
                let _ = writeln!(out, "[{}]", if g.is_empty() { "other" } else { g });
                current = Some(g);
            }
            let _ = write!(out, "{:<12}", l.link.to_string());
            for v in &l.epsilon {
                let _ = write!(out, "{v:>14.6}");
            }
            out.push('\n');
        }
        for (name, row) in [("mean", &self.mean), ("std", &self.std_dev)] {
            let _ = write!(out, "{name:<12}");
            for v in row {
                let _ = write!(out, "{v:>14.6}");
            }
            out.push('\n');
        }
        out
    }
}

/// Per-link ε of each quantity between two traces on the same grid.
pub fn compare(a: &TraceSet, b: &TraceSet, quantities: &[Quantity]) -> Result<ComparisonReport, MetricError> {
    if a.dt != b.dt {
        return Err(MetricError::GridMismatch(format!("dt {} vs {}", a.dt, b.dt)));
    }
    if a.steps() != b.steps() {
        return Err(MetricError::GridMismatch(format!("{} vs {} steps", a.steps(), b.steps())));
    }
    let links = a.links();
    if links != b.links() {
        return Err(MetricError::GridMismatch("traces cover different links".into()));
    }
    if links.is_empty() {
        return Err(MetricError::Empty);
    }

    let mut rows = Vec::with_capacity(links.len());
    for link in &links {
        let mut eps = Vec::with_capacity(quantities.len());
        for q in quantities {
            eps.push(epsilon(&a.series(*link, *q), &b.series(*link, *q))?);
        }
        rows.push(LinkComparison {
            link: *link,
            epsilon: eps,
        });
    }
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..quantities.len())
        .map(|c| rows.iter().map(|r| r.epsilon[c]).sum::<f64>() / n)
        .collect();
    let std_dev = (0..quantities.len())
        .map(|c| {
            let m = mean[c];
            (rows.iter().map(|r| (r.epsilon[c] - m).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect();
    Ok(ComparisonReport {
        quantities: quantities.iter().map(|q| q.name().to_string()).collect(),
        links: rows,
        mean,
        std_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::trace::TraceRow;

    #[test]
    fn epsilon_identities() {
        let x = [1.0, 2.0, 4.0, 8.0];
        assert_eq!(epsilon(&x, &x).unwrap(), 0.0);
        let shifted: Vec<f64> = x.iter().map(|v| v - 2.5).collect();
        assert!((epsilon(&x, &shifted).unwrap() - 2.5).abs() < 1e-12);
        assert!(matches!(epsilon(&x, &x[..2]), Err(MetricError::LengthMismatch(4, 2))));
        assert!(matches!(epsilon(&[], &[]), Err(MetricError::Empty)));
    }

    fn trace(offset: f64) -> TraceSet {
        let mut rows = Vec::new();
        for step in 1..=4 {
            for link in [3, 7] {
                rows.push(TraceRow {
                    step,
                    link: LinkId(link),
                    n_in: step as f64 + offset,
                    n_qu: 0.0,
                    n_out: 0.0,
                    q_in: 0.0,
                    q_out: 0.0,
                    queue_length: 0.0,
                    queue_density: 0.0,
                });
            }
        }
        TraceSet { dt: 10.0, rows }
    }

    #[test]
    fn compare_offset_trace() {
        let r = compare(&trace(0.0), &trace(1.0), &[Quantity::NIn, Quantity::NOut]).unwrap();
        assert!(r.links.iter().all(|l| l.epsilon == vec![1.0, 0.0]));
        assert_eq!(r.mean, vec![1.0, 0.0]);
        assert_eq!(r.std_dev, vec![0.0, 0.0]);
        let groups: BTreeMap<_, _> = [(LinkId(3), "west".to_string())].into_iter().collect();
        let text = r.render(Some(&groups));
        assert!(text.contains("[west]") && text.contains("[other]"), "{text}");
    }

    #[test]
    fn compare_rejects_grid_mismatch() {
        let mut b = trace(0.0);
        b.dt = 5.0;
        assert!(matches!(compare(&trace(0.0), &b, &Quantity::ALL), Err(MetricError::GridMismatch(_))));
    }
}
