//! Static SVG plots of one link's trace: cumulative curves on top, queue
//! length below, sharing the time axis.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use lqm_core::{LinkId, Quantity, TraceSet};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 560.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 730.0;
const CURVES: (f64, f64) = (40.0, 270.0);
const QUEUE: (f64, f64) = (330.0, 510.0);

const SERIES: [(Quantity, &str, &str); 3] = [
    (Quantity::NIn, "N_in", "#1f77b4"),
    (Quantity::NQu, "N_qu", "#ff7f0e"),
    (Quantity::NOut, "N_out", "#2ca02c"),
];

/// Tick positions covering `[0, max]` at a 1-2-5 spacing.
fn ticks(max: f64) -> Vec<f64> {
    if max <= 0.0 {
        return vec![0.0];
    }
    let raw = max / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| *s >= raw).unwrap();
    (0..).map(|i| i as f64 * step).take_while(|t| *t <= max + step * 1e-9).collect()
}

fn label(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

struct Panel {
    top: f64,
    bottom: f64,
    t_max: f64,
    y_max: f64,
}

impl Panel {
    fn x(&self, t: f64) -> f64 {
        LEFT + (RIGHT - LEFT) * t / self.t_max
    }

    fn y(&self, v: f64) -> f64 {
        self.bottom - (self.bottom - self.top) * v / self.y_max
    }

    fn axes(&self, out: &mut String, title: &str, unit: &str) {
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            self.top,
            RIGHT - LEFT,
            self.bottom - self.top
        );
        let _ = writeln!(out, r#"<text x="{LEFT}" y="{}" font-size="13">{title}</text>"#, self.top - 8.0);
        for t in ticks(self.y_max) {
            let y = self.y(t);
            let _ = writeln!(
                out,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{RIGHT}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"##,
                LEFT - 6.0,
                y + 4.0,
                label(t)
            );
        }
        for t in ticks(self.t_max) {
            let x = self.x(t);
            let _ = writeln!(
                out,
                r#"<text x="{x:.2}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
                self.bottom + 16.0,
                label(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="16" y="{:.2}" font-size="11" transform="rotate(-90 16 {:.2})" text-anchor="middle">{unit}</text>"#,
            (self.top + self.bottom) / 2.0,
            (self.top + self.bottom) / 2.0
        );
    }

    fn line(&self, out: &mut String, times: &[f64], values: &[f64], colour: &str) {
        let points: Vec<String> = times
            .iter()
            .zip(values)
            .map(|(t, v)| format!("{:.2},{:.2}", self.x(*t), self.y(*v)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
    }
}

/// SVG document for `link`, or `None` if the trace has no rows for it.
pub fn link_svg(trace: &TraceSet, link: LinkId) -> Option<String> {
    let rows: Vec<_> = trace.link_rows(link).collect();
    if rows.is_empty() {
        return None;
    }
    let times: Vec<f64> = rows.iter().map(|r| r.step as f64 * trace.dt).collect();
    let t_max = times.last().copied().unwrap_or(1.0).max(trace.dt);
    let count_max = rows.iter().map(|r| r.n_in.max(r.n_qu).max(r.n_out)).fold(0.0, f64::max);
    let queue_max = rows.iter().map(|r| r.queue_length).fold(0.0, f64::max);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    let curves = Panel {
        top: CURVES.0,
        bottom: CURVES.1,
        t_max,
        y_max: if count_max > 0.0 { count_max * 1.05 } else { 1.0 },
    };
    curves.axes(&mut out, &format!("link {link}: cumulative counts"), "vehicles");
    for (i, (q, name, colour)) in SERIES.iter().enumerate() {
        let values: Vec<f64> = rows.iter().map(|r| q.of(r)).collect();
        curves.line(&mut out, &times, &values, colour);
        let x = LEFT + 12.0 + 70.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{x}" y="{}" width="10" height="10" fill="{colour}"/><text x="{}" y="{}" font-size="11">{name}</text>"#,
            CURVES.0 + 8.0,
            x + 14.0,
            CURVES.0 + 17.0
        );
    }

    let queue = Panel {
        top: QUEUE.0,
        bottom: QUEUE.1,
        t_max,
        y_max: if queue_max > 0.0 { queue_max * 1.05 } else { 1.0 },
    };
    queue.axes(&mut out, "queue length", "m");
    let lengths: Vec<f64> = rows.iter().map(|r| r.queue_length).collect();
    queue.line(&mut out, &times, &lengths, "#d62728");
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">time (s)</text>"#,
        (LEFT + RIGHT) / 2.0,
        HEIGHT - 14.0
    );
    out.push_str("</svg>\n");
    Some(out)
}

/// Writes `link-<id>.svg` into `dir` for every selected link (all links when
/// `links` is empty).
pub fn write_plots(trace: &TraceSet, dir: &Path, links: &[LinkId]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let selected = if links.is_empty() { trace.links() } else { links.to_vec() };
    let mut written = Vec::new();
    for link in selected {
        let Some(svg) = link_svg(trace, link) else {
            log::warn!("trace has no rows for link {link}; skipped");
            continue;
        };
        let path = dir.join(format!("link-{link}.svg"));
        fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lqm_core::io::builders;

    #[test]
    fn ticks_use_round_spacing() {
        assert_eq!(ticks(2000.0), vec![0.0, 500.0, 1000.0, 1500.0, 2000.0]);
        assert_eq!(ticks(9.0), vec![0.0, 2.0, 4.0, 6.0, 8.0]);
        assert_eq!(ticks(0.0), vec![0.0]);
        assert_eq!(label(0.30000000000000004), "0.3");
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let trace = lqm_core::run(&builders::builtin("single-link").unwrap()).unwrap();
        let svg = link_svg(&trace, LinkId(1)).unwrap();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(!svg.contains("NaN"));
        assert!(link_svg(&trace, LinkId(99)).is_none());
    }
}
