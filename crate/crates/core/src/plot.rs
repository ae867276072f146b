//! Deterministic, self-contained SVG renderings of evaluation runs:
//! obstacle contour rings, oracle trajectories, closed-loop policy rollouts,
//! and target markers, drawn over the first two state components.

use crate::error::Result;
use crate::eval::EvalDetail;
use crate::problems::{ControlProblem, Obstacle};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const CANVAS: f64 = 640.0;
const MARGIN: f64 = 48.0;

struct Frame {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Frame {
    fn fit(details: &[EvalDetail], problem: &ControlProblem) -> Frame {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut cover = |x: f64, y: f64| {
            lo[0] = lo[0].min(x);
            hi[0] = hi[0].max(x);
            lo[1] = lo[1].min(y);
            hi[1] = hi[1].max(y);
        };
        for d in details {
            cover(d.task.target[0], d.task.target[1]);
            for o in &d.task.obstacles {
                cover(o.center[0] - 2.0 * o.width, o.center[1] - 2.0 * o.width);
                cover(o.center[0] + 2.0 * o.width, o.center[1] + 2.0 * o.width);
            }
            for pr in &d.policy_rollouts {
                for s in &pr.rollout.states {
                    cover(s[0], s[1]);
                }
            }
            for t in &d.oracle_trajectories {
                for s in &t.states {
                    cover(s[0], s[1]);
                }
            }
        }
        if problem.fixed_obstacle {
            cover(-1.0, -1.0);
            cover(1.0, 1.0);
        }
        if !lo[0].is_finite() {
            (lo, hi) = ([-3.0, -3.0], [3.0, 3.0]);
        }
        // pad and keep a square aspect so circles stay circles
        let span = ((hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9)) * 1.1;
        let cx = 0.5 * (lo[0] + hi[0]);
        let cy = 0.5 * (lo[1] + hi[1]);
        Frame {
            lo: [cx - span / 2.0, cy - span / 2.0],
            hi: [cx + span / 2.0, cy + span / 2.0],
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.lo[0]) / (self.hi[0] - self.lo[0]) * (CANVAS - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        // SVG y grows downward
        CANVAS - MARGIN - (y - self.lo[1]) / (self.hi[1] - self.lo[1]) * (CANVAS - 2.0 * MARGIN)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn polyline(out: &mut String, frame: &Frame, states: &[Vec<f64>], style: &str) {
    let points: Vec<String> = states
        .iter()
        .map(|s| format!("{},{}", fmt(frame.px(s[0])), fmt(frame.py(s[1]))))
        .collect();
    let _ = writeln!(out, r#"<polyline points="{}" {} fill="none"/>"#, points.join(" "), style);
}

fn contour_rings(out: &mut String, frame: &Frame, center: [f64; 2], width: f64) {
    // level sets at fractions of the peak: r = width * sqrt(2 ln(1/f))
    for f in [0.8, 0.5, 0.2] {
        let r = width * (2.0 * (1.0f64 / f).ln()).sqrt();
        let rx = r / (frame.hi[0] - frame.lo[0]) * (CANVAS - 2.0 * MARGIN);
        let _ = writeln!(
            out,
            r##"<circle cx="{}" cy="{}" r="{}" stroke="#b44" stroke-width="1" fill="none" opacity="0.6"/>"##,
            fmt(frame.px(center[0])),
            fmt(frame.py(center[1])),
            fmt(rx),
        );
    }
}

/// Renders one task group (several tasks overlaid) to an SVG string.
pub fn render_group_svg(details: &[EvalDetail], problem: &ControlProblem, title: &str) -> String {
    let frame = Frame::fit(details, problem);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{c}" height="{c}" viewBox="0 0 {c} {c}">"#,
        c = CANVAS as u64
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    // axes box
    let _ = writeln!(
        out,
        r##"<rect x="{m}" y="{m}" width="{w}" height="{w}" stroke="#333" stroke-width="1" fill="none"/>"##,
        m = fmt(MARGIN),
        w = fmt(CANVAS - 2.0 * MARGIN),
    );
    let _ = writeln!(
        out,
        r##"<text x="{}" y="24" font-family="monospace" font-size="14" fill="#333">{}</text>"##,
        fmt(MARGIN),
        title
    );
    // axis extent labels
    let _ = writeln!(
        out,
        r##"<text x="{}" y="{}" font-family="monospace" font-size="10" fill="#666">({}, {})</text>"##,
        fmt(MARGIN),
        fmt(CANVAS - MARGIN + 14.0),
        fmt(frame.lo[0]),
        fmt(frame.lo[1]),
    );
    let _ = writeln!(
        out,
        r##"<text x="{}" y="{}" font-family="monospace" font-size="10" fill="#666" text-anchor="end">({}, {})</text>"##,
        fmt(CANVAS - MARGIN),
        fmt(MARGIN - 6.0),
        fmt(frame.hi[0]),
        fmt(frame.hi[1]),
    );

    // obstacles: the point-mass bump sits at the origin; task obstacles vary
    if problem.fixed_obstacle {
        contour_rings(&mut out, &frame, [0.0, 0.0], (1.0f64 / 2.5).sqrt());
    }
    for d in details {
        for o in &d.task.obstacles {
            let Obstacle { center, width, .. } = *o;
            contour_rings(&mut out, &frame, center, width);
        }
    }

    for d in details {
        for t in &d.oracle_trajectories {
            polyline(
                &mut out,
                &frame,
                &t.states,
                r##"stroke="#888" stroke-width="1.5" stroke-dasharray="5,3""##,
            );
        }
        for pr in &d.policy_rollouts {
            polyline(&mut out, &frame, &pr.rollout.states, r##"stroke="#26c" stroke-width="1.5""##);
        }
        // target cross
        let (tx, ty) = (frame.px(d.task.target[0]), frame.py(d.task.target[1]));
        let _ = writeln!(
            out,
            r##"<path d="M {} {} L {} {} M {} {} L {} {}" stroke="#181" stroke-width="2"/>"##,
            fmt(tx - 6.0),
            fmt(ty - 6.0),
            fmt(tx + 6.0),
            fmt(ty + 6.0),
            fmt(tx - 6.0),
            fmt(ty + 6.0),
            fmt(tx + 6.0),
            fmt(ty - 6.0),
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Writes one SVG per (group key, details) pair and returns the file list.
pub fn emit_svg_plots(
    groups: &[(String, Vec<EvalDetail>)],
    problem: &ControlProblem,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut files = Vec::with_capacity(groups.len());
    for (name, details) in groups {
        let svg = render_group_svg(details, problem, name);
        let path = out_dir.join(format!("{name}.svg"));
        std::fs::write(&path, svg)?;
        files.push(path);
    }
    Ok(files)
}
