//! Deterministic SVG plots and a text summary of a sweep.

use std::fmt::Write as _;

use crate::fit::{group_series, BoundFit};
use crate::sweep::{EigenRecord, Row};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Line {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub dashed: bool,
    pub markers: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub lines: Vec<Line>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub gamma_svg: String,
    pub eigen_svg: String,
    pub summary: String,
}

/// Log-log γ̂ against h per `(ω, p)` series with the fitted bound, the fine
/// eigenvalues against the fine mesh size, and a summary of the fit.
pub fn render_report(rows: &[Row], fit: Option<&BoundFit>, eigen: &[EigenRecord]) -> Report {
    Report {
        gamma_svg: render_svg(&gamma_plot(rows, fit)),
        eigen_svg: render_svg(&eigen_plot(eigen)),
        summary: summary(rows, fit),
    }
}

pub fn gamma_plot(rows: &[Row], fit: Option<&BoundFit>) -> Plot {
    let mut lines = Vec::new();
    for (i, ((omega, p), group)) in group_series(rows).into_iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts: Vec<&Row> = group;
        pts.sort_by(|a, b| a.h.total_cmp(&b.h));
        lines.push(Line {
            label: format!("ω={omega} p={p}"),
            points: pts.iter().map(|r| (r.h, r.gamma)).collect(),
            color,
            dashed: false,
            markers: true,
        });
        if let Some(f) = fit {
            lines.push(Line {
                label: format!("bound ω={omega} p={p}"),
                points: pts.iter().map(|r| (r.h, f.bound(r))).collect(),
                color,
                dashed: true,
                markers: false,
            });
        }
    }
    Plot {
        title: "approximation factor".into(),
        x_label: "coarse h".into(),
        y_label: "γ".into(),
        log_x: true,
        log_y: true,
        lines,
    }
}

/// One line per `(p, index)`: the fine eigenvalue against the fine mesh size,
/// deduplicated over frequencies.
pub fn eigen_plot(eigen: &[EigenRecord]) -> Plot {
    let mut keys: Vec<(usize, usize)> = Vec::new();
    for &(_, _, _, p, i, _) in eigen {
        if !keys.contains(&(p, i)) {
            keys.push((p, i));
        }
    }
    keys.sort_unstable();
    let mut lines = Vec::new();
    for (k, &(p, i)) in keys.iter().enumerate() {
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for &(_, _, fh, q, j, l) in eigen {
            if (q, j) == (p, i) && !pts.iter().any(|&(x, _)| x == fh) {
                pts.push((fh, l));
            }
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        lines.push(Line {
            label: format!("p={p} λ{}", i + 1),
            points: pts,
            color: PALETTE[p % PALETTE.len()],
            dashed: false,
            markers: k < 64,
        });
    }
    Plot {
        title: "reference eigenvalues".into(),
        x_label: "fine h".into(),
        y_label: "λ".into(),
        log_x: true,
        log_y: false,
        lines,
    }
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo > hi {
            (lo, hi) = (0.0, 1.0);
        }
        if log {
            (lo, hi) = (lo.floor(), hi.ceil().max(lo.floor() + 1.0));
        } else if hi - lo < 1e-12 * hi.abs().max(1.0) {
            (lo, hi) = (lo - 0.5, hi + 0.5);
        } else {
            let pad = 0.05 * (hi - lo);
            (lo, hi) = (lo - pad, hi + pad);
        }
        Self { lo, hi, log }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if v <= 0.0 {
                return None;
            }
            v.log10()
        } else {
            v
        };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            (self.lo as i32..=self.hi as i32)
                .map(|e| (10f64.powi(e), format!("1e{e}")))
                .collect()
        } else {
            (0..=5)
                .map(|k| {
                    let v = self.lo + (self.hi - self.lo) * k as f64 / 5.0;
                    (v, format!("{v:.3}"))
                })
                .collect()
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn render_svg(plot: &Plot) -> String {
    let all = || plot.lines.iter().flat_map(|l| l.points.iter());
    let xa = Axis::new(all().map(|p| p.0), plot.log_x);
    let ya = Axis::new(all().map(|p| p.1), plot.log_y);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |v: f64| xa.frac(v).map(|f| LEFT + f * pw);
    let sy = |v: f64| ya.frac(v).map(|f| TOP + (1.0 - f) * ph);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&plot.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (v, label) in xa.ticks() {
        if let Some(x) = sx(v) {
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#,
                TOP + ph,
                TOP + ph + 5.0,
                TOP + ph + 18.0
            );
        }
    }
    for (v, label) in ya.ticks() {
        if let Some(y) = sy(v) {
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
                LEFT - 5.0,
                LEFT - 8.0,
                y + 4.0
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&plot.y_label)
    );
    for (k, line) in plot.lines.iter().enumerate() {
        let pts: Vec<(f64, f64)> = line
            .points
            .iter()
            .filter_map(|&(x, y)| Some((sx(x)?, sy(y)?)))
            .collect();
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let dash = if line.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
            coords.join(" "),
            line.color
        );
        if line.markers {
            for (x, y) in &pts {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{}"/>"#,
                    line.color
                );
            }
        }
        let ly = TOP + 10.0 + 16.0 * k as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="1.5"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            line.color,
            lx + 26.0,
            ly + 4.0,
            escape(&line.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn summary(rows: &[Row], fit: Option<&BoundFit>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "rows: {}", rows.len());
    let Some(fit) = fit else {
        let _ = writeln!(s, "no bound fit");
        return s;
    };
    let _ = writeln!(
        s,
        "fitted C: {:.6e} ({:?} terms, cutoff omega*h/theta <= {})",
        fit.c, fit.terms, fit.cutoff
    );
    let _ = writeln!(
        s,
        "largest slack on fitted rows: {:.3e}",
        fit.max_included_slack()
    );
    for r in fit.excluded() {
        let _ = writeln!(
            s,
            "excluded (smallness): omega={} h={:.6} p={}",
            r.omega, r.h, r.p
        );
    }
    for sf in &fit.series {
        let _ = writeln!(
            s,
            "slope omega={} p={}: all {:.4} +- {:.4} ({} pts), tail {:.4} +- {:.4} ({} pts)",
            sf.omega,
            sf.p,
            sf.all.slope,
            sf.all.half_width,
            sf.all.points,
            sf.tail.slope,
            sf.tail.half_width,
            sf.tail.points
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::{fit_bound, FitOptions};

    fn rows() -> Vec<Row> {
        [0.8, 0.4, 0.2]
            .iter()
            .map(|&h| Row {
                omega: 1.0,
                h,
                p: 0,
                delta: 0.4,
                c_s: 2.5,
                gamma: 0.3 * h,
                method: "power".into(),
                iters: 5,
                bound_term1: h,
                bound_term2: 2.5 * h,
            })
            .collect()
    }

    #[test]
    fn empty_rows_give_axes() {
        let r = render_report(&[], None, &[]);
        for svg in [&r.gamma_svg, &r.eigen_svg] {
            assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
            assert!(svg.contains("<rect x="));
            assert!(!svg.contains("<polyline"));
        }
    }

    #[test]
    fn one_series_one_curve_and_bound() {
        let rows = rows();
        let fit = fit_bound(
            &rows,
            &FitOptions {
                cutoff: 10.0,
                ..FitOptions::default()
            },
        )
        .unwrap();
        let r = render_report(&rows, Some(&fit), &[]);
        assert_eq!(r.gamma_svg.matches("<polyline").count(), 2);
        assert_eq!(r.gamma_svg.matches("stroke-dasharray").count(), 2);
        assert_eq!(r.gamma_svg, render_report(&rows, Some(&fit), &[]).gamma_svg);
        assert!(r.summary.contains("slope omega=1 p=0"));
    }
}
