//! `pnflow portrait`: the `(phi, psi)` vector field as a standalone SVG.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::Args;
use pnflow_core::flow_systems::{rhs_phase, rhs_submersion, PhaseFlow};
use pnflow_core::gw_space::PhasePoint;
use pnflow_core::integrator::{integrate, IntegratorConfig};
use serde::Deserialize;

use crate::config::overlay;
use crate::{output, CliError, EXIT_OK};

/// Arrows shorter than this (in `(phi, psi)` units per unit time) are drawn
/// as fixed-point markers.
pub const ZERO_SPEED: f64 = 1e-9;

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortraitArgs {
    /// Index of the space P_n (n >= 2) [default: 2]
    #[arg(long)]
    pub n: Option<u32>,
    /// phi bounds as `min:max` [default: 1:8]
    #[arg(long, allow_hyphen_values = true)]
    pub phi_range: Option<String>,
    /// psi bounds as `min:max` [default: -2:2]
    #[arg(long, allow_hyphen_values = true)]
    pub psi_range: Option<String>,
    /// Grid points along phi [default: 15]
    #[arg(long)]
    pub phi_steps: Option<usize>,
    /// Grid points along psi [default: 9]
    #[arg(long)]
    pub psi_steps: Option<usize>,
    /// Start of an overlaid trajectory as `phi,psi`; repeatable
    #[arg(long = "trajectory", allow_hyphen_values = true)]
    #[serde(rename = "trajectory")]
    pub trajectories: Vec<String>,
    /// Time span of each trajectory [default: 1]
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    /// Output file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

overlay!(PortraitArgs {
    n, phi_range, psi_range, phi_steps, psi_steps, t_max, width, height, out
}, vec trajectories);

/// Validated portrait parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Portrait {
    pub n: u32,
    pub phi: (f64, f64),
    pub psi: (f64, f64),
    pub steps: (usize, usize),
    pub starts: Vec<(f64, f64)>,
    pub t_max: f64,
    pub size: (u32, u32),
}

const MARGIN: f64 = 50.0;

pub fn parse_range(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::usage(format!("invalid range `{s}`, expected min:max"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(bad());
    }
    Ok((a, b))
}

fn parse_start(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::usage(format!("invalid trajectory start `{s}`, expected phi,psi"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

impl Portrait {
    pub fn from_args(a: &PortraitArgs) -> Result<Self, CliError> {
        let n = a.n.unwrap_or(2);
        if n < 2 {
            return Err(CliError::usage(format!("n must be at least 2, got {n}")));
        }
        let phi = parse_range(a.phi_range.as_deref().unwrap_or("1:8"))?;
        let psi = parse_range(a.psi_range.as_deref().unwrap_or("-2:2"))?;
        // the box must meet the admissible cone phi > |psi|
        let closest_psi = if psi.0 <= 0.0 && psi.1 >= 0.0 {
            0.0
        } else {
            psi.0.abs().min(psi.1.abs())
        };
        if phi.1 <= closest_psi {
            return Err(CliError::usage(
                "bounding box lies outside the admissible region phi > |psi|",
            ));
        }
        let steps = (a.phi_steps.unwrap_or(15), a.psi_steps.unwrap_or(9));
        if steps.0 < 2 || steps.1 < 2 {
            return Err(CliError::usage("grids need at least 2 points per axis"));
        }
        let starts = a
            .trajectories
            .iter()
            .map(|s| {
                let (phi, psi) = parse_start(s)?;
                PhasePoint::new(n, phi, psi).map_err(|e| CliError::usage(e.to_string()))?;
                Ok((phi, psi))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let t_max = a.t_max.unwrap_or(1.0);
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(CliError::usage("t_max must be positive"));
        }
        let size = (a.width.unwrap_or(800), a.height.unwrap_or(600));
        if f64::from(size.0) <= 2.0 * MARGIN || f64::from(size.1) <= 2.0 * MARGIN {
            return Err(CliError::usage("image too small"));
        }
        Ok(Self {
            n,
            phi,
            psi,
            steps,
            starts,
            t_max,
            size,
        })
    }

    fn grid(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (pa, pb) = self.phi;
        let (qa, qb) = self.psi;
        let (ni, nj) = self.steps;
        (0..ni).flat_map(move |i| {
            let phi = pa + (pb - pa) * i as f64 / (ni - 1) as f64;
            (0..nj).map(move |j| (phi, qb - (qb - qa) * j as f64 / (nj - 1) as f64))
        })
    }

    fn sx(&self) -> f64 {
        (f64::from(self.size.0) - 2.0 * MARGIN) / (self.phi.1 - self.phi.0)
    }

    fn sy(&self) -> f64 {
        (f64::from(self.size.1) - 2.0 * MARGIN) / (self.psi.1 - self.psi.0)
    }

    /// Screen coordinates of `(phi, psi)`.
    pub fn to_screen(&self, phi: f64, psi: f64) -> (f64, f64) {
        (
            MARGIN + (phi - self.phi.0) * self.sx(),
            MARGIN + (self.psi.1 - psi) * self.sy(),
        )
    }

    fn contains(&self, phi: f64, psi: f64) -> bool {
        (self.phi.0..=self.phi.1).contains(&phi) && (self.psi.0..=self.psi.1).contains(&psi)
    }

    /// Zeros of the submersion equation inside the phi range.
    fn axis_fixed_points(&self) -> Vec<f64> {
        if !(self.psi.0..=self.psi.1).contains(&0.0) {
            return Vec::new();
        }
        let lo = self.phi.0.max(self.phi.1 * 1e-3);
        let f = |phi: f64| rhs_submersion(self.n, phi).unwrap_or(f64::NAN);
        let samples = 4000;
        let mut roots = Vec::new();
        let mut prev = (lo, f(lo));
        for k in 1..=samples {
            let phi = lo + (self.phi.1 - lo) * k as f64 / samples as f64;
            let cur = (phi, f(phi));
            if prev.1 == 0.0 {
                roots.push(prev.0);
            } else if prev.1 * cur.1 < 0.0 {
                let (mut a, mut b) = (prev.0, cur.0);
                for _ in 0..100 {
                    let m = 0.5 * (a + b);
                    if f(m) * f(a) <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            prev = cur;
        }
        if prev.1 == 0.0 {
            roots.push(prev.0);
        }
        roots
    }

    pub fn render(&self) -> String {
        let (w, h) = self.size;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#
        );
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(
            s,
            "<title>Phase portrait of P_{} in (phi, psi)</title>",
            self.n
        );
        let _ = writeln!(
            s,
            r##"<defs><marker id="head" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="#333"/></marker><clipPath id="plot"><rect x="{}" y="{}" width="{}" height="{}"/></clipPath></defs>"##,
            num(MARGIN),
            num(MARGIN),
            num(f64::from(w) - 2.0 * MARGIN),
            num(f64::from(h) - 2.0 * MARGIN)
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        self.render_frame(&mut s);
        self.render_field(&mut s);
        self.render_trajectories(&mut s);
        for phi in self.axis_fixed_points() {
            let (x, y) = self.to_screen(phi, 0.0);
            let _ = writeln!(
                s,
                r##"<circle class="fixed" cx="{}" cy="{}" r="5" fill="none" stroke="#c00" stroke-width="1.5"/>"##,
                num(x),
                num(y)
            );
        }
        s.push_str("</svg>\n");
        s
    }

    fn render_frame(&self, s: &mut String) {
        let (x0, y0) = self.to_screen(self.phi.0, self.psi.1);
        let (x1, y1) = self.to_screen(self.phi.1, self.psi.0);
        let _ = writeln!(
            s,
            r##"<rect class="frame" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#999"/>"##,
            num(x0),
            num(y0),
            num(x1 - x0),
            num(y1 - y0)
        );
        // boundary of the admissible cone
        for sign in [1.0, -1.0] {
            let (ax, ay) = self.to_screen(0.0, 0.0);
            let far = self.phi.1.max(self.psi.1.abs()).max(self.psi.0.abs()) * 2.0;
            let (bx, by) = self.to_screen(far, sign * far);
            let _ = writeln!(
                s,
                r##"<line class="cone" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4,3" clip-path="url(#plot)"/>"##,
                num(ax),
                num(ay),
                num(bx),
                num(by)
            );
        }
        if (self.psi.0..=self.psi.1).contains(&0.0) {
            let (ax, ay) = self.to_screen(self.phi.0, 0.0);
            let (bx, by) = self.to_screen(self.phi.1, 0.0);
            let _ = writeln!(
                s,
                r##"<line class="axis" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#c00" stroke-width="2"/>"##,
                num(ax),
                num(ay),
                num(bx),
                num(by)
            );
        }
        let (lx, ly) = (f64::from(self.size.0) / 2.0, f64::from(self.size.1) - 15.0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14">phi [{}, {}]</text>"#,
            num(lx),
            num(ly),
            self.phi.0,
            self.phi.1
        );
        let _ = writeln!(
            s,
            r#"<text x="15" y="{}" font-family="sans-serif" font-size="14" transform="rotate(-90 15 {})" text-anchor="middle">psi [{}, {}]</text>"#,
            num(f64::from(self.size.1) / 2.0),
            num(f64::from(self.size.1) / 2.0),
            self.psi.0,
            self.psi.1
        );
    }

    fn render_field(&self, s: &mut String) {
        let cell_x = self.sx() * (self.phi.1 - self.phi.0) / (self.steps.0 - 1) as f64;
        let cell_y = self.sy() * (self.psi.1 - self.psi.0) / (self.steps.1 - 1) as f64;
        let len = 0.4 * cell_x.min(cell_y);
        s.push_str("<g class=\"field\" stroke=\"#333\" stroke-width=\"1\">\n");
        for (phi, psi) in self.grid() {
            if phi <= psi.abs() {
                continue;
            }
            let Ok([dphi, dpsi]) = rhs_phase(self.n, phi, psi) else {
                continue;
            };
            let (x, y) = self.to_screen(phi, psi);
            if dphi.hypot(dpsi) < ZERO_SPEED {
                let _ = writeln!(
                    s,
                    r##"<circle class="zero" cx="{}" cy="{}" r="3" fill="#333"/>"##,
                    num(x),
                    num(y)
                );
                continue;
            }
            let (vx, vy) = (dphi * self.sx(), -dpsi * self.sy());
            let norm = vx.hypot(vy);
            let (ex, ey) = (x + len * vx / norm, y + len * vy / norm);
            let _ = writeln!(
                s,
                r#"<line class="arrow" x1="{}" y1="{}" x2="{}" y2="{}" marker-end="url(#head)"/>"#,
                num(x),
                num(y),
                num(ex),
                num(ey)
            );
        }
        s.push_str("</g>\n");
    }

    fn render_trajectories(&self, s: &mut String) {
        let cfg = IntegratorConfig::with_t_max(self.t_max);
        for &(phi, psi) in &self.starts {
            let Ok(traj) = integrate(&PhaseFlow { n: self.n }, 0.0, [phi, psi], &cfg, &[]) else {
                continue;
            };
            let mut pieces: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
            for sample in &traj.samples {
                let [p, q] = sample.y;
                if self.contains(p, q) {
                    pieces.last_mut().unwrap().push(self.to_screen(p, q));
                } else if !pieces.last().unwrap().is_empty() {
                    pieces.push(Vec::new());
                }
            }
            for piece in pieces.iter().filter(|p| p.len() >= 2) {
                let points: Vec<String> = piece
                    .iter()
                    .map(|&(x, y)| format!("{},{}", num(x), num(y)))
                    .collect();
                let _ = writeln!(
                    s,
                    r##"<polyline class="trajectory" points="{}" fill="none" stroke="#06c" stroke-width="1.5"/>"##,
                    points.join(" ")
                );
            }
        }
    }
}

/// Fixed three-decimal formatting without a negative zero.
fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".to_owned()
    } else {
        s
    }
}

pub fn cmd_portrait(a: &PortraitArgs) -> Result<i32, CliError> {
    let portrait = Portrait::from_args(a)?;
    let mut w = output::open(a.out.as_deref())?;
    w.write_all(portrait.render().as_bytes())?;
    w.flush()?;
    Ok(EXIT_OK)
}
