//! `pnflow check`: the invariant grid.

use clap::Args;
use pnflow_core::flow_systems::{rhs_full, rhs_phase, rhs_reduced_x, FlowKind, FullFlow};
use pnflow_core::gw_space::{
    from_phase, normalize_to_unit_volume, ricci_coefficients, ricci_phase, to_phase, volume,
    GwSpace, Metric, PhasePoint,
};
use pnflow_core::integrator::{integrate, IntegratorConfig, Termination};
use pnflow_core::{Result, RicciSpectrum};
use serde::Deserialize;

use crate::config::overlay;
use crate::{CliError, EXIT_CHECK_FAILED, EXIT_OK};

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckArgs {
    /// Largest n in the grid (>= 2) [default: 6]
    #[arg(long)]
    pub n_max: Option<u32>,
}

overlay!(CheckArgs { n_max });

/// Phase-coordinate spectrum under test.
pub type PhaseSpectrumFn<'a> = dyn Fn(&PhasePoint) -> Result<RicciSpectrum> + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub cases: usize,
    /// Worst observed error in the check's own normalization.
    pub worst: f64,
    pub tol: f64,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.worst <= self.tol
    }
}

/// 20 x 20 grid: phi in [0.6, 6], psi / phi in [-0.9, 0.9].
fn phase_grid() -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(400);
    for i in 0..20 {
        let phi = 0.6 + 5.4 * i as f64 / 19.0;
        for j in 0..20 {
            pts.push((phi, (-0.9 + 1.8 * j as f64 / 19.0) * phi));
        }
    }
    pts
}

/// Log-spaced positive triples in [0.1, 10]^3.
fn metric_grid() -> Vec<[f64; 3]> {
    let v: Vec<f64> = (0..7).map(|i| 10f64.powf(-1.0 + i as f64 / 3.0)).collect();
    let mut out = Vec::new();
    for &a in &v {
        for &b in &v {
            for &c in &v {
                out.push([a, b, c]);
            }
        }
    }
    out
}

struct Acc {
    row: CheckRow,
}

impl Acc {
    fn new(name: &'static str, tol: f64) -> Self {
        Self {
            row: CheckRow {
                name,
                cases: 0,
                worst: 0.0,
                tol,
            },
        }
    }

    fn add(&mut self, err: f64) {
        self.row.cases += 1;
        // NaN counts as a failure
        self.row.worst = if err.is_nan() {
            f64::INFINITY
        } else {
            self.row.worst.max(err)
        };
    }
}

fn spaces(n_max: u32) -> impl Iterator<Item = (u32, GwSpace)> {
    (2..=n_max).map(|n| (n, GwSpace::pn(n).expect("n >= 2")))
}

fn round_trip(n_max: u32) -> CheckRow {
    let mut acc = Acc::new("round-trip", 1e-14);
    for (n, _) in spaces(n_max) {
        for [x1, x2, _] in metric_grid() {
            let back = to_phase(n, x1, x2).map(|p| from_phase(&p).x());
            match back {
                Ok(m) => acc.add(((m[0] - x1).abs() + (m[1] - x2).abs()) / x1.max(x2)),
                Err(_) => acc.add(f64::INFINITY),
            }
        }
        for (phi, psi) in phase_grid() {
            let p = PhasePoint::new(n, phi, psi).expect("admissible grid");
            let m = p.to_metric().x();
            match to_phase(n, m[0], m[1]) {
                Ok(q) => acc.add(((q.phi() - phi).abs() + (q.psi() - psi).abs()) / phi),
                Err(_) => acc.add(f64::INFINITY),
            }
        }
    }
    acc.row
}

fn spectrum_agreement(n_max: u32, phase_spectrum: &PhaseSpectrumFn) -> CheckRow {
    let mut acc = Acc::new("spectrum-agreement", 1e-12);
    for (n, space) in spaces(n_max) {
        for (phi, psi) in phase_grid() {
            let p = PhasePoint::new(n, phi, psi).expect("admissible grid");
            let oracle = ricci_coefficients(&space, &from_phase(&p));
            match phase_spectrum(&p) {
                Ok(direct) => {
                    for i in 0..3 {
                        let scale = direct.r[i].abs().max(oracle.r[i].abs()).max(1e-2);
                        acc.add((direct.r[i] - oracle.r[i]).abs() / scale);
                    }
                }
                Err(_) => acc.add(f64::INFINITY),
            }
        }
    }
    acc.row
}

fn rhs_agreement(n_max: u32) -> CheckRow {
    let mut acc = Acc::new("rhs-agreement", 1e-10);
    for (n, space) in spaces(n_max) {
        for (phi, psi) in phase_grid() {
            let p = PhasePoint::new(n, phi, psi).expect("admissible grid");
            let m = from_phase(&p);
            let [x1, x2, _] = m.x();
            let full = rhs_full(&space, &m, FlowKind::Normalized);
            let (Ok(reduced), Ok([dphi, dpsi])) =
                (rhs_reduced_x(n, x1, x2), rhs_phase(n, phi, psi))
            else {
                acc.add(f64::INFINITY);
                continue;
            };
            let scale = (full[0].abs() + full[1].abs()).max(1.0);
            acc.add(
                (full[0] - reduced[0])
                    .abs()
                    .max((full[1] - reduced[1]).abs())
                    / scale,
            );
            acc.add((dphi - (full[0] + full[1])).abs() / scale);
            acc.add((dpsi - (full[0] - full[1])).abs() / scale);
        }
    }
    acc.row
}

fn volume_conservation(n_max: u32) -> CheckRow {
    let mut acc = Acc::new("volume-conservation", 1e-8);
    for (_, space) in spaces(n_max) {
        let start =
            normalize_to_unit_volume(&space, &Metric::new([1.0, 1.0, 2.0]).expect("positive"));
        let flow = FullFlow {
            space,
            kind: FlowKind::Normalized,
        };
        let traj = match integrate(
            &flow,
            0.0,
            start.x(),
            &IntegratorConfig::with_t_max(50.0),
            &[],
        ) {
            Ok(t) if t.termination == Termination::ReachedTmax => t,
            _ => {
                acc.add(f64::INFINITY);
                continue;
            }
        };
        for s in &traj.samples {
            let v = Metric::new(s.y)
                .ok()
                .and_then(|m| volume(&space, &m).ok())
                .unwrap_or(f64::NAN);
            acc.add((v - 1.0).abs());
        }
    }
    acc.row
}

fn homogeneity(n_max: u32) -> CheckRow {
    let mut acc = Acc::new("homogeneity", 1e-12);
    for (_, space) in spaces(n_max) {
        for x in metric_grid() {
            let m = Metric::new(x).expect("positive");
            let base = ricci_coefficients(&space, &m);
            let [x1, x2, x3] = x;
            let size = (x1 / (x2 * x3)).max(x2 / (x1 * x3)).max(x3 / (x1 * x2));
            for c in [0.5, 2.0, 10.0] {
                let scaled = ricci_coefficients(&space, &m.scaled(c).expect("positive"));
                for ((s, b), xi) in scaled.r.iter().zip(base.r).zip(x) {
                    acc.add((s * c - b).abs() / (size + 1.0 / xi));
                }
            }
        }
    }
    acc.row
}

fn swap_symmetry(n_max: u32) -> CheckRow {
    let mut acc = Acc::new("swap-symmetry", 0.0);
    for (n, space) in spaces(n_max) {
        for x in metric_grid() {
            let m = Metric::new(x).expect("positive");
            let a = ricci_coefficients(&space, &m);
            let b = ricci_coefficients(&space, &m.swapped());
            acc.add((a.r[0] - b.r[1]).abs() + (a.r[1] - b.r[0]).abs() + (a.r[2] - b.r[2]).abs());
        }
        for (phi, psi) in phase_grid() {
            match (rhs_phase(n, phi, psi), rhs_phase(n, phi, -psi)) {
                (Ok(a), Ok(b)) => acc.add((a[0] - b[0]).abs() + (a[1] + b[1]).abs()),
                _ => acc.add(f64::INFINITY),
            }
        }
    }
    acc.row
}

/// Runs every check with `phase_spectrum` standing in for the
/// phase-coordinate spectrum.
pub fn run_checks(n_max: u32, phase_spectrum: &PhaseSpectrumFn) -> Vec<CheckRow> {
    vec![
        round_trip(n_max),
        spectrum_agreement(n_max, phase_spectrum),
        rhs_agreement(n_max),
        volume_conservation(n_max),
        homogeneity(n_max),
        swap_symmetry(n_max),
    ]
}

pub fn format_table(rows: &[CheckRow]) -> String {
    let mut out = format!(
        "{:<22} {:>7} {:>12} {:>10}  result\n",
        "check", "cases", "worst", "tol"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<22} {:>7} {:>12.3e} {:>10.1e}  {}\n",
            r.name,
            r.cases,
            r.worst,
            r.tol,
            if r.passed() { "PASS" } else { "FAIL" }
        ));
    }
    out
}

pub fn exit_code(rows: &[CheckRow]) -> i32 {
    if rows.iter().all(CheckRow::passed) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

pub fn cmd_check_with(
    a: &CheckArgs,
    phase_spectrum: &PhaseSpectrumFn,
) -> std::result::Result<i32, CliError> {
    let n_max = a.n_max.unwrap_or(6);
    if n_max < 2 {
        return Err(CliError::usage(format!(
            "--n-max must be at least 2, got {n_max}"
        )));
    }
    let rows = run_checks(n_max, phase_spectrum);
    print!("{}", format_table(&rows));
    for r in rows.iter().filter(|r| !r.passed()) {
        eprintln!("failed: {}", r.name);
    }
    Ok(exit_code(&rows))
}

pub fn cmd_check(a: &CheckArgs) -> std::result::Result<i32, CliError> {
    cmd_check_with(a, &ricci_phase)
}
