//! `pnflow flow`: integrate one system and write the trajectory as CSV.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use pnflow_core::flow_systems::{
    FlowKind, FullFlow, PhaseFlow, ReducedFlow, ReparamFlow, SubmersionFlow,
};
use pnflow_core::gw_space::{
    from_phase, to_phase, x3_from_volume_one, GwSpace, Metric, PhasePoint,
};
use pnflow_core::integrator::{integrate, IntegratorConfig, Termination, Trajectory};
use pnflow_core::integrator::{Diagnostics, OdeSystem};
use serde::Deserialize;

use crate::config::overlay;
use crate::{output, CliError, EXIT_INTEGRATOR, EXIT_OK};

pub const CSV_HEADER: &str = "t,x1,x2,x3,phi,psi,r1,r2,r3,S,V,neg_count";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    /// Blockwise flow of `(x1, x2, x3)`.
    Full,
    /// Unit-volume slice in `(x1, x2)`.
    Reduced,
    /// `(phi, psi)` in the original time.
    Phase,
    /// `(phi, psi)` reparametrized so that `phi' = 1`.
    Reparam,
    /// `phi` alone on `psi = 0`.
    Submersion,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[command(allow_negative_numbers = true)]
#[serde(default, deny_unknown_fields)]
pub struct FlowArgs {
    /// Index of the space P_n (n >= 2) [default: 2]
    #[arg(long)]
    pub n: Option<u32>,
    /// System to integrate [default: phase]
    #[arg(long, value_enum)]
    pub system: Option<SystemKind>,
    #[arg(long)]
    pub x1: Option<f64>,
    #[arg(long)]
    pub x2: Option<f64>,
    /// Third scale factor (full system); defaults to the unit-volume value
    #[arg(long)]
    pub x3: Option<f64>,
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub psi: Option<f64>,
    /// Final time [default: 1]
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub max_step: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Unnormalized flow (full system only)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub unnormalized: Option<bool>,
    /// Output file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

overlay!(FlowArgs {
    n,
    system,
    x1,
    x2,
    x3,
    phi,
    psi,
    t_max,
    rel_tol,
    abs_tol,
    max_step,
    max_steps,
    unnormalized,
    out
});

/// One CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub t: f64,
    pub diagnostics: Option<Diagnostics>,
}

impl Row {
    pub fn write(&self, w: &mut dyn Write) -> std::io::Result<()> {
        write!(w, "{}", num(self.t))?;
        match &self.diagnostics {
            Some(d) => {
                let values = [
                    d.x[0],
                    d.x[1],
                    d.x[2],
                    d.phi,
                    d.psi,
                    d.spectrum.r[0],
                    d.spectrum.r[1],
                    d.spectrum.r[2],
                    d.spectrum.scalar,
                    d.volume,
                ];
                for v in values {
                    write!(w, ",{}", num(v))?;
                }
                writeln!(w, ",{}", d.negative_count)
            }
            None => writeln!(w, "{}", ",NaN".repeat(11)),
        }
    }
}

/// 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn integrator_config(a: &FlowArgs) -> IntegratorConfig {
    let d = IntegratorConfig::default();
    IntegratorConfig {
        rel_tol: a.rel_tol.unwrap_or(d.rel_tol),
        abs_tol: a.abs_tol.unwrap_or(d.abs_tol),
        max_step: a.max_step.unwrap_or(d.max_step),
        max_steps: a.max_steps.unwrap_or(d.max_steps),
        t_max: a.t_max.unwrap_or(1.0),
        ..d
    }
}

/// Runs the flow described by `a` and returns rows plus termination.
pub fn run_flow(a: &FlowArgs) -> Result<(Vec<Row>, Termination), CliError> {
    let n = a.n.unwrap_or(2);
    let space = GwSpace::pn(n).map_err(|e| CliError::usage(e.to_string()))?;
    let cfg = integrator_config(a);
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let system = a.system.unwrap_or(SystemKind::Phase);
    if a.unnormalized == Some(true) && system != SystemKind::Full {
        return Err(CliError::usage(
            "--unnormalized applies to --system full only",
        ));
    }
    let usage = |e: pnflow_core::Error| CliError::usage(e.to_string());

    let rows = match system {
        SystemKind::Full => {
            let kind = if a.unnormalized == Some(true) {
                FlowKind::Unnormalized
            } else {
                FlowKind::Normalized
            };
            let x = match initial(a)? {
                Start::X { x1, x2, x3 } => {
                    [x1, x2, x3.unwrap_or_else(|| x3_from_volume_one(n, x1, x2))]
                }
                Start::Phase { phi, psi } => {
                    from_phase(&PhasePoint::new(n, phi, psi).map_err(usage)?).x()
                }
            };
            Metric::new(x).map_err(usage)?;
            rows_of(&FullFlow { space, kind }, x, &cfg)?
        }
        SystemKind::Reduced => {
            let y = match initial(a)? {
                Start::X { x3: Some(_), .. } => {
                    return Err(CliError::usage("--x3 is fixed by the unit-volume slice"))
                }
                Start::X { x1, x2, .. } => [x1, x2],
                Start::Phase { phi, psi } => {
                    let m = from_phase(&PhasePoint::new(n, phi, psi).map_err(usage)?).x();
                    [m[0], m[1]]
                }
            };
            Metric::new([y[0], y[1], 1.0]).map_err(usage)?;
            rows_of(&ReducedFlow { n }, y, &cfg)?
        }
        SystemKind::Phase | SystemKind::Reparam => {
            let p = match initial(a)? {
                Start::X { x3: Some(_), .. } => {
                    return Err(CliError::usage("--x3 is fixed by the unit-volume slice"))
                }
                Start::X { x1, x2, .. } => to_phase(n, x1, x2).map_err(usage)?,
                Start::Phase { phi, psi } => PhasePoint::new(n, phi, psi).map_err(usage)?,
            };
            let y = [p.phi(), p.psi()];
            if system == SystemKind::Phase {
                rows_of(&PhaseFlow { n }, y, &cfg)?
            } else {
                rows_of(&ReparamFlow { n }, y, &cfg)?
            }
        }
        SystemKind::Submersion => {
            let phi = match initial(a)? {
                Start::Phase { phi, psi: 0.0 } => phi,
                _ => {
                    return Err(CliError::usage(
                        "submersion system takes --phi (and --psi 0)",
                    ))
                }
            };
            PhasePoint::new(n, phi, 0.0).map_err(usage)?;
            rows_of(&SubmersionFlow { n }, [phi], &cfg)?
        }
    };
    Ok(rows)
}

enum Start {
    X { x1: f64, x2: f64, x3: Option<f64> },
    Phase { phi: f64, psi: f64 },
}

fn initial(a: &FlowArgs) -> Result<Start, CliError> {
    let has_x = a.x1.is_some() || a.x2.is_some() || a.x3.is_some();
    let has_phase = a.phi.is_some() || a.psi.is_some();
    match (has_x, has_phase) {
        (true, true) => Err(CliError::usage(
            "give either --x1/--x2[/--x3] or --phi/--psi",
        )),
        (true, false) => match (a.x1, a.x2) {
            (Some(x1), Some(x2)) => Ok(Start::X { x1, x2, x3: a.x3 }),
            _ => Err(CliError::usage("--x1 and --x2 are both required")),
        },
        (false, true) => match a.phi {
            Some(phi) => Ok(Start::Phase {
                phi,
                psi: a.psi.unwrap_or(0.0),
            }),
            None => Err(CliError::usage("--phi is required")),
        },
        (false, false) => Err(CliError::usage("no initial state given")),
    }
}

fn rows_of<const D: usize, S: OdeSystem<D>>(
    system: &S,
    y0: [f64; D],
    cfg: &IntegratorConfig,
) -> Result<(Vec<Row>, Termination), CliError> {
    let traj: Trajectory<D> =
        integrate(system, 0.0, y0, cfg, &[]).map_err(|e| CliError::usage(e.to_string()))?;
    let rows = traj
        .samples
        .iter()
        .map(|s| Row {
            t: s.t,
            diagnostics: s.diagnostics.or_else(|| system.observe(&s.y)),
        })
        .collect();
    Ok((rows, traj.termination))
}

pub fn write_csv(rows: &[Row], w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for row in rows {
        row.write(w)?;
    }
    w.flush()
}

pub fn cmd_flow(a: &FlowArgs) -> Result<i32, CliError> {
    let (rows, termination) = run_flow(a)?;
    let mut w = output::open(a.out.as_deref())?;
    write_csv(&rows, &mut *w)?;
    match termination {
        Termination::ReachedTmax | Termination::EventStop => Ok(EXIT_OK),
        other => {
            eprintln!("integration ended early: {}", other.as_str());
            Ok(EXIT_INTEGRATOR)
        }
    }
}
