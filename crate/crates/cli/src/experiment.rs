//! `pnflow experiment`: run the negative-eigenvalue experiment and write a
//! JSON report.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use pnflow_core::analysis::{run_theorem_experiment, ExperimentConfig, ExperimentReport};
use pnflow_core::{Error, RicciSpectrum};
use serde::{Deserialize, Serialize};

use crate::config::overlay;
use crate::{output, CliError, EXIT_BAD_INITIAL_DATA, EXIT_CHECK_FAILED, EXIT_INTEGRATOR, EXIT_OK};

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[command(allow_negative_numbers = true)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentArgs {
    /// Index of the space P_n (n >= 2) [default: 2]
    #[arg(long)]
    pub n: Option<u32>,
    /// Initial phi; chosen automatically when absent
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub big_n: Option<f64>,
    /// Initial psi is -epsilon [default: 1e-3]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Reparametrized time budget [default: 1e7]
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Level for psi phi^(2n-2) [default: -1e3]
    #[arg(long)]
    pub psi_phi_threshold: Option<f64>,
    /// Level for r1 phi [default: -1e2]
    #[arg(long)]
    pub r1_phi_threshold: Option<f64>,
    /// phi from which the late-time slope is read [default: 1e3]
    #[arg(long)]
    pub slope_phi_min: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Output file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

overlay!(ExperimentArgs {
    n,
    big_n,
    epsilon,
    t_max,
    psi_phi_threshold,
    r1_phi_threshold,
    slope_phi_min,
    rel_tol,
    out
});

impl ExperimentArgs {
    pub fn to_config(&self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(self.n.unwrap_or(2));
        cfg.initial_phi = self.big_n;
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.t_max {
            cfg.t_max = v;
        }
        if let Some(v) = self.psi_phi_threshold {
            cfg.thresholds.psi_phi = v;
        }
        if let Some(v) = self.r1_phi_threshold {
            cfg.thresholds.r1_phi = v;
        }
        if let Some(v) = self.slope_phi_min {
            cfg.slope_phi_min = v;
        }
        if let Some(v) = self.rel_tol {
            cfg.integrator.rel_tol = v;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumJson {
    /// `null` where the value is not finite.
    pub r: [Option<f64>; 3],
    pub dims: [u32; 3],
    pub negative_count: u32,
    pub smallest_k_positive: Option<u32>,
}

impl From<&RicciSpectrum> for SpectrumJson {
    fn from(s: &RicciSpectrum) -> Self {
        Self {
            r: s.r.map(|v| v.is_finite().then_some(v)),
            dims: s.dims,
            negative_count: s.negative_count(),
            smallest_k_positive: s.smallest_positive_k(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceJson {
    pub psi_phi_pow: bool,
    pub r1_phi: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityJson {
    pub phi_prime_gt_1: bool,
    pub psi_prime_gt_0: bool,
}

/// Serialized form of [`ExperimentReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub n: u32,
    #[serde(rename = "N")]
    pub big_n: f64,
    pub epsilon: f64,
    pub t_r1_negative: Option<f64>,
    pub t_r2_negative: Option<f64>,
    pub t_r3_negative: Option<f64>,
    pub final_negative_count: u32,
    pub expected_negative_count: u32,
    pub slope_estimate: Option<f64>,
    pub slope_target: f64,
    pub decay_bound_holds: bool,
    pub decay_t0: Option<f64>,
    pub divergence: DivergenceJson,
    pub monotonicity: MonotonicityJson,
    pub termination: String,
    pub t_final: f64,
    pub final_phi: f64,
    pub final_psi: f64,
    pub initial_spectrum: SpectrumJson,
    pub final_spectrum: SpectrumJson,
}

impl From<&ExperimentReport> for ReportJson {
    fn from(r: &ExperimentReport) -> Self {
        Self {
            n: r.n,
            big_n: r.initial_phi,
            epsilon: r.epsilon,
            t_r1_negative: r.t_r1_negative,
            t_r2_negative: r.t_r2_negative,
            t_r3_negative: r.t_r3_negative,
            final_negative_count: r.final_negative_count,
            expected_negative_count: r.expected_negative_count,
            slope_estimate: r.slope_estimate.filter(|v| v.is_finite()),
            slope_target: r.slope_target,
            decay_bound_holds: r.decay.holds,
            decay_t0: r.decay.t0,
            divergence: DivergenceJson {
                psi_phi_pow: r.divergence.psi_phi_pow,
                r1_phi: r.divergence.r1_phi,
            },
            monotonicity: MonotonicityJson {
                phi_prime_gt_1: r.monotonicity.phi_prime_gt_1,
                psi_prime_gt_0: r.monotonicity.psi_prime_gt_0,
            },
            termination: r.termination.as_str().to_owned(),
            t_final: r.t_final,
            final_phi: r.final_phi,
            final_psi: r.final_psi,
            initial_spectrum: (&r.initial_spectrum).into(),
            final_spectrum: (&r.final_spectrum).into(),
        }
    }
}

pub fn cmd_experiment(a: &ExperimentArgs) -> Result<i32, CliError> {
    let cfg = a.to_config();
    let report = match run_theorem_experiment(&cfg) {
        Ok(r) => r,
        Err(e @ Error::BadInitialData { .. }) => {
            return Err(CliError {
                code: EXIT_BAD_INITIAL_DATA,
                message: e.to_string(),
            })
        }
        Err(e @ (Error::InvalidN(_) | Error::InvalidConfig(_) | Error::NotAdmissible { .. })) => {
            return Err(CliError::usage(e.to_string()))
        }
        Err(e) => {
            return Err(CliError {
                code: EXIT_INTEGRATOR,
                message: e.to_string(),
            })
        }
    };
    let json = ReportJson::from(&report);
    let mut w = output::open(a.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &json).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;

    if report.termination.is_error() {
        eprintln!("integration failed: {}", report.termination.as_str());
        return Ok(EXIT_INTEGRATOR);
    }
    if !report.count_matches() {
        eprintln!(
            "final negative eigenvalue count {} differs from 8n-8 = {}",
            report.final_negative_count, report.expected_negative_count
        );
        return Ok(EXIT_CHECK_FAILED);
    }
    Ok(EXIT_OK)
}
