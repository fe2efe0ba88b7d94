//! The negative-Ricci experiment on `P_n` and its asymptotic diagnostics.
//!
//! The experiment starts the reparametrized phase flow (`phi' = 1`) at
//! `(N, -epsilon)`, a small perturbation of a large submersion metric, and
//! follows it until `r1` has turned negative, `psi phi^(2n-2)` and `r1 phi`
//! have passed their divergence thresholds and `phi` is in the asymptotic
//! regime.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flow_systems::{rhs_phase, rhs_reparam, rhs_submersion, ReparamFlow};
use crate::gw_space::{ricci_phase, PhasePoint, RicciSpectrum};
use crate::integrator::{
    integrate, Crossing, IntegratorConfig, Monitor, MonitorRole, Termination, Trajectory,
};
use crate::math;

/// Candidate starting values of `phi`, tried in order.
pub const INITIAL_PHI_CANDIDATES: [f64; 7] = [4.0, 6.0, 8.0, 10.0, 15.0, 20.0, 30.0];
/// Minimum submersion speed `phi'` the default starting value must reach.
pub const INITIAL_PHI_SPEED: f64 = 1.1;
/// Per-step slack in the monotonicity test of `psi phi^eta`.
pub const DECAY_SLACK: f64 = 1e-9;

/// Divergence levels for `psi phi^(2n-2)` and `r1 phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub psi_phi: f64,
    pub r1_phi: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            psi_phi: -1e3,
            r1_phi: -1e2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub n: u32,
    /// `phi(0)`; `None` picks the default from [`INITIAL_PHI_CANDIDATES`].
    pub initial_phi: Option<f64>,
    /// `psi(0) = -epsilon`. Zero gives the submersion (control) run.
    pub epsilon: f64,
    pub t_max: f64,
    pub thresholds: Thresholds,
    /// `phi` must reach this before the run may stop, so that the late-time
    /// slope is measured in the asymptotic regime.
    pub slope_phi_min: f64,
    pub integrator: IntegratorConfig,
}

impl ExperimentConfig {
    pub fn new(n: u32) -> Self {
        Self {
            n,
            initial_phi: None,
            epsilon: 1e-3,
            t_max: 1e7,
            thresholds: Thresholds::default(),
            slope_phi_min: 1e3,
            // psi decays like phi^-(4n-5)/3, so error control is purely relative
            integrator: IntegratorConfig {
                abs_tol: 1e-300,
                ..IntegratorConfig::with_t_max(1e7)
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Monotonicity {
    pub phi_prime_gt_1: bool,
    pub psi_prime_gt_0: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCheck {
    pub holds: bool,
    /// First sample time from which `psi phi^eta` is nonincreasing.
    pub t0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DivergenceFlags {
    pub psi_phi_pow: bool,
    pub r1_phi: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub n: u32,
    pub initial_phi: f64,
    pub epsilon: f64,
    pub t_r1_negative: Option<f64>,
    pub t_r2_negative: Option<f64>,
    pub t_r3_negative: Option<f64>,
    pub final_negative_count: u32,
    pub expected_negative_count: u32,
    pub initial_spectrum: RicciSpectrum,
    pub final_spectrum: RicciSpectrum,
    pub monotonicity: Monotonicity,
    pub slope_estimate: Option<f64>,
    pub slope_target: f64,
    pub decay: DecayCheck,
    pub divergence: DivergenceFlags,
    pub termination: Termination,
    pub t_final: f64,
    pub final_phi: f64,
    pub final_psi: f64,
}

impl ExperimentReport {
    /// Whether the run ended with `8n - 8` negative eigenvalues.
    pub fn count_matches(&self) -> bool {
        self.final_negative_count == self.expected_negative_count
    }
}

/// Report together with the trajectory it was computed from.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub trajectory: Trajectory<2>,
}

/// `(5 - 4n)/3`, the limit of `psi' phi / psi` along the reparametrized flow.
pub fn slope_target(n: u32) -> f64 {
    (5.0 - 4.0 * n as f64) / 3.0
}

/// `eta = 4n/3 - 1`.
pub fn decay_exponent(n: u32) -> f64 {
    4.0 * n as f64 / 3.0 - 1.0
}

/// `8n - 8`, the negative-eigenvalue count claimed for the late metric.
pub fn expected_negative_count(n: u32) -> u32 {
    8 * n - 8
}

/// Smallest candidate `phi(0)` with submersion speed at least
/// [`INITIAL_PHI_SPEED`] and all Ricci eigenvalues positive at
/// `(phi(0), -epsilon)`.
pub fn default_initial_phi(n: u32, epsilon: f64) -> Result<f64> {
    let mut last = None;
    for phi in INITIAL_PHI_CANDIDATES {
        let speed = rhs_submersion(n, phi)?;
        let Ok(p) = PhasePoint::new(n, phi, -epsilon) else {
            continue;
        };
        let spectrum = ricci_phase(&p)?;
        if speed >= INITIAL_PHI_SPEED && spectrum.r.iter().all(|&r| r > 0.0) {
            return Ok(phi);
        }
        last = Some(Error::BadInitialData {
            r: spectrum.r,
            dphi: rhs_phase(n, phi, -epsilon)?[0],
        });
    }
    Err(last.unwrap_or(Error::InvalidN(n)))
}

fn validate_start(n: u32, phi: f64, epsilon: f64) -> Result<RicciSpectrum> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidConfig("epsilon must be non-negative"));
    }
    let p = PhasePoint::new(n, phi, -epsilon)?;
    let spectrum = ricci_phase(&p)?;
    let [dphi, _] = rhs_phase(n, phi, -epsilon)?;
    if spectrum.r.iter().any(|&r| !(r > 0.0)) || !(dphi > 1.0) {
        return Err(Error::BadInitialData {
            r: spectrum.r,
            dphi,
        });
    }
    Ok(spectrum)
}

fn phase_spectrum(n: u32, y: &[f64; 2]) -> Option<RicciSpectrum> {
    ricci_phase(&PhasePoint::new(n, y[0], y[1]).ok()?).ok()
}

/// Runs the experiment and returns only the report.
pub fn run_theorem_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_theorem_experiment_full(cfg).map(|run| run.report)
}

/// Runs the experiment, keeping the trajectory.
///
/// Numerical failures of the integrator do not produce an `Err`; they are
/// visible in `report.termination`.
pub fn run_theorem_experiment_full(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    let n = cfg.n;
    if n < 2 {
        return Err(Error::InvalidN(n));
    }
    let initial_phi = match cfg.initial_phi {
        Some(phi) => phi,
        None => default_initial_phi(n, cfg.epsilon)?,
    };
    let initial_spectrum = validate_start(n, initial_phi, cfg.epsilon)?;

    let r =
        |i: usize| move |_t: f64, y: &[f64; 2]| phase_spectrum(n, y).map_or(f64::NAN, |s| s.r[i]);
    let exponent = 2 * n as i32 - 2;
    let monitors = [
        Monitor::sign_change("r1", r(0)).with_role(MonitorRole::Required),
        Monitor::sign_change("r2", r(1)),
        Monitor::sign_change("r3", r(2)),
        Monitor::sign_change("psi", |_t, y: &[f64; 2]| y[1]),
        Monitor::threshold(
            "psi_phi_pow",
            cfg.thresholds.psi_phi,
            move |_t, y: &[f64; 2]| y[1] * math::powi(y[0], exponent),
        )
        .with_role(MonitorRole::Required),
        Monitor::threshold("r1_phi", cfg.thresholds.r1_phi, move |_t, y: &[f64; 2]| {
            phase_spectrum(n, y).map_or(f64::NAN, |s| s.r[0] * y[0])
        })
        .with_role(MonitorRole::Required),
        Monitor::threshold("phi_regime", -cfg.slope_phi_min, |_t, y: &[f64; 2]| -y[0])
            .with_role(MonitorRole::Required),
    ];
    let integrator = IntegratorConfig {
        t_max: cfg.t_max,
        ..cfg.integrator
    };
    let trajectory = integrate(
        &ReparamFlow { n },
        0.0,
        [initial_phi, -cfg.epsilon],
        &integrator,
        &monitors,
    )?;

    let last = trajectory.last().ok_or(Error::EmptyTrajectory)?;
    let final_spectrum = phase_spectrum(n, &last.y)
        .unwrap_or(RicciSpectrum::new([f64::NAN; 3], initial_spectrum.dims));
    let event_time = |name: &str| trajectory.first_event(name, Crossing::Falling).map(|e| e.t);

    let report = ExperimentReport {
        n,
        initial_phi,
        epsilon: cfg.epsilon,
        t_r1_negative: event_time("r1"),
        t_r2_negative: event_time("r2"),
        t_r3_negative: event_time("r3"),
        final_negative_count: final_spectrum.negative_count(),
        expected_negative_count: expected_negative_count(n),
        initial_spectrum,
        final_spectrum,
        monotonicity: monotonicity_checks(&trajectory, n),
        slope_estimate: asymptotic_slope(&trajectory, n).ok(),
        slope_target: slope_target(n),
        decay: decay_bound_check(&trajectory, n),
        divergence: divergence_check(&trajectory, n, &cfg.thresholds),
        termination: trajectory.termination,
        t_final: last.t,
        final_phi: last.y[0],
        final_psi: last.y[1],
    };
    Ok(ExperimentRun { report, trajectory })
}

/// `phi' > 1` and `psi' > 0` on the original-time phase system at every
/// sample of a `(phi, psi)` trajectory.
pub fn monotonicity_checks(traj: &Trajectory<2>, n: u32) -> Monotonicity {
    let mut out = Monotonicity {
        phi_prime_gt_1: true,
        psi_prime_gt_0: true,
    };
    for s in &traj.samples {
        match rhs_phase(n, s.y[0], s.y[1]) {
            Ok([dphi, dpsi]) => {
                out.phi_prime_gt_1 &= dphi > 1.0;
                out.psi_prime_gt_0 &= dpsi > 0.0;
            }
            Err(_) => {
                out.phi_prime_gt_1 = false;
                out.psi_prime_gt_0 = false;
            }
        }
    }
    out
}

/// `psi' phi / psi` at the last sample of a reparametrized trajectory.
pub fn asymptotic_slope(traj: &Trajectory<2>, n: u32) -> Result<f64> {
    if let Some(s) = traj.samples.iter().find(|s| s.y[1] == 0.0) {
        return Err(Error::PsiVanishes { t: s.t });
    }
    let last = traj.last().ok_or(Error::EmptyTrajectory)?;
    let [_, dpsi] = rhs_reparam(n, last.y[0], last.y[1])?;
    Ok(dpsi * last.y[0] / last.y[1])
}

/// Looks for the time `t0` after which `psi phi^eta` never increases.
///
/// The test is the integrated form of `psi' <= -eta psi / phi`. It holds when
/// `t0` falls before the final tenth of the samples; a trajectory with
/// `psi = 0` throughout holds trivially with `t0` at the first sample.
pub fn decay_bound_check(traj: &Trajectory<2>, n: u32) -> DecayCheck {
    let samples = &traj.samples;
    if samples.is_empty() {
        return DecayCheck {
            holds: false,
            t0: None,
        };
    }
    if samples.iter().all(|s| s.y[1] == 0.0) {
        return DecayCheck {
            holds: true,
            t0: Some(samples[0].t),
        };
    }
    let eta = decay_exponent(n);
    let q: Vec<f64> = samples
        .iter()
        .map(|s| s.y[1] * math::powf(s.y[0], eta))
        .collect();
    let mut start = 0;
    for j in (0..q.len() - 1).rev() {
        if q[j + 1] > q[j] + DECAY_SLACK * q[j].abs() {
            start = j + 1;
            break;
        }
    }
    let holds = q.len() >= 2 && (start as f64) < 0.9 * q.len() as f64;
    DecayCheck {
        holds,
        t0: holds.then(|| samples[start].t),
    }
}

/// Whether `psi phi^(2n-2)` and `r1 phi` fell below their thresholds at any
/// sample.
pub fn divergence_check(traj: &Trajectory<2>, n: u32, thresholds: &Thresholds) -> DivergenceFlags {
    let exponent = 2 * n as i32 - 2;
    let mut flags = DivergenceFlags {
        psi_phi_pow: false,
        r1_phi: false,
    };
    for s in &traj.samples {
        let (phi, psi) = (s.y[0], s.y[1]);
        if psi * math::powi(phi, exponent) < thresholds.psi_phi {
            flags.psi_phi_pow = true;
        }
        if let Some(spec) = phase_spectrum(n, &s.y) {
            if spec.r[0] * phi < thresholds.r1_phi {
                flags.r1_phi = true;
            }
        }
    }
    flags
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelineEntry {
    pub t: f64,
    pub negative_count: u32,
    /// `None` when no `k <= d` gives a positive sum.
    pub smallest_k_positive: Option<u32>,
}

/// Per-sample negative-eigenvalue count and smallest `k` of `k`-positivity.
pub fn positivity_timeline<const D: usize>(traj: &Trajectory<D>) -> Vec<TimelineEntry> {
    traj.samples
        .iter()
        .filter_map(|s| {
            let d = s.diagnostics?;
            Some(TimelineEntry {
                t: s.t,
                negative_count: d.spectrum.negative_count(),
                smallest_k_positive: d.spectrum.smallest_positive_k(),
            })
        })
        .collect()
}

/// Spectrum of a timeline entry in a compact form, for logs.
pub fn describe_spectrum(s: &RicciSpectrum) -> String {
    alloc::format!(
        "r = ({:.6e} x{}, {:.6e} x{}, {:.6e} x{})",
        s.r[0],
        s.dims[0],
        s.r[1],
        s.dims[1],
        s.r[2],
        s.dims[2]
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        assert_eq!(slope_target(2), -1.0);
        assert!((slope_target(3) + 7.0 / 3.0).abs() < 1e-15);
        assert!((decay_exponent(3) - 3.0).abs() < 1e-15);
        assert_eq!(expected_negative_count(3), 16);
        // 2n - 2 - eta = 2n/3 - 1 > 0
        for n in 2..=8 {
            let gap = (2 * n - 2) as f64 - decay_exponent(n);
            assert!((gap - (2.0 * n as f64 / 3.0 - 1.0)).abs() < 1e-14 && gap > 0.0);
        }
    }

    #[test]
    fn default_phi_meets_its_contract() {
        for n in 2..=7 {
            let phi = default_initial_phi(n, 1e-3).unwrap();
            assert!(rhs_submersion(n, phi).unwrap() >= INITIAL_PHI_SPEED);
            let s = ricci_phase(&PhasePoint::new(n, phi, -1e-3).unwrap()).unwrap();
            assert!(s.r.iter().all(|&r| r > 0.0));
            for smaller in INITIAL_PHI_CANDIDATES.iter().filter(|&&c| c < phi) {
                let s = ricci_phase(&PhasePoint::new(n, *smaller, -1e-3).unwrap()).unwrap();
                assert!(
                    rhs_submersion(n, *smaller).unwrap() < INITIAL_PHI_SPEED
                        || s.r.iter().any(|&r| r <= 0.0)
                );
            }
        }
    }

    #[test]
    fn no_default_phi_when_epsilon_too_large_for_n() {
        // the psi-term of r1 grows like eps N^(2n-3) / 4^(n-1)
        assert!(matches!(
            default_initial_phi(8, 1e-3),
            Err(Error::BadInitialData { .. })
        ));
        assert!(default_initial_phi(8, 1e-5).is_ok());
    }

    #[test]
    fn einstein_radius_is_rejected() {
        let cfg = ExperimentConfig {
            initial_phi: Some(2.0),
            ..ExperimentConfig::new(2)
        };
        assert!(matches!(
            run_theorem_experiment(&cfg),
            Err(Error::BadInitialData { .. })
        ));
    }

    #[test]
    fn timeline_for_positive_spectrum() {
        let traj = crate::integrator::integrate(
            &crate::flow_systems::SubmersionFlow { n: 2 },
            0.0,
            [2.0],
            &IntegratorConfig::with_t_max(1.0),
            &[],
        )
        .unwrap();
        let tl = positivity_timeline(&traj);
        assert!(!tl.is_empty());
        for e in tl {
            assert_eq!(e.negative_count, 0);
            assert_eq!(e.smallest_k_positive, Some(1));
        }
    }
}
