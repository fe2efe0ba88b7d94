//! Adaptive Dormand–Prince 5(4) integration with event localization.
//!
//! Steps are controlled with a proportional-integral controller on the
//! embedded error estimate. Each monitored functional is evaluated at step
//! ends; when it changes sign across an accepted step, the crossing is
//! bisected on a cubic Hermite interpolant of that step.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gw_space::{self, ricci_coefficients, GwSpace, Metric, PhasePoint, RicciSpectrum};
use crate::math;

/// Steps shorter than this (relative to `max(1, |t|)`) count as underflow.
const MIN_STEP: f64 = 1e-14;
/// Consecutive rejected trial steps tolerated when the right-hand side fails.
const MAX_FAILED_TRIALS: usize = 40;
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const PI_BETA: f64 = 0.04;
const PI_ALPHA: f64 = 0.2 - 0.75 * PI_BETA;

/// A right-hand side `y' = f(t, y)`.
pub trait OdeSystem<const D: usize> {
    fn rhs(&self, t: f64, y: &[f64; D]) -> Result<[f64; D]>;

    /// Metric-level diagnostics for a state, if the system has a geometric
    /// interpretation.
    fn observe(&self, _y: &[f64; D]) -> Option<Diagnostics> {
        None
    }
}

impl<const D: usize, F> OdeSystem<D> for F
where
    F: Fn(f64, &[f64; D]) -> Result<[f64; D]>,
{
    fn rhs(&self, t: f64, y: &[f64; D]) -> Result<[f64; D]> {
        self(t, y)
    }
}

/// Geometric quantities attached to a trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub x: [f64; 3],
    pub phi: f64,
    pub psi: f64,
    pub spectrum: RicciSpectrum,
    pub volume: f64,
    pub negative_count: u32,
    /// `psi * phi^(2n-2)`; NaN when the space is not a `P_n`.
    pub psi_phi_pow: f64,
    /// `r1 * phi`.
    pub r1_phi: f64,
}

impl Diagnostics {
    pub fn from_metric(space: &GwSpace, metric: &Metric) -> Self {
        let spectrum = ricci_coefficients(space, metric);
        let x = metric.x();
        Self::assemble(space, metric, x[0] + x[1], x[0] - x[1], spectrum)
    }

    /// Uses the phase-coordinate spectrum, which keeps `psi` exact when it
    /// is below the floating-point resolution of `x1` and `x2`.
    pub fn from_phase(p: &PhasePoint) -> Result<Self> {
        let space = GwSpace::pn(p.n())?;
        let spectrum = gw_space::ricci_phase(p)?;
        Ok(Self::assemble(
            &space,
            &p.to_metric(),
            p.phi(),
            p.psi(),
            spectrum,
        ))
    }

    fn assemble(
        space: &GwSpace,
        metric: &Metric,
        phi: f64,
        psi: f64,
        spectrum: RicciSpectrum,
    ) -> Self {
        let psi_phi_pow = match space.pn_index() {
            Some(n) => psi * math::powi(phi, 2 * n as i32 - 2),
            None => f64::NAN,
        };
        Self {
            x: metric.x(),
            phi,
            psi,
            spectrum,
            volume: gw_space::volume(space, metric).unwrap_or(f64::INFINITY),
            negative_count: spectrum.negative_count(),
            psi_phi_pow,
            r1_phi: spectrum.r[0] * phi,
        }
    }
}

/// Step-size and stopping controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    /// Final time (absolute, not a duration).
    pub t_max: f64,
    pub max_steps: usize,
    /// Width of the bracket that localizes an event in time.
    pub event_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            initial_step: 1e-3,
            max_step: f64::INFINITY,
            t_max: 1.0,
            max_steps: 1_000_000,
            event_tol: 1e-10,
        }
    }
}

impl IntegratorConfig {
    pub fn with_t_max(t_max: f64) -> Self {
        Self {
            t_max,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && !v.is_nan();
        if !(positive(self.rel_tol) && positive(self.abs_tol) && positive(self.event_tol)) {
            return Err(Error::InvalidConfig("tolerances must be positive"));
        }
        if !(positive(self.initial_step) && positive(self.max_step)) {
            return Err(Error::InvalidConfig("step sizes must be positive"));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidConfig("t_max must be positive and finite"));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be at least 1"));
        }
        Ok(())
    }
}

/// What the integrator does when a monitor changes sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MonitorRole {
    /// Record the event and continue.
    #[default]
    Record,
    /// Stop at the first crossing.
    Stop,
    /// Record crossings; stop once every `Required` monitor is negative
    /// (below its level) at the end of an accepted step.
    Required,
}

type MonitorFn<'a, const D: usize> = Box<dyn Fn(f64, &[f64; D]) -> f64 + 'a>;

/// A named scalar functional `f(t, y)` whose sign (or crossing of `level`)
/// is watched during integration.
pub struct Monitor<'a, const D: usize> {
    pub name: String,
    pub level: Option<f64>,
    pub role: MonitorRole,
    f: MonitorFn<'a, D>,
}

impl<'a, const D: usize> Monitor<'a, D> {
    pub fn sign_change(name: impl Into<String>, f: impl Fn(f64, &[f64; D]) -> f64 + 'a) -> Self {
        Self {
            name: name.into(),
            level: None,
            role: MonitorRole::Record,
            f: Box::new(f),
        }
    }

    pub fn threshold(
        name: impl Into<String>,
        level: f64,
        f: impl Fn(f64, &[f64; D]) -> f64 + 'a,
    ) -> Self {
        Self {
            name: name.into(),
            level: Some(level),
            role: MonitorRole::Record,
            f: Box::new(f),
        }
    }

    pub fn with_role(mut self, role: MonitorRole) -> Self {
        self.role = role;
        self
    }

    /// Signed functional: `f` minus the level, if any.
    fn g(&self, t: f64, y: &[f64; D]) -> f64 {
        (self.f)(t, y) - self.level.unwrap_or(0.0)
    }

    fn event_kind(&self) -> EventKind {
        match self.level {
            None => EventKind::SignChange(self.name.clone()),
            Some(level) => EventKind::ThresholdCross {
                name: self.name.clone(),
                level,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    SignChange(String),
    ThresholdCross { name: String, level: f64 },
    StopCondition(String),
}

impl EventKind {
    pub fn name(&self) -> &str {
        match self {
            EventKind::SignChange(name)
            | EventKind::ThresholdCross { name, .. }
            | EventKind::StopCondition(name) => name,
        }
    }
}

/// Direction in which the signed functional crossed zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    Rising,
    Falling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event<const D: usize> {
    pub kind: EventKind,
    pub crossing: Crossing,
    pub t: f64,
    pub state: [f64; D],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    ReachedTmax,
    EventStop,
    StepUnderflow,
    RangeExceeded,
    NonFinite,
    MaxSteps,
    /// The right-hand side kept rejecting trial states.
    RhsFailed(Error),
}

impl Termination {
    /// `true` for terminations that indicate a numerical failure.
    pub fn is_error(&self) -> bool {
        !matches!(
            self,
            Termination::ReachedTmax | Termination::EventStop | Termination::RangeExceeded
        )
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::ReachedTmax => "ReachedTmax",
            Termination::EventStop => "EventStop",
            Termination::StepUnderflow => "StepUnderflow",
            Termination::RangeExceeded => "RangeExceeded",
            Termination::NonFinite => "NonFinite",
            Termination::MaxSteps => "MaxSteps",
            Termination::RhsFailed(_) => "RhsFailed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<const D: usize> {
    pub t: f64,
    pub y: [f64; D],
    pub diagnostics: Option<Diagnostics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const D: usize> {
    pub samples: Vec<Sample<D>>,
    pub events: Vec<Event<D>>,
    pub termination: Termination,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl<const D: usize> Trajectory<D> {
    pub fn last(&self) -> Option<&Sample<D>> {
        self.samples.last()
    }

    /// First event with the given monitor name and crossing direction.
    pub fn first_event(&self, name: &str, crossing: Crossing) -> Option<&Event<D>> {
        self.events
            .iter()
            .find(|e| e.kind.name() == name && e.crossing == crossing)
    }
}

/// Cubic Hermite interpolant on one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct HermiteStep<const D: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; D],
    pub f0: [f64; D],
    pub y1: [f64; D],
    pub f1: [f64; D],
}

impl<const D: usize> HermiteStep<D> {
    pub fn eval(&self, t: f64) -> [f64; D] {
        if t == self.t0 {
            return self.y0;
        }
        if t == self.t0 + self.h {
            return self.y1;
        }
        let s = (t - self.t0) / self.h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        core::array::from_fn(|i| {
            h00 * self.y0[i]
                + h10 * self.h * self.f0[i]
                + h01 * self.y1[i]
                + h11 * self.h * self.f1[i]
        })
    }
}

/// Bisects `[t_lo, t_hi]` for the point where `f` changes sign.
///
/// Sign means "negative" versus "non-negative", so an exact zero at one end
/// still brackets. Returns the end of the final bracket on the `f(t_hi)`
/// side, after the bracket has shrunk below `tol` (or cannot be split
/// further in floating point).
pub fn locate_sign_change(f: impl Fn(f64) -> f64, t_lo: f64, t_hi: f64, tol: f64) -> Result<f64> {
    let neg_lo = f(t_lo) < 0.0;
    let neg_hi = f(t_hi) < 0.0;
    if neg_lo == neg_hi {
        return Err(Error::NoBracket { t_lo, t_hi });
    }
    let (mut lo, mut hi) = (t_lo, t_hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) < 0.0) == neg_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth-order weights minus the embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for i in 0..D {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

fn all_finite<const D: usize>(v: &[f64; D]) -> bool {
    v.iter().all(|x| x.is_finite())
}

struct TrialStep<const D: usize> {
    y1: [f64; D],
    f1: [f64; D],
    err: f64,
}

fn dopri_step<const D: usize, S: OdeSystem<D>>(
    system: &S,
    t: f64,
    y: &[f64; D],
    k1: &[f64; D],
    h: f64,
    config: &IntegratorConfig,
) -> Result<TrialStep<D>> {
    let k2 = system.rhs(t + C2 * h, &combine(y, h, &[(A21, k1)]))?;
    let k3 = system.rhs(t + C3 * h, &combine(y, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = system.rhs(
        t + C4 * h,
        &combine(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]),
    )?;
    let k5 = system.rhs(
        t + C5 * h,
        &combine(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    )?;
    let k6 = system.rhs(
        t + h,
        &combine(
            y,
            h,
            &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ),
    )?;
    let y1 = combine(
        y,
        h,
        &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
    );
    let k7 = system.rhs(t + h, &y1)?;

    let mut sum = 0.0;
    for i in 0..D {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let scale = config.abs_tol + config.rel_tol * y[i].abs().max(y1[i].abs());
        sum += (e / scale) * (e / scale);
    }
    let err = math::sqrt(sum / D as f64);
    Ok(TrialStep { y1, f1: k7, err })
}

fn sample<const D: usize, S: OdeSystem<D>>(system: &S, t: f64, y: [f64; D]) -> Sample<D> {
    Sample {
        t,
        y,
        diagnostics: system.observe(&y),
    }
}

/// Integrates `system` from `(t0, y0)` to `config.t_max`.
///
/// Numerical failures end the run early and are reported through
/// [`Trajectory::termination`]; the samples computed so far are kept. An
/// `Err` is returned only for an invalid configuration or an initial state
/// the right-hand side rejects.
pub fn integrate<const D: usize, S: OdeSystem<D>>(
    system: &S,
    t0: f64,
    y0: [f64; D],
    config: &IntegratorConfig,
    monitors: &[Monitor<'_, D>],
) -> Result<Trajectory<D>> {
    config.validate()?;
    if !(t0 < config.t_max) {
        return Err(Error::InvalidConfig("t_max must exceed the initial time"));
    }
    let mut t = t0;
    let mut y = y0;
    let mut f = system.rhs(t, &y)?;
    if !all_finite(&y) || !all_finite(&f) {
        return Err(Error::InvalidConfig(
            "initial state or derivative is not finite",
        ));
    }

    let mut traj = Trajectory {
        samples: alloc::vec![sample(system, t, y)],
        events: Vec::new(),
        termination: Termination::ReachedTmax,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    let mut g_prev: Vec<f64> = monitors.iter().map(|m| m.g(t, &y)).collect();
    if required_met(monitors, &g_prev) {
        traj.termination = Termination::EventStop;
        return Ok(traj);
    }

    let mut h = config.initial_step.min(config.max_step);
    let mut err_prev: f64 = 1e-4;
    let mut rejected_last = false;
    let mut failed_trials = 0usize;

    loop {
        if t >= config.t_max {
            traj.termination = Termination::ReachedTmax;
            break;
        }
        if traj.accepted_steps >= config.max_steps {
            traj.termination = Termination::MaxSteps;
            break;
        }
        let remaining = config.t_max - t;
        let mut last_step = false;
        if h >= remaining {
            h = remaining;
            last_step = true;
        }
        if h < MIN_STEP * t.abs().max(1.0) && !last_step {
            traj.termination = Termination::StepUnderflow;
            break;
        }

        let trial = match dopri_step(system, t, &y, &f, h, config) {
            Ok(trial) if trial.err.is_finite() && all_finite(&trial.y1) => trial,
            Ok(_) => {
                failed_trials += 1;
                if failed_trials > MAX_FAILED_TRIALS {
                    traj.termination = Termination::NonFinite;
                    break;
                }
                traj.rejected_steps += 1;
                h *= FAC_MIN;
                rejected_last = true;
                continue;
            }
            Err(Error::RangeExceeded { .. }) => {
                traj.termination = Termination::RangeExceeded;
                break;
            }
            Err(e) => {
                failed_trials += 1;
                if failed_trials > MAX_FAILED_TRIALS {
                    traj.termination = Termination::RhsFailed(e);
                    break;
                }
                traj.rejected_steps += 1;
                h *= FAC_MIN;
                rejected_last = true;
                continue;
            }
        };
        failed_trials = 0;

        if trial.err > 1.0 {
            traj.rejected_steps += 1;
            let factor = (SAFETY * math::powf(trial.err, -0.2)).max(FAC_MIN);
            h *= factor;
            rejected_last = true;
            continue;
        }

        // accepted
        let t_new = if last_step { config.t_max } else { t + h };
        let step = HermiteStep {
            t0: t,
            h: t_new - t,
            y0: y,
            f0: f,
            y1: trial.y1,
            f1: trial.f1,
        };
        traj.accepted_steps += 1;

        let g_new: Vec<f64> = monitors.iter().map(|m| m.g(t_new, &trial.y1)).collect();
        let mut found: Vec<(usize, f64)> = Vec::new();
        for (idx, m) in monitors.iter().enumerate() {
            if (g_prev[idx] < 0.0) != (g_new[idx] < 0.0) {
                let t_event =
                    locate_sign_change(|s| m.g(s, &step.eval(s)), step.t0, t_new, config.event_tol)
                        .unwrap_or(t_new);
                found.push((idx, t_event));
            }
        }
        found.sort_by(|a, b| a.1.total_cmp(&b.1));

        let mut stopped_at = None;
        for (idx, t_event) in found {
            let m = &monitors[idx];
            let crossing = if g_new[idx] < 0.0 {
                Crossing::Falling
            } else {
                Crossing::Rising
            };
            let state = step.eval(t_event);
            traj.events.push(Event {
                kind: m.event_kind(),
                crossing,
                t: t_event,
                state,
            });
            if m.role == MonitorRole::Stop {
                stopped_at = Some((t_event, state, m.name.clone()));
                break;
            }
        }

        if let Some((t_event, state, name)) = stopped_at {
            traj.events.push(Event {
                kind: EventKind::StopCondition(name),
                crossing: Crossing::Falling,
                t: t_event,
                state,
            });
            if t_event > t {
                traj.samples.push(sample(system, t_event, state));
            }
            traj.termination = Termination::EventStop;
            break;
        }

        t = t_new;
        y = trial.y1;
        f = trial.f1;
        g_prev = g_new;
        traj.samples.push(sample(system, t, y));

        if required_met(monitors, &g_prev) {
            traj.events.push(Event {
                kind: EventKind::StopCondition(String::from("required")),
                crossing: Crossing::Falling,
                t,
                state: y,
            });
            traj.termination = Termination::EventStop;
            break;
        }

        let err = trial.err.max(1e-10);
        let mut factor = SAFETY * math::powf(err, -PI_ALPHA) * math::powf(err_prev, PI_BETA);
        factor = factor.clamp(FAC_MIN, FAC_MAX);
        if rejected_last {
            factor = factor.min(1.0);
        }
        err_prev = trial.err.max(1e-4);
        rejected_last = false;
        h = (h * factor).min(config.max_step);
    }
    Ok(traj)
}

fn required_met<const D: usize>(monitors: &[Monitor<'_, D>], g: &[f64]) -> bool {
    let mut any = false;
    for (m, value) in monitors.iter().zip(g) {
        if m.role == MonitorRole::Required {
            any = true;
            if !(*value < 0.0) {
                return false;
            }
        }
    }
    any
}
