//! Right-hand sides of the normalized Ricci flow.
//!
//! [`rhs_full`] is the blockwise flow `x_i' = -2 r_i x_i + (2S/d) x_i` built on
//! [`ricci_coefficients`]; it works for any [`GwSpace`] and is the reference
//! the other forms are checked against. [`rhs_reduced_x`], [`rhs_phase`] and
//! [`rhs_submersion`] are the closed-form `P_n` reductions, transcribed
//! independently rather than derived from `rhs_full`.

use crate::error::{Error, Result};
use crate::gw_space::{self, ricci_coefficients, within_power_guard, GwSpace, Metric, PhasePoint};
use crate::integrator::{Diagnostics, OdeSystem};
use crate::math;

/// Normalized (volume preserving) or plain Ricci flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlowKind {
    #[default]
    Normalized,
    Unnormalized,
}

/// Full state of the three-summand flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowState3 {
    pub t: f64,
    pub x: [f64; 3],
}

/// Two-dimensional state of a `P_n` reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowState2 {
    /// `(x1, x2)` on the unit-volume slice.
    Slice { n: u32, t: f64, x1: f64, x2: f64 },
    /// Phase coordinates.
    Phase { n: u32, t: f64, phi: f64, psi: f64 },
}

/// `dx_i/dt` for the blockwise flow on `space`.
pub fn rhs_full(space: &GwSpace, metric: &Metric, kind: FlowKind) -> [f64; 3] {
    let spectrum = ricci_coefficients(space, metric);
    let x = metric.x();
    let drift = match kind {
        FlowKind::Normalized => 2.0 * spectrum.scalar / space.dim() as f64,
        FlowKind::Unnormalized => 0.0,
    };
    let mut dx = [0.0; 3];
    for i in 0..3 {
        dx[i] = (drift - 2.0 * spectrum.r[i]) * x[i];
    }
    dx
}

fn check_n(n: u32) -> Result<()> {
    if n < 2 {
        Err(Error::InvalidN(n))
    } else {
        Ok(())
    }
}

/// The normalized flow on `P_n` with `x3 = (x1 x2)^-(n-1)` eliminated.
pub fn rhs_reduced_x(n: u32, x1: f64, x2: f64) -> Result<[f64; 2]> {
    check_n(n)?;
    if !(x1.is_finite() && x2.is_finite() && x1 > 0.0 && x2 > 0.0) {
        return Err(Error::NonPositiveMetric);
    }
    if !within_power_guard(n, x1 + x2) {
        return Err(Error::RangeExceeded { phi: x1 + x2 });
    }
    let ni = n as i32;
    let nf = n as f64;
    let c = 2.0 * (nf + 2.0);

    let p = math::powi(x1, ni) * math::powi(x2, ni - 2);
    let q = math::powi(x1, ni - 2) * math::powi(x2, ni);
    let inv = 1.0 / (math::powi(x1, ni) * math::powi(x2, ni));
    let mixed = math::powi(x1, ni - 1) * math::powi(x2, ni - 1);

    let b = (c * (1.0 / x1 + 1.0 / x2 + mixed / (nf - 1.0)) - p - q - inv) * (nf - 1.0)
        / (c * (2.0 * nf - 1.0));

    let dx1 = -1.0 - x1 / c * (p - q - inv) + x1 * b;
    let dx2 = -1.0 - x2 / c * (-p + q - inv) + x2 * b;
    Ok([dx1, dx2])
}

/// The `P_n` flow in phase coordinates `(phi, psi)`.
pub fn rhs_phase(n: u32, phi: f64, psi: f64) -> Result<[f64; 2]> {
    let p = PhasePoint::new(n, phi, psi)?;
    if !within_power_guard(n, phi) {
        return Err(Error::RangeExceeded { phi });
    }
    let nf = n as f64;
    let (phi, psi) = (p.phi(), p.psi());
    let q = (phi - psi) * (phi + psi);
    let four = math::powi(4.0, n as i32 - 1);
    let lead = math::powi(q, n as i32 - 2) / (four * (nf + 2.0) * (2.0 * nf - 1.0));
    let tail = 4.0 * four * nf / (2.0 * (nf + 2.0) * (2.0 * nf - 1.0) * math::powi(q, n as i32));
    let ratio = (nf - 1.0) / (2.0 * nf - 1.0);

    let dphi = -2.0
        + lead * (3.0 * phi * phi * phi - (6.0 * nf - 1.0) * phi * psi * psi)
        + tail * phi
        + ratio * (4.0 * phi * phi / q);
    let dpsi = psi
        * (lead * ((-4.0 * nf + 5.0) * phi * phi - (2.0 * nf + 1.0) * psi * psi)
            + tail
            + ratio * (4.0 * phi / q));
    Ok([dphi, dpsi])
}

/// `phi'` on the submersion locus `psi = 0`.
pub fn rhs_submersion(n: u32, phi: f64) -> Result<f64> {
    check_n(n)?;
    if !(phi.is_finite() && phi > 0.0) {
        return Err(Error::NotAdmissible { phi, psi: 0.0 });
    }
    if !within_power_guard(n, phi) {
        return Err(Error::RangeExceeded { phi });
    }
    let nf = n as f64;
    let odd = math::powi(phi, 2 * n as i32 - 1);
    let four = math::powi(4.0, n as i32 - 1);
    Ok(
        (-2.0 + 3.0 * odd / (four * (nf + 2.0)) + 4.0 * four * nf / (2.0 * (nf + 2.0) * odd))
            / (2.0 * nf - 1.0),
    )
}

/// The phase flow after the time change `h' = 1/phi'`, so that `phi' = 1`.
pub fn rhs_reparam(n: u32, phi: f64, psi: f64) -> Result<[f64; 2]> {
    let [dphi, dpsi] = rhs_phase(n, phi, psi)?;
    if !(dphi > 0.0) {
        return Err(Error::ReparamInvalid { dphi });
    }
    Ok([1.0, dpsi / dphi])
}

/// Smallest `phi` past which `rhs_submersion(n, phi) > level` everywhere.
///
/// Writing `u = phi^(2n-1)`, the submersion equation is convex in `u` with a
/// single minimum, so the answer is the root on the increasing branch (or the
/// minimizer itself when the minimum already exceeds `level`).
pub fn submersion_threshold(n: u32, level: f64) -> Result<f64> {
    check_n(n)?;
    let nf = n as f64;
    let four = math::powi(4.0, n as i32 - 1);
    let alpha = 3.0 / (four * (nf + 2.0));
    let beta = 4.0 * four * nf / (2.0 * (nf + 2.0));
    let u_min = math::sqrt(beta / alpha);
    let mut lo = math::powf(u_min, 1.0 / (2.0 * nf - 1.0));
    if rhs_submersion(n, lo)? > level {
        return Ok(lo);
    }
    let mut hi = 2.0 * lo;
    while rhs_submersion(n, hi)? <= level {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rhs_submersion(n, mid)? > level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Blockwise flow on an arbitrary three-summand space. State `(x1, x2, x3)`.
#[derive(Debug, Clone, Copy)]
pub struct FullFlow {
    pub space: GwSpace,
    pub kind: FlowKind,
}

impl OdeSystem<3> for FullFlow {
    fn rhs(&self, _t: f64, y: &[f64; 3]) -> Result<[f64; 3]> {
        let metric = Metric::new(*y)?;
        if let Some(n) = self.space.pn_index() {
            let largest = y.iter().copied().fold(0.0, f64::max);
            if !within_power_guard(n, largest) {
                return Err(Error::RangeExceeded { phi: largest });
            }
        }
        Ok(rhs_full(&self.space, &metric, self.kind))
    }

    fn observe(&self, y: &[f64; 3]) -> Option<Diagnostics> {
        let metric = Metric::new(*y).ok()?;
        Some(Diagnostics::from_metric(&self.space, &metric))
    }
}

/// System in `(x1, x2)` on the unit-volume slice of `P_n`.
#[derive(Debug, Clone, Copy)]
pub struct ReducedFlow {
    pub n: u32,
}

impl OdeSystem<2> for ReducedFlow {
    fn rhs(&self, _t: f64, y: &[f64; 2]) -> Result<[f64; 2]> {
        rhs_reduced_x(self.n, y[0], y[1])
    }

    fn observe(&self, y: &[f64; 2]) -> Option<Diagnostics> {
        let space = GwSpace::pn(self.n).ok()?;
        let x3 = gw_space::x3_from_volume_one(self.n, y[0], y[1]);
        let metric = Metric::new([y[0], y[1], x3]).ok()?;
        Some(Diagnostics::from_metric(&space, &metric))
    }
}

/// Phase system in original time. State `(phi, psi)`.
#[derive(Debug, Clone, Copy)]
pub struct PhaseFlow {
    pub n: u32,
}

impl OdeSystem<2> for PhaseFlow {
    fn rhs(&self, _t: f64, y: &[f64; 2]) -> Result<[f64; 2]> {
        rhs_phase(self.n, y[0], y[1])
    }

    fn observe(&self, y: &[f64; 2]) -> Option<Diagnostics> {
        Diagnostics::from_phase(&PhasePoint::new(self.n, y[0], y[1]).ok()?).ok()
    }
}

/// Reparametrized phase system, `phi' = 1`. State `(phi, psi)`.
#[derive(Debug, Clone, Copy)]
pub struct ReparamFlow {
    pub n: u32,
}

impl OdeSystem<2> for ReparamFlow {
    fn rhs(&self, _t: f64, y: &[f64; 2]) -> Result<[f64; 2]> {
        rhs_reparam(self.n, y[0], y[1])
    }

    fn observe(&self, y: &[f64; 2]) -> Option<Diagnostics> {
        Diagnostics::from_phase(&PhasePoint::new(self.n, y[0], y[1]).ok()?).ok()
    }
}

/// The scalar equation on `psi = 0`. State `(phi)`.
#[derive(Debug, Clone, Copy)]
pub struct SubmersionFlow {
    pub n: u32,
}

impl OdeSystem<1> for SubmersionFlow {
    fn rhs(&self, _t: f64, y: &[f64; 1]) -> Result<[f64; 1]> {
        Ok([rhs_submersion(self.n, y[0])?])
    }

    fn observe(&self, y: &[f64; 1]) -> Option<Diagnostics> {
        Diagnostics::from_phase(&PhasePoint::new(self.n, y[0], 0.0).ok()?).ok()
    }
}
