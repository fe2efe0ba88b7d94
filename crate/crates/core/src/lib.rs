//! Normalized Ricci flow on generalized Wallach spaces, specialised to the
//! family `P_n = Sp(n+1)/(Sp(n-1) x Sp(1) x Sp(1))` of dimension `8n - 4`.
//!
//! The crate is `no_std` (it needs `alloc` for trajectories) and is split
//! into four layers:
//!
//! * [`gw_space`]: spaces, metrics, phase coordinates, Ricci eigenvalues,
//!   volume and k-positivity bookkeeping.
//! * [`flow_systems`]: right-hand sides of the flow in full, reduced, phase,
//!   submersion and reparametrized form.
//! * [`integrator`]: an adaptive Dormand–Prince 5(4) integrator with event
//!   localization on a cubic Hermite interpolant.
//! * [`analysis`]: the negative-Ricci experiment and its asymptotic
//!   diagnostics.
#![no_std]
// NaN must fall into the rejecting branch of every guard
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
mod error;
pub mod flow_systems;
pub mod gw_space;
pub mod integrator;
mod math;

pub use error::{Error, Result};
pub use gw_space::{GwSpace, Metric, PhasePoint, RicciSpectrum};
