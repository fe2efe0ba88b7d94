use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the flow library.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Error {
    /// `P_n` and `k(n)` are only defined for `n >= 2`.
    InvalidN(u32),
    /// The three-summand descriptor violates positivity or `d_i a_i = const`.
    InvalidSpace(&'static str),
    /// A scale factor is not a positive finite number.
    NonPositiveMetric,
    /// `phi > |psi|` fails, so `x1` or `x2` would be non-positive.
    NotAdmissible { phi: f64, psi: f64 },
    /// `k` outside `[1, d]`.
    KOutOfRange { k: u32, dim: u32 },
    /// Volume overflowed even in log space.
    VolumeOverflow,
    /// `phi^(2n)` would exceed the representable guard.
    RangeExceeded { phi: f64 },
    /// The time change `h' = 1/phi'` is undefined where `phi' <= 0`.
    ReparamInvalid { dphi: f64 },
    /// A sign-change search was started on an interval without a sign change.
    NoBracket { t_lo: f64, t_hi: f64 },
    /// Integrator configuration rejected.
    InvalidConfig(&'static str),
    /// The experiment's initial metric is not in the regime the argument needs.
    BadInitialData { r: [f64; 3], dphi: f64 },
    /// A diagnostic needs `psi != 0` along the trajectory.
    PsiVanishes { t: f64 },
    /// A trajectory-level diagnostic was given no samples.
    EmptyTrajectory,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidN(n) => write!(f, "n must be at least 2, got {n}"),
            Error::InvalidSpace(why) => write!(f, "invalid space descriptor: {why}"),
            Error::NonPositiveMetric => {
                write!(f, "metric scale factors must be positive and finite")
            }
            Error::NotAdmissible { phi, psi } => {
                write!(f, "phase point (phi={phi}, psi={psi}) violates phi > |psi|")
            }
            Error::KOutOfRange { k, dim } => write!(f, "k = {k} outside [1, {dim}]"),
            Error::VolumeOverflow => write!(f, "volume overflows f64 range"),
            Error::RangeExceeded { phi } => write!(f, "phi = {phi} exceeds the power guard"),
            Error::ReparamInvalid { dphi } => {
                write!(f, "reparametrization undefined: phi' = {dphi} <= 0")
            }
            Error::NoBracket { t_lo, t_hi } => {
                write!(f, "no sign change on [{t_lo}, {t_hi}]")
            }
            Error::InvalidConfig(why) => write!(f, "invalid integrator configuration: {why}"),
            Error::BadInitialData { r, dphi } => write!(
                f,
                "initial data not in the large-N regime: r = ({}, {}, {}), phi' = {dphi}",
                r[0], r[1], r[2]
            ),
            Error::PsiVanishes { t } => write!(f, "psi vanishes at t = {t}"),
            Error::EmptyTrajectory => write!(f, "trajectory has no samples"),
        }
    }
}

impl core::error::Error for Error {}
