//! Three-summand homogeneous spaces, invariant metrics and their Ricci
//! eigenvalues.
//!
//! An invariant metric on a generalized Wallach space is `g = x1 Q|p1 + x2 Q|p2
//! + x3 Q|p3` and its Ricci tensor is diagonal in the same splitting with
//! eigenvalue `r_i` of multiplicity `d_i = dim p_i`. For the family `P_n` the
//! structure constants are `a1 = a2 = 1/(2(n+2))`, `a3 = (n-1)/(2(n+2))` and the
//! module dimensions are `(4(n-1), 4(n-1), 4)`.

use crate::error::{Error, Result};
use crate::math;

/// Relative tolerance for the `d_i a_i = const` check.
const PROPORTIONALITY_TOL: f64 = 1e-12;

/// Largest decimal exponent allowed for `phi^(2n)` before reporting
/// [`Error::RangeExceeded`].
pub const POWER_GUARD_LOG10: f64 = 280.0;

/// A generalized Wallach space with pairwise inequivalent summands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GwSpace {
    a: [f64; 3],
    dims: [u32; 3],
    pn_index: Option<u32>,
}

impl GwSpace {
    /// Builds a descriptor from structure constants and module dimensions.
    ///
    /// The products `d_i a_i` must agree; this is what makes
    /// `V = x1^(1/a1) x2^(1/a2) x3^(1/a3)` constant along the normalized flow.
    pub fn new(a: [f64; 3], dims: [u32; 3]) -> Result<Self> {
        if a.iter().any(|&ai| !(ai.is_finite() && ai > 0.0)) {
            return Err(Error::InvalidSpace("structure constants must be positive"));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidSpace("module dimensions must be at least 1"));
        }
        let weights = [
            dims[0] as f64 * a[0],
            dims[1] as f64 * a[1],
            dims[2] as f64 * a[2],
        ];
        let reference = weights[0];
        if weights
            .iter()
            .any(|w| (w - reference).abs() > PROPORTIONALITY_TOL * reference)
        {
            return Err(Error::InvalidSpace("d_i * a_i must be the same for all i"));
        }
        Ok(Self {
            a,
            dims,
            pn_index: None,
        })
    }

    /// The space `P_n`, `n >= 2`.
    pub fn pn(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidN(n));
        }
        let denom = 2.0 * (n as f64 + 2.0);
        let mut space = Self::new(
            [1.0 / denom, 1.0 / denom, (n as f64 - 1.0) / denom],
            [4 * (n - 1), 4 * (n - 1), 4],
        )?;
        space.pn_index = Some(n);
        Ok(space)
    }

    pub fn a(&self) -> [f64; 3] {
        self.a
    }

    pub fn dims(&self) -> [u32; 3] {
        self.dims
    }

    /// Total dimension `d1 + d2 + d3`.
    pub fn dim(&self) -> u32 {
        self.dims.iter().sum()
    }

    /// `Some(n)` when this descriptor was built by [`GwSpace::pn`].
    pub fn pn_index(&self) -> Option<u32> {
        self.pn_index
    }
}

/// The index `k(n)` for which `P_n` carries an invariant metric of
/// positive `k`-th intermediate Ricci curvature.
pub fn kn(n: u32) -> Result<u32> {
    match n {
        0 | 1 => Err(Error::InvalidN(n)),
        3 => Ok(6),
        _ => Ok(4 * n - 7),
    }
}

/// Scale factors `(x1, x2, x3)` of an invariant metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric([f64; 3]);

impl Metric {
    pub fn new(x: [f64; 3]) -> Result<Self> {
        if x.iter().all(|&xi| xi.is_finite() && xi > 0.0) {
            Ok(Self(x))
        } else {
            Err(Error::NonPositiveMetric)
        }
    }

    pub fn x(&self) -> [f64; 3] {
        self.0
    }

    /// `c * g` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new([c * self.0[0], c * self.0[1], c * self.0[2]])
    }

    /// The same metric with `x1` and `x2` exchanged.
    pub fn swapped(&self) -> Self {
        Self([self.0[1], self.0[0], self.0[2]])
    }
}

/// A point `(phi, psi) = (x1 + x2, x1 - x2)` on the unit-volume slice of `P_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    phi: f64,
    psi: f64,
    n: u32,
}

impl PhasePoint {
    pub fn new(n: u32, phi: f64, psi: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidN(n));
        }
        if !(phi.is_finite() && psi.is_finite() && phi > psi.abs()) {
            return Err(Error::NotAdmissible { phi, psi });
        }
        Ok(Self { phi, psi, n })
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// `(x1, x2, x3)` with `x3` fixed by the unit-volume constraint.
    pub fn to_metric(&self) -> Metric {
        let x1 = 0.5 * (self.phi + self.psi);
        let x2 = 0.5 * (self.phi - self.psi);
        Metric([x1, x2, x3_from_volume_one(self.n, x1, x2)])
    }
}

/// Phase coordinates of `(x1, x2)`.
pub fn to_phase(n: u32, x1: f64, x2: f64) -> Result<PhasePoint> {
    if !(x1.is_finite() && x2.is_finite() && x1 > 0.0 && x2 > 0.0) {
        return Err(Error::NonPositiveMetric);
    }
    PhasePoint::new(n, x1 + x2, x1 - x2)
}

/// Inverse of [`to_phase`], completed with `x3` on the unit-volume slice.
pub fn from_phase(p: &PhasePoint) -> Metric {
    p.to_metric()
}

/// `x3 = (x1 x2)^-(n-1)`, the unit-volume completion on `P_n`.
pub fn x3_from_volume_one(n: u32, x1: f64, x2: f64) -> f64 {
    math::powi(x1 * x2, -(n as i32 - 1))
}

/// Eigenvalues of the Ricci tensor with their multiplicities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicciSpectrum {
    pub r: [f64; 3],
    pub dims: [u32; 3],
    pub scalar: f64,
}

impl RicciSpectrum {
    pub fn new(r: [f64; 3], dims: [u32; 3]) -> Self {
        let scalar = dims[0] as f64 * r[0] + dims[1] as f64 * r[1] + dims[2] as f64 * r[2];
        Self { r, dims, scalar }
    }

    pub fn dim(&self) -> u32 {
        self.dims.iter().sum()
    }

    /// Distinct eigenvalues with multiplicities, ascending.
    fn sorted_blocks(&self) -> [(f64, u32); 3] {
        let mut blocks = [
            (self.r[0], self.dims[0]),
            (self.r[1], self.dims[1]),
            (self.r[2], self.dims[2]),
        ];
        blocks.sort_by(|a, b| a.0.total_cmp(&b.0));
        blocks
    }

    /// Sum of the `k` smallest eigenvalues counted with multiplicity.
    pub fn smallest_sum(&self, k: u32) -> Result<f64> {
        let dim = self.dim();
        if k == 0 || k > dim {
            return Err(Error::KOutOfRange { k, dim });
        }
        let mut remaining = k;
        let mut sum = 0.0;
        for (value, mult) in self.sorted_blocks() {
            let take = remaining.min(mult);
            sum += take as f64 * value;
            remaining -= take;
            if remaining == 0 {
                break;
            }
        }
        Ok(sum)
    }

    /// Whether the sum of the `k` smallest eigenvalues is strictly positive.
    pub fn k_positive(&self, k: u32) -> Result<bool> {
        Ok(self.smallest_sum(k)? > 0.0)
    }

    /// Number of strictly negative eigenvalues, with multiplicity.
    pub fn negative_count(&self) -> u32 {
        self.r
            .iter()
            .zip(self.dims)
            .filter(|(r, _)| **r < 0.0)
            .map(|(_, d)| d)
            .sum()
    }

    /// Smallest `k` for which the tensor is `k`-positive, if any.
    pub fn smallest_positive_k(&self) -> Option<u32> {
        let mut sum = 0.0;
        let mut k = 0;
        for (value, mult) in self.sorted_blocks() {
            for _ in 0..mult {
                sum += value;
                k += 1;
                if sum > 0.0 {
                    return Some(k);
                }
            }
        }
        None
    }
}

/// Ricci eigenvalues from the scale factors:
///
/// `r_i = 1/(2 x_i) + (a_i/2) (x_i/(x_j x_k) - x_k/(x_i x_j) - x_j/(x_i x_k))`
/// with `(i, j, k)` cyclic.
pub fn ricci_coefficients(space: &GwSpace, metric: &Metric) -> RicciSpectrum {
    let x = metric.0;
    let a = space.a;
    let mut r = [0.0; 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        // the two subtracted terms are summed first so that x1 <-> x2 swaps
        // r1 and r2 bit for bit
        r[i] = 0.5 / x[i]
            + 0.5 * a[i] * (x[i] / (x[j] * x[k]) - (x[k] / (x[i] * x[j]) + x[j] / (x[i] * x[k])));
    }
    RicciSpectrum::new(r, space.dims)
}

/// `log V = sum (1/a_i) log x_i`.
pub fn log_volume(space: &GwSpace, metric: &Metric) -> f64 {
    space
        .a
        .iter()
        .zip(metric.0)
        .map(|(ai, xi)| math::ln(xi) / ai)
        .sum()
}

/// `V = x1^(1/a1) x2^(1/a2) x3^(1/a3)`, accumulated in log space.
pub fn volume(space: &GwSpace, metric: &Metric) -> Result<f64> {
    let v = math::exp(log_volume(space, metric));
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::VolumeOverflow)
    }
}

/// Rescales `metric` to volume one.
pub fn normalize_to_unit_volume(space: &GwSpace, metric: &Metric) -> Metric {
    let weight: f64 = space.a.iter().map(|ai| 1.0 / ai).sum();
    let c = math::exp(-log_volume(space, metric) / weight);
    let x = metric.0;
    Metric([c * x[0], c * x[1], c * x[2]])
}

/// `true` when `phi^(2n)` stays below `10^280`.
pub(crate) fn within_power_guard(n: u32, phi: f64) -> bool {
    2.0 * n as f64 * math::log10(phi) <= POWER_GUARD_LOG10
}

/// Ricci eigenvalues written directly in phase coordinates.
///
/// With `q = phi^2 - psi^2`:
///
/// ```text
/// r1 = 1/(phi+psi) + phi psi q^(n-2)/(4^(n-1)(n+2)) - 4^(n-1)/((n+2) q^n)
/// r2 = 1/(phi-psi) - phi psi q^(n-2)/(4^(n-1)(n+2)) - 4^(n-1)/((n+2) q^n)
/// r3 = q^(n-1)/(2 4^(n-1)) - (n-1)(phi^2+psi^2) q^(n-2)/(2 4^(n-1)(n+2))
///      + 4^(n-1)(n-1)/((n+2) q^n)
/// ```
///
/// `psi` enters explicitly, so the asymmetry between `r1` and `r2` survives
/// even when `|psi|` is far below the resolution of `phi`.
pub fn ricci_phase(p: &PhasePoint) -> Result<RicciSpectrum> {
    let n = p.n;
    let (phi, psi) = (p.phi, p.psi);
    if !within_power_guard(n, phi) {
        return Err(Error::RangeExceeded { phi });
    }
    let nf = n as f64;
    let q = (phi - psi) * (phi + psi);
    let four = math::powi(4.0, n as i32 - 1);
    let q_nm2 = math::powi(q, n as i32 - 2);
    let q_n = math::powi(q, n as i32);

    let cross = phi * psi * q_nm2 / (four * (nf + 2.0));
    let inner = four / ((nf + 2.0) * q_n);
    let r1 = 1.0 / (phi + psi) + cross - inner;
    let r2 = 1.0 / (phi - psi) - cross - inner;
    let r3 = q * q_nm2 / (2.0 * four)
        - (nf - 1.0) * (phi * phi + psi * psi) * q_nm2 / (2.0 * four * (nf + 2.0))
        + (nf - 1.0) * inner;
    Ok(RicciSpectrum::new(
        [r1, r2, r3],
        [4 * (n - 1), 4 * (n - 1), 4],
    ))
}
