//! Sharp and explicit constants used by the threshold calculators.
//!
//! The centerpiece is the sharp constant of the torus Agmon inequality
//! `||phi||_inf <= c_AT ||phi||^{1/2} ||Delta phi||^{1/2}`, given by the
//! half-lattice supremum
//!
//! ```text
//! c_AT^2 = (1/pi^2) sup_{mu > 0} mu * sum_n 1 / (mu^2 + Lambda_n^2).
//! ```
//!
//! Two quantities are computed from a truncation `Lambda_n <= cutoff`:
//!
//! * `c_at_sq_truncated`: the interior maximum of the bare truncated sum.
//!   This is the sharp constant of the inequality restricted to the span of
//!   the retained modes, and a certified lower bound for `c_AT^2`. Its
//!   maximizer `mu_star` drifts like `sqrt(cutoff)` because the full
//!   supremum is approached only as `mu -> infinity` (the objective climbs
//!   monotonically toward `pi^2/4`, the known planar value).
//! * `c_at_sq`: the truncated sum plus an analytic tail estimate, maximized
//!   over the search bracket. The tail of the half-lattice sum beyond the
//!   cutoff is approximated by its continuum density `pi/2` per unit
//!   `Lambda` together with an Abel-summation boundary correction driven by
//!   the lattice-count remainder at the cutoff. This is the quantity that is
//!   stable under cutoff doubling.
//!
//! The crude-but-rigorous tail bound obtained from `Lambda_n >= n/2` (the
//! same comparison that proves `c_AT^2 < 1/pi`) is reported separately as an
//! uncertainty, never folded into the value.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::VorticityField;
use crate::geometry::{AspectRatio, TorusGeometry};
use crate::spectrum::half_modes_up_to;

const PI: f64 = std::f64::consts::PI;

/// Search bracket for the 1-d maximization over `mu`, on a log scale.
const MU_LO: f64 = 1e-3;
const MU_HI: f64 = 1e3;

/// Aggregated half-lattice values for the square torus: `(Lambda, multiplicity)`.
fn half_lattice_values(cutoff: u64) -> Vec<(f64, f64)> {
    let geom = TorusGeometry::square(2.0 * PI).expect("unit square torus");
    let modes = half_modes_up_to(&geom, cutoff);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for m in &modes {
        match out.last_mut() {
            Some(last) if last.0 == m.key as f64 => last.1 += 1.0,
            _ => out.push((m.key as f64, 1.0)),
        }
    }
    out
}

/// The truncated objective `H_N(mu) = mu * sum_{Lambda <= N} 1/(mu^2 + Lambda^2)`.
struct LatticeSum {
    values: Vec<(f64, f64)>,
    cutoff: f64,
    half_count: f64,
    /// Circle-problem remainder at the cutoff: `#{k in Z^2 : |k|^2 <= N} - pi N`.
    remainder: f64,
}

impl LatticeSum {
    fn new(cutoff: u64) -> Self {
        let values = half_lattice_values(cutoff);
        let half_count: f64 = values.iter().map(|v| v.1).sum();
        let remainder = (2.0 * half_count + 1.0) - PI * cutoff as f64;
        LatticeSum {
            values,
            cutoff: cutoff as f64,
            half_count,
            remainder,
        }
    }

    fn truncated(&self, mu: f64) -> f64 {
        let mu2 = mu * mu;
        let mut s = 0.0;
        for &(v, m) in &self.values {
            s += m / (mu2 + v * v);
        }
        mu * s
    }

    fn truncated_derivative(&self, mu: f64) -> f64 {
        let mu2 = mu * mu;
        let mut s = 0.0;
        for &(v, m) in &self.values {
            let d = mu2 + v * v;
            s += m * (v * v - mu2) / (d * d);
        }
        s
    }

    /// Continuum tail with the Abel boundary correction.
    fn tail_estimate(&self, mu: f64) -> f64 {
        let n = self.cutoff;
        (PI / 2.0) * (PI / 2.0 - (n / mu).atan())
            - (self.remainder - 1.0) / 2.0 * mu / (mu * mu + n * n)
    }

    fn tail_estimate_derivative(&self, mu: f64) -> f64 {
        let n = self.cutoff;
        let d = mu * mu + n * n;
        (PI / 2.0) * n / d - (self.remainder - 1.0) / 2.0 * (n * n - mu * mu) / (d * d)
    }

    fn estimated(&self, mu: f64) -> f64 {
        self.truncated(mu) + self.tail_estimate(mu)
    }

    fn estimated_derivative(&self, mu: f64) -> f64 {
        self.truncated_derivative(mu) + self.tail_estimate_derivative(mu)
    }

    /// Rigorous tail bound from `Lambda_n >= n/2` and the integral comparison
    /// (Riemann sum with step `1/mu`): the tail past the `n0`-th half-lattice
    /// entry is below `2 atan(2 mu / n0)`.
    fn tail_bound(&self, mu: f64) -> f64 {
        2.0 * (2.0 * mu / self.half_count).atan()
    }
}

/// Maximizes `f` over `log mu` in `[lo, hi]` by golden-section search, then
/// refines by bisection on the sign of the analytic derivative. Returns the
/// maximizer (possibly a bracket endpoint when `f` is monotone).
fn maximize_log_bracket(
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let golden: f64 = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - golden * (b - a);
    let mut d = a + golden * (b - a);
    let (mut fc, mut fd) = (f(c.exp()), f(d.exp()));
    let budget = 300;
    let mut iters = 0;
    while b - a > 1e-10 {
        iters += 1;
        if iters > budget {
            return Err(Error::MaximizationDidNotConverge);
        }
        if fc < fd {
            a = c;
            c = d;
            fc = fd;
            d = a + golden * (b - a);
            fd = f(d.exp());
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = f(c.exp());
        }
    }
    let mut mu = ((a + b) / 2.0).exp();

    // Derivative-sign bisection within a small bracket around the golden
    // section result; falls back to the endpoint when the derivative does
    // not change sign (monotone objective).
    let mut lo_mu = (mu * 0.5).max(lo);
    let mut hi_mu = (mu * 2.0).min(hi);
    if df(lo) <= 0.0 {
        return Ok(lo);
    }
    if df(hi) >= 0.0 {
        return Ok(hi);
    }
    if df(lo_mu) <= 0.0 {
        lo_mu = lo;
    }
    if df(hi_mu) >= 0.0 {
        hi_mu = hi;
    }
    for _ in 0..200 {
        mu = (lo_mu * hi_mu).sqrt();
        if df(mu) > 0.0 {
            lo_mu = mu;
        } else {
            hi_mu = mu;
        }
        if hi_mu - lo_mu <= 1e-12 * mu {
            break;
        }
    }
    Ok((lo_mu * hi_mu).sqrt())
}

/// Result of the sharp Agmon-constant computation at one cutoff.
#[derive(Debug, Clone, Serialize)]
pub struct AgmonConstant {
    /// Best estimate of `c_AT^2` (truncated sum plus analytic tail estimate,
    /// maximized over the search bracket).
    pub c_at_sq: f64,
    /// Interior maximizer of the bare truncated sum.
    pub mu_star: f64,
    /// Maximum of the bare truncated sum over `mu`, divided by `pi^2`: the
    /// sharp constant of the mode-truncated inequality and a certified lower
    /// bound for `c_AT^2`.
    pub c_at_sq_truncated: f64,
    /// Rigorous bound (via `Lambda_n >= n/2`) on the tail contribution at
    /// `mu_star`, divided by `pi^2`. Reported as uncertainty, not added to
    /// any value.
    pub tail_bound: f64,
    /// Requested truncation `Lambda_n <= cutoff`.
    pub cutoff: u64,
    /// Number of half-lattice modes retained.
    pub half_count: u64,
    /// `|c_at_sq(cutoff) - c_at_sq(2 cutoff)|` observed during convergence
    /// validation.
    pub doubling_diff: f64,
}

fn agmon_at_cutoff(cutoff: u64) -> Result<AgmonConstant> {
    if cutoff < 2 {
        return Err(Error::InvalidParameter(
            "agmon cutoff must be at least 2".into(),
        ));
    }
    let sum = LatticeSum::new(cutoff);
    let mu_star = maximize_log_bracket(
        &|mu| sum.truncated(mu),
        &|mu| sum.truncated_derivative(mu),
        MU_LO,
        MU_HI,
    )?;
    let mu_est = maximize_log_bracket(
        &|mu| sum.estimated(mu),
        &|mu| sum.estimated_derivative(mu),
        MU_LO,
        MU_HI,
    )?;
    Ok(AgmonConstant {
        c_at_sq: sum.estimated(mu_est) / (PI * PI),
        mu_star,
        c_at_sq_truncated: sum.truncated(mu_star) / (PI * PI),
        tail_bound: sum.tail_bound(mu_star) / (PI * PI),
        cutoff,
        half_count: sum.half_count as u64,
        doubling_diff: f64::NAN,
    })
}

/// Computes the sharp Agmon constant with cutoff-doubling validation: the
/// estimates at `cutoff` and `2 * cutoff` must agree to `tolerance`,
/// otherwise `Error::NotConverged` is returned.
pub fn compute_agmon_constant(cutoff: u64, tolerance: f64) -> Result<AgmonConstant> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let mut base = agmon_at_cutoff(cutoff)?;
    let doubled = agmon_at_cutoff(cutoff * 2)?;
    let diff = (base.c_at_sq - doubled.c_at_sq).abs();
    if diff > tolerance {
        return Err(Error::NotConverged {
            observed: diff,
            tolerance,
        });
    }
    base.doubling_diff = diff;
    Ok(base)
}

/// Scaled constant `c_AT(gamma) <= c_AT / sqrt(gamma)` for the anisotropic
/// torus, with the coarse bound `1 / sqrt(gamma pi)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScaledAgmonConstant {
    /// `c_AT / sqrt(gamma)` with the supplied square-torus constant.
    pub value: f64,
    /// `1 / sqrt(gamma pi)`.
    pub coarse_bound: f64,
    /// The periodic-extension argument behind the scaling assumes `1/gamma`
    /// is an integer; false flags aspect ratios where the scaled value is
    /// used outside its proven range.
    pub valid_exact: bool,
}

pub fn scaled_agmon_constant(gamma: AspectRatio, c_at: f64) -> ScaledAgmonConstant {
    let g = gamma.value();
    ScaledAgmonConstant {
        value: c_at / g.sqrt(),
        coarse_bound: 1.0 / (g * PI).sqrt(),
        valid_exact: gamma.inverse_is_integer(),
    }
}

/// Closed-form constants used by the determining-mode/node estimates.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundConstants {
    /// Trilinear form constant `c_b = sqrt(8 / 27 pi)`.
    pub c_b: f64,
    /// Trilinear form constant `c_2 = sqrt(2) c_b = sqrt(16 / 27 pi)`.
    pub c_2: f64,
    /// Ladyzhenskaya bound `c_L(gamma) = (6 / (gamma pi))^{1/4}`.
    pub c_l: f64,
    /// `c_J(gamma) = min(c_L(gamma)^2, c_AT(gamma) bound) = 1 / sqrt(gamma pi)`.
    pub c_j: f64,
}

pub fn tabulate_bound_constants(gamma: AspectRatio) -> BoundConstants {
    let g = gamma.value();
    let c_l = (6.0 / (g * PI)).powf(0.25);
    let c_at_bound = 1.0 / (g * PI).sqrt();
    BoundConstants {
        c_b: (8.0 / (27.0 * PI)).sqrt(),
        c_2: (16.0 / (27.0 * PI)).sqrt(),
        c_l,
        c_j: (c_l * c_l).min(c_at_bound),
    }
}

/// Full constants table for one aspect ratio.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsTable {
    pub gamma: f64,
    pub c_at_squared: f64,
    pub mu_star: f64,
    pub c_at_gamma: ScaledAgmonConstant,
    pub bounds: BoundConstants,
}

impl ConstantsTable {
    pub fn assemble(gamma: AspectRatio, agmon: &AgmonConstant) -> Self {
        ConstantsTable {
            gamma: gamma.value(),
            c_at_squared: agmon.c_at_sq,
            mu_star: agmon.mu_star,
            c_at_gamma: scaled_agmon_constant(gamma, agmon.c_at_sq.sqrt()),
            bounds: tabulate_bound_constants(gamma),
        }
    }
}

/// JSON report emitted by the `constants` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsReport {
    #[serde(rename = "c_AT_sq")]
    pub c_at_sq: f64,
    pub mu_star: f64,
    pub tail_bound: f64,
    pub cutoff: u64,
    pub c_b: f64,
    pub c_2: f64,
    #[serde(rename = "c_L")]
    pub c_l: f64,
    #[serde(rename = "c_J")]
    pub c_j: f64,
}

impl ConstantsReport {
    pub fn new(agmon: &AgmonConstant, gamma: AspectRatio) -> Self {
        let bounds = tabulate_bound_constants(gamma);
        ConstantsReport {
            c_at_sq: agmon.c_at_sq,
            mu_star: agmon.mu_star,
            tail_bound: agmon.tail_bound,
            cutoff: agmon.cutoff,
            c_b: bounds.c_b,
            c_2: bounds.c_2,
            c_l: bounds.c_l,
            c_j: bounds.c_j,
        }
    }
}

/// Extremal function of the truncated Agmon inequality centered at the
/// origin:
///
/// ```text
/// phi(x) = (1/(2 pi^2)) sum_{Lambda_n <= cutoff} cos(k_n . x) / (1 + nu Lambda_n^2)
/// ```
///
/// on the square torus `[0, 2 pi]^2`, returned on a physical grid at least
/// four times the cutoff wavenumber. For `nu = 1/mu_star^2` its Agmon ratio
/// equals the truncated sharp constant.
pub fn extremal_agmon_function(nu_param: f64, cutoff: u64) -> Result<VorticityField> {
    if cutoff < 1 {
        return Err(Error::InvalidParameter(
            "extremal function cutoff must be >= 1".into(),
        ));
    }
    if !(nu_param > 0.0) {
        return Err(Error::InvalidParameter(
            "extremal function nu must be positive".into(),
        ));
    }
    let geom = TorusGeometry::square(2.0 * PI)?;
    let kmax = (cutoff as f64).sqrt().floor() as usize;
    let n = (4 * kmax.max(1)).next_power_of_two().max(16);
    let mut field = VorticityField::zero(geom, (n, n));
    for mode in half_modes_up_to(&geom, cutoff) {
        let lambda = mode.key as f64;
        // cos(k.x) contributes 1/2 at +k and -k; prefactor 1/(2 pi^2).
        let amp = 1.0 / (4.0 * PI * PI * (1.0 + nu_param * lambda * lambda));
        field.add_to_coeff(mode.k, num_complex::Complex64::new(amp, 0.0))?;
    }
    Ok(field)
}

/// Residuals of the two stationarity identities satisfied at the interior
/// maximizer `nu_star = 1/mu_star^2` of the truncated problem:
///
/// ```text
/// (1/2) sum 1/(1 + nu L^2) = nu sum L^2/(1 + nu L^2)^2 = sum 1/(1 + nu L^2)^2
/// ```
///
/// Returns the two relative residuals.
pub fn stationarity_residuals(cutoff: u64, nu_star: f64) -> (f64, f64) {
    let values = half_lattice_values(cutoff);
    let (mut s1, mut s2, mut sl) = (0.0, 0.0, 0.0);
    for &(v, m) in &values {
        let w = 1.0 + nu_star * v * v;
        s1 += m / w;
        s2 += m / (w * w);
        sl += m * v * v / (w * w);
    }
    let lhs = 0.5 * s1;
    ((lhs - nu_star * sl).abs() / lhs, (lhs - s2).abs() / lhs)
}
