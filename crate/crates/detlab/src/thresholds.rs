//! Pure-formula calculators for determining-mode/node counts and the
//! attractor-dimension bounds.
//!
//! Every report's `required_count` is the smallest integer satisfying the
//! printed inequality: strict conditions `count > rhs` resolve to
//! `floor(rhs) + 1` (or `rhs + 1` on integers), the one non-strict
//! square-torus damped-mode condition `m + 1 >= rhs` resolves to
//! `ceil(rhs)`. Each theorem's printed relation is honored as printed.
//! When an enumerated spectrum is supplied, the sharper spectral condition
//! on `lambda_{m+1}` is evaluated against it and reported alongside.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TorusGeometry;
use crate::spectrum::LatticeSpectrum;

const PI: f64 = std::f64::consts::PI;

/// Forcing-strength inputs for threshold queries; at least the field needed
/// by the queried theorem must be populated.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ForcingStrength {
    /// `limsup ||f(t)||_{L^2}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_l2: Option<f64>,
    /// `limsup ||rot f(t)||_inf`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_inf: Option<f64>,
    /// `||rot f||_{L^2}` (autonomous dimension bounds).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rot_f_l2: Option<f64>,
}

/// Which theorem a report was produced by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    ModesDirichlet,
    ModesPeriodic,
    NodesPeriodic,
    ModesDamped,
    ModesDampedStressFree,
    NodesDamped,
}

/// Boundary conditions for the damped modes estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    StressFree,
}

/// Echo of the inputs a threshold was computed from.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InputsEcho {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_l2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_inf: Option<f64>,
    pub nu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub area: f64,
    pub gamma: f64,
}

/// One computed threshold.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    pub theorem: TheoremId,
    /// Smallest integer mode count `m` (or node count `N`) satisfying the
    /// theorem's printed inequality.
    pub required_count: u64,
    /// Right-hand side before integer resolution (the bound on `m + 1` for
    /// mode theorems, on `N` for node theorems).
    pub raw_rhs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grashof: Option<f64>,
    /// Sharper count from the spectral condition evaluated against an
    /// enumerated spectrum, when one was supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_count: Option<u64>,
    /// Node-spacing bound `l < 68^{-1/4} (mu nu / F_inf)^{1/2}` (nodes_damped).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing_bound: Option<f64>,
    pub inputs: InputsEcho,
}

/// Smallest integer strictly greater than `rhs`, at least 1.
fn strictly_above(rhs: f64) -> u64 {
    if rhs < 1.0 {
        return 1;
    }
    (rhs.floor() as u64) + 1
}

/// Smallest integer `>= rhs`, at least 1.
fn at_least(rhs: f64) -> u64 {
    if rhs <= 1.0 {
        return 1;
    }
    rhs.ceil() as u64
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")));
    }
    Ok(x)
}

fn nonnegative(name: &str, x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{name} must be nonnegative, got {x}"
        )));
    }
    Ok(x)
}

/// Smallest `m` from the spectral condition `lambda_{m+1} (>|>=) rhs`.
fn spectral_mode_count(spectrum: &LatticeSpectrum, rhs: f64, strict: bool) -> Option<u64> {
    for m in 0..spectrum.len() {
        let lam = spectrum.lambda(m + 1)?;
        if (strict && lam > rhs) || (!strict && lam >= rhs) {
            return Some(m as u64);
        }
    }
    None
}

/// Dirichlet determining modes: smallest `m` with
/// `m + 1 > (4 / 27 pi^3) G^2`, `G = f |Omega| / nu^2`.
pub fn modes_dirichlet(f_l2: f64, nu: f64, area: f64) -> Result<ThresholdReport> {
    nonnegative("f_l2", f_l2)?;
    positive("nu", nu)?;
    positive("area", area)?;
    let grashof = f_l2 * area / (nu * nu);
    let rhs = 4.0 / (27.0 * PI.powi(3)) * grashof * grashof;
    Ok(ThresholdReport {
        theorem: TheoremId::ModesDirichlet,
        required_count: strictly_above(rhs) - 1,
        raw_rhs: rhs,
        grashof: Some(grashof),
        spectral_count: None,
        spacing_bound: None,
        inputs: InputsEcho {
            f_l2: Some(f_l2),
            f_inf: None,
            nu,
            mu: None,
            area,
            gamma: f64::NAN,
        },
    })
}

/// Periodic determining modes. Square torus: `m + 1 > G / pi^{3/2}` with
/// `G = f L^2 / nu^2`; general aspect ratio: `m + 1 > 2/gamma +
/// (2/pi^2)(gamma pi)^{-1/2} f |Omega| / nu^2`. With a spectrum, also
/// resolves `lambda_{m+1} > (1/(gamma pi))^{1/2} f / nu^2`.
pub fn modes_periodic(
    f_l2: f64,
    nu: f64,
    geometry: &TorusGeometry,
    spectrum: Option<&LatticeSpectrum>,
) -> Result<ThresholdReport> {
    nonnegative("f_l2", f_l2)?;
    positive("nu", nu)?;
    let gamma = geometry.gamma();
    let area = geometry.area();
    let (rhs, grashof) = if geometry.aspect().is_square() {
        let g = f_l2 * geometry.length() * geometry.length() / (nu * nu);
        (g / PI.powf(1.5), Some(g))
    } else {
        (
            2.0 / gamma + 2.0 / (PI * PI) * (gamma * PI).powf(-0.5) * f_l2 * area / (nu * nu),
            None,
        )
    };
    let spectral_rhs = (1.0 / (gamma * PI)).sqrt() * f_l2 / (nu * nu);
    Ok(ThresholdReport {
        theorem: TheoremId::ModesPeriodic,
        required_count: strictly_above(rhs) - 1,
        raw_rhs: rhs,
        grashof,
        spectral_count: spectrum.and_then(|s| spectral_mode_count(s, spectral_rhs, true)),
        spacing_bound: None,
        inputs: InputsEcho {
            f_l2: Some(f_l2),
            f_inf: None,
            nu,
            mu: None,
            area,
            gamma,
        },
    })
}

/// Periodic determining nodes: smallest `N > (68/(gamma pi))^{1/2} f |Omega| / nu^2`.
pub fn nodes_periodic(f_l2: f64, nu: f64, geometry: &TorusGeometry) -> Result<ThresholdReport> {
    nonnegative("f_l2", f_l2)?;
    positive("nu", nu)?;
    let gamma = geometry.gamma();
    let area = geometry.area();
    let rhs = (68.0 / (gamma * PI)).sqrt() * f_l2 * area / (nu * nu);
    Ok(ThresholdReport {
        theorem: TheoremId::NodesPeriodic,
        required_count: strictly_above(rhs),
        raw_rhs: rhs,
        grashof: None,
        spectral_count: None,
        spacing_bound: None,
        inputs: InputsEcho {
            f_l2: Some(f_l2),
            f_inf: None,
            nu,
            mu: None,
            area,
            gamma,
        },
    })
}

/// Damped-system determining modes.
///
/// Periodic square torus honors the printed non-strict relation
/// `m + 1 >= (1/pi^2) F_inf L^2 / (mu nu)`; general periodic uses
/// `m + 1 > 2/gamma + (2/pi^2) F_inf |Omega| / (mu nu)`; stress-free uses
/// `m + 1 > (1/(2 pi)) F_inf |Omega| / (mu nu)`. The spectral condition is
/// `lambda_{m+1} >= F_inf / (mu nu)`.
pub fn modes_damped(
    f_inf: f64,
    mu: f64,
    nu: f64,
    geometry: &TorusGeometry,
    boundary: Boundary,
    spectrum: Option<&LatticeSpectrum>,
) -> Result<ThresholdReport> {
    nonnegative("f_inf", f_inf)?;
    positive("mu", mu)?;
    positive("nu", nu)?;
    let gamma = geometry.gamma();
    let area = geometry.area();
    let ratio = f_inf * area / (mu * nu);
    let (theorem, rhs, strict) = match boundary {
        Boundary::Periodic => {
            if geometry.aspect().is_square() {
                (TheoremId::ModesDamped, ratio / (PI * PI), false)
            } else {
                (
                    TheoremId::ModesDamped,
                    2.0 / gamma + 2.0 / (PI * PI) * ratio,
                    true,
                )
            }
        }
        Boundary::StressFree => (TheoremId::ModesDampedStressFree, ratio / (2.0 * PI), true),
    };
    let count = if strict { strictly_above(rhs) } else { at_least(rhs) };
    let spectral_rhs = f_inf / (mu * nu);
    Ok(ThresholdReport {
        theorem,
        required_count: count - 1,
        raw_rhs: rhs,
        grashof: None,
        spectral_count: spectrum.and_then(|s| spectral_mode_count(s, spectral_rhs, false)),
        spacing_bound: None,
        inputs: InputsEcho {
            f_l2: None,
            f_inf: Some(f_inf),
            nu,
            mu: Some(mu),
            area,
            gamma,
        },
    })
}

/// Damped-system determining nodes: smallest
/// `N > sqrt(68) F_inf |Omega| / (mu nu)`, with the spacing bound
/// `l < 68^{-1/4} (mu nu / F_inf)^{1/2}`.
pub fn nodes_damped(
    f_inf: f64,
    mu: f64,
    nu: f64,
    geometry: &TorusGeometry,
) -> Result<ThresholdReport> {
    nonnegative("f_inf", f_inf)?;
    positive("mu", mu)?;
    positive("nu", nu)?;
    let area = geometry.area();
    let rhs = 68.0_f64.sqrt() * f_inf * area / (mu * nu);
    let spacing = if f_inf > 0.0 {
        Some(68.0_f64.powf(-0.25) * (mu * nu / f_inf).sqrt())
    } else {
        None
    };
    Ok(ThresholdReport {
        theorem: TheoremId::NodesDamped,
        required_count: strictly_above(rhs),
        raw_rhs: rhs,
        grashof: None,
        spectral_count: None,
        spacing_bound: spacing,
        inputs: InputsEcho {
            f_l2: None,
            f_inf: Some(f_inf),
            nu,
            mu: Some(mu),
            area,
            gamma: geometry.gamma(),
        },
    })
}

/// Fractal-dimension upper bounds for the damped system on `[0, L]^2`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DimensionBound {
    /// `(6/pi^3)^{1/2} ||rot f|| L / (mu nu)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_bound: Option<f64>,
    /// `(6/pi^3)^{1/2} ||rot f||_inf L^2 / (mu nu)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inf_bound: Option<f64>,
    /// The shared coefficient `(6/pi^3)^{1/2}`.
    pub coefficient: f64,
}

/// Attractor-dimension bounds; at least one of `rot_f_l2`, `f_inf` must be
/// given.
pub fn attractor_dimension_bound(
    rot_f_l2: Option<f64>,
    f_inf: Option<f64>,
    mu: f64,
    nu: f64,
    length: f64,
) -> Result<DimensionBound> {
    positive("mu", mu)?;
    positive("nu", nu)?;
    positive("L", length)?;
    if rot_f_l2.is_none() && f_inf.is_none() {
        return Err(Error::InvalidParameter(
            "attractor dimension bound needs ||rot f|| or ||rot f||_inf".into(),
        ));
    }
    let coeff = (6.0 / PI.powi(3)).sqrt();
    Ok(DimensionBound {
        l2_bound: rot_f_l2
            .map(|r| nonnegative("rot_f_l2", r).map(|r| coeff * r * length / (mu * nu)))
            .transpose()?,
        inf_bound: f_inf
            .map(|r| nonnegative("f_inf", r).map(|r| coeff * r * length * length / (mu * nu)))
            .transpose()?,
        coefficient: coeff,
    })
}
