//! Periodic domain description.
//!
//! The torus is `[0, L/gamma] x [0, L]` with aspect ratio `gamma` in `(0, 1]`,
//! so the second (short) period is `L` and the area is `L^2/gamma`. The aspect
//! ratio is kept as an exact rational `num/den` so that Laplacian eigenvalues
//! can be sorted on integer keys without floating-point ties.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational aspect ratio `gamma = num/den <= 1`, stored reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GammaSpec", into = "GammaSpec")]
pub struct AspectRatio {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl AspectRatio {
    /// Square torus, `gamma = 1`.
    pub const SQUARE: AspectRatio = AspectRatio { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidParameter(
                "aspect ratio must have positive numerator and denominator".into(),
            ));
        }
        if num > den {
            return Err(Error::InvalidParameter(format!(
                "aspect ratio {num}/{den} exceeds 1"
            )));
        }
        let g = gcd(num, den);
        Ok(AspectRatio {
            num: num / g,
            den: den / g,
        })
    }

    /// Recovers a small rational from a floating-point value (continued
    /// fractions, denominators up to 4096). Fails when no exact small
    /// rational matches.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "aspect ratio {x} outside (0, 1]"
            )));
        }
        let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
        let mut frac = x;
        for _ in 0..64 {
            let a = frac.floor();
            let (p2, q2) = (
                (a as u64).saturating_mul(p1).saturating_add(p0),
                (a as u64).saturating_mul(q1).saturating_add(q0),
            );
            if q2 > 4096 {
                break;
            }
            p0 = p1;
            q0 = q1;
            p1 = p2;
            q1 = q2;
            if (p1 as f64 / q1 as f64 - x).abs() < 1e-12 {
                return AspectRatio::new(p1, q1);
            }
            let rem = frac - a;
            if rem.abs() < 1e-15 {
                break;
            }
            frac = 1.0 / rem;
        }
        Err(Error::InvalidParameter(format!(
            "aspect ratio {x} is not a small rational; pass it as [num, den]"
        )))
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    pub fn denominator(&self) -> u64 {
        self.den
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_square(&self) -> bool {
        self.num == self.den
    }

    /// Whether `1/gamma` is an integer (validity condition for the scaled
    /// Agmon constant).
    pub fn inverse_is_integer(&self) -> bool {
        self.num == 1
    }
}

/// JSON form of the aspect ratio: either a number or a `[num, den]` pair.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GammaSpec {
    Ratio([u64; 2]),
    Value(f64),
}

impl TryFrom<GammaSpec> for AspectRatio {
    type Error = Error;
    fn try_from(spec: GammaSpec) -> Result<Self> {
        match spec {
            GammaSpec::Ratio([num, den]) => AspectRatio::new(num, den),
            GammaSpec::Value(x) => AspectRatio::from_f64(x),
        }
    }
}

impl From<AspectRatio> for GammaSpec {
    fn from(a: AspectRatio) -> Self {
        GammaSpec::Ratio([a.num, a.den])
    }
}

/// Periodic rectangle `[0, L/gamma] x [0, L]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometrySpec", into = "GeometrySpec")]
pub struct TorusGeometry {
    length: f64,
    gamma: AspectRatio,
}

/// JSON form of the geometry.
#[derive(Serialize, Deserialize)]
struct GeometrySpec {
    length: f64,
    gamma: AspectRatio,
}

impl TryFrom<GeometrySpec> for TorusGeometry {
    type Error = Error;
    fn try_from(spec: GeometrySpec) -> Result<Self> {
        TorusGeometry::new(spec.length, spec.gamma)
    }
}

impl From<TorusGeometry> for GeometrySpec {
    fn from(g: TorusGeometry) -> Self {
        GeometrySpec {
            length: g.length,
            gamma: g.gamma,
        }
    }
}

impl TorusGeometry {
    pub fn new(length: f64, gamma: AspectRatio) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "torus side length {length} must be positive"
            )));
        }
        Ok(TorusGeometry { length, gamma })
    }

    /// Square torus `[0, L]^2`.
    pub fn square(length: f64) -> Result<Self> {
        TorusGeometry::new(length, AspectRatio::SQUARE)
    }

    /// Side in the x2-direction (the short period `L`).
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.value()
    }

    pub fn aspect(&self) -> AspectRatio {
        self.gamma
    }

    /// `(L1, L2) = (L/gamma, L)`.
    pub fn periods(&self) -> (f64, f64) {
        (
            self.length * self.gamma.denominator() as f64 / self.gamma.numerator() as f64,
            self.length,
        )
    }

    /// `|Omega| = L^2/gamma`, exact in the sense `L^2 * den / num`.
    pub fn area(&self) -> f64 {
        self.length * self.length * self.gamma.denominator() as f64
            / self.gamma.numerator() as f64
    }

    /// Physical wavevector of the integer mode `k`.
    ///
    /// The Fourier basis is `exp(i (2 pi gamma k1 / L) x1 + i (2 pi k2 / L) x2)`.
    pub fn wavevector(&self, k: (i64, i64)) -> [f64; 2] {
        let base = 2.0 * std::f64::consts::PI / self.length;
        [
            base * self.gamma() * k.0 as f64,
            base * k.1 as f64,
        ]
    }

    /// Integer eigenvalue key `num^2 k1^2 + den^2 k2^2`; the physical
    /// eigenvalue is `(2 pi / L)^2 * key / den^2`.
    pub fn eigenvalue_key(&self, k: (i64, i64)) -> u64 {
        let n = self.gamma.numerator() as i128;
        let d = self.gamma.denominator() as i128;
        let k1 = k.0 as i128;
        let k2 = k.1 as i128;
        (n * n * k1 * k1 + d * d * k2 * k2) as u64
    }

    /// Converts an integer key to the physical Laplacian eigenvalue.
    pub fn eigenvalue_from_key(&self, key: u64) -> f64 {
        let base = 2.0 * std::f64::consts::PI / self.length;
        base * base * key as f64 / (self.gamma.denominator() as f64).powi(2)
    }

    /// `-Delta` eigenvalue of the mode `k`.
    pub fn eigenvalue(&self, k: (i64, i64)) -> f64 {
        self.eigenvalue_from_key(self.eigenvalue_key(k))
    }

    /// Smallest nonzero eigenvalue `lambda_1 = (2 pi / L)^2 * gamma^2` for
    /// `gamma < 1` (the `(1,0)` mode) and `(2 pi / L)^2` for the square torus.
    pub fn lambda_1(&self) -> f64 {
        let key = self
            .eigenvalue_key((1, 0))
            .min(self.eigenvalue_key((0, 1)));
        self.eigenvalue_from_key(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn area_is_exact() {
        let g = TorusGeometry::new(2.0, AspectRatio::new(1, 2).unwrap()).unwrap();
        assert_eq!(g.area(), 8.0);
        assert_eq!(g.periods(), (4.0, 2.0));
    }

    #[test]
    fn gamma_outside_unit_interval_rejected() {
        assert!(AspectRatio::new(3, 2).is_err());
        assert!(AspectRatio::new(0, 1).is_err());
        assert!(AspectRatio::from_f64(2.0).is_err());
    }

    #[test]
    fn gamma_from_float() {
        assert_eq!(AspectRatio::from_f64(0.5).unwrap(), AspectRatio::new(1, 2).unwrap());
        assert_eq!(AspectRatio::from_f64(0.25).unwrap(), AspectRatio::new(1, 4).unwrap());
        assert_eq!(AspectRatio::from_f64(1.0).unwrap(), AspectRatio::SQUARE);
    }

    #[test]
    fn eigenvalue_of_unit_modes() {
        let g = TorusGeometry::square(2.0 * std::f64::consts::PI).unwrap();
        assert_relative_eq!(g.eigenvalue((1, 0)), 1.0, max_relative = 1e-15);
        assert_relative_eq!(g.eigenvalue((1, -1)), 2.0, max_relative = 1e-15);
        assert_eq!(g.lambda_1(), g.eigenvalue((0, 1)));
    }

    #[test]
    fn anisotropic_eigenvalue_key() {
        let g = TorusGeometry::new(1.0, AspectRatio::new(1, 2).unwrap()).unwrap();
        // gamma = 1/2: lambda(k) = (2pi/L)^2 (k1^2/4 + k2^2)
        assert_eq!(g.eigenvalue_key((2, 0)), 4);
        assert_eq!(g.eigenvalue_key((0, 1)), 4);
        assert_relative_eq!(
            g.eigenvalue((2, 0)),
            (2.0 * std::f64::consts::PI).powi(2),
            max_relative = 1e-15
        );
    }
}
