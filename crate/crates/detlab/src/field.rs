//! Mean-zero spectral scalar fields on the torus wavenumber grid.
//!
//! A `VorticityField` stores Fourier coefficients `c(k)` such that
//! `phi(x) = sum_k c(k) exp(i kappa(k) . x)` with `kappa = (2 pi gamma k1/L,
//! 2 pi k2/L)`. Two invariants are maintained by construction: the `k = 0`
//! coefficient is exactly zero (mean-zero field) and `c(-k) = conj(c(k))`
//! (real physical field).

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{index_of, pad_spectrum, signed_freq, Fft2};
use crate::geometry::TorusGeometry;

#[derive(Debug, Clone, PartialEq)]
pub struct VorticityField {
    geometry: TorusGeometry,
    coeffs: Array2<Complex64>,
}

/// Sets `c(0) = 0` and projects onto the conjugate-symmetric part.
pub(crate) fn symmetrize(coeffs: &mut Array2<Complex64>) {
    let (n1, n2) = coeffs.dim();
    for i1 in 0..n1 {
        let j1 = (n1 - i1) % n1;
        for i2 in 0..n2 {
            let j2 = (n2 - i2) % n2;
            if (j1, j2) < (i1, i2) {
                continue;
            }
            let a = coeffs[[i1, i2]];
            let b = coeffs[[j1, j2]];
            let half = 0.5 * (a + b.conj());
            coeffs[[i1, i2]] = half;
            coeffs[[j1, j2]] = half.conj();
        }
    }
    coeffs[[0, 0]] = Complex64::new(0.0, 0.0);
}

impl VorticityField {
    pub fn zero(geometry: TorusGeometry, grid: (usize, usize)) -> Self {
        VorticityField {
            geometry,
            coeffs: Array2::zeros(grid),
        }
    }

    /// Builds a field from raw coefficients, validating the invariants.
    pub fn from_coeffs(geometry: TorusGeometry, coeffs: Array2<Complex64>) -> Result<Self> {
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mean = coeffs[[0, 0]].norm();
        if mean > 1e-12 * scale.max(1e-300) {
            return Err(Error::NonZeroMean(mean));
        }
        let (n1, n2) = coeffs.dim();
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let m = coeffs[[(n1 - i1) % n1, (n2 - i2) % n2]];
                let asym = (coeffs[[i1, i2]] - m.conj()).norm();
                if asym > 1e-10 * scale.max(1e-300) {
                    return Err(Error::InvalidParameter(format!(
                        "coefficients are not conjugate-symmetric at k = ({}, {})",
                        signed_freq(i1, n1),
                        signed_freq(i2, n2)
                    )));
                }
            }
        }
        let mut field = VorticityField { geometry, coeffs };
        symmetrize(&mut field.coeffs);
        Ok(field)
    }

    /// Builds a field by projecting arbitrary coefficients onto the invariant
    /// set (used after forward transforms of physical-space products).
    pub(crate) fn from_coeffs_projected(
        geometry: TorusGeometry,
        mut coeffs: Array2<Complex64>,
    ) -> Self {
        symmetrize(&mut coeffs);
        VorticityField { geometry, coeffs }
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn grid_size(&self) -> (usize, usize) {
        self.coeffs.dim()
    }

    pub fn coeffs(&self) -> &Array2<Complex64> {
        &self.coeffs
    }

    /// Coefficient of the integer mode `k`, zero when outside the grid.
    pub fn coeff(&self, k: (i64, i64)) -> Complex64 {
        let (n1, n2) = self.coeffs.dim();
        if 2 * k.0.unsigned_abs() as usize >= n1 || 2 * k.1.unsigned_abs() as usize >= n2 {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[[index_of(k.0, n1), index_of(k.1, n2)]]
    }

    /// Sets the coefficient at `k` and its conjugate mirror at `-k`.
    pub fn set_coeff(&mut self, k: (i64, i64), value: Complex64) -> Result<()> {
        if k == (0, 0) {
            return Err(Error::NonZeroMean(value.norm()));
        }
        let (n1, n2) = self.coeffs.dim();
        if 2 * k.0.unsigned_abs() as usize >= n1 || 2 * k.1.unsigned_abs() as usize >= n2 {
            return Err(Error::InvalidParameter(format!(
                "mode ({}, {}) does not fit on the {}x{} grid",
                k.0, k.1, n1, n2
            )));
        }
        self.coeffs[[index_of(k.0, n1), index_of(k.1, n2)]] = value;
        self.coeffs[[index_of(-k.0, n1), index_of(-k.1, n2)]] = value.conj();
        Ok(())
    }

    pub fn add_to_coeff(&mut self, k: (i64, i64), value: Complex64) -> Result<()> {
        let current = self.coeff(k);
        self.set_coeff(k, current + value)
    }

    /// Iterates `(k, kappa, c)` over all stored modes.
    fn for_each_mode(&self, mut f: impl FnMut((i64, i64), [f64; 2], Complex64)) {
        let (n1, n2) = self.coeffs.dim();
        for i1 in 0..n1 {
            let k1 = signed_freq(i1, n1);
            for i2 in 0..n2 {
                let k2 = signed_freq(i2, n2);
                let c = self.coeffs[[i1, i2]];
                f((k1, k2), self.geometry.wavevector((k1, k2)), c);
            }
        }
    }

    // --- norms (spectral, exact for band-limited fields) ---

    /// `||phi||_{L^2}^2 = |Omega| sum |c|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.geometry.area() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// `||grad phi||^2 = |Omega| sum |kappa|^2 |c|^2`.
    pub fn grad_norm_sq(&self) -> f64 {
        let mut s = 0.0;
        self.for_each_mode(|_, kap, c| s += (kap[0] * kap[0] + kap[1] * kap[1]) * c.norm_sqr());
        self.geometry.area() * s
    }

    /// `||Delta phi||^2 = |Omega| sum |kappa|^4 |c|^2`.
    pub fn laplacian_norm_sq(&self) -> f64 {
        let mut s = 0.0;
        self.for_each_mode(|_, kap, c| {
            let k2 = kap[0] * kap[0] + kap[1] * kap[1];
            s += k2 * k2 * c.norm_sqr()
        });
        self.geometry.area() * s
    }

    /// `||u||^2 = ||grad Delta^{-1} phi||^2 = |Omega| sum |c|^2 / |kappa|^2`
    /// for the velocity `u = rot^{-1} phi`.
    pub fn velocity_norm_sq(&self) -> f64 {
        let mut s = 0.0;
        self.for_each_mode(|k, kap, c| {
            if k != (0, 0) {
                s += c.norm_sqr() / (kap[0] * kap[0] + kap[1] * kap[1]);
            }
        });
        self.geometry.area() * s
    }

    /// Kinetic energy `(1/2) ||u||^2`.
    pub fn energy(&self) -> f64 {
        0.5 * self.velocity_norm_sq()
    }

    /// Enstrophy `(1/2) ||phi||^2`.
    pub fn enstrophy(&self) -> f64 {
        0.5 * self.l2_norm_sq()
    }

    /// `L^2` inner product `(phi, other)`.
    pub fn inner(&self, other: &VorticityField) -> Result<f64> {
        if self.grid_size() != other.grid_size() {
            return Err(Error::GridMismatch("inner product grids differ".into()));
        }
        let s: f64 = self
            .coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .sum();
        Ok(self.geometry.area() * s)
    }

    // --- diagonal spectral operators ---

    /// Stream function `psi` with `Delta psi = phi`, i.e. `psi_hat = -c/|kappa|^2`.
    pub fn poisson_invert(&self) -> Result<VorticityField> {
        if self.coeffs[[0, 0]].norm() != 0.0 {
            return Err(Error::NonZeroMean(self.coeffs[[0, 0]].norm()));
        }
        let mut out = self.clone();
        let (n1, n2) = out.coeffs.dim();
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let k = (signed_freq(i1, n1), signed_freq(i2, n2));
                if k == (0, 0) {
                    continue;
                }
                let kap = self.geometry.wavevector(k);
                out.coeffs[[i1, i2]] /= -(kap[0] * kap[0] + kap[1] * kap[1]);
            }
        }
        Ok(out)
    }

    /// `Delta phi` (coefficients multiplied by `-|kappa|^2`).
    pub fn laplacian(&self) -> VorticityField {
        let mut out = self.clone();
        let (n1, n2) = out.coeffs.dim();
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let k = (signed_freq(i1, n1), signed_freq(i2, n2));
                let kap = self.geometry.wavevector(k);
                out.coeffs[[i1, i2]] *= -(kap[0] * kap[0] + kap[1] * kap[1]);
            }
        }
        out
    }

    /// Partial derivative along `axis` (0 or 1): multiply by `i kappa_axis`.
    pub fn derivative(&self, axis: usize) -> VorticityField {
        let mut out = self.clone();
        let (n1, n2) = out.coeffs.dim();
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let k = (signed_freq(i1, n1), signed_freq(i2, n2));
                let kap = self.geometry.wavevector(k);
                out.coeffs[[i1, i2]] *= Complex64::new(0.0, kap[axis]);
            }
        }
        out
    }

    /// Spectral velocity components `u = grad^perp Delta^{-1} phi`:
    /// `u1_hat = i kappa_2 c / |kappa|^2`, `u2_hat = -i kappa_1 c / |kappa|^2`.
    pub fn velocity_coeffs(&self) -> (Array2<Complex64>, Array2<Complex64>) {
        let (n1, n2) = self.coeffs.dim();
        let mut u1 = Array2::zeros((n1, n2));
        let mut u2 = Array2::zeros((n1, n2));
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let k = (signed_freq(i1, n1), signed_freq(i2, n2));
                if k == (0, 0) {
                    continue;
                }
                let kap = self.geometry.wavevector(k);
                let ksq = kap[0] * kap[0] + kap[1] * kap[1];
                let c = self.coeffs[[i1, i2]];
                u1[[i1, i2]] = Complex64::new(0.0, kap[1] / ksq) * c;
                u2[[i1, i2]] = Complex64::new(0.0, -kap[0] / ksq) * c;
            }
        }
        (u1, u2)
    }

    // --- physical-space evaluation ---

    /// Physical samples on the native grid.
    pub fn to_physical(&self, fft: &mut Fft2) -> Array2<f64> {
        assert_eq!(fft.size(), self.grid_size(), "fft size mismatch");
        let mut buf = self.coeffs.clone();
        fft.inverse(&mut buf);
        buf.mapv(|c| c.re)
    }

    /// Physical samples on a grid enlarged `pad`-fold in each direction
    /// (exact trigonometric interpolation).
    pub fn to_physical_padded(&self, pad: usize) -> Array2<f64> {
        let (n1, n2) = self.grid_size();
        let (p1, p2) = (n1 * pad.max(1), n2 * pad.max(1));
        let mut big = pad_spectrum(&self.coeffs, p1, p2);
        let mut fft = Fft2::new(p1, p2);
        fft.inverse(&mut big);
        big.mapv(|c| c.re)
    }

    /// Max of `|phi|` over the `pad`-fold refined physical grid (a lower
    /// bound on the true sup norm).
    pub fn sup_norm(&self, pad: usize) -> f64 {
        self.to_physical_padded(pad)
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `(|k1|, |k2|)` with a nonzero coefficient.
    pub fn band_limit(&self) -> (i64, i64) {
        let (n1, n2) = self.coeffs.dim();
        let mut b = (0i64, 0i64);
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                if self.coeffs[[i1, i2]].norm_sqr() > 0.0 {
                    b.0 = b.0.max(signed_freq(i1, n1).abs());
                    b.1 = b.1.max(signed_freq(i2, n2).abs());
                }
            }
        }
        b
    }

    /// Evaluates the trigonometric polynomial at arbitrary points by direct
    /// summation over the nonzero band (exact up to round-off).
    pub fn evaluate_at(&self, points: &[[f64; 2]]) -> Vec<f64> {
        evaluate_spectral(&self.geometry, &self.coeffs, self.band_limit(), points)
            .into_iter()
            .map(|c| c.re)
            .collect()
    }

    /// Velocity vectors `u(x) = grad^perp Delta^{-1} phi (x)` at arbitrary
    /// points, reconstructed from the vorticity spectrum.
    pub fn velocity_at(&self, points: &[[f64; 2]]) -> Vec<[f64; 2]> {
        let (u1, u2) = self.velocity_coeffs();
        let band = self.band_limit();
        let v1 = evaluate_spectral(&self.geometry, &u1, band, points);
        let v2 = evaluate_spectral(&self.geometry, &u2, band, points);
        v1.into_iter()
            .zip(v2)
            .map(|(a, b)| [a.re, b.re])
            .collect()
    }

    // --- arithmetic ---

    pub fn scaled(&self, factor: f64) -> VorticityField {
        let mut out = self.clone();
        out.coeffs.mapv_inplace(|c| c * factor);
        out
    }

    pub fn add(&self, other: &VorticityField) -> Result<VorticityField> {
        if self.grid_size() != other.grid_size() {
            return Err(Error::GridMismatch("field addition grids differ".into()));
        }
        let mut out = self.clone();
        out.coeffs += &other.coeffs;
        Ok(out)
    }

    pub fn sub(&self, other: &VorticityField) -> Result<VorticityField> {
        if self.grid_size() != other.grid_size() {
            return Err(Error::GridMismatch("field subtraction grids differ".into()));
        }
        let mut out = self.clone();
        out.coeffs -= &other.coeffs;
        Ok(out)
    }

    /// Checks the two structural invariants, returning the worst deviations
    /// `(mean, asymmetry)` relative to the coefficient scale.
    pub fn invariant_deviation(&self) -> (f64, f64) {
        let (n1, n2) = self.coeffs.dim();
        let scale = self
            .coeffs
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
            .max(1e-300);
        let mean = self.coeffs[[0, 0]].norm() / scale;
        let mut asym: f64 = 0.0;
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let m = self.coeffs[[(n1 - i1) % n1, (n2 - i2) % n2]];
                asym = asym.max((self.coeffs[[i1, i2]] - m.conj()).norm() / scale);
            }
        }
        (mean, asym)
    }
}

/// Direct evaluation of `sum c(k) exp(i kappa . x)` over the band
/// `|k1| <= b1, |k2| <= b2`, using iterated complex powers (no
/// transcendental calls in the inner loop).
fn evaluate_spectral(
    geometry: &TorusGeometry,
    coeffs: &Array2<Complex64>,
    band: (i64, i64),
    points: &[[f64; 2]],
) -> Vec<Complex64> {
    let (n1, n2) = coeffs.dim();
    let (b1, b2) = band;
    let mut powers1 = vec![Complex64::new(0.0, 0.0); (2 * b1 + 1) as usize];
    let mut powers2 = vec![Complex64::new(0.0, 0.0); (2 * b2 + 1) as usize];
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let kap1 = geometry.wavevector((1, 0));
        let kap2 = geometry.wavevector((0, 1));
        let step1 = Complex64::from_polar(1.0, kap1[0] * p[0]);
        let step2 = Complex64::from_polar(1.0, kap2[1] * p[1]);
        fill_powers(&mut powers1, step1, b1);
        fill_powers(&mut powers2, step2, b2);
        let mut acc = Complex64::new(0.0, 0.0);
        for k1 in -b1..=b1 {
            let e1 = powers1[(k1 + b1) as usize];
            let i1 = index_of(k1, n1);
            let mut row = Complex64::new(0.0, 0.0);
            for k2 in -b2..=b2 {
                let c = coeffs[[i1, index_of(k2, n2)]];
                if c.norm_sqr() > 0.0 {
                    row += c * powers2[(k2 + b2) as usize];
                }
            }
            acc += e1 * row;
        }
        out.push(acc);
    }
    out
}

fn fill_powers(buf: &mut [Complex64], step: Complex64, b: i64) {
    let mid = b as usize;
    buf[mid] = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(1.0, 0.0);
    for j in 1..=b {
        acc *= step;
        buf[mid + j as usize] = acc;
        buf[mid - j as usize] = acc.conj();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square() -> TorusGeometry {
        TorusGeometry::square(2.0 * std::f64::consts::PI).unwrap()
    }

    fn single_mode(k: (i64, i64), amp: f64) -> VorticityField {
        // amp * cos(k . x)
        let mut f = VorticityField::zero(square(), (32, 32));
        f.set_coeff(k, Complex64::new(amp / 2.0, 0.0)).unwrap();
        f
    }

    #[test]
    fn poisson_single_mode_diagonal() {
        let f = single_mode((2, 1), 3.0);
        let psi = f.poisson_invert().unwrap();
        let expected = -f.coeff((2, 1)) / 5.0;
        assert_relative_eq!(psi.coeff((2, 1)).re, expected.re, epsilon = 1e-15);
    }

    #[test]
    fn laplacian_inverts_poisson() {
        let mut f = VorticityField::zero(square(), (16, 16));
        f.set_coeff((1, 2), Complex64::new(0.3, -0.4)).unwrap();
        f.set_coeff((3, -1), Complex64::new(-0.1, 0.2)).unwrap();
        let back = f.poisson_invert().unwrap().laplacian();
        for (a, b) in back.coeffs().iter().zip(f.coeffs().iter()) {
            assert_relative_eq!(a.re, b.re, epsilon = 1e-14);
            assert_relative_eq!(a.im, b.im, epsilon = 1e-14);
        }
    }

    #[test]
    fn poincare_on_stream_function() {
        // ||grad psi|| <= lambda_1^{-1/2} ||phi||
        let mut f = VorticityField::zero(square(), (16, 16));
        f.set_coeff((1, 0), Complex64::new(0.4, 0.1)).unwrap();
        f.set_coeff((2, 2), Complex64::new(-0.2, 0.3)).unwrap();
        let psi = f.poisson_invert().unwrap();
        let lhs = psi.grad_norm_sq().sqrt();
        let rhs = f.l2_norm() / square().lambda_1().sqrt();
        assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn norms_of_a_known_mode() {
        // phi = 3 cos(x1): sum |c|^2 = 2 (3/2)^2 = 9/2, |kappa| = 1, so all
        // three quadratic norms equal (9/2)|Omega|.
        let f = single_mode((1, 0), 3.0);
        let area = square().area();
        assert_relative_eq!(f.l2_norm_sq(), 4.5 * area, epsilon = 1e-10);
        assert_relative_eq!(f.grad_norm_sq(), 4.5 * area, epsilon = 1e-10);
        assert_relative_eq!(f.laplacian_norm_sq(), 4.5 * area, epsilon = 1e-10);
        assert_relative_eq!(f.sup_norm(2), 3.0, epsilon = 1e-12);
        assert_relative_eq!(f.velocity_norm_sq(), 4.5 * area, epsilon = 1e-10);
        assert_relative_eq!(f.energy(), 0.5 * 4.5 * area, epsilon = 1e-10);
    }

    #[test]
    fn physical_quadrature_matches_spectral_norm() {
        let mut f = VorticityField::zero(square(), (32, 32));
        f.set_coeff((1, 2), Complex64::new(0.5, -0.2)).unwrap();
        f.set_coeff((4, -3), Complex64::new(0.1, 0.7)).unwrap();
        let phys = f.to_physical_padded(1);
        let (n1, n2) = phys.dim();
        let cell = square().area() / (n1 * n2) as f64;
        let quad: f64 = phys.iter().map(|v| v * v).sum::<f64>() * cell;
        assert_relative_eq!(quad, f.l2_norm_sq(), max_relative = 1e-12);
    }

    #[test]
    fn point_evaluation_matches_grid() {
        let mut f = VorticityField::zero(square(), (16, 16));
        f.set_coeff((2, 1), Complex64::new(0.3, 0.4)).unwrap();
        f.set_coeff((0, 3), Complex64::new(-0.2, 0.1)).unwrap();
        let mut fft = Fft2::new(16, 16);
        let phys = f.to_physical(&mut fft);
        let h = 2.0 * std::f64::consts::PI / 16.0;
        let points: Vec<[f64; 2]> = vec![[0.0, 0.0], [3.0 * h, 5.0 * h], [h, 15.0 * h]];
        let vals = f.evaluate_at(&points);
        assert_relative_eq!(vals[0], phys[[0, 0]], epsilon = 1e-12);
        assert_relative_eq!(vals[1], phys[[3, 5]], epsilon = 1e-12);
        assert_relative_eq!(vals[2], phys[[1, 15]], epsilon = 1e-12);
    }

    #[test]
    fn velocity_of_shear_mode() {
        // phi = cos(x2) => u = (sin(x2)... check: psi = -cos(x2),
        // u1 = -d2 psi = -sin(x2), u2 = d1 psi = 0.
        let mut f = VorticityField::zero(square(), (16, 16));
        f.set_coeff((0, 1), Complex64::new(0.5, 0.0)).unwrap();
        let pts = vec![[0.0, std::f64::consts::FRAC_PI_2]];
        let v = f.velocity_at(&pts);
        assert_relative_eq!(v[0][0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(v[0][1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn constructor_rejects_nonzero_mean() {
        let mut coeffs: Array2<Complex64> = Array2::zeros((8, 8));
        coeffs[[0, 0]] = Complex64::new(1.0, 0.0);
        assert!(matches!(
            VorticityField::from_coeffs(square(), coeffs),
            Err(Error::NonZeroMean(_))
        ));
    }

    #[test]
    fn constructor_rejects_asymmetry() {
        let mut coeffs: Array2<Complex64> = Array2::zeros((8, 8));
        coeffs[[1, 0]] = Complex64::new(1.0, 0.0);
        // mirror left zero -> not conjugate symmetric
        assert!(VorticityField::from_coeffs(square(), coeffs).is_err());
    }

    #[test]
    fn invariants_reported_clean() {
        let f = single_mode((1, 1), 1.0);
        let (mean, asym) = f.invariant_deviation();
        assert_eq!(mean, 0.0);
        assert_eq!(asym, 0.0);
    }
}
