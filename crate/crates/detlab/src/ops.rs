//! Pseudospectral operations on the torus grid: the dealiased Jacobian,
//! velocity synthesis and padded sup-norm evaluation.
//!
//! The Jacobian `J(a, b) = d1 a d2 b - d2 a d1 b` is formed by transforming
//! the four derivatives to physical space (two per inverse transform via the
//! usual real-field packing), multiplying pointwise and transforming back
//! with the 2/3-rule truncation. With that truncation the quadratic product
//! is alias-free, so the identities `(J(psi, phi), phi) = 0` and
//! `(J(psi, phi), psi) = 0` hold to round-off.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{pad_spectrum, signed_freq, Fft2};
use crate::field::VorticityField;
use crate::geometry::TorusGeometry;

/// Dealiasing rule for the quadratic term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DealiasRule {
    #[default]
    TwoThirds,
}

impl DealiasRule {
    /// Largest retained `|k|` per axis on a length-`n` grid.
    pub fn keep(&self, n: usize) -> i64 {
        match self {
            DealiasRule::TwoThirds => ((n - 1) / 3) as i64,
        }
    }
}

/// Cached transforms, wavenumber tables and scratch for one grid size.
pub struct SpectralOps {
    geometry: TorusGeometry,
    n1: usize,
    n2: usize,
    fft: Fft2,
    kap1: Vec<f64>,
    kap2: Vec<f64>,
    keep1: i64,
    keep2: i64,
    pack_a: Array2<Complex64>,
    pack_b: Array2<Complex64>,
}

impl SpectralOps {
    pub fn new(geometry: TorusGeometry, grid: (usize, usize), dealias: DealiasRule) -> Self {
        let (n1, n2) = grid;
        let kap1 = (0..n1)
            .map(|i| geometry.wavevector((signed_freq(i, n1), 0))[0])
            .collect();
        let kap2 = (0..n2)
            .map(|i| geometry.wavevector((0, signed_freq(i, n2)))[1])
            .collect();
        SpectralOps {
            geometry,
            n1,
            n2,
            fft: Fft2::new(n1, n2),
            kap1,
            kap2,
            keep1: dealias.keep(n1),
            keep2: dealias.keep(n2),
            pack_a: Array2::zeros((n1, n2)),
            pack_b: Array2::zeros((n1, n2)),
        }
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    /// Retained band `(|k1| <= keep1, |k2| <= keep2)`.
    pub fn dealias_band(&self) -> (i64, i64) {
        (self.keep1, self.keep2)
    }

    #[inline]
    fn ksq(&self, i1: usize, i2: usize) -> f64 {
        self.kap1[i1] * self.kap1[i1] + self.kap2[i2] * self.kap2[i2]
    }

    /// Forward transform through the cached plans (physical samples to
    /// coefficients).
    pub(crate) fn forward(&mut self, data: &mut Array2<Complex64>) {
        self.fft.forward(data);
    }

    /// Zeroes every coefficient outside the dealias band.
    pub fn apply_dealias(&self, c: &mut Array2<Complex64>) {
        for i1 in 0..self.n1 {
            let k1 = signed_freq(i1, self.n1);
            for i2 in 0..self.n2 {
                let k2 = signed_freq(i2, self.n2);
                if k1.abs() > self.keep1 || k2.abs() > self.keep2 {
                    c[[i1, i2]] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    /// Packs the two derivative fields of `source` (from its stream function
    /// when `invert_laplacian` is set), inverse-transforms, and leaves
    /// `(d1 f, d2 f)` in the (re, im) parts of `self.pack_a` / `pack_b`.
    fn derivatives_to_physical(
        &mut self,
        source: &Array2<Complex64>,
        invert_laplacian: bool,
        into_b: bool,
    ) {
        let (n1, n2) = (self.n1, self.n2);
        let buf = if into_b { &mut self.pack_b } else { &mut self.pack_a };
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let mut c = source[[i1, i2]];
                let ksq = self.kap1[i1] * self.kap1[i1] + self.kap2[i2] * self.kap2[i2];
                if invert_laplacian {
                    c = if ksq == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        -c / ksq
                    };
                }
                // pack d1 f + i d2 f: coefficients i kap1 c + i (i kap2 c)
                let d1 = Complex64::new(0.0, self.kap1[i1]) * c;
                let d2 = Complex64::new(0.0, self.kap2[i2]) * c;
                buf[[i1, i2]] = d1 + Complex64::new(0.0, 1.0) * d2;
            }
        }
        self.fft.inverse(buf);
    }

    /// Dealiased pseudospectral Jacobian of two spectral arrays
    /// (`psi` is used as given; pass `invert_first` to treat the first
    /// argument as `Delta^{-1} source`).
    fn jacobian_arrays(
        &mut self,
        psi: &Array2<Complex64>,
        invert_first: bool,
        phi: &Array2<Complex64>,
        out: &mut Array2<Complex64>,
    ) {
        self.derivatives_to_physical(psi, invert_first, false);
        self.derivatives_to_physical(phi, false, true);
        for i1 in 0..self.n1 {
            for i2 in 0..self.n2 {
                let a = self.pack_a[[i1, i2]];
                let b = self.pack_b[[i1, i2]];
                // J = d1 psi * d2 phi - d2 psi * d1 phi
                out[[i1, i2]] = Complex64::new(a.re * b.im - a.im * b.re, 0.0);
            }
        }
        self.fft.forward(out);
        self.apply_dealias(out);
        crate::field::symmetrize(out);
    }

    /// Public Jacobian of two fields, `J(psi, phi)`, dealiased and zero-mean.
    pub fn jacobian(&mut self, psi: &VorticityField, phi: &VorticityField) -> Result<VorticityField> {
        if psi.grid_size() != (self.n1, self.n2) || phi.grid_size() != (self.n1, self.n2) {
            return Err(Error::GridMismatch(
                "jacobian operands must match the operator grid".into(),
            ));
        }
        if psi.geometry() != phi.geometry() {
            return Err(Error::GridMismatch("jacobian operand geometries differ".into()));
        }
        let mut out = Array2::zeros((self.n1, self.n2));
        self.jacobian_arrays(psi.coeffs(), false, phi.coeffs(), &mut out);
        Ok(VorticityField::from_coeffs_projected(self.geometry, out))
    }

    /// `-J(Delta^{-1} phi, phi)`, the advection term of the vorticity
    /// equation, dealiased.
    pub(crate) fn advection(&mut self, phi: &Array2<Complex64>, out: &mut Array2<Complex64>) {
        self.jacobian_arrays(phi, true, phi, out);
        out.mapv_inplace(|c| -c);
    }

    /// Physical velocity components on the native grid.
    pub fn velocity_physical(&mut self, phi: &Array2<Complex64>) -> (Array2<f64>, Array2<f64>) {
        // u1 + i u2 packed: u1_hat = i kap2 c / ksq, u2_hat = -i kap1 c / ksq
        let mut pack: Array2<Complex64> = Array2::zeros((self.n1, self.n2));
        for i1 in 0..self.n1 {
            for i2 in 0..self.n2 {
                let ksq = self.ksq(i1, i2);
                if ksq == 0.0 {
                    continue;
                }
                let c = phi[[i1, i2]];
                let u1 = Complex64::new(0.0, self.kap2[i2] / ksq) * c;
                let u2 = Complex64::new(0.0, -self.kap1[i1] / ksq) * c;
                pack[[i1, i2]] = u1 + Complex64::new(0.0, 1.0) * u2;
            }
        }
        self.fft.inverse(&mut pack);
        (pack.mapv(|c| c.re), pack.mapv(|c| c.im))
    }

    /// Max of `|phi|` over a twice-refined physical grid.
    pub fn sup_norm(&mut self, phi: &Array2<Complex64>) -> f64 {
        let mut big = pad_spectrum(phi, 2 * self.n1, 2 * self.n2);
        let mut fft = Fft2::new(2 * self.n1, 2 * self.n2);
        fft.inverse(&mut big);
        big.iter().fold(0.0, |m, c| m.max(c.re.abs()))
    }
}
