//! Deterministic random band-limited fields.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::field::VorticityField;
use crate::geometry::TorusGeometry;

/// Spectral envelope applied to the i.i.d. Gaussian coefficients.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SpectrumProfile {
    /// Unit weight on every retained mode (rough fields; the default for
    /// inequality sampling).
    Flat,
    /// Smooth bump `exp(-(|kappa| - peak)^2 / (2 width^2))` centered on a
    /// physical wavenumber (turbulence-style initial data).
    GaussianBump { peak: f64, width: f64 },
}

impl SpectrumProfile {
    fn weight(&self, kappa_norm: f64) -> f64 {
        match self {
            SpectrumProfile::Flat => 1.0,
            SpectrumProfile::GaussianBump { peak, width } => {
                let d = (kappa_norm - peak) / width;
                (-0.5 * d * d).exp()
            }
        }
    }
}

/// Random zero-mean real field band-limited to `k1^2 + k2^2 <= cutoff^2`,
/// deterministic per seed. Coefficients are drawn in a fixed half-lattice
/// order, so the same seed always produces the same field.
pub fn sample_field(
    geometry: &TorusGeometry,
    grid: (usize, usize),
    cutoff: u32,
    seed: u64,
    profile: SpectrumProfile,
) -> Result<VorticityField> {
    if cutoff < 1 {
        return Err(Error::InvalidParameter("sample cutoff must be >= 1".into()));
    }
    let c = cutoff as i64;
    if 2 * c >= grid.0 as i64 || 2 * c >= grid.1 as i64 {
        return Err(Error::InvalidParameter(format!(
            "cutoff {cutoff} does not fit on the {}x{} grid",
            grid.0, grid.1
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut field = VorticityField::zero(*geometry, grid);
    // Half lattice in lexicographic order: k1 = 0 with k2 >= 1, then k1 >= 1.
    for k1 in 0..=c {
        let k2_lo = if k1 == 0 { 1 } else { -c };
        for k2 in k2_lo..=c {
            if k1 * k1 + k2 * k2 > c * c {
                continue;
            }
            let re: f64 = normal.sample(&mut rng);
            let im: f64 = normal.sample(&mut rng);
            let kap = geometry.wavevector((k1, k2));
            let w = profile.weight((kap[0] * kap[0] + kap[1] * kap[1]).sqrt());
            field.set_coeff((k1, k2), Complex64::new(re, im) * (0.5 * w))?;
        }
    }
    Ok(field)
}

/// Rescales a field to the requested enstrophy `(1/2)||phi||^2`.
pub fn normalize_enstrophy(field: &VorticityField, target: f64) -> Result<VorticityField> {
    if !(target >= 0.0) {
        return Err(Error::InvalidParameter("target enstrophy must be nonnegative".into()));
    }
    let current = field.enstrophy();
    if current == 0.0 {
        return Err(Error::InvalidParameter(
            "cannot normalize the zero field to positive enstrophy".into(),
        ));
    }
    Ok(field.scaled((target / current).sqrt()))
}
