//! Pseudospectral integrator for the vorticity equation
//!
//! ```text
//! d/dt phi + J(Delta^{-1} phi, phi) - nu Delta phi + mu phi = rot f
//! ```
//!
//! on the periodic torus (`mu = 0` recovers the undamped system). The stiff
//! diagonal part `-(nu |kappa|^2 + mu)` is integrated exactly by an
//! exponential integrating factor; the dealiased Jacobian and the forcing
//! are treated explicitly with classical four-stage Runge-Kutta weights, so
//! pure single-mode data (where the Jacobian vanishes identically) decays
//! exactly.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{index_of, signed_freq};
use crate::field::VorticityField;
use crate::geometry::TorusGeometry;
use crate::ops::{DealiasRule, SpectralOps};

/// Any coefficient beyond this magnitude (or any non-finite value) aborts
/// the run.
pub const BLOWUP_THRESHOLD: f64 = 1e15;

/// Time dependence of the forcing amplitude.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TimeDependence {
    #[default]
    Constant,
    /// Piecewise-linear amplitude schedule `scale(times[i]) = scales[i]`,
    /// clamped outside the table.
    Prescribed { times: Vec<f64>, scales: Vec<f64> },
}

impl TimeDependence {
    pub fn scale(&self, t: f64) -> f64 {
        match self {
            TimeDependence::Constant => 1.0,
            TimeDependence::Prescribed { times, scales } => {
                if times.is_empty() {
                    return 1.0;
                }
                if t <= times[0] {
                    return scales[0];
                }
                if t >= *times.last().unwrap() {
                    return *scales.last().unwrap();
                }
                let i = times.partition_point(|&x| x <= t) - 1;
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                scales[i] * (1.0 - w) + scales[i + 1] * w
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let TimeDependence::Prescribed { times, scales } = self {
            if times.len() != scales.len() || times.is_empty() {
                return Err(Error::InvalidParameter(
                    "prescribed forcing needs equally many times and scales".into(),
                ));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidParameter(
                    "prescribed forcing times must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One spectral forcing mode for custom right-hand sides (`rot f`
/// coefficient at wavevector `(k1, k2)`; the conjugate mirror is implied).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingMode {
    pub k1: i64,
    pub k2: i64,
    pub re: f64,
    pub im: f64,
}

/// Body forcing description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ForcingSpec {
    Zero,
    /// `f = (A sin(s 2 pi x2 / L), 0)`.
    Kolmogorov {
        s: u32,
        amplitude: f64,
        #[serde(default)]
        time: TimeDependence,
    },
    /// Direct specification of `rot f` coefficients.
    SpectralCustom {
        modes: Vec<ForcingMode>,
        #[serde(default)]
        time: TimeDependence,
    },
}

impl Default for ForcingSpec {
    fn default() -> Self {
        ForcingSpec::Zero
    }
}

/// Norms of the (base) forcing used by thresholds and diagnostics.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ForcingInfo {
    /// `||rot f||_inf`.
    pub f_inf: f64,
    /// `||f||_{L^2}` (velocity forcing norm, for divergence-free `f`).
    pub f_l2: f64,
    /// `||rot f||_{L^2}`.
    pub rot_f_l2: f64,
}

impl ForcingSpec {
    pub fn time_dependence(&self) -> &TimeDependence {
        static CONSTANT: TimeDependence = TimeDependence::Constant;
        match self {
            ForcingSpec::Zero => &CONSTANT,
            ForcingSpec::Kolmogorov { time, .. } => time,
            ForcingSpec::SpectralCustom { time, .. } => time,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ForcingSpec::Zero => Ok(()),
            ForcingSpec::Kolmogorov { s, amplitude, time } => {
                if *s < 1 {
                    return Err(Error::InvalidParameter(
                        "kolmogorov forcing needs shear wavenumber s >= 1".into(),
                    ));
                }
                if !amplitude.is_finite() {
                    return Err(Error::InvalidParameter("forcing amplitude must be finite".into()));
                }
                time.validate()
            }
            ForcingSpec::SpectralCustom { modes, time } => {
                if modes.iter().any(|m| (m.k1, m.k2) == (0, 0)) {
                    return Err(Error::InvalidParameter(
                        "custom forcing may not force the mean mode".into(),
                    ));
                }
                time.validate()
            }
        }
    }

    /// Base `rot f` coefficients on the given grid.
    pub fn rot_f(&self, geometry: &TorusGeometry, grid: (usize, usize)) -> Result<VorticityField> {
        self.validate()?;
        let mut field = VorticityField::zero(*geometry, grid);
        match self {
            ForcingSpec::Zero => {}
            ForcingSpec::Kolmogorov { s, amplitude, .. } => {
                let kappa_s = geometry.wavevector((0, *s as i64))[1];
                // rot f = -A kappa_s cos(kappa_s x2)
                field.set_coeff((0, *s as i64), Complex64::new(-amplitude * kappa_s / 2.0, 0.0))?;
            }
            ForcingSpec::SpectralCustom { modes, .. } => {
                for m in modes {
                    field.add_to_coeff((m.k1, m.k2), Complex64::new(m.re, m.im))?;
                }
            }
        }
        Ok(field)
    }

    /// Characteristic norms of the base forcing. `f_inf` for the Kolmogorov
    /// shear is the exact `A 2 pi s / L`; custom spectra are measured on a
    /// refined grid.
    pub fn info(&self, geometry: &TorusGeometry, grid: (usize, usize)) -> Result<ForcingInfo> {
        let rotf = self.rot_f(geometry, grid)?;
        let f_inf = match self {
            ForcingSpec::Kolmogorov { s, amplitude, .. } => {
                (amplitude * geometry.wavevector((0, *s as i64))[1]).abs()
            }
            _ => rotf.sup_norm(2),
        };
        Ok(ForcingInfo {
            f_inf,
            f_l2: rotf.velocity_norm_sq().sqrt(),
            rot_f_l2: rotf.l2_norm(),
        })
    }
}

/// Simulation parameters for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub nu: f64,
    pub mu: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub dealias: DealiasRule,
    #[serde(default)]
    pub forcing: ForcingSpec,
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu >= 0.0) || !(self.mu >= 0.0) {
            return Err(Error::InvalidParameter("nu and mu must be nonnegative".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidParameter("t_end must be nonnegative".into()));
        }
        self.forcing.validate()
    }
}

/// Scalar diagnostics recorded along a trajectory.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiagnosticsSample {
    pub t: f64,
    /// Kinetic energy `(1/2)||u||^2`.
    pub energy: f64,
    /// Enstrophy `(1/2)||phi||^2`.
    pub enstrophy: f64,
    /// `||grad phi||^2`.
    pub grad_vorticity_sq: f64,
    /// Grid sup norm `||phi||_inf` (2x refined grid).
    pub vorticity_sup: f64,
    /// Running average of `||grad u||^2 = ||phi||^2` from t = 0.
    pub avg_grad_u_sq: f64,
    /// Running average of `||grad phi||^2` from t = 0.
    pub avg_grad_phi_sq: f64,
}

/// Result of a `run`: samples, final state and the worst per-step residual
/// of the discrete enstrophy balance.
pub struct Trajectory {
    pub samples: Vec<DiagnosticsSample>,
    pub final_state: VorticityField,
    pub max_energy_residual: f64,
}

pub(crate) struct Quadratics {
    pub l2_sq: f64,
    pub grad_sq: f64,
    pub vel_sq: f64,
    pub forcing_inner: f64,
    pub max_abs: f64,
}

/// Time stepper holding the spectral operator context and stage buffers.
pub struct Stepper {
    pub(crate) geometry: TorusGeometry,
    pub(crate) params: SimParams,
    pub(crate) ops: SpectralOps,
    pub(crate) state: Array2<Complex64>,
    pub(crate) t: f64,
    pub(crate) rotf: Array2<Complex64>,
    exp_half: Array2<f64>,
    exp_full: Array2<f64>,
    k1: Array2<Complex64>,
    k2: Array2<Complex64>,
    k3: Array2<Complex64>,
    k4: Array2<Complex64>,
    stage: Array2<Complex64>,
    forcing_info: ForcingInfo,
}

impl Stepper {
    pub fn new(initial: &VorticityField, params: SimParams) -> Result<Self> {
        params.validate()?;
        let geometry = *initial.geometry();
        let grid = initial.grid_size();
        let ops = SpectralOps::new(geometry, grid, params.dealias);
        let band = initial.band_limit();
        if band.0 > ops.dealias_band().0 || band.1 > ops.dealias_band().1 {
            return Err(Error::InvalidParameter(format!(
                "initial data band ({}, {}) exceeds the dealiased range ({}, {})",
                band.0,
                band.1,
                ops.dealias_band().0,
                ops.dealias_band().1
            )));
        }
        let rotf_field = params.forcing.rot_f(&geometry, grid)?;
        let fband = rotf_field.band_limit();
        if fband.0 > ops.dealias_band().0 || fband.1 > ops.dealias_band().1 {
            return Err(Error::InvalidParameter(
                "forcing band exceeds the dealiased range".into(),
            ));
        }
        let forcing_info = params.forcing.info(&geometry, grid)?;
        let (n1, n2) = grid;
        let mut exp_half = Array2::zeros((n1, n2));
        let mut exp_full = Array2::zeros((n1, n2));
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let k = (signed_freq(i1, n1), signed_freq(i2, n2));
                let kap = geometry.wavevector(k);
                let a = -(params.nu * (kap[0] * kap[0] + kap[1] * kap[1]) + params.mu);
                exp_half[[i1, i2]] = (a * params.dt / 2.0).exp();
                exp_full[[i1, i2]] = (a * params.dt).exp();
            }
        }
        Ok(Stepper {
            geometry,
            ops,
            state: initial.coeffs().clone(),
            t: 0.0,
            rotf: rotf_field.coeffs().clone(),
            exp_half,
            exp_full,
            k1: Array2::zeros(grid),
            k2: Array2::zeros(grid),
            k3: Array2::zeros(grid),
            k4: Array2::zeros(grid),
            stage: Array2::zeros(grid),
            forcing_info,
            params,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn forcing_info(&self) -> ForcingInfo {
        self.forcing_info
    }

    pub fn state_field(&self) -> VorticityField {
        VorticityField::from_coeffs_projected(self.geometry, self.state.clone())
    }

    /// Explicit right-hand side `N(phi, t) = -J(Delta^{-1} phi, phi) + rot f(t)`.
    pub(crate) fn rhs(&mut self, state: &Array2<Complex64>, t: f64, out: &mut Array2<Complex64>) {
        self.ops.advection(state, out);
        let s = self.params.forcing.time_dependence().scale(t);
        if s != 0.0 {
            out.zip_mut_with(&self.rotf, |o, f| *o += f * s);
        }
    }

    fn check_finite(&self) -> Result<()> {
        for c in self.state.iter() {
            if !c.re.is_finite() || !c.im.is_finite() || c.norm_sqr() > BLOWUP_THRESHOLD * BLOWUP_THRESHOLD
            {
                return Err(Error::Blowup {
                    t: self.t,
                    threshold: BLOWUP_THRESHOLD,
                });
            }
        }
        Ok(())
    }

    /// One integrating-factor RK4 step.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.params.dt;
        let t = self.t;

        let mut state = std::mem::take(&mut self.state);
        let mut k1 = std::mem::take(&mut self.k1);
        let mut k2 = std::mem::take(&mut self.k2);
        let mut k3 = std::mem::take(&mut self.k3);
        let mut k4 = std::mem::take(&mut self.k4);
        let mut stage = std::mem::take(&mut self.stage);

        self.rhs(&state, t, &mut k1);

        {
            let ss = stage.as_slice_mut().unwrap();
            let us = state.as_slice().unwrap();
            let ks = k1.as_slice().unwrap();
            let eh = self.exp_half.as_slice().unwrap();
            for i in 0..ss.len() {
                ss[i] = (us[i] + ks[i] * (dt / 2.0)) * eh[i];
            }
        }
        self.rhs(&stage, t + dt / 2.0, &mut k2);

        {
            let ss = stage.as_slice_mut().unwrap();
            let us = state.as_slice().unwrap();
            let ks = k2.as_slice().unwrap();
            let eh = self.exp_half.as_slice().unwrap();
            for i in 0..ss.len() {
                ss[i] = us[i] * eh[i] + ks[i] * (dt / 2.0);
            }
        }
        self.rhs(&stage, t + dt / 2.0, &mut k3);

        {
            let ss = stage.as_slice_mut().unwrap();
            let us = state.as_slice().unwrap();
            let ks = k3.as_slice().unwrap();
            let ef = self.exp_full.as_slice().unwrap();
            let eh = self.exp_half.as_slice().unwrap();
            for i in 0..ss.len() {
                ss[i] = us[i] * ef[i] + ks[i] * (dt * eh[i]);
            }
        }
        self.rhs(&stage, t + dt, &mut k4);

        {
            let us = state.as_slice_mut().unwrap();
            let k1s = k1.as_slice().unwrap();
            let k2s = k2.as_slice().unwrap();
            let k3s = k3.as_slice().unwrap();
            let k4s = k4.as_slice().unwrap();
            let ef = self.exp_full.as_slice().unwrap();
            let eh = self.exp_half.as_slice().unwrap();
            for i in 0..us.len() {
                us[i] = us[i] * ef[i]
                    + (k1s[i] * ef[i] + (k2s[i] + k3s[i]) * (2.0 * eh[i]) + k4s[i]) * (dt / 6.0);
            }
        }

        self.state = state;
        self.k1 = k1;
        self.k2 = k2;
        self.k3 = k3;
        self.k4 = k4;
        self.stage = stage;
        self.t += dt;
        self.check_finite()
    }

    /// Quadratic functionals of the current state in one pass.
    pub(crate) fn quadratics(&self) -> Quadratics {
        let (n1, n2) = self.state.dim();
        let area = self.geometry.area();
        let scale = self.params.forcing.time_dependence().scale(self.t);
        let mut q = Quadratics {
            l2_sq: 0.0,
            grad_sq: 0.0,
            vel_sq: 0.0,
            forcing_inner: 0.0,
            max_abs: 0.0,
        };
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let k = (signed_freq(i1, n1), signed_freq(i2, n2));
                let kap = self.geometry.wavevector(k);
                let ksq = kap[0] * kap[0] + kap[1] * kap[1];
                let c = self.state[[i1, i2]];
                let n = c.norm_sqr();
                q.l2_sq += n;
                q.grad_sq += ksq * n;
                if ksq > 0.0 {
                    q.vel_sq += n / ksq;
                }
                q.forcing_inner += (self.rotf[[i1, i2]] * scale * c.conj()).re;
                q.max_abs = q.max_abs.max(n);
            }
        }
        q.l2_sq *= area;
        q.grad_sq *= area;
        q.vel_sq *= area;
        q.forcing_inner *= area;
        q.max_abs = q.max_abs.sqrt();
        q
    }

    pub fn sup_norm(&mut self) -> f64 {
        self.ops.sup_norm(&self.state)
    }
}

/// Advances a master/slave pair one step in lockstep, with an extra explicit
/// term added to the slave right-hand side at every stage:
/// `extra(slave_stage, master_stage, t_stage, &mut slave_rhs)`.
///
/// Both steppers must share `dt`, `nu` and `mu` (the integrating factors are
/// assumed identical).
pub(crate) fn step_pair(
    master: &mut Stepper,
    slave: &mut Stepper,
    mut extra: impl FnMut(&Array2<Complex64>, &Array2<Complex64>, f64, &mut Array2<Complex64>),
) -> Result<()> {
    debug_assert_eq!(master.params.dt, slave.params.dt);
    debug_assert_eq!(master.params.nu, slave.params.nu);
    debug_assert_eq!(master.params.mu, slave.params.mu);
    let dt = master.params.dt;
    let t = master.t;

    let m_state = std::mem::take(&mut master.state);
    let s_state = std::mem::take(&mut slave.state);
    let mut mk = [
        std::mem::take(&mut master.k1),
        std::mem::take(&mut master.k2),
        std::mem::take(&mut master.k3),
        std::mem::take(&mut master.k4),
    ];
    let mut sk = [
        std::mem::take(&mut slave.k1),
        std::mem::take(&mut slave.k2),
        std::mem::take(&mut slave.k3),
        std::mem::take(&mut slave.k4),
    ];
    let mut m_stage = std::mem::take(&mut master.stage);
    let mut s_stage = std::mem::take(&mut slave.stage);

    // Stage abscissae and the states fed into each rhs evaluation.
    for stage in 0..4 {
        let t_stage = match stage {
            0 => t,
            1 | 2 => t + dt / 2.0,
            _ => t + dt,
        };
        let (m_in, s_in): (&Array2<Complex64>, &Array2<Complex64>) = if stage == 0 {
            (&m_state, &s_state)
        } else {
            (&m_stage, &s_stage)
        };
        master.rhs(m_in, t_stage, &mut mk[stage]);
        slave.rhs(s_in, t_stage, &mut sk[stage]);
        extra(s_in, m_in, t_stage, &mut sk[stage]);
        if stage == 3 {
            break;
        }
        // Prepare next stage inputs.
        let eh = master.exp_half.as_slice().unwrap();
        let ef = master.exp_full.as_slice().unwrap();
        let ms = m_state.as_slice().unwrap();
        let ss = s_state.as_slice().unwrap();
        let mss = m_stage.as_slice_mut().unwrap();
        let sss = s_stage.as_slice_mut().unwrap();
        match stage {
            0 => {
                let mks = mk[0].as_slice().unwrap();
                let sks = sk[0].as_slice().unwrap();
                for i in 0..mss.len() {
                    mss[i] = (ms[i] + mks[i] * (dt / 2.0)) * eh[i];
                    sss[i] = (ss[i] + sks[i] * (dt / 2.0)) * eh[i];
                }
            }
            1 => {
                let mks = mk[1].as_slice().unwrap();
                let sks = sk[1].as_slice().unwrap();
                for i in 0..mss.len() {
                    mss[i] = ms[i] * eh[i] + mks[i] * (dt / 2.0);
                    sss[i] = ss[i] * eh[i] + sks[i] * (dt / 2.0);
                }
            }
            _ => {
                let mks = mk[2].as_slice().unwrap();
                let sks = sk[2].as_slice().unwrap();
                for i in 0..mss.len() {
                    mss[i] = ms[i] * ef[i] + mks[i] * (dt * eh[i]);
                    sss[i] = ss[i] * ef[i] + sks[i] * (dt * eh[i]);
                }
            }
        }
    }

    let mut m_new = m_state;
    let mut s_new = s_state;
    {
        let ef = master.exp_full.as_slice().unwrap();
        let eh = master.exp_half.as_slice().unwrap();
        let mn = m_new.as_slice_mut().unwrap();
        let sn = s_new.as_slice_mut().unwrap();
        let (m1, m2, m3, m4) = (
            mk[0].as_slice().unwrap(),
            mk[1].as_slice().unwrap(),
            mk[2].as_slice().unwrap(),
            mk[3].as_slice().unwrap(),
        );
        let (s1, s2, s3, s4) = (
            sk[0].as_slice().unwrap(),
            sk[1].as_slice().unwrap(),
            sk[2].as_slice().unwrap(),
            sk[3].as_slice().unwrap(),
        );
        for i in 0..mn.len() {
            mn[i] = mn[i] * ef[i]
                + (m1[i] * ef[i] + (m2[i] + m3[i]) * (2.0 * eh[i]) + m4[i]) * (dt / 6.0);
            sn[i] = sn[i] * ef[i]
                + (s1[i] * ef[i] + (s2[i] + s3[i]) * (2.0 * eh[i]) + s4[i]) * (dt / 6.0);
        }
    }

    master.state = m_new;
    slave.state = s_new;
    let [a, b, c, d] = mk;
    master.k1 = a;
    master.k2 = b;
    master.k3 = c;
    master.k4 = d;
    let [a, b, c, d] = sk;
    slave.k1 = a;
    slave.k2 = b;
    slave.k3 = c;
    slave.k4 = d;
    master.stage = m_stage;
    slave.stage = s_stage;
    master.t += dt;
    slave.t += dt;
    master.check_finite()?;
    slave.check_finite()
}

/// Integrates `round(t_end / dt)` steps, sampling diagnostics every
/// `sample_every` steps (and at both endpoints).
pub fn run(initial: &VorticityField, params: &SimParams, sample_every: usize) -> Result<Trajectory> {
    let mut stepper = Stepper::new(initial, params.clone())?;
    let n_steps = (params.t_end / params.dt).round() as u64;
    let every = sample_every.max(1) as u64;
    let dt = params.dt;

    let mut samples = Vec::new();
    let mut int_grad_u = 0.0;
    let mut int_grad_phi = 0.0;
    let mut max_residual: f64 = 0.0;

    let mut prev = stepper.quadratics();
    let mut record =
        |stepper: &mut Stepper, q: &Quadratics, int_u: f64, int_phi: f64| {
            if cfg!(debug_assertions) {
                // zero-mean and conjugate symmetry must survive every step
                let (mean, asym) = stepper.state_field().invariant_deviation();
                debug_assert!(mean == 0.0, "mean drifted: {mean:e}");
                debug_assert!(asym < 1e-13, "conjugate symmetry drifted: {asym:e}");
            }
            let t = stepper.t();
            samples.push(DiagnosticsSample {
                t,
                energy: 0.5 * q.vel_sq,
                enstrophy: 0.5 * q.l2_sq,
                grad_vorticity_sq: q.grad_sq,
                vorticity_sup: stepper.sup_norm(),
                avg_grad_u_sq: if t > 0.0 { int_u / t } else { q.l2_sq },
                avg_grad_phi_sq: if t > 0.0 { int_phi / t } else { q.grad_sq },
            });
        };
    record(&mut stepper, &prev, int_grad_u, int_grad_phi);

    for step in 1..=n_steps {
        stepper.step()?;
        let q = stepper.quadratics();

        // Discrete enstrophy balance d/dt (1/2)||phi||^2 =
        // -nu ||grad phi||^2 - mu ||phi||^2 + (rot f, phi): per-step change
        // against the trapezoidal integral of the right-hand side, relative
        // to the enstrophy scale (dimensionless).
        let rhs_prev = -params.nu * prev.grad_sq - params.mu * prev.l2_sq + prev.forcing_inner;
        let rhs_curr = -params.nu * q.grad_sq - params.mu * q.l2_sq + q.forcing_inner;
        let d_e = 0.5 * (q.l2_sq - prev.l2_sq);
        let denom = (0.5 * q.l2_sq).max(0.5 * prev.l2_sq).max(1e-300);
        max_residual = max_residual.max((d_e - dt * 0.5 * (rhs_prev + rhs_curr)).abs() / denom);

        // ||grad u||^2 = ||phi||^2 for divergence-free periodic fields.
        int_grad_u += 0.5 * dt * (prev.l2_sq + q.l2_sq);
        int_grad_phi += 0.5 * dt * (prev.grad_sq + q.grad_sq);

        if step % every == 0 || step == n_steps {
            record(&mut stepper, &q, int_grad_u, int_grad_phi);
        }
        prev = q;
    }

    Ok(Trajectory {
        samples,
        final_state: stepper.state_field(),
        max_energy_residual: max_residual,
    })
}

/// Result of checking the a-priori time-average bounds on sliding windows.
#[derive(Debug, Clone, Serialize)]
pub struct TimeAverageCheck {
    pub window: f64,
    pub transient: f64,
    pub windows_checked: usize,
    /// Worst window average of `||grad u||^2` and the corresponding bound.
    pub grad_u_worst_avg: f64,
    pub grad_u_bound: f64,
    /// Worst ratio average/bound over windows (< 1 means the bound holds).
    pub grad_u_slack: f64,
    pub grad_phi_worst_avg: f64,
    pub grad_phi_bound: f64,
    pub grad_phi_slack: f64,
    pub pass: bool,
}

/// Checks the bounds
///
/// ```text
/// (1/T) int ||grad u||^2  <= f^2/(T nu^3 lambda_1^2) + f^2/(nu^2 lambda_1)
/// (1/T) int ||grad phi||^2 <= f^2/(T nu^3 lambda_1) + f^2/nu^2
/// ```
///
/// on every sampled sliding window of length >= `window` starting after
/// `transient`. `lambda_1` is the smallest Laplacian eigenvalue (wire it
/// from the enumerated spectrum or `TorusGeometry::lambda_1`).
pub fn verify_time_average_bounds(
    samples: &[DiagnosticsSample],
    f_l2: f64,
    nu: f64,
    lambda_1: f64,
    window: f64,
    transient: f64,
) -> Result<TimeAverageCheck> {
    if !(nu > 0.0) || !(lambda_1 > 0.0) || !(window > 0.0) {
        return Err(Error::InvalidParameter(
            "time-average check needs positive nu, lambda_1 and window".into(),
        ));
    }
    let t_last = samples.last().map(|s| s.t).unwrap_or(0.0);
    if samples.len() < 3 || t_last < transient + window {
        return Err(Error::TraceTooShort(format!(
            "trajectory must span transient + window = {}",
            transient + window
        )));
    }

    // grad_u^2 = ||phi||^2 = 2 * enstrophy
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let gu: Vec<f64> = samples.iter().map(|s| 2.0 * s.enstrophy).collect();
    let gp: Vec<f64> = samples.iter().map(|s| s.grad_vorticity_sq).collect();

    let f2 = f_l2 * f_l2;
    let mut check = TimeAverageCheck {
        window,
        transient,
        windows_checked: 0,
        grad_u_worst_avg: 0.0,
        grad_u_bound: f2 / (window * nu.powi(3) * lambda_1 * lambda_1) + f2 / (nu * nu * lambda_1),
        grad_u_slack: 0.0,
        grad_phi_worst_avg: 0.0,
        grad_phi_bound: f2 / (window * nu.powi(3) * lambda_1) + f2 / (nu * nu),
        grad_phi_slack: 0.0,
        pass: false,
    };

    for i in 0..samples.len() {
        if times[i] < transient || times[i] + window > t_last {
            continue;
        }
        // integrate to the first sample at or past times[i] + window
        let mut j = i;
        while times[j] < times[i] + window {
            j += 1;
        }
        let w = times[j] - times[i];
        let mut iu = 0.0;
        let mut ip = 0.0;
        for l in i..j {
            let h = times[l + 1] - times[l];
            iu += 0.5 * h * (gu[l] + gu[l + 1]);
            ip += 0.5 * h * (gp[l] + gp[l + 1]);
        }
        let bu = f2 / (w * nu.powi(3) * lambda_1 * lambda_1) + f2 / (nu * nu * lambda_1);
        let bp = f2 / (w * nu.powi(3) * lambda_1) + f2 / (nu * nu);
        let au = iu / w;
        let ap = ip / w;
        if au / bu > check.grad_u_slack {
            check.grad_u_slack = au / bu;
            check.grad_u_worst_avg = au;
            check.grad_u_bound = bu;
        }
        if ap / bp > check.grad_phi_slack {
            check.grad_phi_slack = ap / bp;
            check.grad_phi_worst_avg = ap;
            check.grad_phi_bound = bp;
        }
        check.windows_checked += 1;
    }
    if check.windows_checked == 0 {
        return Err(Error::TraceTooShort(
            "no complete window fits after the transient".into(),
        ));
    }
    check.pass = check.grad_u_slack < 1.0 && check.grad_phi_slack < 1.0;
    Ok(check)
}

/// Stationary vorticity amplitude of the damped linear response to the
/// Kolmogorov shear: `phi* = rot f / (nu kappa_s^2 + mu)` (the Jacobian of a
/// parallel shear vanishes).
pub fn kolmogorov_fixed_point(
    geometry: &TorusGeometry,
    grid: (usize, usize),
    s: u32,
    amplitude: f64,
    nu: f64,
    mu: f64,
) -> Result<VorticityField> {
    let forcing = ForcingSpec::Kolmogorov {
        s,
        amplitude,
        time: TimeDependence::Constant,
    };
    let rotf = forcing.rot_f(geometry, grid)?;
    let kappa_s = geometry.wavevector((0, s as i64))[1];
    Ok(rotf.scaled(1.0 / (nu * kappa_s * kappa_s + mu)))
}

/// Maps an integer mode to its flat grid index (test/bin helper).
pub fn mode_index(k: (i64, i64), grid: (usize, usize)) -> (usize, usize) {
    (index_of(k.0, grid.0), index_of(k.1, grid.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square() -> TorusGeometry {
        TorusGeometry::square(2.0 * std::f64::consts::PI).unwrap()
    }

    fn params(nu: f64, mu: f64, dt: f64, t_end: f64, forcing: ForcingSpec) -> SimParams {
        SimParams {
            nu,
            mu,
            dt,
            t_end,
            dealias: DealiasRule::TwoThirds,
            forcing,
        }
    }

    #[test]
    fn single_mode_decay_is_exact() {
        // phi0 = A cos(k.x) with f = 0: exact solution A e^{-(nu |k|^2 + mu) t}.
        let mut phi0 = VorticityField::zero(square(), (64, 64));
        phi0.set_coeff((3, 4), Complex64::new(0.7, 0.0)).unwrap();
        let (nu, mu) = (0.04, 0.3);
        let p = params(nu, mu, 0.05, 10.0, ForcingSpec::Zero);
        let traj = run(&phi0, &p, 1000).unwrap();
        let rate = nu * 25.0 + mu;
        let expected = 0.7 * (-rate * 10.0).exp();
        let got = traj.final_state.coeff((3, 4)).re;
        assert_relative_eq!(got, expected, max_relative = 1e-12);
        // ten e-foldings: rate * t = 13 > 10
        assert!(rate * 10.0 > 10.0);
    }

    #[test]
    fn inviscid_unforced_conserves_energy_and_enstrophy() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut phi0 = VorticityField::zero(square(), (64, 64));
        for k1 in -6i64..=6 {
            for k2 in -6i64..=6 {
                if (k1, k2) <= (0, 0) || k1 * k1 + k2 * k2 > 36 {
                    continue;
                }
                phi0.set_coeff(
                    (k1, k2),
                    Complex64::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)),
                )
                .unwrap();
            }
        }
        let p = params(0.0, 0.0, 0.01, 1.0, ForcingSpec::Zero);
        let traj = run(&phi0, &p, 100).unwrap();
        let e0 = traj.samples[0].energy;
        let z0 = traj.samples[0].enstrophy;
        let ef = traj.samples.last().unwrap().energy;
        let zf = traj.samples.last().unwrap().enstrophy;
        assert!((ef - e0).abs() / e0 < 1e-8, "energy drift {:e}", (ef - e0).abs() / e0);
        assert!((zf - z0).abs() / z0 < 1e-8, "enstrophy drift {:e}", (zf - z0).abs() / z0);
    }

    #[test]
    fn kolmogorov_fixed_point_is_stationary() {
        let (nu, mu) = (0.02, 0.5);
        let phi0 = kolmogorov_fixed_point(&square(), (64, 64), 3, 0.05, nu, mu).unwrap();
        let p = params(
            nu,
            mu,
            0.02,
            2.0,
            ForcingSpec::Kolmogorov {
                s: 3,
                amplitude: 0.05,
                time: TimeDependence::Constant,
            },
        );
        let traj = run(&phi0, &p, 100).unwrap();
        let drift = traj
            .final_state
            .sub(&phi0)
            .unwrap()
            .l2_norm()
            / phi0.l2_norm();
        // The Jacobian vanishes identically on the shear, so the state stays
        // at the scheme's own fixed point, which sits O((a dt)^4 / 2880) from
        // the continuous one (Simpson weights on the forcing integral).
        let rate = nu * 9.0 + mu;
        let offset = (rate * p.dt).powi(4) / 2880.0;
        assert!(drift < 10.0 * offset, "fixed point drifted by {drift:e}");
    }

    #[test]
    fn zero_everything_stays_zero() {
        let phi0 = VorticityField::zero(square(), (16, 16));
        let p = params(0.1, 0.0, 0.01, 0.2, ForcingSpec::Zero);
        let traj = run(&phi0, &p, 5).unwrap();
        for s in &traj.samples {
            assert_eq!(s.energy, 0.0);
            assert_eq!(s.enstrophy, 0.0);
            assert_eq!(s.vorticity_sup, 0.0);
        }
    }

    #[test]
    fn decaying_enstrophy_is_monotone() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut phi0 = VorticityField::zero(square(), (32, 32));
        for k1 in -4i64..=4 {
            for k2 in -4i64..=4 {
                if (k1, k2) <= (0, 0) {
                    continue;
                }
                phi0.set_coeff(
                    (k1, k2),
                    Complex64::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)),
                )
                .unwrap();
            }
        }
        let p = params(0.05, 0.0, 0.01, 2.0, ForcingSpec::Zero);
        let traj = run(&phi0, &p, 10).unwrap();
        for w in traj.samples.windows(2) {
            assert!(w[1].enstrophy <= w[0].enstrophy * (1.0 + 1e-12));
        }
    }

    #[test]
    fn energy_identity_residual_small() {
        let mut phi0 = VorticityField::zero(square(), (32, 32));
        phi0.set_coeff((1, 2), Complex64::new(0.4, 0.0)).unwrap();
        phi0.set_coeff((2, -1), Complex64::new(0.0, 0.3)).unwrap();
        let p = params(
            0.05,
            0.1,
            2e-4,
            0.02,
            ForcingSpec::Kolmogorov {
                s: 1,
                amplitude: 0.02,
                time: TimeDependence::Constant,
            },
        );
        let traj = run(&phi0, &p, 10).unwrap();
        assert!(
            traj.max_energy_residual < 1e-8,
            "residual {:e}",
            traj.max_energy_residual
        );
    }

    /// Fourth-order convergence in dt on multimode data (the single-mode
    /// case is exact, so the order shows up only through the Jacobian).
    #[test]
    fn dt_halving_shows_scheme_order() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut phi0 = VorticityField::zero(square(), (32, 32));
        for k1 in -3i64..=3 {
            for k2 in -3i64..=3 {
                if (k1, k2) <= (0, 0) {
                    continue;
                }
                phi0.set_coeff(
                    (k1, k2),
                    Complex64::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)),
                )
                .unwrap();
            }
        }
        let run_at = |dt: f64| {
            let p = params(0.02, 0.1, dt, 1.0, ForcingSpec::Zero);
            run(&phi0, &p, usize::MAX).unwrap().final_state
        };
        let reference = run_at(0.0025);
        let err = |f: &VorticityField| f.sub(&reference).unwrap().l2_norm();
        let e1 = err(&run_at(0.02));
        let e2 = err(&run_at(0.01));
        let order = (e1 / e2).log2();
        assert!(
            (3.6..4.6).contains(&order),
            "observed order {order} (errors {e1:e}, {e2:e})"
        );
    }

    /// Doubling the resolution leaves the resolved-mode dynamics unchanged
    /// for smooth, fully resolved data.
    #[test]
    fn resolution_doubling_consistency() {
        let mut phi0_lo = VorticityField::zero(square(), (32, 32));
        let mut phi0_hi = VorticityField::zero(square(), (64, 64));
        for (k, c) in [
            ((1i64, 2i64), Complex64::new(8e-4, -5e-4)),
            ((3, -1), Complex64::new(-6e-4, 2e-4)),
            ((2, 2), Complex64::new(4e-4, 7e-4)),
        ] {
            phi0_lo.set_coeff(k, c).unwrap();
            phi0_hi.set_coeff(k, c).unwrap();
        }
        let p = params(0.02, 0.0, 0.01, 1.0, ForcingSpec::Zero);
        let lo = run(&phi0_lo, &p, usize::MAX).unwrap().final_state;
        let hi = run(&phi0_hi, &p, usize::MAX).unwrap().final_state;
        let scale = lo.l2_norm();
        for k1 in -10i64..=10 {
            for k2 in -10i64..=10 {
                if (k1, k2) == (0, 0) {
                    continue;
                }
                let d = (lo.coeff((k1, k2)) - hi.coeff((k1, k2))).norm();
                assert!(
                    d <= 1e-9 * scale,
                    "mode ({k1},{k2}) differs by {d:e} across resolutions"
                );
            }
        }
    }

    #[test]
    fn blowup_detected() {
        let mut phi0 = VorticityField::zero(square(), (32, 32));
        phi0.set_coeff((1, 0), Complex64::new(1.0, 0.0)).unwrap();
        // Explosive anti-diffusion via enormous forced amplitude and dt.
        let p = params(
            0.0,
            0.0,
            1e6,
            1e8,
            ForcingSpec::SpectralCustom {
                modes: vec![ForcingMode {
                    k1: 1,
                    k2: 1,
                    re: 1e12,
                    im: 0.0,
                }],
                time: TimeDependence::Constant,
            },
        );
        match run(&phi0, &p, 1) {
            Err(Error::Blowup { .. }) => {}
            other => panic!("expected blow-up, got {:?}", other.map(|_| ()).err()),
        }
    }

    #[test]
    fn pair_step_matches_single_step_bitwise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut phi0 = VorticityField::zero(square(), (32, 32));
        for k1 in -4i64..=4 {
            for k2 in -4i64..=4 {
                if (k1, k2) <= (0, 0) {
                    continue;
                }
                phi0.set_coeff(
                    (k1, k2),
                    Complex64::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)),
                )
                .unwrap();
            }
        }
        let p = params(
            0.03,
            0.2,
            0.02,
            1.0,
            ForcingSpec::Kolmogorov {
                s: 2,
                amplitude: 0.05,
                time: TimeDependence::Constant,
            },
        );
        let mut single = Stepper::new(&phi0, p.clone()).unwrap();
        let mut master = Stepper::new(&phi0, p.clone()).unwrap();
        let mut slave = Stepper::new(&phi0, p).unwrap();
        for _ in 0..10 {
            single.step().unwrap();
            step_pair(&mut master, &mut slave, |_, _, _, _| {}).unwrap();
        }
        for (a, b) in single.state.iter().zip(master.state.iter()) {
            assert_eq!(a, b);
        }
        for (a, b) in single.state.iter().zip(slave.state.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn damped_kolmogorov_sup_bound_settles() {
        // Small grid version of the rot-infinity bound check.
        let (nu, mu) = (0.02, 1.0);
        let f_inf = 0.3_f64;
        let s = 2u32;
        let amplitude = f_inf / square().wavevector((0, s as i64))[1];
        let mut phi0 = VorticityField::zero(square(), (64, 64));
        phi0.set_coeff((1, 1), Complex64::new(0.05, 0.0)).unwrap();
        phi0.set_coeff((2, -1), Complex64::new(0.0, 0.04)).unwrap();
        let p = params(
            nu,
            mu,
            0.02,
            16.0,
            ForcingSpec::Kolmogorov {
                s,
                amplitude,
                time: TimeDependence::Constant,
            },
        );
        let traj = run(&phi0, &p, 25).unwrap();
        for sample in traj.samples.iter().filter(|s| s.t >= 10.0 / mu) {
            assert!(
                sample.vorticity_sup <= 1.05 * f_inf / mu,
                "t = {}: sup {} vs bound {}",
                sample.t,
                sample.vorticity_sup,
                1.05 * f_inf / mu
            );
        }
    }

    #[test]
    fn time_average_bound_on_decayed_run() {
        let mut phi0 = VorticityField::zero(square(), (32, 32));
        phi0.set_coeff((1, 0), Complex64::new(0.2, 0.0)).unwrap();
        let p = params(0.3, 0.0, 0.01, 6.0, ForcingSpec::Zero);
        let traj = run(&phi0, &p, 5).unwrap();
        // zero forcing: averages decay toward 0 <= bound (use tiny f > 0 to
        // keep the bound positive)
        let check =
            verify_time_average_bounds(&traj.samples, 1e-6, 0.3, square().lambda_1(), 2.0, 1.0);
        // bound is tiny but the decayed field is tinier; mainly exercise wiring
        let check = check.unwrap();
        assert!(check.windows_checked > 0);
    }

    #[test]
    fn prescribed_forcing_interpolates() {
        let td = TimeDependence::Prescribed {
            times: vec![0.0, 1.0, 2.0],
            scales: vec![0.0, 1.0, 0.5],
        };
        assert_eq!(td.scale(-1.0), 0.0);
        assert_eq!(td.scale(0.5), 0.5);
        assert_eq!(td.scale(1.5), 0.75);
        assert_eq!(td.scale(3.0), 0.5);
    }

    #[test]
    fn forcing_info_kolmogorov_relation() {
        // ||rot f_s|| = (L / sqrt(2)) ||rot f_s||_inf on the square torus
        let g = square();
        let f = ForcingSpec::Kolmogorov {
            s: 4,
            amplitude: 0.7,
            time: TimeDependence::Constant,
        };
        let info = f.info(&g, (64, 64)).unwrap();
        assert_relative_eq!(
            info.rot_f_l2,
            g.length() / 2.0_f64.sqrt() * info.f_inf,
            max_relative = 1e-12
        );
        // ||f|| = A sqrt(|Omega| / 2)
        assert_relative_eq!(info.f_l2, 0.7 * (g.area() / 2.0).sqrt(), max_relative = 1e-12);
    }
}
