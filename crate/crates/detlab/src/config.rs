//! Run configuration shared by every CLI subcommand: one JSON document with
//! per-command sections, so a single manifest reproduces any experiment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TorusGeometry;
use crate::inequality::InequalityCase;
use crate::sampling::SpectrumProfile;
use crate::solver::SimParams;
use crate::sync::{CouplingSpec, NodeLayout, SyncOptions};
use crate::thresholds::{Boundary, ForcingStrength};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub geometry: TorusGeometry,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<ThresholdsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sync: Option<SyncSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inequalities: Option<InequalitiesSection>,
}

impl RunConfig {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumSection {
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsSection {
    #[serde(default = "default_agmon_cutoff")]
    pub cutoff: u64,
    #[serde(default = "default_agmon_tolerance")]
    pub tolerance: f64,
}

pub fn default_agmon_cutoff() -> u64 {
    10_000
}

pub fn default_agmon_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdsSection {
    pub queries: Vec<ThresholdQuery>,
    /// Enumerate this many eigenvalues for the sharper spectral conditions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_count: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    ModesDirichlet,
    ModesPeriodic,
    NodesPeriodic,
    ModesDamped,
    NodesDamped,
    AttractorDimension,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdQuery {
    pub theorem: ThresholdKind,
    pub forcing: ForcingStrength,
    pub nu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Boundary>,
}

/// Initial vorticity for simulations and sync experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialCondition {
    Zero,
    /// Seeded Gaussian coefficients band-limited to `|k| <= cutoff`,
    /// rescaled to the given enstrophy.
    RandomBand {
        cutoff: u32,
        enstrophy: f64,
        #[serde(default = "default_profile")]
        profile: SpectrumProfile,
        /// Defaults to the config seed when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Stationary response to the Kolmogorov shear.
    KolmogorovFixedPoint { s: u32, amplitude: f64 },
    /// Load a previously written snapshot.
    Snapshot { bin: String, meta: String },
}

pub fn default_profile() -> SpectrumProfile {
    SpectrumProfile::Flat
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateSection {
    pub grid: [usize; 2],
    pub sim: SimParams,
    pub initial: InitialCondition,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    /// Write the final state as a binary + JSON snapshot pair.
    #[serde(default)]
    pub snapshot: bool,
}

pub fn default_sample_every() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyncSection {
    pub grid: [usize; 2],
    pub sim: SimParams,
    pub coupling: CouplingSpec,
    /// Master/slave seed pairs; one sync run per pair.
    pub seed_pairs: Vec<[u64; 2]>,
    pub init: SyncInit,
    #[serde(default = "default_sync_options")]
    pub options: SyncOptions,
    /// Optional empirical threshold search over these counts (uses the
    /// first seed pair).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<Vec<usize>>,
    /// Eigenvalues to enumerate for mode projections.
    #[serde(default = "default_spectrum_count")]
    pub spectrum_count: usize,
}

pub fn default_sync_options() -> SyncOptions {
    SyncOptions::default()
}

pub fn default_spectrum_count() -> usize {
    512
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyncInit {
    pub cutoff: u32,
    pub enstrophy: f64,
    #[serde(default = "default_profile")]
    pub profile: SpectrumProfile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InequalitiesSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cases: Option<Vec<InequalityCase>>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_cutoffs")]
    pub cutoffs: Vec<u32>,
    #[serde(default = "default_node_layout")]
    pub node_layout: NodeLayout,
    #[serde(default = "default_slack")]
    pub slack: f64,
    /// Lattice cutoff for the Agmon constant feeding the bounds.
    #[serde(default = "default_ineq_agmon_cutoff")]
    pub agmon_cutoff: u64,
}

pub fn default_samples() -> usize {
    10_000
}

pub fn default_cutoffs() -> Vec<u32> {
    vec![4, 8, 16]
}

pub fn default_node_layout() -> NodeLayout {
    NodeLayout { n1: 4, n2: 4 }
}

pub fn default_slack() -> f64 {
    1e-10
}

pub fn default_ineq_agmon_cutoff() -> u64 {
    10_000
}
