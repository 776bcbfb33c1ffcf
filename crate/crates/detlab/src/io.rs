//! File formats: CSV traces, binary field snapshots with JSON sidecars, and
//! the run manifest.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::VorticityField;
use crate::geometry::{AspectRatio, TorusGeometry};
use crate::solver::DiagnosticsSample;
use crate::sync::SyncSample;

/// Trajectory diagnostics CSV: `t,energy,enstrophy,grad_vort_sq,vort_sup`.
pub fn write_trajectory_csv<W: Write>(mut w: W, samples: &[DiagnosticsSample]) -> Result<()> {
    writeln!(w, "t,energy,enstrophy,grad_vort_sq,vort_sup")?;
    for s in samples {
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            s.t, s.energy, s.enstrophy, s.grad_vorticity_sq, s.vorticity_sup
        )?;
    }
    Ok(())
}

/// Sync trace CSV: `t,gap,coupled_gap,master_velocity_norm`.
pub fn write_sync_csv<W: Write>(mut w: W, trace: &[SyncSample]) -> Result<()> {
    writeln!(w, "t,gap,coupled_gap,master_velocity_norm")?;
    for s in trace {
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e}",
            s.t, s.gap, s.coupled_gap, s.master_velocity_norm
        )?;
    }
    Ok(())
}

/// JSON sidecar of a binary snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub grid: [usize; 2],
    pub length: f64,
    pub gamma: [u64; 2],
    pub time: f64,
}

/// Writes the spectral coefficients as flat little-endian `f64` pairs
/// (re, im), row-major, plus the JSON sidecar.
pub fn write_snapshot(
    bin_path: &Path,
    meta_path: &Path,
    field: &VorticityField,
    time: f64,
) -> Result<()> {
    let (n1, n2) = field.grid_size();
    let mut bytes = Vec::with_capacity(n1 * n2 * 16);
    for c in field.coeffs().iter() {
        bytes.extend_from_slice(&c.re.to_le_bytes());
        bytes.extend_from_slice(&c.im.to_le_bytes());
    }
    fs::write(bin_path, bytes)?;
    let meta = SnapshotMeta {
        grid: [n1, n2],
        length: field.geometry().length(),
        gamma: [
            field.geometry().aspect().numerator(),
            field.geometry().aspect().denominator(),
        ],
        time,
    };
    write_json(meta_path, &meta)
}

/// Reads a snapshot pair back into a field and its time stamp.
pub fn read_snapshot(bin_path: &Path, meta_path: &Path) -> Result<(VorticityField, f64)> {
    let meta: SnapshotMeta = serde_json::from_slice(&fs::read(meta_path)?)?;
    let geometry = TorusGeometry::new(meta.length, AspectRatio::new(meta.gamma[0], meta.gamma[1])?)?;
    let mut file = fs::File::open(bin_path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    let expected = meta.grid[0] * meta.grid[1] * 16;
    if bytes.len() != expected {
        return Err(Error::Config(format!(
            "snapshot has {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let mut coeffs = Array2::zeros((meta.grid[0], meta.grid[1]));
    for (i, c) in coeffs.iter_mut().enumerate() {
        let re = f64::from_le_bytes(bytes[16 * i..16 * i + 8].try_into().unwrap());
        let im = f64::from_le_bytes(bytes[16 * i + 8..16 * i + 16].try_into().unwrap());
        *c = Complex64::new(re, im);
    }
    Ok((VorticityField::from_coeffs(geometry, coeffs)?, meta.time))
}

/// Reproducibility record written next to every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the raw config file bytes.
    pub config_hash: String,
    pub seed: u64,
    pub outputs: Vec<String>,
    /// Derived thresholds/constants the run depended on.
    pub derived: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str, config_bytes: &[u8], seed: u64) -> Self {
        Manifest {
            tool: "detlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: hex_digest(config_bytes),
            seed,
            outputs: Vec::new(),
            derived: serde_json::Value::Null,
        }
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Pretty JSON with a trailing newline (deterministic for struct-backed
/// values).
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_field, SpectrumProfile};

    #[test]
    fn snapshot_roundtrip() {
        let g = TorusGeometry::new(3.0, AspectRatio::new(1, 2).unwrap()).unwrap();
        let f = sample_field(&g, (16, 24), 3, 5, SpectrumProfile::Flat).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let bin = dir.path().join("state.bin");
        let meta = dir.path().join("state.json");
        write_snapshot(&bin, &meta, &f, 2.5).unwrap();
        let (back, t) = read_snapshot(&bin, &meta).unwrap();
        assert_eq!(t, 2.5);
        assert_eq!(back.geometry(), f.geometry());
        assert_eq!(back.coeffs(), f.coeffs());
    }

    #[test]
    fn trajectory_csv_shape() {
        let samples = vec![DiagnosticsSample {
            t: 0.5,
            energy: 1.0,
            enstrophy: 2.0,
            grad_vorticity_sq: 3.0,
            vorticity_sup: 4.0,
            avg_grad_u_sq: 0.0,
            avg_grad_phi_sq: 0.0,
        }];
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &samples).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,energy,enstrophy,grad_vort_sq,vort_sup\n"));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            hex_digest(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
