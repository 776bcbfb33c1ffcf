//! Batch front-end: wires JSON run configs to the library modules and
//! writes JSON/CSV artifacts plus a reproducibility manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use detlab::config::{InitialCondition, RunConfig, ThresholdKind};
use detlab::constants::{compute_agmon_constant, ConstantsReport};
use detlab::inequality::{run_campaign, CampaignConfig, InequalityCase};
use detlab::io::{
    read_snapshot, write_json, write_snapshot, write_sync_csv, write_trajectory_csv, Manifest,
};
use detlab::sampling::{normalize_enstrophy, sample_field};
use detlab::solver::{kolmogorov_fixed_point, run as run_sim};
use detlab::sync::{find_empirical_threshold, run_sync, CouplingKind};
use detlab::thresholds::{
    attractor_dimension_bound, modes_damped, modes_dirichlet, modes_periodic, nodes_damped,
    nodes_periodic, Boundary,
};
use detlab::{enumerate_spectrum, verify_eigenvalue_bounds, Error, VorticityField};

#[derive(Parser)]
#[command(
    name = "detlab",
    version,
    about = "Determining modes and nodes laboratory for the 2D (damped) Navier-Stokes equations"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, default_value = "detlab.json")]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel campaigns (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Enumerate the Laplacian spectrum and verify its lower bounds.
    Spectrum,
    /// Compute the sharp Agmon constant and the constants table.
    Constants,
    /// Evaluate determining-mode/node thresholds from a parameter file.
    Thresholds,
    /// Integrate the vorticity equation and record diagnostics.
    Simulate,
    /// Run master/slave synchronization experiments.
    Sync,
    /// Run the functional-inequality campaign.
    VerifyInequalities,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Constants => "constants",
            Command::Thresholds => "thresholds",
            Command::Simulate => "simulate",
            Command::Sync => "sync",
            Command::VerifyInequalities => "verify-inequalities",
        }
    }
}

/// Exit codes: 2 config/schema, 3 numerical failure, 4 inequality violation.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<Error>() {
        match e {
            Error::InvalidParameter(_)
            | Error::Config(_)
            | Error::Json(_)
            | Error::InvalidNodeLayout(_)
            | Error::GridMismatch(_)
            | Error::NonZeroMean(_)
            | Error::ModeCountExceedsSpectrum { .. }
            | Error::TraceTooShort(_) => 2,
            _ => 3,
        }
    } else if err.downcast_ref::<serde_json::Error>().is_some() {
        2
    } else {
        3
    }
}

struct Ctx {
    config: RunConfig,
    config_bytes: Vec<u8>,
    out: PathBuf,
    seed: u64,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .ok();
    }
    let config_bytes = fs::read(&cli.config)
        .map_err(|e| anyhow!(Error::Config(format!("reading {}: {e}", cli.config.display()))))?;
    let config = RunConfig::parse(&config_bytes)?;
    fs::create_dir_all(&cli.out)?;
    let ctx = Ctx {
        seed: cli.seed.unwrap_or(config.seed),
        config,
        config_bytes,
        out: cli.out.clone(),
    };
    let mut manifest = Manifest::new(cli.command.name(), &ctx.config_bytes, ctx.seed);
    let status = match cli.command {
        Command::Spectrum => cmd_spectrum(&ctx, &mut manifest)?,
        Command::Constants => cmd_constants(&ctx, &mut manifest)?,
        Command::Thresholds => cmd_thresholds(&ctx, &mut manifest)?,
        Command::Simulate => cmd_simulate(&ctx, &mut manifest)?,
        Command::Sync => cmd_sync(&ctx, &mut manifest)?,
        Command::VerifyInequalities => cmd_inequalities(&ctx, &mut manifest)?,
    };
    write_json(&ctx.path("manifest.json"), &manifest)?;
    Ok(status)
}

fn require<'a, T>(opt: &'a Option<T>, name: &str) -> anyhow::Result<&'a T> {
    opt.as_ref()
        .ok_or_else(|| anyhow!(Error::Config(format!("config is missing the `{name}` section"))))
}

fn record(manifest: &mut Manifest, path: &Path) {
    manifest
        .outputs
        .push(path.file_name().unwrap().to_string_lossy().into_owned());
}

fn cmd_spectrum(ctx: &Ctx, manifest: &mut Manifest) -> anyhow::Result<ExitCode> {
    let section = require(&ctx.config.spectrum, "spectrum")?;
    let geometry = ctx.config.geometry;
    let spectrum = enumerate_spectrum(&geometry, section.count)?;
    let report = verify_eigenvalue_bounds(&spectrum, &geometry)?;

    let csv_path = ctx.path("spectrum.csv");
    let mut file = fs::File::create(&csv_path)?;
    spectrum.write_csv(&mut file)?;
    record(manifest, &csv_path);

    let report_path = ctx.path("spectrum_bounds.json");
    write_json(&report_path, &report)?;
    record(manifest, &report_path);

    manifest.derived = json!({
        "lambda_1": geometry.lambda_1(),
        "count": section.count,
        "bounds_pass": report.all_pass(),
    });
    if report.all_pass() {
        println!(
            "spectrum: {} eigenvalues, all lower bounds hold",
            section.count
        );
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("spectrum: eigenvalue lower bound violated (enumeration bug)");
        Ok(ExitCode::from(3))
    }
}

fn cmd_constants(ctx: &Ctx, manifest: &mut Manifest) -> anyhow::Result<ExitCode> {
    let section = require(&ctx.config.constants, "constants")?;
    let agmon = compute_agmon_constant(section.cutoff, section.tolerance)?;
    if !(agmon.c_at_sq > 0.0 && agmon.c_at_sq < 1.0 / std::f64::consts::PI) {
        return Err(anyhow!(Error::NotConverged {
            observed: agmon.c_at_sq,
            tolerance: 1.0 / std::f64::consts::PI,
        })
        .context("computed c_AT^2 escaped (0, 1/pi)"));
    }
    let report = ConstantsReport::new(&agmon, ctx.config.geometry.aspect());
    let path = ctx.path("constants.json");
    write_json(&path, &report)?;
    record(manifest, &path);
    manifest.derived = serde_json::to_value(&agmon)?;
    println!(
        "constants: c_AT^2 = {:.9} (cutoff {}, doubling diff {:.2e})",
        agmon.c_at_sq, agmon.cutoff, agmon.doubling_diff
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
#[serde(untagged)]
enum ThresholdOutput {
    Count(detlab::thresholds::ThresholdReport),
    Dimension(detlab::thresholds::DimensionBound),
}

fn cmd_thresholds(ctx: &Ctx, manifest: &mut Manifest) -> anyhow::Result<ExitCode> {
    let section = require(&ctx.config.thresholds, "thresholds")?;
    let geometry = ctx.config.geometry;
    let spectrum = section
        .spectrum_count
        .map(|count| enumerate_spectrum(&geometry, count))
        .transpose()?;

    let need = |x: Option<f64>, name: &str| -> anyhow::Result<f64> {
        x.ok_or_else(|| anyhow!(Error::Config(format!("query needs forcing.{name}"))))
    };
    let mut outputs = Vec::new();
    for q in &section.queries {
        let out = match q.theorem {
            ThresholdKind::ModesDirichlet => ThresholdOutput::Count(modes_dirichlet(
                need(q.forcing.f_l2, "f_l2")?,
                q.nu,
                geometry.area(),
            )?),
            ThresholdKind::ModesPeriodic => ThresholdOutput::Count(modes_periodic(
                need(q.forcing.f_l2, "f_l2")?,
                q.nu,
                &geometry,
                spectrum.as_ref(),
            )?),
            ThresholdKind::NodesPeriodic => ThresholdOutput::Count(nodes_periodic(
                need(q.forcing.f_l2, "f_l2")?,
                q.nu,
                &geometry,
            )?),
            ThresholdKind::ModesDamped => ThresholdOutput::Count(modes_damped(
                need(q.forcing.f_inf, "f_inf")?,
                need(q.mu, "mu (top-level query field)")?,
                q.nu,
                &geometry,
                q.boundary.unwrap_or(Boundary::Periodic),
                spectrum.as_ref(),
            )?),
            ThresholdKind::NodesDamped => ThresholdOutput::Count(nodes_damped(
                need(q.forcing.f_inf, "f_inf")?,
                need(q.mu, "mu (top-level query field)")?,
                q.nu,
                &geometry,
            )?),
            ThresholdKind::AttractorDimension => {
                ThresholdOutput::Dimension(attractor_dimension_bound(
                    q.forcing.rot_f_l2,
                    q.forcing.f_inf,
                    need(q.mu, "mu (top-level query field)")?,
                    q.nu,
                    geometry.length(),
                )?)
            }
        };
        outputs.push(out);
    }
    let path = ctx.path("thresholds.json");
    write_json(&path, &outputs)?;
    record(manifest, &path);
    manifest.derived = serde_json::to_value(&outputs)?;
    println!("thresholds: {} queries evaluated", outputs.len());
    Ok(ExitCode::SUCCESS)
}

fn build_initial(
    ctx: &Ctx,
    grid: [usize; 2],
    init: &InitialCondition,
    default_seed: u64,
) -> anyhow::Result<VorticityField> {
    let geometry = ctx.config.geometry;
    Ok(match init {
        InitialCondition::Zero => VorticityField::zero(geometry, (grid[0], grid[1])),
        InitialCondition::RandomBand {
            cutoff,
            enstrophy,
            profile,
            seed,
        } => {
            let f = sample_field(
                &geometry,
                (grid[0], grid[1]),
                *cutoff,
                seed.unwrap_or(default_seed),
                *profile,
            )?;
            normalize_enstrophy(&f, *enstrophy)?
        }
        InitialCondition::KolmogorovFixedPoint { s, amplitude } => {
            let sim = &ctx
                .config
                .simulate
                .as_ref()
                .ok_or_else(|| {
                    anyhow!(Error::Config("fixed-point init needs `simulate.sim`".into()))
                })?
                .sim;
            kolmogorov_fixed_point(&geometry, (grid[0], grid[1]), *s, *amplitude, sim.nu, sim.mu)?
        }
        InitialCondition::Snapshot { bin, meta } => {
            let (field, _) = read_snapshot(Path::new(bin), Path::new(meta))?;
            field
        }
    })
}

fn cmd_simulate(ctx: &Ctx, manifest: &mut Manifest) -> anyhow::Result<ExitCode> {
    let section = require(&ctx.config.simulate, "simulate")?;
    let geometry = ctx.config.geometry;
    let initial = build_initial(ctx, section.grid, &section.initial, ctx.seed)?;
    let info = section.sim.forcing.info(&geometry, initial.grid_size())?;
    let traj = run_sim(&initial, &section.sim, section.sample_every)?;

    let csv_path = ctx.path("trajectory.csv");
    write_trajectory_csv(fs::File::create(&csv_path)?, &traj.samples)?;
    record(manifest, &csv_path);

    if section.snapshot {
        let bin = ctx.path("final_state.bin");
        let meta = ctx.path("final_state.json");
        write_snapshot(&bin, &meta, &traj.final_state, section.sim.t_end)?;
        record(manifest, &bin);
        record(manifest, &meta);
    }
    let summary_path = ctx.path("simulate_summary.json");
    let summary = json!({
        "steps": (section.sim.t_end / section.sim.dt).round() as u64,
        "max_energy_residual": traj.max_energy_residual,
        "final_energy": traj.samples.last().map(|s| s.energy),
        "final_enstrophy": traj.samples.last().map(|s| s.enstrophy),
        "forcing": { "f_inf": info.f_inf, "f_l2": info.f_l2, "rot_f_l2": info.rot_f_l2 },
    });
    write_json(&summary_path, &summary)?;
    record(manifest, &summary_path);
    manifest.derived = json!({
        "lambda_1": geometry.lambda_1(),
        "forcing": { "f_inf": info.f_inf, "f_l2": info.f_l2, "rot_f_l2": info.rot_f_l2 },
    });
    println!(
        "simulate: {} samples, max energy-identity residual {:.2e}",
        traj.samples.len(),
        traj.max_energy_residual
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_sync(ctx: &Ctx, manifest: &mut Manifest) -> anyhow::Result<ExitCode> {
    let section = require(&ctx.config.sync, "sync")?;
    let geometry = ctx.config.geometry;
    let grid = (section.grid[0], section.grid[1]);
    let spectrum = enumerate_spectrum(&geometry, section.spectrum_count)?;
    let info = section.sim.forcing.info(&geometry, grid)?;

    // Theoretical threshold for the configured coupling (damped system).
    let theoretical = if section.sim.mu > 0.0 {
        match section.coupling.kind {
            CouplingKind::ModeProjection { .. } => modes_damped(
                info.f_inf,
                section.sim.mu,
                section.sim.nu,
                &geometry,
                Boundary::Periodic,
                Some(&spectrum),
            )
            .map(|r| r.required_count)
            .ok(),
            CouplingKind::NodeValues { .. } => {
                nodes_damped(info.f_inf, section.sim.mu, section.sim.nu, &geometry)
                    .map(|r| r.required_count)
                    .ok()
            }
        }
    } else {
        None
    };

    let make_init = |seed: u64| -> anyhow::Result<VorticityField> {
        let f = sample_field(&geometry, grid, section.init.cutoff, seed, section.init.profile)?;
        Ok(normalize_enstrophy(&f, section.init.enstrophy)?)
    };

    let mut runs = Vec::new();
    for (i, pair) in section.seed_pairs.iter().enumerate() {
        let master = make_init(pair[0])?;
        let slave = make_init(pair[1])?;
        let result = run_sync(
            &master,
            &slave,
            &section.sim,
            &section.coupling,
            &spectrum,
            &section.options,
        )?;
        let csv_path = ctx.path(&format!("sync_{i}.csv"));
        write_sync_csv(fs::File::create(&csv_path)?, &result.trace)?;
        record(manifest, &csv_path);
        println!(
            "sync[{i}]: converged = {}, final relative gap = {:.3e}, decay rate = {:.3}",
            result.converged, result.final_gap_rel, result.decay_rate_estimate
        );
        runs.push(json!({
            "seeds": pair,
            "converged": result.converged,
            "final_gap": result.final_gap,
            "final_gap_rel": result.final_gap_rel,
            "decay_rate_estimate": result.decay_rate_estimate,
        }));
    }

    let mut empirical: Option<usize> = None;
    let search = match &section.search {
        None => serde_json::Value::Null,
        Some(candidates) => {
            let pair = section.seed_pairs.first().copied().unwrap_or([1, 2]);
            let master = make_init(pair[0])?;
            let slave = make_init(pair[1])?;
            let result = find_empirical_threshold(candidates, |count| {
                let mut coupling = section.coupling;
                match &mut coupling.kind {
                    CouplingKind::ModeProjection { m } => *m = count,
                    CouplingKind::NodeValues { layout } => {
                        *layout = detlab::sync::NodeLayout::at_least_square(count as u64);
                    }
                }
                run_sync(
                    &master,
                    &slave,
                    &section.sim,
                    &coupling,
                    &spectrum,
                    &section.options,
                )
            })?;
            println!(
                "sync search: empirical threshold {} (theoretical {:?})",
                result.count_star, theoretical
            );
            empirical = Some(result.count_star);
            serde_json::to_value(&result)?
        }
    };

    let summary_path = ctx.path("sync_summary.json");
    let ratio = match (empirical, theoretical) {
        (Some(e), Some(t)) if t > 0 => Some(e as f64 / t as f64),
        _ => None,
    };
    let summary = json!({
        "theoretical_threshold": theoretical,
        "empirical_threshold": empirical,
        "empirical_to_theoretical_ratio": ratio,
        "coupling": section.coupling,
        "forcing": { "f_inf": info.f_inf, "f_l2": info.f_l2 },
        "runs": runs,
        "search": search,
    });
    write_json(&summary_path, &summary)?;
    record(manifest, &summary_path);
    manifest.derived = json!({
        "theoretical_threshold": theoretical,
        "f_inf": info.f_inf,
        "lambda_1": geometry.lambda_1(),
    });
    Ok(ExitCode::SUCCESS)
}

fn cmd_inequalities(ctx: &Ctx, manifest: &mut Manifest) -> anyhow::Result<ExitCode> {
    let section = require(&ctx.config.inequalities, "inequalities")?;
    let geometry = ctx.config.geometry;
    let agmon = compute_agmon_constant(section.agmon_cutoff, 1e-4)?;
    let config = CampaignConfig {
        cases: section
            .cases
            .clone()
            .unwrap_or_else(|| InequalityCase::ALL.to_vec()),
        samples: section.samples,
        cutoffs: section.cutoffs.clone(),
        node_layout: section.node_layout,
        slack: section.slack,
        seed0: ctx.seed.max(1),
        c_at: agmon.c_at_sq.sqrt(),
    };
    let reports = run_campaign(&geometry, &config)?;
    let path = ctx.path("inequalities.json");
    write_json(&path, &reports)?;
    record(manifest, &path);

    let violations: usize = reports.iter().map(|r| r.violations.len()).sum();
    manifest.derived = json!({
        "c_at_sq": agmon.c_at_sq,
        "violations": violations,
    });
    for r in &reports {
        println!(
            "{}: max ratio {:.6} vs bound {:.6} ({} samples, {} violations)",
            r.case.name(),
            r.max_ratio,
            r.constant_bound,
            r.samples,
            r.violations.len()
        );
    }
    if violations > 0 {
        eprintln!("inequality violations detected");
        return Ok(ExitCode::from(4));
    }
    Ok(ExitCode::SUCCESS)
}
