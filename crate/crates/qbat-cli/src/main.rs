//! `qbat`: experiment runner for quantum-battery figure data.
//!
//! Subcommands: surface, scatter, bounds, dynamics, verify, manifest.
//! Every data-producing run writes a CSV plus `<out>.manifest.json`; re-running
//! a manifest reproduces the CSV byte for byte, regardless of thread count.
//!
//! Exit codes: 0 success, 2 configuration error, 3 invariant violation.

mod csvio;
mod jobs;
mod manifest;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail};
use clap::{Args, Parser, Subcommand};

use jobs::{
    parse_fers_ratio, parse_fprs_weights, DynamicsParams, InvariantFailure, RawConfig,
    ResolvedJob, ScatterKind, ScatterParams,
};

#[derive(Parser)]
#[command(name = "qbat", version, about = "Quantum-battery experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Population-grid data: incoherent ergotropy, stored energy, and the
    /// ergotropy bounds over the population simplex.
    Surface(SurfaceArgs),
    /// Random-state scatter data for one experiment kind.
    Scatter(ScatterArgs),
    /// Coherent-ergotropy envelope band over a coherence grid.
    Bounds(BoundsArgs),
    /// Charging trajectory of a cavity battery model.
    Dynamics(DynamicsArgs),
    /// Re-validate an emitted CSV against the module invariants.
    Verify(VerifyArgs),
    /// Re-run the job recorded in a manifest.
    Manifest(ManifestArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SurfaceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Battery dimension (2 or 3).
    #[arg(long)]
    dim: Option<usize>,
    /// Grid points per population axis.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args)]
struct ScatterArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// scatter-coherent | scatter-incoherent | scatter-purity | locked-vs-pr
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    samples: Option<u64>,
    /// Mandatory for scatter jobs; there is no wall-clock seeding.
    #[arg(long)]
    seed: Option<u64>,
    /// hsrs | fers | fprs (defaults depend on the experiment kind).
    #[arg(long)]
    sampler: Option<String>,
    /// FERS ratio `N/N_HS` or FPRS region weights `L:M:H`.
    #[arg(long)]
    weights: Option<String>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    dim: Option<usize>,
    /// Coherence grid size.
    #[arg(long)]
    grid: Option<usize>,
    /// Score against the seeded GUE Hamiltonian instead of the equally
    /// spaced one (matches a scatter job with the same seed and dim).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DynamicsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// jc | tc | dicke
    #[arg(long)]
    model: Option<String>,
    /// Number of battery atoms.
    #[arg(long)]
    nb: Option<usize>,
    /// Charger occupancy (mean photons for coherent, integer for fock).
    #[arg(long)]
    nc: Option<f64>,
    /// coherent | fock
    #[arg(long)]
    charger: Option<String>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    /// Integrator step (open system) or output spacing (closed system).
    #[arg(long)]
    dt: Option<f64>,
    /// Emit every k-th step.
    #[arg(long)]
    stride: Option<usize>,
    /// Fock truncation override.
    #[arg(long)]
    n_max: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// CSV file to validate.
    file: PathBuf,
    /// Manifest to cross-check row counts and column schemas against.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct ManifestArgs {
    /// Manifest JSON produced by an earlier run.
    file: PathBuf,
    /// Redirect the reproduced CSV (defaults to the recorded path).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.chain().any(|c| c.is::<InvariantFailure>()) {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn load_config(common: &CommonArgs) -> anyhow::Result<RawConfig> {
    match &common.config {
        Some(path) => RawConfig::load(path),
        None => Ok(RawConfig::default()),
    }
}

fn required_out(common: &CommonArgs, file: &RawConfig) -> anyhow::Result<String> {
    common
        .out
        .clone()
        .or_else(|| file.out.clone())
        .map(|p| p.display().to_string())
        .ok_or_else(|| anyhow!("--out is required"))
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Surface(args) => {
            let file = load_config(&args.common)?;
            let job = ResolvedJob::Surface {
                dim: args.dim.or(file.dim).unwrap_or(3),
                grid: args.grid.or(file.grid).unwrap_or(201),
                out: required_out(&args.common, &file)?,
            };
            finish(jobs::run(job)?)
        }
        Command::Scatter(args) => {
            let file = load_config(&args.common)?;
            let kind_name = args
                .experiment
                .or(file.experiment.clone())
                .unwrap_or_else(|| "scatter-coherent".to_string());
            let kind = ScatterKind::parse(&kind_name).ok_or_else(|| {
                anyhow!(
                    "unknown experiment `{kind_name}` (expected scatter-coherent, \
                     scatter-incoherent, scatter-purity, or locked-vs-pr)"
                )
            })?;
            let seed = args
                .seed
                .or(file.seed)
                .ok_or_else(|| anyhow!("--seed is mandatory for scatter jobs"))?;
            let sampler_name = args.sampler.or(file.sampler.clone());
            let weights = args.weights.or(file.weights.clone());
            let mut params = ScatterParams {
                dim: args.dim.or(file.dim).unwrap_or(3),
                samples: args.samples.or(file.samples).unwrap_or(100_000),
                seed,
                sampler: String::new(),
                fers_ratio: [3, 2],
                fprs_weights: [0.2, 0.5, 0.3],
                out: required_out(&args.common, &file)?,
            };
            params.sampler = match sampler_name {
                Some(s) => s,
                None => default_sampler_name(kind).to_string(),
            };
            if let Some(w) = weights {
                match params.sampler.as_str() {
                    "fers" => params.fers_ratio = parse_fers_ratio(&w)?,
                    "fprs" => params.fprs_weights = parse_fprs_weights(&w)?,
                    other => bail!("--weights is not meaningful for sampler `{other}`"),
                }
            }
            let job = match kind {
                ScatterKind::ScatterCoherent => ResolvedJob::ScatterCoherent(params),
                ScatterKind::ScatterIncoherent => ResolvedJob::ScatterIncoherent(params),
                ScatterKind::ScatterPurity => ResolvedJob::ScatterPurity(params),
                ScatterKind::LockedVsPr => ResolvedJob::LockedVsPr(params),
            };
            finish(jobs::run(job)?)
        }
        Command::Bounds(args) => {
            let file = load_config(&args.common)?;
            let job = ResolvedJob::BoundsBand {
                dim: args.dim.or(file.dim).unwrap_or(3),
                grid: args.grid.or(file.grid).unwrap_or(512),
                seed: args.seed.or(file.seed),
                out: required_out(&args.common, &file)?,
            };
            finish(jobs::run(job)?)
        }
        Command::Dynamics(args) => {
            let file = load_config(&args.common)?;
            let model = args.model.or(file.model.clone()).unwrap_or_else(|| "jc".into());
            let (default_nb, default_charger, default_kappa) = match model.as_str() {
                "tc" => (2, "coherent", 0.0),
                "dicke" => (2, "fock", 0.5),
                _ => (1, "coherent", 0.0),
            };
            let kappa = args.kappa.or(file.kappa).unwrap_or(default_kappa);
            let g = args.g.or(file.g).unwrap_or(0.1);
            let tmax = args.tmax.or(file.tmax).unwrap_or(20.0 / g);
            let open = model == "dicke" && kappa > 0.0;
            let dt = args.dt.or(file.dt).unwrap_or(if open { 1e-3 } else { tmax / 2000.0 });
            let stride = args.stride.or(file.stride).unwrap_or_else(|| {
                if open {
                    let steps = (tmax / dt).round() as usize;
                    (steps / 2000).max(1)
                } else {
                    1
                }
            });
            let params = DynamicsParams {
                model,
                n_atoms: args.nb.or(file.nb).unwrap_or(default_nb),
                charger: args
                    .charger
                    .or(file.charger.clone())
                    .unwrap_or_else(|| default_charger.to_string()),
                n_c: args.nc.or(file.nc).unwrap_or(4.0),
                omega: args.omega.or(file.omega).unwrap_or(1.0),
                g,
                kappa,
                t_max: tmax,
                dt,
                stride,
                n_max: args.n_max.or(file.n_max),
                out: required_out(&args.common, &file)?,
            };
            finish(jobs::run(ResolvedJob::Dynamics(params))?)
        }
        Command::Verify(args) => {
            let summary = verify::verify(&args.file, args.manifest.as_deref())?;
            println!(
                "verified {} rows of {} data in {}",
                summary.rows,
                summary.schema,
                args.file.display()
            );
            Ok(())
        }
        Command::Manifest(args) => {
            let recorded = manifest::RunManifest::load(&args.file)?;
            let mut job = recorded.job.clone();
            if let Some(out) = args.out {
                job.set_out(out.display().to_string());
            }
            finish(jobs::run(job)?)
        }
    }
}

fn default_sampler_name(kind: ScatterKind) -> &'static str {
    match kind {
        ScatterKind::ScatterCoherent => "hsrs",
        ScatterKind::ScatterIncoherent => "fers",
        ScatterKind::ScatterPurity => "fprs",
        ScatterKind::LockedVsPr => "fers",
    }
}

fn finish(manifest: manifest::RunManifest) -> anyhow::Result<()> {
    for file in &manifest.files {
        println!("wrote {} ({} rows)", file.path, file.rows);
    }
    Ok(())
}
