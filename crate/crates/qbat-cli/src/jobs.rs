//! Experiment jobs: resolution from flags and config files into fully
//! concrete specifications, and their execution into CSV files.
//!
//! Determinism contract: a scatter row depends only on (seed, row index);
//! rows are computed in parallel but written in index order, so output bytes
//! do not depend on the thread count.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qbat::bounds::bound_band;
use qbat::dynamics::{
    evolve_closed, evolve_open, CavityBatteryConfig, CavityModel, ChargerState, TimePoint,
};
use qbat::metrics::{classify_stage, ErgotropyReport};
use qbat::sampling::{
    sample_fers_populations, sample_fprs_weighted, sample_gue_hamiltonian, sample_hs_state,
    Sampler, SamplerMethod, SamplerSpec,
};
use qbat::state::{BatteryHamiltonian, PopulationVector, QuantumState};

use crate::csvio::{fmt_f64, fmt_opt, CsvWriter};
use crate::manifest::{FileRecord, RunManifest};

/// Error that should surface as exit code 3 (invariant violation during a
/// run) rather than 2 (configuration problem).
#[derive(Debug)]
pub struct InvariantFailure(pub String);

impl std::fmt::Display for InvariantFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for InvariantFailure {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScatterKind {
    ScatterCoherent,
    ScatterIncoherent,
    ScatterPurity,
    LockedVsPr,
}

impl ScatterKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "scatter-coherent" => Some(Self::ScatterCoherent),
            "scatter-incoherent" => Some(Self::ScatterIncoherent),
            "scatter-purity" => Some(Self::ScatterPurity),
            "locked-vs-pr" => Some(Self::LockedVsPr),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatterParams {
    pub dim: usize,
    pub samples: u64,
    pub seed: u64,
    /// hsrs | fers | fprs
    pub sampler: String,
    pub fers_ratio: [u32; 2],
    pub fprs_weights: [f64; 3],
    pub out: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynamicsParams {
    /// jc | tc | dicke
    pub model: String,
    pub n_atoms: usize,
    /// coherent | fock
    pub charger: String,
    pub n_c: f64,
    pub omega: f64,
    pub g: f64,
    pub kappa: f64,
    pub t_max: f64,
    pub dt: f64,
    pub stride: usize,
    pub n_max: Option<usize>,
    pub out: String,
}

/// A fully resolved job, echoed verbatim into the run manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ResolvedJob {
    Surface { dim: usize, grid: usize, out: String },
    ScatterCoherent(ScatterParams),
    ScatterIncoherent(ScatterParams),
    ScatterPurity(ScatterParams),
    LockedVsPr(ScatterParams),
    BoundsBand { dim: usize, grid: usize, seed: Option<u64>, out: String },
    Dynamics(DynamicsParams),
}

impl ResolvedJob {
    pub fn seed(&self) -> Option<u64> {
        match self {
            ResolvedJob::ScatterCoherent(p)
            | ResolvedJob::ScatterIncoherent(p)
            | ResolvedJob::ScatterPurity(p)
            | ResolvedJob::LockedVsPr(p) => Some(p.seed),
            ResolvedJob::BoundsBand { seed, .. } => *seed,
            _ => None,
        }
    }

    pub fn out(&self) -> &str {
        match self {
            ResolvedJob::Surface { out, .. } => out,
            ResolvedJob::ScatterCoherent(p)
            | ResolvedJob::ScatterIncoherent(p)
            | ResolvedJob::ScatterPurity(p)
            | ResolvedJob::LockedVsPr(p) => &p.out,
            ResolvedJob::BoundsBand { out, .. } => out,
            ResolvedJob::Dynamics(p) => &p.out,
        }
    }

    pub fn set_out(&mut self, new_out: String) {
        match self {
            ResolvedJob::Surface { out, .. } => *out = new_out,
            ResolvedJob::ScatterCoherent(p)
            | ResolvedJob::ScatterIncoherent(p)
            | ResolvedJob::ScatterPurity(p)
            | ResolvedJob::LockedVsPr(p) => p.out = new_out,
            ResolvedJob::BoundsBand { out, .. } => *out = new_out,
            ResolvedJob::Dynamics(p) => p.out = new_out,
        }
    }
}

/// Executes a job, writing the CSV plus its manifest. Returns the manifest.
pub fn run(job: ResolvedJob) -> anyhow::Result<RunManifest> {
    let started = Instant::now();
    let record = match &job {
        ResolvedJob::Surface { dim, grid, out } => run_surface(*dim, *grid, Path::new(out))?,
        ResolvedJob::ScatterCoherent(p) => run_scatter(ScatterKind::ScatterCoherent, p)?,
        ResolvedJob::ScatterIncoherent(p) => run_scatter(ScatterKind::ScatterIncoherent, p)?,
        ResolvedJob::ScatterPurity(p) => run_scatter(ScatterKind::ScatterPurity, p)?,
        ResolvedJob::LockedVsPr(p) => run_scatter(ScatterKind::LockedVsPr, p)?,
        ResolvedJob::BoundsBand { dim, grid, seed, out } => {
            run_bounds(*dim, *grid, *seed, Path::new(out))?
        }
        ResolvedJob::Dynamics(p) => run_dynamics(p)?,
    };
    let manifest = RunManifest::new(
        job.clone(),
        job.seed(),
        started.elapsed().as_secs_f64(),
        vec![record],
    );
    manifest.write(Path::new(job.out()))?;
    Ok(manifest)
}

fn report_columns(dim: usize) -> Vec<String> {
    let mut cols = vec!["sample".to_string()];
    cols.extend((1..=dim).map(|i| format!("p{i}")));
    cols.extend(
        [
            "stored_energy",
            "ergotropy",
            "incoherent_ergotropy",
            "coherent_ergotropy",
            "locked_energy",
            "efficiency",
            "coherence",
            "diag_entropy",
            "vn_entropy",
            "participation_ratio",
            "purity",
            "stage",
            "delta_r1",
        ]
        .into_iter()
        .map(String::from),
    );
    cols
}

fn report_fields(
    index: u64,
    populations: &[f64],
    report: &ErgotropyReport,
    delta_r1: Option<f64>,
) -> Vec<String> {
    let mut fields = Vec::with_capacity(populations.len() + 14);
    fields.push(index.to_string());
    fields.extend(populations.iter().map(|p| fmt_f64(*p)));
    fields.push(fmt_f64(report.stored_energy));
    fields.push(fmt_f64(report.ergotropy));
    fields.push(fmt_f64(report.incoherent_ergotropy));
    fields.push(fmt_f64(report.coherent_ergotropy));
    fields.push(fmt_f64(report.locked_energy));
    fields.push(fmt_opt(report.efficiency));
    fields.push(fmt_f64(report.coherence));
    fields.push(fmt_f64(report.diag_entropy));
    fields.push(fmt_f64(report.vn_entropy));
    fields.push(fmt_f64(report.participation_ratio));
    fields.push(fmt_f64(report.purity));
    fields.push(report.stage.to_string());
    fields.push(fmt_opt(delta_r1));
    fields
}

fn scatter_sampler_spec(kind: ScatterKind, p: &ScatterParams) -> anyhow::Result<SamplerSpec> {
    let method = SamplerMethod::parse(&p.sampler)
        .ok_or_else(|| anyhow!("unknown sampler `{}`", p.sampler))?;
    let allowed: &[SamplerMethod] = match kind {
        ScatterKind::ScatterCoherent | ScatterKind::ScatterPurity => {
            &[SamplerMethod::Hsrs, SamplerMethod::Fprs]
        }
        ScatterKind::ScatterIncoherent | ScatterKind::LockedVsPr => {
            &[SamplerMethod::Fers, SamplerMethod::Hsrs]
        }
    };
    if !allowed.contains(&method) {
        bail!(
            "sampler `{}` is not valid for this experiment (allowed: {})",
            p.sampler,
            allowed.iter().map(|m| m.name()).collect::<Vec<_>>().join(", ")
        );
    }
    let mut spec = SamplerSpec::new(method, p.dim, p.seed);
    spec.fers_weight_ratio = (p.fers_ratio[0], p.fers_ratio[1]);
    spec.fprs_weights = p.fprs_weights;
    spec.validate().map_err(|e| anyhow!("invalid sampler spec: {e}"))?;
    Ok(spec)
}

fn run_scatter(kind: ScatterKind, p: &ScatterParams) -> anyhow::Result<FileRecord> {
    if p.samples == 0 {
        bail!("samples must be at least 1");
    }
    let spec = scatter_sampler_spec(kind, p)?;
    let sampler = Sampler::new(spec.clone()).map_err(|e| anyhow!("{e}"))?;

    // Substream 0 is reserved for the Hamiltonian; draws use 1..=samples.
    let hamiltonian = match kind {
        ScatterKind::ScatterCoherent | ScatterKind::ScatterPurity => {
            let mut rng = sampler.substream(0);
            sample_gue_hamiltonian(p.dim, &mut rng, true).map_err(|e| anyhow!("{e}"))?
        }
        ScatterKind::ScatterIncoherent | ScatterKind::LockedVsPr => {
            BatteryHamiltonian::equally_spaced_normalized(p.dim).map_err(|e| anyhow!("{e}"))?
        }
    };

    let rows: Vec<Vec<String>> = (0..p.samples)
        .into_par_iter()
        .map(|i| -> anyhow::Result<Vec<String>> {
            let mut rng = sampler.substream(i + 1);
            let (populations, report, delta_r1) = match spec.method {
                SamplerMethod::Hsrs => match kind {
                    ScatterKind::ScatterIncoherent | ScatterKind::LockedVsPr => {
                        let pops =
                            qbat::sampling::sample_hs_populations(p.dim, &mut rng)
                                .map_err(|e| anyhow!("{e}"))?;
                        let state = QuantumState::from_populations(&pops, &hamiltonian)
                            .map_err(|e| anyhow!("{e}"))?;
                        let report = ErgotropyReport::compute(&state, &hamiltonian)
                            .map_err(|e| InvariantFailure(e.to_string()))?;
                        (pops.as_slice().to_vec(), report, None)
                    }
                    _ => {
                        let state = sample_hs_state(p.dim, &mut rng).map_err(|e| anyhow!("{e}"))?;
                        let report = ErgotropyReport::compute(&state, &hamiltonian)
                            .map_err(|e| InvariantFailure(e.to_string()))?;
                        let pops = qbat::state::dephase(&state, &hamiltonian)
                            .map_err(|e| anyhow!("{e}"))?;
                        (pops.as_slice().to_vec(), report, None)
                    }
                },
                SamplerMethod::Fers => {
                    let pops = sample_fers_populations(
                        p.dim,
                        (p.fers_ratio[0], p.fers_ratio[1]),
                        &mut rng,
                    )
                    .map_err(|e| anyhow!("{e}"))?;
                    let state = QuantumState::from_populations(&pops, &hamiltonian)
                        .map_err(|e| anyhow!("{e}"))?;
                    let report = ErgotropyReport::compute(&state, &hamiltonian)
                        .map_err(|e| InvariantFailure(e.to_string()))?;
                    (pops.as_slice().to_vec(), report, None)
                }
                SamplerMethod::Fprs => {
                    let (state, delta_r1, _region) =
                        sample_fprs_weighted(p.dim, p.fprs_weights, &mut rng)
                            .map_err(|e| anyhow!("{e}"))?;
                    let report = ErgotropyReport::compute(&state, &hamiltonian)
                        .map_err(|e| InvariantFailure(e.to_string()))?;
                    let pops = qbat::state::dephase(&state, &hamiltonian)
                        .map_err(|e| anyhow!("{e}"))?;
                    (pops.as_slice().to_vec(), report, Some(delta_r1))
                }
                _ => bail!("unsupported sampler for scatter"),
            };
            Ok(report_fields(i, &populations, &report, delta_r1))
        })
        .collect::<Result<_, _>>()?;

    let mut writer = CsvWriter::create(Path::new(&p.out), report_columns(p.dim))?;
    for row in &rows {
        writer.write_row(row)?;
    }
    let (rows, columns) = writer.finish()?;
    Ok(FileRecord { path: p.out.clone(), rows, columns })
}

fn run_surface(dim: usize, grid: usize, out: &Path) -> anyhow::Result<FileRecord> {
    if grid < 2 {
        bail!("surface grid needs at least 2 points per axis");
    }
    if !(2..=3).contains(&dim) {
        bail!("surface supports dimensions 2 and 3");
    }
    let hamiltonian =
        BatteryHamiltonian::equally_spaced_normalized(dim).map_err(|e| anyhow!("{e}"))?;
    let energies = hamiltonian.energies().to_vec();
    let ground = energies[0];

    let mut cols: Vec<String> = (1..=dim).map(|i| format!("p{i}")).collect();
    cols.extend(
        ["incoherent_ergotropy", "stored_energy", "ergotropy_lower", "ergotropy_upper", "stage"]
            .into_iter()
            .map(String::from),
    );
    let mut writer = CsvWriter::create(out, cols)?;

    let mut emit = |p: Vec<f64>| -> anyhow::Result<()> {
        let pops = PopulationVector::new(p.clone()).map_err(|e| anyhow!("{e}"))?;
        let e_raw: f64 = p.iter().zip(&energies).map(|(a, b)| a * b).sum();
        let stored = e_raw - ground;
        let incoherent =
            qbat::metrics::incoherent_ergotropy_of_populations(&pops, &energies);
        let stage = classify_stage(&pops);
        let mut fields: Vec<String> = p.iter().map(|x| fmt_f64(*x)).collect();
        fields.push(fmt_f64(incoherent));
        fields.push(fmt_f64(stored));
        fields.push(fmt_f64(incoherent));
        fields.push(fmt_f64(stored));
        fields.push(stage.to_string());
        writer.write_row(&fields)
    };

    let denom = (grid - 1) as f64;
    if dim == 2 {
        for i in 0..grid {
            let p2 = i as f64 / denom;
            emit(vec![1.0 - p2, p2])?;
        }
    } else {
        for i in 0..grid {
            for j in 0..grid - i {
                let p2 = i as f64 / denom;
                let p3 = j as f64 / denom;
                let p1 = (1.0 - p2 - p3).max(0.0);
                emit(vec![p1, p2, p3])?;
            }
        }
    }
    let (rows, columns) = writer.finish()?;
    Ok(FileRecord { path: out.display().to_string(), rows, columns })
}

fn run_bounds(
    dim: usize,
    grid: usize,
    seed: Option<u64>,
    out: &Path,
) -> anyhow::Result<FileRecord> {
    if dim < 2 {
        bail!("bounds need dimension at least 2");
    }
    // With a seed, score against the same normalized GUE Hamiltonian a
    // scatter job with that seed uses; otherwise the equally spaced one.
    let hamiltonian = match seed {
        Some(s) => {
            let sampler = Sampler::new(SamplerSpec::new(SamplerMethod::Gue, dim, s))
                .map_err(|e| anyhow!("{e}"))?;
            let mut rng = sampler.substream(0);
            sample_gue_hamiltonian(dim, &mut rng, true).map_err(|e| anyhow!("{e}"))?
        }
        None => BatteryHamiltonian::equally_spaced_normalized(dim).map_err(|e| anyhow!("{e}"))?,
    };
    let band = bound_band(&hamiltonian, grid).map_err(|e| anyhow!("{e}"))?;
    let cols = vec!["coherence".to_string(), "lower".to_string(), "upper".to_string()];
    let mut writer = CsvWriter::create(out, cols)?;
    for ((c, lo), hi) in band.coherence_grid().iter().zip(band.lower()).zip(band.upper()) {
        writer.write_row(&[fmt_f64(*c), fmt_f64(*lo), fmt_f64(*hi)])?;
    }
    let (rows, columns) = writer.finish()?;
    Ok(FileRecord { path: out.display().to_string(), rows, columns })
}

pub fn dynamics_config(p: &DynamicsParams) -> anyhow::Result<CavityBatteryConfig> {
    let model = CavityModel::parse(&p.model)
        .ok_or_else(|| anyhow!("unknown model `{}` (expected jc, tc, or dicke)", p.model))?;
    let charger = match p.charger.as_str() {
        "coherent" => ChargerState::Coherent { mean_photons: p.n_c },
        "fock" => {
            if p.n_c.fract() != 0.0 || p.n_c < 0.0 {
                bail!("fock charger needs a nonnegative integer photon number, got {}", p.n_c);
            }
            ChargerState::Fock { photons: p.n_c as usize }
        }
        other => bail!("unknown charger `{other}` (expected coherent or fock)"),
    };
    let config = CavityBatteryConfig {
        model,
        n_atoms: p.n_atoms,
        omega: p.omega,
        coupling: p.g,
        charger,
        n_max: p.n_max,
        kappa: p.kappa,
        t_max: p.t_max,
        dt: p.dt,
        output_stride: p.stride,
    };
    config.validate().map_err(|e| anyhow!("{e}"))?;
    Ok(config)
}

fn dynamics_columns(dim: usize) -> Vec<String> {
    let mut cols = vec!["time".to_string()];
    cols.extend((1..=dim).map(|i| format!("p{i}")));
    cols.extend(
        [
            "stored_energy",
            "ergotropy",
            "incoherent_ergotropy",
            "coherent_ergotropy",
            "locked_energy",
            "efficiency",
            "coherence",
            "diag_entropy",
            "vn_entropy",
            "participation_ratio",
            "purity",
            "stage",
            "mean_photon",
            "total_energy",
            "excitation",
        ]
        .into_iter()
        .map(String::from),
    );
    cols
}

fn dynamics_fields(point: &TimePoint) -> Vec<String> {
    let mut fields = Vec::with_capacity(point.populations.len() + 16);
    fields.push(fmt_f64(point.time));
    fields.extend(point.populations.iter().map(|p| fmt_f64(*p)));
    let r = &point.report;
    fields.push(fmt_f64(r.stored_energy));
    fields.push(fmt_f64(r.ergotropy));
    fields.push(fmt_f64(r.incoherent_ergotropy));
    fields.push(fmt_f64(r.coherent_ergotropy));
    fields.push(fmt_f64(r.locked_energy));
    fields.push(fmt_opt(r.efficiency));
    fields.push(fmt_f64(r.coherence));
    fields.push(fmt_f64(r.diag_entropy));
    fields.push(fmt_f64(r.vn_entropy));
    fields.push(fmt_f64(r.participation_ratio));
    fields.push(fmt_f64(r.purity));
    fields.push(r.stage.to_string());
    fields.push(fmt_f64(point.mean_photon));
    fields.push(fmt_f64(point.total_energy));
    fields.push(fmt_f64(point.excitation));
    fields
}

fn run_dynamics(p: &DynamicsParams) -> anyhow::Result<FileRecord> {
    let config = dynamics_config(p)?;
    let series = if config.model == CavityModel::Dicke && config.kappa > 0.0 {
        evolve_open(&config)
    } else {
        evolve_closed(&config)
    }
    .map_err(|e| match e {
        qbat::dynamics::DynamicsError::InvariantViolated { .. } => {
            anyhow::Error::new(InvariantFailure(e.to_string()))
        }
        other => anyhow!("{other}"),
    })?;
    let dim = config.battery_dim();
    let mut writer = CsvWriter::create(Path::new(&p.out), dynamics_columns(dim))?;
    for point in &series.points {
        writer.write_row(&dynamics_fields(point))?;
    }
    let (rows, columns) = writer.finish()?;
    Ok(FileRecord { path: p.out.clone(), rows, columns })
}

/// Raw configuration file contents: every field optional, CLI flags override.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct RawConfig {
    pub experiment: Option<String>,
    pub dim: Option<usize>,
    pub grid: Option<usize>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub sampler: Option<String>,
    pub weights: Option<String>,
    pub model: Option<String>,
    pub nb: Option<usize>,
    pub nc: Option<f64>,
    pub charger: Option<String>,
    pub g: Option<f64>,
    pub omega: Option<f64>,
    pub kappa: Option<f64>,
    pub tmax: Option<f64>,
    pub dt: Option<f64>,
    pub stride: Option<usize>,
    pub n_max: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RawConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let body = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&body).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Parses `--weights` for FERS ("N/N_HS") into a ratio.
pub fn parse_fers_ratio(s: &str) -> anyhow::Result<[u32; 2]> {
    let (num, den) = s
        .split_once('/')
        .ok_or_else(|| anyhow!("FERS weights must look like `3/2`, got `{s}`"))?;
    let num: u32 = num.trim().parse().context("FERS ratio numerator")?;
    let den: u32 = den.trim().parse().context("FERS ratio denominator")?;
    if den == 0 {
        bail!("FERS ratio denominator must be positive");
    }
    Ok([num, den])
}

/// Parses `--weights` for FPRS ("0.2:0.5:0.3") into region weights.
pub fn parse_fprs_weights(s: &str) -> anyhow::Result<[f64; 3]> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("FPRS weights must look like `0.2:0.5:0.3`, got `{s}`");
    }
    let mut w = [0.0; 3];
    for (slot, part) in w.iter_mut().zip(&parts) {
        *slot = part.trim().parse::<f64>().context("FPRS weight")?;
        if *slot < 0.0 {
            bail!("FPRS weights must be nonnegative");
        }
    }
    if w.iter().sum::<f64>() <= 0.0 {
        bail!("FPRS weights must not all be zero");
    }
    Ok(w)
}
