//! Figures of merit for a battery state against a battery Hamiltonian:
//! stored energy, the ergotropy decomposition, charging efficiency,
//! coherence, entropies, participation ratio, purity, and the population
//! inversion stage classification.
//!
//! Energies are reported relative to the ground level where a single state
//! is scored (charging starts from the ground state), and as explicit
//! differences where two states are compared.

use std::fmt;

use crate::state::{
    dephase, BatteryHamiltonian, PopulationVector, QuantumState, StateError,
};

/// Comparison tolerance for population orderings; ties within it count as
/// equality.
pub const STAGE_TOL: f64 = 1e-12;

/// Stored energy below this magnitude leaves the charging efficiency
/// undefined.
pub const EFFICIENCY_FLOOR: f64 = 1e-12;

/// Eigenvalues below this contribute nothing to entropies.
const ENTROPY_FLOOR: f64 = 1e-15;

/// Population-inversion stage of a battery state (the roman-numeral regions
/// of the charging diagram).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StageLabel {
    /// Stage I: populations sorted descending; no inversion anywhere.
    NoInversion,
    /// Stage II: some pair is inverted but the ordering is not globally
    /// ascending. Carries the descending population ordering (stable indices)
    /// and, for three-level batteries, the subregion tag.
    LocalInversion {
        ordering: Vec<usize>,
        subregion: Option<SubregionD3>,
    },
    /// Stage III: populations sorted ascending with the top level strictly
    /// above the bottom.
    GlobalInversion,
}

/// The four local-inversion population orderings of a three-level battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubregionD3 {
    /// p1 >= p3 > p2
    R1,
    /// p2 > p1 >= p3
    R2,
    /// p2 > p3 >= p1 or p2 >= p3 > p1
    R3,
    /// p3 >= p1 > p2 or p3 > p1 >= p2
    R4,
}

impl fmt::Display for StageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageLabel::NoInversion => write!(f, "I"),
            StageLabel::LocalInversion { subregion, .. } => match subregion {
                Some(SubregionD3::R1) => write!(f, "II_1"),
                Some(SubregionD3::R2) => write!(f, "II_2"),
                Some(SubregionD3::R3) => write!(f, "II_3"),
                Some(SubregionD3::R4) => write!(f, "II_4"),
                None => write!(f, "II"),
            },
            StageLabel::GlobalInversion => write!(f, "III"),
        }
    }
}

impl StageLabel {
    pub fn parse(s: &str) -> Option<StageLabel> {
        match s {
            "I" => Some(StageLabel::NoInversion),
            "II" => Some(StageLabel::LocalInversion { ordering: vec![], subregion: None }),
            "II_1" => Some(StageLabel::LocalInversion {
                ordering: vec![],
                subregion: Some(SubregionD3::R1),
            }),
            "II_2" => Some(StageLabel::LocalInversion {
                ordering: vec![],
                subregion: Some(SubregionD3::R2),
            }),
            "II_3" => Some(StageLabel::LocalInversion {
                ordering: vec![],
                subregion: Some(SubregionD3::R3),
            }),
            "II_4" => Some(StageLabel::LocalInversion {
                ordering: vec![],
                subregion: Some(SubregionD3::R4),
            }),
            "III" => Some(StageLabel::GlobalInversion),
            _ => None,
        }
    }

    /// Same stage and subregion, ignoring the stored ordering permutation.
    pub fn same_region(&self, other: &StageLabel) -> bool {
        match (self, other) {
            (StageLabel::NoInversion, StageLabel::NoInversion) => true,
            (StageLabel::GlobalInversion, StageLabel::GlobalInversion) => true,
            (
                StageLabel::LocalInversion { subregion: a, .. },
                StageLabel::LocalInversion { subregion: b, .. },
            ) => a == b,
            _ => false,
        }
    }
}

/// Every figure of merit for one state against one Hamiltonian.
#[derive(Debug, Clone)]
pub struct ErgotropyReport {
    /// E = Tr[H rho] - e_1, energy above the ground level.
    pub stored_energy: f64,
    /// Maximum unitarily extractable energy.
    pub ergotropy: f64,
    /// Extractable energy of the dephased state.
    pub incoherent_ergotropy: f64,
    /// ergotropy - incoherent_ergotropy.
    pub coherent_ergotropy: f64,
    /// Passive-state energy above ground; stays locked under unitaries.
    pub locked_energy: f64,
    /// ergotropy / stored_energy, or None when the stored energy vanishes.
    pub efficiency: Option<f64>,
    /// Relative entropy of coherence, nats.
    pub coherence: f64,
    /// Shannon entropy of the populations, nats.
    pub diag_entropy: f64,
    /// von Neumann entropy, nats.
    pub vn_entropy: f64,
    /// 1 / sum p_n^2.
    pub participation_ratio: f64,
    /// Tr[rho^2].
    pub purity: f64,
    pub stage: StageLabel,
}

fn entropy_of(weights: &[f64]) -> f64 {
    let mut s = 0.0;
    for &w in weights {
        let w = w.clamp(0.0, 1.0);
        if w > ENTROPY_FLOOR {
            s -= w * w.ln();
        }
    }
    s
}

/// Shannon entropy of the populations in nats, with 0 ln 0 = 0.
pub fn diag_entropy(populations: &PopulationVector) -> f64 {
    entropy_of(populations.as_slice())
}

/// von Neumann entropy in nats.
pub fn vn_entropy(rho: &QuantumState) -> Result<f64, StateError> {
    Ok(entropy_of(rho.spectrum()?.values()))
}

/// Effective number of occupied levels, 1 / sum p_n^2.
pub fn participation_ratio(populations: &PopulationVector) -> f64 {
    1.0 / populations.as_slice().iter().map(|p| p * p).sum::<f64>()
}

/// Tr[rho^2].
pub fn purity(rho: &QuantumState) -> f64 {
    rho.purity()
}

/// E(rho_t) - E(rho_0) = Tr[H rho_t] - Tr[H rho_0].
pub fn stored_energy(
    rho_t: &QuantumState,
    rho_0: &QuantumState,
    hamiltonian: &BatteryHamiltonian,
) -> Result<f64, StateError> {
    let e_t = mean_energy(rho_t, hamiltonian)?;
    let e_0 = mean_energy(rho_0, hamiltonian)?;
    Ok(e_t - e_0)
}

/// Tr[H rho] through the populations.
pub fn mean_energy(
    rho: &QuantumState,
    hamiltonian: &BatteryHamiltonian,
) -> Result<f64, StateError> {
    let p = dephase(rho, hamiltonian)?;
    Ok(dot(p.as_slice(), hamiltonian.energies()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Tr[H rho] - Tr[H rho~], the stored energy minus the locked energy.
pub fn ergotropy(
    rho: &QuantumState,
    hamiltonian: &BatteryHamiltonian,
) -> Result<f64, StateError> {
    let p = dephase(rho, hamiltonian)?;
    let spectrum = rho.spectrum()?;
    Ok(dot(p.as_slice(), hamiltonian.energies())
        - dot(spectrum.values(), hamiltonian.energies()))
}

/// Ergotropy of the dephased state: extractable without touching coherences.
pub fn incoherent_ergotropy(
    rho: &QuantumState,
    hamiltonian: &BatteryHamiltonian,
) -> Result<f64, StateError> {
    let p = dephase(rho, hamiltonian)?;
    Ok(incoherent_ergotropy_of_populations(&p, hamiltonian.energies()))
}

/// Same, starting from populations directly. `energies` must be ascending.
pub fn incoherent_ergotropy_of_populations(populations: &PopulationVector, energies: &[f64]) -> f64 {
    let p = populations.as_slice();
    let sorted = populations.sorted_descending();
    dot(p, energies) - dot(&sorted, energies)
}

/// Coherent contribution: Tr[H delta~] - Tr[H rho~].
pub fn coherent_ergotropy(
    rho: &QuantumState,
    hamiltonian: &BatteryHamiltonian,
) -> Result<f64, StateError> {
    let p = dephase(rho, hamiltonian)?;
    let spectrum = rho.spectrum()?;
    let sorted = p.sorted_descending();
    Ok(dot(&sorted, hamiltonian.energies()) - dot(spectrum.values(), hamiltonian.energies()))
}

/// Ergotropy over stored energy for a charge from `rho_0` to `rho_t`;
/// undefined (None) when the stored energy vanishes.
pub fn charging_efficiency(
    rho_t: &QuantumState,
    rho_0: &QuantumState,
    hamiltonian: &BatteryHamiltonian,
) -> Result<Option<f64>, StateError> {
    let stored = stored_energy(rho_t, rho_0, hamiltonian)?;
    if stored.abs() <= EFFICIENCY_FLOOR {
        return Ok(None);
    }
    Ok(Some(ergotropy(rho_t, hamiltonian)? / stored))
}

/// Relative entropy of coherence, S_diag - S, in nats.
pub fn coherence(
    rho: &QuantumState,
    hamiltonian: &BatteryHamiltonian,
) -> Result<f64, StateError> {
    let p = dephase(rho, hamiltonian)?;
    Ok(diag_entropy(&p) - vn_entropy(rho)?)
}

/// Assigns the population-inversion stage. Comparisons use [`STAGE_TOL`],
/// with ties counting as equality; the checks run in the order I, III, then
/// the three-level subregions.
pub fn classify_stage(populations: &PopulationVector) -> StageLabel {
    let p = populations.as_slice();
    let d = p.len();
    let mut non_increasing = true;
    let mut non_decreasing = true;
    for n in 0..d {
        for m in (n + 1)..d {
            if p[n] < p[m] - STAGE_TOL {
                non_increasing = false;
            }
            if p[n] > p[m] + STAGE_TOL {
                non_decreasing = false;
            }
        }
    }
    if non_increasing {
        return StageLabel::NoInversion;
    }
    if non_decreasing && p[0] < p[d - 1] - STAGE_TOL {
        return StageLabel::GlobalInversion;
    }
    let mut ordering: Vec<usize> = (0..d).collect();
    ordering.sort_by(|&i, &j| p[j].partial_cmp(&p[i]).unwrap());
    let subregion = (d == 3).then(|| classify_subregion(p)).flatten();
    StageLabel::LocalInversion { ordering, subregion }
}

fn classify_subregion(p: &[f64]) -> Option<SubregionD3> {
    let ge = |a: f64, b: f64| a >= b - STAGE_TOL;
    let gt = |a: f64, b: f64| a > b + STAGE_TOL;
    let (p1, p2, p3) = (p[0], p[1], p[2]);
    if ge(p1, p3) && gt(p3, p2) {
        Some(SubregionD3::R1)
    } else if gt(p2, p1) && ge(p1, p3) {
        Some(SubregionD3::R2)
    } else if (gt(p2, p3) && ge(p3, p1)) || (ge(p2, p3) && gt(p3, p1)) {
        Some(SubregionD3::R3)
    } else if (ge(p3, p1) && gt(p1, p2)) || (gt(p3, p1) && ge(p1, p2)) {
        Some(SubregionD3::R4)
    } else {
        None
    }
}

impl ErgotropyReport {
    /// Scores one state against one Hamiltonian with a single
    /// eigendecomposition of the state.
    pub fn compute(
        rho: &QuantumState,
        hamiltonian: &BatteryHamiltonian,
    ) -> Result<Self, StateError> {
        let energies = hamiltonian.energies();
        let populations = dephase(rho, hamiltonian)?;
        let spectrum = rho.spectrum()?;
        let p = populations.as_slice();

        let raw_energy = dot(p, energies);
        let passive_energy = dot(spectrum.values(), energies);
        let dephased_passive_energy = dot(&populations.sorted_descending(), energies);
        let ground = hamiltonian.ground_energy();

        let stored = raw_energy - ground;
        let ergotropy = raw_energy - passive_energy;
        let incoherent = raw_energy - dephased_passive_energy;
        let coherent = dephased_passive_energy - passive_energy;
        let locked = passive_energy - ground;
        let efficiency = (stored.abs() > EFFICIENCY_FLOOR).then(|| ergotropy / stored);

        let s_diag = diag_entropy(&populations);
        let s_vn = entropy_of(spectrum.values());

        Ok(ErgotropyReport {
            stored_energy: stored,
            ergotropy,
            incoherent_ergotropy: incoherent,
            coherent_ergotropy: coherent,
            locked_energy: locked,
            efficiency,
            coherence: s_diag - s_vn,
            diag_entropy: s_diag,
            vn_entropy: s_vn,
            participation_ratio: participation_ratio(&populations),
            purity: rho.purity(),
            stage: classify_stage(&populations),
        })
    }
}
