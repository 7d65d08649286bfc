//! Envelopes for the coherent ergotropy as a function of coherence, and the
//! sign classifier for how a population perturbation moves the diagonal
//! entropy versus the incoherent ergotropy.
//!
//! Both envelopes reduce to one solver: the minimum mean energy over
//! probability vectors with a prescribed Shannon entropy. The optimum on each
//! support is a thermal distribution p_n ~ exp(-alpha e_n), so the solver
//! bisects on alpha for the full support and for every prefix support
//! {e_1..e_k} of the simplex boundary, then takes the best feasible family.
//! Repeated energies need no special casing: equal levels share one Boltzmann
//! weight, which is exactly the merged-multiplicity family.

use std::fmt;

use thiserror::Error;

use crate::metrics::incoherent_ergotropy_of_populations;
use crate::state::{BatteryHamiltonian, PopulationVector};

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("coherence {value} outside [0, {max}]")]
    CoherenceOutOfRange { value: f64, max: f64 },
    #[error("entropy target {0} is infeasible for this spectrum")]
    InfeasibleEntropy(f64),
    #[error("grid must contain at least 2 points, got {0}")]
    GridTooCoarse(usize),
    #[error("operation requires a three-level battery, got dimension {0}")]
    NotThreeLevel(usize),
    #[error("perturbation must sum to zero, got {0:e}")]
    PerturbationNotTraceless(f64),
    #[error("populations must be strictly positive")]
    ZeroPopulation,
    #[error("perturbation does not preserve the population ordering")]
    OrderingViolated,
    #[error("populations do not match the requested ordering")]
    UnsupportedOrdering,
}

const ALPHA_MAX: f64 = 1e6;
const BISECT_ITERS: usize = 200;
const ENTROPY_MATCH_TOL: f64 = 1e-13;

fn thermal_populations(energies: &[f64], alpha: f64) -> Vec<f64> {
    // Weights relative to the smallest energy keep exponents nonpositive for
    // alpha >= 0.
    let e0 = energies[0];
    let mut w: Vec<f64> = energies.iter().map(|e| (-alpha * (e - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= z;
    }
    w
}

fn shannon(p: &[f64]) -> f64 {
    p.iter().filter(|v| **v > 0.0).map(|v| -v * v.ln()).sum()
}

fn mean(p: &[f64], energies: &[f64]) -> f64 {
    p.iter().zip(energies).map(|(a, b)| a * b).sum()
}

/// Minimum of sum p_n e_n over probability vectors with Shannon entropy
/// `s_target`, for ascending `energies`. Returns the energy together with the
/// optimizing populations (padded with zeros outside the chosen support).
fn min_energy_at_entropy(energies: &[f64], s_target: f64) -> Result<(f64, Vec<f64>), BoundsError> {
    let d = energies.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for k in 1..=d {
        let support = &energies[..k];
        if k == 1 {
            if s_target <= ENTROPY_MATCH_TOL {
                let mut p = vec![0.0; d];
                p[0] = 1.0;
                consider(&mut best, support[0], p);
            }
            continue;
        }
        let s_max = (k as f64).ln();
        if s_target > s_max + ENTROPY_MATCH_TOL {
            continue;
        }
        // Entropy decreases monotonically in alpha on [0, inf) for this
        // support; check reachability at the bracket end first.
        let s_lo = shannon(&thermal_populations(support, ALPHA_MAX));
        if s_target < s_lo - ENTROPY_MATCH_TOL {
            continue;
        }
        let p = if s_target >= s_max - ENTROPY_MATCH_TOL {
            vec![1.0 / k as f64; k]
        } else {
            let mut lo = 0.0f64;
            let mut hi = ALPHA_MAX;
            let mut p = thermal_populations(support, hi);
            for _ in 0..BISECT_ITERS {
                let mid = 0.5 * (lo + hi);
                p = thermal_populations(support, mid);
                let s = shannon(&p);
                if (s - s_target).abs() <= ENTROPY_MATCH_TOL {
                    break;
                }
                if s > s_target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            p
        };
        let e = mean(&p, support);
        let mut padded = p;
        padded.resize(d, 0.0);
        consider(&mut best, e, padded);
    }
    best.ok_or(BoundsError::InfeasibleEntropy(s_target))
}

fn consider(best: &mut Option<(f64, Vec<f64>)>, energy: f64, p: Vec<f64>) {
    match best {
        Some((e, _)) if *e <= energy => {}
        _ => *best = Some((energy, p)),
    }
}

fn check_coherence_range(c: f64, d: usize) -> Result<f64, BoundsError> {
    let max = (d as f64).ln();
    if !(-1e-12..=max + 1e-12).contains(&c) {
        return Err(BoundsError::CoherenceOutOfRange { value: c, max });
    }
    Ok(c.clamp(0.0, max))
}

/// Lower envelope: the smallest coherent ergotropy a pure state of coherence
/// `c` can have, min over sorted populations with S = c of the dephased
/// passive energy above ground.
pub fn pure_state_bound(c: f64, hamiltonian: &BatteryHamiltonian) -> Result<f64, BoundsError> {
    let c = check_coherence_range(c, hamiltonian.dim())?;
    if c == 0.0 {
        return Ok(0.0);
    }
    let (e, _) = min_energy_at_entropy(hamiltonian.energies(), c)?;
    Ok(e - hamiltonian.ground_energy())
}

/// Upper envelope: the coherent ergotropy of the completely delocalized state
/// whose spectrum has entropy ln d - c, max over descending spectra of
/// sum (1/d - r_n) e_n.
pub fn deloc_state_bound(c: f64, hamiltonian: &BatteryHamiltonian) -> Result<f64, BoundsError> {
    let d = hamiltonian.dim();
    let c = check_coherence_range(c, d)?;
    if c == 0.0 {
        return Ok(0.0);
    }
    let s_target = (d as f64).ln() - c;
    let energies = hamiltonian.energies();
    let uniform_energy = energies.iter().sum::<f64>() / d as f64;
    let (e_min, _) = min_energy_at_entropy(energies, s_target)?;
    Ok(uniform_energy - e_min)
}

/// The pointwise envelope pair over a uniform coherence grid on [0, ln d].
#[derive(Debug, Clone)]
pub struct BoundBand {
    coherence_grid: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoundBand {
    pub fn coherence_grid(&self) -> &[f64] {
        &self.coherence_grid
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Whether the point (c, ec) lies inside the band within `tol`. Both
    /// envelopes increase with coherence, so the enclosing grid interval
    /// brackets them exactly.
    pub fn contains(&self, c: f64, ec: f64, tol: f64) -> bool {
        let grid = &self.coherence_grid;
        let n = grid.len();
        if c < grid[0] - tol || c > grid[n - 1] + tol {
            return false;
        }
        let i = match grid.binary_search_by(|g| g.partial_cmp(&c).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        let i = i.min(n - 2);
        ec >= self.lower[i] - tol && ec <= self.upper[i + 1] + tol
    }
}

/// Computes both envelopes over `grid_size` uniformly spaced coherence
/// values; the endpoints at c = 0 are exactly (0, 0).
pub fn bound_band(
    hamiltonian: &BatteryHamiltonian,
    grid_size: usize,
) -> Result<BoundBand, BoundsError> {
    if grid_size < 2 {
        return Err(BoundsError::GridTooCoarse(grid_size));
    }
    let c_max = (hamiltonian.dim() as f64).ln();
    let mut coherence_grid = Vec::with_capacity(grid_size);
    let mut lower = Vec::with_capacity(grid_size);
    let mut upper = Vec::with_capacity(grid_size);
    for i in 0..grid_size {
        let c = c_max * i as f64 / (grid_size - 1) as f64;
        let lo = pure_state_bound(c, hamiltonian)?;
        let hi = deloc_state_bound(c, hamiltonian)?;
        debug_assert!(lo <= hi + 1e-10, "envelope inversion at c={c}: {lo} > {hi}");
        coherence_grid.push(c);
        lower.push(lo);
        upper.push(hi);
    }
    Ok(BoundBand { coherence_grid, lower, upper })
}

/// Sign of a first-order change, with a relative dead band so crafted
/// equality cases land on Zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Minus,
    Zero,
    Plus,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sign::Minus => write!(f, "-"),
            Sign::Zero => write!(f, "0"),
            Sign::Plus => write!(f, "+"),
        }
    }
}

fn sign_with_scale(value: f64, scale: f64) -> Sign {
    let tol = 1e-9 * scale;
    if value > tol {
        Sign::Plus
    } else if value < -tol {
        Sign::Minus
    } else {
        Sign::Zero
    }
}

/// How a diagonal-entropy change moves the incoherent ergotropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectVerdict {
    /// Same strict signs: entropy and incoherent ergotropy move together.
    Enhance,
    /// Opposite strict signs.
    Suppress,
    /// Incoherent ergotropy unchanged.
    Maintain,
    /// Entropy unchanged while the incoherent ergotropy moves.
    Other,
}

impl fmt::Display for EffectVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EffectVerdict::Enhance => write!(f, "enhance"),
            EffectVerdict::Suppress => write!(f, "suppress"),
            EffectVerdict::Maintain => write!(f, "maintain"),
            EffectVerdict::Other => write!(f, "other"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntropyEffect {
    pub ds_sign: Sign,
    pub dei_sign: Sign,
    pub verdict: EffectVerdict,
}

/// The two tabulated three-level population orderings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PopulationOrdering {
    /// Global inversion, p1 <= p2 <= p3 with p1 < p3.
    Ascending,
    /// Local inversion with p1 >= p3 > p2.
    GroundTopMiddle,
}

/// First-order change of the diagonal entropy under a traceless perturbation
/// of strictly positive three-level populations ordered p_i <= p_j <= p_k:
/// dp_i ln(p_k/p_i) + dp_j ln(p_k/p_j).
pub fn entropy_gradient(
    populations: &PopulationVector,
    dp: &[f64; 3],
) -> Result<f64, BoundsError> {
    let p = populations.as_slice();
    if p.len() != 3 {
        return Err(BoundsError::NotThreeLevel(p.len()));
    }
    if p.iter().any(|v| *v <= 0.0) {
        return Err(BoundsError::ZeroPopulation);
    }
    let total: f64 = dp.iter().sum();
    if total.abs() > 1e-12 {
        return Err(BoundsError::PerturbationNotTraceless(total));
    }
    // Stable ascending order of the populations.
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap());
    let [i, j, k] = idx;
    // The perturbed point must keep the same ordering for the linearization
    // to describe the tabulated regime.
    let q = [p[0] + dp[0], p[1] + dp[1], p[2] + dp[2]];
    if q[i] > q[j] || q[j] > q[k] {
        return Err(BoundsError::OrderingViolated);
    }
    Ok(dp[i] * (p[k] / p[i]).ln() + dp[j] * (p[k] / p[j]).ln())
}

/// Classifies the (entropy sign, incoherent-ergotropy sign) pair for a small
/// population perturbation against the tabulated verdicts. The incoherent
/// change is evaluated directly from the sorted-population energy difference
/// on the normalized equally spaced three-level spectrum, where it is linear
/// within an ordering region.
pub fn classify_entropy_effect(
    populations: &PopulationVector,
    dp: &[f64; 3],
    ordering: PopulationOrdering,
) -> Result<EntropyEffect, BoundsError> {
    let p = populations.as_slice();
    if p.len() != 3 {
        return Err(BoundsError::NotThreeLevel(p.len()));
    }
    let matches = match ordering {
        PopulationOrdering::Ascending => p[0] <= p[1] && p[1] <= p[2] && p[0] < p[2],
        PopulationOrdering::GroundTopMiddle => p[0] >= p[2] && p[2] > p[1],
    };
    if !matches {
        return Err(BoundsError::UnsupportedOrdering);
    }
    let ds = entropy_gradient(populations, dp)?;
    let ds_scale: f64 = {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap());
        let [i, j, k] = idx;
        (dp[i] * (p[k] / p[i]).ln()).abs() + (dp[j] * (p[k] / p[j]).ln()).abs()
    };

    let energies = [-1.0, 0.0, 1.0];
    let before = incoherent_ergotropy_of_populations(populations, &energies);
    let perturbed =
        PopulationVector::new(vec![p[0] + dp[0], p[1] + dp[1], p[2] + dp[2]]).map_err(|_| {
            BoundsError::OrderingViolated
        })?;
    let after = incoherent_ergotropy_of_populations(&perturbed, &energies);
    let dei = after - before;
    let dei_scale = dp.iter().map(|v| 2.0 * v.abs()).sum::<f64>();

    let ds_sign = sign_with_scale(ds, ds_scale.max(1e-300));
    let dei_sign = sign_with_scale(dei, dei_scale.max(1e-300));
    let verdict = match (ds_sign, dei_sign) {
        (Sign::Plus, Sign::Plus) | (Sign::Minus, Sign::Minus) => EffectVerdict::Enhance,
        (Sign::Plus, Sign::Minus) | (Sign::Minus, Sign::Plus) => EffectVerdict::Suppress,
        (_, Sign::Zero) => EffectVerdict::Maintain,
        (Sign::Zero, _) => EffectVerdict::Other,
    };
    Ok(EntropyEffect { ds_sign, dei_sign, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::BatteryHamiltonian;

    fn two_level() -> BatteryHamiltonian {
        BatteryHamiltonian::diagonal(vec![-1.0, 1.0]).unwrap()
    }

    fn pops(p: [f64; 3]) -> PopulationVector {
        PopulationVector::new(p.to_vec()).unwrap()
    }

    #[test]
    fn pure_bound_endpoints() {
        let h = two_level();
        assert_eq!(pure_state_bound(0.0, &h).unwrap(), 0.0);
        // Maximal coherence forces the uniform dephased state.
        let v = pure_state_bound(std::f64::consts::LN_2, &h).unwrap();
        assert!((v - 1.0).abs() < 1e-10);

        let h3 = BatteryHamiltonian::equally_spaced_normalized(3).unwrap();
        let v = pure_state_bound(3.0f64.ln(), &h3).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "sum e_n / d - e_1 = 1, got {v}");
    }

    #[test]
    fn deloc_bound_endpoints() {
        let h = two_level();
        assert_eq!(deloc_state_bound(0.0, &h).unwrap(), 0.0);
        let v = deloc_state_bound(std::f64::consts::LN_2, &h).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn coherence_out_of_range_rejected() {
        let h = two_level();
        assert!(pure_state_bound(-0.1, &h).is_err());
        assert!(pure_state_bound(1.0, &h).is_err());
        assert!(deloc_state_bound(0.8, &h).is_err());
    }

    #[test]
    fn solver_hits_entropy_target() {
        let h3 = BatteryHamiltonian::equally_spaced_normalized(3).unwrap();
        for frac in [0.05, 0.3, 0.6, 0.9] {
            let s = 3.0f64.ln() * frac;
            let (_, p) = min_energy_at_entropy(h3.energies(), s).unwrap();
            let got = shannon(&p);
            assert!((got - s).abs() < 1e-12, "entropy {got} vs target {s}");
        }
    }

    #[test]
    fn envelopes_are_monotone_in_coherence() {
        let h3 = BatteryHamiltonian::equally_spaced_normalized(3).unwrap();
        let band = bound_band(&h3, 100).unwrap();
        for w in band.lower().windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        for w in band.upper().windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        for (lo, hi) in band.lower().iter().zip(band.upper()) {
            assert!(lo <= &(hi + 1e-10));
        }
        assert_eq!(band.lower()[0], 0.0);
        assert_eq!(band.upper()[0], 0.0);
    }

    #[test]
    fn entropy_gradient_examples() {
        let p = pops([0.1, 0.3, 0.6]);
        assert_eq!(entropy_gradient(&p, &[0.0, 0.0, 0.0]).unwrap(), 0.0);

        let v = entropy_gradient(&p, &[0.01, 0.0, -0.01]).unwrap();
        assert!((v - 0.01 * 6.0f64.ln()).abs() < 1e-15);

        // Crafted zero along the constant-entropy direction.
        let dpj = 0.01;
        let dpi = -dpj * (0.6f64 / 0.3).ln() / (0.6f64 / 0.1).ln();
        let v = entropy_gradient(&p, &[dpi, dpj, -dpi - dpj]).unwrap();
        assert!(v.abs() < 1e-16);
    }

    #[test]
    fn entropy_gradient_matches_central_differences() {
        let p = pops([0.15, 0.33, 0.52]);
        let dp = [3e-7, -1e-7, -2e-7];
        let lin = entropy_gradient(&p, &dp).unwrap();
        let s = |q: &[f64]| -> f64 { q.iter().map(|v| -v * v.ln()).sum() };
        let plus = [p.as_slice()[0] + dp[0], p.as_slice()[1] + dp[1], p.as_slice()[2] + dp[2]];
        let minus = [p.as_slice()[0] - dp[0], p.as_slice()[1] - dp[1], p.as_slice()[2] - dp[2]];
        let fd = 0.5 * (s(&plus) - s(&minus));
        assert!((lin - fd).abs() / lin.abs().max(1e-300) < 1e-8);
    }

    #[test]
    fn entropy_gradient_rejects_bad_inputs() {
        let p = pops([0.1, 0.3, 0.6]);
        assert!(matches!(
            entropy_gradient(&p, &[0.01, 0.0, 0.0]),
            Err(BoundsError::PerturbationNotTraceless(_))
        ));
        // Perturbation large enough to flip the ordering.
        assert!(matches!(
            entropy_gradient(&p, &[0.25, -0.05, -0.2]),
            Err(BoundsError::OrderingViolated)
        ));
        let pz = pops([0.0, 0.4, 0.6]);
        assert!(matches!(
            entropy_gradient(&pz, &[0.0, 0.0, 0.0]),
            Err(BoundsError::ZeroPopulation)
        ));
    }

    #[test]
    fn classifier_examples() {
        // Global inversion, dp2 = 0, dp1 > 0: entropy up, incoherent down.
        let p = pops([0.1, 0.3, 0.6]);
        let e = classify_entropy_effect(&p, &[0.01, 0.0, -0.01], PopulationOrdering::Ascending)
            .unwrap();
        assert_eq!(e.ds_sign, Sign::Plus);
        assert_eq!(e.dei_sign, Sign::Minus);
        assert_eq!(e.verdict, EffectVerdict::Suppress);

        // Zero perturbation maintains.
        let e = classify_entropy_effect(&p, &[0.0, 0.0, 0.0], PopulationOrdering::Ascending)
            .unwrap();
        assert_eq!(e.ds_sign, Sign::Zero);
        assert_eq!(e.dei_sign, Sign::Zero);
        assert_eq!(e.verdict, EffectVerdict::Maintain);

        // Local inversion p1 >= p3 > p2 with dp2 between the thresholds.
        let p = pops([0.5, 0.1, 0.4]);
        let dp3 = 1e-3;
        let lo = -dp3 * (0.5f64 / 0.4).ln() / (0.5f64 / 0.1).ln();
        let dp2 = 0.5 * (lo + dp3);
        let e = classify_entropy_effect(
            &p,
            &[-dp2 - dp3, dp2, dp3],
            PopulationOrdering::GroundTopMiddle,
        )
        .unwrap();
        assert_eq!(e.verdict, EffectVerdict::Enhance);
        assert_eq!(e.ds_sign, Sign::Plus);
        assert_eq!(e.dei_sign, Sign::Plus);
    }

    #[test]
    fn classifier_equality_rows() {
        // Maintain row of the global-inversion table: dp1 = -dp2/2.
        let p = pops([0.1, 0.3, 0.6]);
        let dp2 = 1e-3;
        let dp1 = -0.5 * dp2;
        let e = classify_entropy_effect(
            &p,
            &[dp1, dp2, -dp1 - dp2],
            PopulationOrdering::Ascending,
        )
        .unwrap();
        assert_eq!(e.dei_sign, Sign::Zero);
        assert_eq!(e.verdict, EffectVerdict::Maintain);

        // Other row: constant entropy, moving incoherent ergotropy.
        let dp2 = 1e-3;
        let dp1 = -dp2 * (0.6f64 / 0.3).ln() / (0.6f64 / 0.1).ln();
        let e = classify_entropy_effect(
            &p,
            &[dp1, dp2, -dp1 - dp2],
            PopulationOrdering::Ascending,
        )
        .unwrap();
        assert_eq!(e.ds_sign, Sign::Zero);
        assert_eq!(e.verdict, EffectVerdict::Other);
    }

    #[test]
    fn classifier_rejects_wrong_ordering() {
        let p = pops([0.5, 0.3, 0.2]);
        assert!(matches!(
            classify_entropy_effect(&p, &[0.0, 0.0, 0.0], PopulationOrdering::Ascending),
            Err(BoundsError::UnsupportedOrdering)
        ));
    }
}
