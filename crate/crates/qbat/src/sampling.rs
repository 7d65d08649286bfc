//! Deterministic, seedable generators for random states and Hamiltonians.
//!
//! Three state-sampling schemes are implemented:
//! - HSRS: trace-normalized Ginibre products, the Hilbert-Schmidt measure;
//! - FERS: HSRS populations mixed with a localized low-entropy generator so
//!   the diagonal entropy covers its full range;
//! - FPRS: spectra engineered around a target purity, randomized by a Haar
//!   unitary, so the purity covers its full range.
//!
//! Randomness comes from ChaCha12. A [`Sampler`] derives one independent
//! ChaCha12 stream per draw index from (seed, index), so a stream partitioned
//! across workers produces exactly the draws of a single-threaded pass and
//! every output is reproducible from the `SamplerSpec` alone.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg;
use crate::state::{BatteryHamiltonian, PopulationVector, QuantumState, StateError};

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("dimension must be at least 2, got {0}")]
    DimTooSmall(usize),
    #[error("delta r1 = {value} outside [0, {max}]")]
    DeltaR1OutOfRange { value: f64, max: f64 },
    #[error("sampler weights must be nonnegative and not all zero")]
    BadWeights,
    #[error("simplex sampling failed to satisfy the eigenvalue cap")]
    SimplexRejectionExhausted,
    #[error(transparent)]
    State(#[from] StateError),
}

/// Sampling method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMethod {
    Hsrs,
    Fers,
    Fprs,
    Gue,
    Haar,
}

impl SamplerMethod {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hsrs" => Some(Self::Hsrs),
            "fers" => Some(Self::Fers),
            "fprs" => Some(Self::Fprs),
            "gue" => Some(Self::Gue),
            "haar" => Some(Self::Haar),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Hsrs => "hsrs",
            Self::Fers => "fers",
            Self::Fprs => "fprs",
            Self::Gue => "gue",
            Self::Haar => "haar",
        }
    }
}

/// Fully determines a reproducible stream of draws.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSpec {
    pub method: SamplerMethod,
    pub dim: usize,
    pub seed: u64,
    /// FERS mixing ratio N/N_HS between low-entropy and HSRS draws.
    pub fers_weight_ratio: (u32, u32),
    /// FPRS sampling weights for the (low, medium, high) purity regions.
    pub fprs_weights: [f64; 3],
}

impl SamplerSpec {
    pub fn new(method: SamplerMethod, dim: usize, seed: u64) -> Self {
        Self {
            method,
            dim,
            seed,
            fers_weight_ratio: (3, 2),
            fprs_weights: [0.2, 0.5, 0.3],
        }
    }

    pub fn validate(&self) -> Result<(), SamplingError> {
        if self.dim < 2 {
            return Err(SamplingError::DimTooSmall(self.dim));
        }
        if self.fers_weight_ratio.1 == 0 {
            return Err(SamplingError::BadWeights);
        }
        if self.fprs_weights.iter().any(|w| *w < 0.0)
            || self.fprs_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(SamplingError::BadWeights);
        }
        Ok(())
    }
}

/// One draw of a sampler stream, tagged with the generator internals that the
/// scatter experiments record.
#[derive(Debug, Clone)]
pub enum Draw {
    State(QuantumState),
    Populations(PopulationVector),
    FprsState {
        state: QuantumState,
        delta_r1: f64,
        region: PurityRegion,
    },
    Hamiltonian(BatteryHamiltonian),
    Unitary(Array2<C64>),
}

/// Substream-indexed sampler: draw `i` depends only on (spec, i).
#[derive(Debug, Clone)]
pub struct Sampler {
    spec: SamplerSpec,
}

impl Sampler {
    pub fn new(spec: SamplerSpec) -> Result<Self, SamplingError> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &SamplerSpec {
        &self.spec
    }

    /// Independent ChaCha12 stream for draw `index`.
    pub fn substream(&self, index: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(index);
        rng
    }

    pub fn draw(&self, index: u64) -> Result<Draw, SamplingError> {
        let mut rng = self.substream(index);
        let d = self.spec.dim;
        Ok(match self.spec.method {
            SamplerMethod::Hsrs => Draw::State(sample_hs_state(d, &mut rng)?),
            SamplerMethod::Fers => Draw::Populations(sample_fers_populations(
                d,
                self.spec.fers_weight_ratio,
                &mut rng,
            )?),
            SamplerMethod::Fprs => {
                let (state, delta_r1, region) =
                    sample_fprs_weighted(d, self.spec.fprs_weights, &mut rng)?;
                Draw::FprsState { state, delta_r1, region }
            }
            SamplerMethod::Gue => Draw::Hamiltonian(sample_gue_hamiltonian(d, &mut rng, true)?),
            SamplerMethod::Haar => Draw::Unitary(sample_haar_unitary(d, &mut rng)),
        })
    }
}

fn ginibre(d: usize, rng: &mut impl Rng) -> Array2<C64> {
    Array2::from_shape_fn((d, d), |_| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Hilbert-Schmidt random state: rho = G G^dag / Tr[G G^dag] for a Ginibre G.
pub fn sample_hs_state(d: usize, rng: &mut impl Rng) -> Result<QuantumState, SamplingError> {
    if d < 2 {
        return Err(SamplingError::DimTooSmall(d));
    }
    let g = ginibre(d, rng);
    let gdag = linalg::adjoint(&g);
    let mut m = g.dot(&gdag);
    let tr = linalg::trace(&m).re;
    m.mapv_inplace(|z| z / tr);
    Ok(QuantumState::new(m)?)
}

/// Populations of a dephased HSRS state: normalized squared row norms of a
/// Ginibre matrix, which is exactly the diagonal of G G^dag / Tr.
pub fn sample_hs_populations(
    d: usize,
    rng: &mut impl Rng,
) -> Result<PopulationVector, SamplingError> {
    if d < 2 {
        return Err(SamplingError::DimTooSmall(d));
    }
    let mut p = vec![0.0; d];
    for row in p.iter_mut() {
        for _ in 0..d {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *row += re * re + im * im;
        }
    }
    let sum: f64 = p.iter().sum();
    for v in p.iter_mut() {
        *v /= sum;
    }
    Ok(PopulationVector::new(p)?)
}

/// Low-diagonal-entropy populations: pick k uniformly from {1..d-1}, draw k
/// uniform values, zero-pad to length d, Fisher-Yates shuffle, normalize.
/// A draw summing below 1e-12 is rejected and redrawn.
pub fn sample_low_entropy_dephased(
    d: usize,
    rng: &mut impl Rng,
) -> Result<PopulationVector, SamplingError> {
    if d < 2 {
        return Err(SamplingError::DimTooSmall(d));
    }
    loop {
        let k = rng.gen_range(1..d);
        let mut x = vec![0.0f64; d];
        for v in x.iter_mut().take(k) {
            *v = rng.gen::<f64>();
        }
        // Fisher-Yates.
        for i in (1..d).rev() {
            let j = rng.gen_range(0..=i);
            x.swap(i, j);
        }
        let sum: f64 = x.iter().sum();
        if sum < 1e-12 {
            continue;
        }
        for v in x.iter_mut() {
            *v /= sum;
        }
        return Ok(PopulationVector::new(x)?);
    }
}

/// One FERS draw: a Bernoulli choice with odds N : N_HS between the
/// low-entropy generator and dephased HSRS populations.
pub fn sample_fers_populations(
    d: usize,
    ratio: (u32, u32),
    rng: &mut impl Rng,
) -> Result<PopulationVector, SamplingError> {
    if ratio.1 == 0 {
        return Err(SamplingError::BadWeights);
    }
    let p_low = ratio.0 as f64 / (ratio.0 + ratio.1) as f64;
    if rng.gen::<f64>() < p_low {
        sample_low_entropy_dephased(d, rng)
    } else {
        sample_hs_populations(d, rng)
    }
}

/// The three purity regions targeted by FPRS, as intervals of the spectral
/// offset delta_r1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PurityRegion {
    Low,
    Medium,
    High,
}

impl PurityRegion {
    /// The delta_r1 interval assigned to this region.
    pub fn interval(&self, d: usize) -> (f64, f64) {
        let d = d as f64;
        let a = (d - 1.0) / (3.0f64.sqrt() * d);
        match self {
            PurityRegion::Low => (0.0, a),
            PurityRegion::Medium => (a, 2.0f64.sqrt() * a),
            PurityRegion::High => (2.0f64.sqrt() * a, (d - 1.0) / d),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PurityRegion::Low => "low",
            PurityRegion::Medium => "medium",
            PurityRegion::High => "high",
        }
    }
}

/// Purity bounds over all spectra with top offset delta_r1: the minimum from
/// the evenly-spread perturbation, the maximum from concentrating
/// m = floor(delta_r1 * d) perturbations at the 1/d cap.
pub fn fprs_purity_bounds(d: usize, delta_r1: f64) -> Result<(f64, f64), SamplingError> {
    if d < 2 {
        return Err(SamplingError::DimTooSmall(d));
    }
    let df = d as f64;
    let max = (df - 1.0) / df;
    if !(0.0..=max + 1e-15).contains(&delta_r1) {
        return Err(SamplingError::DeltaR1OutOfRange { value: delta_r1, max });
    }
    let p_min = 1.0 / df + delta_r1 * delta_r1 + delta_r1 * delta_r1 / (df - 1.0);
    let m = (delta_r1 * df).floor().min(df - 1.0);
    let rem = delta_r1 - m / df;
    let p_max = 1.0 / df + delta_r1 * delta_r1 + m / (df * df) + rem * rem;
    Ok((p_min, p_max))
}

/// Uniform sample of n nonnegative values summing to `total` (simplex gaps).
fn simplex_sample(n: usize, total: f64, rng: &mut impl Rng) -> Vec<f64> {
    if n == 1 {
        return vec![total];
    }
    let mut cuts: Vec<f64> = (0..n - 1).map(|_| rng.gen::<f64>() * total).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = Vec::with_capacity(n);
    let mut prev = 0.0;
    for c in cuts {
        out.push(c - prev);
        prev = c;
    }
    out.push(total - prev);
    out
}

const SIMPLEX_ATTEMPT_CAP: usize = 100_000_000;

/// One FPRS draw in a given purity region: delta_r1 uniform in the region's
/// interval, remaining perturbations uniform on the constrained simplex
/// (each at most 1/d), spectrum randomized by a Haar unitary.
///
/// Returns the state together with the delta_r1 actually used.
pub fn sample_fprs(
    d: usize,
    region: PurityRegion,
    rng: &mut impl Rng,
) -> Result<(QuantumState, f64), SamplingError> {
    if d < 2 {
        return Err(SamplingError::DimTooSmall(d));
    }
    let (lo, hi) = region.interval(d);
    let delta_r1 = lo + (hi - lo) * rng.gen::<f64>();
    let spectrum = fprs_spectrum(d, delta_r1, rng)?;
    let u = sample_haar_unitary(d, rng);
    let mut m = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            let mut z = C64::new(0.0, 0.0);
            for n in 0..d {
                z += u[(i, n)] * spectrum[n] * u[(j, n)].conj();
            }
            m[(i, j)] = z;
        }
    }
    let state = QuantumState::new(m)?;
    Ok((state, delta_r1))
}

/// Spectrum (1/d + delta_r1, 1/d - dr_2, ..., 1/d - dr_d) with the dr_n
/// nonnegative, capped at 1/d, and summing to delta_r1.
fn fprs_spectrum(d: usize, delta_r1: f64, rng: &mut impl Rng) -> Result<Vec<f64>, SamplingError> {
    let df = d as f64;
    let cap = 1.0 / df;
    for _ in 0..SIMPLEX_ATTEMPT_CAP {
        let dr = simplex_sample(d - 1, delta_r1, rng);
        if dr.iter().all(|v| *v <= cap) {
            let mut spectrum = Vec::with_capacity(d);
            spectrum.push(cap + delta_r1);
            for v in dr {
                spectrum.push(cap - v);
            }
            return Ok(spectrum);
        }
    }
    Err(SamplingError::SimplexRejectionExhausted)
}

/// FPRS draw with the region picked by the (low, medium, high) weights.
pub fn sample_fprs_weighted(
    d: usize,
    weights: [f64; 3],
    rng: &mut impl Rng,
) -> Result<(QuantumState, f64, PurityRegion), SamplingError> {
    if weights.iter().any(|w| *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(SamplingError::BadWeights);
    }
    let total: f64 = weights.iter().sum();
    let u = rng.gen::<f64>() * total;
    let region = if u < weights[0] {
        PurityRegion::Low
    } else if u < weights[0] + weights[1] {
        PurityRegion::Medium
    } else {
        PurityRegion::High
    };
    let (state, delta_r1) = sample_fprs(d, region, rng)?;
    Ok((state, delta_r1, region))
}

/// Haar-random unitary: QR of a Ginibre matrix with the diagonal phases of R
/// folded into Q so that the triangular factor has a real positive diagonal.
pub fn sample_haar_unitary(d: usize, rng: &mut impl Rng) -> Array2<C64> {
    assert!(d >= 1, "unitary dimension must be positive");
    let g = ginibre(d, rng);
    let (q, r) = linalg::qr(&g).expect("square Ginibre always factorizes");
    let mut u = q;
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() == 0.0 { C64::new(1.0, 0.0) } else { rjj / rjj.norm() };
        for i in 0..d {
            u[(i, j)] *= phase;
        }
    }
    u
}

/// GUE Hamiltonian H = (G + G^dag)/2 in spectral form; with `normalize` the
/// spectrum is rescaled to span exactly [-1, 1]. A degenerate span triggers a
/// redraw.
pub fn sample_gue_hamiltonian(
    d: usize,
    rng: &mut impl Rng,
    normalize: bool,
) -> Result<BatteryHamiltonian, SamplingError> {
    if d < 2 {
        return Err(SamplingError::DimTooSmall(d));
    }
    loop {
        let g = ginibre(d, rng);
        let gdag = linalg::adjoint(&g);
        let h = (&g + &gdag).mapv(|z| 0.5 * z);
        let bh = BatteryHamiltonian::from_matrix(&h)?;
        if !normalize {
            return Ok(bh);
        }
        match bh.normalized() {
            Ok(n) => return Ok(n),
            Err(StateError::DegenerateSpan) => continue,
            Err(e) => return Err(e.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics;
    use crate::state::dephase;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    #[test]
    fn hs_state_is_valid_and_deterministic() {
        let mut r1 = rng(42);
        let mut r2 = rng(42);
        let a = sample_hs_state(4, &mut r1).unwrap();
        let b = sample_hs_state(4, &mut r2).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert!((linalg::trace(a.matrix()).re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hs_populations_match_dephased_distribution_shape() {
        // Spot-check the fast path against the full-state diagonal with the
        // same stream: both are squared row norms of the same Ginibre.
        let mut ra = rng(5);
        let state = sample_hs_state(3, &mut ra).unwrap();
        let h = BatteryHamiltonian::equally_spaced_normalized(3).unwrap();
        let p_full = dephase(&state, &h).unwrap();
        let mut rb = rng(5);
        let p_fast = sample_hs_populations(3, &mut rb).unwrap();
        for (a, b) in p_full.as_slice().iter().zip(p_fast.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn low_entropy_draw_has_zero_entries() {
        let mut r = rng(7);
        for _ in 0..200 {
            let p = sample_low_entropy_dephased(3, &mut r).unwrap();
            let zeros = p.as_slice().iter().filter(|v| **v == 0.0).count();
            assert!(zeros >= 1, "at least one exact zero entry expected");
        }
    }

    #[test]
    fn low_entropy_d2_is_basis_state() {
        let mut r = rng(9);
        for _ in 0..50 {
            let p = sample_low_entropy_dephased(2, &mut r).unwrap();
            let mut v = p.as_slice().to_vec();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(v[0], 0.0);
            assert!((v[1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn fers_ratio_zero_is_pure_hsrs() {
        let mut ra = rng(11);
        let mut rb = rng(11);
        let a = sample_fers_populations(3, (0, 1), &mut ra).unwrap();
        // Ratio zero still consumes the Bernoulli draw before sampling.
        let _: f64 = rb.gen();
        let b = sample_hs_populations(3, &mut rb).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn fprs_bounds_examples() {
        let (lo, hi) = fprs_purity_bounds(3, 0.0).unwrap();
        assert!((lo - 1.0 / 3.0).abs() < 1e-15);
        assert!((hi - 1.0 / 3.0).abs() < 1e-15);

        let (lo, hi) = fprs_purity_bounds(3, 2.0 / 3.0).unwrap();
        assert!((lo - 1.0).abs() < 1e-12);
        assert!((hi - 1.0).abs() < 1e-12);

        let (lo, hi) = fprs_purity_bounds(3, 0.3).unwrap();
        assert!((lo - (1.0 / 3.0 + 0.09 * 1.5)).abs() < 1e-12);
        assert!((hi - (1.0 / 3.0 + 0.09 + 0.09)).abs() < 1e-12);
        assert!(lo <= hi);

        assert!(fprs_purity_bounds(3, 0.7).is_err());
    }

    #[test]
    fn fprs_draw_respects_purity_bounds() {
        let mut r = rng(13);
        for region in [PurityRegion::Low, PurityRegion::Medium, PurityRegion::High] {
            for _ in 0..300 {
                let (state, dr1) = sample_fprs(3, region, &mut r).unwrap();
                let (lo, hi) = fprs_purity_bounds(3, dr1).unwrap();
                let p = state.purity();
                assert!(
                    p >= lo - 1e-12 && p <= hi + 1e-12,
                    "purity {p} outside [{lo}, {hi}] for dr1={dr1}"
                );
            }
        }
    }

    #[test]
    fn fprs_region_boundaries_partition_purity_range() {
        // Lower-bound curve evaluated at the region edges hits the thirds of
        // [1/d, 1].
        for d in 2..=5 {
            let df = d as f64;
            let (p0, _) = fprs_purity_bounds(d, PurityRegion::Low.interval(d).1).unwrap();
            assert!((p0 - (df + 2.0) / (3.0 * df)).abs() < 1e-12);
            let (p1, _) = fprs_purity_bounds(d, PurityRegion::Medium.interval(d).1).unwrap();
            assert!((p1 - (2.0 * df + 1.0) / (3.0 * df)).abs() < 1e-12);
            let (p2, _) = fprs_purity_bounds(d, PurityRegion::High.interval(d).1).unwrap();
            assert!((p2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut r = rng(17);
        for d in [1usize, 2, 3, 5] {
            let u = sample_haar_unitary(d, &mut r);
            assert!(linalg::unitarity_deviation(&u) < 1e-12, "d={d}");
        }
    }

    #[test]
    fn haar_d2_top_entry_close_to_uniform() {
        // |U_11|^2 is uniform on [0,1] for Haar; a light KS check.
        let mut r = rng(19);
        let n = 20_000;
        let mut xs: Vec<f64> = (0..n)
            .map(|_| sample_haar_unitary(2, &mut r)[(0, 0)].norm_sqr())
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, x) in xs.iter().enumerate() {
            let emp_hi = (i + 1) as f64 / n as f64;
            let emp_lo = i as f64 / n as f64;
            ks = ks.max((emp_hi - x).abs()).max((x - emp_lo).abs());
        }
        assert!(ks < 0.02, "KS statistic {ks}");
    }

    #[test]
    fn gue_is_normalized_and_repulsive() {
        let mut r = rng(23);
        for _ in 0..200 {
            let h = sample_gue_hamiltonian(4, &mut r, true).unwrap();
            let e = h.energies();
            assert!((e[0] + 1.0).abs() < 1e-12);
            assert!((e[3] - 1.0).abs() < 1e-12);
            for w in e.windows(2) {
                assert!(w[1] - w[0] > -1e-15);
            }
        }
        // Raw draws: no near-degenerate spacings expected at this sample size.
        let mut min_gap = f64::INFINITY;
        for _ in 0..2000 {
            let h = sample_gue_hamiltonian(4, &mut r, false).unwrap();
            for w in h.energies().windows(2) {
                min_gap = min_gap.min(w[1] - w[0]);
            }
        }
        assert!(min_gap > 1e-6, "level repulsion violated: {min_gap:e}");
    }

    #[test]
    fn sampler_substreams_are_independent_of_order() {
        let spec = SamplerSpec::new(SamplerMethod::Hsrs, 3, 99);
        let s = Sampler::new(spec).unwrap();
        let forward: Vec<_> = (0..10).map(|i| s.draw(i).unwrap()).collect();
        let backward: Vec<_> = (0..10).rev().map(|i| s.draw(i).unwrap()).collect();
        for (i, d) in forward.iter().enumerate() {
            let (Draw::State(a), Draw::State(b)) = (d, &backward[9 - i]) else {
                panic!("expected states");
            };
            assert_eq!(a.matrix(), b.matrix());
        }
    }

    #[test]
    fn all_samplers_emit_valid_values() {
        for method in [
            SamplerMethod::Hsrs,
            SamplerMethod::Fers,
            SamplerMethod::Fprs,
            SamplerMethod::Gue,
            SamplerMethod::Haar,
        ] {
            let s = Sampler::new(SamplerSpec::new(method, 3, 5)).unwrap();
            for i in 0..50 {
                match s.draw(i).unwrap() {
                    Draw::State(st) => {
                        assert!(QuantumState::new(st.matrix().clone()).is_ok())
                    }
                    Draw::Populations(p) => {
                        let _ = metrics::diag_entropy(&p);
                    }
                    Draw::FprsState { state, delta_r1, .. } => {
                        assert!(QuantumState::new(state.matrix().clone()).is_ok());
                        assert!((0.0..=2.0 / 3.0 + 1e-12).contains(&delta_r1));
                    }
                    Draw::Hamiltonian(h) => {
                        assert!((h.energies()[0] + 1.0).abs() < 1e-12);
                    }
                    Draw::Unitary(u) => {
                        assert!(linalg::unitarity_deviation(&u) < 1e-12);
                    }
                }
            }
        }
    }
}
