//! Validated quantum-state and battery-Hamiltonian types plus the spectral
//! primitives built on them: dephasing, passive states, partial trace, and
//! unitary evolution.
//!
//! All values are immutable after construction and cheap to clone; every
//! operation is a pure function of its inputs.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::linalg::{self, LinalgError};

/// Hermiticity validation tolerance for states.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Unit-trace validation tolerance for states.
pub const TRACE_TOL: f64 = 1e-12;
/// Positive-semidefiniteness tolerance: smallest eigenvalue may not drop
/// below the negative of this.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("dimension mismatch: state is {state_dim}, operator is {other_dim}")]
    DimMismatch { state_dim: usize, other_dim: usize },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("state dimension must be at least 1")]
    EmptyMatrix,
    #[error("matrix is not Hermitian: deviation {deviation:e} exceeds {tol:e}")]
    NonHermitian { deviation: f64, tol: f64 },
    #[error("trace is {trace}, not 1 within {tol:e}")]
    TraceNotOne { trace: f64, tol: f64 },
    #[error("matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },
    #[error("energies are not sorted in ascending order")]
    EnergiesNotAscending,
    #[error("eigenbasis is not unitary: deviation {deviation:e}")]
    BasisNotUnitary { deviation: f64 },
    #[error("energy span is degenerate: highest and lowest levels coincide")]
    DegenerateSpan,
    #[error("populations are invalid: {reason}")]
    InvalidPopulations { reason: String },
    #[error("spectrum is invalid: {reason}")]
    InvalidSpectrum { reason: String },
    #[error("subsystem dimensions {dim_a}x{dim_b} do not match total dimension {total}")]
    BadSubsystemDims { dim_a: usize, dim_b: usize, total: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Which tensor factor `partial_trace` keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// A validated d x d density matrix: Hermitian, unit trace, positive
/// semidefinite within the module tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    dim: usize,
    matrix: Array2<C64>,
}

impl QuantumState {
    /// Validates Hermiticity, unit trace, and positive semidefiniteness.
    pub fn new(matrix: Array2<C64>) -> Result<Self, StateError> {
        Self::with_tolerances(matrix, HERMITICITY_TOL, TRACE_TOL, PSD_TOL)
    }

    /// Validation with caller-chosen tolerances. Dynamics snapshots use the
    /// looser trace/positivity budgets that integration error permits.
    pub fn with_tolerances(
        matrix: Array2<C64>,
        herm_tol: f64,
        trace_tol: f64,
        psd_tol: f64,
    ) -> Result<Self, StateError> {
        let (rows, cols) = matrix.dim();
        if rows != cols {
            return Err(StateError::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(StateError::EmptyMatrix);
        }
        let dev = linalg::hermiticity_deviation(&matrix);
        if dev > herm_tol {
            return Err(StateError::NonHermitian { deviation: dev, tol: herm_tol });
        }
        let tr = linalg::trace(&matrix);
        if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
            return Err(StateError::TraceNotOne { trace: tr.re, tol: trace_tol });
        }
        if !linalg::is_psd_within(&matrix, psd_tol) {
            // Cholesky said no; get the actual minimum for the report.
            let (w, _) = linalg::eig_hermitian(&matrix)?;
            if w[0] < -psd_tol {
                return Err(StateError::NotPositive { min_eigenvalue: w[0] });
            }
        }
        Ok(Self { dim: rows, matrix })
    }

    /// Wraps a matrix known valid by construction (unitary conjugation of a
    /// valid state, partial trace of a valid state, spectral assembly from a
    /// probability vector).
    pub(crate) fn trusted(matrix: Array2<C64>) -> Self {
        let dim = matrix.nrows();
        debug_assert!(linalg::hermiticity_deviation(&matrix) <= 1e-9);
        debug_assert!((linalg::trace(&matrix).re - 1.0).abs() <= 1e-8);
        Self { dim, matrix }
    }

    /// Pure-state projector |psi><psi| from an unnormalized state vector.
    pub fn from_pure(psi: &Array1<C64>) -> Result<Self, StateError> {
        let n = psi.len();
        if n == 0 {
            return Err(StateError::EmptyMatrix);
        }
        let norm_sq: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm_sq <= 0.0 {
            return Err(StateError::InvalidPopulations { reason: "zero state vector".into() });
        }
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = psi[i] * psi[j].conj() / norm_sq;
            }
        }
        Ok(Self::trusted(m))
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self, StateError> {
        if dim == 0 {
            return Err(StateError::EmptyMatrix);
        }
        let m = Array2::from_diag(&Array1::from_elem(dim, C64::new(1.0 / dim as f64, 0.0)));
        Ok(Self::trusted(m))
    }

    /// Diagonal state sum_n p_n |e_n><e_n| in the given eigenbasis.
    pub fn from_populations(
        populations: &PopulationVector,
        hamiltonian: &BatteryHamiltonian,
    ) -> Result<Self, StateError> {
        if populations.dim() != hamiltonian.dim() {
            return Err(StateError::DimMismatch {
                state_dim: populations.dim(),
                other_dim: hamiltonian.dim(),
            });
        }
        Ok(Self::trusted(hamiltonian.assemble_diagonal(populations.as_slice())))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    /// Tr[rho^2].
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Eigenvalues sorted descending, as a validated [`Spectrum`].
    pub fn spectrum(&self) -> Result<Spectrum, StateError> {
        let (w, _) = linalg::eig_hermitian(&self.matrix)?;
        Spectrum::from_ascending(w)
    }
}

/// A battery Hamiltonian stored in spectral form: ascending eigenenergies
/// plus the unitary whose columns are the matching eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryHamiltonian {
    dim: usize,
    energies: Vec<f64>,
    basis: Array2<C64>,
}

impl BatteryHamiltonian {
    pub fn new(energies: Vec<f64>, basis: Array2<C64>) -> Result<Self, StateError> {
        let d = energies.len();
        if d == 0 {
            return Err(StateError::EmptyMatrix);
        }
        if basis.dim() != (d, d) {
            return Err(StateError::NotSquare { rows: basis.nrows(), cols: basis.ncols() });
        }
        if energies.windows(2).any(|w| w[0] > w[1]) {
            return Err(StateError::EnergiesNotAscending);
        }
        let dev = linalg::unitarity_deviation(&basis);
        if dev > HERMITICITY_TOL {
            return Err(StateError::BasisNotUnitary { deviation: dev });
        }
        Ok(Self { dim: d, energies, basis })
    }

    /// Diagonal Hamiltonian in the computational basis.
    pub fn diagonal(energies: Vec<f64>) -> Result<Self, StateError> {
        let d = energies.len();
        Self::new(energies, linalg::identity(d))
    }

    /// Spectral form of an arbitrary Hermitian matrix.
    pub fn from_matrix(h: &Array2<C64>) -> Result<Self, StateError> {
        let (w, v) = linalg::eig_hermitian(h)?;
        Ok(Self { dim: w.len(), energies: w, basis: v })
    }

    /// Equally spaced levels spanning [-1, 1], the normalized reference
    /// spectrum used for population-resolved experiments.
    pub fn equally_spaced_normalized(dim: usize) -> Result<Self, StateError> {
        if dim < 2 {
            return Err(StateError::DegenerateSpan);
        }
        let energies = (0..dim)
            .map(|n| -1.0 + 2.0 * n as f64 / (dim - 1) as f64)
            .collect();
        Self::diagonal(energies)
    }

    /// Rescaled copy with spectrum mapped through
    /// (2 H - (e_max + e_min) I) / (e_max - e_min), so it spans [-1, 1].
    pub fn normalized(&self) -> Result<Self, StateError> {
        let lo = self.energies[0];
        let hi = self.energies[self.dim - 1];
        let span = hi - lo;
        if span <= 0.0 {
            return Err(StateError::DegenerateSpan);
        }
        let energies = self.energies.iter().map(|e| (2.0 * e - (hi + lo)) / span).collect();
        Ok(Self { dim: self.dim, energies, basis: self.basis.clone() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn basis(&self) -> &Array2<C64> {
        &self.basis
    }

    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    /// Dense matrix U diag(e) U^dag.
    pub fn matrix(&self) -> Array2<C64> {
        self.assemble_diagonal(&self.energies)
    }

    /// U diag(values) U^dag for arbitrary real diagonal values.
    fn assemble_diagonal(&self, values: &[f64]) -> Array2<C64> {
        let d = self.dim;
        let mut out = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                let mut z = C64::new(0.0, 0.0);
                for (n, &v) in values.iter().enumerate() {
                    z += self.basis[(i, n)] * v * self.basis[(j, n)].conj();
                }
                out[(i, j)] = z;
            }
        }
        out
    }
}

/// Eigenvalues of a state sorted descending; nonnegative within tolerance
/// and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self, StateError> {
        if values.is_empty() {
            return Err(StateError::InvalidSpectrum { reason: "empty".into() });
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(StateError::InvalidSpectrum { reason: "not sorted descending".into() });
        }
        Self::validate_simplex(&values).map_err(|reason| StateError::InvalidSpectrum { reason })?;
        Ok(Self { values })
    }

    /// Reorders an eigensolver's ascending output to descending. The reversal
    /// keeps the solver's ordering among exactly tied values.
    pub fn from_ascending(mut values: Vec<f64>) -> Result<Self, StateError> {
        values.reverse();
        Self::new(values)
    }

    fn validate_simplex(values: &[f64]) -> Result<(), String> {
        if let Some(v) = values.iter().find(|v| **v < -PSD_TOL) {
            return Err(format!("negative weight {v:e}"));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > TRACE_TOL {
            return Err(format!("sum {sum} differs from 1"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Descending eigenvalues.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Energy-level populations: entries of the dephased state's diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationVector {
    p: Vec<f64>,
}

impl PopulationVector {
    pub fn new(p: Vec<f64>) -> Result<Self, StateError> {
        if p.is_empty() {
            return Err(StateError::InvalidPopulations { reason: "empty".into() });
        }
        if let Some(v) = p.iter().find(|v| **v < -1e-12) {
            return Err(StateError::InvalidPopulations {
                reason: format!("negative population {v:e}"),
            });
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > TRACE_TOL {
            return Err(StateError::InvalidPopulations {
                reason: format!("sum {sum} differs from 1"),
            });
        }
        Ok(Self { p })
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    /// Populations sorted descending with ties kept in index order.
    pub fn sorted_descending(&self) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..self.p.len()).collect();
        idx.sort_by(|&i, &j| self.p[j].partial_cmp(&self.p[i]).unwrap());
        idx.into_iter().map(|i| self.p[i]).collect()
    }
}

/// p_n = <e_n| rho |e_n>, the populations of the dephased state.
pub fn dephase(
    rho: &QuantumState,
    hamiltonian: &BatteryHamiltonian,
) -> Result<PopulationVector, StateError> {
    let d = rho.dim();
    if d != hamiltonian.dim() {
        return Err(StateError::DimMismatch { state_dim: d, other_dim: hamiltonian.dim() });
    }
    let u = hamiltonian.basis();
    let m = rho.matrix();
    let mut p = vec![0.0; d];
    for n in 0..d {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..d {
                row += m[(i, j)] * u[(j, n)];
            }
            acc += u[(i, n)].conj() * row;
        }
        p[n] = acc.re;
    }
    PopulationVector::new(p)
}

/// The passive state: descending eigenvalues of `rho` placed on the ascending
/// energy eigenbasis. Carries the same spectrum as the input and minimizes
/// energy among its unitary orbit.
pub fn passive_state(
    rho: &QuantumState,
    hamiltonian: &BatteryHamiltonian,
) -> Result<QuantumState, StateError> {
    let d = rho.dim();
    if d != hamiltonian.dim() {
        return Err(StateError::DimMismatch { state_dim: d, other_dim: hamiltonian.dim() });
    }
    let spectrum = rho.spectrum()?;
    Ok(QuantumState::trusted(hamiltonian.assemble_diagonal(spectrum.values())))
}

/// Traces out one tensor factor of a state on A (x) B.
pub fn partial_trace(
    rho: &QuantumState,
    keep: Subsystem,
    dims: (usize, usize),
) -> Result<QuantumState, StateError> {
    let (da, db) = dims;
    if da == 0 || db == 0 || da * db != rho.dim() {
        return Err(StateError::BadSubsystemDims { dim_a: da, dim_b: db, total: rho.dim() });
    }
    let m = rho.matrix();
    let out = match keep {
        Subsystem::A => {
            let mut out = Array2::zeros((da, da));
            for i in 0..da {
                for j in 0..da {
                    let mut z = C64::new(0.0, 0.0);
                    for k in 0..db {
                        z += m[(i * db + k, j * db + k)];
                    }
                    out[(i, j)] = z;
                }
            }
            out
        }
        Subsystem::B => {
            let mut out = Array2::zeros((db, db));
            for k in 0..db {
                for l in 0..db {
                    let mut z = C64::new(0.0, 0.0);
                    for i in 0..da {
                        z += m[(i * db + k, i * db + l)];
                    }
                    out[(k, l)] = z;
                }
            }
            out
        }
    };
    Ok(QuantumState::trusted(out))
}

/// rho(t) = exp(-iHt) rho exp(+iHt) through the spectral decomposition of the
/// Hermitian generator (hbar = 1).
pub fn evolve_unitary(
    rho: &QuantumState,
    generator: &Array2<C64>,
    t: f64,
) -> Result<QuantumState, StateError> {
    if generator.nrows() != rho.dim() || generator.ncols() != rho.dim() {
        return Err(StateError::DimMismatch {
            state_dim: rho.dim(),
            other_dim: generator.nrows(),
        });
    }
    let (w, v) = linalg::eig_hermitian(generator)?;
    let d = rho.dim();
    let mut u = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            let mut z = C64::new(0.0, 0.0);
            for n in 0..d {
                let phase = C64::from_polar(1.0, -w[n] * t);
                z += v[(i, n)] * phase * v[(j, n)].conj();
            }
            u[(i, j)] = z;
        }
    }
    let rotated = u.dot(rho.matrix()).dot(&linalg::adjoint(&u));
    Ok(QuantumState::trusted(rotated))
}
