//! Cavity-battery charging dynamics: Jaynes-Cummings and Tavis-Cummings
//! batteries under closed evolution, and the lossy Dicke battery under a
//! photon-damping master equation.
//!
//! The battery is the symmetric collective-spin sector of N_B two-level
//! atoms (dimension N_B + 1); the charger is a Fock space truncated at
//! `n_max`. Closed systems are propagated exactly through one spectral
//! decomposition of the total Hamiltonian; the open system integrates the
//! master equation with fixed-step RK4. hbar = 1, resonant case
//! omega_c = omega_b = omega.
//!
//! For the Jaynes-Cummings battery the charger amplitudes are indexed by
//! excitation block: amplitude alpha_n multiplies the pair
//! {|e, n>, |g, n+1>} oscillating at Rabi frequency 2 g sqrt(n+1). The
//! closed-form ergotropy [`jc_analytic_ergotropy`] is exact for that
//! preparation, which is what makes it usable as an oracle for the
//! numerical propagator.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::linalg;
use crate::metrics::ErgotropyReport;
use crate::state::{BatteryHamiltonian, QuantumState, StateError};

/// Truncation-tail budget for the initial charger state.
pub const TAIL_TOL: f64 = 1e-12;
/// Trace budget for the evolving total state.
pub const TRACE_DRIFT_TOL: f64 = 1e-9;
/// Smallest admissible eigenvalue of the evolving total state.
pub const MIN_EIG_TOL: f64 = 1e-8;
/// Hermiticity budget for the evolving total state.
pub const HERM_DRIFT_TOL: f64 = 1e-10;
/// Occupancy budget for the top Fock level (truncation leakage).
pub const LEAKAGE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("Fock truncation too small: n_max = {n_max} leaves tail {tail:e} > {budget:e}")]
    TruncationTooSmall { n_max: usize, tail: f64, budget: f64 },
    #[error("invariant `{invariant}` violated at t = {time}: {value:e}")]
    InvariantViolated { invariant: &'static str, time: f64, value: f64 },
    #[error("operation requires the {expected} model")]
    WrongModel { expected: &'static str },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CavityModel {
    JaynesCummings,
    TavisCummings,
    Dicke,
}

impl CavityModel {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jc" | "jaynes-cummings" => Some(Self::JaynesCummings),
            "tc" | "tavis-cummings" => Some(Self::TavisCummings),
            "dicke" => Some(Self::Dicke),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::JaynesCummings => "jc",
            Self::TavisCummings => "tc",
            Self::Dicke => "dicke",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChargerState {
    /// Coherent amplitudes with the given mean excitation number.
    Coherent { mean_photons: f64 },
    /// A single Fock amplitude.
    Fock { photons: usize },
}

impl ChargerState {
    pub fn occupancy(&self) -> f64 {
        match self {
            ChargerState::Coherent { mean_photons } => *mean_photons,
            ChargerState::Fock { photons } => *photons as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavityBatteryConfig {
    pub model: CavityModel,
    /// Number of battery atoms N_B; the battery dimension is N_B + 1.
    pub n_atoms: usize,
    /// Resonant frequency omega_c = omega_b.
    pub omega: f64,
    /// Coupling strength g.
    pub coupling: f64,
    pub charger: ChargerState,
    /// Fock truncation (inclusive top level). None picks the default
    /// N_c + N_B + 20, grown if needed to meet the tail budget.
    pub n_max: Option<usize>,
    /// Cavity damping rate; nonzero only for the Dicke model.
    pub kappa: f64,
    pub t_max: f64,
    /// Integrator step for the open system; output spacing for closed runs.
    pub dt: f64,
    /// Emit a record every this many steps.
    pub output_stride: usize,
}

impl CavityBatteryConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |msg: String| Err(DynamicsError::InvalidConfig(msg));
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.n_atoms < 1 {
            return bad("n_atoms must be at least 1".into());
        }
        if !positive(self.omega) {
            return bad(format!("omega must be positive, got {}", self.omega));
        }
        if !positive(self.coupling) {
            return bad(format!("coupling must be positive, got {}", self.coupling));
        }
        if !self.kappa.is_finite() || self.kappa < 0.0 {
            return bad(format!("kappa must be nonnegative, got {}", self.kappa));
        }
        if self.kappa > 0.0 && self.model != CavityModel::Dicke {
            return bad("cavity damping is only supported by the Dicke model".into());
        }
        if let ChargerState::Coherent { mean_photons } = self.charger {
            if !positive(mean_photons) {
                return bad("coherent charger needs a positive mean photon number".into());
            }
        }
        if let Some(n_max) = self.n_max {
            let floor = self.charger.occupancy().ceil() as usize + self.n_atoms;
            if n_max < floor {
                return bad(format!("n_max = {n_max} below N_c + N_B = {floor}"));
            }
        }
        if !positive(self.t_max) {
            return bad("t_max must be positive".into());
        }
        if !positive(self.dt) {
            return bad("dt must be positive".into());
        }
        if self.output_stride == 0 {
            return bad("output_stride must be at least 1".into());
        }
        Ok(())
    }

    pub fn battery_dim(&self) -> usize {
        self.n_atoms + 1
    }

    /// Resolved Fock truncation: the explicit value (tail checked downstream)
    /// or the smallest default meeting the tail budget.
    pub fn resolve_n_max(&self) -> Result<usize, DynamicsError> {
        if let Some(n) = self.n_max {
            let tail = self.charger_tail(n);
            if tail > TAIL_TOL {
                return Err(DynamicsError::TruncationTooSmall {
                    n_max: n,
                    tail,
                    budget: TAIL_TOL,
                });
            }
            return Ok(n);
        }
        let mut n = self.charger.occupancy().ceil() as usize + self.n_atoms + 20;
        for _ in 0..400 {
            if self.charger_tail(n) <= TAIL_TOL {
                return Ok(n);
            }
            n += 1;
        }
        Err(DynamicsError::TruncationTooSmall {
            n_max: n,
            tail: self.charger_tail(n),
            budget: TAIL_TOL,
        })
    }

    /// Weight of charger amplitudes that do not fit below the truncation.
    fn charger_tail(&self, n_max: usize) -> f64 {
        // JC block amplitudes sit one photon level up.
        let top_amp_index = match self.model {
            CavityModel::JaynesCummings => n_max.saturating_sub(1),
            _ => n_max,
        };
        match self.charger {
            ChargerState::Fock { photons } => {
                if photons <= top_amp_index {
                    0.0
                } else {
                    1.0
                }
            }
            ChargerState::Coherent { mean_photons } => {
                let amps = coherent_amplitudes(mean_photons, top_amp_index);
                (1.0 - amps.iter().map(|a| a * a).sum::<f64>()).max(0.0)
            }
        }
    }
}

/// Poisson amplitudes a_n = exp(-Nc/2) Nc^(n/2) / sqrt(n!), for n = 0..=top.
pub fn coherent_amplitudes(mean_photons: f64, top: usize) -> Vec<f64> {
    let mut amps = Vec::with_capacity(top + 1);
    let mut a = (-mean_photons / 2.0).exp();
    for n in 0..=top {
        amps.push(a);
        a *= (mean_photons / (n + 1) as f64).sqrt();
    }
    amps
}

/// One record of a charging trajectory.
#[derive(Debug, Clone)]
pub struct TimePoint {
    pub time: f64,
    /// Battery energy-level populations.
    pub populations: Vec<f64>,
    pub report: ErgotropyReport,
    /// Cavity mean photon number.
    pub mean_photon: f64,
    /// Tr[H rho] of the total system.
    pub total_energy: f64,
    /// Mean excitation number <a^dag a + J_z + N_B/2>.
    pub excitation: f64,
}

#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub points: Vec<TimePoint>,
}

/// The total Hamiltonian kept as a coordinate list plus its dense form.
struct AssembledSystem {
    dim_battery: usize,
    dim_cavity: usize,
    dense: Array2<C64>,
    /// (row, col, value) over all nonzero entries.
    coo: Vec<(usize, usize, C64)>,
    battery: BatteryHamiltonian,
}

fn collective_raising(n_atoms: usize) -> Vec<f64> {
    // <m+1| J_+ |m> for m = -j .. j-1, indexed by the lower level.
    let j = n_atoms as f64 / 2.0;
    (0..n_atoms)
        .map(|k| {
            let m = k as f64 - j;
            (j * (j + 1.0) - m * (m + 1.0)).sqrt()
        })
        .collect()
}

fn assemble(config: &CavityBatteryConfig, n_max: usize) -> AssembledSystem {
    let db = config.battery_dim();
    let dc = n_max + 1;
    let d = db * dc;
    let j = config.n_atoms as f64 / 2.0;
    let omega = config.omega;
    let g = config.coupling;
    let jp = collective_raising(config.n_atoms);
    let idx = |b: usize, n: usize| b * dc + n;

    let mut coo: Vec<(usize, usize, C64)> = Vec::new();
    for b in 0..db {
        let m = b as f64 - j;
        for n in 0..dc {
            let e = omega * (n as f64 + m);
            if e != 0.0 {
                coo.push((idx(b, n), idx(b, n), C64::new(e, 0.0)));
            }
        }
    }
    match config.model {
        CavityModel::JaynesCummings | CavityModel::TavisCummings => {
            // g (J_+ a + J_- a^dag)
            for (b, &jpb) in jp.iter().enumerate() {
                for n in 1..dc {
                    let v = g * jpb * (n as f64).sqrt();
                    let (r, c) = (idx(b + 1, n - 1), idx(b, n));
                    coo.push((r, c, C64::new(v, 0.0)));
                    coo.push((c, r, C64::new(v, 0.0)));
                }
            }
        }
        CavityModel::Dicke => {
            // 2 omega g J_x (a^dag + a), J_x = (J_+ + J_-)/2
            for (b, &jpb) in jp.iter().enumerate() {
                let jx = jpb / 2.0;
                for n in 0..dc {
                    if n + 1 < dc {
                        let v = 2.0 * omega * g * jx * ((n + 1) as f64).sqrt();
                        let (r, c) = (idx(b + 1, n + 1), idx(b, n));
                        coo.push((r, c, C64::new(v, 0.0)));
                        coo.push((c, r, C64::new(v, 0.0)));
                    }
                    if n > 0 {
                        let v = 2.0 * omega * g * jx * (n as f64).sqrt();
                        let (r, c) = (idx(b + 1, n - 1), idx(b, n));
                        coo.push((r, c, C64::new(v, 0.0)));
                        coo.push((c, r, C64::new(v, 0.0)));
                    }
                }
            }
        }
    }
    let mut dense = Array2::zeros((d, d));
    for &(r, c, v) in &coo {
        dense[(r, c)] += v;
    }
    let energies: Vec<f64> = (0..db).map(|b| omega * (b as f64 - j)).collect();
    let battery = BatteryHamiltonian::diagonal(energies).expect("ascending by construction");
    AssembledSystem { dim_battery: db, dim_cavity: dc, dense, coo, battery }
}

/// Total Hamiltonian on battery (x) cavity plus the bare battery
/// Hamiltonian omega J_z in spectral form.
pub fn build_hamiltonian(
    config: &CavityBatteryConfig,
) -> Result<(Array2<C64>, BatteryHamiltonian), DynamicsError> {
    config.validate()?;
    let n_max = config.resolve_n_max()?;
    let sys = assemble(config, n_max);
    Ok((sys.dense, sys.battery))
}

/// Initial product state: battery ground (x) charger amplitudes, as a state
/// vector on the truncated joint space.
pub fn initial_state(config: &CavityBatteryConfig) -> Result<Array1<C64>, DynamicsError> {
    config.validate()?;
    let n_max = config.resolve_n_max()?;
    Ok(initial_vector(config, n_max))
}

fn initial_vector(config: &CavityBatteryConfig, n_max: usize) -> Array1<C64> {
    let db = config.battery_dim();
    let dc = n_max + 1;
    let mut cavity = vec![0.0f64; dc];
    match (config.model, config.charger) {
        (CavityModel::JaynesCummings, ChargerState::Fock { photons }) => {
            cavity[photons + 1] = 1.0;
        }
        (CavityModel::JaynesCummings, ChargerState::Coherent { mean_photons }) => {
            let amps = coherent_amplitudes(mean_photons, dc.saturating_sub(2));
            for (n, a) in amps.iter().enumerate() {
                cavity[n + 1] = *a;
            }
        }
        (_, ChargerState::Fock { photons }) => {
            cavity[photons] = 1.0;
        }
        (_, ChargerState::Coherent { mean_photons }) => {
            let amps = coherent_amplitudes(mean_photons, n_max);
            cavity.copy_from_slice(&amps);
        }
    }
    let mut psi = Array1::zeros(db * dc);
    for (n, a) in cavity.iter().enumerate() {
        psi[n] = C64::new(*a, 0.0); // battery index 0 = ground
    }
    psi
}

fn battery_marginal_of_vector(psi: &Array1<C64>, db: usize, dc: usize) -> Array2<C64> {
    let mut rho = Array2::zeros((db, db));
    for b in 0..db {
        for b2 in 0..db {
            let mut z = C64::new(0.0, 0.0);
            for n in 0..dc {
                z += psi[b * dc + n] * psi[b2 * dc + n].conj();
            }
            rho[(b, b2)] = z;
        }
    }
    rho
}

fn record_from_marginal(
    time: f64,
    rho_b: Array2<C64>,
    battery: &BatteryHamiltonian,
    mean_photon: f64,
    total_energy: f64,
    n_atoms: usize,
) -> Result<TimePoint, DynamicsError> {
    let populations: Vec<f64> = (0..rho_b.nrows()).map(|b| rho_b[(b, b)].re).collect();
    let state =
        QuantumState::with_tolerances(rho_b, HERM_DRIFT_TOL, TRACE_DRIFT_TOL, MIN_EIG_TOL)?;
    let report = ErgotropyReport::compute(&state, battery)?;
    let j = n_atoms as f64 / 2.0;
    let battery_excitation: f64 = populations
        .iter()
        .enumerate()
        .map(|(b, p)| (b as f64 - j + j) * p)
        .sum();
    Ok(TimePoint {
        time,
        populations,
        report,
        mean_photon,
        total_energy,
        excitation: mean_photon + battery_excitation,
    })
}

fn expectation_sparse(coo: &[(usize, usize, C64)], psi: &Array1<C64>) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for &(r, c, v) in coo {
        acc += psi[r].conj() * v * psi[c];
    }
    acc.re
}

/// Closed-system charging trajectory via the spectral propagator.
pub fn evolve_closed(config: &CavityBatteryConfig) -> Result<TimeSeries, DynamicsError> {
    config.validate()?;
    if config.kappa != 0.0 {
        return Err(DynamicsError::InvalidConfig(
            "closed evolution requires kappa = 0".into(),
        ));
    }
    let n_max = config.resolve_n_max()?;
    let sys = assemble(config, n_max);
    let (db, dc) = (sys.dim_battery, sys.dim_cavity);
    let d = db * dc;
    let psi0 = initial_vector(config, n_max);
    let (w, v) = linalg::eig_hermitian(&sys.dense)?;
    // c0 = V^dag psi0
    let mut c0 = vec![C64::new(0.0, 0.0); d];
    for (n, c) in c0.iter_mut().enumerate() {
        for i in 0..d {
            *c += v[(i, n)].conj() * psi0[i];
        }
    }

    let step = config.dt * config.output_stride as f64;
    let n_out = (config.t_max / step).round() as usize;
    let mut points = Vec::with_capacity(n_out + 1);
    let mut psi = Array1::zeros(d);
    for k in 0..=n_out {
        let t = k as f64 * step;
        for i in 0..d {
            let mut z = C64::new(0.0, 0.0);
            for n in 0..d {
                z += v[(i, n)] * C64::from_polar(1.0, -w[n] * t) * c0[n];
            }
            psi[i] = z;
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > TRACE_DRIFT_TOL {
            return Err(DynamicsError::InvariantViolated {
                invariant: "total-state norm",
                time: t,
                value: norm - 1.0,
            });
        }
        let top: f64 = (0..db).map(|b| psi[b * dc + dc - 1].norm_sqr()).sum();
        if top > LEAKAGE_TOL {
            return Err(DynamicsError::InvariantViolated {
                invariant: "top Fock level occupancy",
                time: t,
                value: top,
            });
        }
        let mean_photon: f64 = (0..db)
            .flat_map(|b| (0..dc).map(move |n| (b, n)))
            .map(|(b, n)| n as f64 * psi[b * dc + n].norm_sqr())
            .sum();
        let total_energy = expectation_sparse(&sys.coo, &psi);
        let rho_b = battery_marginal_of_vector(&psi, db, dc);
        points.push(record_from_marginal(
            t,
            rho_b,
            &sys.battery,
            mean_photon,
            total_energy,
            config.n_atoms,
        )?);
    }
    Ok(TimeSeries { points })
}

/// Closed-form ergotropy of the Jaynes-Cummings battery at time `t`.
pub fn jc_analytic_ergotropy(config: &CavityBatteryConfig, t: f64) -> Result<f64, DynamicsError> {
    if config.model != CavityModel::JaynesCummings || config.n_atoms != 1 {
        return Err(DynamicsError::WrongModel { expected: "Jaynes-Cummings" });
    }
    config.validate()?;
    let omega = config.omega;
    let g = config.coupling;
    let amps: Vec<f64> = match config.charger {
        ChargerState::Fock { photons } => {
            let mut a = vec![0.0; photons + 1];
            a[photons] = 1.0;
            a
        }
        ChargerState::Coherent { mean_photons } => {
            // Enough terms for the tail to vanish at double precision.
            let mut top = mean_photons.ceil() as usize + 30;
            loop {
                let a = coherent_amplitudes(mean_photons, top);
                let mass: f64 = a.iter().map(|x| x * x).sum();
                if 1.0 - mass < 1e-18 || top > 400 {
                    break a;
                }
                top += 20;
            }
        }
    };
    let rabi = |n: usize| 2.0 * g * ((n + 1) as f64).sqrt();
    let mut excited = 0.0;
    let mut mean_cos = 0.0;
    for (n, a) in amps.iter().enumerate() {
        let half = 0.5 * rabi(n) * t;
        excited += a * a * half.sin() * half.sin();
        mean_cos += a * a * (rabi(n) * t).cos();
    }
    let mut off = 0.0;
    for m in 1..amps.len() {
        off += amps[m - 1]
            * amps[m]
            * (0.5 * rabi(m - 1) * t).cos()
            * (0.5 * rabi(m) * t).sin();
    }
    let det = (1.0 - excited) * excited - off * off;
    Ok(-0.5 * omega * mean_cos + 0.5 * omega * (1.0 - 4.0 * det).max(0.0).sqrt())
}

/// The piecewise Fock-charger form: zero outside the middle half of each Rabi
/// period, -omega cos(Omega_Nc t) inside it.
pub fn jc_fock_piecewise(omega: f64, g: f64, photons: usize, t: f64) -> f64 {
    let rabi = 2.0 * g * ((photons + 1) as f64).sqrt();
    (-omega * (rabi * t).cos()).max(0.0)
}

/// Period of the Fock-charger ergotropy, pi / (g sqrt(Nc + 1)).
pub fn jc_fock_period(g: f64, photons: usize) -> f64 {
    std::f64::consts::PI / (g * ((photons + 1) as f64).sqrt())
}

struct LindbladWorkspace {
    k1: Array2<C64>,
    k2: Array2<C64>,
    k3: Array2<C64>,
    k4: Array2<C64>,
    stage: Array2<C64>,
}

struct LindbladContext<'a> {
    coo: &'a [(usize, usize, C64)],
    dim: usize,
    dim_cavity: usize,
    kappa: f64,
}

/// out = -i [H, rho] + kappa (a rho a^dag - {a^dag a, rho}/2)
fn lindblad_rhs(out: &mut Array2<C64>, rho: &Array2<C64>, ctx: &LindbladContext<'_>) {
    let d = ctx.dim;
    let dc = ctx.dim_cavity;
    out.fill(C64::new(0.0, 0.0));
    let rho_s = rho.as_slice().expect("row-major");
    {
        let out_s = out.as_slice_mut().expect("row-major");
        let minus_i = C64::new(0.0, -1.0);
        for &(r, c, v) in ctx.coo {
            // -i H rho: row r accumulates -i v * rho[c, :]
            let f = minus_i * v;
            let (dst, src) = (r * d, c * d);
            for j in 0..d {
                out_s[dst + j] += f * rho_s[src + j];
            }
            // +i rho H: column c accumulates +i v * rho[:, r]
            let f = -minus_i * v;
            for i in 0..d {
                out_s[i * d + c] += f * rho_s[i * d + r];
            }
        }
        if ctx.kappa > 0.0 {
            let k = ctx.kappa;
            // a rho a^dag: shift both photon indices up by one with sqrt weights.
            for i in 0..d {
                let (bi, ni) = (i / dc, i % dc);
                if ni + 1 >= dc {
                    continue;
                }
                let wi = ((ni + 1) as f64).sqrt();
                let src_i = bi * dc + ni + 1;
                for jj in 0..d {
                    let (bj, nj) = (jj / dc, jj % dc);
                    if nj + 1 >= dc {
                        continue;
                    }
                    let wj = ((nj + 1) as f64).sqrt();
                    let src_j = bj * dc + nj + 1;
                    out_s[i * d + jj] += k * wi * wj * rho_s[src_i * d + src_j];
                }
            }
            // -kappa/2 {n, rho}
            for i in 0..d {
                let ni = (i % dc) as f64;
                for jj in 0..d {
                    let nj = (jj % dc) as f64;
                    out_s[i * d + jj] -= 0.5 * k * (ni + nj) * rho_s[i * d + jj];
                }
            }
        }
    }
}

fn rk4_step(
    rho: &mut Array2<C64>,
    dt: f64,
    ctx: &LindbladContext<'_>,
    ws: &mut LindbladWorkspace,
) {
    lindblad_rhs(&mut ws.k1, rho, ctx);
    ws.stage.assign(rho);
    ws.stage.scaled_add(C64::new(0.5 * dt, 0.0), &ws.k1);
    lindblad_rhs(&mut ws.k2, &ws.stage, ctx);
    ws.stage.assign(rho);
    ws.stage.scaled_add(C64::new(0.5 * dt, 0.0), &ws.k2);
    lindblad_rhs(&mut ws.k3, &ws.stage, ctx);
    ws.stage.assign(rho);
    ws.stage.scaled_add(C64::new(dt, 0.0), &ws.k3);
    lindblad_rhs(&mut ws.k4, &ws.stage, ctx);
    let sixth = dt / 6.0;
    rho.scaled_add(C64::new(sixth, 0.0), &ws.k1);
    rho.scaled_add(C64::new(2.0 * sixth, 0.0), &ws.k2);
    rho.scaled_add(C64::new(2.0 * sixth, 0.0), &ws.k3);
    rho.scaled_add(C64::new(sixth, 0.0), &ws.k4);
    // Re-Hermitize: the RHS is Hermitian in exact arithmetic, so this only
    // cancels roundoff.
    let d = rho.nrows();
    for i in 0..d {
        rho[(i, i)] = C64::new(rho[(i, i)].re, 0.0);
        for j in (i + 1)..d {
            let z = 0.5 * (rho[(i, j)] + rho[(j, i)].conj());
            rho[(i, j)] = z;
            rho[(j, i)] = z.conj();
        }
    }
}

/// Open Dicke charging trajectory: fixed-step RK4 on the photon-damping
/// master equation. Trace, Hermiticity, positivity, and truncation occupancy
/// are checked at every emitted record.
pub fn evolve_open(config: &CavityBatteryConfig) -> Result<TimeSeries, DynamicsError> {
    config.validate()?;
    if config.model != CavityModel::Dicke {
        return Err(DynamicsError::WrongModel { expected: "Dicke" });
    }
    let n_max = config.resolve_n_max()?;
    let sys = assemble(config, n_max);
    let (db, dc) = (sys.dim_battery, sys.dim_cavity);
    let d = db * dc;
    let psi0 = initial_vector(config, n_max);
    let mut rho = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            rho[(i, j)] = psi0[i] * psi0[j].conj();
        }
    }
    let ctx = LindbladContext { coo: &sys.coo, dim: d, dim_cavity: dc, kappa: config.kappa };
    let mut ws = LindbladWorkspace {
        k1: Array2::zeros((d, d)),
        k2: Array2::zeros((d, d)),
        k3: Array2::zeros((d, d)),
        k4: Array2::zeros((d, d)),
        stage: Array2::zeros((d, d)),
    };

    let total_steps = (config.t_max / config.dt).round() as usize;
    let mut points = Vec::new();
    let mut step_index = 0usize;
    loop {
        if step_index.is_multiple_of(config.output_stride) || step_index == total_steps {
            let t = step_index as f64 * config.dt;
            points.push(open_record(&rho, &sys, config, t)?);
        }
        if step_index >= total_steps {
            break;
        }
        rk4_step(&mut rho, config.dt, &ctx, &mut ws);
        step_index += 1;
    }
    Ok(TimeSeries { points })
}

fn open_record(
    rho: &Array2<C64>,
    sys: &AssembledSystem,
    config: &CavityBatteryConfig,
    t: f64,
) -> Result<TimePoint, DynamicsError> {
    let (db, dc) = (sys.dim_battery, sys.dim_cavity);
    let d = db * dc;
    let tr = linalg::trace(rho).re;
    if (tr - 1.0).abs() > TRACE_DRIFT_TOL {
        return Err(DynamicsError::InvariantViolated {
            invariant: "trace",
            time: t,
            value: tr - 1.0,
        });
    }
    let herm = linalg::hermiticity_deviation(rho);
    if herm > HERM_DRIFT_TOL {
        return Err(DynamicsError::InvariantViolated {
            invariant: "Hermiticity",
            time: t,
            value: herm,
        });
    }
    // Fast shifted-Cholesky positivity check; on failure confirm with the
    // exact spectrum before reporting a violation.
    if !linalg::is_psd_within(rho, MIN_EIG_TOL) {
        let (w, _) = linalg::eig_hermitian(rho)?;
        if w[0] < -MIN_EIG_TOL {
            return Err(DynamicsError::InvariantViolated {
                invariant: "positivity",
                time: t,
                value: w[0],
            });
        }
    }
    let mut top = 0.0;
    for b in 0..db {
        let i = b * dc + dc - 1;
        top += rho[(i, i)].re;
    }
    if top > LEAKAGE_TOL {
        return Err(DynamicsError::InvariantViolated {
            invariant: "top Fock level occupancy",
            time: t,
            value: top,
        });
    }
    let mut mean_photon = 0.0;
    for i in 0..d {
        mean_photon += (i % dc) as f64 * rho[(i, i)].re;
    }
    let mut total_energy = C64::new(0.0, 0.0);
    for &(r, c, v) in &sys.coo {
        total_energy += v * rho[(c, r)];
    }
    let mut rho_b = Array2::zeros((db, db));
    for b in 0..db {
        for b2 in 0..db {
            let mut z = C64::new(0.0, 0.0);
            for n in 0..dc {
                z += rho[(b * dc + n, b2 * dc + n)];
            }
            rho_b[(b, b2)] = z;
        }
    }
    record_from_marginal(t, rho_b, &sys.battery, mean_photon, total_energy.re, config.n_atoms)
}
