//! Dense Lindblad superoperators for the driven cavity + qubits model and
//! for the qubit-only collective master equation.
//!
//! Density matrices are vectorized column-major, `vec(A rho B) = (B^T (x) A) vec(rho)`.
//! Joint states order the basis as `n * (N + 1) + spin_index` (Fock outer).

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::Serialize;

use crate::effective::{effective_hamiltonian_matrix, EffectiveParams, PhysicalParams};
use crate::error::{Error, Result};
use crate::spin::{build_spin_operators, c, Axis, CMatrix, CVector, DickeVector, SpinSector};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-8;
pub const CUTOFF_POPULATION_TOL: f64 = 1e-6;
pub const TRACE_DRIFT_TOL: f64 = 1e-8;
pub const EVOLUTION_PSD_TOL: f64 = 1e-7;
pub const MAX_FOCK_CUTOFF: usize = 64;
const STATIONARY_CHANGE_TOL: f64 = 1e-12;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn hermiticity_error(rho: &CMatrix) -> f64 {
    (rho - rho.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn hermitize(rho: &CMatrix) -> CMatrix {
    (rho + rho.adjoint()) * c(0.5)
}

fn min_eigenvalue(rho: &CMatrix) -> f64 {
    SymmetricEigen::new(hermitize(rho)).eigenvalues.min()
}

fn check_density(rho: &CMatrix, expected_dim: usize) -> Result<()> {
    if rho.nrows() != expected_dim || rho.ncols() != expected_dim {
        return Err(Error::DimensionMismatch {
            expected: expected_dim,
            found: rho.nrows(),
        });
    }
    let herm = hermiticity_error(rho);
    if herm > HERMITIAN_TOL {
        return Err(Error::InvariantViolation(format!(
            "density matrix not Hermitian ({herm:.3e})"
        )));
    }
    let tr = rho.trace();
    if (tr - c(1.0)).norm() > TRACE_TOL {
        return Err(Error::InvariantViolation(format!(
            "density matrix trace is {tr}"
        )));
    }
    let min = min_eigenvalue(rho);
    if min < -PSD_TOL {
        return Err(Error::InvariantViolation(format!(
            "density matrix eigenvalue {min:.3e} < 0"
        )));
    }
    Ok(())
}

/// Trace distance `||a - b||_1 / 2` of two Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    0.5 * SymmetricEigen::new(hermitize(&(a - b)))
        .eigenvalues
        .iter()
        .map(|v| v.abs())
        .sum::<f64>()
}

pub fn purity(rho: &CMatrix) -> f64 {
    (rho * rho).trace().re
}

fn expect(op: &CMatrix, rho: &CMatrix) -> Complex64 {
    (op * rho).trace()
}

/// Annihilation operator truncated to `0..=cutoff` photons.
pub fn annihilation(cutoff: usize) -> CMatrix {
    let mut a = CMatrix::zeros(cutoff + 1, cutoff + 1);
    for n in 1..=cutoff {
        a[(n - 1, n)] = c((n as f64).sqrt());
    }
    a
}

/// Truncated coherent state, renormalized after truncation.
pub fn coherent_state(alpha: Complex64, cutoff: usize) -> CVector {
    let mut v = CVector::zeros(cutoff + 1);
    let mut amp = c((-0.5 * alpha.norm_sqr()).exp());
    for n in 0..=cutoff {
        if n > 0 {
            amp *= alpha / (n as f64).sqrt();
        }
        v[n] = amp;
    }
    let norm = v.norm();
    v / c(norm)
}

fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// A Lindblad generator acting on vectorized `dim x dim` density matrices.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    matrix: CMatrix,
}

impl Liouvillian {
    /// `-i[H, .] + sum_k r_k (2 L rho L^dag - L^dag L rho - rho L^dag L)`.
    pub fn from_lindblad(hamiltonian: &CMatrix, jumps: &[(f64, CMatrix)]) -> Result<Self> {
        let d = hamiltonian.nrows();
        if hamiltonian.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: hamiltonian.ncols(),
            });
        }
        let id = identity(d);
        let mut m = (id.kronecker(hamiltonian) - hamiltonian.transpose().kronecker(&id)) * (-I);
        for (rate, op) in jumps {
            if op.nrows() != d || op.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: op.nrows(),
                });
            }
            if *rate == 0.0 {
                continue;
            }
            let ldl = op.adjoint() * op;
            m += (op.conjugate().kronecker(op) * c(2.0)
                - id.kronecker(&ldl)
                - ldl.transpose().kronecker(&id))
                * c(*rate);
        }
        Ok(Self { dim: d, matrix: m })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            matrix: CMatrix::zeros(dim * dim, dim * dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        unvec(&(&self.matrix * vec(rho)), self.dim)
    }

    /// `max_j |sum_i L[(i,i), j]|`: vanishes iff the map is trace preserving.
    pub fn trace_annihilation_error(&self) -> f64 {
        let d = self.dim;
        (0..d * d)
            .map(|col| {
                (0..d)
                    .map(|i| self.matrix[(i * d + i, col)])
                    .sum::<Complex64>()
                    .norm()
            })
            .fold(0.0, f64::max)
    }

    /// Taylor propagator of order four, identical to one classical
    /// Runge-Kutta step of a linear equation.
    fn rk4_propagator(&self, dt: f64) -> CMatrix {
        let n = self.matrix.nrows();
        let ldt = &self.matrix * c(dt);
        let mut term = CMatrix::identity(n, n);
        let mut p = term.clone();
        for k in 1..=4 {
            term = &term * &ldt / c(k as f64);
            p += &term;
        }
        p
    }
}

fn vec(rho: &CMatrix) -> CVector {
    CVector::from_column_slice(rho.as_slice())
}

fn unvec(v: &CVector, d: usize) -> CMatrix {
    CMatrix::from_column_slice(d, d, v.as_slice())
}

fn matrix_power(m: &CMatrix, mut k: usize) -> CMatrix {
    let n = m.nrows();
    let mut result = CMatrix::identity(n, n);
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

// ---------------------------------------------------------------------------
// Models

/// Driven cavity coupled to `N` qubits, with cavity decay `kappa`.
pub fn build_driven_dicke_liouvillian(
    p: &PhysicalParams,
    sector: SpinSector,
    fock_cutoff: usize,
) -> Result<Liouvillian> {
    p.validate()?;
    if sector.n_qubits() != p.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: p.n_qubits,
            found: sector.n_qubits(),
        });
    }
    if fock_cutoff == 0 {
        return Err(Error::InvalidArgument(
            "Fock cutoff must be at least 1".into(),
        ));
    }
    let ops = build_spin_operators(sector);
    let a = annihilation(fock_cutoff);
    let ad = a.adjoint();
    let id_f = identity(fock_cutoff + 1);
    let id_s = identity(sector.dim());

    let h_cav = &ad * &a * c(p.delta_c) - (&a - &ad) * (I * p.pump());
    let h = h_cav.kronecker(&id_s)
        + id_f.kronecker(&(ops.sz.matrix() * c(p.delta_a)))
        + (&a + &ad).kronecker(ops.sx.matrix()) * c(p.coupling());
    let jump = a.kronecker(&id_s);
    Liouvillian::from_lindblad(&h, &[(p.kappa, jump)])
}

/// Damped, driven single cavity mode: `H = delta_c a^dag a - i pump (a - a^dag)`.
pub fn build_cavity_liouvillian(
    kappa: f64,
    delta_c: f64,
    pump: f64,
    fock_cutoff: usize,
) -> Result<Liouvillian> {
    if !(kappa >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "kappa must be >= 0, got {kappa}"
        )));
    }
    let a = annihilation(fock_cutoff);
    let ad = a.adjoint();
    let h = &ad * &a * c(delta_c) - (&a - &ad) * (I * pump);
    Liouvillian::from_lindblad(&h, &[(kappa, a)])
}

/// Qubit-only collective master equation in the z basis:
/// `H_eff` plus `(gamma/N) D[S_+]` and `(gamma'/N) D[S_x]`.
pub fn build_qubit_liouvillian(
    eff: &EffectiveParams,
    gamma: f64,
    gamma_prime: f64,
    sector: SpinSector,
) -> Result<Liouvillian> {
    if !(gamma >= 0.0 && gamma_prime >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rates must be >= 0 (gamma={gamma}, gamma'={gamma_prime})"
        )));
    }
    let n = sector.n_qubits() as f64;
    let ops = build_spin_operators(sector);
    let h = effective_hamiltonian_matrix(eff, sector).map(c);
    Liouvillian::from_lindblad(
        &h,
        &[
            (gamma / n, ops.s_plus.into_matrix()),
            (gamma_prime / n, ops.sx.into_matrix()),
        ],
    )
}

/// Cavity amplitude slaved to the qubits:
/// `(eta0 sqrt(N) - i g0 <S_x> / sqrt(N)) / (kappa + i delta_c)`.
pub fn adiabatic_cavity_prediction(p: &PhysicalParams, sx_expect: f64) -> Complex64 {
    let sqrt_n = (p.n_qubits as f64).sqrt();
    Complex64::new(p.eta0 * sqrt_n, -p.g0 * sx_expect / sqrt_n) / Complex64::new(p.kappa, p.delta_c)
}

/// `ceil(4 (|a_ss|^2 + 1))`, with `|a_ss|` maximized over `<S_x>`.
pub fn initial_fock_cutoff(p: &PhysicalParams) -> usize {
    let s = p.n_qubits as f64 / 2.0;
    let amp = adiabatic_cavity_prediction(p, s)
        .norm()
        .max(adiabatic_cavity_prediction(p, -s).norm());
    (4.0 * (amp * amp + 1.0)).ceil() as usize
}

// ---------------------------------------------------------------------------
// States

#[derive(Debug, Clone)]
pub struct JointState {
    fock_cutoff: usize,
    sector: SpinSector,
    rho: CMatrix,
}

impl JointState {
    pub fn new(fock_cutoff: usize, sector: SpinSector, rho: CMatrix) -> Result<Self> {
        check_density(&rho, (fock_cutoff + 1) * sector.dim())?;
        let s = Self {
            fock_cutoff,
            sector,
            rho,
        };
        let top = s.top_fock_population();
        if top >= CUTOFF_POPULATION_TOL {
            return Err(Error::CutoffInadequate {
                cutoff: fock_cutoff,
                population: top,
            });
        }
        Ok(s)
    }

    /// `|psi_cavity> (x) |psi_spin>` with the spin vector in the z basis.
    pub fn product(cavity: &CVector, spin: &DickeVector) -> Result<Self> {
        if spin.axis() != Axis::Z {
            return Err(Error::BasisMismatch {
                op: Axis::Z,
                state: spin.axis(),
            });
        }
        let psi = cavity.kronecker(spin.amplitudes());
        let rho = &psi * psi.adjoint();
        Self::new(cavity.len() - 1, spin.sector(), rho)
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }

    pub fn sector(&self) -> SpinSector {
        self.sector
    }

    pub fn field_amplitude(&self) -> Complex64 {
        field_amplitude(&self.rho, self.fock_cutoff, self.sector)
    }

    pub fn photon_number(&self) -> f64 {
        let a = annihilation(self.fock_cutoff);
        let n = (a.adjoint() * a).kronecker(&identity(self.sector.dim()));
        expect(&n, &self.rho).re
    }

    pub fn top_fock_population(&self) -> f64 {
        top_fock_population(&self.rho, self.fock_cutoff, self.sector)
    }

    pub fn sx(&self) -> f64 {
        joint_sx(&self.rho, self.fock_cutoff, self.sector)
    }
}

fn field_amplitude(rho: &CMatrix, cutoff: usize, sector: SpinSector) -> Complex64 {
    expect(
        &annihilation(cutoff).kronecker(&identity(sector.dim())),
        rho,
    )
}

fn joint_sx(rho: &CMatrix, cutoff: usize, sector: SpinSector) -> f64 {
    let sx = build_spin_operators(sector).sx.into_matrix();
    expect(&identity(cutoff + 1).kronecker(&sx), rho).re
}

fn top_fock_population(rho: &CMatrix, cutoff: usize, sector: SpinSector) -> f64 {
    let d = sector.dim();
    (0..d)
        .map(|s| rho[(cutoff * d + s, cutoff * d + s)].re)
        .sum()
}

#[derive(Debug, Clone)]
pub struct QubitState {
    sector: SpinSector,
    rho: CMatrix,
}

impl QubitState {
    pub fn new(sector: SpinSector, rho: CMatrix) -> Result<Self> {
        check_density(&rho, sector.dim())?;
        Ok(Self { sector, rho })
    }

    pub fn pure(psi: &DickeVector) -> Result<Self> {
        if psi.axis() != Axis::Z {
            return Err(Error::BasisMismatch {
                op: Axis::Z,
                state: psi.axis(),
            });
        }
        let v = psi.amplitudes();
        Self::new(psi.sector(), v * v.adjoint())
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn sector(&self) -> SpinSector {
        self.sector
    }

    /// `2 <S> / N`, comparable with mean-field Bloch vectors.
    pub fn bloch(&self) -> [f64; 3] {
        let ops = build_spin_operators(self.sector);
        let scale = 2.0 / self.sector.n_qubits() as f64;
        [ops.sx.matrix(), ops.sy.matrix(), ops.sz.matrix()]
            .map(|op| scale * expect(op, &self.rho).re)
    }

    pub fn s_squared(&self) -> f64 {
        expect(
            build_spin_operators(self.sector).s_squared.matrix(),
            &self.rho,
        )
        .re
    }
}

// ---------------------------------------------------------------------------
// Propagation

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub t_final: f64,
    pub dt: f64,
    /// Time between recorded samples; rounded to a whole number of steps.
    pub sample_interval: f64,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
    pub max_hermiticity_deviation: f64,
    pub max_trace_drift: f64,
    pub min_eigenvalue: f64,
}

/// Fixed-step fourth-order propagation of `d rho/dt = L[rho]`.
///
/// The one-step propagator is raised to the number of steps per sample, so
/// the result equals stepping with `dt` throughout. Each sample is made
/// Hermitian again; the removed deviation is tracked.
pub fn evolve(l: &Liouvillian, rho0: &CMatrix, opts: &EvolveOptions) -> Result<Evolution> {
    check_density(rho0, l.dim)?;
    if !(opts.dt > 0.0 && opts.sample_interval >= opts.dt && opts.t_final >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < dt <= sample_interval and t_final >= 0 (dt={}, sample={}, t={})",
            opts.dt, opts.sample_interval, opts.t_final
        )));
    }
    let steps_per_sample = (opts.sample_interval / opts.dt).round().max(1.0) as usize;
    let dt = opts.sample_interval / steps_per_sample as f64;
    let samples = (opts.t_final / opts.sample_interval).round() as usize;
    let propagator = matrix_power(&l.rk4_propagator(dt), steps_per_sample);

    let mut out = Evolution {
        times: vec![0.0],
        states: vec![rho0.clone()],
        max_hermiticity_deviation: 0.0,
        max_trace_drift: 0.0,
        min_eigenvalue: min_eigenvalue(rho0),
    };
    let mut v = vec(rho0);
    for k in 1..=samples {
        v = &propagator * v;
        let raw = unvec(&v, l.dim);
        let herm = hermiticity_error(&raw);
        let rho = hermitize(&raw);
        let drift = (rho.trace() - c(1.0)).norm();
        let min = min_eigenvalue(&rho);
        if !drift.is_finite() || drift > TRACE_DRIFT_TOL || min < -EVOLUTION_PSD_TOL {
            return Err(Error::NonConvergence(format!(
                "propagation unstable at t={:.6}: trace drift {drift:.3e}, min eigenvalue {min:.3e} (dt={dt:.3e})",
                k as f64 * opts.sample_interval
            )));
        }
        if herm > 0.0 {
            log::trace!(
                "t={:.6}: removed Hermiticity deviation {herm:.3e}",
                k as f64 * opts.sample_interval
            );
        }
        out.max_hermiticity_deviation = out.max_hermiticity_deviation.max(herm);
        out.max_trace_drift = out.max_trace_drift.max(drift);
        out.min_eigenvalue = out.min_eigenvalue.min(min);
        v = vec(&rho);
        out.times.push(k as f64 * opts.sample_interval);
        out.states.push(rho);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Steady states

#[derive(Debug, Clone, Copy)]
pub struct SteadyStateOptions {
    /// Singular values below `null_tol * sigma_max` count as null directions.
    pub null_tol: f64,
    pub residual_tol: f64,
    pub agreement_tol: f64,
    /// Base step and interval of the evolution cross-check.
    pub dt: f64,
    pub base_interval: f64,
    pub max_doublings: usize,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            null_tol: 1e-11,
            residual_tol: 1e-9,
            agreement_tol: 1e-7,
            dt: 1e-3,
            base_interval: 1.0,
            max_doublings: 48,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: CMatrix,
    pub residual: f64,
    /// Time reached by the evolution cross-check.
    pub evolution_time: f64,
    pub trace_distance_to_evolved: f64,
}

fn null_space_dimension(l: &Liouvillian, tol: f64) -> usize {
    let sv = l.matrix.clone().singular_values();
    let max = sv.max();
    sv.iter().filter(|&&s| s <= tol * max).count()
}

fn null_space_state(l: &Liouvillian) -> Result<CMatrix> {
    let d = l.dim;
    let mut m = l.matrix.clone();
    for col in 0..d * d {
        m[(0, col)] = c(0.0);
    }
    for i in 0..d {
        m[(0, i * d + i)] = c(1.0);
    }
    let mut rhs = CVector::zeros(d * d);
    rhs[0] = c(1.0);
    let v = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NonConvergence("steady-state linear system is singular".into()))?;
    let rho = hermitize(&unvec(&v, d));
    let tr = rho.trace();
    Ok(rho / tr)
}

fn residual(l: &Liouvillian, rho: &CMatrix) -> f64 {
    (&l.matrix * vec(rho)).norm()
}

/// Long-time evolution by repeated squaring of the interval propagator,
/// stopping once `||L[rho]|| < residual_tol` and successive iterates agree.
pub fn steady_state_by_evolution(
    l: &Liouvillian,
    rho0: &CMatrix,
    opts: &SteadyStateOptions,
) -> Result<(CMatrix, f64)> {
    check_density(rho0, l.dim)?;
    let steps = (opts.base_interval / opts.dt).round().max(1.0) as usize;
    let mut p = matrix_power(&l.rk4_propagator(opts.base_interval / steps as f64), steps);
    let mut interval = opts.base_interval;
    let mut time = 0.0;
    let mut v = vec(rho0);
    let mut previous = rho0.clone();
    for _ in 0..=opts.max_doublings {
        v = &p * v;
        time += interval;
        let rho = hermitize(&unvec(&v, l.dim));
        let rho = &rho / rho.trace();
        // a small residual alone is not enough when the slowest mode is slow
        let change = (&rho - &previous).norm();
        if residual(l, &rho) < opts.residual_tol && change < STATIONARY_CHANGE_TOL {
            return Ok((rho, time));
        }
        v = vec(&rho);
        previous = rho;
        p = &p * &p;
        interval *= 2.0;
    }
    Err(Error::NonConvergence(format!(
        "no stationary state reached by t={time:.3e} (residual {:.3e})",
        residual(l, &unvec(&v, l.dim))
    )))
}

/// Unique stationary state, from the null space of `L` and confirmed by
/// long-time evolution from the maximally mixed state.
pub fn steady_state(l: &Liouvillian, opts: &SteadyStateOptions) -> Result<SteadyState> {
    let dim = null_space_dimension(l, opts.null_tol);
    if dim != 1 {
        return Err(Error::DegenerateNullSpace { dim });
    }
    let rho = null_space_state(l)?;
    let res = residual(l, &rho);
    let mixed = identity(l.dim) / c(l.dim as f64);
    let (evolved, time) = steady_state_by_evolution(l, &mixed, opts)?;
    let distance = trace_distance(&rho, &evolved);
    if distance > opts.agreement_tol {
        return Err(Error::NonConvergence(format!(
            "null-space and evolved steady states differ by {distance:.3e} in trace distance"
        )));
    }
    Ok(SteadyState {
        rho,
        residual: res,
        evolution_time: time,
        trace_distance_to_evolved: distance,
    })
}

// ---------------------------------------------------------------------------
// Adiabatic elimination check

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AdiabaticOptions {
    pub dt: f64,
    pub sample_interval: f64,
    /// Comparison window `[t_start, t_final]` in units of 1/kappa.
    pub t_start: f64,
    pub t_final: f64,
}

impl Default for AdiabaticOptions {
    fn default() -> Self {
        Self {
            dt: 1e-5,
            sample_interval: 0.01,
            t_start: 5.0,
            t_final: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdiabaticSample {
    pub t: f64,
    pub field: Complex64,
    pub prediction: Complex64,
    pub sx: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdiabaticReport {
    pub fock_cutoff: usize,
    pub max_relative_error: f64,
    pub mean_relative_error: f64,
    pub max_top_fock_population: f64,
    pub samples: Vec<AdiabaticSample>,
}

/// Evolves the joint model from `|S,S>_x (x) |a_ss>` and compares the
/// simulated field with the slaved amplitude `a_ss(<S_x>(t))` once the
/// initial cavity transient has decayed. The Fock cutoff is doubled until
/// the top level stays below the population tolerance.
pub fn validate_adiabatic(p: &PhysicalParams, opts: &AdiabaticOptions) -> Result<AdiabaticReport> {
    p.validate()?;
    if !(opts.t_start >= 0.0 && opts.t_final > opts.t_start) {
        return Err(Error::InvalidArgument("need 0 <= t_start < t_final".into()));
    }
    let sector = SpinSector::new(p.n_qubits)?;
    let spin_x = DickeVector::basis_state(sector, sector.twice_spin(), Axis::X)?;
    let spin = crate::spin::rotate_basis(&spin_x, Axis::X, Axis::Z)?;
    let alpha0 = adiabatic_cavity_prediction(p, sector.total_spin());

    let mut cutoff = initial_fock_cutoff(p);
    loop {
        if cutoff > MAX_FOCK_CUTOFF {
            return Err(Error::CutoffInadequate {
                cutoff,
                population: f64::NAN,
            });
        }
        let l = build_driven_dicke_liouvillian(p, sector, cutoff)?;
        let start = JointState::product(&coherent_state(alpha0, cutoff), &spin)?;
        let ev = evolve(
            &l,
            start.rho(),
            &EvolveOptions {
                t_final: opts.t_final,
                dt: opts.dt,
                sample_interval: opts.sample_interval,
            },
        )?;
        let top = ev
            .states
            .iter()
            .map(|rho| top_fock_population(rho, cutoff, sector))
            .fold(0.0, f64::max);
        if top >= CUTOFF_POPULATION_TOL {
            log::info!("Fock cutoff {cutoff} inadequate (top population {top:.3e}); doubling");
            cutoff *= 2;
            continue;
        }
        let samples: Vec<AdiabaticSample> = ev
            .times
            .iter()
            .zip(&ev.states)
            .filter(|(t, _)| **t >= opts.t_start - 1e-12)
            .map(|(&t, rho)| {
                let field = field_amplitude(rho, cutoff, sector);
                let sx = joint_sx(rho, cutoff, sector);
                let prediction = adiabatic_cavity_prediction(p, sx);
                AdiabaticSample {
                    t,
                    field,
                    prediction,
                    sx,
                    relative_error: (field - prediction).norm() / prediction.norm(),
                }
            })
            .collect();
        let max = samples.iter().map(|s| s.relative_error).fold(0.0, f64::max);
        let mean = samples.iter().map(|s| s.relative_error).sum::<f64>() / samples.len() as f64;
        return Ok(AdiabaticReport {
            fock_cutoff: cutoff,
            max_relative_error: max,
            mean_relative_error: mean,
            max_top_fock_population: top,
            samples,
        });
    }
}
