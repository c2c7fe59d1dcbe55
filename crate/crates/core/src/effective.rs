//! Effective qubit Hamiltonian obtained by eliminating the pumped cavity.
//!
//! All quantities are in units where `hbar = 1` and frequencies are measured
//! in units of the cavity decay rate `kappa`.
//!
//! `H_eff = delta_a S_z - h S_x - (lambda / N) (S_y^2 + S_z^2)` with
//! `h = -2 g0 eta0 kappa / (kappa^2 + delta_c^2)` and
//! `lambda = g0^2 delta_c / (kappa^2 + delta_c^2)`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spin::{
    build_spin_operators, c, Axis, CMatrix, CVector, CollectiveOperator, DickeVector, SpinSector,
};

/// Physical cavity-QED inputs. Rates in units of `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalParams {
    /// Collective coupling; the single-qubit coupling is `g0 / sqrt(N)`.
    pub g0: f64,
    /// Pump amplitude per `sqrt(N)`; the cavity pump is `eta0 sqrt(N)`.
    pub eta0: f64,
    pub kappa: f64,
    /// Cavity-pump detuning.
    pub delta_c: f64,
    /// Qubit-pump detuning.
    pub delta_a: f64,
    pub n_qubits: usize,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("g0", self.g0),
            ("eta0", self.eta0),
            ("kappa", self.kappa),
            ("delta_c", self.delta_c),
            ("delta_a", self.delta_a),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be finite")));
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidArgument("kappa must be positive".into()));
        }
        if self.n_qubits == 0 {
            return Err(Error::InvalidArgument("n_qubits must be at least 1".into()));
        }
        Ok(())
    }

    /// `|kappa + i delta_c|`.
    pub fn cavity_detuning_norm(&self) -> f64 {
        self.kappa.hypot(self.delta_c)
    }

    /// Advisory check `|kappa + i delta_c| >= 10 g0`.
    pub fn is_dispersive(&self) -> bool {
        self.cavity_detuning_norm() >= 10.0 * self.g0.abs()
    }

    /// Single-qubit coupling `g = g0 / sqrt(N)`.
    pub fn coupling(&self) -> f64 {
        self.g0 / (self.n_qubits as f64).sqrt()
    }

    /// Cavity pump `eta = eta0 sqrt(N)`.
    pub fn pump(&self) -> f64 {
        self.eta0 * (self.n_qubits as f64).sqrt()
    }

    fn lorentz_denominator(&self) -> f64 {
        self.kappa * self.kappa + self.delta_c * self.delta_c
    }
}

/// Pump amplitude `eta0` that produces the effective drive `h`.
pub fn eta0_for_drive(h: f64, g0: f64, kappa: f64, delta_c: f64) -> Result<f64> {
    if g0 == 0.0 || kappa <= 0.0 {
        return Err(Error::InvalidArgument(
            "drive cannot be set through the pump when g0 = 0 or kappa <= 0".into(),
        ));
    }
    Ok(-h * (kappa * kappa + delta_c * delta_c) / (2.0 * g0 * kappa))
}

/// Drive, coupling and detuning of the effective Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveParams {
    pub h: f64,
    pub lambda: f64,
    pub delta_a: f64,
}

pub fn effective_params(p: &PhysicalParams) -> Result<EffectiveParams> {
    p.validate()?;
    if !p.is_dispersive() {
        log::warn!(
            "|kappa + i delta_c| = {:.3} is below 10 g0 = {:.3}; adiabatic elimination is questionable",
            p.cavity_detuning_norm(),
            10.0 * p.g0
        );
    }
    let denom = p.lorentz_denominator();
    Ok(EffectiveParams {
        h: -2.0 * p.g0 * p.eta0 * p.kappa / denom,
        lambda: p.g0 * p.g0 * p.delta_c / denom,
        delta_a: p.delta_a,
    })
}

/// Real symmetric pentadiagonal z-basis matrix of `H_eff`.
pub fn effective_hamiltonian_matrix(eff: &EffectiveParams, sector: SpinSector) -> DMatrix<f64> {
    let d = sector.dim();
    let n = sector.n_qubits() as f64;
    let s = sector.total_spin();
    let casimir = s * (s + 1.0);
    let ladder = |m: f64| (casimir - m * (m + 1.0)).max(0.0).sqrt();
    let coupling = eff.lambda / n;

    let mut h = DMatrix::zeros(d, d);
    for k in 0..d {
        let m = sector.m(k);
        // S_y^2 + S_z^2 = (S^2 + S_z^2)/2 - (S_+^2 + S_-^2)/4
        h[(k, k)] = eff.delta_a * m - coupling * 0.5 * (casimir + m * m);
        if k + 1 < d {
            let v = -eff.h * 0.5 * ladder(m);
            h[(k + 1, k)] = v;
            h[(k, k + 1)] = v;
        }
        if k + 2 < d {
            let v = coupling * 0.25 * ladder(m) * ladder(m + 1.0);
            h[(k + 2, k)] = v;
            h[(k, k + 2)] = v;
        }
    }
    h
}

pub fn build_effective_hamiltonian(
    eff: &EffectiveParams,
    sector: SpinSector,
) -> CollectiveOperator {
    CollectiveOperator::from_real(sector, &effective_hamiltonian_matrix(eff, sector), Axis::Z)
        .expect("dimension is fixed by the sector")
}

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub energy: f64,
    pub energy_per_qubit: f64,
    /// Ground state, in the Hamiltonian's quantization basis.
    pub state: DickeVector,
    /// `<S_x> / N`, within `[-1/2, 1/2]`.
    pub s_x: f64,
    /// `<S_x^2> / N^2`.
    pub s_x2: f64,
}

impl GroundStateResult {
    /// `<S_x^2>` without the `1/N^2` normalization.
    pub fn sx_squared(&self) -> f64 {
        let n = self.state.sector().n_qubits() as f64;
        self.s_x2 * n * n
    }
}

/// `S_x` expressed along `axis`.
fn sx_in_basis(sector: SpinSector, axis: Axis) -> CMatrix {
    match axis {
        Axis::Z => build_spin_operators(sector).sx.into_matrix(),
        Axis::X => CMatrix::from_diagonal(&CVector::from_iterator(
            sector.dim(),
            (0..sector.dim()).map(|k| c(sector.m(k))),
        )),
    }
}

/// Fixes the global phase so the largest component is real and positive.
fn fix_phase(v: &mut CVector) {
    let pivot = v
        .iter()
        .enumerate()
        .fold((0, 0.0), |best, (i, z)| {
            if z.norm() > best.1 + 1e-12 {
                (i, z.norm())
            } else {
                best
            }
        })
        .0;
    let z = v[pivot];
    if z.norm() > 0.0 {
        let phase = z.conj() / z.norm();
        for a in v.iter_mut() {
            *a *= phase;
        }
    }
}

/// Lowest eigenpair by full dense diagonalization.
pub fn ground_state(hamiltonian: &CollectiveOperator) -> Result<GroundStateResult> {
    let sector = hamiltonian.sector();
    let h = hamiltonian.matrix();
    let scale = h.norm().max(f64::MIN_POSITIVE);
    if !hamiltonian.is_hermitian(1e-12 * scale) {
        return Err(Error::InvalidArgument(
            "Hamiltonian is not Hermitian".into(),
        ));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonConvergence(
            "Hamiltonian has non-finite entries".into(),
        ));
    }

    let (energy, mut vector) = match hamiltonian.to_real(0.0) {
        Some(real) => {
            let eig = SymmetricEigen::new(real);
            let k = argmin(eig.eigenvalues.iter().copied());
            (eig.eigenvalues[k], eig.eigenvectors.column(k).map(c))
        }
        None => {
            let eig = SymmetricEigen::new(h.clone());
            let k = argmin(eig.eigenvalues.iter().copied());
            (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned())
        }
    };
    let norm = vector.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::NonConvergence(
            "eigensolver returned a null vector".into(),
        ));
    }
    vector.unscale_mut(norm);
    fix_phase(&mut vector);

    let residual = (h * &vector - &vector * c(energy)).norm();
    if residual > 1e-9 * scale {
        return Err(Error::NonConvergence(format!(
            "ground-state residual {residual:.3e} exceeds 1e-9 * ||H|| = {:.3e}",
            1e-9 * scale
        )));
    }

    let n = sector.n_qubits() as f64;
    let sx = sx_in_basis(sector, hamiltonian.axis());
    let sx_psi = &sx * &vector;
    let sx_mean = vector.dotc(&sx_psi).re;
    let sx2_mean = sx_psi.norm_squared();
    let state = DickeVector::normalized(sector, vector, hamiltonian.axis())?;
    Ok(GroundStateResult {
        energy,
        energy_per_qubit: energy / n,
        state,
        s_x: sx_mean / n,
        s_x2: sx2_mean / (n * n),
    })
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    values
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |best, (i, v)| if v < best.1 { (i, v) } else { best },
        )
        .0
}

/// Ground state of the isotropic model (`delta_a = 0`) from the closed-form
/// spectrum `E(S, M)/N = -h M / N - lambda (S(S+1) - M^2) / N^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsotropicGround {
    /// `2 M0`.
    pub twice_m0: i64,
    pub energy_per_qubit: f64,
}

impl IsotropicGround {
    pub fn m0(&self) -> f64 {
        self.twice_m0 as f64 / 2.0
    }
}

/// `E(S, M) / N` in the maximum-spin sector.
pub fn isotropic_energy_per_qubit(h: f64, lambda: f64, sector: SpinSector, twice_m: i64) -> f64 {
    let n = sector.n_qubits() as f64;
    let s = sector.total_spin();
    let m = twice_m as f64 / 2.0;
    -h * m / n - lambda * (s * (s + 1.0) - m * m) / (n * n)
}

/// Exact enumeration over all `M`; ties go to larger `|M|`, then positive `M`.
pub fn analytic_isotropic_ground(
    h: f64,
    lambda: f64,
    sector: SpinSector,
) -> Result<IsotropicGround> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "isotropic closed form needs lambda > 0, got {lambda}"
        )));
    }
    if !h.is_finite() {
        return Err(Error::InvalidArgument("h must be finite".into()));
    }
    let scale = (h.abs() + lambda) * sector.total_spin().max(1.0);
    let tie_tol = 1e-13 * scale / sector.n_qubits() as f64;
    let mut best: Option<(i64, f64)> = None;
    for twice_m in sector.twice_m_values() {
        let e = isotropic_energy_per_qubit(h, lambda, sector, twice_m);
        best = match best {
            None => Some((twice_m, e)),
            Some((bm, be)) => {
                let better = if (e - be).abs() <= tie_tol {
                    (twice_m.abs(), twice_m) > (bm.abs(), bm)
                } else {
                    e < be
                };
                Some(if better { (twice_m, e) } else { (bm, be) })
            }
        };
    }
    let (twice_m0, _) = best.expect("sector is never empty");
    Ok(IsotropicGround {
        twice_m0,
        energy_per_qubit: isotropic_energy_per_qubit(h, lambda, sector, twice_m0),
    })
}

/// Closed-form `2 M0`: the allowed `M` nearest to `hN / (2 lambda)`, clamped
/// to `[-S, S]`. Halfway cases round away from zero, matching the tie-break of
/// [`analytic_isotropic_ground`].
pub fn closed_form_twice_m0(h: f64, lambda: f64, sector: SpinSector) -> i64 {
    let n = sector.twice_spin();
    let x = h * n as f64 / (2.0 * lambda);
    let twice = if n % 2 == 0 {
        2.0 * x.round()
    } else if x >= 0.0 {
        2.0 * x.floor() + 1.0
    } else {
        2.0 * x.ceil() - 1.0
    };
    (twice.clamp(-(n as f64), n as f64)) as i64
}

/// Steady-state intracavity photon number for a given `<S_x^2>`.
pub fn photon_number_ss(p: &PhysicalParams, sx_squared: f64) -> Result<f64> {
    p.validate()?;
    if !(sx_squared >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "<S_x^2> must be non-negative, got {sx_squared}"
        )));
    }
    let n = p.n_qubits as f64;
    let denom = p.lorentz_denominator();
    Ok(p.eta0 * p.eta0 * n / denom + p.g0 * p.g0 * sx_squared / (n * denom))
}

/// Largest difference between the sorted spectra of `H_eff` (at
/// `delta_a = 0`) and its cyclically relabeled form
/// `-h S_y - (lambda/N)(S_z^2 + S_x^2)`.
pub fn verify_lmg_equivalence(eff: &EffectiveParams, sector: SpinSector) -> Result<f64> {
    if eff.delta_a != 0.0 {
        return Err(Error::InvalidArgument(
            "unitary equivalence with the isotropic model needs delta_a = 0".into(),
        ));
    }
    let ops = build_spin_operators(sector);
    let n = sector.n_qubits() as f64;
    let original = build_effective_hamiltonian(eff, sector);
    let sx = ops.sx.matrix();
    let sz = ops.sz.matrix();
    let relabeled: CMatrix = ops.sy.matrix() * c(-eff.h) - (sz * sz + sx * sx) * c(eff.lambda / n);

    let spectrum = |m: CMatrix| {
        let mut e: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    };
    let a = spectrum(original.into_matrix());
    let b = spectrum(relabeled);
    Ok(a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}
