//! Pairwise entanglement of symmetric many-qubit states.
//!
//! Two-qubit matrices use the basis order `|ee>, |eg>, |ge>, |gg>`.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spin::{c, DickeVector, SpinSector};

pub type CMatrix4 = Matrix4<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const SWAP_TOL: f64 = 1e-12;

/// `sigma_y (x) sigma_y` in the `ee, eg, ge, gg` basis.
pub fn spin_flip() -> CMatrix4 {
    let mut y = CMatrix4::zeros();
    y[(0, 3)] = c(-1.0);
    y[(3, 0)] = c(-1.0);
    y[(1, 2)] = c(1.0);
    y[(2, 1)] = c(1.0);
    y
}

/// Reduced density matrix of two qubits taken from a symmetric state.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    matrix: CMatrix4,
}

impl TwoQubitState {
    /// Validates Hermiticity, unit trace, positivity and exchange symmetry.
    pub fn new(matrix: CMatrix4) -> Result<Self> {
        let herm = (matrix - matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if herm > HERMITIAN_TOL {
            return Err(Error::InvariantViolation(format!(
                "two-qubit matrix is not Hermitian (deviation {herm:.3e})"
            )));
        }
        let trace = matrix.trace();
        if (trace - c(1.0)).norm() > TRACE_TOL {
            return Err(Error::InvariantViolation(format!(
                "two-qubit trace is {trace}, not 1"
            )));
        }
        let mut swapped = matrix;
        swapped.swap_rows(1, 2);
        swapped.swap_columns(1, 2);
        let swap = (swapped - matrix)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if swap > SWAP_TOL {
            return Err(Error::InvariantViolation(format!(
                "two-qubit matrix is not exchange symmetric (deviation {swap:.3e})"
            )));
        }
        let min_eig = SymmetricEigen::new(matrix).eigenvalues.min();
        if min_eig < -PSD_TOL {
            return Err(Error::InvariantViolation(format!(
                "two-qubit matrix has negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &CMatrix4 {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> Vector4<f64> {
        SymmetricEigen::new(self.matrix).eigenvalues
    }
}

/// Weights `C(2,j) C(N-2,m) / C(N,m+j)` for `j = 0, 1, 2`, reduced to
/// rationals that never overflow.
fn split_weights(n: usize, m: usize) -> [f64; 3] {
    let (n, m) = (n as f64, m as f64);
    let denom = n * (n - 1.0);
    [
        (n - m) * (n - m - 1.0) / denom,
        2.0 * (m + 1.0) * (n - m - 1.0) / denom,
        (m + 1.0) * (m + 2.0) / denom,
    ]
}

/// Traces out all but two qubits of a symmetric pure state.
///
/// `|D_k^N> = sum_j sqrt(C(2,j) C(N-2,k-j) / C(N,k)) |D_j^2> |D_{k-j}^{N-2}>`
/// where `k = M + S` counts excitations.
pub fn reduced_two_qubit(psi: &DickeVector) -> Result<TwoQubitState> {
    let n = psi.sector().n_qubits();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "two-qubit reduction needs N >= 2, got {n}"
        )));
    }
    let amps = psi.amplitudes();
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut rho = CMatrix4::zeros();
    for m in 0..=n - 2 {
        let w = split_weights(n, m);
        let gg = amps[m] * w[0].sqrt();
        let d1 = amps[m + 1] * w[1].sqrt();
        let ee = amps[m + 2] * w[2].sqrt();
        let u = Vector4::new(ee, d1 * inv_sqrt2, d1 * inv_sqrt2, gg);
        rho += u * u.adjoint();
    }
    TwoQubitState::new(rho)
}

/// Wootters concurrence `max(0, mu1 - mu2 - mu3 - mu4)`.
///
/// The `mu_j` are the square roots of the eigenvalues of `rho Y rho* Y`. They
/// are obtained as the singular values of `W^T Y W` with `rho = W W^dag`,
/// which avoids taking square roots of round-off sized eigenvalues.
pub fn concurrence(rho: &TwoQubitState) -> f64 {
    let eig = SymmetricEigen::new(rho.matrix);
    let mut w = eig.eigenvectors;
    for (j, &p) in eig.eigenvalues.iter().enumerate() {
        let s = p.max(0.0).sqrt();
        for z in w.column_mut(j).iter_mut() {
            *z *= s;
        }
    }
    let tau = w.transpose() * spin_flip() * w;
    let mut mu: Vec<f64> = tau.singular_values().iter().copied().collect();
    mu.sort_by(|a, b| b.total_cmp(a));
    (mu[0] - mu[1] - mu[2] - mu[3]).clamp(0.0, 1.0)
}

/// Concurrence times `N - 1`, the normalization under which the closed form
/// of [`rescaled_concurrence_analytic`] holds.
pub fn rescale_concurrence(concurrence: f64, sector: SpinSector) -> f64 {
    (sector.n_qubits() as f64 - 1.0) * concurrence
}

/// Closed-form rescaled concurrence of `|S, M>`:
/// `(1/2N) {N^2 - 4M^2 - sqrt[(N^2 - 4M^2)((N-2)^2 - 4M^2)]}`.
pub fn rescaled_concurrence_analytic(sector: SpinSector, twice_m: i64) -> Result<f64> {
    sector.index_of(twice_m)?;
    let n = sector.n_qubits() as f64;
    let m2x4 = (twice_m * twice_m) as f64;
    let a = n * n - m2x4;
    let b = (n - 2.0) * (n - 2.0) - m2x4;
    Ok((a - (a * b).max(0.0).sqrt()) / (2.0 * n))
}
