//! Collective spin operators in the maximum-spin (Dicke) sector.
//!
//! Basis states are ordered by ascending magnetic quantum number, so index
//! `k` carries `M = k - S` and counts the number of excited qubits. Magnetic
//! quantum numbers are handled as the integer `2M` so that odd qubit numbers
//! stay exact.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const NORM_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// The symmetric sector of `N` qubits: total spin `S = N/2`, dimension `N + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SpinSector {
    n_qubits: usize,
}

impl SpinSector {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument(
                "sector needs at least one qubit".into(),
            ));
        }
        Ok(Self { n_qubits })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.n_qubits + 1
    }

    /// `2S`, which equals the qubit number.
    pub fn twice_spin(&self) -> i64 {
        self.n_qubits as i64
    }

    pub fn total_spin(&self) -> f64 {
        self.n_qubits as f64 / 2.0
    }

    /// `2M` of the basis state at `index`.
    pub fn twice_m(&self, index: usize) -> i64 {
        2 * index as i64 - self.twice_spin()
    }

    pub fn m(&self, index: usize) -> f64 {
        self.twice_m(index) as f64 / 2.0
    }

    /// Basis index of the state with magnetic number `twice_m / 2`.
    pub fn index_of(&self, twice_m: i64) -> Result<usize> {
        let n = self.twice_spin();
        if twice_m.abs() > n || (twice_m + n) % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "2M = {twice_m} is not an allowed magnetic number for N = {n}"
            )));
        }
        Ok(((twice_m + n) / 2) as usize)
    }

    /// All allowed `2M` values in ascending order.
    pub fn twice_m_values(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.dim()).map(move |k| self.twice_m(k))
    }
}

/// Quantization axis of a matrix or amplitude vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Z,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::X => f.write_str("x"),
            Axis::Z => f.write_str("z"),
        }
    }
}

/// A dense operator on the Dicke sector, tagged with its quantization axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveOperator {
    sector: SpinSector,
    matrix: CMatrix,
    axis: Axis,
}

impl CollectiveOperator {
    pub fn new(sector: SpinSector, matrix: CMatrix, axis: Axis) -> Result<Self> {
        if matrix.nrows() != sector.dim() || matrix.ncols() != sector.dim() {
            return Err(Error::DimensionMismatch {
                expected: sector.dim(),
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self {
            sector,
            matrix,
            axis,
        })
    }

    pub fn from_real(sector: SpinSector, matrix: &DMatrix<f64>, axis: Axis) -> Result<Self> {
        Self::new(sector, matrix.map(c), axis)
    }

    pub fn sector(&self) -> SpinSector {
        self.sector
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            sector: self.sector,
            matrix: self.matrix.adjoint(),
            axis: self.axis,
        }
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        max_abs_diff(&self.matrix, &self.matrix.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// The real part, if every imaginary part is below `tol`.
    pub fn to_real(&self, tol: f64) -> Option<DMatrix<f64>> {
        if self.matrix.iter().any(|z| z.im.abs() > tol) {
            return None;
        }
        Some(self.matrix.map(|z| z.re))
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.sector != other.sector {
            return Err(Error::DimensionMismatch {
                expected: self.sector.dim(),
                found: other.sector.dim(),
            });
        }
        if self.axis != other.axis {
            return Err(Error::BasisMismatch {
                op: self.axis,
                state: other.axis,
            });
        }
        Ok(())
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            sector: self.sector,
            matrix: &self.matrix * &other.matrix,
            axis: self.axis,
        })
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            sector: self.sector,
            matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix,
            axis: self.axis,
        })
    }

    pub fn linear_combination(terms: &[(Complex64, &CollectiveOperator)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty linear combination".into()))?;
        let mut matrix = CMatrix::zeros(first.sector.dim(), first.sector.dim());
        for (coef, op) in terms {
            first.check_compatible(op)?;
            matrix += &op.matrix * *coef;
        }
        Ok(Self {
            sector: first.sector,
            matrix,
            axis: first.axis,
        })
    }
}

pub(crate) fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// The six collective operators of one sector, all in the z basis.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub sx: CollectiveOperator,
    pub sy: CollectiveOperator,
    pub sz: CollectiveOperator,
    pub s_plus: CollectiveOperator,
    pub s_minus: CollectiveOperator,
    pub s_squared: CollectiveOperator,
}

/// Ladder-operator matrix elements: `S+|M> = sqrt(S(S+1) - M(M+1)) |M+1>`.
pub fn build_spin_operators(sector: SpinSector) -> SpinOperators {
    let d = sector.dim();
    let s = sector.total_spin();
    let mut sz = CMatrix::zeros(d, d);
    let mut sp = CMatrix::zeros(d, d);
    for k in 0..d {
        let m = sector.m(k);
        sz[(k, k)] = c(m);
        if k + 1 < d {
            sp[(k + 1, k)] = c((s * (s + 1.0) - m * (m + 1.0)).sqrt());
        }
    }
    let sm = sp.adjoint();
    let sx = (&sp + &sm) * c(0.5);
    let sy = (&sp - &sm) * Complex64::new(0.0, -0.5);
    let s2 = CMatrix::identity(d, d) * c(s * (s + 1.0));

    let wrap = |matrix: CMatrix| CollectiveOperator {
        sector,
        matrix,
        axis: Axis::Z,
    };
    SpinOperators {
        sx: wrap(sx),
        sy: wrap(sy),
        sz: wrap(sz),
        s_plus: wrap(sp),
        s_minus: wrap(sm),
        s_squared: wrap(s2),
    }
}

/// A normalized pure state of the Dicke sector.
#[derive(Debug, Clone, PartialEq)]
pub struct DickeVector {
    sector: SpinSector,
    amplitudes: CVector,
    axis: Axis,
}

impl DickeVector {
    /// Wraps amplitudes that must already have unit norm.
    pub fn new(sector: SpinSector, amplitudes: CVector, axis: Axis) -> Result<Self> {
        if amplitudes.len() != sector.dim() {
            return Err(Error::DimensionMismatch {
                expected: sector.dim(),
                found: amplitudes.len(),
            });
        }
        let norm_sq = amplitudes.norm_squared();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::InvariantViolation(format!(
                "state norm^2 = {norm_sq} is not 1"
            )));
        }
        Ok(Self {
            sector,
            amplitudes,
            axis,
        })
    }

    /// Normalizes `amplitudes` first; fails only on a zero vector or bad length.
    pub fn normalized(sector: SpinSector, amplitudes: CVector, axis: Axis) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument(
                "cannot normalize zero vector".into(),
            ));
        }
        Self::new(sector, amplitudes.unscale(norm), axis)
    }

    /// The basis state `|S, M>` along `axis`, with `M = twice_m / 2`.
    pub fn basis_state(sector: SpinSector, twice_m: i64, axis: Axis) -> Result<Self> {
        let k = sector.index_of(twice_m)?;
        let mut amplitudes = CVector::zeros(sector.dim());
        amplitudes[k] = c(1.0);
        Ok(Self {
            sector,
            amplitudes,
            axis,
        })
    }

    pub fn sector(&self) -> SpinSector {
        self.sector
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }
}

/// `<psi|op|psi>`.
pub fn expectation(op: &CollectiveOperator, psi: &DickeVector) -> Result<Complex64> {
    if op.sector != psi.sector {
        return Err(Error::DimensionMismatch {
            expected: op.sector.dim(),
            found: psi.sector.dim(),
        });
    }
    if op.axis != psi.axis {
        return Err(Error::BasisMismatch {
            op: op.axis,
            state: psi.axis,
        });
    }
    Ok(psi.amplitudes.dotc(&(&op.matrix * &psi.amplitudes)))
}

/// `exp(-i pi S_y / 2)` in the z basis. Column `k` holds `|S, M_k>_x`
/// expanded in z-basis states.
pub fn x_to_z_rotation(sector: SpinSector) -> CMatrix {
    let ops = build_spin_operators(sector);
    let eig = SymmetricEigen::new(ops.sy.matrix);
    let phases: Vec<Complex64> = eig
        .eigenvalues
        .iter()
        // The spectrum of S_y is exactly {-S, ..., S}; snap away round-off.
        .map(|&mu| (mu * 2.0).round() / 2.0)
        .map(|mu| Complex64::from_polar(1.0, -FRAC_PI_2 * mu))
        .collect();
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, phase) in phases.iter().enumerate() {
        for z in scaled.column_mut(j).iter_mut() {
            *z *= phase;
        }
    }
    scaled * v.adjoint()
}

/// Re-expresses `psi` along `to_axis`. `from_axis` must match the state.
pub fn rotate_basis(psi: &DickeVector, from_axis: Axis, to_axis: Axis) -> Result<DickeVector> {
    if psi.axis != from_axis {
        return Err(Error::BasisMismatch {
            op: from_axis,
            state: psi.axis,
        });
    }
    if from_axis == to_axis {
        return Ok(psi.clone());
    }
    let u = x_to_z_rotation(psi.sector);
    let amplitudes = match (from_axis, to_axis) {
        (Axis::X, Axis::Z) => &u * &psi.amplitudes,
        (Axis::Z, Axis::X) => u.adjoint() * &psi.amplitudes,
        _ => unreachable!(),
    };
    Ok(DickeVector {
        sector: psi.sector,
        amplitudes,
        axis: to_axis,
    })
}
