//! Brute-force references in the full 2^N qubit space.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Bit `j` of a basis index is qubit `j`; a set bit means excited (up).
fn bit(index: usize, j: usize) -> usize {
    (index >> j) & 1
}

/// `sum_j sigma_alpha^(j) / 2` on 2^N states; alpha in {x, y, z}.
pub fn collective(n: usize, alpha: char) -> CMat {
    let d = 1usize << n;
    let mut m = CMat::zeros(d, d);
    for col in 0..d {
        for j in 0..n {
            let up = bit(col, j) == 1;
            match alpha {
                'z' => m[(col, col)] += c(if up { 0.5 } else { -0.5 }),
                'x' => m[(col ^ (1 << j), col)] += c(0.5),
                // sigma_y |up> = i |down>, sigma_y |down> = -i |up>
                'y' => m[(col ^ (1 << j), col)] += Complex64::new(0.0, if up { 0.5 } else { -0.5 }),
                _ => panic!("unknown axis {alpha}"),
            }
        }
    }
    m
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Columns are the normalized Dicke states with k = 0..=N excitations.
pub fn dicke_isometry(n: usize) -> CMat {
    let d = 1usize << n;
    let mut b = CMat::zeros(d, n + 1);
    for idx in 0..d {
        let k = idx.count_ones() as usize;
        b[(idx, k)] = c(1.0 / binomial(n, k).sqrt());
    }
    b
}

pub fn embed(amplitudes: &CVec) -> CVec {
    let n = amplitudes.len() - 1;
    dicke_isometry(n) * amplitudes
}

/// Reduced state of qubits 0 and 1 in the order ee, eg, ge, gg.
pub fn partial_trace_first_two(psi: &CVec, n: usize) -> Matrix4<Complex64> {
    let pos = |idx: usize| (1 - bit(idx, 0)) * 2 + (1 - bit(idx, 1));
    let mut rho = Matrix4::zeros();
    for rest in 0..(1usize << (n - 2)) {
        for a in 0..4usize {
            for b in 0..4usize {
                let ia = (rest << 2) | a;
                let ib = (rest << 2) | b;
                rho[(pos(ia), pos(ib))] += psi[ia] * psi[ib].conj();
            }
        }
    }
    rho
}

/// Concurrence from the eigenvalues of `rho (Y rho* Y)` via a complex Schur
/// decomposition.
pub fn naive_concurrence(rho: &Matrix4<Complex64>) -> f64 {
    let mut y = Matrix4::<Complex64>::zeros();
    y[(0, 3)] = c(-1.0);
    y[(3, 0)] = c(-1.0);
    y[(1, 2)] = c(1.0);
    y[(2, 1)] = c(1.0);
    let r = rho * y * rho.conjugate() * y;
    let eig = nalgebra::Schur::new(r)
        .eigenvalues()
        .expect("complex Schur always yields eigenvalues");
    let mut l: Vec<f64> = eig.iter().map(|z| z.re.max(0.0).sqrt()).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    (l[0] - l[1] - l[2] - l[3]).max(0.0)
}

/// Random normalized complex vector of length `dim`.
pub fn random_state<R: rand::Rng>(dim: usize, rng: &mut R) -> CVec {
    let v = CVec::from_fn(dim, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let norm = v.norm();
    v / c(norm)
}

/// `-i[H, rho] + sum_k r_k (2 L rho L^dag - L^dag L rho - rho L^dag L)`.
pub fn lindblad_action(h: &CMat, jumps: &[(f64, CMat)], rho: &CMat) -> CMat {
    let i = Complex64::new(0.0, 1.0);
    let mut out = (h * rho - rho * h) * (-i);
    for (rate, l) in jumps {
        let ld = l.adjoint();
        out += (l * rho * &ld * c(2.0) - &ld * l * rho - rho * &ld * l) * c(*rate);
    }
    out
}

/// Spin coherent state with excitation probability cos^2(theta/2) per qubit
/// and relative phase phi on the ground component.
pub fn coherent_spin(n: usize, theta: f64, phi: f64) -> CVec {
    let (cu, sd) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    CVec::from_fn(n + 1, |k, _| {
        let mag = binomial(n, k).sqrt() * cu.powi(k as i32) * sd.powi((n - k) as i32);
        Complex64::from_polar(mag, (n - k) as f64 * phi)
    })
}

/// Largest entry modulus.
pub fn maxabs<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<Complex64, R, C>>(
    m: &nalgebra::Matrix<Complex64, R, C, S>,
) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
