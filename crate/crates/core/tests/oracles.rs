mod common;

use approx::assert_abs_diff_eq;
use common::*;
use cqed_lmg::effective::{
    build_effective_hamiltonian, ground_state, EffectiveParams, PhysicalParams,
};
use cqed_lmg::entanglement::{concurrence, reduced_two_qubit, TwoQubitState};
use cqed_lmg::lindblad::{build_driven_dicke_liouvillian, build_qubit_liouvillian};
use cqed_lmg::meanfield::{bloch_rhs, BlochVector, MeanFieldParams};
use cqed_lmg::spin::{build_spin_operators, Axis, DickeVector, SpinSector};
use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn project(op: &CMat, n: usize) -> CMat {
    let b = dicke_isometry(n);
    b.adjoint() * op * b
}

#[test]
fn spin_matrices_match_qubit_sums() {
    for n in 1..=8 {
        let ops = build_spin_operators(SpinSector::new(n).unwrap());
        for (alpha, lib) in [('x', &ops.sx), ('y', &ops.sy), ('z', &ops.sz)] {
            let reference = project(&collective(n, alpha), n);
            assert!(
                maxabs(&(lib.matrix() - reference)) < 1e-13,
                "N={n} axis {alpha}"
            );
        }
    }
}

#[test]
fn dicke_isometry_spans_an_invariant_subspace() {
    // S_x applied to the symmetric subspace stays inside it
    for n in 2..=6 {
        let b = dicke_isometry(n);
        let sx = collective(n, 'x');
        let leak = &sx * &b - &b * (b.adjoint() * &sx * &b);
        assert!(maxabs(&leak) < 1e-13);
    }
}

#[test]
fn reduced_states_match_partial_trace() {
    let mut rng = StdRng::seed_from_u64(2024);
    for n in 2..=8 {
        let sector = SpinSector::new(n).unwrap();
        for _ in 0..20 {
            let amps = random_state(n + 1, &mut rng);
            let psi = DickeVector::new(sector, amps.clone(), Axis::Z).unwrap();
            let lib = reduced_two_qubit(&psi).unwrap();
            let reference = partial_trace_first_two(&embed(&amps), n);
            assert!(maxabs(&(lib.matrix() - reference)) < 1e-12, "N={n}");
        }
    }
}

#[test]
fn concurrence_matches_eigenvalue_route() {
    let mut rng = StdRng::seed_from_u64(99);
    for rank in 1..=4 {
        for _ in 0..50 {
            let mut rho = Matrix4::<Complex64>::zeros();
            for _ in 0..rank {
                let v = random_state(4, &mut rng);
                // exchange-symmetrize so the state is admissible
                let v4 = nalgebra::Vector4::new(
                    v[0],
                    (v[1] + v[2]) * c(0.5),
                    (v[1] + v[2]) * c(0.5),
                    v[3],
                );
                rho += v4 * v4.adjoint();
            }
            let tr = rho.trace();
            let rho = rho / tr;
            let state = TwoQubitState::new(rho).unwrap();
            assert_abs_diff_eq!(concurrence(&state), naive_concurrence(&rho), epsilon = 1e-6);
        }
    }
}

#[test]
fn ground_energy_matches_full_space() {
    let eff = EffectiveParams {
        h: 1.7,
        lambda: 4.0,
        delta_a: 0.4,
    };
    for n in 2..=8 {
        let sector = SpinSector::new(n).unwrap();
        let gs = ground_state(&build_effective_hamiltonian(&eff, sector)).unwrap();
        let (sx, sy, sz) = (collective(n, 'x'), collective(n, 'y'), collective(n, 'z'));
        let h_full = &sz * c(eff.delta_a)
            - &sx * c(eff.h)
            - (&sy * &sy + &sz * &sz) * c(eff.lambda / n as f64);
        let projected = project(&h_full, n);
        let e0 = SymmetricEigen::new(projected).eigenvalues.min();
        assert_abs_diff_eq!(gs.energy, e0, epsilon = 1e-10);
    }
}

#[test]
fn qubit_liouvillian_matches_operator_form() {
    let mut rng = StdRng::seed_from_u64(5);
    let eff = EffectiveParams {
        h: 0.9,
        lambda: 5.0,
        delta_a: 0.3,
    };
    let (gamma, gamma_prime) = (0.2, 0.07);
    for n in [1usize, 3, 6] {
        let sector = SpinSector::new(n).unwrap();
        let l = build_qubit_liouvillian(&eff, gamma, gamma_prime, sector).unwrap();
        let (sx, sy, sz) = (
            project(&collective(n, 'x'), n),
            project(&collective(n, 'y'), n),
            project(&collective(n, 'z'), n),
        );
        let i = Complex64::new(0.0, 1.0);
        let s_plus = &sx + &sy * i;
        let h = &sz * c(eff.delta_a)
            - &sx * c(eff.h)
            - (&sy * &sy + &sz * &sz) * c(eff.lambda / n as f64);
        let nf = n as f64;
        let jumps = [(gamma / nf, s_plus), (gamma_prime / nf, sx.clone())];
        for _ in 0..3 {
            let v = random_state(n + 1, &mut rng);
            let rho = &v * v.adjoint();
            let diff = l.apply(&rho) - lindblad_action(&h, &jumps, &rho);
            assert!(maxabs(&diff) < 1e-12, "N={n}: {}", maxabs(&diff));
        }
    }
}

#[test]
fn joint_liouvillian_matches_operator_form() {
    let mut rng = StdRng::seed_from_u64(6);
    let n = 2;
    let cutoff = 3;
    let p = PhysicalParams {
        g0: 7.0,
        eta0: 1.3,
        kappa: 1.0,
        delta_c: 4.0,
        delta_a: 0.6,
        n_qubits: n,
    };
    let l = build_driven_dicke_liouvillian(&p, SpinSector::new(n).unwrap(), cutoff).unwrap();
    let mut a = CMat::zeros(cutoff + 1, cutoff + 1);
    for k in 1..=cutoff {
        a[(k - 1, k)] = c((k as f64).sqrt());
    }
    let ad = a.adjoint();
    let ids = CMat::identity(n + 1, n + 1);
    let idf = CMat::identity(cutoff + 1, cutoff + 1);
    let (sx, sz) = (
        project(&collective(n, 'x'), n),
        project(&collective(n, 'z'), n),
    );
    let i = Complex64::new(0.0, 1.0);
    let g = p.g0 / (n as f64).sqrt();
    let eta = p.eta0 * (n as f64).sqrt();
    let h = (&ad * &a * c(p.delta_c) - (&a - &ad) * (i * eta)).kronecker(&ids)
        + idf.kronecker(&(&sz * c(p.delta_a)))
        + (&a + &ad).kronecker(&sx) * c(g);
    let jumps = [(p.kappa, a.kronecker(&ids))];
    let d = (cutoff + 1) * (n + 1);
    for _ in 0..3 {
        let v = random_state(d, &mut rng);
        let rho = &v * v.adjoint();
        assert!(maxabs(&(l.apply(&rho) - lindblad_action(&h, &jumps, &rho))) < 1e-10);
    }
}

/// `2/N d<S>/dt` from the master equation, evaluated on a coherent spin state.
fn quantum_bloch_velocity(
    n: usize,
    theta: f64,
    phi: f64,
    eff: &EffectiveParams,
    gamma: f64,
    gamma_prime: f64,
) -> ([f64; 3], [f64; 3]) {
    let sector = SpinSector::new(n).unwrap();
    let l = build_qubit_liouvillian(eff, gamma, gamma_prime, sector).unwrap();
    let v = coherent_spin(n, theta, phi);
    let rho = &v * v.adjoint();
    let drho = l.apply(&rho);
    let ops = build_spin_operators(sector);
    let scale = 2.0 / n as f64;
    let s = [&ops.sx, &ops.sy, &ops.sz].map(|op| scale * (op.matrix() * &rho).trace().re);
    let ds = [&ops.sx, &ops.sy, &ops.sz].map(|op| scale * (op.matrix() * &drho).trace().re);
    (s, ds)
}

#[test]
fn master_equation_reduces_to_mean_field() {
    let eff = EffectiveParams {
        h: 1.5,
        lambda: 5.0,
        delta_a: 0.3,
    };
    let (gamma, gamma_prime) = (0.2, 0.1);
    let p = MeanFieldParams::new(eff.h, eff.lambda, gamma, eff.delta_a).unwrap();
    for (theta, phi) in [(0.7, 0.4), (2.1, -1.3), (1.2, 2.9)] {
        let mut errors = Vec::new();
        for n in [10usize, 30] {
            let (s, ds) = quantum_bloch_velocity(n, theta, phi, &eff, gamma, gamma_prime);
            let sv = BlochVector::new(s[0], s[1], s[2]).unwrap();
            let rhs = bloch_rhs(&sv, &p);
            let err = (0..3).map(|k| (ds[k] - rhs[k]).abs()).fold(0.0, f64::max);
            errors.push(err);
            // corrections are O(lambda / N)
            assert!(
                err < 2.0 * eff.lambda / n as f64,
                "N={n}: {ds:?} vs {rhs:?}"
            );
        }
        assert!(errors[1] < errors[0]);
    }
}
