mod common;

use common::*;
use cqed_lmg::cli::format_float;
use cqed_lmg::effective::{build_effective_hamiltonian, ground_state, EffectiveParams};
use cqed_lmg::entanglement::{concurrence, reduced_two_qubit, rescale_concurrence};
use cqed_lmg::lindblad::build_qubit_liouvillian;
use cqed_lmg::meanfield::{
    all_fixed_points, bloch_rhs, integrate_trajectory, BlochVector, MeanFieldParams,
    TrajectoryOptions,
};
use cqed_lmg::spin::{Axis, DickeVector, SpinSector};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn unit_vector() -> impl Strategy<Value = BlochVector> {
    (
        0.0..std::f64::consts::PI,
        -std::f64::consts::PI..std::f64::consts::PI,
    )
        .prop_map(|(t, f)| {
            BlochVector::normalized(t.sin() * f.cos(), t.sin() * f.sin(), t.cos()).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn radial_component_of_rhs_vanishes(s in unit_vector(), h in -10.0..10.0f64, gamma in 0.0..1.0f64, da in -1.0..1.0f64) {
        let p = MeanFieldParams::new(h, 5.0, gamma, da).unwrap();
        let r = bloch_rhs(&s, &p);
        let radial = r[0] * s.s_x + r[1] * s.s_y + r[2] * s.s_z;
        prop_assert!(radial.abs() < 1e-12);
    }

    #[test]
    fn trajectories_stay_on_the_sphere(s in unit_vector(), h in -3.0..3.0f64, gamma in 0.0..0.5f64) {
        let p = MeanFieldParams::new(h, 5.0, gamma, 0.0).unwrap();
        let traj = integrate_trajectory(&s, &p, 5.0, &TrajectoryOptions::default()).unwrap();
        prop_assert!(traj.max_norm_drift < 1e-8);
    }

    #[test]
    fn fixed_points_are_stationary(h in -8.0..8.0f64, gamma in 0.01..1.0f64) {
        let p = MeanFieldParams::new(h, 5.0, gamma, 0.0).unwrap();
        for fp in all_fixed_points(&p).unwrap() {
            let r = bloch_rhs(&fp.point, &p);
            prop_assert!(r.iter().all(|x| x.abs() < 1e-9));
            prop_assert!((fp.point.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn reduced_state_is_valid_and_concurrence_bounded(n in 2usize..40, seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let sector = SpinSector::new(n).unwrap();
        let psi = DickeVector::new(sector, random_state(n + 1, &mut rng), Axis::Z).unwrap();
        let rho = reduced_two_qubit(&psi).unwrap();
        prop_assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
        prop_assert!(rho.eigenvalues().min() > -1e-10);
        let c = concurrence(&rho);
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert!(rescale_concurrence(c, sector) >= 0.0);
    }

    #[test]
    fn ground_state_is_normalized(n in 1usize..60, h in -10.0..10.0f64, da in 0.0..1.0f64) {
        let sector = SpinSector::new(n).unwrap();
        let eff = EffectiveParams { h, lambda: 5.0, delta_a: da };
        let gs = ground_state(&build_effective_hamiltonian(&eff, sector)).unwrap();
        prop_assert!((gs.state.amplitudes().norm() - 1.0).abs() < 1e-10);
        prop_assert!(gs.s_x.abs() <= sector.total_spin() + 1e-9);
    }

    #[test]
    fn qubit_liouvillian_is_trace_preserving(n in 1usize..8, h in -5.0..5.0f64, gamma in 0.0..1.0f64, gp in 0.0..1.0f64) {
        let eff = EffectiveParams { h, lambda: 5.0, delta_a: 0.2 };
        let l = build_qubit_liouvillian(&eff, gamma, gp, SpinSector::new(n).unwrap()).unwrap();
        prop_assert!(l.trace_annihilation_error() < 1e-12);
    }

    #[test]
    fn formatted_floats_round_trip_to_twelve_digits(x in prop::num::f64::NORMAL) {
        let s = format_float(x);
        let back: f64 = s.parse().unwrap();
        prop_assert!(((back - x) / x).abs() < 1e-11);
        prop_assert_eq!(format_float(back), s);
    }
}
