use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use noon_metrology::circuit::{afek_init, prepare_input, prepare_probe, Circuit, CircuitParams, PatternSet};
use noon_metrology::fock::{apply_dense, dense_beamsplitter, phase_rotation, Beamsplitter, Cutoff, Mode, TwoModeState};

const C: usize = 12;

fn state_strategy() -> impl Strategy<Value = TwoModeState<f64>> {
    prop::collection::vec(-1.0f64..1.0, 2 * C * C).prop_map(|v| {
        let amps: Vec<Complex64> = v.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
        TwoModeState::from_amps(C, amps).unwrap().renormalize()
    })
}

fn params_strategy() -> impl Strategy<Value = CircuitParams<f64>> {
    (0.05f64..0.8, -1.0f64..1.0, prop::array::uniform6(0.0f64..2.0 * PI)).prop_map(|(r, lg, a)| CircuitParams {
        r,
        log_gamma: lg,
        d_coh: a[0],
        d_sq: a[1],
        theta1: a[2],
        phi1: a[3],
        theta2: a[4],
        phi2: a[5],
    })
}

/// Probability of each total photon number `n0 + n1`.
fn total_number_distribution(s: &TwoModeState<f64>) -> Vec<f64> {
    let c = s.cutoff();
    let mut d = vec![0.0; 2 * c - 1];
    for n0 in 0..c {
        for n1 in 0..c {
            d[n0 + n1] += s.amp(n0, n1).norm_sqr();
        }
    }
    d
}

fn max_diff(a: &TwoModeState<f64>, b: &TwoModeState<f64>) -> f64 {
    a.amps().iter().zip(b.amps()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn max_vec_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gates_preserve_norm_and_photon_number(s in state_strategy(), theta in -PI..PI, phi in -PI..PI) {
        let before = total_number_distribution(&s);
        let b = Beamsplitter::new(theta, phi, C).apply(&s);
        prop_assert!((b.norm_sqr() - s.norm_sqr()).abs() < 1e-12);
        prop_assert!(max_vec_diff(&total_number_distribution(&b), &before) < 1e-12);
        for mode in [Mode::Zero, Mode::One] {
            let r = phase_rotation(&s, mode, phi);
            prop_assert!((r.norm_sqr() - s.norm_sqr()).abs() < 1e-12);
            prop_assert!(max_vec_diff(&total_number_distribution(&r), &before) < 1e-12);
        }
    }

    #[test]
    fn blocked_and_dense_beamsplitters_agree(s in state_strategy(), theta in -PI..PI, phi in -PI..PI) {
        let fast = Beamsplitter::new(theta, phi, C).apply(&s);
        let dense = apply_dense(&dense_beamsplitter(theta, phi, C), &s);
        prop_assert!(max_diff(&fast, &dense) < 1e-10);
    }

    #[test]
    fn opposite_angles_cancel(s in state_strategy(), theta in -PI..PI, phi in -PI..PI) {
        let there = Beamsplitter::new(theta, phi, C).apply(&s);
        let back = Beamsplitter::new(-theta, phi, C).apply(&there);
        prop_assert!(max_diff(&back, &s) < 1e-10);
    }

    #[test]
    fn probabilities_are_periodic_in_phase(p in params_strategy(), phi in 0.0f64..2.0 * PI) {
        let circ = Circuit::new(&p, Cutoff::new(C).unwrap());
        let patterns = PatternSet::complete(3).patterns;
        let a = circ.probabilities(phi, &patterns).unwrap();
        let b = circ.probabilities(phi + 2.0 * PI, &patterns).unwrap();
        prop_assert!(max_vec_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn common_input_phase_is_unobservable(p in params_strategy(), delta in -PI..PI, phi in 0.0f64..2.0 * PI) {
        let c = Cutoff::new(C).unwrap();
        let shifted = CircuitParams { d_coh: p.d_coh + delta, d_sq: p.d_sq + delta, ..p };
        let a = Circuit::new(&p, c).output(phi);
        let b = Circuit::new(&shifted, c).output(phi);
        let pa: Vec<f64> = a.amps().iter().map(|z| z.norm_sqr()).collect();
        let pb: Vec<f64> = b.amps().iter().map(|z| z.norm_sqr()).collect();
        prop_assert!(max_vec_diff(&pa, &pb) < 1e-12);
    }
}

#[test]
fn reference_inits_stay_inside_the_cutoff() {
    for n in 2..=5 {
        let (p, c) = afek_init(n).unwrap();
        assert!(prepare_input(&p, c).norm_deficit() < 1e-3, "N = {n}");
        assert!(prepare_probe(&p, c).norm_deficit() < 1e-3, "N = {n}");
    }
}

#[test]
fn balanced_splitter_suppresses_coincidences() {
    let s = TwoModeState::<f64>::fock(1, 1, C).unwrap();
    let out = Beamsplitter::new(PI / 4.0, 0.0, C).apply(&s);
    assert!(out.amp(1, 1).norm() < 1e-15);
    assert!((out.amp(2, 0).norm_sqr() - 0.5).abs() < 1e-14);
}
