use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use noon_metrology::fock::{coherent_amplitudes, squeezed_vacuum_amplitudes, Cutoff, ModeVector, SingleModeDensity};
use noon_metrology::scalar::cis;
use noon_metrology::wigner::{negativity, wigner, wigner_on, wigner_point, GridSpec};

const C: usize = 12;

/// Equal-weight mixture of a few random pure states.
fn density_strategy() -> impl Strategy<Value = SingleModeDensity> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2 * C), 1..4).prop_map(|vs| {
        let k = vs.len() as f64;
        let mut rho = DMatrix::<Complex64>::zeros(C, C);
        for v in vs {
            let amps: Vec<Complex64> = v.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
            let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            let amps: Vec<Complex64> = amps.iter().map(|a| a / norm).collect();
            rho += SingleModeDensity::pure(&ModeVector { amps }).rho.unscale(k);
        }
        SingleModeDensity { rho }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn origin_is_the_parity_expectation(rho in density_strategy()) {
        let parity: f64 = (0..C).map(|n| if n % 2 == 0 { 1.0 } else { -1.0 } * rho.rho[(n, n)].re).sum();
        let w = wigner_point(&rho, 0.0, 0.0);
        prop_assert!((w.re * 2.0 * PI - parity).abs() < 1e-12);
    }

    #[test]
    fn hermitian_states_give_real_wigner_functions(rho in density_strategy()) {
        let axis: Vec<f64> = (0..9).map(|k| -4.0 + k as f64).collect();
        let grid = wigner(&rho, &axis, &axis);
        prop_assert!(grid.max_imag < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn gaussian_states_have_no_negativity(alpha in 0.0f64..1.0, angle in 0.0f64..2.0 * PI, r in 0.0f64..0.4) {
        let c = Cutoff::new(40).unwrap();
        let spec = GridSpec { min: -6.0, max: 6.0, points: 121 };
        let coh = coherent_amplitudes(alpha, c);
        let coh = ModeVector { amps: coh.amps.iter().enumerate().map(|(n, a)| a * cis(angle * n as f64)).collect() };
        let sq = squeezed_vacuum_amplitudes(r, c);
        for v in [coh, sq] {
            let rho = SingleModeDensity::pure(&v);
            let neg = negativity(&wigner_on(&rho, &spec.covering(&rho))).unwrap();
            prop_assert!(neg.volume < 1e-8, "negativity {}", neg.volume);
        }
    }
}

#[test]
fn vacuum_origin() {
    let rho = SingleModeDensity::pure(&ModeVector { amps: vec![Complex64::new(1.0, 0.0)] });
    assert!((wigner_point(&rho, 0.0, 0.0).re - 1.0 / (2.0 * PI)).abs() < 1e-8);
}
