use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;

use noon_metrology::autodiff::{central_difference, grad, gradients_agree, Gradient8};
use noon_metrology::circuit::{Circuit, CircuitParams};
use noon_metrology::fock::Cutoff;
use noon_metrology::metrology::{cfi_differentiable, DiffCfiConfig};
use noon_metrology::optimizer::{calibrate_weights, loss, ChannelWeights, TrainConfig};
use noon_metrology::scalar::{Dual8, Scalar};

const REL: f64 = 1e-4;
const ABS: f64 = 1e-7;
const H: f64 = 1e-5;

fn c12() -> Cutoff {
    Cutoff::new(12).unwrap()
}

fn weights() -> &'static ChannelWeights {
    static W: OnceLock<ChannelWeights> = OnceLock::new();
    W.get_or_init(|| calibrate_weights(2, c12(), &TrainConfig::default()).unwrap())
}

fn params_strategy() -> impl Strategy<Value = CircuitParams<f64>> {
    (0.1f64..0.8, -0.8f64..0.8, prop::array::uniform6(0.0f64..2.0 * PI)).prop_map(|(r, lg, a)| CircuitParams {
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

fn assert_agree(ad: &Gradient8, fd: &Gradient8) -> Result<(), TestCaseError> {
    prop_assert!(gradients_agree(ad, fd, REL, ABS), "forward mode {ad:?}\ncentral difference {fd:?}");
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn probability_gradient_matches_central_differences(p in params_strategy(), phi in 0.0f64..2.0 * PI) {
        let c = c12();
        let (v, ad) = grad(|q| Circuit::new(q, c).probability(Dual8::constant(phi), (1, 1)), &p).unwrap();
        let plain = Circuit::new(&p, c).probability(phi, (1, 1)).unwrap();
        prop_assert!((v - plain).abs() < 1e-12);
        let fd = central_difference(|q| Circuit::new(q, c).probability(phi, (1, 1)), &p, H).unwrap();
        assert_agree(&ad, &fd)?;
    }

    #[test]
    fn cfi_estimate_gradient_matches_central_differences(p in params_strategy()) {
        let (c, cfg) = (c12(), DiffCfiConfig::default());
        let (v, ad) = grad(|q| cfi_differentiable(q, (2, 0), &cfg, c), &p).unwrap();
        prop_assert!((v - cfi_differentiable(&p, (2, 0), &cfg, c).unwrap()).abs() < 1e-12);
        let fd = central_difference(|q| cfi_differentiable(q, (2, 0), &cfg, c), &p, H).unwrap();
        assert_agree(&ad, &fd)?;
    }

    #[test]
    fn loss_gradient_matches_central_differences(p in params_strategy()) {
        let (c, cfg) = (c12(), DiffCfiConfig::default());
        let w = weights();
        let (v, ad) = grad(|q| loss(q, w, &cfg, c), &p).unwrap();
        prop_assert!((v - loss(&p, w, &cfg, c).unwrap()).abs() < 1e-12 * v.abs().max(1.0));
        let fd = central_difference(|q| loss(q, w, &cfg, c), &p, H).unwrap();
        assert_agree(&ad, &fd)?;
    }

    #[test]
    fn gradient_is_linear(p in params_strategy(), a in -3.0f64..3.0, b in -3.0f64..3.0, phi in 0.0f64..2.0 * PI) {
        let c = c12();
        let f = |q: &CircuitParams<Dual8>| Circuit::new(q, c).probability(Dual8::constant(phi), (1, 1));
        let g = |q: &CircuitParams<Dual8>| Circuit::new(q, c).probability(Dual8::constant(phi), (2, 0));
        let (_, gf) = grad(f, &p).unwrap();
        let (_, gg) = grad(g, &p).unwrap();
        let (_, gs) = grad(|q| Ok(f(q)?.scale(a) + g(q)?.scale(b)), &p).unwrap();
        for i in 0..8 {
            let expect = a * gf.to_array()[i] + b * gg.to_array()[i];
            prop_assert!((gs.to_array()[i] - expect).abs() < 1e-10);
        }
    }
}
