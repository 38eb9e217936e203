//! The eight-parameter interferometer.
//!
//! `|out⟩ = B(θ2, φ2) R₀(φ_est) B(θ1, φ1) R₁(d_sq) R₀(d_coh) (|α⟩ ⊗ |r⟩)`
//! with a coherent state of amplitude `α = √(γ r)` in mode 0 and squeezed
//! vacuum in mode 1.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    coherent_amplitudes, coincidence_probability, phase_rotation, squeezed_vacuum_amplitudes, tensor_product,
    Beamsplitter, Cutoff, Mode, TwoModeState,
};
use crate::scalar::Scalar;

pub const NUM_PARAMS: usize = 8;

pub const PARAM_NAMES: [&str; NUM_PARAMS] = ["r", "log_gamma", "d_coh", "d_sq", "theta1", "phi1", "theta2", "phi2"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams<T> {
    pub r: T,
    pub log_gamma: T,
    pub d_coh: T,
    pub d_sq: T,
    pub theta1: T,
    pub phi1: T,
    pub theta2: T,
    pub phi2: T,
}

impl<T: Scalar> CircuitParams<T> {
    pub fn to_array(&self) -> [T; NUM_PARAMS] {
        [self.r, self.log_gamma, self.d_coh, self.d_sq, self.theta1, self.phi1, self.theta2, self.phi2]
    }

    pub fn from_array(a: [T; NUM_PARAMS]) -> Self {
        CircuitParams {
            r: a[0],
            log_gamma: a[1],
            d_coh: a[2],
            d_sq: a[3],
            theta1: a[4],
            phi1: a[5],
            theta2: a[6],
            phi2: a[7],
        }
    }

    pub fn gamma(&self) -> T {
        self.log_gamma.exp()
    }

    pub fn alpha(&self) -> T {
        (self.gamma() * self.r).sqrt()
    }

    pub fn map<U>(&self, f: impl Fn(T) -> U) -> CircuitParams<U> {
        let a = self.to_array();
        CircuitParams {
            r: f(a[0]),
            log_gamma: f(a[1]),
            d_coh: f(a[2]),
            d_sq: f(a[3]),
            theta1: f(a[4]),
            phi1: f(a[5]),
            theta2: f(a[6]),
            phi2: f(a[7]),
        }
    }
}

/// Detection pattern `(N1, N2)`: `N1` photons at output 0, `N2` at output 1.
pub type Pattern = (usize, usize);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternSet {
    pub n: usize,
    pub patterns: Vec<Pattern>,
}

impl PatternSet {
    /// The monitored coincidence channels for `N` photons.
    pub fn monitored(n: usize) -> Result<Self> {
        let patterns = match n {
            2 => vec![(1, 1), (2, 0)],
            3 => vec![(2, 1), (3, 0)],
            4 => vec![(3, 1), (2, 2)],
            5 => vec![(3, 2)],
            _ => return Err(Error::UnsupportedPhotonNumber(n)),
        };
        Ok(PatternSet { n, patterns })
    }

    /// Every ordered split of `N` photons over the two outputs.
    pub fn complete(n: usize) -> Self {
        PatternSet { n, patterns: (0..=n).rev().map(|k| (k, n - k)).collect() }
    }
}

pub const AFEK_SQUEEZING: f64 = 0.35;

/// Reference coherent-plus-squeezed NOON settings for `N` photons.
pub fn afek_init(n: usize) -> Result<(CircuitParams<f64>, Cutoff)> {
    let gamma: f64 = match n {
        2 | 3 => 1.0,
        4 => 3f64.sqrt(),
        5 => 1.925,
        _ => return Err(Error::UnsupportedPhotonNumber(n)),
    };
    let params = CircuitParams {
        r: AFEK_SQUEEZING,
        log_gamma: gamma.ln(),
        d_coh: 0.0,
        d_sq: 0.0,
        theta1: FRAC_PI_4,
        phi1: 0.0,
        theta2: FRAC_PI_4,
        phi2: PI,
    };
    Ok((params, Cutoff::for_photons(n)))
}

/// Input product state with the two pre-phases applied.
pub fn prepare_input<T: Scalar>(params: &CircuitParams<T>, c: Cutoff) -> TwoModeState<T> {
    let coh = coherent_amplitudes(params.alpha(), c);
    let sq = squeezed_vacuum_amplitudes(params.r, c);
    let s = tensor_product(&coh, &sq).expect("equal lengths");
    let s = phase_rotation(&s, Mode::Zero, params.d_coh);
    phase_rotation(&s, Mode::One, params.d_sq)
}

/// Probe state after the first beamsplitter.
pub fn prepare_probe<T: Scalar>(params: &CircuitParams<T>, c: Cutoff) -> TwoModeState<T> {
    let s = prepare_input(params, c);
    Beamsplitter::new(params.theta1, params.phi1, c.dim()).apply(&s)
}

/// Probe plus second beamsplitter, reusable across many `φ_est`.
pub struct Circuit<T> {
    probe: TwoModeState<T>,
    bs2: Beamsplitter<T>,
}

impl<T: Scalar> Circuit<T> {
    pub fn new(params: &CircuitParams<T>, c: Cutoff) -> Self {
        Circuit { probe: prepare_probe(params, c), bs2: Beamsplitter::new(params.theta2, params.phi2, c.dim()) }
    }

    pub fn probe(&self) -> &TwoModeState<T> {
        &self.probe
    }

    pub fn output(&self, phi_est: T) -> TwoModeState<T> {
        self.bs2.apply(&phase_rotation(&self.probe, Mode::Zero, phi_est))
    }

    pub fn probability(&self, phi_est: T, pattern: Pattern) -> Result<T> {
        let out = self.output(phi_est);
        coincidence_probability(&out, pattern.0, pattern.1)
    }

    /// Probabilities of several patterns from one output state.
    pub fn probabilities(&self, phi_est: T, patterns: &[Pattern]) -> Result<Vec<T>> {
        let out = self.output(phi_est);
        patterns.iter().map(|&(a, b)| coincidence_probability(&out, a, b)).collect()
    }
}

pub fn forward<T: Scalar>(params: &CircuitParams<T>, phi_est: T, c: Cutoff) -> TwoModeState<T> {
    Circuit::new(params, c).output(phi_est)
}

pub fn pattern_probability<T: Scalar>(params: &CircuitParams<T>, phi_est: T, pattern: Pattern, c: Cutoff) -> Result<T> {
    Circuit::new(params, c).probability(phi_est, pattern)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn afek_table() {
        let (p, c) = afek_init(4).unwrap();
        assert!((p.gamma() - 1.732).abs() < 1e-3);
        assert!((p.alpha() - 0.779).abs() < 1e-3);
        assert_eq!(c.dim(), 16);
        let (p, c) = afek_init(2).unwrap();
        assert!((p.alpha() - 0.592).abs() < 1e-3);
        assert_eq!(c.dim(), 12);
        for n in 2..=5 {
            let (p, _) = afek_init(n).unwrap();
            assert!((p.alpha() - (p.gamma() * p.r).sqrt()).abs() < 1e-15);
        }
        assert!(matches!(afek_init(6), Err(Error::UnsupportedPhotonNumber(6))));
        assert!(matches!(afek_init(1), Err(Error::UnsupportedPhotonNumber(1))));
    }

    #[test]
    fn pattern_tables() {
        assert_eq!(PatternSet::monitored(2).unwrap().patterns, vec![(1, 1), (2, 0)]);
        assert_eq!(PatternSet::monitored(3).unwrap().patterns, vec![(2, 1), (3, 0)]);
        assert_eq!(PatternSet::monitored(4).unwrap().patterns, vec![(3, 1), (2, 2)]);
        assert_eq!(PatternSet::monitored(5).unwrap().patterns, vec![(3, 2)]);
        assert_eq!(PatternSet::complete(2).patterns, vec![(2, 0), (1, 1), (0, 2)]);
    }

    #[test]
    fn probe_without_first_splitter_is_input() {
        let (mut p, c) = afek_init(2).unwrap();
        p.theta1 = 0.0;
        let probe = prepare_probe(&p, c);
        let coh = coherent_amplitudes(p.alpha(), c);
        let sq = squeezed_vacuum_amplitudes(p.r, c);
        let input = tensor_product(&coh, &sq).unwrap();
        for (x, y) in probe.amps().iter().zip(input.amps()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn probe_norm_leakage() {
        let (mut p, c) = afek_init(2).unwrap();
        let n = prepare_probe(&p, c).norm_sqr();
        assert!(n > 0.999);
        p.phi1 = 1.234;
        assert!((prepare_probe(&p, c).norm_sqr() - n).abs() < 1e-13);
    }

    #[test]
    fn output_is_periodic_and_total_is_phase_independent() {
        let (p, c) = afek_init(3).unwrap();
        let circ = Circuit::new(&p, c);
        let a = circ.output(0.7);
        let b = circ.output(0.7 + 2.0 * PI);
        for (x, y) in a.amps().iter().zip(b.amps()) {
            assert!((x - y).norm() < 1e-12);
        }
        let t0 = circ.output(0.0).norm_sqr();
        for k in 1..10 {
            assert!((circ.output(k as f64 * 0.61).norm_sqr() - t0).abs() < 1e-10);
        }
    }

    #[test]
    fn afek_peak_probabilities() {
        let peak = |n: usize, pat: Pattern| {
            let (p, c) = afek_init(n).unwrap();
            let circ = Circuit::new(&p, c);
            (0..400).map(|k| circ.probability(2.0 * PI * k as f64 / 399.0, pat).unwrap()).fold(0.0, f64::max)
        };
        assert!((peak(2, (1, 1)) - 0.078).abs() < 0.0005);
        assert!((peak(5, (3, 2)) - 0.003).abs() < 0.0005);
    }
}
