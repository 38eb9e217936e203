//! Weighted multi-channel CFI loss and Adam training.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{grad, Gradient8};
use crate::circuit::{afek_init, Circuit, CircuitParams, Pattern, PatternSet, NUM_PARAMS};
use crate::error::{Error, Result};
use crate::fock::Cutoff;
use crate::metrology::{
    cfi_differentiable_many, scan_fringe, scan_profiles, CfiOptions, DiffCfiConfig, DEFAULT_SCAN_POINTS,
};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub steps: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 0.02, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, steps: 100 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub t: u64,
    pub m: [f64; NUM_PARAMS],
    pub v: [f64; NUM_PARAMS],
}

/// One bias-corrected Adam update, descending along `g`.
pub fn adam_step(
    params: &CircuitParams<f64>,
    g: &Gradient8,
    state: &AdamState,
    cfg: &AdamConfig,
) -> Result<(CircuitParams<f64>, AdamState)> {
    g.check_finite()?;
    let g = g.to_array();
    let mut x = params.to_array();
    let mut next = *state;
    next.t += 1;
    let b1t = 1.0 - cfg.beta1.powi(next.t as i32);
    let b2t = 1.0 - cfg.beta2.powi(next.t as i32);
    for i in 0..NUM_PARAMS {
        next.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g[i];
        next.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let mhat = next.m[i] / b1t;
        let vhat = next.v[i] / b2t;
        x[i] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.epsilon);
    }
    Ok((CircuitParams::from_array(x), next))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelWeights {
    pub n: usize,
    pub patterns: Vec<Pattern>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub estimator: DiffCfiConfig,
    pub scan_points: usize,
    pub cfi: CfiOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            estimator: DiffCfiConfig::default(),
            scan_points: DEFAULT_SCAN_POINTS,
            cfi: CfiOptions::default(),
        }
    }
}

/// Ground-truth figures for one monitored pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternMetrics {
    pub pattern: Pattern,
    pub f_peak_raw: f64,
    pub f_peak_norm: Option<f64>,
    pub p_max: f64,
}

pub fn ground_truth_metrics(
    params: &CircuitParams<f64>,
    n: usize,
    patterns: &[Pattern],
    c: Cutoff,
    cfg: &TrainConfig,
) -> Result<Vec<PatternMetrics>> {
    let scan = scan_fringe(params, n, patterns, cfg.scan_points, c)?;
    Ok(scan_profiles(&scan, &cfg.cfi)
        .into_iter()
        .zip(patterns)
        .map(|(p, &pattern)| PatternMetrics {
            pattern,
            f_peak_raw: p.f_peak_raw,
            f_peak_norm: p.f_peak_norm,
            p_max: p.p_max,
        })
        .collect())
}

/// Per-pattern differentiable CFI and `−Σ w · cfi`.
pub fn loss_terms<T: Scalar>(
    params: &CircuitParams<T>,
    weights: &ChannelWeights,
    estimator: &DiffCfiConfig,
    c: Cutoff,
) -> Result<(T, Vec<T>)> {
    let circ = Circuit::new(params, c);
    let cfi = cfi_differentiable_many(&circ, &weights.patterns, estimator)?;
    let mut total = T::zero();
    for (f, w) in cfi.iter().zip(&weights.weights) {
        total -= f.scale(*w);
    }
    Ok((total, cfi))
}

pub fn loss<T: Scalar>(
    params: &CircuitParams<T>,
    weights: &ChannelWeights,
    estimator: &DiffCfiConfig,
    c: Cutoff,
) -> Result<T> {
    Ok(loss_terms(params, weights, estimator, c)?.0)
}

/// `w = ground-truth peak / differentiable estimate`, both at the reference
/// initialization for `N`.
pub fn calibrate_weights(n: usize, c: Cutoff, cfg: &TrainConfig) -> Result<ChannelWeights> {
    let (init, _) = afek_init(n)?;
    let patterns = PatternSet::monitored(n)?.patterns;
    let truth = ground_truth_metrics(&init, n, &patterns, c, cfg)?;
    let diff = cfi_differentiable_many(&Circuit::new(&init, c), &patterns, &cfg.estimator)?;
    let mut weights = Vec::with_capacity(patterns.len());
    for ((t, d), &(n1, n2)) in truth.iter().zip(&diff).zip(&patterns) {
        if !d.is_finite() || *d <= 0.0 {
            return Err(Error::DegenerateCalibration { n1, n2, value: *d });
        }
        weights.push(t.f_peak_raw / d);
    }
    Ok(ChannelWeights { n, patterns, weights })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub loss: f64,
    pub params: CircuitParams<f64>,
    pub cfi_diff: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub steps: Vec<TraceStep>,
    pub initial: Vec<PatternMetrics>,
    pub final_metrics: Vec<PatternMetrics>,
    /// set if the squeezing parameter ever went negative
    pub negative_r: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub n: usize,
    pub cutoff: Cutoff,
    pub weights: ChannelWeights,
    pub initial_params: CircuitParams<f64>,
    pub params: CircuitParams<f64>,
    pub trace: TrainingTrace,
}

/// Adam from `init` with frozen `weights`.
pub fn train_from(
    n: usize,
    init: &CircuitParams<f64>,
    weights: &ChannelWeights,
    c: Cutoff,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let objective = |q: &CircuitParams<_>| loss(q, weights, &cfg.estimator, c);
    let mut params = *init;
    let mut state = AdamState::default();
    let mut steps = Vec::with_capacity(cfg.adam.steps + 1);
    let mut negative_r = false;
    for step in 0..=cfg.adam.steps {
        let (value, g) = grad(objective, &params)?;
        let (_, cfi) = loss_terms(&params, weights, &cfg.estimator, c)?;
        steps.push(TraceStep { step, loss: value, params, cfi_diff: cfi });
        if step == cfg.adam.steps {
            break;
        }
        let (next, s) = adam_step(&params, &g, &state, &cfg.adam)?;
        params = next;
        state = s;
        negative_r |= params.r < 0.0;
    }
    let initial = ground_truth_metrics(init, n, &weights.patterns, c, cfg)?;
    let final_metrics = ground_truth_metrics(&params, n, &weights.patterns, c, cfg)?;
    Ok(TrainOutcome {
        n,
        cutoff: c,
        weights: weights.clone(),
        initial_params: *init,
        params,
        trace: TrainingTrace { steps, initial, final_metrics, negative_r },
    })
}

/// Calibrate, then train from the reference initialization.
pub fn train(n: usize, c: Option<Cutoff>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let (init, default_c) = afek_init(n)?;
    let c = c.unwrap_or(default_c);
    let weights = calibrate_weights(n, c, cfg)?;
    train_from(n, &init, &weights, c, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitRanges {
    pub r: (f64, f64),
    pub log_gamma: (f64, f64),
    pub angle: (f64, f64),
}

impl Default for InitRanges {
    fn default() -> Self {
        InitRanges { r: (0.1, 1.0), log_gamma: (-1.0, 2.0), angle: (0.0, 2.0 * PI) }
    }
}

pub fn random_init(rng: &mut impl Rng, ranges: &InitRanges) -> CircuitParams<f64> {
    let mut u = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    CircuitParams {
        r: u(ranges.r),
        log_gamma: u(ranges.log_gamma),
        d_coh: u(ranges.angle),
        d_sq: u(ranges.angle),
        theta1: u(ranges.angle),
        phi1: u(ranges.angle),
        theta2: u(ranges.angle),
        phi2: u(ranges.angle),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiStartRun {
    pub seed: u64,
    pub init: CircuitParams<f64>,
    pub params: CircuitParams<f64>,
    pub final_metrics: Vec<PatternMetrics>,
    /// Σ of final raw peak CFI over the monitored patterns
    pub final_raw_sum: f64,
}

/// Train from `n_seeds` random starts; start `i` uses seed `base_seed + i`.
/// Weights are the ones calibrated at the reference initialization.
pub fn multi_start(
    n: usize,
    n_seeds: usize,
    base_seed: u64,
    ranges: &InitRanges,
    c: Option<Cutoff>,
    cfg: &TrainConfig,
) -> Result<Vec<MultiStartRun>> {
    if n_seeds == 0 {
        return Ok(Vec::new());
    }
    let (_, default_c) = afek_init(n)?;
    let c = c.unwrap_or(default_c);
    let weights = calibrate_weights(n, c, cfg)?;
    (0..n_seeds as u64)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed + i;
            let init = random_init(&mut ChaCha8Rng::seed_from_u64(seed), ranges);
            let out = train_from(n, &init, &weights, c, cfg)?;
            let final_raw_sum = out.trace.final_metrics.iter().map(|m| m.f_peak_raw).sum();
            Ok(MultiStartRun { seed, init, params: out.params, final_metrics: out.trace.final_metrics, final_raw_sum })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(v: [f64; 8]) -> Gradient8 {
        Gradient8::from_array(v)
    }

    #[test]
    fn adam_defaults() {
        let a = AdamConfig::default();
        assert_eq!((a.learning_rate, a.beta1, a.beta2, a.epsilon, a.steps), (0.02, 0.9, 0.999, 1e-8, 100));
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let (p, _) = afek_init(2).unwrap();
        let (q, s) = adam_step(&p, &g([0.0; 8]), &AdamState::default(), &AdamConfig::default()).unwrap();
        assert_eq!(p, q);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let (p, _) = afek_init(2).unwrap();
        let grad = [0.3, -2.0, 1e-3, 5.0, -0.01, 1.0, 7.0, -1e-2];
        let (q, _) = adam_step(&p, &g(grad), &AdamState::default(), &AdamConfig::default()).unwrap();
        for ((a, b), gi) in p.to_array().iter().zip(q.to_array()).zip(grad) {
            let dx = b - a;
            assert!((dx.abs() - 0.02).abs() < 1e-6);
            assert_eq!(dx.signum(), -gi.signum());
        }
    }

    #[test]
    fn repeated_positive_gradient_descends() {
        let (p, _) = afek_init(2).unwrap();
        let cfg = AdamConfig::default();
        let grad = g([1.0; 8]);
        let (p1, s1) = adam_step(&p, &grad, &AdamState::default(), &cfg).unwrap();
        let (p2, _) = adam_step(&p1, &grad, &s1, &cfg).unwrap();
        assert!(p1.theta1 < p.theta1 && p2.theta1 < p1.theta1);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let (p, _) = afek_init(2).unwrap();
        let mut v = [0.0; 8];
        v[3] = f64::NAN;
        let e = adam_step(&p, &g(v), &AdamState::default(), &AdamConfig::default());
        assert!(matches!(e, Err(Error::NonFiniteGradient { index: 3, .. })));
    }

    #[test]
    fn single_unit_weight_loss_is_negated_estimate() {
        let (p, c) = afek_init(2).unwrap();
        let w = ChannelWeights { n: 2, patterns: vec![(1, 1)], weights: vec![1.0] };
        let est = DiffCfiConfig::default();
        let l = loss(&p, &w, &est, c).unwrap();
        let d = crate::metrology::cfi_differentiable(&p, (1, 1), &est, c).unwrap();
        assert_eq!(l, -d);
    }

    #[test]
    fn calibration_identity_at_reference_point() {
        let cfg = TrainConfig::default();
        let (p, c) = afek_init(2).unwrap();
        let w = calibrate_weights(2, c, &cfg).unwrap();
        assert!(w.weights.iter().all(|&x| x > 0.0));
        let truth: f64 = ground_truth_metrics(&p, 2, &w.patterns, c, &cfg).unwrap().iter().map(|m| m.f_peak_raw).sum();
        let l = loss(&p, &w, &cfg.estimator, c).unwrap();
        assert!((-l - truth).abs() < 1e-9);
        assert_eq!(calibrate_weights(2, c, &cfg).unwrap(), w);
    }

    #[test]
    fn seeded_inits_are_reproducible() {
        let r = InitRanges::default();
        let a = random_init(&mut ChaCha8Rng::seed_from_u64(9), &r);
        let b = random_init(&mut ChaCha8Rng::seed_from_u64(9), &r);
        assert_eq!(a, b);
        assert!(a.r >= 0.1 && a.r <= 1.0 && a.log_gamma >= -1.0 && a.log_gamma <= 2.0);
        assert!(multi_start(2, 0, 0, &r, None, &TrainConfig::default()).unwrap().is_empty());
    }
}
