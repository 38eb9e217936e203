//! Fringes, Fisher information and post-selection efficiency.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::circuit::{prepare_probe, Circuit, CircuitParams, Pattern, PatternSet};
use crate::error::Result;
use crate::fock::{number_moments, Cutoff, Mode};
use crate::scalar::Scalar;

pub const DEFAULT_SCAN_POINTS: usize = 400;
pub const P_FLOOR: f64 = 1e-12;
pub const AMPLITUDE_FLOOR: f64 = 1e-3;

/// `m` points spanning `[0, 2π]`, both ends included.
pub fn phase_grid(m: usize) -> Vec<f64> {
    let h = 2.0 * PI / (m - 1) as f64;
    (0..m).map(|k| k as f64 * h).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    pub n: usize,
    pub params: CircuitParams<f64>,
    pub phis: Vec<f64>,
    pub patterns: Vec<Pattern>,
    /// `probs[i][k] = P(patterns[i] | phis[k])`
    pub probs: Vec<Vec<f64>>,
}

impl FringeScan {
    pub fn probs_for(&self, pattern: Pattern) -> Option<&[f64]> {
        self.patterns.iter().position(|&p| p == pattern).map(|i| self.probs[i].as_slice())
    }

    pub fn step(&self) -> f64 {
        self.phis[1] - self.phis[0]
    }
}

pub fn scan_fringe(
    params: &CircuitParams<f64>,
    n: usize,
    patterns: &[Pattern],
    m: usize,
    c: Cutoff,
) -> Result<FringeScan> {
    assert!(m >= 16, "scan needs at least 16 points");
    let circ = Circuit::new(params, c);
    let phis = phase_grid(m);
    let rows: Vec<Vec<f64>> = phis.par_iter().map(|&phi| circ.probabilities(phi, patterns)).collect::<Result<_>>()?;
    let probs = (0..patterns.len()).map(|i| rows.iter().map(|r| r[i]).collect()).collect();
    Ok(FringeScan { n, params: *params, phis, patterns: patterns.to_vec(), probs })
}

/// How `dP/dφ` is taken at the first and last grid point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Endpoints {
    /// Treat the grid as one period (`P[0] = P[M−1]`) and use the central
    /// difference across the seam.
    #[default]
    Periodic,
    /// First-order forward/backward differences.
    OneSided,
}

/// Rescaling applied before the normalized CFI.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `P / max P`
    #[default]
    UnitPeak,
    /// `(P − min P) / (max P − min P)`
    MinMax,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CfiOptions {
    pub p_floor: f64,
    pub amplitude_floor: f64,
    pub endpoints: Endpoints,
    pub normalization: Normalization,
}

impl Default for CfiOptions {
    fn default() -> Self {
        CfiOptions {
            p_floor: P_FLOOR,
            amplitude_floor: AMPLITUDE_FLOOR,
            endpoints: Endpoints::Periodic,
            normalization: Normalization::UnitPeak,
        }
    }
}

/// Finite-difference derivative on a uniform grid with spacing `h`.
pub fn grid_derivative(p: &[f64], h: f64, endpoints: Endpoints) -> Vec<f64> {
    let m = p.len();
    let mut d = vec![0.0; m];
    for k in 1..m - 1 {
        d[k] = (p[k + 1] - p[k - 1]) / (2.0 * h);
    }
    match endpoints {
        Endpoints::Periodic => {
            let seam = (p[1] - p[m - 2]) / (2.0 * h);
            d[0] = seam;
            d[m - 1] = seam;
        }
        Endpoints::OneSided => {
            d[0] = (p[1] - p[0]) / h;
            d[m - 1] = (p[m - 1] - p[m - 2]) / h;
        }
    }
    d
}

/// `F = (dP/dφ)² / max(P, p_floor)` pointwise.
pub fn fisher_profile(p: &[f64], h: f64, opts: &CfiOptions) -> Vec<f64> {
    grid_derivative(p, h, opts.endpoints).iter().zip(p).map(|(d, &pk)| d * d / pk.max(opts.p_floor)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfiProfile {
    pub f: Vec<f64>,
    pub f_peak_raw: f64,
    pub f_peak_norm: Option<f64>,
    pub p_max: f64,
    pub p_min: f64,
    pub visibility: f64,
}

fn max_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Peak CFI of the rescaled fringe, `None` when the fringe amplitude is
/// below the floor.
pub fn f_peak_norm(p: &[f64], h: f64, opts: &CfiOptions) -> Option<f64> {
    let (hi, lo) = (max_of(p), min_of(p));
    if hi - lo < opts.amplitude_floor {
        return None;
    }
    let q: Vec<f64> = match opts.normalization {
        Normalization::UnitPeak => p.iter().map(|x| x / hi).collect(),
        Normalization::MinMax => p.iter().map(|x| (x - lo) / (hi - lo)).collect(),
    };
    Some(max_of(&fisher_profile(&q, h, opts)))
}

pub fn cfi_ground_truth(p: &[f64], h: f64, opts: &CfiOptions) -> CfiProfile {
    let f = fisher_profile(p, h, opts);
    let (hi, lo) = (max_of(p), min_of(p));
    CfiProfile {
        f_peak_raw: max_of(&f),
        f_peak_norm: f_peak_norm(p, h, opts),
        p_max: hi,
        p_min: lo,
        visibility: if hi + lo > 0.0 { (hi - lo) / (hi + lo) } else { 0.0 },
        f,
    }
}

pub fn scan_profiles(scan: &FringeScan, opts: &CfiOptions) -> Vec<CfiProfile> {
    scan.probs.iter().map(|p| cfi_ground_truth(p, scan.step(), opts)).collect()
}

/// Derivative of `K` uniform samples on `[0, 2π)` through the DFT: bin `m`
/// is multiplied by `i m`, the Nyquist bin is dropped.
pub fn spectral_derivative<T: Scalar>(samples: &[T]) -> Vec<T> {
    let k = samples.len();
    let phis: Vec<f64> = (0..k).map(|j| 2.0 * PI * j as f64 / k as f64).collect();
    let mut out = vec![T::zero(); k];
    // bins 1..K/2 (exclusive); negative bins are conjugates for real input
    for m in 1..k.div_ceil(2) {
        if 2 * m == k {
            continue;
        }
        let mf = m as f64;
        let mut a = T::zero();
        let mut b = T::zero();
        for (j, &s) in samples.iter().enumerate() {
            a += s.scale((mf * phis[j]).cos());
            b += s.scale((mf * phis[j]).sin());
        }
        let a = a.scale(1.0 / k as f64);
        let b = b.scale(1.0 / k as f64);
        for (j, o) in out.iter_mut().enumerate() {
            let (s, c) = (mf * phis[j]).sin_cos();
            *o += (b.scale(c) - a.scale(s)).scale(2.0 * mf);
        }
    }
    out
}

/// `(1/β) ln Σ e^{β x}`, shifted by the primal maximum for stability.
pub fn smooth_max<T: Scalar>(x: &[T], beta: f64) -> T {
    let shift = x.iter().map(|v| v.value()).fold(f64::NEG_INFINITY, f64::max);
    let mut s = T::zero();
    for &v in x {
        s += (v - T::from_f64(shift)).scale(beta).exp();
    }
    s.ln().scale(1.0 / beta) + T::from_f64(shift)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffCfiConfig {
    pub samples: usize,
    pub beta: f64,
    pub eps_fraction: f64,
}

impl Default for DiffCfiConfig {
    fn default() -> Self {
        DiffCfiConfig { samples: 8, beta: 50.0, eps_fraction: 0.05 }
    }
}

/// Smooth peak of `(P′)² / (P + ε)` from `K` spectral samples.
pub fn cfi_from_samples<T: Scalar>(p: &[T], cfg: &DiffCfiConfig) -> T {
    let dp = spectral_derivative(p);
    let mean = p.iter().fold(T::zero(), |acc, &x| acc + x).scale(1.0 / p.len() as f64);
    let eps = mean.scale(cfg.eps_fraction);
    let f: Vec<T> = dp.iter().zip(p).map(|(&d, &pk)| d * d / (pk + eps)).collect();
    smooth_max(&f, cfg.beta)
}

/// Differentiable CFI estimate for each pattern, sharing the circuit
/// evaluations between patterns.
pub fn cfi_differentiable_many<T: Scalar>(
    circ: &Circuit<T>,
    patterns: &[Pattern],
    cfg: &DiffCfiConfig,
) -> Result<Vec<T>> {
    assert!(cfg.samples >= 8 && cfg.samples.is_multiple_of(2), "K must be even and at least 8");
    let k = cfg.samples;
    let mut per_pattern = vec![Vec::with_capacity(k); patterns.len()];
    for j in 0..k {
        let phi = T::from_f64(2.0 * PI * j as f64 / k as f64);
        for (i, p) in circ.probabilities(phi, patterns)?.into_iter().enumerate() {
            per_pattern[i].push(p);
        }
    }
    Ok(per_pattern.iter().map(|p| cfi_from_samples(p, cfg)).collect())
}

pub fn cfi_differentiable<T: Scalar>(
    params: &CircuitParams<T>,
    pattern: Pattern,
    cfg: &DiffCfiConfig,
    c: Cutoff,
) -> Result<T> {
    let circ = Circuit::new(params, c);
    Ok(cfi_differentiable_many(&circ, &[pattern], cfg)?[0])
}

/// `4 Var(n₀)` on the probe state.
pub fn qfi_probe<T: Scalar>(params: &CircuitParams<T>, c: Cutoff) -> T {
    let probe = prepare_probe(params, c);
    let (m1, m2) = number_moments(&probe, Mode::Zero);
    (m2 - m1 * m1).scale(4.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FftCheck {
    pub dominant_freq: usize,
    pub harmonic_ratio: f64,
}

/// Power spectrum of the mean-removed fringe over one period. The repeated
/// endpoint of an inclusive grid is dropped first.
pub fn fft_fringe_check(p: &[f64], inclusive_endpoint: bool) -> FftCheck {
    let period = if inclusive_endpoint { &p[..p.len() - 1] } else { p };
    let m = period.len();
    let mean = period.iter().sum::<f64>() / m as f64;
    let mut buf: Vec<Complex64> = period.iter().map(|&x| Complex64::new(x - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let power: Vec<f64> = buf[1..=m / 2].iter().map(|z| z.norm_sqr()).collect();
    let (imax, pmax) =
        power.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let second = power.iter().enumerate().filter(|(i, _)| *i != imax).map(|(_, &v)| v).fold(0.0, f64::max);
    FftCheck { dominant_freq: imax + 1, harmonic_ratio: if pmax > 0.0 { second / pmax } else { f64::NAN } }
}

/// Which phase the post-selection metrics are read at.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimalPhase {
    /// argmax of the summed CFI over all N-photon patterns
    #[default]
    MaxSummedCfi,
    /// argmax of the total N-photon probability
    MaxSelection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub qfi: f64,
    pub phi_star: f64,
    pub p_sel: f64,
    pub f_sigma_raw: f64,
    pub eta_sigma: f64,
    pub events_per_pulse: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPair {
    /// at the selected convention
    pub selected: EfficiencyReport,
    pub convention: OptimalPhase,
    /// same quantities at the other convention, for the run log
    pub alternative: EfficiencyReport,
}

/// Post-selection efficiency over every ordered split of `N` photons.
pub fn efficiency_metrics(
    params: &CircuitParams<f64>,
    n: usize,
    c: Cutoff,
    m: usize,
    opts: &CfiOptions,
    convention: OptimalPhase,
) -> Result<EfficiencyPair> {
    let patterns = PatternSet::complete(n).patterns;
    let scan = scan_fringe(params, n, &patterns, m, c)?;
    let h = scan.step();
    let mut f_sigma = vec![0.0; m];
    let mut p_total = vec![0.0; m];
    for p in &scan.probs {
        for (k, f) in fisher_profile(p, h, opts).into_iter().enumerate() {
            f_sigma[k] += f;
            p_total[k] += p[k];
        }
    }
    let qfi = qfi_probe(params, c);
    let at = |k: usize| {
        let eta = f_sigma[k] / qfi;
        EfficiencyReport {
            qfi,
            phi_star: scan.phis[k],
            p_sel: p_total[k],
            f_sigma_raw: f_sigma[k],
            eta_sigma: eta,
            events_per_pulse: eta * p_total[k],
        }
    };
    let argmax = |v: &[f64]| {
        v.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc }).0
    };
    let by_cfi = at(argmax(&f_sigma));
    let by_sel = at(argmax(&p_total));
    Ok(match convention {
        OptimalPhase::MaxSummedCfi => EfficiencyPair { selected: by_cfi, convention, alternative: by_sel },
        OptimalPhase::MaxSelection => EfficiencyPair { selected: by_sel, convention, alternative: by_cfi },
    })
}

/// Summed CFI over every outcome `(n0, n1)` inside the cutoff, per grid phase.
pub fn complete_outcome_cfi(params: &CircuitParams<f64>, c: Cutoff, m: usize, opts: &CfiOptions) -> Vec<f64> {
    let d = c.dim();
    let circ = Circuit::new(params, c);
    let phis = phase_grid(m);
    let h = phis[1] - phis[0];
    let probs: Vec<Vec<f64>> =
        phis.par_iter().map(|&phi| circ.output(phi).amps().iter().map(|a| a.norm_sqr()).collect()).collect();
    let mut total = vec![0.0; m];
    for idx in 0..d * d {
        let p: Vec<f64> = probs.iter().map(|row| row[idx]).collect();
        for (t, f) in total.iter_mut().zip(fisher_profile(&p, h, opts)) {
            *t += f;
        }
    }
    total
}
