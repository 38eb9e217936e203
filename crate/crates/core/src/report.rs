//! Run configuration, result bundles and the pipelines behind each `noon`
//! subcommand. Every command reads a [`RunConfig`] and writes into
//! `<out>/n<N>/`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::autodiff::{grad, seed, Gradient8};
use crate::circuit::{
    afek_init, prepare_input, prepare_probe, Circuit, CircuitParams, Pattern, PatternSet, PARAM_NAMES,
};
use crate::error::{Error, Result};
use crate::fock::{
    apply_dense, dense_beamsplitter, number_moments, partial_trace, Beamsplitter, Cutoff, Mode, SingleModeDensity,
    TwoModeState,
};
use crate::metrology::{
    efficiency_metrics, fft_fringe_check, grid_derivative, qfi_probe, scan_fringe, scan_profiles, CfiOptions,
    CfiProfile, DiffCfiConfig, EfficiencyPair, FftCheck, FringeScan, OptimalPhase, DEFAULT_SCAN_POINTS,
};
use crate::optimizer::{
    multi_start, train, AdamConfig, ChannelWeights, InitRanges, PatternMetrics, TrainConfig, TrainOutcome,
    TrainingTrace,
};
use crate::output::{read_json, write_fringes_csv, write_json, write_trace_csv, write_wigner_csv};
use crate::scalar::Dual8;
use crate::wigner::{negativity, wigner_on, wigner_point, GridSpec, BOUNDARY_LIMIT};

pub const SUMMARY_FILE: &str = "summary.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const VALIDATION_FILE: &str = "validation.json";
pub const MULTISTART_FILE: &str = "multistart.json";
pub const FEASIBILITY_FILE: &str = "feasibility.json";

pub fn fringes_file(which: Which) -> String {
    format!("fringes_{which}.csv")
}

pub fn qfi_file(which: Which) -> String {
    format!("qfi_{which}.json")
}

pub fn wigner_files(which: Which, mode: Mode) -> (String, String) {
    let stem = format!("wigner_{which}_mode{}", mode.index());
    (format!("{stem}.csv"), format!("{stem}.json"))
}

/// Files written by `train`.
pub fn train_files() -> Vec<String> {
    vec![SUMMARY_FILE.into(), TRACE_FILE.into(), fringes_file(Which::Afek), fringes_file(Which::Trained)]
}

/// Leakage bound on the probe norm.
pub const LEAKAGE_LIMIT: f64 = 1e-3;
pub const TWO_PATH_LIMIT: f64 = 1e-6;
pub const HARMONIC_LIMIT: f64 = 0.01;
/// Gradient entries below this are reported as zero.
pub const GRADIENT_ZERO: f64 = 1e-12;

/// Reference numbers the reports compare against.
pub mod reference {
    /// Peak raw CFI and normalized CFI / N² at the reference init, N = 2.
    pub const N2_RAW: [((usize, usize), f64); 2] = [((1, 1), 0.3125), ((2, 0), 0.9593)];
    pub const N2_NORM_OVER_N2: [((usize, usize), f64); 2] = [((1, 1), 0.999), ((2, 0), 0.962)];
    pub const RAW_REL_TOL: f64 = 0.02;
    pub const NORM_ABS_TOL: f64 = 0.02;
    /// QFI of the reference probe, N = 2..=5.
    pub const QFI: [f64; 4] = [3.173, 5.257, 8.415, 8.992];
    pub const QFI_REL_TOL: f64 = 0.01;
    /// Total post-selection probability, N = 2..=5.
    pub const P_SEL: [f64; 4] = [0.0700, 0.0188, 0.0162, 7.4e-3];
    pub const P_SEL_REL_TOL: f64 = 0.05;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Afek,
    Trained,
}

impl fmt::Display for Which {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Which::Afek => "afek",
            Which::Trained => "trained",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiStartConfig {
    pub seeds: usize,
    pub ranges: InitRanges,
}

impl Default for MultiStartConfig {
    fn default() -> Self {
        MultiStartConfig { seeds: 5, ranges: InitRanges::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeasibilityConfig {
    /// pulse repetition rate, Hz
    pub f_rep: f64,
    /// post-selected counts required
    pub n_c: f64,
    /// per-photon loss probability
    pub eta_loss: f64,
}

impl Default for FeasibilityConfig {
    fn default() -> Self {
        FeasibilityConfig { f_rep: 1e4, n_c: 1e4, eta_loss: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
    pub scan_points: usize,
    pub adam: AdamConfig,
    pub estimator: DiffCfiConfig,
    pub cfi: CfiOptions,
    pub phase_convention: OptimalPhase,
    pub wigner: GridSpec,
    pub multistart: MultiStartConfig,
    pub feasibility: FeasibilityConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 2,
            cutoff: None,
            seed: 0,
            out: PathBuf::from("runs"),
            scan_points: DEFAULT_SCAN_POINTS,
            adam: AdamConfig::default(),
            estimator: DiffCfiConfig::default(),
            cfi: CfiOptions::default(),
            phase_convention: OptimalPhase::default(),
            wigner: GridSpec::default(),
            multistart: MultiStartConfig::default(),
            feasibility: FeasibilityConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Photon number, scan length and grid checked; cutoff resolved.
    pub fn cutoff(&self) -> Result<Cutoff> {
        PatternSet::monitored(self.n)?;
        if self.scan_points < 16 {
            return Err(Error::InvalidArgument(format!("scan_points = {} (need at least 16)", self.scan_points)));
        }
        if self.wigner.points < 2 || self.wigner.max <= self.wigner.min {
            return Err(Error::InvalidArgument("wigner grid needs min < max and at least 2 points".into()));
        }
        match self.cutoff {
            Some(c) => Cutoff::new(c),
            None => Ok(Cutoff::for_photons(self.n)),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { adam: self.adam, estimator: self.estimator, scan_points: self.scan_points, cfi: self.cfi }
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out.join(format!("n{}", self.n))
    }

    fn ensure_run_dir(&self) -> Result<PathBuf> {
        let dir = self.run_dir();
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

pub fn percent_delta(afek: f64, opt: f64) -> f64 {
    100.0 * (opt - afek) / afek
}

fn same(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub afek: f64,
    pub opt: f64,
    pub delta_pct: f64,
}

impl Comparison {
    pub fn new(afek: f64, opt: f64) -> Self {
        Comparison { afek, opt, delta_pct: percent_delta(afek, opt) }
    }

    pub fn is_consistent(&self) -> bool {
        same(self.delta_pct, percent_delta(self.afek, self.opt))
    }

    pub fn ratio(&self) -> f64 {
        self.opt / self.afek
    }
}

/// Like [`Comparison`] for values that may be flagged not available.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptionalComparison {
    pub afek: Option<f64>,
    pub opt: Option<f64>,
    pub delta_pct: Option<f64>,
}

impl OptionalComparison {
    pub fn new(afek: Option<f64>, opt: Option<f64>) -> Self {
        let delta_pct = afek.zip(opt).map(|(a, o)| percent_delta(a, o));
        OptionalComparison { afek, opt, delta_pct }
    }

    pub fn is_consistent(&self) -> bool {
        match (self.afek.zip(self.opt), self.delta_pct) {
            (Some((a, o)), Some(d)) => same(d, percent_delta(a, o)),
            (None, None) => true,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternRecord {
    pub pattern: Pattern,
    pub f_peak_raw: Comparison,
    pub f_peak_norm: OptionalComparison,
    pub p_max: Comparison,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamDrift {
    pub name: String,
    pub afek: f64,
    pub opt: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencySummary {
    pub afek: EfficiencyPair,
    pub opt: EfficiencyPair,
    pub qfi: Comparison,
    pub p_sel: Comparison,
    pub events_per_pulse: Comparison,
    /// opt / afek events per pulse
    pub events_gain: f64,
}

impl EfficiencySummary {
    pub fn new(afek: EfficiencyPair, opt: EfficiencyPair) -> Self {
        let events_per_pulse = Comparison::new(afek.selected.events_per_pulse, opt.selected.events_per_pulse);
        EfficiencySummary {
            qfi: Comparison::new(afek.selected.qfi, opt.selected.qfi),
            p_sel: Comparison::new(afek.selected.p_sel, opt.selected.p_sel),
            events_gain: events_per_pulse.ratio(),
            events_per_pulse,
            afek,
            opt,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormDeficits {
    pub input_afek: f64,
    pub probe_afek: f64,
    pub input_opt: f64,
    pub probe_opt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsBundle {
    pub n: usize,
    pub cutoff: Cutoff,
    pub config: TrainConfig,
    pub weights: ChannelWeights,
    pub patterns: Vec<PatternRecord>,
    pub efficiency: EfficiencySummary,
    pub drift: Vec<ParamDrift>,
    pub afek_params: CircuitParams<f64>,
    pub trained_params: CircuitParams<f64>,
    pub norm_deficit: NormDeficits,
    pub trace: TrainingTrace,
    pub fringes_afek: FringeScan,
    pub fringes_trained: FringeScan,
}

fn pattern_records(initial: &[PatternMetrics], fin: &[PatternMetrics]) -> Vec<PatternRecord> {
    initial
        .iter()
        .zip(fin)
        .map(|(a, o)| PatternRecord {
            pattern: a.pattern,
            f_peak_raw: Comparison::new(a.f_peak_raw, o.f_peak_raw),
            f_peak_norm: OptionalComparison::new(a.f_peak_norm, o.f_peak_norm),
            p_max: Comparison::new(a.p_max, o.p_max),
        })
        .collect()
}

fn drift(afek: &CircuitParams<f64>, opt: &CircuitParams<f64>) -> Vec<ParamDrift> {
    PARAM_NAMES
        .iter()
        .zip(afek.to_array().into_iter().zip(opt.to_array()))
        .map(|(name, (a, o))| ParamDrift { name: name.to_string(), afek: a, opt: o, delta: o - a })
        .collect()
}

impl ResultsBundle {
    pub fn from_outcome(cfg: &RunConfig, out: TrainOutcome) -> Result<Self> {
        let (n, c, tc) = (out.n, out.cutoff, cfg.train_config());
        let patterns = out.weights.patterns.clone();
        let eff = |p: &CircuitParams<f64>| efficiency_metrics(p, n, c, cfg.scan_points, &cfg.cfi, cfg.phase_convention);
        let deficit = |p: &CircuitParams<f64>| (prepare_input(p, c).norm_deficit(), prepare_probe(p, c).norm_deficit());
        let (input_afek, probe_afek) = deficit(&out.initial_params);
        let (input_opt, probe_opt) = deficit(&out.params);
        Ok(ResultsBundle {
            n,
            cutoff: c,
            config: tc,
            patterns: pattern_records(&out.trace.initial, &out.trace.final_metrics),
            efficiency: EfficiencySummary::new(eff(&out.initial_params)?, eff(&out.params)?),
            drift: drift(&out.initial_params, &out.params),
            afek_params: out.initial_params,
            trained_params: out.params,
            norm_deficit: NormDeficits { input_afek, probe_afek, input_opt, probe_opt },
            fringes_afek: scan_fringe(&out.initial_params, n, &patterns, cfg.scan_points, c)?,
            fringes_trained: scan_fringe(&out.params, n, &patterns, cfg.scan_points, c)?,
            weights: out.weights,
            trace: out.trace,
        })
    }

    pub fn record(&self, pattern: Pattern) -> Option<&PatternRecord> {
        self.patterns.iter().find(|r| r.pattern == pattern)
    }

    /// Every stored derived field agrees with its absolutes.
    pub fn check_consistency(&self) -> Result<()> {
        let mut bad = Vec::new();
        for r in &self.patterns {
            if !r.f_peak_raw.is_consistent() {
                bad.push(format!("f_peak_raw {:?}", r.pattern));
            }
            if !r.f_peak_norm.is_consistent() {
                bad.push(format!("f_peak_norm {:?}", r.pattern));
            }
            if !r.p_max.is_consistent() {
                bad.push(format!("p_max {:?}", r.pattern));
            }
        }
        let e = &self.efficiency;
        for (name, c) in [("qfi", &e.qfi), ("p_sel", &e.p_sel), ("events_per_pulse", &e.events_per_pulse)] {
            if !c.is_consistent() {
                bad.push(name.to_string());
            }
        }
        if !same(e.events_gain, e.events_per_pulse.ratio()) {
            bad.push("events_gain".into());
        }
        for d in &self.drift {
            if !same(d.delta, d.opt - d.afek) {
                bad.push(format!("drift {}", d.name));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(format!("inconsistent derived fields: {}", bad.join(", "))))
        }
    }
}

/// Parameters for `which`, reading trained ones from the run directory.
pub fn load_params(cfg: &RunConfig, which: Which) -> Result<CircuitParams<f64>> {
    match which {
        Which::Afek => Ok(afek_init(cfg.n)?.0),
        Which::Trained => Ok(load_bundle(&cfg.run_dir())?.trained_params),
    }
}

pub fn load_bundle(dir: &Path) -> Result<ResultsBundle> {
    let path = dir.join(SUMMARY_FILE);
    if !path.exists() {
        return Err(Error::MissingTrainedParams(path));
    }
    read_json(&path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, passed: value < limit }
    }

    fn equal(name: impl Into<String>, value: f64, expected: f64) -> Self {
        Check { name: name.into(), value, limit: expected, passed: value == expected }
    }

    /// `|value − target| ≤ tol`, stored as the deviation.
    fn within(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        let dev = (value - target).abs();
        Check { name: format!("{} = {value:.4} vs {target}", name.into()), value: dev, limit: tol, passed: dev <= tol }
    }

    fn within_rel(name: impl Into<String>, value: f64, target: f64, rel: f64) -> Self {
        let dev = ((value - target) / target).abs();
        Check { name: format!("{} = {value:.4} vs {target}", name.into()), value: dev, limit: rel, passed: dev <= rel }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientProbe {
    pub label: String,
    pub phi: f64,
    pub pattern: Pattern,
    pub probability: f64,
    pub gradient: Gradient8,
    /// entries with magnitude above [`GRADIENT_ZERO`]
    pub nonzero: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternValidation {
    pub pattern: Pattern,
    pub fft: FftCheck,
    pub f_peak_raw: f64,
    pub f_norm_over_n2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    pub cutoff: Cutoff,
    pub strict: bool,
    pub checks: Vec<Check>,
    /// comparisons with reference numbers; fatal only when `strict`
    pub references: Vec<Check>,
    pub patterns: Vec<PatternValidation>,
    pub gradients: Vec<GradientProbe>,
    pub efficiency: EfficiencyPair,
    pub passed: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> Vec<&Check> {
        let refs = self.references.iter().filter(|_| self.strict);
        self.checks.iter().chain(refs).filter(|c| !c.passed).collect()
    }
}

fn max_abs_diff(a: &TwoModeState<f64>, b: &TwoModeState<f64>) -> f64 {
    a.amps().iter().zip(b.amps()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn max_abs(a: &TwoModeState<f64>) -> f64 {
    a.amps().iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn total_photons(s: &TwoModeState<f64>) -> f64 {
    number_moments(s, Mode::Zero).0 + number_moments(s, Mode::One).0
}

/// Blocked beamsplitter against the dense exponential, normalized by the
/// largest amplitude of the input.
pub fn two_path_error(state: &TwoModeState<f64>, theta: f64, phi: f64) -> f64 {
    let c = state.cutoff();
    let fast = Beamsplitter::new(theta, phi, c).apply(state);
    let dense = apply_dense(&dense_beamsplitter(theta, phi, c), state);
    max_abs_diff(&fast, &dense) / max_abs(state)
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc }).0
}

/// Value and gradient of `P(pattern)` at `phi`.
pub fn probability_gradient(
    params: &CircuitParams<f64>,
    phi: f64,
    pattern: Pattern,
    c: Cutoff,
) -> Result<(f64, Gradient8)> {
    grad(|q| Circuit::new(q, c).probability(Dual8::constant(phi), pattern), params)
}

pub fn run_validate(cfg: &RunConfig, strict: bool) -> Result<ValidationReport> {
    let c = cfg.cutoff()?;
    let n = cfg.n;
    let (params, _) = afek_init(n)?;
    let set = PatternSet::monitored(n)?;
    let mut checks = Vec::new();

    let input = prepare_input(&params, c);
    let probe = prepare_probe(&params, c);
    checks.push(Check::below("input leakage", input.norm_deficit(), LEAKAGE_LIMIT));
    checks.push(Check::below("probe leakage", probe.norm_deficit(), LEAKAGE_LIMIT));
    let out = Circuit::new(&params, c).output(std::f64::consts::FRAC_PI_4);
    checks.push(Check::below("unitarity", (out.norm_sqr() - input.norm_sqr()).abs(), 1e-12));
    checks.push(Check::below("photon-number conservation", (total_photons(&out) - total_photons(&input)).abs(), 1e-10));
    checks.push(Check::below(
        "two-path beamsplitter 1",
        two_path_error(&input, params.theta1, params.phi1),
        TWO_PATH_LIMIT,
    ));
    checks.push(Check::below(
        "two-path beamsplitter 2",
        two_path_error(&probe, params.theta2, params.phi2),
        TWO_PATH_LIMIT,
    ));

    let scan = scan_fringe(&params, n, &set.patterns, cfg.scan_points, c)?;
    let profiles = scan_profiles(&scan, &cfg.cfi);
    let mut patterns = Vec::new();
    for ((&pattern, probs), prof) in set.patterns.iter().zip(&scan.probs).zip(&profiles) {
        let fft = fft_fringe_check(probs, true);
        checks.push(Check::equal(format!("fft dominant {pattern:?}"), fft.dominant_freq as f64, n as f64));
        if n == 2 {
            checks.push(Check::below(format!("fft harmonics {pattern:?}"), fft.harmonic_ratio, HARMONIC_LIMIT));
        }
        patterns.push(PatternValidation {
            pattern,
            fft,
            f_peak_raw: prof.f_peak_raw,
            f_norm_over_n2: prof.f_peak_norm.map(|f| f / (n * n) as f64),
        });
    }

    // dual and plain evaluation of the same probability
    let phi = 0.3;
    let plain = Circuit::new(&params, c).probability(phi, set.patterns[0])?;
    let dual = Circuit::new(&seed(&params), c).probability(Dual8::constant(phi), set.patterns[0])?;
    checks.push(Check::below("dual vs plain value", (plain - dual.v).abs(), 1e-12));

    let first = set.patterns[0];
    let p0 = &scan.probs[0];
    let slope: Vec<f64> = grid_derivative(p0, scan.step(), cfg.cfi.endpoints).iter().map(|d| d.abs()).collect();
    let mut gradients = Vec::new();
    for (label, phi) in
        [("zero", 0.0), ("fringe-peak", scan.phis[argmax(p0)]), ("max-slope", scan.phis[argmax(&slope)])]
    {
        let (probability, gradient) = probability_gradient(&params, phi, first, c)?;
        let nonzero = gradient.to_array().iter().filter(|g| g.abs() > GRADIENT_ZERO).count();
        gradients.push(GradientProbe { label: label.into(), phi, pattern: first, probability, gradient, nonzero });
    }

    let efficiency = efficiency_metrics(&params, n, c, cfg.scan_points, &cfg.cfi, cfg.phase_convention)?;
    let mut references = Vec::new();
    if n == 2 {
        for (pat, target) in reference::N2_RAW {
            if let Some(v) = patterns.iter().find(|v| v.pattern == pat) {
                references.push(Check::within_rel(
                    format!("f_peak_raw {pat:?}"),
                    v.f_peak_raw,
                    target,
                    reference::RAW_REL_TOL,
                ));
            }
        }
        for (pat, target) in reference::N2_NORM_OVER_N2 {
            if let Some(v) = patterns.iter().find(|v| v.pattern == pat) {
                let value = v.f_norm_over_n2.unwrap_or(f64::NAN);
                references.push(Check::within(format!("f_norm/N^2 {pat:?}"), value, target, reference::NORM_ABS_TOL));
            }
        }
    }
    references.push(Check::within_rel("qfi", efficiency.selected.qfi, reference::QFI[n - 2], reference::QFI_REL_TOL));
    references.push(Check::within_rel(
        "p_sel",
        efficiency.selected.p_sel,
        reference::P_SEL[n - 2],
        reference::P_SEL_REL_TOL,
    ));

    let mut report =
        ValidationReport { n, cutoff: c, strict, checks, references, patterns, gradients, efficiency, passed: false };
    report.passed = report.failures().is_empty();
    let dir = cfg.ensure_run_dir()?;
    write_json(&dir.join(VALIDATION_FILE), &report)?;
    Ok(report)
}

pub fn run_train(cfg: &RunConfig) -> Result<ResultsBundle> {
    let c = cfg.cutoff()?;
    let (init, _) = afek_init(cfg.n)?;
    for (what, deficit) in
        [("input", prepare_input(&init, c).norm_deficit()), ("probe", prepare_probe(&init, c).norm_deficit())]
    {
        if deficit >= LEAKAGE_LIMIT {
            return Err(Error::Validation(format!("{what} leakage {deficit:e} at the reference init")));
        }
    }
    info!("training N={} at cutoff {} for {} steps", cfg.n, c.dim(), cfg.adam.steps);
    let outcome = train(cfg.n, Some(c), &cfg.train_config())?;
    if outcome.trace.negative_r {
        warn!("squeezing parameter went negative during training");
    }
    let bundle = ResultsBundle::from_outcome(cfg, outcome)?;
    if bundle.norm_deficit.probe_opt >= LEAKAGE_LIMIT {
        warn!("trained probe leaks {:.3e} of its norm past the cutoff", bundle.norm_deficit.probe_opt);
    }
    let e = &bundle.efficiency;
    info!(
        "phi* convention {:?}: afek p_sel {:.4e} at phi {:.4}, trained p_sel {:.4e} at phi {:.4}; alternative gives {:.4e} / {:.4e}",
        e.afek.convention,
        e.afek.selected.p_sel,
        e.afek.selected.phi_star,
        e.opt.selected.p_sel,
        e.opt.selected.phi_star,
        e.afek.alternative.p_sel,
        e.opt.alternative.p_sel,
    );
    write_train_outputs(&cfg.ensure_run_dir()?, &bundle, &cfg.cfi)?;
    Ok(bundle)
}

pub fn write_train_outputs(dir: &Path, bundle: &ResultsBundle, cfi: &CfiOptions) -> Result<()> {
    bundle.check_consistency()?;
    write_json(&dir.join(SUMMARY_FILE), bundle)?;
    write_trace_csv(&dir.join(TRACE_FILE), &bundle.trace)?;
    for (which, scan) in [(Which::Afek, &bundle.fringes_afek), (Which::Trained, &bundle.fringes_trained)] {
        write_fringes_csv(&dir.join(fringes_file(which)), scan, &scan_profiles(scan, cfi))?;
    }
    Ok(())
}

pub fn run_scan(cfg: &RunConfig, which: Which) -> Result<(FringeScan, Vec<CfiProfile>)> {
    let c = cfg.cutoff()?;
    let params = load_params(cfg, which)?;
    let set = PatternSet::monitored(cfg.n)?;
    let scan = scan_fringe(&params, cfg.n, &set.patterns, cfg.scan_points, c)?;
    let profiles = scan_profiles(&scan, &cfg.cfi);
    write_fringes_csv(&cfg.ensure_run_dir()?.join(fringes_file(which)), &scan, &profiles)?;
    Ok((scan, profiles))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfiReport {
    pub n: usize,
    pub which: Which,
    pub qfi: f64,
    pub qfi_over_n2: f64,
    pub mean_n0: f64,
    pub var_n0: f64,
    pub probe_norm_deficit: f64,
}

pub fn run_qfi(cfg: &RunConfig, which: Which) -> Result<QfiReport> {
    let c = cfg.cutoff()?;
    let params = load_params(cfg, which)?;
    let probe = prepare_probe(&params, c);
    let (mean_n0, var_n0) = number_moments(&probe, Mode::Zero);
    let qfi = qfi_probe(&params, c);
    let report = QfiReport {
        n: cfg.n,
        which,
        qfi,
        qfi_over_n2: qfi / (cfg.n * cfg.n) as f64,
        mean_n0,
        var_n0,
        probe_norm_deficit: probe.norm_deficit(),
    };
    write_json(&cfg.ensure_run_dir()?.join(qfi_file(which)), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerReport {
    pub n: usize,
    pub which: Which,
    pub mode: usize,
    /// grid actually evaluated
    pub grid: GridSpec,
    /// largest |W| on the edge of the configured grid
    pub configured_grid_boundary: f64,
    pub max_boundary: f64,
    pub integral: f64,
    pub trace: f64,
    pub max_imag: f64,
    pub min_value: f64,
    pub negativity: f64,
    /// `W(0, 0)` of the vacuum, expected `1/2π`
    pub vacuum_origin: f64,
}

/// Reduced state of `mode` after the first beamsplitter.
pub fn probe_marginal(params: &CircuitParams<f64>, c: Cutoff, mode: Mode) -> SingleModeDensity {
    partial_trace(&prepare_probe(params, c), mode)
}

/// Largest |W| along the edge of `spec`, without filling the interior.
pub fn edge_max(rho: &SingleModeDensity, spec: &GridSpec) -> f64 {
    let axis = spec.axis();
    let (lo, hi) = (spec.min, *axis.last().expect("grid has points"));
    axis.iter()
        .flat_map(|&t| [(t, lo), (t, hi), (lo, t), (hi, t)])
        .map(|(x, p)| wigner_point(rho, x, p).re.abs())
        .fold(0.0, f64::max)
}

pub fn run_wigner(cfg: &RunConfig, which: Which, mode: Mode) -> Result<WignerReport> {
    let c = cfg.cutoff()?;
    let params = load_params(cfg, which)?;
    let rho = probe_marginal(&params, c, mode);
    if rho.trace() < 1.0 - LEAKAGE_LIMIT {
        // a leaky trained probe is still analysed; the trace is recorded
        warn!("probe marginal trace {:.6} below 1 - {LEAKAGE_LIMIT:e}", rho.trace());
        SingleModeDensity { rho: rho.rho.unscale(rho.trace()) }.validate()?;
    } else {
        rho.validate()?;
    }
    let spec = cfg.wigner.covering(&rho);
    let grid = wigner_on(&rho, &spec);
    let neg = negativity(&grid)?;
    let vac = SingleModeDensity::pure(&crate::fock::ModeVector { amps: vec![num_complex::Complex64::new(1.0, 0.0)] });
    let report = WignerReport {
        n: cfg.n,
        which,
        mode: mode.index(),
        grid: spec,
        configured_grid_boundary: edge_max(&rho, &cfg.wigner),
        max_boundary: neg.max_boundary,
        integral: grid.integral(),
        trace: rho.trace(),
        max_imag: grid.max_imag,
        min_value: grid.min_value(),
        negativity: neg.volume,
        vacuum_origin: wigner_point(&vac, 0.0, 0.0).re,
    };
    if report.configured_grid_boundary >= BOUNDARY_LIMIT {
        info!(
            "configured grid edge reaches |W| = {:.2e}; evaluated on [{}, {}] instead",
            report.configured_grid_boundary, spec.min, spec.max
        );
    }
    let dir = cfg.ensure_run_dir()?;
    let (csv, json) = wigner_files(which, mode);
    write_wigner_csv(&dir.join(csv), &grid)?;
    write_json(&dir.join(json), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiStartRecord {
    pub seed: u64,
    pub final_raw_sum: f64,
    /// `|sum − reference| / reference`
    pub relative_deviation: f64,
    pub init: CircuitParams<f64>,
    pub params: CircuitParams<f64>,
    pub final_metrics: Vec<PatternMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiStartReport {
    pub n: usize,
    pub base_seed: u64,
    /// Σ final raw peak CFI when training from the reference init
    pub reference_final_raw_sum: f64,
    pub runs: Vec<MultiStartRecord>,
    pub within_15pct: usize,
    pub within_25pct: usize,
}

pub fn run_multistart(cfg: &RunConfig) -> Result<MultiStartReport> {
    let c = cfg.cutoff()?;
    let tc = cfg.train_config();
    let reference = train(cfg.n, Some(c), &tc)?;
    let reference_final_raw_sum: f64 = reference.trace.final_metrics.iter().map(|m| m.f_peak_raw).sum();
    info!("{} random starts from seed {}", cfg.multistart.seeds, cfg.seed);
    let runs: Vec<MultiStartRecord> =
        multi_start(cfg.n, cfg.multistart.seeds, cfg.seed, &cfg.multistart.ranges, Some(c), &tc)?
            .into_iter()
            .map(|r| MultiStartRecord {
                seed: r.seed,
                final_raw_sum: r.final_raw_sum,
                relative_deviation: (r.final_raw_sum - reference_final_raw_sum).abs() / reference_final_raw_sum,
                init: r.init,
                params: r.params,
                final_metrics: r.final_metrics,
            })
            .collect();
    let within = |tol: f64| runs.iter().filter(|r| r.relative_deviation <= tol).count();
    let report = MultiStartReport {
        n: cfg.n,
        base_seed: cfg.seed,
        reference_final_raw_sum,
        within_15pct: within(0.15),
        within_25pct: within(0.25),
        runs,
    };
    write_json(&cfg.ensure_run_dir()?.join(MULTISTART_FILE), &report)?;
    Ok(report)
}

/// Seconds to collect `n_c` post-selected events at rate `f_rep · p`.
pub fn acquisition_time(n_c: f64, f_rep: f64, p: f64) -> Result<f64> {
    if p <= 0.0 {
        return Err(Error::ZeroSelectionProbability);
    }
    Ok(n_c / (f_rep * p))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Acquisition {
    pub probability: Comparison,
    pub afek_s: f64,
    pub opt_s: f64,
    pub speedup: f64,
    /// √(rate ratio)
    pub dphi_gain: f64,
}

impl Acquisition {
    fn new(probability: Comparison, fc: &FeasibilityConfig, factor: f64) -> Result<Self> {
        let afek_s = acquisition_time(fc.n_c, fc.f_rep, probability.afek * factor)?;
        let opt_s = acquisition_time(fc.n_c, fc.f_rep, probability.opt * factor)?;
        Ok(Acquisition { probability, afek_s, opt_s, speedup: afek_s / opt_s, dphi_gain: probability.ratio().sqrt() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternAcquisition {
    pub pattern: Pattern,
    /// timed at the per-pattern peak probability
    pub times: Acquisition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub n: usize,
    pub config: FeasibilityConfig,
    /// `(1 − η_loss)^N`
    pub loss_factor: f64,
    /// timed at the total post-selection probability
    pub total: Acquisition,
    pub total_lossy: Acquisition,
    pub per_pattern: Vec<PatternAcquisition>,
    pub events_gain: f64,
}

pub fn feasibility(bundle: &ResultsBundle, fc: &FeasibilityConfig) -> Result<FeasibilityReport> {
    if !(0.0..1.0).contains(&fc.eta_loss) {
        return Err(Error::InvalidArgument(format!("eta_loss = {} outside [0, 1)", fc.eta_loss)));
    }
    let loss_factor = (1.0 - fc.eta_loss).powi(bundle.n as i32);
    let per_pattern = bundle
        .patterns
        .iter()
        .map(|r| Ok(PatternAcquisition { pattern: r.pattern, times: Acquisition::new(r.p_max, fc, 1.0)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeasibilityReport {
        n: bundle.n,
        config: *fc,
        loss_factor,
        total: Acquisition::new(bundle.efficiency.p_sel, fc, 1.0)?,
        total_lossy: Acquisition::new(bundle.efficiency.p_sel, fc, loss_factor)?,
        per_pattern,
        events_gain: bundle.efficiency.events_gain,
    })
}

pub fn run_report(cfg: &RunConfig) -> Result<FeasibilityReport> {
    let dir = cfg.run_dir();
    let bundle = load_bundle(&dir)?;
    bundle.check_consistency()?;
    let report = feasibility(&bundle, &cfg.feasibility)?;
    write_json(&dir.join(FEASIBILITY_FILE), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default_protocol() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.scan_points, 400);
        assert_eq!(cfg.estimator.samples, 8);
        assert_eq!(cfg.estimator.beta, 50.0);
        assert_eq!(cfg.estimator.eps_fraction, 0.05);
        assert_eq!(cfg.adam.learning_rate, 0.02);
        assert_eq!(cfg.adam.steps, 100);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("n = 3\nbogus = 1\n").is_err());
        assert!(RunConfig::from_toml_str("[adam]\nlr = 0.1\n").is_err());
    }

    #[test]
    fn config_toml_round_trip() {
        let mut cfg = RunConfig { n: 4, cutoff: Some(20), ..RunConfig::default() };
        cfg.adam.steps = 7;
        cfg.feasibility.eta_loss = 0.05;
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn acquisition_arithmetic() {
        let t = acquisition_time(1e4, 1e4, 0.07).unwrap();
        assert!((t - 14.285714285714286).abs() < 1e-12);
        assert!(matches!(acquisition_time(1e4, 1e4, 0.0), Err(Error::ZeroSelectionProbability)));
    }

    #[test]
    fn comparison_consistency() {
        let c = Comparison::new(0.3125, 0.79);
        assert!(c.is_consistent());
        let bad = Comparison { delta_pct: c.delta_pct + 1e-9, ..c };
        assert!(!bad.is_consistent());
        assert!(OptionalComparison::new(None, Some(1.0)).is_consistent());
        assert_eq!(OptionalComparison::new(None, Some(1.0)).delta_pct, None);
    }
}
