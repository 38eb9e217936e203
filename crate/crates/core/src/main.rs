use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use noon_metrology::fock::Mode;
use noon_metrology::report::{
    run_multistart, run_qfi, run_report, run_scan, run_train, run_validate, run_wigner, RunConfig, Which,
};
use noon_metrology::Error;

/// Environment variable overriding the output root when `--out` is absent.
const OUT_ENV: &str = "NOON_OUT";

/// Coherent-plus-squeezed NOON interferometry: simulate, train and report.
///
/// Settings come from the TOML file given by --config (every key optional,
/// unknown keys rejected); command-line flags override it. Results go to
/// <out>/n<N>/.
#[derive(Debug, Parser)]
#[command(name = "noon", version)]
struct Cli {
    /// Photon number N, 2 to 5 [default: 2]
    #[arg(long, global = true)]
    n: Option<usize>,

    /// Output root; also settable through NOON_OUT [default: runs]
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// TOML run configuration [default: built-in protocol]
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed for random initializations [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Log progress to stderr (repeat for more detail)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Engine and estimator checks at the reference init; exit 1 on failure
    Validate {
        /// Also fail when a reference comparison misses its tolerance
        #[arg(long)]
        strict: bool,
    },
    /// Write the fringe and CFI profile of each monitored pattern
    Scan {
        #[arg(long, value_enum, default_value_t = Which::Afek)]
        which: Which,
    },
    /// Calibrate, train with Adam and write the results bundle
    Train,
    /// Quantum Fisher information of the probe state
    Qfi {
        #[arg(long, value_enum, default_value_t = Which::Afek)]
        which: Which,
    },
    /// Wigner grid and negativity of one probe mode
    Wigner {
        #[arg(long, value_enum, default_value_t = Which::Afek)]
        which: Which,
        /// Probe mode, 0 or 1
        #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
        mode: u8,
    },
    /// Train from random starts and compare with the reference init
    Multistart {
        /// Number of random starts [default: 5]
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Acquisition-time feasibility from a trained run directory
    Report {
        /// Pulse repetition rate in Hz [default: 10000]
        #[arg(long)]
        f_rep: Option<f64>,
        /// Post-selected counts required [default: 10000]
        #[arg(long)]
        n_c: Option<f64>,
        /// Per-photon loss probability [default: 0]
        #[arg(long)]
        eta_loss: Option<f64>,
    },
}

fn config(cli: &Cli) -> noon_metrology::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.n {
        cfg.n = n;
    }
    if let Some(out) = cli.out.clone().or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)) {
        cfg.out = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::Multistart { seeds: Some(k) } => cfg.multistart.seeds = *k,
        Command::Report { f_rep, n_c, eta_loss } => {
            let f = &mut cfg.feasibility;
            f.f_rep = f_rep.unwrap_or(f.f_rep);
            f.n_c = n_c.unwrap_or(f.n_c);
            f.eta_loss = eta_loss.unwrap_or(f.eta_loss);
        }
        _ => {}
    }
    cfg.cutoff()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> noon_metrology::Result<bool> {
    let cfg = config(cli)?;
    info!("run directory {}", cfg.run_dir().display());
    match &cli.command {
        Command::Validate { strict } => {
            let r = run_validate(&cfg, *strict)?;
            for c in &r.checks {
                println!(
                    "{} {}: {:.3e} (limit {:.3e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.limit
                );
            }
            for c in &r.references {
                let tag = match (c.passed, r.strict) {
                    (true, _) => "PASS",
                    (false, true) => "FAIL",
                    (false, false) => "DIFF",
                };
                println!("{tag} reference {}: deviation {:.3e} (tolerance {:.3e})", c.name, c.value, c.limit);
            }
            for g in &r.gradients {
                println!("gradient of P{:?} at phi = {:.4} ({}): {}/8 nonzero", g.pattern, g.phi, g.label, g.nonzero);
            }
            Ok(r.passed)
        }
        Command::Scan { which } => {
            let (scan, profiles) = run_scan(&cfg, *which)?;
            for (pattern, p) in scan.patterns.iter().zip(&profiles) {
                let norm = p.f_peak_norm.map_or("n/a".to_string(), |f| format!("{f:.4}"));
                println!("{pattern:?}: f_peak_raw {:.4} f_peak_norm {norm} p_max {:.4e}", p.f_peak_raw, p.p_max);
            }
            Ok(true)
        }
        Command::Train => {
            let b = run_train(&cfg)?;
            for r in &b.patterns {
                println!(
                    "{:?}: raw CFI {:.4} -> {:.4} ({:+.1}%), p_max {:.4e} -> {:.4e} ({:+.1}%)",
                    r.pattern,
                    r.f_peak_raw.afek,
                    r.f_peak_raw.opt,
                    r.f_peak_raw.delta_pct,
                    r.p_max.afek,
                    r.p_max.opt,
                    r.p_max.delta_pct
                );
            }
            let e = &b.efficiency;
            println!("QFI {:.4} -> {:.4}; events per pulse x{:.2}", e.qfi.afek, e.qfi.opt, e.events_gain);
            Ok(true)
        }
        Command::Qfi { which } => {
            let r = run_qfi(&cfg, *which)?;
            println!("QFI ({which}) = {:.6} (QFI/N^2 = {:.4})", r.qfi, r.qfi_over_n2);
            Ok(true)
        }
        Command::Wigner { which, mode } => {
            let mode = if *mode == 0 { Mode::Zero } else { Mode::One };
            let r = run_wigner(&cfg, *which, mode)?;
            println!(
                "mode {} ({which}): negativity {:.4e}, integral {:.6}, grid [{}, {}] x {} points, edge |W| {:.2e}",
                r.mode, r.negativity, r.integral, r.grid.min, r.grid.max, r.grid.points, r.max_boundary
            );
            Ok(true)
        }
        Command::Multistart { .. } => {
            let r = run_multistart(&cfg)?;
            for run in &r.runs {
                println!(
                    "seed {}: final raw sum {:.4} ({:.1}% from reference)",
                    run.seed,
                    run.final_raw_sum,
                    100.0 * run.relative_deviation
                );
            }
            println!(
                "{} of {} within 15%, {} within 25% of {:.4}",
                r.within_15pct,
                r.runs.len(),
                r.within_25pct,
                r.reference_final_raw_sum
            );
            Ok(true)
        }
        Command::Report { .. } => {
            let r = run_report(&cfg)?;
            println!(
                "total: {:.1} s -> {:.1} s (x{:.2}); with loss factor {:.3}: {:.1} s -> {:.1} s",
                r.total.afek_s,
                r.total.opt_s,
                r.total.speedup,
                r.loss_factor,
                r.total_lossy.afek_s,
                r.total_lossy.opt_s
            );
            for p in &r.per_pattern {
                println!(
                    "{:?}: {:.1} s -> {:.1} s (x{:.2}), phase uncertainty gain {:.2}",
                    p.pattern, p.times.afek_s, p.times.opt_s, p.times.speedup, p.times.dphi_gain
                );
            }
            Ok(true)
        }
    }
}

fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::UnsupportedPhotonNumber(_)
            | Error::CutoffTooSmall(_)
            | Error::InvalidArgument(_)
            | Error::MissingTrainedParams(_)
            | Error::Config(_)
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_usage_error(&e) { 2 } else { 1 })
        }
    }
}
