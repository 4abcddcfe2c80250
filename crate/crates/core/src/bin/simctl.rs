//! Command-line front end for the simulator.
//!
//! Exit codes: 0 ok, 1 usage, 2 config, 3 detector flagged (or replay
//! mismatch), 4 I/O.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use agora::analysis;
use agora::config::{Config, ConfigError};
use agora::engine;
use agora::trace::Trace;

#[derive(Parser)]
#[command(
    name = "simctl",
    version,
    about = "cultural market simulator controller"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the tick count.
        #[arg(long)]
        ticks: Option<u64>,
        /// Output directory; defaults to the config's `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run detectors over a trace file.
    Analyze {
        #[arg(long)]
        trace: PathBuf,
        /// Comma-separated detector list (bubble,fluctuation,transitivity,regime).
        #[arg(long, default_value = "bubble,fluctuation,transitivity,regime")]
        detectors: String,
    },
    /// Write a config scaffold with defaults and a demo catalog.
    GenConfig {
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a trace's embedded config and diff the regenerated bytes.
    Replay {
        #[arg(long)]
        trace: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with exit 0
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let code = match cli.command {
        Command::Run {
            config,
            seed,
            ticks,
            out,
        } => cmd_run(&config, seed, ticks, out.as_deref()),
        Command::Analyze { trace, detectors } => cmd_analyze(&trace, &detectors),
        Command::GenConfig { out } => cmd_gen_config(&out),
        Command::Replay { trace } => cmd_replay(&trace),
    };
    ExitCode::from(code)
}

fn cmd_run(config_path: &Path, seed: Option<u64>, ticks: Option<u64>, out: Option<&Path>) -> u8 {
    let mut config = match Config::load(config_path) {
        Ok(c) => c,
        Err(e) => return config_failure(e),
    };
    let out_dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&config.out_dir));
    let out_dir = out_dir.as_path();
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(ticks) = ticks {
        config.ticks = ticks;
        if let Err(e) = config.validate() {
            return config_failure(e);
        }
    }
    let output = engine::run(&config);
    if let Err(e) = engine::write_outputs(out_dir, &output) {
        eprintln!("cannot write outputs: {e}");
        return 4;
    }
    let completes = output
        .trace
        .records()
        .filter(|r| r.kind == agora::market::RecordKind::Complete)
        .count();
    let bids = output.trace.records().count() - completes;
    println!("ticks = {}", config.ticks);
    println!("agents = {}", config.agents);
    println!(
        "records = {} ({} complete, {} bids)",
        completes + bids,
        completes,
        bids
    );
    println!(
        "minted_total = {}",
        output
            .audits
            .last()
            .map(|a| a.minted_cumulative)
            .unwrap_or(0.0)
    );
    println!("trace = {}", out_dir.join("trace.csv").display());
    0
}

fn config_failure(e: ConfigError) -> u8 {
    eprintln!("{e}");
    e.exit_code() as u8
}

fn cmd_gen_config(out: &Path) -> u8 {
    if let Err(e) = std::fs::write(out, Config::template_text()) {
        eprintln!("cannot write config: {e}");
        return 4;
    }
    println!("wrote {}", out.display());
    0
}

fn cmd_replay(trace_path: &Path) -> u8 {
    let trace = match Trace::read_from_file(trace_path) {
        Ok(t) => t,
        Err(e) => return trace_failure(e),
    };
    match engine::replay_matches(&trace) {
        Ok(true) => {
            println!("replay = identical");
            0
        }
        Ok(false) => {
            println!("replay = MISMATCH");
            3
        }
        Err(e) => config_failure(e),
    }
}

fn trace_failure(e: agora::trace::TraceError) -> u8 {
    eprintln!("{e}");
    match e {
        agora::trace::TraceError::Io(_) => 4,
        agora::trace::TraceError::Parse { .. } => 4,
    }
}

fn cmd_analyze(trace_path: &Path, detectors: &str) -> u8 {
    let trace = match Trace::read_from_file(trace_path) {
        Ok(t) => t,
        Err(e) => return trace_failure(e),
    };
    let config = match Config::parse(&trace.config_text) {
        Ok(c) => c,
        Err(e) => return config_failure(e),
    };
    let report_dir = trace_path.parent().unwrap_or(Path::new("."));

    let mut flagged = false;
    for name in detectors
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
    {
        match name {
            "bubble" => {
                let report =
                    analysis::detect_bubble(&trace, config.bubble_window, config.gain_floor);
                println!("detector = bubble");
                println!("flagged = {}", report.flagged);
                for w in &report.windows {
                    println!(
                        "object = {} onset_tick = {} trades = {} mean_price = {} fundamental = {}",
                        w.object_id, w.onset_tick, w.trades, w.mean_price, w.fundamental
                    );
                }
                flagged |= report.flagged;
                if write_report(report_dir, "bubble", &report).is_err() {
                    return 4;
                }
            }
            "fluctuation" => {
                let reports = fluctuation_reports(&trace, &config);
                println!("detector = fluctuation");
                if reports.is_empty() {
                    println!("flagged = false");
                    println!("note = no ensembles with usable round data");
                }
                for r in &reports {
                    println!(
                        "ensemble = {} full = {} max_ratio = {} flagged = {}",
                        r.ensemble_id, r.full_set_value, r.max_ratio, r.flagged
                    );
                    flagged |= r.flagged;
                }
                if write_report(report_dir, "fluctuation", &reports).is_err() {
                    return 4;
                }
            }
            "transitivity" => {
                let prefs = analysis::preferences_from_settled_prices(&trace);
                let cycles = analysis::detect_transitivity_violations(&prefs);
                println!("detector = transitivity");
                println!("preferences = {}", prefs.len());
                println!("cycles = {}", cycles.len());
                for c in &cycles {
                    println!("cycle = {} > {} > {} > {}", c[0], c[1], c[2], c[0]);
                }
                flagged |= !cycles.is_empty();
                if write_report(report_dir, "transitivity", &cycles).is_err() {
                    return 4;
                }
            }
            "regime" => {
                let points = analysis::valuation_points(&trace);
                println!("detector = regime");
                match analysis::classify_regime(&points, config.variance_ratio, config.outlier_k) {
                    Ok(label) => {
                        println!("points = {}", points.len());
                        println!("label = {}", label.as_str());
                        if write_report(report_dir, "regime", &label).is_err() {
                            return 4;
                        }
                    }
                    Err(e) => {
                        println!("label = null ({e})");
                        if write_report(
                            report_dir,
                            "regime",
                            &Option::<analysis::RegimeLabel>::None,
                        )
                        .is_err()
                        {
                            return 4;
                        }
                    }
                }
            }
            other => {
                eprintln!("unknown detector '{other}'");
                return 1;
            }
        }
    }
    if flagged {
        3
    } else {
        0
    }
}

/// Fluctuation inputs per ensemble: the full-set value is the latest round
/// price; singleton values are mean settled pairwise prices, falling back to
/// the population consensus at the latest snapshot for members that never
/// traded.
fn fluctuation_reports(trace: &Trace, config: &Config) -> Vec<analysis::FluctuationReport> {
    let settled = analysis::mean_settled_prices(trace);
    let prefs = analysis::preferences_from_settled_prices(trace);
    let cycles = analysis::detect_transitivity_violations(&prefs);
    let mut out = Vec::new();
    for spec in &config.ensembles {
        let Some(last_round) = trace.rounds().filter(|r| r.ensemble_id == spec.id).last() else {
            continue;
        };
        let mut subset_values = BTreeMap::new();
        for member in &spec.members {
            let value = settled
                .get(member)
                .copied()
                .or_else(|| analysis::fundamental_value_at(trace, member, trace.max_tick()));
            if let Some(v) = value {
                if v > 0.0 {
                    subset_values.insert(member.clone(), v);
                }
            }
        }
        if subset_values.is_empty() || last_round.offer_price <= 0.0 {
            continue;
        }
        match analysis::detect_fluctuation(
            &spec.id,
            last_round.offer_price,
            &subset_values,
            config.fold_threshold,
        ) {
            Ok(report) => out.push(report.with_cycles(cycles.clone())),
            Err(_) => continue,
        }
    }
    out
}

fn write_report<T: serde::Serialize>(dir: &Path, name: &str, report: &T) -> std::io::Result<()> {
    let path = dir.join(format!("report_{name}.json"));
    let json = serde_json::to_string_pretty(report).expect("reports serialize");
    std::fs::write(&path, json)?;
    println!("report = {}", path.display());
    Ok(())
}
