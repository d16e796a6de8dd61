use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use transim::metrics::{self, MetricsReport};
use transim::scenario::{load_scenario, parse_rate, ScenarioConfig};
use transim::sim::Simulation;
use transim::transition::MechanismPhase;
use transim::SimTime;

#[derive(Parser)]
#[command(
    name = "transim",
    version,
    about = "Packet-level simulator for IPv4/IPv6 transition mechanisms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario (or every phase of it) and write the report
    Run(RunArgs),
    /// Run all phases under one seed and check the expected orderings
    Compare(CompareArgs),
}

#[derive(Args)]
struct Common {
    /// Scenario file; the built-in reference network when omitted
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated seconds
    #[arg(long)]
    duration: Option<f64>,
    /// Comma-separated edge uplink rates, e.g. 1M,2M,5M
    #[arg(long, value_delimiter = ',')]
    rate: Vec<String>,
    /// Output directory for report.csv and the series files
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep the warm-up interval in the aggregates
    #[arg(long)]
    no_warmup_cut: bool,
    /// Also write one SVG line plot per metric
    #[arg(long)]
    plots: bool,
    /// Exit with status 2 when an expected ordering does not hold
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct RunArgs {
    /// ipv4, ipv6, dualstack, manual, 6to4 or all
    #[arg(long)]
    phase: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CompareArgs {
    /// Compare all five phases (the default)
    #[arg(long)]
    all_phases: bool,
    #[command(flatten)]
    common: Common,
}

fn base_config(common: &Common, phase: Option<MechanismPhase>) -> Result<ScenarioConfig> {
    let mut cfg = match &common.scenario {
        Some(path) => load_scenario(path).with_context(|| format!("{}", path.display()))?,
        None => ScenarioConfig::reference(phase.unwrap_or(MechanismPhase::Ipv4)),
    };
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    if let Some(secs) = common.duration {
        if !(secs.is_finite() && secs > 0.0) {
            bail!("--duration must be a positive number of seconds");
        }
        cfg.run.duration = SimTime::from_secs_f64(secs);
        if cfg.run.warmup >= cfg.run.duration {
            cfg.run.warmup = SimTime::from_nanos(cfg.run.duration.as_nanos() / 10);
            info!("warm-up shortened to {} for the short run", cfg.run.warmup);
        }
    }
    Ok(cfg)
}

fn expand(cfg: ScenarioConfig, phases: &[MechanismPhase], rates: &[String]) -> Result<Vec<ScenarioConfig>> {
    let rates: Vec<Option<u64>> = if rates.is_empty() {
        vec![cfg.run.data_rate]
    } else {
        rates
            .iter()
            .map(|r| parse_rate(r).map(Some).with_context(|| format!("bad rate {r:?}")))
            .collect::<Result<_>>()?
    };
    let mut out = Vec::new();
    for &rate in &rates {
        for &phase in phases {
            let mut c = cfg.with_phase(phase);
            c.run.data_rate = rate;
            c.validate()?;
            out.push(c);
        }
    }
    Ok(out)
}

fn simulate_all(configs: Vec<ScenarioConfig>, warmup_cut: bool) -> Result<Vec<MetricsReport>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .into_iter()
            .map(|cfg| {
                s.spawn(move || -> Result<MetricsReport> {
                    info!(
                        "running {} seed {} for {}",
                        cfg.run.phase, cfg.run.seed, cfg.run.duration
                    );
                    let run = Simulation::new(cfg)?.run();
                    info!("{} finished after {} events", run.phase, run.counters.events);
                    Ok(metrics::aggregate(&run, warmup_cut))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}

fn write_outputs(reports: &[MetricsReport], out: Option<&Path>, plots: bool) -> Result<()> {
    let report = metrics::report_csv(reports);
    let Some(dir) = out else {
        print!("{report}");
        return Ok(());
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("report.csv"), report)?;
    for metric in metrics::series_metrics(reports) {
        fs::write(
            dir.join(format!("series_{metric}.csv")),
            metrics::series_csv(reports, &metric),
        )?;
        if plots {
            fs::write(dir.join(format!("{metric}.svg")), metrics::svg_plot(reports, &metric))?;
        }
    }
    info!("wrote {}", dir.display());
    Ok(())
}

/// Prints one line per ordering check; true when every group passed.
fn check_orderings(reports: &[MetricsReport]) -> Result<bool> {
    let mut ok = true;
    let mut rates: Vec<Option<u64>> = reports.iter().map(|r| r.data_rate).collect();
    rates.dedup();
    for rate in rates {
        let group: Vec<MetricsReport> = reports.iter().filter(|r| r.data_rate == rate).cloned().collect();
        if group.len() < 2 {
            continue;
        }
        let cmp = metrics::compare_phases(&group)?;
        for c in &cmp.checks {
            println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        ok &= cmp.all_pass();
    }
    Ok(ok)
}

fn execute(cli: Cli) -> Result<bool> {
    let (common, phases) = match &cli.command {
        Command::Run(a) => {
            let phases = match a.phase.as_deref() {
                Some("all") => Some(MechanismPhase::ALL.to_vec()),
                Some(p) => Some(vec![p.parse::<MechanismPhase>().map_err(anyhow::Error::msg)?]),
                None => None,
            };
            (&a.common, phases)
        }
        Command::Compare(a) => (&a.common, Some(MechanismPhase::ALL.to_vec())),
    };
    let cfg = base_config(common, phases.as_ref().and_then(|p| p.first().copied()))?;
    let phases = phases.unwrap_or_else(|| vec![cfg.run.phase]);
    let configs = expand(cfg, &phases, &common.rate)?;
    let reports = simulate_all(configs, !common.no_warmup_cut)?;
    let compare = matches!(cli.command, Command::Compare(_));
    if !compare || common.out.is_some() {
        write_outputs(&reports, common.out.as_deref(), common.plots)?;
    }

    if compare || common.check {
        let ok = check_orderings(&reports)?;
        return Ok(ok || !common.check);
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("TRANSIM_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
