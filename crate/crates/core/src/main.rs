use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fronttrack::config::RunConfig;
use fronttrack::run::{self, Files};
use fronttrack::{Error, IsentropicEuler, Result, State};

#[derive(Parser)]
#[command(name = "fronttrack", version, about = "Front tracking with shifted shocks for isentropic Euler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Refinement index: the cell size is divided by 2^level.
    #[arg(long, global = true)]
    level: Option<u32>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one Riemann problem; states are given as `rho,mom`.
    Riemann {
        #[arg(long, value_parser = parse_state, allow_hyphen_values = true)]
        left: State,
        #[arg(long, value_parser = parse_state, allow_hyphen_values = true)]
        right: State,
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Run front tracking and write snapshots, the event log and functionals.
    Evolve,
    /// Run the weighted relative-entropy stability experiment.
    Stability,
    /// Run a property suite: interactions, weights or conditionH.
    Check { suite: String },
    /// Sweep one parameter in parallel and write an aggregated CSV.
    Sweep {
        #[arg(long)]
        parameter: Option<String>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<f64>>,
        /// `evolve` or `stability`.
        #[arg(long)]
        with: Option<String>,
    },
}

fn parse_state(s: &str) -> std::result::Result<State, String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [a, b] => {
            let rho = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
            let mom = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
            Ok(State::new(rho, mom))
        }
        _ => Err(format!("expected `rho,mom`, got {s:?}")),
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(l) = cli.level {
        cfg.run.level = l;
    }
    if let Some(o) = &cli.out {
        cfg.run.out = Some(o.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    PathBuf::from(cfg.run.out.clone().unwrap_or_else(|| "out".into()))
}

fn write_files(dir: &Path, files: &Files, quiet: bool) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        if !quiet {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

/// Returns whether every hard invariant held.
fn execute(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Riemann { left, right, gamma } => {
            let mut cfg = match &cli.config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            if let Some(g) = gamma {
                cfg.system.gamma = *g;
            }
            let sys = cfg.system.build()?;
            let rep = run::riemann_report(&sys, *left, *right, &cfg.engine.riemann)?;
            let text = serde_json::to_string_pretty(&rep).map_err(|e| Error::Parse(e.to_string()))?;
            if let Some(dir) = &cli.out {
                write_files(dir, &vec![("riemann.json".into(), text.clone())], cli.quiet)?;
            }
            if !cli.quiet {
                println!("{text}");
            }
            Ok(true)
        }
        Command::Evolve => {
            let cfg = load(cli)?;
            let sys = cfg.system.build()?;
            let ev = run::evolve(&sys, &cfg)?;
            write_files(&out_dir(&cfg), &run::evolve_files(&ev)?, cli.quiet)?;
            if !cli.quiet {
                let last = ev.rows.last().unwrap();
                println!(
                    "events {}  L+kQ {:.6e} -> {:.6e}  sup np_total {:.3e}  hard invariants {}",
                    last.events,
                    ev.rows[0].lq,
                    last.lq,
                    ev.sup_np(),
                    verdict(ev.hard_invariants_hold())
                );
            }
            Ok(ev.hard_invariants_hold())
        }
        Command::Stability => {
            let cfg = load(cli)?;
            let sys = cfg.system.build()?;
            let rep = run::stability(&sys, &cfg)?;
            write_files(&out_dir(&cfg), &run::stability_files(&rep)?, cli.quiet)?;
            if !cli.quiet {
                println!(
                    "E(0) {:.4e}  budget {:.4e}  E <= 4 E(0) + budget: {}  positive D fraction {:.4}  hard invariants {}",
                    rep.e0,
                    rep.final_budget(),
                    rep.bound_holds,
                    rep.positive_d_fraction(),
                    verdict(rep.hard_invariants_hold())
                );
            }
            Ok(rep.hard_invariants_hold())
        }
        Command::Check { suite } => {
            let cfg = load(cli)?;
            let sys = cfg.system.build()?;
            let rep = run::check(&sys, &cfg, suite)?;
            write_files(&out_dir(&cfg), &vec![(format!("check_{suite}.json"), rep.to_json()?)], cli.quiet)?;
            if !cli.quiet {
                for i in &rep.items {
                    println!("{} {}: {:.6e} (bound {:.6e})", verdict(i.passed), i.name, i.value, i.bound);
                }
            }
            Ok(rep.passed)
        }
        Command::Sweep { parameter, values, with } => {
            let mut cfg = load(cli)?;
            if let Some(p) = parameter {
                cfg.sweep.parameter = p.clone();
            }
            if let Some(v) = values {
                cfg.sweep.values = v.clone();
            }
            if let Some(w) = with {
                cfg.sweep.command = w.clone();
            }
            let sys: IsentropicEuler = cfg.system.build()?;
            let csv = run::sweep(&sys, &cfg)?;
            let name = format!("sweep_{}.csv", cfg.sweep.parameter);
            write_files(&out_dir(&cfg), &vec![(name, csv)], cli.quiet)?;
            Ok(true)
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("hard invariant violated");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
