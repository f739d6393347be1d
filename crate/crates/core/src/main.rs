use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fogsim::config::{self, ExperimentConfig};
use fogsim::metrics::{compare, replicate};
use fogsim::policy::PolicyKind;
use fogsim::report;
use fogsim::sim::{run_once, RunOptions};

#[derive(Debug, Parser)]
#[command(
    name = "fogsim",
    version,
    about = "Cooperative vs non-cooperative fog placement simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Replicate one policy and write jobs/servers/replications/summary CSVs
    Run(Flags),
    /// Paired replications of both policies, with a table and charts
    Compare(Flags),
    /// Single replication with a per-event trace
    Trace(Flags),
    /// Check a config file and print the resolved settings
    Validate(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

impl From<OnOff> for bool {
    fn from(v: OnOff) -> bool {
        v == OnOff::On
    }
}

#[derive(Debug, Args)]
struct Flags {
    /// Experiment config file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// cooperative | non-cooperative
    #[arg(long)]
    policy: Option<PolicyKind>,
    #[arg(long)]
    replications: Option<usize>,
    /// Base seed; replication i uses seed + i
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: $FOGSIM_OUT, else ./results]
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    charts: Option<OnOff>,
    #[arg(long, value_enum)]
    trace: Option<OnOff>,
}

struct Resolved {
    cfg: ExperimentConfig,
    out: PathBuf,
}

enum Failure {
    Config(String),
    Runtime(String),
}

fn resolve(flags: &Flags) -> Result<Resolved, Failure> {
    let mut cfg = config::validate(&flags.config).map_err(|issues| {
        let mut msg = format!("{}: invalid configuration", flags.config.display());
        for i in issues {
            msg.push_str(&format!("\n  {i}"));
        }
        Failure::Config(msg)
    })?;
    if let Some(p) = flags.policy {
        cfg.policy = p;
    }
    if let Some(n) = flags.replications {
        if n == 0 {
            return Err(Failure::Config("--replications must be >= 1".into()));
        }
        cfg.replications = n;
    }
    if let Some(s) = flags.seed {
        cfg.base_seed = s;
    }
    if let Some(c) = flags.charts {
        cfg.output.charts = c.into();
    }
    if let Some(t) = flags.trace {
        cfg.output.trace = t.into();
    }
    let out = flags
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .or_else(|| std::env::var_os("FOGSIM_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    Ok(Resolved { cfg, out })
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate(flags) => {
            let r = resolve(&flags)?;
            println!("{}: ok", flags.config.display());
            println!("{:#?}", r.cfg);
            Ok(())
        }
        Command::Run(flags) => {
            let Resolved { cfg, out } = resolve(&flags)?;
            let options = RunOptions {
                trace: cfg.output.trace,
                audit: false,
            };
            let rep = replicate(
                &cfg.experiment,
                cfg.policy,
                cfg.replications,
                cfg.base_seed,
                options,
            )
            .map_err(runtime)?;
            report::write_run_dir(&out, &rep).map_err(runtime)?;
            println!(
                "{}: {} replications, mean processing {} ms, mean response {} ms, fleet power {} W -> {}",
                cfg.policy,
                rep.runs.len(),
                fmt_opt(rep.processing.mean),
                fmt_opt(rep.response.mean),
                fmt_opt(rep.power.mean),
                out.display()
            );
            Ok(())
        }
        Command::Compare(flags) => {
            let Resolved { cfg, out } = resolve(&flags)?;
            let options = RunOptions {
                trace: cfg.output.trace,
                audit: false,
            };
            let cmp = compare(&cfg.experiment, cfg.replications, cfg.base_seed, options)
                .map_err(runtime)?;
            report::write_comparison(&out, &cmp, cfg.output.charts).map_err(runtime)?;
            print!("{}", report::comparison_table(&cmp));
            println!("results in {}", out.display());
            Ok(())
        }
        Command::Trace(flags) => {
            if flags.replications.is_some_and(|n| n > 1) {
                return Err(Failure::Config(
                    "trace runs exactly one replication; drop --replications or pass --replications 1".into(),
                ));
            }
            let Resolved { cfg, out } = resolve(&flags)?;
            let options = RunOptions {
                trace: true,
                audit: true,
            };
            let run = run_once(&cfg.experiment, cfg.policy, cfg.base_seed, 0, options)
                .map_err(runtime)?;
            std::fs::create_dir_all(&out).map_err(runtime)?;
            let trace_path = out.join("trace.tsv");
            report::write_trace(&trace_path, run.trace.as_deref().unwrap_or_default())
                .map_err(runtime)?;
            let rep =
                fogsim::metrics::ReplicationReport::from_runs(cfg.policy, cfg.base_seed, vec![run]);
            report::write_jobs(&out.join("jobs.csv"), &[&rep]).map_err(runtime)?;
            println!(
                "{} events traced to {}",
                rep.runs[0].events_processed,
                trace_path.display()
            );
            Ok(())
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.3}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
