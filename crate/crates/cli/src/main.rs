use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use meshsim::engine::RunOptions;
use meshsim::experiment::{self, SweepConfig};
use meshsim::output;
use meshsim::protocols::{ProtocolId, ProtocolKind};
use meshsim::scenario::{parse_scenario, Resolved, Scenario};

#[derive(Parser)]
#[command(name = "meshsim", version, about = "Discrete-event simulator for congestion-aware mesh routing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the run length, in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one protocol.
    Run {
        #[command(flatten)]
        common: Common,
        /// srcr, bp, ebp, cdp or alpha.
        #[arg(long, default_value = "cdp")]
        protocol: String,
        /// Path-1 probability for `--protocol alpha`.
        #[arg(long)]
        alpha: Option<f64>,
        /// Also write the per-packet trace.
        #[arg(long)]
        trace: bool,
    },
    /// Run several protocols on the same scenario and seed.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated protocols; defaults to the scenario's list.
        #[arg(long, value_delimiter = ',')]
        protocol: Vec<String>,
        #[arg(long)]
        trace: bool,
    },
    /// Random source/destination configurations on the scenario's topology.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        protocol: Vec<String>,
        #[arg(long, default_value_t = 100)]
        configurations: usize,
        #[arg(long, default_value_t = 2)]
        flows: usize,
        #[arg(long, default_value_t = 7.0)]
        max_load: f64,
    },
    /// Delay of the α-split baseline against α, plus CDP.
    Alpha {
        #[command(flatten)]
        common: Common,
        /// Comma-separated α values; defaults to the scenario's list.
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
    },
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

fn load(common: &Common) -> Result<Scenario, Failure> {
    let text = std::fs::read_to_string(&common.scenario)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", common.scenario.display())))?;
    let mut sc = parse_scenario(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", common.scenario.display())))?;
    if let Some(seed) = common.seed {
        sc.params.seed = seed;
    }
    if let Some(d) = common.duration {
        sc.params.duration_s = d;
    }
    Ok(sc)
}

fn resolve(sc: &Scenario) -> Result<Resolved, Failure> {
    sc.validate().map_err(|e| Failure::Invalid(e.to_string()))
}

fn protocol(name: &str) -> Result<ProtocolKind, Failure> {
    ProtocolKind::parse(name).ok_or_else(|| Failure::Invalid(format!("unknown protocol `{name}`")))
}

fn protocols(names: &[String], resolved: &Resolved) -> Result<Vec<ProtocolId>, Failure> {
    let kinds = if names.is_empty() {
        resolved.protocols.clone()
    } else {
        names.iter().map(|n| protocol(n)).collect::<Result<Vec<_>, _>>()?
    };
    kinds
        .into_iter()
        .map(|k| {
            experiment::protocol_id(k)
                .ok_or_else(|| Failure::Invalid("use the alpha subcommand for the α-split baseline".into()))
        })
        .collect()
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { common, protocol: name, alpha, trace } => {
            let sc = load(&common)?;
            let resolved = resolve(&sc)?;
            let kind = protocol(&name)?;
            let id = match kind {
                ProtocolKind::Alpha => {
                    let plan = resolved
                        .alpha
                        .as_ref()
                        .ok_or_else(|| Failure::Invalid("scenario has no [alpha] table".into()))?;
                    let a =
                        alpha.ok_or_else(|| Failure::Invalid("--alpha is required with --protocol alpha".into()))?;
                    ProtocolId::AlphaSplit(plan.split(a).map_err(|e| Failure::Invalid(e.to_string()))?)
                }
                k => experiment::protocol_id(k).expect("non-alpha kinds map to a protocol"),
            };
            let opts = RunOptions { trace, ..Default::default() };
            let art = experiment::run(&resolved, &id, opts);
            print_summary(&art.summary);
            report(&output::emit(&art, &common.out).map_err(runtime)?);
        }
        Command::Compare { common, protocol: names, trace } => {
            let sc = load(&common)?;
            let resolved = resolve(&sc)?;
            let ids = protocols(&names, &resolved)?;
            let cmp = experiment::run_compare(&resolved, &ids, RunOptions { trace, ..Default::default() });
            for r in &cmp.runs {
                print_summary(&r.summary);
            }
            for d in &cmp.differentials {
                println!(
                    "{} vs {}: delay differential {} ms, throughput ratio {}",
                    d.candidate,
                    d.baseline,
                    fmt_opt(d.delay_differential_ms),
                    fmt_opt(d.throughput_ratio)
                );
            }
            if cmp.single_hop {
                println!("note: every flow is single-hop; excluded from comparison sets");
            }
            if !cmp.kept {
                println!("note: no protocol delivered 80% of packets; excluded from comparison sets");
            }
            report(&output::emit_comparison(&cmp, &common.out).map_err(runtime)?);
        }
        Command::Sweep { common, protocol: names, configurations, flows, max_load } => {
            let sc = load(&common)?;
            let resolved = resolve(&sc)?;
            let ids = protocols(&names, &resolved)?;
            if max_load.is_nan() || max_load < 0.0 {
                return Err(Failure::Invalid("--max-load must be non-negative".into()));
            }
            let cfg = SweepConfig {
                configurations,
                flows_per_configuration: flows,
                max_load_mbps: max_load,
                seed: sc.params.seed,
            };
            let rep = experiment::random_sweep(&sc, &cfg, &ids).map_err(|e| Failure::Invalid(e.to_string()))?;
            let eligible = rep.entries.iter().filter(|e| e.kept && !e.single_hop).count();
            println!("{} configurations, {eligible} eligible for comparison", rep.entries.len());
            report(&output::emit_sweep(&rep, &common.out).map_err(runtime)?);
        }
        Command::Alpha { common, alpha } => {
            let sc = load(&common)?;
            let resolved = resolve(&sc)?;
            let plan =
                resolved.alpha.as_ref().ok_or_else(|| Failure::Invalid("scenario has no [alpha] table".into()))?;
            let values = if alpha.is_empty() { plan.values.clone() } else { alpha };
            let sweep =
                experiment::alpha_sweep(&resolved, plan, &values).map_err(|e| Failure::Invalid(e.to_string()))?;
            for r in &sweep.rows {
                println!("alpha={:<5} mean delay {} ms", r.alpha, fmt_opt(r.mean_delay_ms));
            }
            println!("cdp        mean delay {} ms", fmt_opt(sweep.cdp_mean_delay_ms));
            report(&output::emit_alpha(&sweep, &common.out).map_err(runtime)?);
        }
    }
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "undefined".to_string(), |v| format!("{v:.3}"))
}

fn print_summary(s: &meshsim::metrics::RunSummary) {
    println!("{:<8} delivered {}/{} mean delay {} ms", s.protocol, s.delivered, s.injected, fmt_opt(s.mean_delay_ms));
    for f in s.flows.iter().filter(|f| !f.background) {
        let loss = f.loss.map_or(0.0, |l| l.total_loss_pct());
        println!(
            "  flow {} {}->{}: delay {} ms, loss {:.2}% (overflow {}, retry {}, loop {})",
            f.flow,
            f.src,
            f.dst,
            fmt_opt(f.mean_delay_ms),
            loss,
            f.ledger.overflow,
            f.ledger.retry,
            f.ledger.looped
        );
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
