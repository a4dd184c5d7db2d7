use std::path::PathBuf;
use std::process::ExitCode;

use brace_forge::report::Format;
use brace_forge::{Budget, PullbackChoice};
use brace_forge_cli::{exit_code, run, Command, Input, Outcome, RunConfig, DEFAULT_DEPTH};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "brace-forge", version, about = "Exact checks for braces, pre-Lie rings and the modified group of flows")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Brace, pseudobrace or pre-Lie axioms, left series and YBE.
    Verify(Common),
    /// Properties 1, 1', 1'', 2 (braces) or 3 (pre-Lie rings) and their implications.
    Props(Common),
    /// Extract the pre-Lie ring of a brace.
    Extract(Common),
    /// Build and verify the modified group of flows.
    Flows(Common),
    /// Brace -> pre-Lie -> flows, compared with the brace modulo ann(p^4k).
    Roundtrip(Common),
    /// The star operation, f, g and the identities around them.
    Corr(Common),
    /// Build a registered instance and write it as JSON.
    Gen(Common),
    /// Shape, order and basic invariants.
    Info(Common),
}

#[derive(Args)]
struct Common {
    /// Constructor spec, e.g. radical:p=13,n=6,lambda=13.
    #[arg(long = "gen", value_name = "SPEC", conflicts_with = "input", required_unless_present = "input")]
    spec: Option<String>,
    /// Structure file written by `gen`.
    #[arg(long = "in", value_name = "PATH")]
    input: Option<PathBuf>,
    #[arg(long)]
    k: Option<u32>,
    /// Largest exhaustive workload before checks switch to sampling.
    #[arg(long, default_value_t = Budget::default().exhaustive)]
    budget: u64,
    #[arg(long, default_value_t = Budget::default().samples)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// canonical, offset:SEED or offset-raw:SEED.
    #[arg(long, default_value = "canonical", value_parser = parse_choice)]
    choice: PullbackChoice,
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    depth: usize,
    /// human or machine.
    #[arg(long, default_value = "human", value_parser = parse_format)]
    format: Format,
    /// Output file for gen and extract.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_choice(s: &str) -> Result<PullbackChoice, String> {
    PullbackChoice::parse(s).map_err(|e| e.to_string())
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: brace_forge::Error| e.to_string())
}

fn config(command: Command, c: Common) -> RunConfig {
    let input = match (c.spec, c.input) {
        (Some(s), _) => Input::Gen(s),
        (None, Some(p)) => Input::Path(p),
        (None, None) => unreachable!("clap requires one input"),
    };
    RunConfig {
        command,
        input,
        k: c.k,
        budget: Budget { exhaustive: c.budget, samples: c.samples, seed: c.seed },
        choice: c.choice,
        depth: c.depth,
        format: c.format,
        out: c.out,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("BRACE_FORGE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().expect("thread pool is built once");
    }
    let cfg = match cli.command {
        Cmd::Verify(c) => config(Command::Verify, c),
        Cmd::Props(c) => config(Command::Props, c),
        Cmd::Extract(c) => config(Command::Extract, c),
        Cmd::Flows(c) => config(Command::Flows, c),
        Cmd::Roundtrip(c) => config(Command::Roundtrip, c),
        Cmd::Corr(c) => config(Command::Corr, c),
        Cmd::Gen(c) => config(Command::Gen, c),
        Cmd::Info(c) => config(Command::Info, c),
    };
    let result = run(&cfg);
    match &result {
        Ok(Outcome::Report(r)) => print!("{}", r.render(cfg.format)),
        Ok(Outcome::Raw(s)) => print!("{s}"),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
