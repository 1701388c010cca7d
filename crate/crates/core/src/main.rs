use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use otoc_core::harness::{run, Command, RunOptions};

#[derive(Parser)]
#[command(name = "otoc", version, about = "Exact and shadow-estimated higher-point OTOCs")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact C4, C8, C12, L8 and commutator Schatten norms over a time grid.
    ExactCurve(Common),
    /// Classical-shadow estimates against the exact values.
    ShadowRun(Common),
    /// Global random-unitary protocol for C4 and C8.
    GlobalRun(Common),
    /// Deterministic identity suite; exits with 2 on any failure.
    VerifyIdentities(Common),
    /// Empirical variances against their bounds; exits with 2 on any failure.
    VarianceAudit(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: config output_path, then the working directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, c) = match cli.command {
        Cmd::ExactCurve(c) => (Command::ExactCurve, c),
        Cmd::ShadowRun(c) => (Command::ShadowRun, c),
        Cmd::GlobalRun(c) => (Command::GlobalRun, c),
        Cmd::VerifyIdentities(c) => (Command::VerifyIdentities, c),
        Cmd::VarianceAudit(c) => (Command::VarianceAudit, c),
    };
    let opts = RunOptions {
        config: c.config,
        seed: c.seed,
        out: c.out,
        threads: c.threads,
    };
    ExitCode::from(run(cmd, &opts) as u8)
}
