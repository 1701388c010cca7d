//! Command-line experiment harness: JSON configs in, CSV/JSON files out.
//!
//! Every command is a pure function of its config and seed. Parallel work
//! uses per-item random substreams and ordered reductions, so output bytes do
//! not depend on the thread count.

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use crate::error::{OtocError, Result};
use crate::rng::Seed;

pub use commands::{CommandOutput, OutputFile};
pub use config::load_config;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    ExactCurve,
    ShadowRun,
    GlobalRun,
    VerifyIdentities,
    VarianceAudit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ExactCurve => "exact-curve",
            Command::ShadowRun => "shadow-run",
            Command::GlobalRun => "global-run",
            Command::VerifyIdentities => "verify-identities",
            Command::VarianceAudit => "variance-audit",
        }
    }
}

/// Options shared by every command; flags override the config's globals.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_FAILED_CHECK: i32 = 2;

struct Globals {
    seed: Option<u64>,
    output_path: Option<PathBuf>,
    threads: Option<usize>,
}

macro_rules! globals {
    ($cfg:expr) => {
        Globals {
            seed: $cfg.seed,
            output_path: $cfg.output_path.clone(),
            threads: $cfg.threads,
        }
    };
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(0) => Err(OtocError::Config("threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| OtocError::Config(format!("thread pool: {e}")))?
            .install(f),
    }
}

/// Loads the config, runs the command and returns its files together with
/// the resolved output directory.
pub fn execute(cmd: Command, opts: &RunOptions) -> Result<(PathBuf, CommandOutput)> {
    use commands::*;
    use config::*;

    let path = opts.config.as_path();
    let (globals, job): (Globals, Box<dyn FnOnce(Seed) -> Result<CommandOutput> + Send>) = match cmd {
        Command::ExactCurve => {
            let c: ExactCurveConfig = load_config(path)?;
            (globals!(c), Box::new(move |_| cmd_exact_curve(&c)))
        }
        Command::ShadowRun => {
            let c: ShadowRunConfig = load_config(path)?;
            (globals!(c), Box::new(move |s| cmd_shadow_run(&c, s)))
        }
        Command::GlobalRun => {
            let c: GlobalRunFileConfig = load_config(path)?;
            (globals!(c), Box::new(move |s| cmd_global_run(&c, s)))
        }
        Command::VerifyIdentities => {
            let c: VerifyIdentitiesConfig = load_config(path)?;
            (globals!(c), Box::new(move |s| cmd_verify_identities(&c, s)))
        }
        Command::VarianceAudit => {
            let c: VarianceAuditConfig = load_config(path)?;
            (globals!(c), Box::new(move |s| cmd_variance_audit(&c, s)))
        }
    };
    let seed = Seed(opts.seed.or(globals.seed).unwrap_or(0));
    let out = opts
        .out
        .clone()
        .or(globals.output_path)
        .unwrap_or_else(|| PathBuf::from("."));
    let output = in_pool(opts.threads.or(globals.threads), move || job(seed))?;
    Ok((out, output))
}

/// Writes every file below `dir`, creating subdirectories as needed.
pub fn write_outputs(dir: &Path, output: &CommandOutput) -> Result<()> {
    for f in &output.files {
        let path = dir.join(&f.name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, &f.contents)?;
    }
    Ok(())
}

/// Runs a command end to end and maps the outcome to a process exit code.
pub fn run(cmd: Command, opts: &RunOptions) -> i32 {
    let result = execute(cmd, opts).and_then(|(dir, output)| {
        write_outputs(&dir, &output)?;
        Ok((dir, output))
    });
    match result {
        Ok((dir, output)) => {
            for f in &output.files {
                eprintln!("wrote {}", dir.join(&f.name).display());
            }
            if output.passed {
                EXIT_OK
            } else {
                eprintln!("{}: one or more checks failed", cmd.name());
                EXIT_FAILED_CHECK
            }
        }
        Err(e) => {
            eprintln!("{}: {e}", cmd.name());
            EXIT_CONFIG
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn config_file(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("cfg.json");
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    fn opts(config: PathBuf, threads: usize) -> RunOptions {
        RunOptions {
            config,
            seed: Some(5),
            out: None,
            threads: Some(threads),
        }
    }

    #[test]
    fn exact_curve_columns_and_identities() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config_file(dir.path(), r#"{"n_qubits": 3, "t_grid": {"start": 0, "stop": 4, "step": 0.5}}"#);
        let (_, out) = execute(Command::ExactCurve, &opts(cfg, 2)).unwrap();
        let text = String::from_utf8(out.files[0].contents.clone()).unwrap();
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
        assert_eq!(header, ["t", "C4", "C8", "C12", "L8", "schatten_2", "schatten_4"]);
        let rows: Vec<commands::ExactCurveRow> = rdr.deserialize().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 9);
        assert!((rows[0].c4 - 1.0).abs() < 1e-12 && (rows[0].c12 - 1.0).abs() < 1e-12);
        for r in &rows {
            assert!((r.c8 - (r.l8 - 4.0 * r.c4 - 3.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn thread_count_does_not_change_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config_file(
            dir.path(),
            r#"{"protocol": "mixed", "quantity": "c8", "n_qubits": 2, "shadow_sizes": [12], "repetitions": 3,
                "mode": {"subsampled": 50}, "t_grid": [0.0, 1.0]}"#,
        );
        let (_, a) = execute(Command::ShadowRun, &opts(cfg.clone(), 1)).unwrap();
        let (_, b) = execute(Command::ShadowRun, &opts(cfg, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_errors_exit_one() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config_file(dir.path(), r#"{"n_qubits": 3, "t_grid": [0.0], "bogus": true}"#);
        let mut o = opts(cfg, 1);
        o.out = Some(dir.path().to_path_buf());
        assert_eq!(run(Command::ExactCurve, &o), EXIT_CONFIG);
        o.config = dir.path().join("missing.json");
        assert_eq!(run(Command::ExactCurve, &o), EXIT_CONFIG);
        let cfg = config_file(dir.path(), r#"{"n_qubits": 11, "t_grid": [0.0]}"#);
        o.config = cfg;
        assert_eq!(run(Command::ExactCurve, &o), EXIT_CONFIG);
    }

    #[test]
    fn perturbed_identity_fails_loudly() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config_file(dir.path(), r#"{"perturb": "derangement_sum", "fact2_montecarlo_samples": 2000}"#);
        let mut o = opts(cfg, 2);
        o.out = Some(dir.path().to_path_buf());
        assert_eq!(run(Command::VerifyIdentities, &o), EXIT_FAILED_CHECK);
        let text = std::fs::read_to_string(dir.path().join("identities.json")).unwrap();
        let report: commands::IdentityReport = serde_json::from_str(&text).unwrap();
        assert!(!report.all_pass);
        let failed: Vec<_> = report.identities.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        assert_eq!(failed, ["derangement_sum"]);
        let cfg = config_file(dir.path(), r#"{"perturb": "nonexistent"}"#);
        o.config = cfg;
        assert_eq!(run(Command::VerifyIdentities, &o), EXIT_CONFIG);
    }
}
