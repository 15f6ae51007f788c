use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use modrep2_core::glam::Lambda;
use modrep2_core::tring::Backend;
use repcli::{render, run, Command, Format, JobError, JobSpec, DEFAULT_CAP};

/// Characters of automorphism groups of rank-2 modules over Z/p^l and F_q[t]/(t^l).
#[derive(Parser, Debug)]
#[command(name = "modrep2", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[arg(long, default_value = "padic")]
    backend: Backend,
    /// Residue field size (a prime for padic, a prime power for tpoly).
    #[arg(long, alias = "p")]
    q: u32,
    /// Partition as "l1,l2".
    #[arg(long)]
    lambda: Lambda,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Refuse groups larger than this.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u64,
    #[arg(long, env = "MODREP2_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let job = JobSpec {
        command: cli.command,
        backend: cli.backend,
        q: cli.q,
        lambda: cli.lambda,
        out: cli.out,
        format: cli.format,
        cap: cli.cap,
        threads: cli.threads,
    };
    let report = match run(&job) {
        Ok(r) => r,
        Err(JobError::Usage(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
        Err(JobError::Other(e)) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let text = render(&report, job.format);
    let written = match &job.out {
        Some(path) => std::fs::write(path, &text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(1);
    }
    for c in report.failures() {
        eprintln!("FAIL {}: expected {} computed {}", c.name, c.expected, c.computed);
    }
    ExitCode::from(report.exit_code() as u8)
}
