use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hybridizer::driver::{self, Mode, RunConfig};
use hybridizer::names::QualifiedName;
use hybridizer::refactor::PreconditionCode;

/// Converts eager TensorFlow 2 functions to `tf.function` and tunes or
/// removes existing hybridization.
#[derive(Parser, Debug)]
#[command(name = "hybridizer", version)]
struct Cli {
    /// Files or directories to analyze.
    #[arg(default_value = ".")]
    paths: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Both)]
    mode: Mode,
    /// Write verified changes in place.
    #[arg(long)]
    apply: bool,
    /// Print unified diffs to standard output.
    #[arg(long)]
    diff: bool,
    /// Treat parameters flowing into tensor APIs as tensors, recording assumptions.
    #[arg(long)]
    speculative: bool,
    /// Plan edits that depend on speculative assumptions (implies --speculative).
    #[arg(long)]
    accept_assumptions: bool,
    /// Extra API knowledge base entries.
    #[arg(long, value_name = "FILE")]
    kb: Option<PathBuf>,
    /// Additional fully qualified names to treat as the hybridization API.
    #[arg(long = "api-fqn", value_name = "FQN", value_parser = parse_fqn)]
    api_fqn: Vec<QualifiedName>,
    /// Write the JSON report here.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// Only report functions failing this precondition (C1..C8).
    #[arg(long = "fail-on", value_name = "CODE")]
    fail_on: Option<PreconditionCode>,
}

fn parse_fqn(s: &str) -> Result<QualifiedName, String> {
    QualifiedName::parse(s).ok_or_else(|| format!("invalid qualified name `{s}`"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { driver::EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let config = RunConfig {
        paths: cli.paths,
        mode: cli.mode,
        apply: cli.apply,
        diff: cli.diff,
        speculative: cli.speculative,
        accept_assumptions: cli.accept_assumptions,
        kb_path: cli.kb,
        extra_api_fqns: cli.api_fqn,
        report_path: cli.report,
        fail_on: cli.fail_on,
    };
    let out = driver::run(&config);
    for d in &out.diagnostics {
        eprintln!("hybridizer: {d}");
    }
    for f in &out.report.functions {
        eprintln!("{}", driver::describe(f));
    }
    print!("{}", out.diff);
    ExitCode::from(out.exit_code as u8)
}
