use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use poisred_cli::{
    exit_code, fixture, run, run_examples, Command, Problem, RunOptions, TheoremChoice,
    EXIT_INPUT_ERROR, FIXTURES,
};
use serde_json::{json, Value};

/// Reduction of graded Poisson structures: constraint checks, reduced
/// brackets, DGLA audits and 2-group actions on pair groupoids.
///
/// Exit status: 0 when every audited condition passes, 1 on a failure,
/// 3 when a condition could not be decided, 4 on unreadable input.
#[derive(Parser)]
#[command(name = "poisred", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Audit the hypotheses of a reduction theorem.
    Check(FileArgs),
    /// Audit the hypotheses and compute the reduced bivector.
    Reduce(FileArgs),
    /// Audit a DGLA, its crossed module and an infinitesimal action.
    DglaCheck(FileArgs),
    /// Integrate the action on the pair groupoid and test its laws.
    ActVerify(FileArgs),
    /// Marsden-Weinstein and global quotients of the pair groupoid.
    MwQuotient(FileArgs),
    /// Run the bundled examples against their expectations.
    Examples {
        /// Only these examples.
        names: Vec<String>,
        /// List the bundled examples and exit.
        #[arg(long)]
        list: bool,
        /// Print the source of one example and exit.
        #[arg(long, value_name = "NAME")]
        show: Option<String>,
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FileArgs {
    /// Problem file; `-` reads standard input.
    #[arg(required_unless_present = "example")]
    file: Option<PathBuf>,
    /// Use a bundled example instead of a file.
    #[arg(long, conflicts_with = "file")]
    example: Option<String>,
    /// Write the JSON report here instead of standard output.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Degree bound for the lift solver.
    #[arg(long)]
    degree_bound: Option<u32>,
    /// Sample count for rank probes and numerical checks.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the theorem: coisotropic, marsden-ratiu, a1, a2, presymplectic.
    #[arg(long, value_parser = parse_theorem)]
    theorem: Option<TheoremChoice>,
}

fn parse_theorem(s: &str) -> Result<TheoremChoice, String> {
    TheoremChoice::from_name(s).ok_or_else(|| {
        "expected one of coisotropic, marsden-ratiu, a1, a2, presymplectic".to_string()
    })
}

fn write_report(path: Option<&Path>, report: &Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_source(args: &FileArgs) -> anyhow::Result<(String, String)> {
    if let Some(name) = &args.example {
        let src = fixture(name).with_context(|| format!("no bundled example named `{name}`"))?;
        return Ok((format!("example:{name}"), src.to_string()));
    }
    let path = args
        .file
        .as_ref()
        .expect("clap requires a file or an example");
    if path.as_os_str() == "-" {
        let src = std::io::read_to_string(std::io::stdin()).context("reading standard input")?;
        return Ok(("<stdin>".into(), src));
    }
    let src = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok((path.display().to_string(), src))
}

fn run_file(cmd: Command, args: &FileArgs) -> u8 {
    let opts = RunOptions {
        degree_bound: args.degree_bound,
        samples: args.samples,
        seed: args.seed,
        theorem: args.theorem,
    };
    let outcome = read_source(args).and_then(|(label, src)| {
        let problem = Problem::parse(&src).map_err(|e| anyhow::anyhow!("{label}: {e}"))?;
        run(cmd, &problem, &opts).map_err(|e| anyhow::anyhow!("{label}: {e}"))
    });
    match outcome {
        Ok(out) => {
            for line in &out.summary {
                eprintln!("{line}");
            }
            if let Err(e) = write_report(args.report.as_deref(), &out.report) {
                eprintln!("error: {e:#}");
                return EXIT_INPUT_ERROR;
            }
            exit_code(out.status)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let report = json!({
                "tool": "poisred",
                "version": env!("CARGO_PKG_VERSION"),
                "command": cmd.name(),
                "status": "ERROR",
                "error": format!("{e:#}"),
            });
            if let Err(e) = write_report(args.report.as_deref(), &report) {
                eprintln!("error: {e:#}");
            }
            EXIT_INPUT_ERROR
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Cmd::Check(a) => run_file(Command::Check, &a),
        Cmd::Reduce(a) => run_file(Command::Reduce, &a),
        Cmd::DglaCheck(a) => run_file(Command::DglaCheck, &a),
        Cmd::ActVerify(a) => run_file(Command::ActVerify, &a),
        Cmd::MwQuotient(a) => run_file(Command::MwQuotient, &a),
        Cmd::Examples {
            names,
            list,
            show,
            report,
        } => {
            if list {
                for (name, _) in FIXTURES {
                    println!("{name}");
                }
                return ExitCode::SUCCESS;
            }
            if let Some(name) = show {
                return match fixture(&name) {
                    Some(src) => {
                        print!("{src}");
                        ExitCode::SUCCESS
                    }
                    None => {
                        eprintln!("error: no bundled example named `{name}`");
                        ExitCode::from(EXIT_INPUT_ERROR)
                    }
                };
            }
            match run_examples(&names) {
                Ok(out) => {
                    for line in &out.summary {
                        eprintln!("{line}");
                    }
                    match write_report(report.as_deref(), &out.report) {
                        Ok(()) if out.matched => 0,
                        Ok(()) => 1,
                        Err(e) => {
                            eprintln!("error: {e:#}");
                            EXIT_INPUT_ERROR
                        }
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_INPUT_ERROR
                }
            }
        }
    };
    ExitCode::from(code)
}
