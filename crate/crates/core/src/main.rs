use clap::Parser;
use ftsc::cli::{run, Cli, Command};
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (report_path, output) = match &cli.command {
        Command::Extend { common, output, .. } => (common.report.clone(), output.clone()),
        Command::Flow(f) => (f.report.clone(), None),
        Command::Validate(c)
        | Command::BuildAprime(c)
        | Command::BuildIprime(c)
        | Command::Igusa(c)
        | Command::Holonomy(c)
        | Command::Homology(c)
        | Command::Smooth { common: c, .. } => (c.report.clone(), None),
    };
    let out = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("input error: {e}");
            return ExitCode::from(2);
        }
    };
    let json = out.report.to_json();
    let write = |path: &std::path::Path, text: &str| {
        std::fs::write(path, text).map_err(|e| eprintln!("cannot write {}: {e}", path.display())).is_ok()
    };
    match (&out.artifact, output) {
        (Some(a), Some(p)) => {
            if !write(&p, a) {
                return ExitCode::from(2);
            }
        }
        (Some(a), None) => println!("{a}"),
        _ => {}
    }
    match report_path {
        Some(p) => {
            if !write(&p, &json) {
                return ExitCode::from(2);
            }
        }
        None if out.artifact.is_none() => println!("{json}"),
        None => {}
    }
    for c in out.report.checks.iter().filter(|c| !c.passed) {
        eprintln!("FAIL {} ({} certificates)", c.name, c.certificates.len());
    }
    ExitCode::from(out.report.exit_code() as u8)
}
