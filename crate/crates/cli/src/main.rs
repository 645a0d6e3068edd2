use std::process::ExitCode;

use clap::Parser;
use fraclab_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = cli
        .resolve_config()
        .and_then(|config| run(cli.command, &config));
    match outcome {
        Ok(report) => {
            for check in &report.checks {
                println!(
                    "{:<4} {}: {}",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.name,
                    check.detail
                );
            }
            println!(
                "{}: {} ({:.1}s), report in {}",
                report.command,
                if report.passed {
                    "all checks passed"
                } else {
                    "some checks failed"
                },
                report.elapsed_seconds,
                report.config.out.join(&report.command).display()
            );
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
