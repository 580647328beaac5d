use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use weylstrat::cli::{run_scenario, verify_suite, ScenarioConfig, VerifyOptions, EXIT_CONFIG};
use weylstrat::geometries::CATALOG;

#[derive(Parser)]
#[command(name = "weylstrat", version, about = "Curvature invariants and local homogeneity of Riemannian charts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        config: PathBuf,
        /// `section.key=value`, applied before validation
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// output directory, overriding `outputs.dir`
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the property suite and print a pass/fail table.
    Verify {
        #[arg(long, hide = true)]
        corrupt_sign: bool,
    },
    /// List the built-in geometries.
    ListGeometries,
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, overrides, out } => {
            let mut config = match ScenarioConfig::load(&config, &overrides) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return code(EXIT_CONFIG);
                }
            };
            if let Some(dir) = out {
                config.outputs.dir = dir;
            }
            match run_scenario(&config) {
                Ok(outcome) => {
                    let r = &outcome.report;
                    println!("{} ({}): {}", r.geometry, r.chart, r.verdict);
                    println!("max relative spread {:e} over {} invariants", r.homogeneity.max_spread(), r.invariants.len());
                    if let Some(s) = &r.stratification {
                        let hist: Vec<String> = s.rank_histogram.iter().map(|(k, c)| format!("rank {k}: {c}")).collect();
                        println!("{}", hist.join(", "));
                    }
                    for f in &outcome.files {
                        println!("wrote {}", f.display());
                    }
                    if outcome.exit_code != 0 {
                        eprintln!("{:.1}% of grid points flagged", 100.0 * r.flagged_fraction);
                    }
                    code(outcome.exit_code)
                }
                Err(e) => {
                    eprintln!("{e}");
                    code(e.exit_code())
                }
            }
        }
        Command::Verify { corrupt_sign } => {
            let options = VerifyOptions { corrupt_sign, ..VerifyOptions::from_env() };
            let summary = verify_suite(&options);
            println!("{summary}");
            code(if summary.all_passed() { 0 } else { 1 })
        }
        Command::ListGeometries => {
            let width = CATALOG.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
            for (name, description) in CATALOG {
                println!("{name:<width$}  {description}");
            }
            code(0)
        }
    }
}
