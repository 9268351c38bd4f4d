use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use focal_core::registry;
use focal_core::scenario::{self, Outcome, RunError, Scenario};

#[derive(Parser)]
#[command(name = "focal", version, about = "Focal radii and curvature comparisons along geodesics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// First focal times over the configured normal directions.
    FocalRadius(RunArgs),
    /// Trace comparison of a Lagrangian family against a model solution.
    Compare(RunArgs),
    /// Transverse Jacobi equation residuals and trace transfer.
    TransverseCheck(RunArgs),
    /// Run a registered example against its stored values.
    Reproduce {
        id: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// List registered example ids.
    ListExamples,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[command(flatten)]
    out: OutArgs,
    /// Integration step, overriding `[integration] step`.
    #[arg(long, allow_negative_numbers = true)]
    step: Option<f64>,
    /// Pass/fail tolerance, overriding the analysis tolerance.
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
    /// Also write `series.csv`.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct OutArgs {
    /// Output directory for report.json and series.csv.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

struct Style {
    color: bool,
}

impl Style {
    fn detect() -> Self {
        let no_color = std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty());
        Self { color: !no_color && std::io::stdout().is_terminal() }
    }

    fn verdict(&self, passed: bool) -> String {
        let word = if passed { "PASS" } else { "FAIL" };
        match (self.color, passed) {
            (false, _) => word.to_string(),
            (true, true) => format!("\x1b[32m{word}\x1b[0m"),
            (true, false) => format!("\x1b[31m{word}\x1b[0m"),
        }
    }
}

fn load(args: &RunArgs) -> Result<Scenario, RunError> {
    let mut sc = Scenario::load(&args.config).map_err(|mut e| {
        e.message = match e.line {
            Some(l) => {
                let m = format!("{}:{l}: {}", args.config.display(), e.message);
                e.line = None;
                m
            }
            None => format!("{}: {}", args.config.display(), e.message),
        };
        e
    })?;
    if let Some(step) = args.step {
        sc.integration.step = step;
        sc.integration.validate()?;
    }
    if let Some(tol) = args.tol {
        if !(tol > 0.0) {
            return Err(RunError::Config(scenario::ConfigError {
                line: None,
                message: format!("--tol {tol} must be positive"),
            }));
        }
        sc.analysis.tolerance = tol;
        sc.analysis.tol = Some(tol);
    }
    sc.output.csv |= args.csv;
    Ok(sc)
}

fn out_dir(flag: &Option<PathBuf>, sc: Option<&Scenario>) -> PathBuf {
    flag.clone()
        .or_else(|| sc.and_then(|s| s.output.dir.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("focal-out"))
}

fn finish(outcome: &Outcome, dir: &Path, style: &Style) -> ExitCode {
    for line in &outcome.summary {
        println!("{line}");
    }
    if let Err(e) = scenario::write_outputs(outcome, dir) {
        eprintln!("error: writing {}: {e}", dir.display());
        return ExitCode::from(1);
    }
    println!("report written to {}", dir.join("report.json").display());
    println!("{}", style.verdict(outcome.passed));
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn run(args: &RunArgs, style: &Style, f: fn(&Scenario) -> Result<Outcome, RunError>) -> ExitCode {
    let result = load(args).and_then(|sc| f(&sc).map(|o| (o, sc)));
    match result {
        Ok((outcome, sc)) => finish(&outcome, &out_dir(&args.out.out, Some(&sc)), style),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    // Usage errors share exit code 1 with config errors; 2 means a failed check.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let style = Style::detect();
    match cli.command {
        Command::FocalRadius(a) => run(&a, &style, scenario::run_focal_radius),
        Command::Compare(a) => run(&a, &style, scenario::run_compare),
        Command::TransverseCheck(a) => run(&a, &style, scenario::run_transverse_check),
        Command::ListExamples => {
            let mut out = std::io::stdout().lock();
            for (id, desc) in registry::examples() {
                if writeln!(out, "{id:<14} {desc}").is_err() {
                    break;
                }
            }
            ExitCode::SUCCESS
        }
        Command::Reproduce { id, out } => match registry::reproduce(&id) {
            Ok(report) => {
                println!("{}: {}", report.id, report.description);
                print!("{}", report.table());
                let outcome = Outcome {
                    passed: report.passed(),
                    summary: Vec::new(),
                    report: serde_json::to_value(&report).unwrap_or_default(),
                    csv: None,
                };
                let dir = out_dir(&out.out, None).join(&report.id);
                finish(&outcome, &dir, &style)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
