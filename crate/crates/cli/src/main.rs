//! `isoext`: runs the verification suites on built-in or JSON fixtures.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on
//! configuration or precondition errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use isoext::harness::{self, HarnessError, RunConfig, RunOutcome, Suite, Verdict};

/// Seed used when `--seed` is not given.
const DEFAULT_SEED: u64 = 0;

#[derive(Parser)]
#[command(
    name = "isoext",
    version,
    about = "Numerical checks for local isometry extension"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sampled isometry defect of the fixture map.
    VerifyIsometry(FixtureArgs),
    /// Midpoint preservation on segments inside the domain.
    Midpoint(FixtureArgs),
    /// Extension pipeline and its defect report.
    Extend(FixtureArgs),
    /// Checks that a counterexample fixture is an isometry that does not extend.
    Counterexample {
        /// Fixture name or JSON path.
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Lists the built-in fixtures.
    ListFixtures,
    /// Runs a full report from a JSON config, or all suites on a fixture.
    Report {
        /// RunConfig JSON file.
        #[arg(long, conflicts_with = "fixture")]
        config: Option<PathBuf>,
        #[arg(long, required_unless_present = "config")]
        fixture: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct FixtureArgs {
    /// Built-in fixture name or JSON path.
    #[arg(long)]
    fixture: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol_abs: Option<f64>,
    #[arg(long)]
    tol_rel: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run pipelines even when their preconditions fail.
    #[arg(long)]
    force: bool,
    /// Write (sample, defect) series as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl Common {
    fn apply(self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.tol_abs {
            cfg.tol_abs = t;
        }
        if let Some(t) = self.tol_rel {
            cfg.tol_rel = t;
        }
        if let Some(n) = self.samples {
            cfg.samples = n;
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        if self.csv.is_some() {
            cfg.csv = self.csv;
        }
        cfg.force |= self.force;
    }

    fn config(self, fixture: String, suite: Suite) -> RunConfig {
        let mut cfg = RunConfig::new(fixture, suite, DEFAULT_SEED);
        self.apply(&mut cfg);
        cfg
    }
}

fn emit(outcome: &RunOutcome, cfg: &RunConfig) -> Result<(), HarnessError> {
    match &cfg.out {
        Some(path) => harness::write_report(path, &outcome.report)?,
        None => print!("{}", outcome.report.to_json()),
    }
    if let Some(path) = &cfg.csv {
        harness::write_csv(path, &outcome.series)?;
    }
    for c in &outcome.report.checks {
        eprintln!(
            "[{}] {}/{} = {:e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.suite,
            c.name,
            c.value
        );
    }
    eprintln!("wall time: {:.3} s", outcome.elapsed.as_secs_f64());
    Ok(())
}

fn execute(cfg: RunConfig) -> Result<Verdict, HarnessError> {
    let outcome = harness::run(&cfg)?;
    emit(&outcome, &cfg)?;
    Ok(outcome.report.verdict)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ListFixtures => {
            for (name, description) in harness::list_fixtures() {
                println!("{name:<18} {description}");
            }
            return ExitCode::SUCCESS;
        }
        Command::VerifyIsometry(a) => execute(a.common.config(a.fixture, Suite::Isometry)),
        Command::Midpoint(a) => execute(a.common.config(a.fixture, Suite::Midpoint)),
        Command::Extend(a) => execute(a.common.config(a.fixture, Suite::Extension)),
        Command::Counterexample { name, common } => {
            execute(common.config(name, Suite::Counterexamples))
        }
        Command::Report {
            config,
            fixture,
            common,
        } => match (config, fixture) {
            (Some(path), _) => RunConfig::from_json_file(&path).and_then(|mut cfg| {
                common.apply(&mut cfg);
                execute(cfg)
            }),
            (None, Some(fixture)) => execute(common.config(fixture, Suite::All)),
            (None, None) => unreachable!("clap requires one of --config and --fixture"),
        },
    };
    match result {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
