use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use canon_core::cli::config::{CheckKind, ConfigError, JobConfig};
use canon_core::cli::fixtures::{self, FIXTURES};
use canon_core::cli::json::{number, reports_to_json, Report};
use canon_core::cli::runner::{run, RunOutcome};
use canon_core::flows::{default_steps, integrate_flow};
use canon_core::phase::{ExtendedPoint, Field, ParamTable, ScalarField};
use canon_core::report::CheckReport;

const CONFIG_ERROR: u8 = 2;

/// Numerical checks of canonical transformations, Hamiltonian flows and
/// Noether symmetries.
#[derive(Parser)]
#[command(name = "canon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Output {
    /// Write the JSON report to this path ("-" for standard output).
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,

    /// Tolerance override: a bare number for every check, or NAME=VALUE.
    #[arg(long = "tol", value_name = "[NAME=]VALUE")]
    tol: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks listed in a configuration file.
    Verify {
        config: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Integrate the flow of one generator from one point.
    Flow {
        /// Generator in q1.., p1.., t.
        #[arg(long)]
        generator: String,
        /// Start point "q1,..,qn,p1,..,pn,t".
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        /// Flow parameter.
        #[arg(long, allow_hyphen_values = true)]
        s: f64,
        /// RK4 steps (default max(1000, ceil(1000 |s|))).
        #[arg(long)]
        steps: Option<usize>,
        /// Parameter binding NAME=VALUE.
        #[arg(long = "param", value_name = "NAME=VALUE")]
        params: Vec<String>,
        #[command(flatten)]
        output: Output,
    },
    /// List the built-in fixtures, show one, or run them.
    Examples {
        name: Option<String>,
        /// Print the fixture's configuration instead of running it.
        #[arg(long)]
        show: bool,
        /// Run every fixture.
        #[arg(long, conflicts_with = "name")]
        all: bool,
        #[command(flatten)]
        output: Output,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify { config, output } => verify(&config, &output),
        Command::Flow { generator, from, s, steps, params, output } => {
            flow(&generator, &from, s, steps, &params, &output)
        }
        Command::Examples { name, show, all, output } => examples(name.as_deref(), show, all, &output),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(CONFIG_ERROR)
        }
    }
}

/// Applies `--tol` overrides to a configuration.
fn apply_tolerances(config: &mut JobConfig, entries: &[String]) -> Result<(), ConfigError> {
    for entry in entries {
        match entry.split_once('=') {
            Some((name, value)) => {
                let kind = CheckKind::from_name(name.trim())
                    .ok_or_else(|| ConfigError::new("--tol", format!("unknown check {name:?}")))?;
                config.tolerances.insert(kind, parse_number("--tol", value)?);
            }
            None => {
                let value = parse_number("--tol", entry)?;
                for kind in CheckKind::ALL {
                    config.tolerances.insert(kind, value);
                }
            }
        }
    }
    Ok(())
}

fn parse_number(path: &str, text: &str) -> Result<f64, ConfigError> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| ConfigError::new(path, format!("{text:?} is not a number")))
}

fn run_config(mut config: JobConfig, output: &Output) -> Result<RunOutcome, ConfigError> {
    apply_tolerances(&mut config, &output.tol)?;
    run(&config.compile()?)
}

fn verify(path: &Path, output: &Output) -> Result<u8, ConfigError> {
    let source = fs::read_to_string(path)
        .map_err(|e| ConfigError::new(path.display().to_string(), e.to_string()))?;
    let outcome = run_config(JobConfig::from_toml(&source)?, output)?;
    emit(std::slice::from_ref(&outcome.report), output, false)?;
    Ok(outcome.exit_code() as u8)
}

fn examples(name: Option<&str>, show: bool, all: bool, output: &Output) -> Result<u8, ConfigError> {
    let selected: Vec<_> = match (name, all) {
        (Some(n), _) => vec![fixtures::find(n).ok_or_else(|| {
            ConfigError::new("examples", format!("no fixture {n:?}; known: {}", fixtures::names().join(", ")))
        })?],
        (None, true) => FIXTURES.iter().collect(),
        (None, false) => {
            for f in &FIXTURES {
                println!("{}", f.name);
                for note in f.notes() {
                    println!("    {note}");
                }
            }
            return Ok(0);
        }
    };
    if show {
        for f in &selected {
            print!("{}", f.source);
        }
        return Ok(0);
    }
    let mut reports = Vec::new();
    let mut code = 0;
    for f in selected {
        let outcome = run_config(f.config(), output)?;
        code = code.max(match outcome.exit_code() {
            0 => 0,
            1 => 1,
            _ => 3,
        });
        reports.push(outcome.report);
    }
    emit(&reports, output, all)?;
    Ok(code)
}

fn flow(
    generator: &str,
    from: &str,
    s: f64,
    steps: Option<usize>,
    params: &[String],
    output: &Output,
) -> Result<u8, ConfigError> {
    let mut table = ParamTable::new();
    for p in params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| ConfigError::new("--param", format!("{p:?} is not NAME=VALUE")))?;
        table.insert(k.trim().to_string(), parse_number("--param", v)?);
    }
    let slots = from
        .split(',')
        .map(|v| parse_number("--from", v))
        .collect::<Result<Vec<f64>, _>>()?;
    if slots.len() < 3 || slots.len() % 2 == 0 {
        return Err(ConfigError::new("--from", "needs q1..qn, p1..pn, t (an odd count of at least 3)"));
    }
    if !s.is_finite() {
        return Err(ConfigError::new("--s", "must be finite"));
    }
    let n = (slots.len() - 1) / 2;
    let f = ScalarField::parse(generator, n, &table).map_err(|e| ConfigError::new("--generator", e.to_string()))?;
    if f.depends_on_s() {
        return Err(ConfigError::new("--generator", "the group parameter s is not allowed here"));
    }
    let steps = steps.unwrap_or_else(|| default_steps(s));
    if steps == 0 {
        return Err(ConfigError::new("--steps", "must be at least 1"));
    }
    let mut tol = 1e-7;
    for entry in &output.tol {
        let value = match entry.split_once('=') {
            Some(("generator-conservation", v)) => v,
            Some((name, _)) => return Err(ConfigError::new("--tol", format!("unknown check {name:?}"))),
            None => entry.as_str(),
        };
        tol = parse_number("--tol", value)?;
    }
    let x0 = ExtendedPoint::from_slots(n, &slots);
    let (report, code) = match flow_report(&f, &x0, s, steps, tol) {
        Ok(r) => {
            let code = if r.pass() { 0 } else { 1 };
            (r, code)
        }
        Err(e) => {
            let code = if e.is_numeric_domain() { 3 } else { 1 };
            (CheckReport::failed("generator-conservation", tol, e.to_string()), code)
        }
    };
    emit(&[Report { fixture: None, checks: vec![report] }], output, false)?;
    Ok(code)
}

/// Integrates the flow and reports how well the generator is conserved
/// along it.
fn flow_report(f: &ScalarField, x0: &ExtendedPoint, s: f64, steps: usize, tol: f64) -> canon_core::Result<CheckReport> {
    let end = integrate_flow(f, x0, s, steps)?;
    let drift = (f.eval_at(&end.slots())? - f.eval_at(&x0.slots())?).abs();
    let list = |v: &[f64]| v.iter().map(|x| number(*x)).collect::<Vec<_>>().join(", ");
    Ok(CheckReport::new("generator-conservation", drift, tol, 1)
        .with_note(format!("s = {}, steps = {steps}", number(s)))
        .with_note(format!("q = [{}]", list(&end.q)))
        .with_note(format!("p = [{}]", list(&end.p)))
        .with_note(format!("t = {}", number(end.t))))
}

/// Prints the human summary and writes JSON where asked. `many` selects
/// the array form.
fn emit(reports: &[Report], output: &Output, many: bool) -> Result<(), ConfigError> {
    let json = if many || reports.len() > 1 {
        reports_to_json(reports)
    } else {
        reports[0].to_json()
    };
    match &output.json {
        Some(p) if p.as_os_str() == "-" => {
            print!("{json}");
            return Ok(());
        }
        Some(p) => fs::write(p, &json).map_err(|e| ConfigError::new(p.display().to_string(), e.to_string()))?,
        None => {}
    }
    for r in reports {
        print_summary(r);
    }
    Ok(())
}

fn print_summary(r: &Report) {
    if let Some(name) = &r.fixture {
        println!("{name}");
    }
    for c in &r.checks {
        let verdict = match c.verdict {
            canon_core::report::Verdict::Pass => "PASS",
            canon_core::report::Verdict::Fail => "FAIL",
            canon_core::report::Verdict::NotApplicable => "N/A ",
        };
        println!(
            "  {verdict} {:<22} max {:<12.3e} tol {:<8.1e} samples {}",
            c.name, c.max_residual, c.tolerance, c.samples
        );
        for note in &c.notes {
            println!("         {note}");
        }
    }
    println!("  {}", if r.pass() { "all checks pass" } else { "some checks fail" });
}
