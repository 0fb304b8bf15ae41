use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use edgebench_core::cam::{parse_cam, validate_cam, CamError};
use edgebench_core::fixtures::{fixture, FIXTURE_NAMES};
use edgebench_core::metrics::{mip_table, parse_ledger};
use edgebench_core::model::{ActionLedger, ExperimentSpec};
use edgebench_core::probes::execute_simulated;
use edgebench_core::report::{
    build_report, check_consistency, emit_csv, emit_json, emit_plot_data, report_from_json,
    KpiReport, LedgerPair,
};
use edgebench_core::specdoc::parse_experiment;

const EXIT_INPUT: u8 = 1;
const EXIT_INCONSISTENT: u8 = 2;
const EXIT_CAM: u8 = 3;

#[derive(Parser)]
#[command(
    name = "edgebench",
    version,
    about = "Edge orchestration benchmarking harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Plot,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec on the simulator and write the report.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, env = "EDGEBENCH_OUT", default_value = "out")]
        out: PathBuf,
        /// Overrides the seed in the spec.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(
            long,
            value_enum,
            value_delimiter = ',',
            default_value = "csv,json,plot"
        )]
        format: Vec<Format>,
    },
    /// Check a CAM manifest.
    ValidateCam { path: PathBuf },
    /// Manual intervention percentage per phase from two action ledgers.
    Mip {
        #[arg(long)]
        treatment: PathBuf,
        #[arg(long)]
        baseline: PathBuf,
    },
    /// Re-check a saved report.json and re-emit its tables.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, env = "EDGEBENCH_OUT", default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,plot")]
        format: Vec<Format>,
    },
    /// Write a built-in calibrated bundle.
    Fixtures {
        name: String,
        #[arg(long, env = "EDGEBENCH_OUT", default_value = "out")]
        out: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn load_ledger(path: &Path, label: &str) -> Result<ActionLedger, Failure> {
    parse_ledger(&read(path)?, label)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_spec(path: &Path) -> Result<ExperimentSpec, Failure> {
    parse_experiment(&read(path)?).map_err(|e| Failure::input(format!("{}:\n{e}", path.display())))
}

fn emit(report: &KpiReport, out: &Path, formats: &[Format]) -> Result<(), Failure> {
    let io = |e: edgebench_core::report::ReportError| Failure::input(e.to_string());
    let mut written = Vec::new();
    if formats.contains(&Format::Csv) {
        written.extend(emit_csv(report, out).map_err(io)?);
    }
    if formats.contains(&Format::Json) {
        written.push(emit_json(report, out).map_err(io)?);
    }
    if formats.contains(&Format::Plot) {
        written.extend(emit_plot_data(report, out).map_err(io)?);
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn check(report: &KpiReport) -> Result<(), Failure> {
    let violations = check_consistency(report);
    if violations.is_empty() {
        return Ok(());
    }
    let lines: Vec<_> = violations.iter().map(|v| format!("  {v}")).collect();
    Err(Failure {
        code: EXIT_INCONSISTENT,
        message: format!("report is inconsistent:\n{}", lines.join("\n")),
    })
}

fn run(spec_path: &Path, out: &Path, seed: Option<u64>, formats: &[Format]) -> Result<(), Failure> {
    let mut spec = load_spec(spec_path)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let ledgers = match &spec.ledgers {
        Some(refs) => {
            let dir = spec_path.parent().unwrap_or(Path::new("."));
            Some((
                load_ledger(&dir.join(&refs.baseline), &spec.baseline.label)?,
                load_ledger(&dir.join(&refs.treatment), &spec.treatment.label)?,
            ))
        }
        None => None,
    };
    let data =
        execute_simulated(&spec).map_err(|e| Failure::input(format!("campaign failed: {e}")))?;
    let pair = ledgers.as_ref().map(|(b, t)| LedgerPair {
        treatment: t,
        baseline: b,
    });
    let report = build_report(&spec, &data, pair).map_err(|e| Failure::input(e.to_string()))?;

    let raw = out.join("raw");
    fs::create_dir_all(&raw)
        .map_err(|e| Failure::input(format!("cannot create {}: {e}", raw.display())))?;
    let raw_file = raw.join("campaign.json");
    let text = serde_json::to_string_pretty(&data).expect("campaign data serializes");
    fs::write(&raw_file, text + "\n")
        .map_err(|e| Failure::input(format!("cannot write {}: {e}", raw_file.display())))?;

    for f in &report.failures {
        eprintln!(
            "run failed: scale {} repetition {} ({}): {}",
            f.scale, f.repetition, f.label, f.reason
        );
    }
    check(&report)?;
    emit(&report, out, formats)
}

fn validate(path: &Path) -> Result<(), Failure> {
    let text = read(path)?;
    let parsed = parse_cam(&text).map_err(|e| Failure {
        code: EXIT_CAM,
        message: format!("{}: {e}", path.display()),
    })?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    let violations = validate_cam(&parsed.manifest);
    if !violations.is_empty() {
        return Err(Failure {
            code: EXIT_CAM,
            message: format!("{}: {}", path.display(), CamError::Violations(violations)),
        });
    }
    println!("{}: valid", path.display());
    Ok(())
}

fn mip(treatment: &Path, baseline: &Path) -> Result<(), Failure> {
    let t = load_ledger(treatment, "treatment")?;
    let b = load_ledger(baseline, "baseline")?;
    let rows = mip_table(&t, &b);
    if rows.is_empty() {
        return Err(Failure::input("the ledgers share no phase"));
    }
    println!("phase,c_a,k_a,mip_pct,note");
    let mut failed = false;
    for (phase, r) in rows {
        match r {
            Ok(m) => println!(
                "{phase},{},{},{:.2},{}",
                m.c_a,
                m.k_a,
                m.mip_pct,
                m.note.unwrap_or_default()
            ),
            Err(e) => {
                failed = true;
                eprintln!("{phase}: {e}");
            }
        }
    }
    if failed {
        Err(Failure::input("some phases could not be computed"))
    } else {
        Ok(())
    }
}

fn report(input: &Path, out: &Path, formats: &[Format]) -> Result<(), Failure> {
    let report = report_from_json(&read(input)?)
        .map_err(|e| Failure::input(format!("{}: {e}", input.display())))?;
    check(&report)?;
    emit(&report, out, formats)
}

fn fixtures(name: &str, out: &Path) -> Result<(), Failure> {
    let f = fixture(name).ok_or_else(|| {
        Failure::input(format!(
            "unknown fixture `{name}`; available: {}",
            FIXTURE_NAMES.join(", ")
        ))
    })?;
    let written = f
        .write_to(out)
        .map_err(|e| Failure::input(format!("cannot write into {}: {e}", out.display())))?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Run {
            spec,
            out,
            seed,
            format,
        } => run(spec, out, *seed, format),
        Command::ValidateCam { path } => validate(path),
        Command::Mip {
            treatment,
            baseline,
        } => mip(treatment, baseline),
        Command::Report { input, out, format } => report(input, out, format),
        Command::Fixtures { name, out } => fixtures(name, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
