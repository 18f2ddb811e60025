use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use index_lab::lab::{self, ChernRequest, LabError, Scenario, Verdict};

const EXIT_USAGE: u8 = 2;
const EXIT_FLOW: u8 = 3;
const EXIT_CHERN: u8 = 4;
const EXIT_FAIL: u8 = 5;
const EXIT_IO: u8 = 6;

#[derive(Parser)]
#[command(name = "index-lab", version, about = "Spectral flow versus Chern number for quantized matrix symbols")]
struct Cli {
    /// Override the sphere grid size.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Override the truncation level M.
    #[arg(long, global = true)]
    levels: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues on the scenario's spectrum grid.
    Spectrum(Common),
    /// Spectral flow through the scenario's window.
    Flow(Common),
    /// Chern numbers of every band.
    Chern {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        method: MethodArg,
    },
    /// Flow, Chern numbers and the PASS/FAIL verdict.
    Verify(Common),
    /// Print a preset scenario as JSON, or list the presets.
    Preset { name: Option<String> },
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario name.
    #[arg(long)]
    preset: Option<String>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Curvature,
    Clutching,
    Zeros,
    All,
}

impl From<MethodArg> for ChernRequest {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Curvature => Self::Curvature,
            MethodArg::Clutching => Self::Clutching,
            MethodArg::Zeros => Self::Zeros,
            MethodArg::All => Self::All,
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        let code = match e {
            LabError::Scenario(_) | LabError::UnknownPreset(_) | LabError::Json(_) => EXIT_USAGE,
            LabError::Flow(_) => EXIT_FLOW,
            LabError::Chern(_) | LabError::ChernDisagreement { .. } => EXIT_CHERN,
        };
        Failure { code, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: EXIT_IO, message: format!("{}: {e}", path.display()) }
}

fn load(common: &Common, cli: &Cli) -> Result<Scenario, Failure> {
    let mut s = match (&common.scenario, &common.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            Scenario::from_json(&text)?
        }
        (None, Some(name)) => Scenario::preset(name)?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    if let Some(g) = cli.grid {
        s = s.with_grid(g);
    }
    if let Some(m) = cli.levels {
        s = s.with_levels(m);
    }
    s.validate()?;
    Ok(s)
}

/// Write to `path` via a temporary file in the same directory, so readers
/// never see a partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_failure(path, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| io_failure(path, e))?;
    tmp.persist(path).map_err(|e| io_failure(path, e.error))?;
    Ok(())
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), Failure> {
    match out {
        Some(p) => write_atomic(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn json<T: ?Sized + serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

const CSV_HEADER: &str = "mu,branch,omega,spurious_weight\n";

fn spectrum_csv(rows: &[lab::SpectrumRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    for r in rows {
        writeln!(s, "{:.16e},{},{:.16e},{:.16e}", r.mu, r.branch, r.omega, r.spurious_weight).unwrap();
    }
    s
}

fn closed_form_csv(rows: &[lab::ClosedFormRow]) -> String {
    let mut s = String::from("mu,branch,omega\n");
    for r in rows {
        writeln!(s, "{:.16e},{},{:.16e}", r.mu, r.branch, r.omega).unwrap();
    }
    s
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Preset { name: None } => {
            emit(None, &(lab::PRESETS.join("\n") + "\n"))?;
            Ok(0)
        }
        Command::Preset { name: Some(name) } => {
            emit(None, &(Scenario::preset(name)?.to_json() + "\n"))?;
            Ok(0)
        }
        Command::Spectrum(c) => {
            let export = lab::run_spectrum(&load(c, cli)?)?;
            match c.format {
                Format::Json => emit(c.out.as_deref(), &json(&export))?,
                Format::Csv => {
                    emit(c.out.as_deref(), &spectrum_csv(&export.rows))?;
                    if let (Some(out), Some(table)) = (&c.out, &export.closed_form) {
                        write_atomic(&sibling(out, ".closed_form.csv"), &closed_form_csv(table))?;
                    }
                }
            }
            Ok(0)
        }
        Command::Flow(c) => {
            let export = lab::run_flow(&load(c, cli)?)?;
            match c.format {
                Format::Json => emit(c.out.as_deref(), &json(&export))?,
                Format::Csv => {
                    let mut s = String::from(CSV_HEADER);
                    for r in &export.records {
                        writeln!(s, "{:.16e},{},{:.16e},{:.16e}", r.mu, r.ordinal, r.omega, r.spurious_weight).unwrap();
                    }
                    emit(c.out.as_deref(), &s)?;
                }
            }
            eprintln!("N = {}", export.flow.n);
            Ok(0)
        }
        Command::Chern { common: c, method } => {
            let export = lab::run_chern(&load(c, cli)?, (*method).into())?;
            match c.format {
                Format::Json => emit(c.out.as_deref(), &json(&export))?,
                Format::Csv => {
                    let mut s = String::from("band,method,C,raw_value,residual\n");
                    for r in &export.reports {
                        writeln!(s, "{},{},{},{:.16e},{:.16e}", r.bands, r.method, r.c, r.raw_value, r.residual).unwrap();
                    }
                    emit(c.out.as_deref(), &s)?;
                }
            }
            if export.agreement == Some(false) {
                return Err(Failure { code: EXIT_CHERN, message: "Chern methods disagree".into() });
            }
            Ok(0)
        }
        Command::Verify(c) => {
            let report = lab::run_verify(&load(c, cli)?)?;
            match c.format {
                Format::Json => emit(c.out.as_deref(), &json(&report))?,
                Format::Csv => {
                    let mut s = String::from("scenario,N,C,gap_certificate,verdict\n");
                    writeln!(
                        s,
                        "{},{},{},{},{}",
                        report.scenario.name,
                        report.n,
                        report.c,
                        report.gap_certificate.holds,
                        if report.verdict == Verdict::Pass { "PASS" } else { "FAIL" }
                    )
                    .unwrap();
                    emit(c.out.as_deref(), &s)?;
                }
            }
            let verdict = if report.verdict == Verdict::Pass { "PASS" } else { "FAIL" };
            eprintln!("{}: N = {}, C = {} -> {verdict}", report.scenario.name, report.n, report.c);
            Ok(if report.verdict == Verdict::Pass { 0 } else { EXIT_FAIL })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
