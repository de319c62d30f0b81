use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use padic_lab::error::LabError;
use padic_lab::suite::{run_suite, Report, SuiteConfig, SuiteName};

/// Directory used for the report when `--out` is absent.
const OUT_DIR_ENV: &str = "PADIC_LAB_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Text => "txt",
        }
    }
}

/// Runs the p-adic verification suites and emits a report.
#[derive(Debug, Parser)]
#[command(name = "padic-lab", version)]
struct Args {
    #[arg(long, default_value_t = 3)]
    p: u32,
    #[arg(long, default_value_t = 2)]
    nmax: u32,
    /// Reported precision N.
    #[arg(long, default_value_t = 30)]
    prec: i64,
    #[arg(long, default_value_t = 1)]
    q_ord: u32,
    /// Defaults to 1 + p.
    #[arg(long)]
    q_unit: Option<i64>,
    /// Defaults to 1 + p.
    #[arg(long)]
    kappa_gamma: Option<i64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// May be repeated; all suites run when omitted.
    #[arg(long, value_enum)]
    suite: Vec<SuiteName>,
    /// Enables the lattice-index generation check.
    #[arg(long)]
    deep: bool,
    /// Highest level of the generation check under --deep.
    #[arg(long, default_value_t = 1)]
    deep_level_cap: u32,
    /// L(E,1)/Ω⁺ as `a` or `a/b`.
    #[arg(long, default_value = "1")]
    l_ratio: String,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Report path. Without it the report goes to $PADIC_LAB_OUT_DIR, or stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record per-check wall-clock times (breaks byte-stability).
    #[arg(long)]
    timings: bool,
}

impl Args {
    fn config(&self) -> SuiteConfig {
        let base = 1 + self.p as i64;
        let mut c = SuiteConfig::new(
            self.p,
            self.nmax,
            self.prec,
            self.kappa_gamma.unwrap_or(base),
            self.q_ord,
            self.q_unit.unwrap_or(base),
            self.seed,
        );
        if !self.suite.is_empty() {
            c.suites = self.suite.clone();
        }
        c.deep = self.deep;
        c.deep_level_cap = self.deep_level_cap;
        c.l_ratio = self.l_ratio.clone();
        c.timings = self.timings;
        c.resolve()
    }

    fn destination(&self) -> Option<PathBuf> {
        if let Some(p) = &self.out {
            return Some(p.clone());
        }
        let dir = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty())?;
        Some(PathBuf::from(dir).join(format!("report.{}", self.format.extension())))
    }
}

fn emit(report: &Report, format: Format, dest: Option<PathBuf>) -> Result<(), LabError> {
    let body = match format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    match dest {
        None => {
            print!("{body}");
            Ok(())
        }
        Some(path) => {
            if let Some(parent) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)
                    .map_err(|e| LabError::Io(format!("{}: {e}", parent.display())))?;
            }
            std::fs::write(&path, body)
                .map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
            let s = &report.summary;
            eprintln!(
                "{}: {} passed, {} failed, {} expected-fail, {} skipped",
                path.display(),
                s.passed,
                s.failed,
                s.expected_fail,
                s.skipped
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = args.config();
    let report = match run_suite(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("padic-lab: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = emit(&report, args.format, args.destination()) {
        eprintln!("padic-lab: {e}");
        return ExitCode::from(2);
    }
    if report.ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
