//! `pid`: BROJA partial information decomposition from the command line.
//!
//! Reports are JSON on stdout (or `--out`), a one-line summary goes to
//! stderr. Exit codes: 0 success, 1 unreadable or malformed input,
//! 2 invalid distribution or arguments, 3 optimum not certified or check
//! failed (the report is still written), 4 enumeration too large.

mod commands;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde_json::json;

use broja_pid::dist::format::{self, InputFormat};
use broja_pid::{PidError, SolveOptions, Unit};

use commands::{Settings, Status};
use output::{envelope, Header};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Decomposition values with identity and certificate residuals.
    Compute,
    /// Gradients of M and the four measures on the support.
    Gradients,
    /// Central finite-difference audit of the gradients.
    Gradcheck,
    /// Optimal coupling and the multipliers certifying it.
    Kkt,
    /// Extractable shared information over garblings of S.
    Extract,
    /// Non-convexity witnesses on distributions of the input's shape.
    Witness,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Compute => "compute",
            Command::Gradients => "gradients",
            Command::Gradcheck => "gradcheck",
            Command::Kkt => "kkt",
            Command::Extract => "extract",
            Command::Witness => "witness",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum UnitArg {
    Bits,
    Nats,
}

#[derive(Debug, Parser)]
#[command(
    name = "pid",
    version,
    about = "BROJA bivariate partial information decomposition"
)]
struct Args {
    command: Command,
    /// Distribution as JSON or TSV (`s<TAB>y<TAB>z<TAB>p`).
    input: PathBuf,
    /// Display unit; nats are always included.
    #[arg(long, value_enum, default_value = "bits")]
    unit: UnitArg,
    /// Output alphabet size for `extract` (default |S|).
    #[arg(long)]
    m: Option<usize>,
    /// Random starts for `extract`.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Finite-difference step for `gradcheck`.
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// Multiplier tolerance of the solver; for `gradcheck`, the relative
    /// tolerance of the audit (default 1e-4).
    #[arg(long)]
    tol: Option<f64>,
    /// Directions for `gradcheck`.
    #[arg(long, default_value_t = 20)]
    ndirs: usize,
    /// Pairs tried per measure by `witness`.
    #[arg(long, default_value_t = 10_000)]
    attempts: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trace CSV of `extract` (default: next to `--out`).
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn exit_code(e: &PidError) -> u8 {
    match e {
        PidError::Parse { .. } => 1,
        PidError::MaxIterationsExceeded(_) | PidError::UncertifiedSolution => 3,
        PidError::EnumerationTooLarge { .. } => 4,
        _ => 2,
    }
}

fn trace_path(args: &Args) -> Option<PathBuf> {
    args.trace.clone().or_else(|| {
        args.out.as_ref().map(|out| {
            let mut name = out.file_stem().unwrap_or_default().to_os_string();
            name.push(".trace.csv");
            out.with_file_name(name)
        })
    })
}

fn write(path: &Path, text: &str) -> Result<(), ExitCode> {
    std::fs::write(path, text).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        ExitCode::from(1)
    })
}

fn run(args: Args) -> Result<ExitCode, ExitCode> {
    let bytes = std::fs::read(&args.input).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", args.input.display());
        ExitCode::from(1)
    })?;
    let fail = |e: PidError| {
        eprintln!("error: {e}");
        ExitCode::from(exit_code(&e))
    };
    let text = String::from_utf8(bytes.clone()).map_err(|_| {
        eprintln!("error: {} is not UTF-8", args.input.display());
        ExitCode::from(1)
    })?;
    let path = args.input.to_string_lossy().into_owned();
    let p = format::parse(&text, InputFormat::detect(Some(&path), &text)).map_err(fail)?;

    let mut solve = SolveOptions::default();
    let mut rel_tol = 1e-4;
    if let Some(tol) = args.tol {
        if !(tol > 0.0) {
            return Err(fail(PidError::InvalidArgument(
                "--tol must be positive".into(),
            )));
        }
        match args.command {
            Command::Gradcheck => rel_tol = tol,
            _ => solve.tol_kkt = tol,
        }
    }
    if args.m == Some(0) {
        return Err(fail(PidError::InvalidArgument(
            "--m must be positive".into(),
        )));
    }
    let cfg = Settings {
        unit: match args.unit {
            UnitArg::Bits => Unit::Bits,
            UnitArg::Nats => Unit::Nats,
        },
        solve,
        m: args.m,
        restarts: args.restarts,
        seed: args.seed,
        eps: args.eps,
        rel_tol,
        ndirs: args.ndirs,
        attempts: args.attempts,
    };
    let outcome = match args.command {
        Command::Compute => commands::compute(&p, &cfg),
        Command::Gradients => commands::gradients(&p, &cfg),
        Command::Gradcheck => commands::gradcheck(&p, &cfg),
        Command::Kkt => commands::kkt(&p, &cfg),
        Command::Extract => commands::extract(&p, &cfg),
        Command::Witness => commands::witness(&p, &cfg),
    }
    .map_err(fail)?;

    let mut tolerances = json!({ "tol_kkt": solve.tol_kkt, "tol_feas": solve.tol_feas });
    if let Command::Gradcheck = args.command {
        tolerances["eps"] = json!(cfg.eps);
        tolerances["rel_tol"] = json!(cfg.rel_tol);
    }
    let header = Header {
        command: args.command.name(),
        path: &path,
        input: &bytes,
        tolerances,
    };
    let report = envelope(&header, outcome.body);
    let rendered = serde_json::to_string_pretty(&report).expect("serializable report") + "\n";
    match &args.out {
        Some(out) => write(out, &rendered)?,
        None => print!("{rendered}"),
    }
    if let (Some(csv), Some(path)) = (&outcome.trace, trace_path(&args)) {
        write(&path, csv)?;
    }
    eprintln!("{}", outcome.summary);
    Ok(ExitCode::from(match outcome.status {
        Status::Ok => 0,
        Status::NotCertified => 3,
        Status::TooLarge => 4,
    }))
}

fn main() -> ExitCode {
    run(Args::parse()).unwrap_or_else(|code| code)
}
