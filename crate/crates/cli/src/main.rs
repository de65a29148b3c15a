use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gfstack_cli::{run, CliError, ExperimentConfig, ExperimentKind, Result, Table};

const SCHEMA: &str = "\
Config file (--config): one `key = value` per line, `#` comments, no sections.
  kind        d2c_heat | bound_suite | resolvent_convergence | tlp_table |
              stacking_audit | p0_audit (optional, must match the subcommand)
  sizes       strictly increasing positive integers, comma separated
  horizon     final time T >= 0
  time_grid   number of sampled times in [0, T], at least 1
  p           transport exponent, at least 1
  q           integrability exponent, above max(2, p)
  tolerance   allowed negative slack and flow accuracy, positive
  seed        unsigned 64-bit integer
  points      equispaced | uniform
  output      CSV path

CSV output: header `experiment,n,t,metric,lhs,rhs,slack,pass`, slack = rhs - lhs,
numbers with 12 significant digits, rows sorted by (experiment, n, t, metric).

Exit status: 0 when every row passes, 1 when some row fails (failing rows are
listed on stderr), 2 on configuration or solver errors.

Environment: GFSTACK_THREADS caps the worker pool (default: all cores).";

#[derive(Parser)]
#[command(name = "gfstack", version, about = "Gradient-flow convergence experiments", after_help = SCHEMA)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Energy, decay and Crandall–Liggett bounds over the functional zoo.
    Bounds(Common),
    /// Graph heat flows against a fine-grid continuum flow.
    D2c(Common),
    /// Resolvent convergence against semigroup convergence.
    Resolvents(Common),
    /// TL^p distances, brute-force comparison and metric axioms.
    Tlp(Common),
    /// Banach-stacking axioms, Γ-convergence harnesses and negative controls.
    AuditStacking(Common),
    /// P₀-convexity counterexample, exchange inequalities and L^r contraction.
    AuditP0(Common),
}

#[derive(Args)]
#[command(after_help = SCHEMA)]
struct Common {
    /// Config file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Overrides `output`; stdout when neither is given.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Overrides `tolerance`.
    #[arg(long, value_name = "X")]
    tol: Option<f64>,
    /// Also write a JSON mirror next to the CSV (`<out>.json`), or print JSON
    /// instead of CSV when writing to stdout.
    #[arg(long)]
    json: bool,
}

impl Command {
    fn split(self) -> (ExperimentKind, Common) {
        match self {
            Self::Bounds(c) => (ExperimentKind::BoundSuite, c),
            Self::D2c(c) => (ExperimentKind::D2cHeat, c),
            Self::Resolvents(c) => (ExperimentKind::ResolventConvergence, c),
            Self::Tlp(c) => (ExperimentKind::TlpTable, c),
            Self::AuditStacking(c) => (ExperimentKind::StackingAudit, c),
            Self::AuditP0(c) => (ExperimentKind::P0Audit, c),
        }
    }
}

fn load_config(kind: ExperimentKind, args: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::parse(&fs::read_to_string(path)?, Some(kind))?,
        None => ExperimentConfig::defaults(kind),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = args.tol {
        cfg.tolerance = tol;
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("GFSTACK_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("GFSTACK_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn json_path(csv: &Path) -> PathBuf {
    let mut p = csv.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

fn emit(table: &Table, cfg: &ExperimentConfig, json: bool) -> Result<()> {
    match &cfg.output {
        Some(path) => {
            fs::write(path, table.to_csv())?;
            if json {
                fs::write(json_path(path), table.to_json()?)?;
            }
        }
        None => {
            let text = if json { table.to_json()? + "\n" } else { table.to_csv() };
            std::io::stdout().lock().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<bool> {
    configure_threads()?;
    let (kind, args) = cli.command.split();
    let cfg = load_config(kind, &args)?;
    let table = run(&cfg)?;
    emit(&table, &cfg, args.json)?;
    let mut ok = true;
    for row in table.failures() {
        ok = false;
        eprintln!("FAIL {}", row.to_csv_line());
    }
    Ok(ok)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
