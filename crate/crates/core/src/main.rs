use clap::{Parser, Subcommand, ValueEnum};
use equichern::verify::{self, RunConfig, CHECKS};
use equichern::{catalog, Error};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "equichern",
    version,
    about = "Verification driver for equivariant Chern character computations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the catalog examples and the available checks.
    List,
    /// Run verification checks and print a report.
    Run(RunArgs),
    /// Print a decay table as CSV.
    Decay(DecayArgs),
    /// Re-render a saved report.
    Report { path: PathBuf },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Flat key = value configuration file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    example: Option<String>,
    /// Check name or "all"; may be repeated.
    #[arg(long = "check")]
    checks: Vec<String>,
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long = "S")]
    s: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    /// Override for every residual bound.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecayProfile {
    /// Radial sweep along the z₂-axis.
    Z2Axis,
    /// Sweep in |z₁|² along |z₂| = |z₁|.
    Gaussian,
}

#[derive(clap::Args)]
struct DecayArgs {
    #[arg(long, default_value = "atiyah")]
    example: String,
    #[arg(long, value_enum, default_value = "z2-axis")]
    profile: DecayProfile,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn io_err(path: &std::path::Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| io_err(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn build_config(args: &RunArgs) -> Result<RunConfig, Error> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            verify::parse_config_text(&text)?
        }
        None => Vec::new(),
    };
    let mut cli = Vec::new();
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            cli.push((k.to_string(), v));
        }
    };
    push("example", args.example.clone());
    push("T", args.t.map(|v| v.to_string()));
    push("S", args.s.map(|v| v.to_string()));
    push("grid", args.grid.map(|v| v.to_string()));
    push("tol", args.tol.map(|v| v.to_string()));
    push("seed", args.seed.map(|v| v.to_string()));
    push("threads", args.threads.map(|v| v.to_string()));
    push("out", args.out.as_ref().map(|p| p.display().to_string()));
    let mut cfg = RunConfig::from_sources(&file, &cli)?;
    if !args.checks.is_empty() {
        // Checks named on the command line replace those from the file.
        cfg.checks.clear();
        for c in &args.checks {
            cfg.apply("check", c)?;
        }
    }
    if cfg.checks.is_empty() {
        cfg.apply("check", "all")?;
    }
    Ok(cfg)
}

fn run(args: RunArgs) -> ExitCode {
    let cfg = match build_config(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cfg.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    let report = match verify::run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = emit(&report.render(), cfg.out.as_ref()) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn decay(args: DecayArgs) -> Result<(), Error> {
    if args.example != "atiyah" {
        catalog::case_by_name(&args.example)?;
        return Err(Error::MissingData(format!("no decay profile for {}", args.example)));
    }
    let rows = match args.profile {
        DecayProfile::Z2Axis => verify::atiyah_decay_table(16)?,
        DecayProfile::Gaussian => verify::atiyah_gaussian_table()?,
    };
    emit(&verify::decay_csv(&rows), args.out.as_ref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List => {
            println!("examples:");
            for name in catalog::CASE_NAMES {
                println!("  {name}");
            }
            println!("checks:");
            for c in &CHECKS {
                println!("  {:<18} {}", c.name, c.identity);
            }
            Ok(())
        }
        Command::Run(args) => return run(args),
        Command::Decay(args) => decay(args),
        Command::Report { path } => std::fs::read_to_string(&path)
            .map_err(|e| io_err(&path, e))
            .and_then(|text| verify::Report::parse(&text))
            .map(|r| print!("{}", r.render())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
