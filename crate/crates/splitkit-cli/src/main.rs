//! `splitkit`: config-driven runner for splitting experiments.
//!
//! Exit codes: 0 when every configured check passes, 2 when any check
//! fails, 1 on usage or configuration errors.

mod config;
mod report;
mod study;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "splitkit", version, about = "splitting experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its CSV artifacts.
    Run {
        /// Path to the JSON experiment config.
        config: PathBuf,
        /// Worker threads for independent study cells.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory; overrides the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit one history snapshot per trajectory step of delay studies.
        #[arg(long)]
        dump_history: bool,
    },
    /// Fit per-scheme convergence orders from an errors.csv file.
    Order {
        /// Path to an errors.csv with header scheme,n,error.
        errors: PathBuf,
        /// Errors at or below this value are reported as exact.
        #[arg(long, default_value_t = 0.0)]
        floor: f64,
        /// Where to write orders.csv (defaults next to the input).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the bundled problem kinds addressable from configs.
    ListProblems,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests are not errors
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            jobs,
            out,
            dump_history,
        } => run_study(&config, jobs, out.as_deref(), dump_history),
        Command::Order { errors, floor, out } => fit_and_report(&errors, floor, out.as_deref()),
        Command::ListProblems => {
            list_problems();
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn default_seed() -> anyhow::Result<u64> {
    match std::env::var("SPLITKIT_SEED") {
        Ok(text) => text
            .parse()
            .map_err(|e| anyhow::anyhow!("SPLITKIT_SEED must be an integer: {e}")),
        Err(_) => Ok(0),
    }
}

fn run_study(
    config_path: &Path,
    jobs: Option<usize>,
    out: Option<&Path>,
    dump_history: bool,
) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", config_path.display()))?;
    let mut config = config::parse_config(&text)?;
    config.dump_history |= dump_history;
    let seed = default_seed()?;

    let output = run_with_jobs(&config, seed, jobs)?;

    let out_dir: PathBuf = out
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir)?;
    for (name, contents) in &output.files {
        std::fs::write(out_dir.join(name), contents)?;
    }
    println!(
        "wrote {} files to {}",
        output.files.len(),
        out_dir.display()
    );
    if output.failures > 0 {
        println!("{} checks failed; see summary.txt", output.failures);
        Ok(ExitCode::from(2))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

#[cfg(feature = "parallel")]
fn run_with_jobs(
    config: &config::ExperimentConfig,
    seed: u64,
    jobs: Option<usize>,
) -> anyhow::Result<study::StudyOutput> {
    match jobs {
        Some(n) if n >= 1 => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            pool.install(|| study::run_config(config, seed))
        }
        _ => study::run_config(config, seed),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_with_jobs(
    config: &config::ExperimentConfig,
    seed: u64,
    jobs: Option<usize>,
) -> anyhow::Result<study::StudyOutput> {
    if jobs.is_some() {
        eprintln!("note: built without the parallel feature; --jobs is ignored");
    }
    study::run_config(config, seed)
}

fn fit_and_report(errors_path: &Path, floor: f64, out: Option<&Path>) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(errors_path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", errors_path.display()))?;
    let records = report::parse_errors_csv(&text)?;
    let rows = report::fit_orders(&records, floor)?;
    let csv = report::orders_csv(&rows);
    print!("{csv}");
    let out_path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| errors_path.with_file_name("orders.csv"));
    std::fs::write(&out_path, &csv)?;
    println!("wrote {}", out_path.display());
    Ok(ExitCode::SUCCESS)
}

fn list_problems() {
    println!("matrix kinds (problem kind \"matrix\"):");
    println!("  commuting       diagonal contraction pair; splitting is exact");
    println!("  nilpotent-pair  shift-matrix pair with a non-zero commutator");
    println!("  random-stable   seeded dense pair shifted to contraction");
    println!("advection-diffusion   periodic stencils on an m-ladder with a spectral reference");
    println!("delay-scalar          scalar distributed-delay equation with a transport oracle");
    println!("delay-diffusion       Dirichlet heat head with a scalar delay kernel");
    println!();
    println!("kernel shapes: constant {{value}}, exponential {{scale, rate}}");
    println!("history shapes: constant, exponential {{rate}}");
}
