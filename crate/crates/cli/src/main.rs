use clap::{Parser, Subcommand};
use ratpoints::manifold::catalog;
use ratpoints_cli::manifest::Manifest;
use ratpoints_cli::run::{run, DEFAULT_SEED};
use ratpoints_cli::selftest::run_all;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ratpoints", version, about = "Rational points near manifolds: experiments and invariant checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML manifest.
    Run {
        manifest: PathBuf,
        /// Overrides the manifest seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; overrides the manifest.
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory; overrides the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the built-in invariants and print one PASS/FAIL line each.
    Selftest {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, hide = true)]
        mutate_hodge: bool,
    },
    /// List the named manifolds.
    Catalog,
}

fn init_pool(threads: Option<usize>) -> Result<(), String> {
    match threads {
        Some(0) => Err("--threads must be at least 1".into()),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string()),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            manifest,
            seed,
            threads,
            out,
        } => {
            let man = match Manifest::load(&manifest) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Err(e) = init_pool(threads.or(man.threads)) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            let seed = seed.or(man.seed).unwrap_or(DEFAULT_SEED);
            let dir = out.or_else(|| man.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let result = match run(&man, seed) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Err(e) = result.write(&dir) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            println!("{} rows written to {}", result.rows.len(), dir.display());
            for f in &result.failures {
                eprintln!("invariant failed: {f}");
            }
            if result.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Selftest {
            seed,
            threads,
            mutate_hodge,
        } => {
            if let Err(e) = init_pool(threads) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            let results = run_all(seed.unwrap_or(DEFAULT_SEED), mutate_hodge);
            for r in &results {
                println!("{r}");
            }
            if results.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Catalog => {
            for e in catalog() {
                println!("{:<12} {:<24} {}", e.name, e.params, e.description);
            }
            ExitCode::SUCCESS
        }
    }
}
