//! Batch runner: tensor caches, experiments and the acceptance suite.
//!
//! Exit codes: 0 success, 1 acceptance failure, 2 invalid input, 3 numerical abort, 4 I/O error.
//! Errors are printed to stderr as one JSON object.

mod config;
mod runs;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use trapnls::acceptance::{self, AcceptanceConfig};
use trapnls::analysis::{tensor_cache_name, Context, ExperimentReport};
use trapnls::hermite::{build_basis, BasisSpec};
use trapnls::resonant::{build_interaction_tensor, read_cache_header, save_tensor_cache};

use config::{ConfigError, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "trapnls", version, about = "Experiments for the cubic NLS with a partial harmonic trap")]
struct Cli {
    /// TOML run configuration; every key has a default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Directory of interaction tensor caches. Without it tensors are built in memory.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized initial data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the interaction tensor of the `[tensor]` basis and write it to the cache.
    PrecomputeTensor {
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Run one experiment or plain evolution and write its report.
    Run {
        /// One of: wave-operator, matched-limit, quasi1d, vortex-dipole, non-separability,
        /// stationary-phase, rs-stationary, rs, rss, cnls, truncated, 1d, xpm.
        experiment: String,
    },
    /// Run the acceptance suite and print one line per criterion.
    Validate {
        /// Override the s-node count of the tensor/quadrature criterion.
        #[arg(long)]
        m_s: Option<usize>,
        /// Comma-separated criterion ids to run (default: all).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
    /// Print the header of a tensor cache file.
    InspectCache { path: PathBuf },
}

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure { code: 2, kind: "validation", message: message.into() }
    }
}

impl From<trapnls::Error> for Failure {
    fn from(e: trapnls::Error) -> Self {
        use trapnls::Error as E;
        let (code, kind) = match &e {
            E::NonFinite { .. } => (3, "numerical"),
            E::Io(_) | E::Json(_) | E::Csv(_) => (4, "io"),
            E::Cache(_) => (2, "cache"),
            _ => (2, "validation"),
        };
        Failure { code, kind, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 4, kind: "io", message: e.to_string() }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("{}", json!({ "error": { "kind": f.kind, "code": f.code, "message": f.message } }));
            ExitCode::from(f.code)
        }
    }
}

fn execute(cli: Cli) -> Result<u8, Failure> {
    let mut cfg = RunConfig::load(cli.config.as_deref()).map_err(|e| match e {
        ConfigError::Io(m) => Failure { code: 4, kind: "io", message: m },
        ConfigError::Parse(m) => Failure::invalid(m),
    })?;
    cfg.resolve_seed(cli.seed);
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::invalid("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::invalid(e.to_string()))?;
    }
    let ctx = Context { cache_dir: cli.cache.clone() };
    match cli.command {
        Command::PrecomputeTensor { n_max } => {
            let dir = cli.cache.ok_or_else(|| Failure::invalid("precompute-tensor needs --cache DIR"))?;
            precompute(&dir, cfg.tensor.d, n_max.unwrap_or(cfg.tensor.n_max))
        }
        Command::Run { experiment } => {
            if !runs::EXPERIMENTS.contains(&experiment.as_str()) {
                return Err(Failure::invalid(format!(
                    "unknown experiment {experiment:?}; expected one of {}",
                    runs::EXPERIMENTS.join(", ")
                )));
            }
            ensure_writable(&cli.out)?;
            log::info!("running {experiment}");
            let mut rep = runs::run(&experiment, &cfg, &ctx)?;
            embed_config(&mut rep, &experiment, &cfg)?;
            let paths = rep.write(&cli.out)?;
            println!(
                "{}",
                json!({ "experiment": experiment, "verdicts": rep.verdicts, "files": paths })
            );
            Ok(0)
        }
        Command::Validate { m_s, only } => {
            if let Some(bad) = only.iter().find(|&&id| id == 0 || id > acceptance::CRITERIA) {
                return Err(Failure::invalid(format!("no criterion {bad}")));
            }
            ensure_writable(&cli.out)?;
            let acc = AcceptanceConfig { context: ctx, m_s };
            let ids: Vec<u32> = if only.is_empty() { (1..=acceptance::CRITERIA).collect() } else { only };
            let mut results = Vec::new();
            for id in ids {
                let c = acceptance::run(id, &acc);
                println!("{c}");
                results.push(c);
            }
            let failed = results.iter().filter(|c| !c.passed).count();
            println!("acceptance: {} passed, {failed} failed", results.len() - failed);
            let mut rep = ExperimentReport::new("validate", &json!({ "m_s": m_s }), cfg.seed.unwrap_or(0))?;
            for c in &results {
                rep.verdicts.insert(format!("criterion_{:02}_passed", c.id), if c.passed { 1.0 } else { 0.0 });
            }
            embed_config(&mut rep, "validate", &cfg)?;
            rep.params["m_s"] = json!(m_s);
            rep.params["criteria"] = serde_json::to_value(&results).map_err(trapnls::Error::from)?;
            rep.write(&cli.out)?;
            Ok(if failed == 0 { 0 } else { 1 })
        }
        Command::InspectCache { path } => {
            let bytes = std::fs::metadata(&path)?.len();
            let hdr = read_cache_header(&mut BufReader::new(File::open(&path)?))?;
            let expected = 24 + hdr.count * (8 * hdr.d as u64 + 8);
            println!(
                "{}",
                json!({
                    "path": path,
                    "version": hdr.version,
                    "d": hdr.d,
                    "n_max": hdr.n_max,
                    "entries": hdr.count,
                    "bytes": bytes,
                    "consistent": bytes == expected,
                })
            );
            Ok(if bytes == expected { 0 } else { 2 })
        }
    }
}

fn precompute(dir: &Path, d: usize, n_max: usize) -> Result<u8, Failure> {
    let spec = BasisSpec::minimal(d, n_max)?;
    let basis = build_basis::<f64>(spec)?;
    let tensor = build_interaction_tensor(&basis);
    let path = dir.join(tensor_cache_name(&spec));
    save_tensor_cache(&tensor, &path)?;
    println!(
        "{}",
        json!({ "path": path, "d": d, "n_max": n_max, "entries": tensor.len(), "bytes": std::fs::metadata(&path)?.len() })
    );
    Ok(0)
}

/// The summary records the fully resolved configuration next to the experiment parameters.
fn embed_config(rep: &mut ExperimentReport, id: &str, cfg: &RunConfig) -> Result<(), Failure> {
    let resolved = serde_json::to_value(cfg).map_err(trapnls::Error::from)?;
    rep.params = json!({ "experiment": id, "parameters": rep.params.take(), "config": resolved });
    Ok(())
}

fn ensure_writable(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)?;
    let probe = dir.join(".trapnls-write-probe");
    File::create(&probe)?;
    std::fs::remove_file(&probe)?;
    Ok(())
}
