use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use pphi::config::{config_error, ConfigError, RunConfig};
use pphi::io::{read_json, write_bytes, write_json, write_zeros, MeasureFile, SamplesFile};
use pphi::pipeline::{self, Check};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "pphi", version, about = "Zeros of P(phi)_2 random polynomials")]
struct Cli {
    /// Run configuration (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file for single-file commands (stdout when absent), output directory for pipelines
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw sections of one degree
    Sample {
        /// Degree; required when the config lists several
        #[arg(long)]
        n: Option<usize>,
    },
    /// Zeros of every section in a samples file, as CSV
    Zeros {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Equilibrium measure on the support grid
    Equilibrium,
    /// Rate functional of a weighted point set
    Rate {
        #[arg(long)]
        measure: PathBuf,
    },
    /// MAIN1 identity on random configuration pairs
    JpcCheck {
        #[arg(long, default_value_t = 100)]
        n_pairs: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// log Gamma_N against its two-sided bounds
    GammaCheck {
        #[arg(long)]
        k: usize,
        /// c_1..c_{k-1}, comma separated
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        c: Vec<f64>,
        /// beta_1..beta_{k-1} (default all 1)
        #[arg(long, value_delimiter = ',')]
        beta: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        n_min: usize,
        #[arg(long)]
        n_max: usize,
        /// Include the kinetic term with eta = N^2 alpha^(1/k)
        #[arg(long)]
        kinetic: bool,
    },
    /// Bernstein ratios of free-field draws
    BernsteinCheck {
        #[arg(long, default_value_t = 10_000)]
        n_samples: usize,
        #[arg(long, default_value_t = 2.1)]
        max_exponent: f64,
    },
    /// Kac-Hammersley demonstration
    KhDemo,
    /// Convergence of the mean zero distribution to the equilibrium measure
    Eqdist,
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(p) => write_bytes(p, bytes),
        None => Ok(std::io::stdout().write_all(bytes)?),
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, v: &T) -> anyhow::Result<()> {
    match out {
        Some(p) => write_json(p, v),
        None => {
            let mut s = serde_json::to_string_pretty(v)?;
            s.push('\n');
            Ok(std::io::stdout().write_all(s.as_bytes())?)
        }
    }
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        let n = c.n.map(|n| format!(" N={n}")).unwrap_or_default();
        let status = if c.passed { "PASS" } else { "FAIL" };
        eprintln!("{status} {}{n}: {:.6e} (bound {:.6e})", c.name, c.value, c.bound);
    }
}

/// `Ok(true)` when every check passed.
fn run(cli: &Cli) -> anyhow::Result<bool> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("thread pool")?;
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Sample { n } => {
            let cfg = load_config(cli)?;
            let n = match (n, cfg.n_list.as_slice()) {
                (Some(n), _) => *n,
                (None, [n]) => *n,
                _ => return Err(config_error("several degrees configured; pick one with --n")),
            };
            emit_json(out, &pipeline::sample_file(&cfg, n)?)?;
            Ok(true)
        }
        Command::Zeros { input } => {
            let f: SamplesFile = read_json(input).map_err(|e| config_error(format!("{e:#}")))?;
            let zcs = pipeline::find_all_roots(&f.sections()?)?;
            match out {
                Some(p) => write_zeros(p, &zcs)?,
                None => emit(None, &pphi::io::zeros_csv(&zcs)?)?,
            }
            Ok(true)
        }
        Command::Equilibrium => {
            emit_json(out, &pipeline::equilibrium_report(&load_config(cli)?)?)?;
            Ok(true)
        }
        Command::Rate { measure } => {
            let m = MeasureFile::load(measure)?;
            emit_json(out, &pipeline::rate_report(&load_config(cli)?, &m)?)?;
            Ok(true)
        }
        Command::JpcCheck { n_pairs, tol } => {
            let r = pipeline::jpc_check(&load_config(cli)?, *n_pairs, *tol)?;
            print_checks(&r.checks);
            emit_json(out, &r)?;
            Ok(r.passed)
        }
        Command::GammaCheck { k, c, beta, n_min, n_max, kinetic } => {
            let betas = if beta.is_empty() { vec![1.0; k.saturating_sub(1)] } else { beta.clone() };
            let rows = pipeline::gamma_table(*k, c, &betas, *n_min, *n_max, *kinetic)?;
            emit(out, &pipeline::gamma_csv(&rows)?)?;
            let bad: Vec<usize> = rows.iter().filter(|r| !r.inside()).map(|r| r.n).collect();
            if !bad.is_empty() {
                eprintln!("FAIL log Gamma_N outside its bounds at N = {bad:?}");
            }
            Ok(bad.is_empty())
        }
        Command::BernsteinCheck { n_samples, max_exponent } => {
            let r = pipeline::bernstein_check(&load_config(cli)?, *n_samples, *max_exponent)?;
            print_checks(&r.checks);
            emit_json(out, &r)?;
            Ok(r.passed)
        }
        Command::KhDemo => {
            let cfg = load_config(cli)?;
            let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone());
            let r = pipeline::run_kh_demo(&cfg, &dir)?;
            print_checks(&r.checks);
            Ok(r.passed)
        }
        Command::Eqdist => {
            let cfg = load_config(cli)?;
            let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone());
            let r = pipeline::run_eqdist(&cfg, &dir)?;
            for row in &r.rows {
                eprintln!("N={} W1={:.6} se={:.2e}", row.n, row.w1, row.std_error);
            }
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            if r.rows.len() > 1 && !r.strictly_decreasing {
                eprintln!("FAIL W1 is not strictly decreasing in N");
            }
            Ok(r.rows.len() < 2 || r.strictly_decreasing)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
