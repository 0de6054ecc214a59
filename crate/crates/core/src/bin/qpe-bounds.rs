use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qpe_bounds::bench::{self, CampaignConfig};
use qpe_bounds::estimators;
use qpe_bounds::simulate;
use qpe_bounds::{ProtocolKind, QpeError};

#[derive(Parser)]
#[command(name = "qpe-bounds", version, about = "Fisher-information bounds and estimator benchmarks for phase estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON campaign config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (a directory for `sample`); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Cost-product bounds over the config grid, plus the QFT/HT crossover.
    Bounds(Common),
    /// Diagonal approximation ratio I_00 (I^-1)_00.
    Diag(Common),
    /// g_0 against c_0 with log-log slopes.
    Gi(Common),
    /// Monte Carlo efficiency ratios R.
    Bench(Common),
    /// Raw measurement samples, one CSV per grid point.
    Sample(Common),
    /// Runs an estimator on a sample CSV.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        kind: ProtocolKind,
        /// Maximal depth T of the schedule.
        #[arg(long)]
        max_time: Option<f64>,
        #[arg(long, default_value_t = bench::DEFAULT_SPARSITY)]
        sparsity: usize,
    },
}

enum Failure {
    Config(String),
    Partial(String),
}

impl From<QpeError> for Failure {
    fn from(e: QpeError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load(common: &Common) -> Result<CampaignConfig, Failure> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Failure::Config(format!("{}: {e}", common.config.display())))?;
    let mut cfg = CampaignConfig::from_json(&text)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.display().to_string());
    }
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    Ok(cfg)
}

fn sink(cfg: &CampaignConfig) -> Result<Box<dyn Write>, Failure> {
    Ok(match &cfg.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn partial(failed: usize, total: usize) -> Result<(), Failure> {
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Partial(format!("{failed} of {total} grid points failed")))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Bounds(c) => {
            let cfg = load(&c)?;
            let sweep = bench::sweep_bounds(&cfg)?;
            let mut w = sink(&cfg)?;
            bench::write_bounds_csv(&mut w, cfg.seed, &sweep)?;
            w.flush()?;
            partial(sweep.rows.iter().filter(|r| r.bound.is_none() && r.g0.is_none()).count(), sweep.rows.len())
        }
        Command::Diag(c) => {
            let cfg = load(&c)?;
            let rows = bench::check_diag(&cfg)?;
            let mut w = sink(&cfg)?;
            bench::write_diag_csv(&mut w, cfg.seed, &rows)?;
            w.flush()?;
            partial(rows.iter().filter(|r| r.diag_ratio.is_none()).count(), rows.len())
        }
        Command::Gi(c) => {
            let cfg = load(&c)?;
            let sweep = bench::gi_sweep(&cfg)?;
            let mut w = sink(&cfg)?;
            bench::write_gi_csv(&mut w, cfg.seed, &sweep)?;
            w.flush()?;
            partial(sweep.rows.iter().filter(|r| r.g0.is_none()).count(), sweep.rows.len())
        }
        Command::Bench(c) => {
            let cfg = load(&c)?;
            let rows = bench::run_campaign(&cfg)?;
            let mut w = sink(&cfg)?;
            bench::write_bench_csv(&mut w, cfg.seed, &rows)?;
            w.flush()?;
            partial(rows.iter().filter(|r| !r.is_ok()).count(), rows.len())
        }
        Command::Sample(c) => {
            let cfg = load(&c)?;
            let dir = PathBuf::from(cfg.output.clone().unwrap_or_else(|| ".".into()));
            for path in bench::write_samples(&cfg, &dir)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Estimate {
            input,
            kind,
            max_time,
            sparsity,
        } => {
            let reader = BufReader::new(File::open(&input)?);
            let mut out = io::stdout().lock();
            writeln!(out, "trial,theta_hat,status")?;
            let mut failed = 0;
            let mut total = 0;
            let mut emit = |trial: usize, r: qpe_bounds::Result<estimators::Estimate>| -> io::Result<()> {
                total += 1;
                match r {
                    Ok(e) => writeln!(out, "{trial},{},ok", e.theta_hat),
                    Err(e) => {
                        failed += 1;
                        writeln!(out, "{trial},NA,\"{e}\"")
                    }
                }
            };
            match kind {
                ProtocolKind::QftQpe => {
                    for (trial, s) in simulate::read_qft_csv(reader)? {
                        emit(trial, estimators::estimate_curvefit_qft(&s))?;
                    }
                }
                ProtocolKind::Rpe => {
                    return Err(Failure::Config("RPE post-processing is not implemented".into()))
                }
                kind => {
                    for (trial, s) in simulate::read_ht_csv(reader)? {
                        let t = max_time.unwrap_or_else(|| s.times().iter().cloned().fold(0.0, f64::max));
                        let r = match kind {
                            ProtocolKind::Qmegs => estimators::estimate_qmegs(&s, t, 1.0, true),
                            ProtocolKind::Qcels => estimators::estimate_qcels(&s),
                            _ => estimators::estimate_csqpe(&s, sparsity),
                        };
                        emit(trial, r)?;
                    }
                }
            }
            partial(failed, total)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Partial(m)) => {
            eprintln!("warning: {m}");
            ExitCode::from(2)
        }
    }
}
