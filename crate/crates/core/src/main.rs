use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ura::harness::{
    collision_probe, sweep_configs, trial_rng, write_csv, write_ndjson_line, Experiment, SimConfig,
    SweepGrid,
};
use ura::hygamp::run_hygamp_traced;
use ura::{Error, Result};

#[derive(Parser)]
#[command(name = "ura", version, about = "Unsourced random access simulator over massive MIMO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per grid point; overrides the config file.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Runs the trials of one configuration.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Runs every point of a grid file.
    Sweep {
        grid: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compares per-slot collisions with their analytic mean.
    ProbeCollisions {
        #[arg(long)]
        ka: usize,
        #[arg(long)]
        bits: u32,
        #[arg(long, default_value_t = 1)]
        slots: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dumps the HyGAMP iterations of one slot of one trial as NDJSON.
    Trace {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long, default_value_t = 0)]
        slot: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn apply_common(cfg: &mut SimConfig, common: &Common) {
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.trials = trials;
    }
}

fn run_points(configs: &[SimConfig], common: &Common) -> Result<()> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    fs::create_dir_all(&common.out)?;
    let mut ndjson = BufWriter::new(File::create(common.out.join("trials.ndjson"))?);
    let rows = sweep_configs(configs, |rec| write_ndjson_line(&mut ndjson, rec))?;
    ndjson.flush()?;
    let mut csv = BufWriter::new(File::create(common.out.join("results.csv"))?);
    write_csv(&mut csv, &rows)?;
    csv.flush()?;
    write_csv(&mut std::io::stdout().lock(), &rows)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, common } => {
            let mut cfg = SimConfig::from_json(&read(&config)?)?;
            apply_common(&mut cfg, &common);
            run_points(&[cfg], &common)
        }
        Command::Sweep { grid, common } => {
            let grid = SweepGrid::from_json(&read(&grid)?)?;
            let mut points = grid.points();
            for p in &mut points {
                apply_common(p, &common);
            }
            run_points(&points, &common)
        }
        Command::ProbeCollisions {
            ka,
            bits,
            slots,
            samples,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let stats = collision_probe(ka, bits, slots, samples, &mut rng)?;
            write_ndjson_line(&mut std::io::stdout().lock(), &stats)
        }
        Command::Trace {
            config,
            trial,
            slot,
            seed,
            out,
        } => {
            let mut cfg = SimConfig::from_json(&read(&config)?)?;
            if let Some(seed) = seed {
                cfg.master_seed = seed;
            }
            if slot >= cfg.slots {
                return Err(Error::Config(format!("slot {slot} >= L = {}", cfg.slots)));
            }
            let exp = Experiment::new(cfg)?;
            let mut rng = trial_rng(exp.config.master_seed, trial);
            let data = exp.simulate(trial, &mut rng)?;
            let mut sink: Box<dyn Write> = match out {
                Some(p) => Box::new(BufWriter::new(File::create(p)?)),
                None => Box::new(std::io::stdout().lock()),
            };
            let mut status = Ok(());
            run_hygamp_traced(
                &data.observations[slot],
                &exp.codebook,
                &exp.hygamp_config(),
                exp.config.active_users,
                |rec| {
                    if status.is_ok() {
                        status = write_ndjson_line(&mut sink, rec);
                    }
                },
            )?;
            status?;
            sink.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
