use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use mlo_sim::export::{self, Format, Row};
use mlo_sim::scenario::DEFAULT_LOAD_GRID;
use mlo_sim::{ConfigError, Execution, Preset, Scenario, Simulation, SweepSpec, SweepTable};

/// Discrete-event simulator of Wi-Fi multi-link channel access.
#[derive(Parser, Debug)]
#[command(name = "mlo-sim", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Output format for result rows.
    #[arg(long, global = true, default_value = "csv")]
    format: Format,
    /// Simulated time per run in seconds (overrides the scenario).
    #[arg(long, global = true)]
    duration: Option<f64>,
    /// Fraction of each run discarded as warm-up (overrides the scenario).
    #[arg(long, global = true)]
    warmup: Option<f64>,
    /// Run sweep cells one after another instead of on the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario file for each of its seeds (or the given ones).
    Run {
        scenario: PathBuf,
        /// Seed to run; repeatable. Defaults to the scenario's seeds.
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        /// Directory for results and full JSON reports; stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every cell of a sweep spec file.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one of the built-in scheme sets over a load grid.
    Preset {
        name: Preset,
        /// Total offered loads in Gb/s, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        load_grid: Option<Vec<f64>>,
        /// Seeds to replicate each cell with; comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the preset's scenarios and sweep spec as TOML into this
        /// directory instead of running anything.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

impl Global {
    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    fn apply(&self, s: &mut Scenario) {
        if let Some(d) = self.duration {
            s.duration_s = d;
        }
        if let Some(w) = self.warmup {
            s.warmup_fraction = w;
        }
    }

    fn apply_spec(&self, spec: &mut SweepSpec) {
        if self.duration.is_some() {
            spec.duration_s = self.duration;
        }
        if self.warmup.is_some() {
            spec.warmup_fraction = self.warmup;
        }
    }
}

fn results_name(format: Format) -> &'static str {
    match format {
        Format::Csv => "results.csv",
        Format::Json => "results.json",
    }
}

fn emit_rows(rows: &[Row], format: Format, out: Option<&Path>) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(results_name(format));
            let file =
                fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            export::write(rows, format, io::BufWriter::new(file))?;
            info!("wrote {}", path.display());
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            export::write(rows, format, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn run_scenario(g: &Global, path: &Path, seeds: Vec<u64>, out: Option<&Path>) -> Result<()> {
    let mut scenario = Scenario::load(path)?;
    g.apply(&mut scenario);
    if !seeds.is_empty() {
        scenario.seeds = seeds;
    }
    scenario.validate()?;
    let total = scenario.total_load();
    let mut rows = Vec::new();
    for &seed in &scenario.seeds {
        let t0 = Instant::now();
        let report = Simulation::new(&scenario, seed)?.run();
        info!(
            "seed {seed}: {} events in {:.2?}",
            report.events,
            t0.elapsed()
        );
        rows.extend(export::rows_for_report(&report, total));
        if let Some(dir) = out {
            fs::create_dir_all(dir)?;
            let path = dir.join(format!("report-seed{seed}.json"));
            let file = fs::File::create(&path)?;
            export::write_report_json(&report, io::BufWriter::new(file))?;
        }
    }
    emit_rows(&rows, g.format, out)
}

fn run_sweep(g: &Global, spec: &SweepSpec, out: Option<&Path>) -> Result<()> {
    let t0 = Instant::now();
    let table: SweepTable = mlo_sim::sweep(spec, g.execution())?;
    info!("{} cells in {:.2?}", table.results.len(), t0.elapsed());
    let mut failed = 0;
    for f in table.failures() {
        failed += 1;
        warn!(
            "cell {} @ {} b/s seed {} failed: {}",
            f.scheme,
            f.total_load_bps,
            f.seed,
            f.outcome.as_ref().unwrap_err()
        );
    }
    emit_rows(&export::rows_for_table(&table), g.format, out)?;
    if failed > 0 {
        bail!("{failed} of {} cells failed", table.results.len());
    }
    Ok(())
}

fn emit_preset(preset: Preset, spec: &SweepSpec, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for s in preset.scenarios(DEFAULT_LOAD_GRID[2]) {
        let file = format!(
            "{preset}-{}.toml",
            s.name.to_ascii_lowercase().replace([':', '+'], "_")
        );
        fs::write(dir.join(file), s.to_toml()?)?;
    }
    fs::write(dir.join(format!("{preset}-sweep.toml")), spec.to_toml()?)?;
    Ok(())
}

fn real_main(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Run {
            scenario,
            seeds,
            out,
        } => run_scenario(g, &scenario, seeds, out.as_deref()),
        Command::Sweep { spec, out } => {
            let mut spec = SweepSpec::load(&spec)?;
            g.apply_spec(&mut spec);
            run_sweep(g, &spec, out.as_deref())
        }
        Command::Preset {
            name,
            load_grid,
            seeds,
            out,
            emit,
        } => {
            let mut spec = SweepSpec::for_preset(name);
            if let Some(grid) = load_grid {
                spec.loads_bps = grid.iter().map(|gbps| gbps * 1e9).collect();
            }
            spec.seeds = seeds;
            g.apply_spec(&mut spec);
            match emit {
                Some(dir) => emit_preset(name, &spec, &dir),
                None => run_sweep(g, &spec, out.as_deref()),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(cfg) = e.downcast_ref::<ConfigError>() {
                eprintln!("invalid configuration: {cfg}");
                for issue in cfg.issues() {
                    eprintln!("  {}: {}", issue.path, issue.message);
                }
                return ExitCode::from(2);
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
