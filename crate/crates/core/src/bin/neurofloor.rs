use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use neurofloor::analytic::network_counts;
use neurofloor::export;
use neurofloor::floorline::{
    classify, fit_floorline, suggest, sweep, FitOptions, FloorlineModel, FloorlinePoint,
};
use neurofloor::optimizer::{Optimizer, OptimizerOptions};
use neurofloor::placement::{
    default_stride, minimal_partition, ordered_mapping, strided_mapping, MappingDocument,
    MappingPlan, PartitionPlan, PlanDocument,
};
use neurofloor::sim::{simulate, EventMode, SimInput, SimReport};
use neurofloor::workload::{ScheduleKind, SparsitySchedule};
use neurofloor::{parse_workload, Error, Result, Workload};

#[derive(Parser)]
#[command(
    name = "neurofloor",
    version,
    about = "Neuromorphic accelerator performance simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-layer analytic operation counts as CSV.
    Analyze {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the minimal partition plan and a mapping.
    Plan {
        config: PathBuf,
        #[command(flatten)]
        mapper: MapperArgs,
        #[arg(long, default_value = "plan.toml")]
        plan_out: PathBuf,
        #[arg(long, default_value = "mapping.toml")]
        mapping_out: PathBuf,
    },
    /// Simulate a configuration and write its report.
    Simulate {
        config: PathBuf,
        /// Partition plan document; minimal partitioning when absent.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Mapping document; built with --mapper when absent.
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[command(flatten)]
        mapper: MapperArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Report document (TOML); stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        steps_csv: Option<PathBuf>,
        #[arg(long)]
        cores_csv: Option<PathBuf>,
    },
    /// Simulate a grid of schedules and write floorline points as CSV.
    Sweep {
        config: PathBuf,
        /// Schedule kinds.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "uniform,lohi,decreasing,increasing"
        )]
        kinds: Vec<ScheduleKind>,
        /// Mean activation density levels.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,0.7,0.9")]
        levels: Vec<f64>,
        #[command(flatten)]
        mapper: MapperArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a floorline model to sweep points.
    Floorline {
        points: PathBuf,
        /// Takes barrier offset and fallback slope from this configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = FitOptions::DEFAULT_TOLERANCE)]
        tolerance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify a report against a floorline model and suggest a move.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Search partitionings and mappings for a faster configuration.
    Optimize {
        config: PathBuf,
        #[arg(long, default_value_t = OptimizerOptions::default().budget)]
        budget: usize,
        #[arg(long, default_value_t = OptimizerOptions::default().epsilon_time)]
        epsilon_time: f64,
        #[arg(long, default_value_t = OptimizerOptions::default().epsilon_energy)]
        epsilon_energy: f64,
        #[command(flatten)]
        run: RunArgs,
        /// Directory receiving plan.toml, mapping.toml and trace.csv.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Expected,
    Sampled,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mapper {
    Ordered,
    Strided,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "expected")]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    steps: usize,
}

impl RunArgs {
    fn event_mode(&self) -> EventMode {
        match self.mode {
            Mode::Expected => EventMode::Expected,
            Mode::Sampled => EventMode::Sampled { seed: self.seed },
        }
    }
}

#[derive(Args)]
struct MapperArgs {
    #[arg(long, value_enum, default_value = "strided")]
    mapper: Mapper,
    /// Strided mapping stride; mesh width + 1 when absent.
    #[arg(long)]
    stride: Option<usize>,
}

impl MapperArgs {
    fn build(&self, plan: &PartitionPlan, w: &Workload) -> Result<MappingPlan> {
        match self.mapper {
            Mapper::Ordered => ordered_mapping(plan, &w.chip),
            Mapper::Strided => strided_mapping(
                plan,
                &w.chip,
                self.stride.unwrap_or_else(|| default_stride(&w.chip)),
            ),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Workload> {
    parse_workload(&read(path)?)
}

fn from_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    toml::from_str(&read(path)?).map_err(|e| Error::Syntax {
        line: 0,
        column: 0,
        message: format!("{}: {}", path.display(), e.message()),
    })
}

fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Io(e.to_string()))
}

/// A file when `path` is given, stdout otherwise.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            Box::new(File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?)
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn minimal(w: &Workload) -> Result<PartitionPlan> {
    minimal_partition(&w.network, &w.chip)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze { config, out } => {
            let w = load(&config)?;
            let plan = minimal(&w)?;
            let counts = network_counts(&w.network, &plan);
            export::write_analyze(sink(out.as_deref())?, &counts, &w.chip.cost)
        }
        Command::Plan {
            config,
            mapper,
            plan_out,
            mapping_out,
        } => {
            let w = load(&config)?;
            let plan = minimal(&w)?;
            let mapping = mapper.build(&plan, &w)?;
            write_file(&plan_out, &to_toml(&plan.to_document())?)?;
            write_file(&mapping_out, &to_toml(&mapping.to_document())?)
        }
        Command::Simulate {
            config,
            plan,
            mapping,
            mapper,
            run,
            report,
            steps_csv,
            cores_csv,
        } => {
            let w = load(&config)?;
            let plan = match plan {
                Some(p) => PartitionPlan::from_document(
                    &from_toml::<PlanDocument>(&p)?,
                    &w.network,
                    &w.chip,
                )?,
                None => minimal(&w)?,
            };
            let mapping = match mapping {
                Some(p) => {
                    MappingPlan::from_document(&from_toml::<MappingDocument>(&p)?, &plan, &w.chip)?
                }
                None => mapper.build(&plan, &w)?,
            };
            let input = SimInput {
                net: &w.network,
                chip: &w.chip,
                schedule: &w.schedule,
                plan: &plan,
                mapping: &mapping,
            };
            let rep = simulate(input, run.steps, run.event_mode())?;
            sink(report.as_deref())?.write_all(to_toml(&rep)?.as_bytes())?;
            if let Some(p) = steps_csv {
                export::write_steps(sink(Some(&p))?, &rep)?;
            }
            if let Some(p) = cores_csv {
                export::write_cores(sink(Some(&p))?, &rep)?;
            }
            Ok(())
        }
        Command::Sweep {
            config,
            kinds,
            levels,
            mapper,
            run,
            out,
        } => {
            let w = load(&config)?;
            let plan = minimal(&w)?;
            let mapping = mapper.build(&plan, &w)?;
            let mut schedules = Vec::new();
            for &kind in &kinds {
                for &level in &levels {
                    schedules.push(SparsitySchedule::at_level(kind, level)?);
                }
            }
            let input = SimInput {
                net: &w.network,
                chip: &w.chip,
                schedule: &w.schedule,
                plan: &plan,
                mapping: &mapping,
            };
            let points = sweep(input, &schedules, run.steps, run.event_mode())?;
            export::write_points(sink(out.as_deref())?, &points)
        }
        Command::Floorline {
            points,
            config,
            tolerance,
            out,
        } => {
            let pts: Vec<FloorlinePoint> = export::read_points(
                File::open(&points).map_err(|e| Error::Io(format!("{}: {e}", points.display())))?,
            )?;
            let cost = match config {
                Some(c) => load(&c)?.chip.cost,
                None => Default::default(),
            };
            let opts = FitOptions {
                tolerance,
                ..FitOptions::from_cost(&cost)
            };
            let model = fit_floorline(&pts, opts)?;
            sink(out.as_deref())?.write_all(to_toml(&model)?.as_bytes())?;
            Ok(())
        }
        Command::Classify { model, report } => {
            let model: FloorlineModel = from_toml(&model)?;
            let report: SimReport = from_toml(&report)?;
            let point = FloorlinePoint::from_report(&report, "report");
            let state = classify(&point, &model)?;
            let s = suggest(state, &report)?;
            let mut out = io::stdout().lock();
            writeln!(out, "state: {state}")?;
            writeln!(out, "action: {}", s.action)?;
            writeln!(out, "advisory: {}", s.advisory)?;
            Ok(())
        }
        Command::Optimize {
            config,
            budget,
            epsilon_time,
            epsilon_energy,
            run,
            out_dir,
        } => {
            let w = load(&config)?;
            let options = OptimizerOptions {
                budget,
                epsilon_time,
                epsilon_energy,
                mode: run.event_mode(),
                steps: run.steps,
                ..OptimizerOptions::default()
            };
            let outcome = Optimizer::new(&w.network, &w.chip, &w.schedule, options).optimize()?;
            fs::create_dir_all(&out_dir)?;
            write_file(
                &out_dir.join("plan.toml"),
                &to_toml(&outcome.best.plan.to_document())?,
            )?;
            write_file(
                &out_dir.join("mapping.toml"),
                &to_toml(&outcome.best.mapping.to_document())?,
            )?;
            export::write_trace(sink(Some(&out_dir.join("trace.csv")))?, &outcome.trace)?;
            let mut out = io::stdout().lock();
            writeln!(
                out,
                "time {} -> {}, energy {} -> {}, cores {} -> {}, stopped: {}",
                outcome.initial.report.time_per_step,
                outcome.best.report.time_per_step,
                outcome.initial.report.energy_per_step,
                outcome.best.report.energy_per_step,
                outcome.initial.plan.total_cores(),
                outcome.best.plan.total_cores(),
                outcome.stop
            )?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
