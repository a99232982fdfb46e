use std::path::PathBuf;
use std::process::ExitCode;

use cellmine_cli::config::{GatewayMode, ModelKind, Overrides, PipelineConfig, TargetKind};
use cellmine_cli::manifest::Manifest;
use cellmine_cli::{
    gen_fixtures_from_specs, gen_fixtures_suite, predict_csv, run_pipeline, run_stage, write_file, CliError, Stage,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cellmine", version, about = "Mine battery papers into a cell database and train cyclability models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline config (TOML).
    #[arg(short, long, default_value = "pipeline.toml")]
    config: PathBuf,
    /// Working directory for artifacts and the manifest.
    #[arg(long)]
    work: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Gateway mode for text mining.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    target: Option<TargetArg>,
    /// Target cycle for capacity and stability tasks.
    #[arg(long)]
    cycle: Option<u32>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Replay,
    Record,
    Live,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    InitialCapacity,
    CapacityAtCycle,
    Stability,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Rf,
    Gbm,
}

#[derive(Subcommand)]
enum Command {
    /// Parse corpus papers into sectioned documents.
    Ingest(Common),
    /// Run the staged text extraction through the gateway.
    MineText(Common),
    /// Digitize every classified cycle graph.
    MineGraph(Common),
    /// Render plot fixtures from spec files or a generated suite.
    GenFixtures {
        /// Directory of `*.fixture.json` specs.
        #[arg(long, conflicts_with = "suite")]
        specs: Option<PathBuf>,
        /// Generated suite: standard, ce, ambiguous or all.
        #[arg(long)]
        suite: Option<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory; defaults to the specs directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Join text and graph extractions into the cell database.
    Merge(Common),
    /// Filter the database and write the feature matrix for the task.
    Encode(Common),
    /// Split the feature matrix and fit the configured model.
    Train(Common),
    /// Predict every row of a feature CSV with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score the model on its held-out rows and write reports.
    Evaluate(Common),
    /// Run stages in order (all by default), skipping unchanged ones.
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of stages.
        #[arg(long, value_delimiter = ',')]
        stages: Vec<String>,
    },
}

fn load(c: &Common) -> Result<PipelineConfig, CliError> {
    let mut cfg = PipelineConfig::load(&c.config)?;
    cfg.apply(&Overrides {
        work: c.work.clone(),
        seed: c.seed,
        mode: c.mode.map(|m| match m {
            ModeArg::Replay => GatewayMode::Replay,
            ModeArg::Record => GatewayMode::Record,
            ModeArg::Live => GatewayMode::Live,
        }),
        target: c.target.map(|t| match t {
            TargetArg::InitialCapacity => TargetKind::InitialCapacity,
            TargetArg::CapacityAtCycle => TargetKind::CapacityAtCycle,
            TargetArg::Stability => TargetKind::Stability,
        }),
        target_cycle: c.cycle,
        model: c.model.map(|m| match m {
            ModelArg::Rf => ModelKind::Rf,
            ModelArg::Gbm => ModelKind::Gbm,
        }),
    });
    cfg.validate()?;
    Ok(cfg)
}

fn single(c: &Common, stage: Stage) -> Result<(), CliError> {
    let cfg = load(c)?;
    let mut manifest = Manifest::load(&cfg.paths.work);
    let report = run_stage(&cfg, stage, &mut manifest)?;
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest(c) => single(&c, Stage::Ingest),
        Command::MineText(c) => single(&c, Stage::MineText),
        Command::MineGraph(c) => single(&c, Stage::MineGraph),
        Command::Merge(c) => single(&c, Stage::Merge),
        Command::Encode(c) => single(&c, Stage::Encode),
        Command::Train(c) => single(&c, Stage::Train),
        Command::Evaluate(c) => single(&c, Stage::Evaluate),
        Command::Pipeline { common, stages } => {
            let cfg = load(&common)?;
            let stages = if stages.is_empty() {
                Stage::ALL.to_vec()
            } else {
                stages
                    .iter()
                    .map(|s| {
                        Stage::parse(s.trim()).ok_or_else(|| CliError::ConfigInvalid(format!("unknown stage {s:?}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?
            };
            for report in run_pipeline(&cfg, &stages)? {
                println!("{}", serde_json::to_string(&report).expect("report serializes"));
            }
            Ok(())
        }
        Command::GenFixtures { specs, suite, seed, out } => {
            let written = match (specs, suite) {
                (Some(dir), None) => gen_fixtures_from_specs(&dir, out.as_deref().unwrap_or(&dir))?,
                (None, Some(name)) => {
                    let out = out.ok_or_else(|| CliError::ConfigInvalid("--suite needs --out".into()))?;
                    gen_fixtures_suite(&name, seed, &out)?
                }
                _ => return Err(CliError::ConfigInvalid("give --specs or --suite".into())),
            };
            for p in written {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Predict { model, dataset, out } => {
            let csv = predict_csv(&model, &dataset)?;
            match out {
                Some(p) => write_file(&p, csv.as_bytes()),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
