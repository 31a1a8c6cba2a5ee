//! `anchorkit` — perspective-aware anchor optimization pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use anchorkit::commands;
use anchorkit::config::KvConfig;
use anchorkit::GlobalOpts;
use anchorkit_core::anchor_opt::DEFAULT_SEED;
use anchorkit_core::data::CameraGroup;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "anchorkit",
    version,
    about = "Perspective-aware anchor optimization for 2D detection: dataset statistics, \
             image-region division, evolutionary anchor search, detection fusion, and AP evaluation"
)]
struct Cli {
    /// Seed for every randomized stage; fixed default keeps runs reproducible
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Key-value configuration file (flags take precedence)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for artifacts and the run manifest
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Restrict the dataset to one camera group
    #[arg(long, global = true, value_enum, default_value_t = CameraGroupArg::All)]
    camera_group: CameraGroupArg,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CameraGroupArg {
    All,
    Frontal,
    Lateral,
}

impl From<CameraGroupArg> for CameraGroup {
    fn from(arg: CameraGroupArg) -> Self {
        match arg {
            CameraGroupArg::All => CameraGroup::All,
            CameraGroupArg::Frontal => CameraGroup::Frontal,
            CameraGroupArg::Lateral => CameraGroup::Lateral,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Dataset statistics and the position-size correlation chart
    Analyze {
        /// Annotations file (.jsonl or .csv)
        #[arg(long)]
        annotations: PathBuf,
    },
    /// Derive the vertical region partition from shape clustering
    Cluster {
        #[arg(long)]
        annotations: PathBuf,
        /// Smallest cluster count tried
        #[arg(long, default_value_t = 2)]
        k_min: usize,
        /// Largest cluster count tried
        #[arg(long, default_value_t = 6)]
        k_max: usize,
        /// Also derive separate frontal/lateral partitions
        #[arg(long)]
        split_cameras: bool,
    },
    /// Evolve per-region anchor configurations
    Optimize {
        #[arg(long)]
        annotations: PathBuf,
        /// partition.json produced by `cluster`
        #[arg(long)]
        partition: PathBuf,
        /// Run the search separately for frontal and lateral cameras
        #[arg(long)]
        split_cameras: bool,
        /// Include a 12-anchor K-means baseline in the report
        #[arg(long)]
        baseline_kmeans: bool,
    },
    /// Score an anchors file against a dataset
    EvalCoverage {
        #[arg(long)]
        annotations: PathBuf,
        /// anchors.json produced by `optimize`
        #[arg(long)]
        anchors: PathBuf,
    },
    /// K-means anchor baseline over raw box dimensions
    KmeansAnchors {
        #[arg(long)]
        annotations: PathBuf,
        /// Number of anchors to cluster
        #[arg(long, default_value_t = 12)]
        k: usize,
    },
    /// Fuse detections from several models (affirmative NMS)
    Ensemble {
        /// Detection file of one model; repeat per model
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        /// De-augment scale-TTA detections before fusing
        #[arg(long)]
        tta: bool,
    },
    /// Interpolated AP with per-class IoU thresholds
    EvalAp {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (config, config_text) = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| anyhow::anyhow!("reading config {}: {e}", path.display()))?;
            (KvConfig::parse(&text)?, Some(text))
        }
        None => (KvConfig::default(), None),
    };
    let opts = GlobalOpts {
        seed: cli.seed,
        out_dir: cli.out_dir,
        camera_group: cli.camera_group.into(),
        config,
        config_text,
    };
    match cli.command {
        Command::Analyze { annotations } => commands::analyze(&opts, &annotations),
        Command::Cluster {
            annotations,
            k_min,
            k_max,
            split_cameras,
        } => commands::cluster(&opts, &annotations, k_min, k_max, split_cameras),
        Command::Optimize {
            annotations,
            partition,
            split_cameras,
            baseline_kmeans,
        } => commands::optimize(
            &opts,
            &annotations,
            &partition,
            split_cameras,
            baseline_kmeans,
        ),
        Command::EvalCoverage {
            annotations,
            anchors,
        } => commands::eval_coverage(&opts, &annotations, &anchors),
        Command::KmeansAnchors { annotations, k } => {
            commands::kmeans_anchors(&opts, &annotations, k)
        }
        Command::Ensemble { models, tta } => commands::ensemble(&opts, &models, tta),
        Command::EvalAp {
            detections,
            annotations,
        } => commands::eval_ap(&opts, &detections, &annotations),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => match err.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                let _ = err.print();
                return ExitCode::SUCCESS;
            }
            _ => {
                let _ = err.print();
                return ExitCode::from(1);
            }
        },
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.is::<anchorkit::InternalError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
