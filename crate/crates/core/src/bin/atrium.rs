use std::path::PathBuf;
use std::process::ExitCode;

use atrium_recon::pipeline::{self, Overrides, PipelineConfig, SwrPreset};
use atrium_recon::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "atrium", version, about = "Left-atrium reconstruction from catheter paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON pipeline config; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Voxels per axis of a centered cubic grid.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    spacing_mm: Option<f64>,
    /// Output directory (output file for export-mesh).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic atrium dataset and its mean shape.
    GenShapes {
        #[command(flatten)]
        common: Common,
    },
    /// Synthesize catheter paths beside every sample of the dataset at `--out`.
    GenPaths {
        #[command(flatten)]
        common: Common,
    },
    /// Train a network on the training split and write a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, conflicts_with = "swr")]
        lambda_swr: Option<f64>,
        /// Named SWR strength: none, small or large.
        #[arg(long)]
        swr: Option<SwrPreset>,
    },
    /// Reconstruct the test split, or one external path.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// External path CSV (x_mm,y_mm,z_mm,section).
        #[arg(long, requires = "landmarks")]
        path_csv: Option<PathBuf>,
        /// Landmark JSON of the external path.
        #[arg(long, requires = "path_csv")]
        landmarks: Option<PathBuf>,
    },
    /// Score reconstructions against the truth and the mean shape.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        recon: PathBuf,
    },
    /// Extract an iso-surface of a stored volume as OBJ.
    ExportMesh {
        #[command(flatten)]
        common: Common,
        /// Volume stem or `.vol.json` file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iso: f64,
    },
}

fn resolve(common: &Common, extra: Overrides) -> Result<PipelineConfig, Error> {
    let overrides = Overrides {
        seed: common.seed,
        grid: common.grid,
        spacing_mm: common.spacing_mm,
        ..extra
    };
    PipelineConfig::resolve(common.config.as_deref(), &overrides)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::GenShapes { common } => {
            let cfg = resolve(&common, Overrides::default())?;
            let m = pipeline::gen_shapes(&cfg, &common.out)?;
            println!("wrote {} train + {} test samples to {}", m.n_train, m.n_test, common.out.display());
        }
        Command::GenPaths { common } => {
            let cfg = resolve(&common, Overrides::default())?;
            let dataset = common.out;
            let paths = pipeline::gen_paths(&cfg, &dataset)?;
            if !paths.failed.is_empty() {
                eprintln!("{} sample(s) failed; see {}", paths.failed.len(), pipeline::MANIFEST);
                return Ok(ExitCode::from(2));
            }
            println!("paths written to {}", dataset.display());
        }
        Command::Train {
            common,
            dataset,
            epochs,
            lambda_swr,
            swr,
        } => {
            let extra = Overrides {
                epochs,
                lambda_swr: lambda_swr.or(swr.map(SwrPreset::lambda)),
                ..Overrides::default()
            };
            let cfg = resolve(&common, extra)?;
            let (_, log) = pipeline::train(&cfg, &dataset, &common.out)?;
            if let Some(last) = log.epochs.last() {
                println!("final loss {:.5}, validation dice {:?}", last.loss.total, last.val_dice);
            }
        }
        Command::Infer {
            common,
            model,
            dataset,
            path_csv,
            landmarks,
        } => {
            let cfg = resolve(&common, Overrides::default())?;
            match (path_csv, landmarks) {
                (Some(csv), Some(lm)) => {
                    let t = pipeline::infer_external(&cfg, &model, &dataset, &csv, &lm, &common.out)?;
                    println!("registered with rotation deviation {:.3e} rad", t.rotation_deviation());
                }
                _ => {
                    let ids = pipeline::infer(&cfg, &model, &dataset, &common.out)?;
                    println!("reconstructed {} samples", ids.len());
                }
            }
        }
        Command::Eval { common, dataset, recon } => {
            let cfg = resolve(&common, Overrides::default())?;
            let r = pipeline::eval(&cfg, &dataset, &recon, &common.out)?;
            println!("dice {:.4} avdist {:.3} mm", r.dice, r.avdist_mm);
            if let Some(b) = r.baseline {
                println!("mean shape: dice {:.4} avdist {:.3} mm", b.dice, b.avdist_mm);
            }
        }
        Command::ExportMesh { common, input, iso } => {
            let mesh = pipeline::export_mesh(&input, iso, &common.out)?;
            println!("{} vertices, {} faces", mesh.vertices().len(), mesh.faces().len());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            let record = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
