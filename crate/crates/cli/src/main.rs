use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qgan_mark::experiments::{
    cmd_build_dataset, cmd_fid, cmd_tamper, cmd_train_classifier, cmd_train_qgan, cmd_verify, collision_report,
    verdict_exit_code, CollisionQuery, Context, ExperimentConfig, Preset, Suspect,
};
use qgan_mark::{Error, Result};

/// Hardware-noise watermarking for patch quantum GANs.
#[derive(Parser, Debug)]
#[command(name = "qgan-mark", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML file laid over the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Base settings: desk or full.
    #[arg(long, global = true, default_value = "desk")]
    preset: String,
    /// Directory of hardware profile files.
    #[arg(long, global = true)]
    profiles_dir: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one generator per configured schedule.
    TrainQgan,
    /// Generate labelled training and test images from the trained generators.
    BuildDataset,
    /// Train the watermark classifier and compute its threshold.
    TrainClassifier,
    /// Check whether a batch of images carries a claimed watermark.
    Verify {
        /// Claimed schedule label, e.g. `ibm_athens>ibm_jakarta`.
        #[arg(long)]
        claim: Option<String>,
        /// Dataset file with suspect images.
        #[arg(long, conflicts_with = "model")]
        images: Option<PathBuf>,
        /// Only use rows of the dataset with this training label.
        #[arg(long, requires = "images")]
        train_label: Option<String>,
        /// Generator checkpoint to sample suspect images from.
        #[arg(long, requires = "infer")]
        model: Option<PathBuf>,
        /// Profile to run the checkpoint on.
        #[arg(long)]
        infer: Option<String>,
    },
    /// Fine-tune a generator on another profile and re-verify it.
    Tamper {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// FID between real digits and every trained generator.
    Fid,
    /// Probability that another user picks the same hardware sequence.
    Collision {
        /// Suite size.
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Sequence length.
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
}

fn config(g: &Global) -> Result<ExperimentConfig> {
    let preset: Preset = g.preset.parse()?;
    let mut cfg = ExperimentConfig::load(g.config.as_deref(), preset)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(p) = &g.profiles_dir {
        cfg.profiles_dir = Some(p.clone());
    }
    if let Some(o) = &g.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn emit<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serialises"));
}

fn run(cli: Cli) -> Result<i32> {
    if let Command::Collision { n, k } = cli.command {
        emit(&collision_report(CollisionQuery { n, k })?);
        return Ok(0);
    }
    let ctx = Context::new(config(&cli.global)?)?;
    match cli.command {
        Command::TrainQgan => emit(&cmd_train_qgan(&ctx)?),
        Command::BuildDataset => emit(&cmd_build_dataset(&ctx)?),
        Command::TrainClassifier => emit(&cmd_train_classifier(&ctx)?),
        Command::Verify {
            claim,
            images,
            train_label,
            model,
            infer,
        } => {
            let suspect = match (images, model, infer) {
                (Some(path), _, _) => Suspect::Images { path, train_label },
                (None, Some(checkpoint), Some(infer)) => Suspect::Model { checkpoint, infer },
                _ => return Err(Error::Config("verify needs --images or --model with --infer".into())),
            };
            let v = cmd_verify(&ctx, &suspect, claim.as_deref())?;
            emit(&v);
            return Ok(verdict_exit_code(&v));
        }
        Command::Tamper { model, profile, epochs } => {
            let r = cmd_tamper(&ctx, model.as_deref(), profile.as_deref(), epochs)?;
            emit(&r);
            return Ok(verdict_exit_code(&r.verdict));
        }
        Command::Fid => emit(&cmd_fid(&ctx)?),
        Command::Collision { .. } => unreachable!("handled above"),
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
