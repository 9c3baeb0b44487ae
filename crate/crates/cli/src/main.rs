use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mldmae::checkpoint::Checkpoint;
use mldmae::cloud_io::{save_cloud, write_empty};
use mldmae::config::ExperimentConfig;
use mldmae::pipeline::{self, CHECKPOINT_FILE, EVAL_SAMPLES_FILE, EVAL_TRUTH_FILE, LOG_FILE, REPORT_CSV, REPORT_TXT, SAMPLES_FILE};
use mldmae::{CliError, Result};
use mldmae_core::evalsuite::{format_report_csv, format_report_text, parse_report_csv};

/// Mixtures of latent-distribution-matched autoencoders for data on
/// low-dimensional manifolds.
#[derive(Parser)]
#[command(name = "mldmae", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the training and validation clouds.
    Generate(Common),
    /// Fit the configured method on the generated data.
    Train(Common),
    /// Draw samples from a checkpoint.
    Sample {
        /// Experiment config; supplies the default checkpoint and seed.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint to sample; defaults to the run's checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Number of points.
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a checkpoint against fresh ground truth.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Checkpoint to score; defaults to the run's checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Generate, train and evaluate in one go.
    Run(Common),
    /// Merge report files (or run directories) into one table.
    Report {
        /// Directory for table.csv and table.txt.
        #[arg(long)]
        out: PathBuf,
        /// report.csv files or directories holding one.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

struct Context {
    cfg: ExperimentConfig,
    out: PathBuf,
}

fn context(common: &Common) -> Result<Context> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set `out` in the config".into()))?;
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    Ok(Context { cfg, out })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn generate(ctx: &Context) -> Result<()> {
    let data = pipeline::generate(&ctx.cfg)?;
    pipeline::write_datasets(&ctx.out, &data)?;
    println!(
        "{}: {} training points, {} validation points in {}",
        ctx.cfg.name,
        data.train.len(),
        data.validation.as_ref().map_or(0, |v| v.len()),
        ctx.out.display()
    );
    Ok(())
}

fn train(ctx: &Context) -> Result<()> {
    let data = pipeline::read_datasets(&ctx.out)?;
    let start = Instant::now();
    let trained = pipeline::train(&ctx.cfg, &data)?;
    let seconds = start.elapsed().as_secs_f64();
    pipeline::write_trained(&ctx.out, &trained)?;
    let mut log = format!("train_seconds={seconds}\n");
    if let Some(h) = &trained.history {
        log.push_str(&format!(
            "passes={} accepted_refresh_rounds={} validation={:?} collapsed={:?} skipped_penalties={}\n",
            h.passes,
            h.accepted_rounds,
            h.validation,
            h.collapsed,
            h.skipped_penalties()
        ));
    }
    if let Some(sel) = &trained.kde_selection {
        log.push_str(&format!("kde_bandwidth={} scores={:?}\n", sel.bandwidth, sel.scores));
    }
    write(&ctx.out.join(LOG_FILE), &log)?;
    println!(
        "{}: trained {} ({} parameters) in {seconds:.1}s",
        ctx.cfg.name,
        ctx.cfg.method.name(),
        trained.checkpoint.param_count()
    );
    Ok(())
}

fn train_seconds(dir: &Path) -> f64 {
    fs::read_to_string(dir.join(LOG_FILE))
        .ok()
        .and_then(|t| t.lines().find_map(|l| l.strip_prefix("train_seconds=")?.parse().ok()))
        .unwrap_or(0.0)
}

fn evaluate(ctx: &Context, checkpoint: Option<&Path>) -> Result<()> {
    let path = checkpoint.map_or_else(|| ctx.out.join(CHECKPOINT_FILE), Path::to_path_buf);
    let ck = Checkpoint::load(&path)?;
    let start = Instant::now();
    let mut ev = pipeline::evaluate(&ctx.cfg, &ck)?;
    ev.report.runtime_seconds = train_seconds(&ctx.out) + start.elapsed().as_secs_f64();
    let reports = [ev.report];
    write(&ctx.out.join(REPORT_CSV), &format_report_csv(&reports)?)?;
    let text = format_report_text(&reports)?;
    write(&ctx.out.join(REPORT_TXT), &text)?;
    save_cloud(&ev.samples, &ctx.out.join(EVAL_SAMPLES_FILE))?;
    save_cloud(&ev.truth, &ctx.out.join(EVAL_TRUTH_FILE))?;
    print!("{text}");
    Ok(())
}

fn sample(config: Option<&Path>, checkpoint: Option<&Path>, count: usize, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let cfg = config.map(ExperimentConfig::load).transpose()?;
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.as_ref().and_then(|c| c.out.clone()))
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set `out` in the config".into()))?;
    let path = match checkpoint {
        Some(p) => p.to_path_buf(),
        None if cfg.is_some() => out.join(CHECKPOINT_FILE),
        None => return Err(CliError::Usage("pass --checkpoint or --config".into())),
    };
    let seed = seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
    let ck = Checkpoint::load(&path)?;
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let target = out.join(SAMPLES_FILE);
    if count == 0 {
        let file = fs::File::create(&target).map_err(|e| CliError::io(&target, e))?;
        write_empty(ck.ambient_dim(), file).map_err(|e| CliError::io(&target, e))?;
    } else {
        save_cloud(&ck.sample(count, seed)?, &target)?;
    }
    println!("{count} samples in {}", target.display());
    Ok(())
}

fn report(out: &Path, inputs: &[PathBuf]) -> Result<()> {
    let mut rows = Vec::new();
    for input in inputs {
        let path = if input.is_dir() { input.join(REPORT_CSV) } else { input.clone() };
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        rows.extend(parse_report_csv(&text).map_err(|e| CliError::Schema {
            path: path.clone(),
            message: e.to_string(),
        })?);
    }
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write(&out.join("table.csv"), &format_report_csv(&rows)?)?;
    let text = format_report_text(&rows)?;
    write(&out.join("table.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(c) => generate(&context(&c)?),
        Command::Train(c) => train(&context(&c)?),
        Command::Sample {
            config,
            checkpoint,
            count,
            seed,
            out,
        } => sample(config.as_deref(), checkpoint.as_deref(), count, seed, out.as_deref()),
        Command::Evaluate { common, checkpoint } => evaluate(&context(&common)?, checkpoint.as_deref()),
        Command::Run(c) => {
            let ctx = context(&c)?;
            generate(&ctx)?;
            train(&ctx)?;
            evaluate(&ctx, None)
        }
        Command::Report { out, inputs } => report(&out, &inputs),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
