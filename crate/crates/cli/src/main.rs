use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use mmseg_core::baseline_hca::hca_segment;
use mmseg_core::config::RunConfig;
use mmseg_core::datamodel::{LoadedVideo, Manifest, SegmentationFile};
use mmseg_core::dcca::{load_checkpoint, save_checkpoint, DccaModel};
use mmseg_core::error::StageContext;
use mmseg_core::eval::{aggregate_rows, sweep_tolerance, write_csv, EvalRow};
use mmseg_core::fusion::ChannelSet;
use mmseg_core::pipeline::{
    prepare, segment_prepared, train_transforms_on, InputMode, RunDiagnostics,
};
use mmseg_core::postprocess::merge_short_segments;
use mmseg_core::synth::generate;
use mmseg_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "mmseg",
    version,
    about = "Unsupervised multimodal temporal segmentation of long videos"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic video with ground truth.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment one or more videos.
    Segment(SegmentArgs),
    /// Score predicted segmentations against references.
    Eval(EvalArgs),
    /// Segment with the hierarchical clustering baseline.
    Hca {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true)]
        manifest: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the temporal signals of a video for plotting.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dcca_checkpoint: Option<PathBuf>,
    },
    /// Train the feature transforms and save a checkpoint. Several manifests
    /// train one corpus-wide pair of transforms.
    TrainDcca {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true)]
        manifest: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the default configuration.
    Defaults {
        /// Reduced network widths for 64/32-d inputs.
        #[arg(long)]
        desk_scale: bool,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; absent fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::read(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.synth.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SegmentArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, required = true)]
    manifest: Vec<PathBuf>,
    /// Output directory; receives `<video_id>.json` and `<video_id>.diagnostics.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "multimodal")]
    modality: InputMode,
    /// Comma-separated channel list (visual,language,wd_v,wd_l,gwd,cca); overrides --modality.
    #[arg(long)]
    channels: Option<ChannelSet>,
    /// Videos processed in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Use saved transforms instead of training per video.
    #[arg(long)]
    dcca_checkpoint: Option<PathBuf>,
    /// Also write `<video_id>.signals.json`.
    #[arg(long)]
    signals: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, required = true)]
    truth: Vec<PathBuf>,
    #[arg(long, required = true)]
    pred: Vec<PathBuf>,
    /// Tolerances in seconds.
    #[arg(long, value_delimiter = ',', default_value = "30")]
    omega: Vec<f64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-prediction F1/precision/recall series over the tolerances.
    #[arg(long)]
    plot_json: Option<PathBuf>,
}

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Io { .. } => 2,
        Error::Numeric(_) | Error::Training { .. } => 3,
        _ => 1,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_video(path: &Path) -> Result<LoadedVideo> {
    Manifest::read(path)?.load()
}

fn load_model(path: Option<&PathBuf>) -> Result<Option<DccaModel>> {
    path.map(load_checkpoint).transpose().stage("dcca")
}

fn cmd_segment(args: &SegmentArgs) -> Result<()> {
    let cfg = args.common.load()?;
    let channels = args.channels.unwrap_or(args.modality.channels());
    let model = load_model(args.dcca_checkpoint.as_ref())?;
    create_dir(&args.out)?;
    let run = |path: &PathBuf| -> Result<()> {
        let video = load_video(path).stage("load")?;
        let id = video.manifest.video_id.clone();
        info!("segmenting {id} with channels {channels}");
        let prepared = prepare(
            &id,
            &video.visual,
            &video.language,
            &video.manifest.sentences,
            &cfg,
            model.as_ref(),
        )?;
        let result = segment_prepared(&prepared, channels, &cfg)?;
        SegmentationFile::new(&id, &result.segmentation)
            .write(args.out.join(format!("{id}.json")))?;
        write_json(
            &args.out.join(format!("{id}.diagnostics.json")),
            &RunDiagnostics::new(&prepared, &result, cfg.seed),
        )?;
        if args.signals {
            let path = args.out.join(format!("{id}.signals.json"));
            fs::write(&path, prepared.signals.to_json()?).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| {
        args.manifest
            .par_iter()
            .map(run)
            .collect::<Result<Vec<()>>>()
    })?;
    Ok(())
}

#[derive(Serialize)]
struct PlotSeries {
    pred: String,
    video_id: String,
    omega_t: Vec<f64>,
    precision: Vec<f64>,
    recall: Vec<f64>,
    f1: Vec<f64>,
}

#[derive(Serialize)]
struct PlotData {
    format_version: u32,
    series: Vec<PlotSeries>,
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    if args.omega.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument(
            "tolerances must be finite and non-negative".into(),
        ));
    }
    let mut truths = HashMap::new();
    for path in &args.truth {
        let file = SegmentationFile::read(path)?;
        truths.insert(file.video_id.clone(), file.to_segmentation()?);
    }
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for path in &args.pred {
        let file = SegmentationFile::read(path)?;
        let pred = file.to_segmentation()?;
        let reference = match truths.get(&file.video_id) {
            Some(r) => r,
            None if truths.len() == 1 && args.pred.len() == 1 => {
                truths.values().next().expect("one truth")
            }
            None => {
                return Err(Error::InvalidArgument(format!(
                    "no reference for video '{}'",
                    file.video_id
                )))
            }
        };
        let sweep = sweep_tolerance(&pred, reference, &args.omega)?;
        series.push(PlotSeries {
            pred: path.display().to_string(),
            video_id: file.video_id.clone(),
            omega_t: sweep.iter().map(|(w, _)| *w).collect(),
            precision: sweep.iter().map(|(_, m)| m.precision).collect(),
            recall: sweep.iter().map(|(_, m)| m.recall).collect(),
            f1: sweep.iter().map(|(_, m)| m.f1).collect(),
        });
        rows.extend(sweep.into_iter().map(|(omega_t, metrics)| EvalRow {
            video_id: file.video_id.clone(),
            omega_t,
            metrics,
        }));
    }
    if args.pred.len() > 1 {
        rows.extend(aggregate_rows(&rows));
    }
    match &args.out {
        Some(path) => {
            let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
            write_csv(&rows, f)?;
        }
        None => write_csv(&rows, std::io::stdout().lock())?,
    }
    if let Some(path) = &args.plot_json {
        write_json(
            path,
            &PlotData {
                format_version: 1,
                series,
            },
        )?;
    }
    Ok(())
}

fn cmd_hca(common: &Common, manifests: &[PathBuf], out: &Path) -> Result<()> {
    let cfg = common.load()?;
    create_dir(out)?;
    for path in manifests {
        let video = load_video(path).stage("load")?;
        let id = &video.manifest.video_id;
        let seg = hca_segment(&video.visual, &cfg.hca).stage("hca")?;
        let merged = merge_short_segments(&seg, &video.visual, &video.language, &cfg.merge)
            .stage("merge")?;
        SegmentationFile::new(id, &merged).write(out.join(format!("{id}.json")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { common, out } => {
            let cfg = common.load()?;
            let video = generate(&cfg.synth)?;
            video.write(&out)?;
            info!("wrote {} to {}", video.video_id, out.display());
            Ok(())
        }
        Command::Segment(args) => cmd_segment(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Hca {
            common,
            manifest,
            out,
        } => cmd_hca(&common, &manifest, &out),
        Command::Report {
            common,
            manifest,
            out,
            dcca_checkpoint,
        } => {
            let cfg = common.load()?;
            let model = load_model(dcca_checkpoint.as_ref())?;
            let video = load_video(&manifest).stage("load")?;
            let prepared = prepare(
                &video.manifest.video_id,
                &video.visual,
                &video.language,
                &video.manifest.sentences,
                &cfg,
                model.as_ref(),
            )?;
            fs::write(&out, prepared.signals.to_json()?).map_err(|e| Error::io(&out, e))
        }
        Command::TrainDcca {
            common,
            manifest,
            out,
        } => {
            let cfg = common.load()?;
            let videos = manifest
                .iter()
                .map(|m| load_video(m))
                .collect::<Result<Vec<_>>>()
                .stage("load")?;
            let pairs: Vec<_> = videos.iter().map(|v| (&v.visual, &v.language)).collect();
            let (model, trace) = train_transforms_on(&pairs, &cfg)?;
            save_checkpoint(&model, &out)?;
            info!(
                "final total correlation {:.4}",
                trace.last().copied().unwrap_or(f64::NAN)
            );
            Ok(())
        }
        Command::Defaults { desk_scale } => {
            let cfg = if desk_scale {
                RunConfig::desk_scale()
            } else {
                RunConfig::default()
            };
            // a closed pipe (`mmseg defaults | head`) is not an error
            let _ = writeln!(std::io::stdout().lock(), "{}", cfg.to_json()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
