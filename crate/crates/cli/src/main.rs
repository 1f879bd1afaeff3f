use std::collections::BTreeMap;
use std::fs;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tracing::{info, warn};

use egogaze::config::DogEntry;
use egogaze::io::{
    read_calibration, read_fixations, read_gaze, read_records, write_fixations, write_records,
};
use egogaze::saliency::{evaluate_saliency, map_index, FileIndex, MapSource, SaliencyMode};
use egogaze::seg_eval::evaluate;
use egogaze::stats::RowMode;
use egogaze::synth::{write_synth, Manifest};
use egogaze::{
    batch_attribute, build_report, chi_square_critical, estimate_accuracy, extract_fixations,
    prediction_fit, stats_report, synth_corpus, ChiInput, ChiMode, CorpusSet, DogProfile, Fixation,
    PipelineConfig, ReportInputs, SegmentationCorpus, SynthConfig,
};

const EXIT_VALIDATION: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "egogaze",
    version,
    about = "Gaze-to-object attribution for head-mounted eye tracking"
)]
struct Cli {
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// More log output on stderr (repeat for trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect fixations in gaze recordings.
    Fixations(FixationsArgs),
    /// Attribute fixations to object classes.
    Attribute(AttributeArgs),
    /// Score predicted segmentations against ground truth.
    SegEval(SegEvalArgs),
    /// Behaviour statistics over attribution records.
    Stats(StatsArgs),
    /// Score saliency maps against fixation regions.
    Saliency(SaliencyArgs),
    /// Generate a synthetic walk with planted ground truth.
    Synth(SynthArgs),
    /// Attribution, statistics and saliency in one document.
    Report(ReportArgs),
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Spatial accuracy of a dog, in degrees.
    #[arg(long = "dog", value_name = "ID=DEGREES")]
    dogs: Vec<String>,
    /// Calibration CSV from which a dog's accuracy is estimated.
    #[arg(long = "calibration", value_name = "ID=PATH")]
    calibrations: Vec<String>,
}

#[derive(Args)]
struct DataArgs {
    /// Directory laid out like `synth` output; fills in any input not given.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Segmentation corpus JSON, one per dog or one shared.
    #[arg(long = "frames")]
    frames: Vec<PathBuf>,
    /// Gaze CSV named `gaze_<dog>.csv`.
    #[arg(long = "gaze")]
    gaze: Vec<PathBuf>,
    /// Fixation CSV; takes precedence over gaze recordings.
    #[arg(long)]
    fixations: Option<PathBuf>,
}

#[derive(Args)]
struct ChiArgs {
    #[arg(long, value_name = "pearson|symmetric")]
    chi_mode: Option<ChiMode>,
    #[arg(long, value_name = "probabilities|counts")]
    chi_input: Option<ChiInput>,
    /// Count background pixels as a class.
    #[arg(long)]
    include_background: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    dof: Option<u32>,
}

#[derive(Args)]
struct FixationsArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Dispersion threshold in degrees.
    #[arg(long)]
    dispersion_deg: Option<f64>,
    /// Minimum fixation duration in milliseconds.
    #[arg(long)]
    min_duration_ms: Option<f64>,
}

#[derive(Args)]
struct AttributeArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    chi: ChiArgs,
    /// Predicted corpora compared against the ground-truth attribution.
    #[arg(long = "pred")]
    pred: Vec<PathBuf>,
}

#[derive(Args)]
struct SegEvalArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    iou_threshold: Option<f64>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Attribution records (JSON lines).
    #[arg(long)]
    attribution: PathBuf,
    #[arg(long = "frames", required = true)]
    frames: Vec<PathBuf>,
    /// Weight logistic-regression rows by class probability.
    #[arg(long, conflicts_with = "unweighted_lr")]
    weighted_lr: bool,
    /// One unweighted row per in-view class.
    #[arg(long)]
    unweighted_lr: bool,
}

#[derive(Args)]
struct SaliencyArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Attribution records (JSON lines).
    #[arg(long)]
    attribution: PathBuf,
    #[arg(long = "frames", required = true)]
    frames: Vec<PathBuf>,
    /// Precomputed grayscale maps, file names keyed by frame index.
    #[arg(
        long,
        required_unless_present = "generate",
        conflicts_with = "generate"
    )]
    maps: Option<PathBuf>,
    /// Compute maps from scene images with the built-in model.
    #[arg(long, requires = "images")]
    generate: bool,
    /// Scene images, file names keyed by frame index.
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long, value_name = "color|gray")]
    mode: Option<SaliencyMode>,
}

#[derive(Args)]
struct SynthArgs {
    /// Synthesis configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to --out-dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write PNG renderings of every frame.
    #[arg(long)]
    render_frames: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Predicted corpora compared against the ground-truth attribution.
    #[arg(long = "pred")]
    pred: Vec<PathBuf>,
    /// Precomputed saliency maps.
    #[arg(long)]
    maps: Option<PathBuf>,
    /// Scene images for the built-in saliency model, scored in both modes.
    #[arg(long)]
    images: Option<PathBuf>,
    /// Planted-truth manifest from `synth`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Exit 1 when a planted check fails.
    #[arg(long)]
    check: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.verbose, cli.quiet);
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => tracing::Level::ERROR,
        (false, 0) => tracing::Level::INFO,
        (false, 1) => tracing::Level::DEBUG,
        _ => tracing::Level::TRACE,
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_max_level(level)
        .with_target(false)
        .without_time()
        .init();
}

/// The error chain joined with `: `, skipping causes the previous message
/// already ends with.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if out.ends_with(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<egogaze::Error>() {
            return if err.is_io() {
                EXIT_IO
            } else {
                EXIT_VALIDATION
            };
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_VALIDATION
}

fn run(cli: Cli) -> Result<u8> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .context("configuring the thread pool")?;
    let ctx = Ctx {
        seed: cli.seed,
        out_dir: cli.out_dir,
    };
    match cli.command {
        Command::Fixations(a) => cmd_fixations(&ctx, a),
        Command::Attribute(a) => cmd_attribute(&ctx, a),
        Command::SegEval(a) => cmd_seg_eval(&ctx, a),
        Command::Stats(a) => cmd_stats(&ctx, a),
        Command::Saliency(a) => cmd_saliency(&ctx, a),
        Command::Synth(a) => cmd_synth(&ctx, a),
        Command::Report(a) => cmd_report(&ctx, a),
    }
}

struct Ctx {
    seed: Option<u64>,
    out_dir: PathBuf,
}

impl Ctx {
    fn output(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir).map_err(|e| io_error(&self.out_dir, e))?;
        Ok(self.out_dir.join(name))
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.output(name)?;
        fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        info!(path = %path.display(), "wrote");
        Ok(path)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> anyhow::Error {
    anyhow::Error::new(e).context(path.display().to_string())
}

fn load_config(ctx: &Ctx, args: &PipelineArgs) -> Result<(PipelineConfig, bool)> {
    let (mut cfg, explicit) = match &args.config {
        Some(p) => (PipelineConfig::load(p)?, true),
        None => (PipelineConfig::default(), false),
    };
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    for spec in &args.dogs {
        let (id, deg) = split_pair(spec, "--dog")?;
        let deg: f64 = deg.parse().map_err(|_| {
            egogaze::Error::Validation(format!("--dog {spec}: `{deg}` is not a number"))
        })?;
        upsert_dog(&mut cfg, id, Some(deg), None);
    }
    for spec in &args.calibrations {
        let (id, path) = split_pair(spec, "--calibration")?;
        let path = std::env::current_dir()
            .map(|d| d.join(path))
            .unwrap_or_else(|_| path.into());
        upsert_dog(&mut cfg, id, None, Some(path));
    }
    cfg.validate()?;
    Ok((cfg, explicit))
}

fn split_pair<'a>(spec: &'a str, flag: &str) -> Result<(&'a str, &'a str)> {
    spec.split_once('=')
        .filter(|(id, v)| !id.is_empty() && !v.is_empty())
        .ok_or_else(|| {
            egogaze::Error::Validation(format!("{flag} expects ID=VALUE, got `{spec}`")).into()
        })
}

fn upsert_dog(
    cfg: &mut PipelineConfig,
    id: &str,
    accuracy: Option<f64>,
    calibration: Option<PathBuf>,
) {
    match cfg.dogs.iter_mut().find(|d| d.id == id) {
        Some(d) => {
            if accuracy.is_some() {
                d.accuracy_deg = accuracy;
            }
            if calibration.is_some() {
                d.accuracy_deg = accuracy;
                d.calibration = calibration;
            }
        }
        None => cfg.dogs.push(DogEntry {
            id: id.to_string(),
            accuracy_deg: accuracy,
            calibration,
        }),
    }
}

/// Checks every corpus against the configured camera and taxonomy. Without
/// a config file the corpus headers become the configuration.
fn check_headers(cfg: &mut PipelineConfig, corpora: &CorpusSet, explicit: bool) -> Result<()> {
    let mut iter = corpora.corpora();
    let Some(first) = iter.next() else {
        bail!(egogaze::Error::Validation(
            "no segmentation corpus given".into()
        ));
    };
    if !explicit {
        cfg.camera = first.camera;
        cfg.taxonomy = first.taxonomy.clone();
    }
    for c in std::iter::once(first).chain(iter) {
        let who = c.dog_id.as_deref().unwrap_or("shared");
        if c.taxonomy != cfg.taxonomy {
            bail!(egogaze::Error::Validation(format!(
                "corpus `{who}`: class taxonomy differs from the configuration"
            )));
        }
        if c.camera != cfg.camera {
            bail!(egogaze::Error::Validation(format!(
                "corpus `{who}`: camera {:?} differs from the configuration {:?}",
                c.camera, cfg.camera
            )));
        }
    }
    Ok(())
}

/// Inputs resolved from explicit flags and an optional data directory.
#[derive(Default)]
struct Resolved {
    frames: Vec<PathBuf>,
    gaze: Vec<PathBuf>,
    calibration: Vec<PathBuf>,
    pred: Vec<PathBuf>,
    images: Option<PathBuf>,
    manifest: Option<PathBuf>,
}

fn list_prefixed(dir: &Path, prefix: &str, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_error(dir, e))? {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with(prefix) && name.ends_with(ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn resolve_data(data: &DataArgs) -> Result<Resolved> {
    let mut r = Resolved {
        frames: data.frames.clone(),
        gaze: data.gaze.clone(),
        ..Resolved::default()
    };
    if let Some(dir) = &data.data {
        if r.frames.is_empty() {
            r.frames = list_prefixed(dir, "corpus_", ".json")?;
        }
        if r.gaze.is_empty() && data.fixations.is_none() {
            r.gaze = list_prefixed(dir, "gaze_", ".csv")?;
        }
        r.calibration = list_prefixed(dir, "calibration_", ".csv")?;
        r.pred = list_prefixed(dir, "pred_", ".json")?;
        let frames = dir.join("frames");
        r.images = frames.is_dir().then_some(frames);
        let manifest = dir.join("manifest.json");
        r.manifest = manifest.is_file().then_some(manifest);
    }
    Ok(r)
}

fn dog_of(path: &Path, prefix: &str) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix(prefix))
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .ok_or_else(|| {
            egogaze::Error::Validation(format!(
                "{}: expected a name like `{prefix}<dog>`",
                path.display()
            ))
            .into()
        })
}

fn load_corpora(paths: &[PathBuf]) -> Result<CorpusSet> {
    if paths.is_empty() {
        bail!(egogaze::Error::Validation(
            "no segmentation corpus given (--frames or --data)".into()
        ));
    }
    Ok(CorpusSet::load_all(paths)?)
}

/// Fixations from a CSV, or detected from gaze recordings.
fn gather_fixations(
    cfg: &PipelineConfig,
    data: &DataArgs,
    resolved: &Resolved,
) -> Result<Vec<Fixation>> {
    if let Some(p) = &data.fixations {
        return Ok(read_fixations(p)?);
    }
    if resolved.gaze.is_empty() {
        bail!(egogaze::Error::Validation(
            "no fixations or gaze recordings given".into()
        ));
    }
    let params = cfg.fixation_params();
    let mut out = Vec::new();
    for path in &resolved.gaze {
        let dog = dog_of(path, "gaze_")?;
        let samples = read_gaze(path)?;
        let fixations = extract_fixations(&dog, &samples, &params, &cfg.camera)?;
        info!(stage = "fixations", dog = %dog, samples = samples.len(), fixations = fixations.len());
        out.extend(fixations);
    }
    Ok(out)
}

/// Configured profiles plus any discovered calibration files for dogs not
/// otherwise configured.
fn gather_profiles(
    cfg: &PipelineConfig,
    resolved: &Resolved,
) -> Result<BTreeMap<String, DogProfile>> {
    let mut profiles = cfg.profiles()?;
    for path in &resolved.calibration {
        let dog = dog_of(path, "calibration_")?;
        if profiles.contains_key(&dog) {
            continue;
        }
        let acc = estimate_accuracy(&read_calibration(path)?, &cfg.camera)?;
        profiles.insert(dog.clone(), DogProfile::new(dog, acc, &cfg.camera)?);
    }
    for p in profiles.values() {
        info!(stage = "profiles", dog = %p.dog_id, accuracy_deg = p.spatial_accuracy_deg, radius_px = p.radius_px);
    }
    Ok(profiles)
}

fn apply_chi(cfg: &mut PipelineConfig, chi: &ChiArgs) -> Result<()> {
    if let Some(m) = chi.chi_mode {
        cfg.attribution.chi_mode = m;
    }
    if let Some(i) = chi.chi_input {
        cfg.attribution.chi_input = i;
    }
    if chi.include_background {
        cfg.attribution.include_background = true;
    }
    if let Some(a) = chi.alpha {
        cfg.attribution.alpha = a;
    }
    if let Some(d) = chi.dof {
        cfg.attribution.dof = d;
    }
    cfg.validate()?;
    Ok(())
}

fn cmd_fixations(ctx: &Ctx, a: FixationsArgs) -> Result<u8> {
    let (mut cfg, explicit) = load_config(ctx, &a.pipeline)?;
    if let Some(d) = a.dispersion_deg {
        cfg.fixation.dispersion_deg = d;
    }
    if let Some(m) = a.min_duration_ms {
        cfg.fixation.min_duration_ms = m;
    }
    cfg.validate()?;
    let resolved = resolve_data(&a.data)?;
    if !resolved.frames.is_empty() {
        let corpora = load_corpora(&resolved.frames)?;
        check_headers(&mut cfg, &corpora, explicit)?;
    }
    if resolved.gaze.is_empty() {
        bail!(egogaze::Error::Validation(
            "no gaze recordings given (--gaze or --data)".into()
        ));
    }
    let fixations = gather_fixations(
        &cfg,
        &DataArgs {
            fixations: None,
            ..a.data
        },
        &resolved,
    )?;
    let path = ctx.output("fixations.csv")?;
    write_fixations(&path, &fixations)?;
    println!("{} fixations -> {}", fixations.len(), path.display());
    Ok(0)
}

fn cmd_attribute(ctx: &Ctx, a: AttributeArgs) -> Result<u8> {
    let (mut cfg, explicit) = load_config(ctx, &a.pipeline)?;
    apply_chi(&mut cfg, &a.chi)?;
    let critical = chi_square_critical(cfg.attribution.dof, cfg.attribution.alpha)?;
    println!(
        "critical chi-square (dof {}, alpha {}): {:.3}",
        cfg.attribution.dof, cfg.attribution.alpha, critical
    );
    let resolved = resolve_data(&a.data)?;
    let has_input =
        a.data.fixations.is_some() || !resolved.gaze.is_empty() || !resolved.frames.is_empty();
    if !has_input {
        return Ok(0);
    }
    let corpora = load_corpora(&resolved.frames)?;
    check_headers(&mut cfg, &corpora, explicit)?;
    let fixations = gather_fixations(&cfg, &a.data, &resolved)?;
    let profiles = gather_profiles(&cfg, &resolved)?;
    let batch = batch_attribute(&fixations, &corpora, &profiles, &cfg.batch_options())?;
    let s = batch.summary;
    info!(
        stage = "attribute",
        fixations = s.total,
        missing_frames = s.missing_frames,
        sniffing_removed = s.sniffing_removed,
        null = s.null,
        retained = s.retained
    );
    for (i, e) in &batch.errors {
        warn!(fixation = i, "{e}");
    }
    let path = ctx.output("attribution.jsonl")?;
    write_records(&path, &batch.records, corpora.taxonomy())?;
    println!(
        "fixations {}  missing frames {}  sniffing removed {}  null {}  retained {} -> {}",
        s.total,
        s.missing_frames,
        s.sniffing_removed,
        s.null,
        s.retained,
        path.display()
    );
    let pred = if a.pred.is_empty() {
        resolved.pred.clone()
    } else {
        a.pred.clone()
    };
    if !pred.is_empty() {
        let predicted = load_corpora(&pred)?;
        check_headers(&mut cfg, &predicted, true)?;
        let fit = prediction_fit(
            &batch.records,
            &predicted,
            cfg.attribution_options(),
            cfg.fit_options(),
        )?;
        println!(
            "predicted vs ground truth: compared {}  accepted {} ({:.3})",
            fit.compared, fit.accepted, fit.accept_rate
        );
        ctx.write(
            "prediction_fit.json",
            &(serde_json::to_string_pretty(&fit)? + "\n"),
        )?;
    }
    Ok(0)
}

fn cmd_seg_eval(ctx: &Ctx, a: SegEvalArgs) -> Result<u8> {
    let (mut cfg, explicit) = load_config(ctx, &a.pipeline)?;
    if let Some(t) = a.iou_threshold {
        cfg.seg_eval.iou_threshold = t;
        cfg.validate()?;
    }
    let gt = SegmentationCorpus::load(&a.gt)?;
    let pred = SegmentationCorpus::load(&a.pred)?;
    if explicit {
        let set = CorpusSet::new([gt.clone()])?;
        check_headers(&mut cfg, &set, true)?;
    }
    let report = evaluate(&gt, &pred, cfg.seg_eval.iou_threshold)?;
    info!(stage = "seg-eval", frames = report.frames);
    print!("{}", report.to_table());
    ctx.write(
        "seg_eval.json",
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;
    Ok(0)
}

fn cmd_stats(ctx: &Ctx, a: StatsArgs) -> Result<u8> {
    let (mut cfg, explicit) = load_config(ctx, &a.pipeline)?;
    if a.weighted_lr {
        cfg.stats.row_mode = RowMode::Weighted;
    }
    if a.unweighted_lr {
        cfg.stats.row_mode = RowMode::Unweighted;
    }
    let corpora = load_corpora(&a.frames)?;
    check_headers(&mut cfg, &corpora, explicit)?;
    let records = read_records(&a.attribution, corpora.taxonomy())?;
    info!(stage = "stats", records = records.len());
    let report = stats_report(&records, &corpora, cfg.stats.row_mode, cfg.stats.contrasts)?;
    let text = report.to_text();
    print!("{text}");
    ctx.write("stats.txt", &text)?;
    ctx.write("stats.json", &report.to_json())?;
    Ok(0)
}

fn cmd_saliency(ctx: &Ctx, a: SaliencyArgs) -> Result<u8> {
    let (mut cfg, explicit) = load_config(ctx, &a.pipeline)?;
    if let Some(m) = a.mode {
        cfg.saliency.mode = m;
    }
    let corpora = load_corpora(&a.frames)?;
    check_headers(&mut cfg, &corpora, explicit)?;
    let records = read_records(&a.attribution, corpora.taxonomy())?;
    let index: FileIndex;
    let source = if a.generate {
        let dir = a
            .images
            .as_ref()
            .ok_or_else(|| anyhow!("--generate needs --images"))?;
        index = map_index(dir)?;
        MapSource::Frames {
            index: &index,
            mode: cfg.saliency.mode,
            config: &cfg.saliency.model,
        }
    } else {
        let dir = a
            .maps
            .as_ref()
            .ok_or_else(|| anyhow!("--maps or --generate is required"))?;
        index = map_index(dir)?;
        MapSource::Maps(&index)
    };
    let eval = evaluate_saliency(&records, &corpora, &source, &cfg.auc_options())?;
    info!(stage = "saliency", source = %eval.source, fixations = eval.fixations, maps = eval.maps, missing = eval.missing);
    println!(
        "{}: fixations {}  maps {}  missing {}  AUC-Judd per-frame {:.4}  pooled {:.4}",
        eval.source, eval.fixations, eval.maps, eval.missing, eval.auc_per_frame, eval.auc_pooled
    );
    ctx.write("roc.csv", &eval.roc.to_csv())?;
    let summary = serde_json::json!({
        "source": eval.source,
        "fixations": eval.fixations,
        "maps": eval.maps,
        "missing": eval.missing,
        "degenerate_maps": eval.degenerate_maps,
        "auc": { "per_frame": eval.auc_per_frame, "pooled": eval.auc_pooled },
    });
    ctx.write(
        "saliency.json",
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    Ok(0)
}

fn cmd_synth(ctx: &Ctx, a: SynthArgs) -> Result<u8> {
    let mut cfg = match &a.config {
        Some(p) => SynthConfig::load(p)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    if a.render_frames {
        cfg.render_frames = true;
    }
    cfg.validate()?;
    let out = synth_corpus(&cfg)?;
    let dir = a.out.clone().unwrap_or_else(|| ctx.out_dir.clone());
    let written = write_synth(&out, &dir, cfg.render_frames)?;
    let m = &out.manifest;
    info!(
        stage = "synth",
        dogs = m.dogs.len(),
        fixations = m.fixations,
        files = written.len()
    );
    println!(
        "{} dogs, {} fixations, {} nulls ({:.4}) -> {}",
        m.dogs.len(),
        m.fixations,
        m.null_count,
        m.null_rate,
        dir.display()
    );
    Ok(0)
}

fn cmd_report(ctx: &Ctx, a: ReportArgs) -> Result<u8> {
    let (mut cfg, explicit) = load_config(ctx, &a.pipeline)?;
    let resolved = resolve_data(&a.data)?;
    let corpora = load_corpora(&resolved.frames)?;
    check_headers(&mut cfg, &corpora, explicit)?;
    let fixations = gather_fixations(&cfg, &a.data, &resolved)?;
    let profiles = gather_profiles(&cfg, &resolved)?;

    let pred = if a.pred.is_empty() {
        resolved.pred.clone()
    } else {
        a.pred.clone()
    };
    let predicted = if pred.is_empty() {
        None
    } else {
        let set = load_corpora(&pred)?;
        check_headers(&mut cfg, &set, true)?;
        Some(set)
    };
    let manifest = match a.manifest.as_ref().or(resolved.manifest.as_ref()) {
        Some(p) => Some(Manifest::load(p)?),
        None => None,
    };
    let map_files = a.maps.as_ref().map(map_index).transpose()?;
    let image_files = a
        .images
        .as_ref()
        .or(resolved.images.as_ref())
        .map(map_index)
        .transpose()?;

    let mut saliency = Vec::new();
    if let Some(index) = &map_files {
        saliency.push(MapSource::Maps(index));
    }
    if let Some(index) = &image_files {
        for mode in [SaliencyMode::Color, SaliencyMode::Gray] {
            saliency.push(MapSource::Frames {
                index,
                mode,
                config: &cfg.saliency.model,
            });
        }
    }
    let report = build_report(&ReportInputs {
        config: &cfg,
        corpora: &corpora,
        fixations: &fixations,
        profiles: &profiles,
        predicted: predicted.as_ref(),
        saliency,
        manifest: manifest.as_ref(),
    })?;
    info!(
        stage = "report",
        fixations = report.fixations,
        retained = report.attribution.summary.retained,
        saliency_sources = report.saliency.len(),
        planted_checks = report.planted.len()
    );
    let text = report.to_text();
    print!("{text}");
    ctx.write("report.txt", &text)?;
    ctx.write("report.json", &report.to_json())?;
    if a.check && !report.all_checks_pass() {
        eprintln!("error: planted checks failed");
        return Ok(EXIT_VALIDATION);
    }
    Ok(0)
}
