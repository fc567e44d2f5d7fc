use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use gdconv_core::gdconv::load_params;
use gdconv_core::gradcheck::{run_gradcheck, GradcheckCfg};
use gdconv_core::io::{read_frame, write_png};
use gdconv_core::metrics::{interpolation_error, psnr, ssim, SsimCfg};
use gdconv_core::train::{evaluate, save_checkpoint, train, MotionFamily, Pattern, SynthStream, TrainCfg};
use gdconv_core::{gdconv_forward, interp_eval, Frame, FrameStack, FreedomVariant, InterpKind, SupportSet};

/// Generalized deformable convolution: warping, verification and toy training.
#[derive(Parser, Debug)]
#[command(name = "gdconv", version)]
struct Cli {
    /// Seed for every random choice a command makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Interpolation kind: linear, inv3d, inv1d, poly or poly-clamped.
    #[arg(long, global = true)]
    interp: Option<InterpKind>,
    /// Output path (file or directory, depending on the command).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Warp a frame stack with a saved parameter set and write a PNG.
    Warp(WarpArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Tabulate the temporal interpolant of a single sampling point.
    InterpDemo(InterpDemoArgs),
    /// Train the toy predictor on synthetic motion.
    TrainToy(TrainToyArgs),
    /// PSNR, SSIM and interpolation error between two images.
    Metrics(MetricsArgs),
}

#[derive(Args, Debug)]
struct WarpArgs {
    /// Source frames in temporal order (PNG, PPM or PGM).
    #[arg(required = true, num_args = 2..)]
    frames: Vec<PathBuf>,
    /// Parameter manifest (manifest.json).
    #[arg(long)]
    params: PathBuf,
    /// Ground-truth frame; prints PSNR of the output against it.
    #[arg(long)]
    gt: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 200)]
    trials: usize,
}

#[derive(Args, Debug)]
struct InterpDemoArgs {
    /// Support values, one per frame, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    values: Vec<f64>,
    /// Evenly spaced samples over [0, T]; the support nodes are always added.
    #[arg(long, default_value_t = 101)]
    samples: usize,
}

#[derive(Args, Debug)]
struct TrainToyArgs {
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    /// Stack indices sampled by the operator.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    refs: Vec<usize>,
    /// Stack indices fed to the predictor.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
    gens: Vec<usize>,
    /// constant or quadratic.
    #[arg(long, default_value = "constant")]
    motion: MotionFamily,
    /// Patterns to draw from: rectangle, checker, blob.
    #[arg(long, value_delimiter = ',', default_value = "rectangle")]
    pattern: Vec<Pattern>,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 3.0)]
    max_speed: f64,
    #[arg(long, default_value_t = 1.0)]
    max_accel: f64,
    /// Frame timestamps, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
    times: Vec<f64>,
    #[arg(long, default_value_t = 1.5)]
    target_time: f64,
    /// Freedom variant a to e.
    #[arg(long, default_value = "e", value_parser = parse_variant)]
    variant: FreedomVariant,
    #[arg(long, default_value_t = 4)]
    n_points: usize,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 4)]
    layers: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Held-out sequences used for the final report.
    #[arg(long, default_value_t = 50)]
    eval_samples: usize,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    a: PathBuf,
    b: PathBuf,
}

fn parse_variant(s: &str) -> Result<FreedomVariant, String> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => FreedomVariant::from_letter(c).ok_or_else(|| format!("unknown variant '{s}' (expected a to e)")),
        _ => Err(format!("unknown variant '{s}' (expected a to e)")),
    }
}

enum Failure {
    /// Bad arguments; exit 2.
    Usage(String),
    /// Verification failure or runtime error; exit 1.
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

impl From<gdconv_core::Error> for Failure {
    fn from(e: gdconv_core::Error) -> Self {
        Failure::Run(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Warp(a) => cmd_warp(&cli, a),
        Command::Gradcheck(a) => cmd_gradcheck(&cli, a),
        Command::InterpDemo(a) => cmd_interp_demo(&cli, a),
        Command::TrainToy(a) => cmd_train_toy(&cli, a),
        Command::Metrics(a) => cmd_metrics(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn read_image(path: &Path) -> anyhow::Result<Frame> {
    read_frame(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes through a sibling temporary file so that a failed write leaves nothing at `path`.
fn write_atomically(path: &Path, write: impl FnOnce(&Path) -> anyhow::Result<()>) -> anyhow::Result<()> {
    let name = path.file_name().ok_or_else(|| anyhow!("output path {} has no file name", path.display()))?;
    let tmp = path.with_file_name(format!(".{}.partial.png", name.to_string_lossy()));
    let result = write(&tmp).and_then(|()| fs::rename(&tmp, path).map_err(Into::into));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.with_context(|| format!("writing {}", path.display()))
}

fn cmd_warp(cli: &Cli, args: &WarpArgs) -> CmdResult {
    let out = cli.out.as_ref().ok_or_else(|| Failure::Usage("warp needs --out".into()))?;
    let frames = args.frames.iter().map(|p| read_image(p)).collect::<anyhow::Result<Vec<_>>>()?;
    let (params, manifest_kind) =
        load_params(&args.params).with_context(|| format!("loading {}", args.params.display()))?;
    let kind = cli.interp.clone().unwrap_or(manifest_kind);
    let stack = FrameStack::new(frames, None)?;
    let warped = gdconv_forward(&stack, &params, &kind)?;
    let gt = args.gt.as_deref().map(read_image).transpose()?;
    write_atomically(out, |tmp| write_png(tmp, &warped).map_err(Into::into))?;
    println!("wrote {}", out.display());
    if let Some(gt) = gt {
        println!("psnr {:.4}", psnr(&warped, &gt, 1.0)?);
    }
    Ok(())
}

fn cmd_gradcheck(cli: &Cli, args: &GradcheckArgs) -> CmdResult {
    if args.trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    let cfg = GradcheckCfg {
        trials: args.trials,
        seed: cli.seed,
        ..GradcheckCfg::default()
    };
    let report = run_gradcheck(&cfg)?;
    for field in &report.fields {
        println!("{field}");
    }
    if report.passed() {
        println!("gradcheck: all {} fields within tolerance", report.fields.len());
        return Ok(());
    }
    for field in report.failures() {
        if let Some(tc) = &field.worst_config {
            println!("failing configuration for {}/{}:", field.module, field.field);
            println!("{}", serde_json::to_string_pretty(tc).map_err(anyhow::Error::from)?);
            println!("replay: gdconv --seed {} gradcheck --trials 1", tc.trial_seed);
        }
    }
    Err(Failure::Run(anyhow!("gradient check exceeded tolerance")))
}

fn cmd_interp_demo(cli: &Cli, args: &InterpDemoArgs) -> CmdResult {
    if args.values.len() < 2 {
        return Err(Failure::Usage(format!("--values needs at least 2 entries, got {}", args.values.len())));
    }
    if args.samples < 2 {
        return Err(Failure::Usage(format!("--samples must be at least 2, got {}", args.samples)));
    }
    let t_max = args.values.len() - 1;
    let kind = cli.interp.clone().unwrap_or_else(InterpKind::poly).resolved(1, 1, t_max);
    let zeros = vec![0.0; args.values.len()];
    let support = SupportSet::new(&args.values, &zeros, &zeros)?;
    let mut zs: Vec<f64> = (0..args.samples)
        .map(|k| t_max as f64 * k as f64 / (args.samples - 1) as f64)
        .chain((0..=t_max).map(|i| i as f64))
        .collect();
    zs.sort_by(f64::total_cmp);
    zs.dedup();

    let sink: Box<dyn Write> = match &cli.out {
        Some(path) => Box::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut csv = csv::Writer::from_writer(sink);
    csv.write_record(["z", "g"]).map_err(anyhow::Error::from)?;
    for z in zs {
        let g = interp_eval(&kind, 0.0, 0.0, z, &support)?;
        csv.serialize((z, g)).map_err(anyhow::Error::from)?;
    }
    csv.flush().map_err(anyhow::Error::from)?;
    Ok(())
}

fn cmd_train_toy(cli: &Cli, args: &TrainToyArgs) -> CmdResult {
    let frames = args.times.len();
    if args.refs.len() < 2 {
        return Err(Failure::Usage("--refs needs at least two indices".into()));
    }
    if args.gens.is_empty() {
        return Err(Failure::Usage("--gens needs at least one index".into()));
    }
    if let Some(bad) = args.refs.iter().chain(&args.gens).find(|&&i| i >= frames) {
        return Err(Failure::Usage(format!("frame index {bad} outside 0..{frames}")));
    }
    if args.eval_samples == 0 {
        return Err(Failure::Usage("--eval-samples must be at least 1".into()));
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("train-toy-out"));
    let stream = SynthStream {
        height: args.height,
        width: args.width,
        motion: args.motion,
        patterns: args.pattern.clone(),
        max_speed: args.max_speed,
        max_accel: args.max_accel,
        frame_times: args.times.clone(),
        target_time: args.target_time,
        seed: cli.seed,
    };
    let mut cfg = TrainCfg {
        reference_indices: args.refs.clone(),
        generation_indices: args.gens.clone(),
        kind: cli.interp.clone().unwrap_or_else(InterpKind::poly),
        steps: args.steps,
        variant: args.variant,
        n_points: args.n_points,
        hidden: args.hidden,
        layers: args.layers,
        init_seed: cli.seed,
        ..TrainCfg::default()
    };
    cfg.adam.lr = args.lr;

    let outcome = train(&stream, &cfg)?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    save_checkpoint(&out, &outcome.predictor)?;
    let mut csv = csv::Writer::from_path(out.join("loss.csv")).map_err(anyhow::Error::from)?;
    csv.write_record(["step", "loss"]).map_err(anyhow::Error::from)?;
    for (step, loss) in outcome.loss_curve.iter().enumerate() {
        csv.serialize((step, loss)).map_err(anyhow::Error::from)?;
    }
    csv.flush().map_err(anyhow::Error::from)?;

    let held_out = SynthStream {
        seed: cli.seed.wrapping_add(10_000),
        ..stream
    };
    let eval = evaluate(&outcome.predictor, &held_out, &cfg, args.eval_samples)?;
    let report = json!({
        "steps": args.steps,
        "eval_samples": eval.samples,
        "model_psnr": eval.model_psnr,
        "baseline_psnr": eval.baseline_psnr,
        "gain_db": eval.gain(),
        "final_loss": outcome.loss_curve.last(),
        "config": cfg,
        "stream": held_out,
    });
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?)
        .context("writing report.json")?;
    println!("model psnr {:.4} dB", eval.model_psnr);
    println!("baseline psnr {:.4} dB", eval.baseline_psnr);
    println!("gain {:+.4} dB over {} held-out sequences", eval.gain(), eval.samples);
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_metrics(args: &MetricsArgs) -> CmdResult {
    let a = read_image(&args.a)?;
    let b = read_image(&args.b)?;
    println!("psnr {:.6}", psnr(&a, &b, 1.0)?);
    println!("ssim {:.6}", ssim(&a, &b, &SsimCfg::default())?);
    println!("ie {:.6}", interpolation_error(&a, &b)?);
    Ok(())
}
