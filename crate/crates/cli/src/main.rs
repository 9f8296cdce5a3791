use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use splat4d::degrade::{scene_center, simulate_degradation, DegradeMode, DegradeOptions, PerturbConfig};
use splat4d::dynamics::{interpolate_field, track_3d, InterpConfig, InterpMode};
use splat4d::io::pack::{write_degradation_pack, write_render_frame};
use splat4d::io::sidecar::{write_separation, write_tracks};
use splat4d::io::synth::write_ground_truth;
use splat4d::io::{psnr, read_rgb_png, read_scene, read_trajectory, ssim, synth_scene, write_scene, write_trajectory};
use splat4d::io::{MotionMix, SynthSpec};
use splat4d::motion::{default_eta, separate};
use splat4d::raster::{render, RenderOptions};
use splat4d::trajectory::{jerk_norm, make_path, smooth_trajectory, PathKind, Trajectory};
use splat4d::Error;

#[derive(Debug, Parser)]
#[command(
    name = "splat4d",
    version,
    about = "4D Gaussian field toolkit: synthesize, render, degrade, separate, track"
)]
struct Cli {
    /// worker threads (defaults to all cores)
    #[arg(long, global = true, env = "SPLAT4D_THREADS")]
    threads: Option<usize>,

    /// random seed for synth and degrade
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scene with ground truth
    Synth(SynthArgs),
    /// Write a camera trajectory derived from a scene's first keyframe camera
    Path(PathArgs),
    /// Render the field along a trajectory
    Render(RenderArgs),
    /// Render degradation condition packs
    Degrade(DegradeArgs),
    /// Split Gaussians into static and dynamic sets
    Separate(SeparateArgs),
    /// Associate Gaussians across keyframes
    Track(TrackArgs),
    /// Smooth a camera trajectory
    Stabilize(StabilizeArgs),
    /// Compare two directories of PNG frames
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// JSON generator spec; replaces the per-field flags below
    #[arg(long, conflicts_with_all = [
        "static_objects", "dynamic_objects", "motion", "keyframes", "grid", "object_size",
        "speed", "spin", "tau", "width", "height", "focal", "no_background",
    ])]
    spec: Option<PathBuf>,
    #[arg(long = "static", default_value_t = 2)]
    static_objects: usize,
    #[arg(long = "dynamic", default_value_t = 2)]
    dynamic_objects: usize,
    /// linear, rotating, half-static or mixed
    #[arg(long, default_value = "mixed")]
    motion: String,
    #[arg(long, default_value_t = 6)]
    keyframes: usize,
    /// Gaussians per sprite side
    #[arg(long, default_value_t = 8)]
    grid: usize,
    #[arg(long, default_value_t = 1.0)]
    object_size: f64,
    #[arg(long, default_value_t = 0.3)]
    speed: f64,
    #[arg(long, default_value_t = 0.3)]
    spin: f64,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 48)]
    height: usize,
    #[arg(long, default_value_t = 60.0)]
    focal: f64,
    #[arg(long)]
    no_background: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PathChoice {
    Keyframes,
    PanLeft,
    PanRight,
    MoveLeft,
    MoveRight,
    Orbit,
    DollyIn,
    DollyOut,
}

#[derive(Debug, Args)]
struct PathArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, value_enum, default_value = "orbit")]
    kind: PathChoice,
    /// radians for pans and orbits, world units for moves and dollies
    #[arg(long, default_value_t = 0.2)]
    magnitude: f64,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeChoice {
    Nearest,
    Union,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    traj: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long, value_enum, default_value = "union")]
    mode: ModeChoice,
    #[arg(long, default_value_t = 4.0)]
    gamma: f64,
}

#[derive(Debug, Args)]
struct DegradeArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    traj: PathBuf,
    /// cull, filter or both
    #[arg(long, default_value = "both")]
    mode: String,
    #[arg(long, default_value_t = 3)]
    kernel: usize,
    #[arg(long, default_value_t = 0.0)]
    min_translation: f64,
    #[arg(long, default_value_t = 0.2)]
    max_translation: f64,
    /// keep camera offsets in the image plane
    #[arg(long)]
    lateral_only: bool,
    #[arg(long, default_value_t = 0.05)]
    max_rotation: f64,
    #[arg(long, default_value_t = 1.0)]
    lookat_blend: f64,
    #[arg(long, default_value_t = 0.01)]
    eps_rel: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SeparateArgs {
    #[arg(long)]
    scene: PathBuf,
    /// motion threshold (defaults to 1% of the scene diagonal)
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    eps_rel: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrackArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    radius: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct StabilizeArgs {
    #[arg(long)]
    traj: PathBuf,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    test: PathBuf,
}

/// Failure with the process exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.root_cause().downcast_ref::<Error>() {
            Some(Error::TimeOutOfRange { .. }) | Some(Error::DegenerateLookAt { .. }) => 3,
            _ => match error.downcast_ref::<Error>() {
                Some(Error::TimeOutOfRange { .. }) | Some(Error::DegenerateLookAt { .. }) => 3,
                _ => 2,
            },
        };
        Failure { code, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(&cli, a),
        Command::Path(a) => cmd_path(a),
        Command::Render(a) => cmd_render(&cli, a),
        Command::Degrade(a) => cmd_degrade(&cli, a),
        Command::Separate(a) => cmd_separate(a),
        Command::Track(a) => cmd_track(a),
        Command::Stabilize(a) => cmd_stabilize(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_synth(cli: &Cli, a: &SynthArgs) -> CmdResult {
    let spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let spec: SynthSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            SynthSpec { seed: cli.seed, ..spec }
        }
        None => SynthSpec {
            static_objects: a.static_objects,
            dynamic_objects: a.dynamic_objects,
            motion: a.motion.parse::<MotionMix>()?,
            keyframes: a.keyframes,
            grid: a.grid,
            object_size: a.object_size,
            speed: a.speed,
            spin: a.spin,
            tau: a.tau,
            width: a.width,
            height: a.height,
            focal: a.focal,
            background: !a.no_background,
            seed: cli.seed,
            ..SynthSpec::default()
        },
    };
    let (scene, truth) = synth_scene(&spec)?;
    write_scene(&a.out, &scene)?;
    write_ground_truth(&a.out.join("ground_truth.json"), &truth).map_err(Error::from)?;
    println!(
        "synth keyframes={} gaussians={} static_objects={} dynamic_objects={} out={}",
        scene.keyframes.len(),
        scene.gaussian_count(),
        truth.static_objects(),
        truth.dynamic_objects(),
        a.out.display()
    );
    Ok(())
}

fn cmd_path(a: &PathArgs) -> CmdResult {
    let scene = read_scene(&a.scene)?;
    let traj = match a.kind {
        PathChoice::Keyframes => Trajectory::new(scene.keyframes.iter().map(|k| k.camera).collect(), scene.intrinsics)?,
        other => {
            let kind = match other {
                PathChoice::PanLeft => PathKind::PanLeft,
                PathChoice::PanRight => PathKind::PanRight,
                PathChoice::MoveLeft => PathKind::MoveLeft,
                PathChoice::MoveRight => PathKind::MoveRight,
                PathChoice::Orbit => PathKind::Orbit,
                PathChoice::DollyIn => PathKind::DollyIn,
                PathChoice::DollyOut => PathKind::DollyOut,
                PathChoice::Keyframes => unreachable!(),
            };
            let all: Vec<_> = scene.all_gaussians().copied().collect();
            let center = scene_center(&all)?;
            let base = scene.keyframes[0].camera;
            let mut traj = make_path(kind, &base, a.magnitude, a.frames, &center, &scene.intrinsics)?;
            // Spread the frames evenly over the scene's time range.
            let (t0, t1) = (scene.start_time(), scene.end_time());
            let n = traj.poses.len();
            for (i, pose) in traj.poses.iter_mut().enumerate() {
                pose.time = if n > 1 && t1 > t0 {
                    t0 + (t1 - t0) * i as f64 / (n - 1) as f64
                } else {
                    t0 + i as f64
                };
            }
            traj.validate()?;
            traj
        }
    };
    write_trajectory(&a.out, &traj)?;
    println!(
        "path frames={} length={} out={}",
        traj.len(),
        traj.path_length(),
        a.out.display()
    );
    Ok(())
}

fn render_options(
    k: &splat4d::Intrinsics,
    width: Option<usize>,
    height: Option<usize>,
) -> anyhow::Result<RenderOptions> {
    let (w, h) = match (width, height) {
        (None, None) => (k.width, k.height),
        (Some(w), Some(h)) => (w, h),
        (Some(w), None) => (w, (k.height as f64 * w as f64 / k.width as f64).round() as usize),
        (None, Some(h)) => ((k.width as f64 * h as f64 / k.height as f64).round() as usize, h),
    };
    let opts = RenderOptions::for_intrinsics(k).with_size(w, h);
    opts.validate()?;
    Ok(opts)
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn cmd_render(cli: &Cli, a: &RenderArgs) -> CmdResult {
    let scene = read_scene(&a.scene)?;
    let traj = read_trajectory(&a.traj)?;
    let mode = match a.mode {
        ModeChoice::Nearest => InterpMode::NearestOnly,
        ModeChoice::Union => InterpMode::UnionBoth,
    };
    let cfg = InterpConfig::new(a.gamma, mode)?;
    let opts = render_options(&traj.intrinsics, a.width, a.height)?;
    // Check every timestamp before writing anything.
    for pose in &traj.poses {
        if !(scene.start_time() <= pose.time && pose.time <= scene.end_time()) {
            return Err(Error::TimeOutOfRange {
                time: pose.time,
                start: scene.start_time(),
                end: scene.end_time(),
            }
            .into());
        }
    }
    create_dir(&a.out)?;
    let mut drawn = 0;
    for (i, pose) in traj.poses.iter().enumerate() {
        let gaussians = interpolate_field(&scene, pose.time, &cfg)?;
        let target = render(&gaussians, pose, &traj.intrinsics, &opts)?;
        if cli.verbose {
            eprintln!(
                "frame {i} time={} gaussians={} drawn={}",
                pose.time,
                gaussians.len(),
                target.stats.drawn
            );
        }
        drawn += target.stats.drawn;
        write_render_frame(&a.out, i, &target)?;
    }
    println!(
        "render frames={} width={} height={} drawn={} out={}",
        traj.len(),
        opts.width,
        opts.height,
        drawn,
        a.out.display()
    );
    Ok(())
}

fn cmd_degrade(cli: &Cli, a: &DegradeArgs) -> CmdResult {
    let mode: DegradeMode = a.mode.parse()?;
    if a.kernel == 0 || a.kernel.is_multiple_of(2) {
        return Err(anyhow::anyhow!("--kernel must be odd and positive, got {}", a.kernel).into());
    }
    let scene = read_scene(&a.scene)?;
    let traj = read_trajectory(&a.traj)?;
    let cfg = PerturbConfig {
        min_translation: a.min_translation,
        max_translation: a.max_translation,
        lateral_only: a.lateral_only,
        max_rotation: a.max_rotation,
        lookat_blend: a.lookat_blend,
        seed: cli.seed,
    };
    let opts = DegradeOptions {
        eps_rel: a.eps_rel,
        ..DegradeOptions::for_intrinsics(&traj.intrinsics)
    };
    let pack = simulate_degradation(&scene, &traj, &cfg, a.kernel, mode, &opts)?;
    write_degradation_pack(&a.out, &pack, &a.mode, a.kernel, cli.seed)?;
    let culled: usize = pack.frames.iter().map(|f| f.culled).sum();
    let n = pack.frames.len().max(1) as f64;
    let displacement = pack.frames.iter().map(|f| f.mean_displacement).sum::<f64>() / n;
    if cli.verbose {
        for (i, f) in pack.frames.iter().enumerate() {
            eprintln!(
                "frame {i} culled={} mean_displacement={}",
                f.culled, f.mean_displacement
            );
        }
    }
    println!(
        "degrade frames={} mode={} kernel={} seed={} culled={} mean_displacement={} out={}",
        pack.frames.len(),
        a.mode,
        a.kernel,
        cli.seed,
        culled,
        displacement,
        a.out.display()
    );
    Ok(())
}

fn cmd_separate(a: &SeparateArgs) -> CmdResult {
    let scene = read_scene(&a.scene)?;
    let eta = a.eta.unwrap_or_else(|| default_eta(&scene));
    let result = separate(&scene, eta, a.eps_rel)?;
    write_separation(&a.out, &result).map_err(Error::from)?;
    let total = (result.static_count() + result.dynamic_count()).max(1) as f64;
    println!(
        "separate eta={} static={} dynamic={} static_pct={} out={}",
        eta,
        result.static_count(),
        result.dynamic_count(),
        100.0 * result.static_count() as f64 / total,
        a.out.display()
    );
    Ok(())
}

fn cmd_track(a: &TrackArgs) -> CmdResult {
    let scene = read_scene(&a.scene)?;
    let tracks = track_3d(&scene, a.radius)?;
    write_tracks(&a.out, &tracks).map_err(Error::from)?;
    let points: usize = tracks.iter().map(|t| t.len()).sum();
    let longest = tracks.iter().map(|t| t.len()).max().unwrap_or(0);
    println!(
        "track tracks={} points={} longest={} out={}",
        tracks.len(),
        points,
        longest,
        a.out.display()
    );
    Ok(())
}

fn cmd_stabilize(a: &StabilizeArgs) -> CmdResult {
    let traj = read_trajectory(&a.traj)?;
    let smooth = smooth_trajectory(&traj, a.window)?;
    write_trajectory(&a.out, &smooth)?;
    let before = jerk_norm(&traj);
    let after = jerk_norm(&smooth);
    let reduction = if before > 1e-12 {
        100.0 * (1.0 - after / before)
    } else {
        0.0
    };
    println!(
        "stabilize window={} jerk_before={} jerk_after={} jerk_reduction_pct={} out={}",
        a.window,
        before,
        after,
        reduction,
        a.out.display()
    );
    Ok(())
}

fn png_names(dir: &Path) -> anyhow::Result<BTreeSet<String>> {
    let mut names = BTreeSet::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if name.ends_with(".png") {
            names.insert(name);
        }
    }
    Ok(names)
}

fn cmd_eval(a: &EvalArgs) -> CmdResult {
    let reference = png_names(&a.reference)?;
    let test = png_names(&a.test)?;
    let unmatched: Vec<&String> = reference.symmetric_difference(&test).collect();
    if !unmatched.is_empty() {
        let list: Vec<&str> = unmatched.iter().map(|s| s.as_str()).collect();
        return Err(anyhow::anyhow!("unmatched frames: {}", list.join(" ")).into());
    }
    if reference.is_empty() {
        return Err(anyhow::anyhow!("no PNG frames in {}", a.reference.display()).into());
    }
    let (mut sum_psnr, mut sum_ssim) = (0.0, 0.0);
    for name in &reference {
        let x = read_rgb_png(&a.reference.join(name)).map_err(Error::from)?;
        let y = read_rgb_png(&a.test.join(name)).map_err(Error::from)?;
        let p = psnr(&x, &y)?;
        let s = ssim(&x, &y)?;
        println!("eval frame={name} psnr={p} ssim={s}");
        sum_psnr += p;
        sum_ssim += s;
    }
    let n = reference.len() as f64;
    println!(
        "eval mean frames={} psnr={} ssim={}",
        reference.len(),
        sum_psnr / n,
        sum_ssim / n
    );
    Ok(())
}
