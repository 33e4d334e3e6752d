use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mpiforge_core::adaptive::{adapt_and_rebuild, DEFAULT_ALPHA_FLOOR};
use mpiforge_core::codec::Quantization;
use mpiforge_core::compact::{default_thresholds, sparsity_report, threshold_alpha, total_loss, DEFAULT_LAMBDA};
use mpiforge_core::cues::tau_map;
use mpiforge_core::geometry::inverse_depth_samples;
use mpiforge_core::metrics;
use mpiforge_core::mpi::{render_view, HeuristicParams};
use mpiforge_core::pipeline::{build_mpi_with, scene_cues, PipelineConfig};
use mpiforge_core::synthetic::{self, SyntheticConfig, SyntheticSetup};
use serde_json::json;

use crate::error::{io, Result};
use crate::rig::{self, CameraSpec};
use crate::{parallel, pngio, store};

#[derive(Debug, Parser)]
#[command(
    name = "mpiforge",
    version,
    about = "Build, compact, adapt, render and evaluate multiplane images"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an MPI from a rig: M₀ followed by heuristic refinement.
    Build(BuildArgs),
    /// Build an MPI on scene-adapted depths; prints the depths as JSON.
    Adapt(AdaptArgs),
    /// Render an MPI at a pose.
    Render(RenderArgs),
    /// Occupancy / quality sweep over alpha thresholds, as CSV.
    Sweep(SweepArgs),
    /// SSIM, L1 and PSNR of two images, as JSON.
    Metrics(MetricsArgs),
    /// Convert between a .cmpi file and a web bundle directory.
    Convert(ConvertArgs),
    /// Sparsity and total loss report of an MPI against a rig, as JSON.
    Loss(LossArgs),
    /// Write a seeded synthetic scene (rig, images, held-out view).
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum QuantizationArg {
    F32,
    U8,
}

impl From<QuantizationArg> for Quantization {
    fn from(q: QuantizationArg) -> Self {
        match q {
            QuantizationArg::F32 => Quantization::F32,
            QuantizationArg::U8 => Quantization::U8,
        }
    }
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    /// Number of depth planes.
    #[arg(long, default_value_t = 32)]
    pub depths: usize,
    /// Nearest plane depth.
    #[arg(long, default_value_t = 1.0)]
    pub near: f64,
    /// Farthest plane depth.
    #[arg(long, default_value_t = 100.0)]
    pub far: f64,
    /// Refinement iterations.
    #[arg(long, default_value_t = 4)]
    pub steps: usize,
    /// Alpha logit gain of the heuristic residual.
    #[arg(long, default_value_t = HeuristicParams::default().gain)]
    pub gain: f64,
    /// Variance scale of the photo-consistency kernel.
    #[arg(long, default_value_t = HeuristicParams::default().variance_scale)]
    pub variance_scale: f64,
    /// Consistency level below which alpha decreases.
    #[arg(long, default_value_t = HeuristicParams::default().bias)]
    pub bias: f64,
    /// Fraction of the colour logit gap closed per step.
    #[arg(long, default_value_t = HeuristicParams::default().color_rate)]
    pub color_rate: f64,
}

impl SamplingArgs {
    fn config(&self, alpha_floor: f64) -> Result<PipelineConfig> {
        let config = PipelineConfig {
            depth_count: self.depths,
            near: self.near,
            far: self.far,
            steps: self.steps,
            heuristic: HeuristicParams {
                gain: self.gain,
                variance_scale: self.variance_scale,
                bias: self.bias,
                color_rate: self.color_rate,
            },
            alpha_floor,
            ..PipelineConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Rig config (JSON) with input images.
    #[arg(long)]
    pub rig: PathBuf,
    /// Output .cmpi file.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long, value_enum, default_value_t = QuantizationArg::F32)]
    pub quantization: QuantizationArg,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    #[arg(long)]
    pub rig: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Planes whose max alpha in M₁ stays below this are pruned.
    #[arg(long, default_value_t = DEFAULT_ALPHA_FLOOR)]
    pub alpha_floor: f64,
    #[arg(long, value_enum, default_value_t = QuantizationArg::F32)]
    pub quantization: QuantizationArg,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub mpi: PathBuf,
    /// Pose file: one camera in the rig schema.
    #[arg(long)]
    pub pose: PathBuf,
    /// Output PNG.
    #[arg(long)]
    pub out: PathBuf,
    /// Alpha threshold applied before rendering, in [0, 0.95].
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub mpi: PathBuf,
    /// Rig config of the ground-truth views.
    #[arg(long)]
    pub views: PathBuf,
    /// Comma-separated, strictly increasing thresholds in [0, 0.95]
    /// [default: 20 evenly spaced values from 0 to 0.95].
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    pub image_a: PathBuf,
    pub image_b: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// A .cmpi file, or a bundle directory containing manifest.json.
    #[arg(long)]
    pub input: PathBuf,
    /// Bundle directory for .cmpi input, .cmpi file for bundle input.
    #[arg(long)]
    pub output: PathBuf,
    /// Quantization of a written .cmpi.
    #[arg(long, value_enum, default_value_t = QuantizationArg::F32)]
    pub quantization: QuantizationArg,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long)]
    pub mpi: PathBuf,
    /// Rig config of the input views the MPI was built from.
    #[arg(long)]
    pub rig: PathBuf,
    /// Weight of the sparsity loss.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SceneKind {
    TwoPlane,
    SinglePlane,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Seed of the texture generator.
    #[arg(long)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SceneKind::TwoPlane)]
    pub scene: SceneKind,
}

/// Parses `args` and runs the command. Returns the process exit code:
/// 0 on success, 2 on usage errors, 1 on any other failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(io("<stdout>"))
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Build(a) => build(&a),
        Command::Adapt(a) => adapt(&a),
        Command::Render(a) => render(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Metrics(a) => metrics_cmd(&a),
        Command::Convert(a) => convert(&a),
        Command::Loss(a) => loss(&a),
        Command::Synth(a) => synth(&a),
    }
}

fn build(a: &BuildArgs) -> Result<()> {
    let config = a.sampling.config(DEFAULT_ALPHA_FLOOR)?;
    let scene = rig::load_scene(&a.rig)?;
    let reference = scene.reference_camera()?;
    let mpi = build_mpi_with(
        &scene,
        &reference,
        &config.regular_depths()?,
        config.steps,
        &config.heuristic,
    )?;
    store::write_cmpi(&a.out, &mpi, a.quantization.into())
}

fn adapt(a: &AdaptArgs) -> Result<()> {
    let config = a.sampling.config(a.alpha_floor)?;
    let scene = rig::load_scene(&a.rig)?;
    let adapted = adapt_and_rebuild(
        &scene,
        &config.regular_depths()?,
        config.steps,
        &config.heuristic,
        config.alpha_floor,
    )?;
    store::write_cmpi(&a.out, &adapted.mpi, a.quantization.into())?;
    print_json(&json!(adapted.adapted_depths.as_slice()))
}

fn render(a: &RenderArgs) -> Result<()> {
    let mpi = store::read_cmpi(&a.mpi)?;
    let pose = rig::load_pose(&a.pose)?;
    let mpi = threshold_alpha(&mpi, a.threshold)?;
    pngio::write_png(&a.out, &render_view(&mpi, &pose)?)
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let mpi = store::read_cmpi(&a.mpi)?;
    let views = rig::load_views(&a.views)?;
    let thresholds = a.thresholds.clone().unwrap_or_else(|| default_thresholds(20));
    let csv = parallel::occupancy_sweep(&mpi, &views, &thresholds)?.to_csv();
    match &a.out {
        Some(path) => std::fs::write(path, csv).map_err(io(path)),
        None => std::io::stdout()
            .lock()
            .write_all(csv.as_bytes())
            .map_err(io("<stdout>")),
    }
}

fn metrics_cmd(a: &MetricsArgs) -> Result<()> {
    let x = pngio::read_rgb(&a.image_a)?;
    let y = pngio::read_rgb(&a.image_b)?;
    let report = metrics::evaluate(&x, &y)?;
    // infinite PSNR (identical images) serializes as null
    print_json(&json!({ "ssim": report.ssim, "l1": report.l1, "psnr": report.psnr }))
}

fn convert(a: &ConvertArgs) -> Result<()> {
    if a.input.is_dir() {
        let mpi = store::import_web_bundle(&a.input)?;
        store::write_cmpi(&a.output, &mpi, a.quantization.into())
    } else {
        let mpi = store::read_cmpi(&a.input)?;
        store::export_web_bundle(&mpi, &a.output).map(|_| ())
    }
}

fn loss(a: &LossArgs) -> Result<()> {
    let mpi = store::read_cmpi(&a.mpi)?;
    let scene = rig::load_scene(&a.rig)?;
    let psvs = scene.plane_sweeps(mpi.reference(), mpi.depths())?;
    let tau = tau_map(&scene_cues(&scene, &psvs, &mpi)?);
    let report = sparsity_report(&mpi, &tau, scene.cameras())?;
    let mut synthesis = 0.0;
    for (camera, image) in scene.cameras().iter().zip(scene.images()) {
        synthesis += metrics::synthesis_error(&render_view(&mpi, camera)?, image)?;
    }
    synthesis /= scene.view_count() as f64;
    print_json(&json!({
        "excess": report.excess,
        "a_min": report.a_min,
        "sparsity_loss": report.loss,
        "synthesis_error": synthesis,
        "lambda": a.lambda,
        "total_loss": total_loss(synthesis, report.loss, a.lambda),
    }))
}

fn write_view(
    dir: &Path,
    name: &str,
    setup: &SyntheticSetup,
    camera: &mpiforge_core::geometry::Camera,
) -> Result<CameraSpec> {
    let file = format!("{name}.png");
    pngio::write_png(&dir.join(&file), &setup.model.render(camera))?;
    Ok(CameraSpec::from_camera(camera, Some(file)))
}

fn synth(a: &SynthArgs) -> Result<()> {
    let config = SyntheticConfig::default();
    let setup = match a.scene {
        SceneKind::TwoPlane => synthetic::two_plane(&config, a.seed)?,
        SceneKind::SinglePlane => synthetic::single_plane(&config, config.depth_at(1.0), a.seed)?,
    };
    std::fs::create_dir_all(&a.out).map_err(io(&a.out))?;
    let specs = setup
        .cameras
        .iter()
        .enumerate()
        .map(|(i, cam)| write_view(&a.out, &format!("view_{i}"), &setup, cam))
        .collect::<Result<Vec<_>>>()?;
    rig::write_rig(&a.out.join("rig.json"), &specs)?;
    let held_out = write_view(&a.out, "heldout", &setup, &setup.held_out)?;
    rig::write_json(&a.out.join("heldout.json"), &held_out)?;
    rig::write_rig(&a.out.join("views.json"), std::slice::from_ref(&held_out))?;
    rig::write_json(
        &a.out.join("reference.json"),
        &CameraSpec::from_camera(setup.model.reference(), None),
    )?;
    let depths = inverse_depth_samples(config.near, config.far, config.depth_count)?;
    print_json(&json!({
        "near": config.near,
        "far": config.far,
        "depths": config.depth_count,
        "surface_depths": setup.surface_depths,
        "regular_depths": depths.as_slice(),
    }))
}
