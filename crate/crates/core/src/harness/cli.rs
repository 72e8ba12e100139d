//! `graspgdi` subcommands. Exit status is 0 on success, 1 on usage errors and
//! 2 when processing fails.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use super::{
    bench_csv, bench_table, emit_overlay, run_experiment, run_pipeline_with_k, ExperimentMetrics, GraspFile, PipelineConfig,
};
use crate::depthscene::{load_depth, CameraModel};
use crate::error::{Error, Result};
use crate::synthgen::{oracle_collision, random_scene, render_scene, write_render, ClutterParams, SceneSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "graspgdi", version, about = "Unsupervised grasp pose estimation on depth images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Camera intrinsics JSON; Kinect-like defaults when absent.
    #[arg(long)]
    camera: Option<PathBuf>,
    /// Pipeline configuration JSON; defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plan grasps on a depth image.
    Plan {
        /// 16-bit PGM depth image, or a scene-dump JSON.
        #[arg(long)]
        depth: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Grasps JSON output.
        #[arg(long)]
        out: PathBuf,
        /// Optional PPM overlay output.
        #[arg(long)]
        overlay: Option<PathBuf>,
        /// Meters per stored depth unit.
        #[arg(long, default_value_t = 0.001)]
        unit_scale: f64,
        /// Cluster count, overriding the config.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Render a scene spec (or a random clutter scene) to a depth PGM.
    Gen {
        /// Scene spec JSON.
        #[arg(long, conflicts_with = "clutter", required_unless_present = "clutter")]
        scene: Option<PathBuf>,
        /// Generate a random scene with this many objects instead.
        #[arg(long)]
        clutter: Option<usize>,
        /// Seed for `--clutter`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Camera intrinsics JSON; Kinect-like defaults when absent.
        #[arg(long)]
        camera: Option<PathBuf>,
        /// Depth PGM output, millimeters.
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth sidecar JSON.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Writes the (generated) scene spec.
        #[arg(long)]
        scene_out: Option<PathBuf>,
    },
    /// Simulated clutter clearing over one scene or a directory of scenes.
    Bench {
        /// Directory of scene spec JSON files, run in name order.
        #[arg(long, conflicts_with = "scene", required_unless_present = "scene")]
        scenes: Option<PathBuf>,
        /// A single scene spec JSON.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        /// CSV output; printed to stdout when absent.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Trial cap as a multiple of the object count.
        #[arg(long, default_value_t = 1.5)]
        max_trial_factor: f64,
    },
    /// Checks grasps from a `plan` output against a scene's ground truth.
    Oracle {
        /// Scene spec JSON the depth image was rendered from.
        #[arg(long)]
        scene: PathBuf,
        /// Grasps JSON written by `plan`.
        #[arg(long)]
        grasps: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn load(&self) -> Result<(CameraModel, PipelineConfig)> {
        let cam = match &self.camera {
            Some(p) => CameraModel::from_json_file(p)?,
            None => CameraModel::default(),
        };
        let cfg = match &self.config {
            Some(p) => PipelineConfig::from_json_file(p)?,
            None => PipelineConfig::default(),
        };
        Ok((cam, cfg))
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn plan(
    depth: &Path,
    common: &Common,
    out: &Path,
    overlay: Option<&Path>,
    unit_scale: f64,
    k: Option<usize>,
) -> Result<String> {
    let (cam, cfg) = common.load()?;
    let img = load_depth(depth, unit_scale)?;
    let result = run_pipeline_with_k(&img, &cam, &cfg, k.unwrap_or(cfg.k))?;
    let file = GraspFile::from_result(&result);
    write_json(out, &file)?;
    if let Some(p) = overlay {
        emit_overlay(&img, &result, p)?;
    }
    let mut msg = format!(
        "sampled {} -> {} -> {} poses, {} candidates, {} ranked ({:.1} ms)",
        result.sampled,
        result.retained_level1,
        result.retained_level2,
        result.scores.len(),
        result.ranked.len(),
        result.timings.total_ms()
    );
    if file.grasps.is_empty() {
        msg = format!("{msg}\n{}", super::NO_FEASIBLE_GRASP);
    }
    Ok(msg)
}

#[allow(clippy::too_many_arguments)]
fn gen(
    scene: Option<&Path>,
    clutter: Option<usize>,
    seed: u64,
    camera: Option<&Path>,
    out: &Path,
    truth: Option<&Path>,
    scene_out: Option<&Path>,
) -> Result<String> {
    let cam = match camera {
        Some(p) => CameraModel::from_json_file(p)?,
        None => CameraModel::default(),
    };
    let spec = match (scene, clutter) {
        (Some(p), _) => SceneSpec::from_json_file(p)?,
        (None, Some(n)) => random_scene(&ClutterParams { n_objects: n, ..ClutterParams::default() }, seed)?,
        (None, None) => return Err(Error::Config("gen needs --scene or --clutter".into())),
    };
    let (img, t) = render_scene(&spec, &cam)?;
    match truth {
        Some(tp) => write_render(&img, &t, out, tp)?,
        None => crate::depthscene::write_pgm(out, img.width(), img.height(), &img.to_stored(0.001))?,
    }
    if let Some(p) = scene_out {
        write_json(p, &spec)?;
    }
    Ok(format!("rendered {} objects at {}x{}", spec.objects.len(), img.width(), img.height()))
}

/// Scene files of a directory, sorted by name.
fn scene_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyInput(format!("no scene JSON files in {}", dir.display())));
    }
    Ok(files)
}

/// Runs the experiment on every scene in parallel; rows keep file order.
pub fn bench_scenes(
    files: &[PathBuf],
    cfg: &PipelineConfig,
    cam: &CameraModel,
    max_trial_factor: f64,
) -> Result<Vec<(String, ExperimentMetrics)>> {
    files
        .par_iter()
        .map(|p| {
            let spec = SceneSpec::from_json_file(p)?;
            let report = run_experiment(&spec, cfg, cam, max_trial_factor)?;
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, report.metrics))
        })
        .collect()
}

fn bench(
    scenes: Option<&Path>,
    scene: Option<&Path>,
    common: &Common,
    csv: Option<&Path>,
    max_trial_factor: f64,
) -> Result<String> {
    let (cam, cfg) = common.load()?;
    let files = match (scenes, scene) {
        (Some(d), _) => scene_files(d)?,
        (None, Some(f)) => vec![f.to_path_buf()],
        (None, None) => return Err(Error::Config("bench needs --scenes or --scene".into())),
    };
    let rows = bench_scenes(&files, &cfg, &cam, max_trial_factor)?;
    let text = bench_csv(&rows);
    match csv {
        Some(p) => fs::write(p, &text)?,
        None => print!("{text}"),
    }
    Ok(bench_table(&rows).trim_end().to_string())
}

fn oracle(scene: &Path, grasps: &Path, common: &Common) -> Result<String> {
    let (cam, cfg) = common.load()?;
    let spec = SceneSpec::from_json_file(scene)?;
    let file: GraspFile = serde_json::from_slice(&fs::read(grasps)?)?;
    let (_, truth) = render_scene(&SceneSpec { noise_sigma: 0.0, ..spec }, &cam)?;
    let mut out = String::new();
    for g in &file.grasps {
        let hit = oracle_collision(&g.rect(), &truth, &cfg.gripper, &cam, cfg.gdi.collision_tol);
        out.push_str(&format!("rank {}: {}\n", g.rank, if hit { "collision" } else { "clear" }));
    }
    if file.grasps.is_empty() {
        out.push_str(super::NO_FEASIBLE_GRASP);
    }
    Ok(out.trim_end().to_string())
}

fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Plan {
            depth,
            common,
            out,
            overlay,
            unit_scale,
            k,
        } => plan(&depth, &common, &out, overlay.as_deref(), unit_scale, k),
        Command::Gen {
            scene,
            clutter,
            seed,
            camera,
            out,
            truth,
            scene_out,
        } => gen(
            scene.as_deref(),
            clutter,
            seed,
            camera.as_deref(),
            &out,
            truth.as_deref(),
            scene_out.as_deref(),
        ),
        Command::Bench {
            scenes,
            scene,
            common,
            csv,
            max_trial_factor,
        } => bench(scenes.as_deref(), scene.as_deref(), &common, csv.as_deref(), max_trial_factor),
        Command::Oracle { scene, grasps, common } => oracle(&scene, &grasps, &common),
    }
}

/// Parses `args` (program name first) and runs the subcommand. Results go
/// to stdout, diagnostics to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(msg) => {
            if !msg.is_empty() {
                let _ = writeln!(std::io::stderr(), "{msg}");
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            EXIT_FAILURE
        }
    }
}
