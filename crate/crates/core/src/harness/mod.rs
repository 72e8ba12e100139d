//! End-to-end orchestration: the five-stage pipeline, simulated picking
//! experiments, PPM overlays and the command line front end.

pub mod cli;
mod experiment;
mod overlay;

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::axis::{major_axis, rect_for_cluster, AxisMode, AxisResult};
use crate::cluster::{assign_families, kmeans, KmeansParams, Point};
use crate::depthscene::{estimate_background, height_map, CameraModel, DepthImage, PixelRect};
use crate::error::{Error, Result, Stage};
use crate::gdi::{rank_grasps, score_all, GdiConfig, GdiScore, RankedGrasp};
use crate::geometry::{GraspRect, GripperModel, LinePose};
use crate::sampler::{filter_corner_balance, filter_object_region, sample_lines, SamplerConfig};

pub use experiment::{
    bench_csv, bench_table, run_experiment, simulate_pick, ExperimentMetrics, ExperimentReport, TrialRecord,
};
pub use overlay::{emit_overlay, render_overlay};

/// How the number of clusters is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KMode {
    /// Always use `k` (clutter, 6 to 12 typical).
    #[default]
    Fixed,
    /// One cluster per object when the object count is known (isolated objects).
    ObjectCount,
}

/// Every tunable of the pipeline, read from a single flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    #[serde(flatten)]
    pub sampler: SamplerConfig,
    pub k: usize,
    pub k_mode: KMode,
    pub kmeans_max_iter: usize,
    #[serde(rename = "kmeans_tol_px2")]
    pub kmeans_tol: f64,
    pub kmeans_n_init: usize,
    pub axis_mode: AxisMode,
    #[serde(flatten)]
    pub gdi: GdiConfig,
    pub gripper: GripperModel,
    /// Explicit workspace depth; estimated from the image when absent.
    #[serde(rename = "background_m")]
    pub background: Option<f64>,
    pub background_roi: Option<PixelRect>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            k: 8,
            k_mode: KMode::Fixed,
            kmeans_max_iter: 100,
            kmeans_tol: 1e-4,
            kmeans_n_init: 50,
            axis_mode: AxisMode::CentralMoment,
            gdi: GdiConfig::default(),
            gripper: GripperModel::default(),
            background: None,
            background_roi: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_slice(&fs::read(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        self.gripper.validate()?;
        let mut gdi = self.gdi.clone();
        gdi.z_window = self.sampler.z_window;
        gdi.validate()?;
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if self.kmeans_max_iter == 0 || self.kmeans_n_init == 0 || self.kmeans_tol.is_nan() || self.kmeans_tol < 0.0 {
            return Err(Error::Config(
                "kmeans_max_iter and kmeans_n_init must be >= 1, kmeans_tol_px2 >= 0".into(),
            ));
        }
        if let Some(b) = self.background {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::Config(format!("background_m must be > 0, got {b}")));
            }
        }
        Ok(())
    }

    fn gdi_config(&self) -> GdiConfig {
        GdiConfig {
            z_window: self.sampler.z_window,
            ..self.gdi.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimings {
    pub depth_ms: f64,
    pub sampling_ms: f64,
    pub filtering_ms: f64,
    pub clustering_ms: f64,
    pub axis_ms: f64,
    pub scoring_ms: f64,
}

impl StageTimings {
    pub fn total_ms(&self) -> f64 {
        self.depth_ms + self.sampling_ms + self.filtering_ms + self.clustering_ms + self.axis_ms + self.scoring_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub k: usize,
    pub centroids: Vec<Point>,
    pub sizes: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

/// A cluster that produced no score, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedCandidate {
    pub cluster_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineResult {
    pub background_depth: f64,
    pub sampled: usize,
    pub retained_level1: usize,
    pub retained_level2: usize,
    /// Poses surviving both filters.
    pub retained_poses: Vec<LinePose>,
    pub clustering: Option<ClusterSummary>,
    pub axes: Vec<AxisResult>,
    pub scores: Vec<GdiScore>,
    pub dropped: Vec<DroppedCandidate>,
    pub warnings: Vec<String>,
    pub ranked: Vec<RankedGrasp>,
    pub selected: Option<RankedGrasp>,
    #[serde(skip)]
    pub timings: StageTimings,
}

impl PipelineResult {
    pub fn selected_rect(&self) -> Option<&GraspRect> {
        self.selected.as_ref().map(|r| &r.score.rect)
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs depth conversion, sampling, both filters, clustering, axis
/// assignment and GDI ranking, in that order.
pub fn run_pipeline(img: &DepthImage, cam: &CameraModel, cfg: &PipelineConfig) -> Result<PipelineResult> {
    run_pipeline_with_k(img, cam, cfg, cfg.k)
}

/// [`run_pipeline`] with an explicit cluster count.
pub fn run_pipeline_with_k(img: &DepthImage, cam: &CameraModel, cfg: &PipelineConfig, k: usize) -> Result<PipelineResult> {
    cfg.validate().map_err(|e| e.at(Stage::Sampling))?;
    let cam = CameraModel {
        width: img.width(),
        height: img.height(),
        ..*cam
    };
    cam.validate().map_err(|e| e.at(Stage::Depth))?;
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let background = match cfg.background {
        Some(b) => b,
        None => estimate_background(img, cfg.background_roi.unwrap_or(img.bounds())).map_err(|e| e.at(Stage::Depth))?,
    };
    let hm = height_map(img, background).map_err(|e| e.at(Stage::Depth))?;
    timings.depth_ms = ms_since(t);

    let t = Instant::now();
    let roi = cfg
        .sampler
        .roi_within(img.width(), img.height())
        .map_err(|e| e.at(Stage::Sampling))?;
    let sampled = sample_lines(&cfg.sampler, roi).map_err(|e| e.at(Stage::Sampling))?;
    timings.sampling_ms = ms_since(t);

    let t = Instant::now();
    let level1 = filter_object_region(&sampled, &hm, &cfg.sampler);
    let level2 = filter_corner_balance(&level1, &hm, &cfg.sampler);
    timings.filtering_ms = ms_since(t);

    let mut result = PipelineResult {
        background_depth: background,
        sampled: sampled.len(),
        retained_level1: level1.len(),
        retained_level2: level2.len(),
        retained_poses: level2,
        clustering: None,
        axes: Vec::new(),
        scores: Vec::new(),
        dropped: Vec::new(),
        warnings: Vec::new(),
        ranked: Vec::new(),
        selected: None,
        timings,
    };
    if result.retained_poses.is_empty() {
        return Ok(result);
    }

    let t = Instant::now();
    let centers: Vec<Point> = result.retained_poses.iter().map(LinePose::center).collect();
    let params = KmeansParams {
        k,
        seed: cfg.sampler.seed,
        max_iter: cfg.kmeans_max_iter,
        tol: cfg.kmeans_tol,
        n_init: cfg.kmeans_n_init,
    };
    let clustering = kmeans(&centers, &params).map_err(|e| e.at(Stage::Clustering))?;
    let families = assign_families(&clustering, &result.retained_poses);
    let mut sizes = vec![0; clustering.k];
    for &a in &clustering.assignment {
        sizes[a] += 1;
    }
    result.clustering = Some(ClusterSummary {
        k: clustering.k,
        centroids: clustering.centroids.clone(),
        sizes,
        inertia: clustering.inertia,
        iterations: clustering.iterations,
    });
    result.timings.clustering_ms = ms_since(t);

    let t = Instant::now();
    let mut rects = Vec::with_capacity(families.len());
    for fam in &families {
        let axis = major_axis(fam, cfg.axis_mode);
        result.axes.push(axis);
        match rect_for_cluster(&clustering, fam, &axis, &hm, &cfg.gripper, &cam, cfg.sampler.z_window) {
            Ok(cr) => {
                if let Some(w) = cr.warning {
                    result.warnings.push(w);
                }
                rects.push((cr.cluster_index, cr.rect));
            }
            Err(e) => result.dropped.push(DroppedCandidate {
                cluster_index: fam.cluster_index,
                reason: e.to_string(),
            }),
        }
    }
    result.timings.axis_ms = ms_since(t);

    let t = Instant::now();
    let gdi = cfg.gdi_config();
    for (cluster, scored) in score_all(&rects, &hm, &gdi) {
        match scored {
            Ok(s) => result.scores.push(s),
            Err(e) => result.dropped.push(DroppedCandidate {
                cluster_index: cluster,
                reason: e.to_string(),
            }),
        }
    }
    result.ranked = rank_grasps(&result.scores, gdi.ranking_mode, gdi.top_n);
    result.selected = result.ranked.first().cloned();
    result.timings.scoring_ms = ms_since(t);
    Ok(result)
}

/// GDI summary in the grasp output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdiRecord {
    pub max_deviation_m: f64,
    pub positive_fraction: f64,
}

/// One ranked grasp as written by `plan`; field order is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspRecord {
    pub rank: usize,
    pub center_px: [f64; 2],
    pub theta_rad: f64,
    pub half_length_px: f64,
    pub half_width_px: f64,
    pub gdi: GdiRecord,
    pub cluster: usize,
}

impl GraspRecord {
    pub fn rect(&self) -> GraspRect {
        GraspRect {
            x_c: self.center_px[0],
            y_c: self.center_px[1],
            theta: self.theta_rad,
            half_length: self.half_length_px,
            half_width: self.half_width_px,
        }
    }
}

impl From<&RankedGrasp> for GraspRecord {
    fn from(r: &RankedGrasp) -> Self {
        let rect = &r.score.rect;
        Self {
            rank: r.rank,
            center_px: [rect.x_c, rect.y_c],
            theta_rad: rect.theta,
            half_length_px: rect.half_length,
            half_width_px: rect.half_width,
            gdi: GdiRecord {
                max_deviation_m: r.score.max_deviation,
                positive_fraction: r.score.positive_fraction,
            },
            cluster: r.cluster_index,
        }
    }
}

pub const NO_FEASIBLE_GRASP: &str = "no feasible grasp";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspFile {
    pub status: String,
    pub grasps: Vec<GraspRecord>,
}

impl GraspFile {
    pub fn from_result(result: &PipelineResult) -> Self {
        let grasps: Vec<GraspRecord> = result.ranked.iter().map(GraspRecord::from).collect();
        let status = if grasps.is_empty() { NO_FEASIBLE_GRASP } else { "ok" };
        Self {
            status: status.to_string(),
            grasps,
        }
    }
}
