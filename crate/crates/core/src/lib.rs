//! Unsupervised grasp pose estimation on single depth images.
//!
//! The pipeline samples line-shaped gripper poses, keeps those that straddle
//! an object edge, clusters their centers with k-means, orients one gripper
//! rectangle per cluster perpendicular to the cluster's major axis and ranks
//! the rectangles by the Grasp Decide Index, a clearance score of the finger
//! strips relative to the palm.
//!
//! [`synthgen`] renders analytic tabletop scenes with ground truth and a
//! brute-force collision oracle; [`harness`] ties everything together.

pub mod axis;
pub mod cluster;
pub mod depthscene;
pub mod error;
pub mod gdi;
pub mod geometry;
pub mod harness;
pub mod sampler;
pub mod synthgen;

pub use axis::{major_axis, rect_for_cluster, AxisMode, AxisResult};
pub use cluster::{assign_families, kmeans, Clustering, KmeansParams, PointFamily};
pub use depthscene::{estimate_background, height_map, load_depth, CameraModel, DepthImage, HeightMap, PixelRect};
pub use error::{Error, Result, Stage};
pub use gdi::{gdi_score, rank_grasps, BandMode, GdiConfig, GdiScore, RankedGrasp, RankingMode};
pub use geometry::{build_rect, GraspRect, GripperModel, LinePose};
pub use harness::{
    emit_overlay, run_experiment, run_pipeline, simulate_pick, ExperimentMetrics, GraspFile, PipelineConfig,
    PipelineResult,
};
pub use sampler::{filter_corner_balance, filter_object_region, sample_lines, SamplerConfig};
pub use synthgen::{oracle_best_grasps, oracle_collision, random_scene, render_scene, Primitive, SceneSpec, SceneTruth};
