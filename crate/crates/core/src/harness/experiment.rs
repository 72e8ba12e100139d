use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_rational::Ratio;
use serde::{Serialize, Serializer};

use super::{run_pipeline_with_k, KMode, PipelineConfig};
use crate::depthscene::CameraModel;
use crate::error::{Error, Result};
use crate::geometry::{meters_to_pixels, GraspRect, GripperModel};
use crate::synthgen::{oracle_collision, render_scene, SceneSpec, SceneTruth};

/// Step along the closing segment, in pixels.
const SEGMENT_STEP_PX: f64 = 0.25;

/// Counts of one clutter-clearing run. `alpha = OP/NoT` and `beta = NoT/MT`
/// are kept as exact ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentMetrics {
    not: u64,
    op: u64,
    mt: u64,
}

impl ExperimentMetrics {
    /// Requires `OP <= NoT <= MT` and `NoT >= 1`.
    pub fn new(not: u64, op: u64, mt: u64) -> Result<Self> {
        if not == 0 || op > not || not > mt {
            return Err(Error::Config(format!(
                "metrics need 1 <= NoT, OP <= NoT <= MT (got NoT={not}, OP={op}, MT={mt})"
            )));
        }
        Ok(Self { not, op, mt })
    }

    pub fn not(&self) -> u64 {
        self.not
    }

    pub fn op(&self) -> u64 {
        self.op
    }

    pub fn mt(&self) -> u64 {
        self.mt
    }

    pub fn alpha_ratio(&self) -> Ratio<u64> {
        Ratio::new(self.op, self.not)
    }

    pub fn beta_ratio(&self) -> Ratio<u64> {
        Ratio::new(self.not, self.mt)
    }

    pub fn alpha(&self) -> f64 {
        self.op as f64 / self.not as f64
    }

    pub fn beta(&self) -> f64 {
        self.not as f64 / self.mt as f64
    }
}

impl Serialize for ExperimentMetrics {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Row {
            #[serde(rename = "NoT")]
            not: u64,
            #[serde(rename = "OP")]
            op: u64,
            #[serde(rename = "MT")]
            mt: u64,
            alpha: f64,
            beta: f64,
        }
        Row {
            not: self.not,
            op: self.op,
            mt: self.mt,
            alpha: self.alpha(),
            beta: self.beta(),
        }
        .serialize(s)
    }
}

/// Objects whose mask the closing segment of `rect` crosses, and whether
/// either finger tip lands on one of them.
fn closing_segment(rect: &GraspRect, truth: &SceneTruth, half_open: f64) -> (BTreeSet<usize>, [Option<usize>; 2]) {
    let (c, s) = rect.axis();
    let steps = (2.0 * half_open / SEGMENT_STEP_PX).ceil() as usize;
    let mut hit = BTreeSet::new();
    for i in 0..=steps {
        let t = -half_open + 2.0 * half_open * i as f64 / steps as f64;
        if let Some(id) = truth.object_near(rect.x_c + t * c, rect.y_c + t * s) {
            hit.insert(id);
        }
    }
    let tip = |t: f64| truth.object_near(rect.x_c + t * c, rect.y_c + t * s);
    (hit, [tip(-half_open), tip(half_open)])
}

/// Desk-scale stand-in for a physical pick. Succeeds iff the oracle finds no
/// finger collision and the closing segment crosses exactly one object's
/// mask with both finger tips off it; that object is then removed.
pub fn simulate_pick(
    scene: &SceneSpec,
    grasp: &GraspRect,
    g: &GripperModel,
    cam: &CameraModel,
    collision_tol: f64,
) -> Result<(bool, SceneSpec)> {
    let noiseless = SceneSpec {
        noise_sigma: 0.0,
        ..scene.clone()
    };
    let (_, truth) = render_scene(&noiseless, cam)?;
    if oracle_collision(grasp, &truth, g, cam, collision_tol) {
        return Ok((false, scene.clone()));
    }
    let (u, v) = (grasp.x_c.round() as usize, grasp.y_c.round() as usize);
    let depth = truth.plane_depth - truth.height_at(u, v);
    let half_open = meters_to_pixels(g.opening() / 2.0, depth, cam);
    let (hit, tips) = closing_segment(grasp, &truth, half_open);
    if hit.len() != 1 {
        return Ok((false, scene.clone()));
    }
    let id = *hit.first().unwrap();
    if tips.contains(&Some(id)) {
        return Ok((false, scene.clone()));
    }
    let mut next = scene.clone();
    next.objects.remove(id);
    Ok((true, next))
}

/// One render, plan and pick cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub objects_before: usize,
    pub grasp: Option<GraspRect>,
    pub success: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub metrics: ExperimentMetrics,
    pub trials: Vec<TrialRecord>,
}

/// Clears a scene one pick at a time, replanning from a fresh render each
/// trial, until it is empty or `ceil(max_trial_factor * NoT)` trials are used.
/// Trial `t` renders with noise seed `spec.seed + t` and plans with sampler
/// seed `config.seed + t`.
pub fn run_experiment(
    spec: &SceneSpec,
    config: &PipelineConfig,
    cam: &CameraModel,
    max_trial_factor: f64,
) -> Result<ExperimentReport> {
    spec.validate()?;
    config.validate()?;
    let not = spec.objects.len();
    if not == 0 {
        return Err(Error::EmptyInput("experiment scene has no objects".into()));
    }
    if max_trial_factor.is_nan() || max_trial_factor < 1.0 {
        return Err(Error::Config(format!("max_trial_factor must be >= 1, got {max_trial_factor}")));
    }
    let cap = (max_trial_factor * not as f64).ceil() as usize;
    let mut scene = spec.clone();
    let mut trials = Vec::new();
    let mut picked = 0;
    while !scene.objects.is_empty() && trials.len() < cap {
        let t = trials.len();
        let mut record = TrialRecord {
            trial: t,
            objects_before: scene.objects.len(),
            grasp: None,
            success: false,
            error: None,
        };
        let attempt = || -> Result<Option<(GraspRect, bool, SceneSpec)>> {
            let frame = SceneSpec {
                seed: spec.seed.wrapping_add(t as u64),
                ..scene.clone()
            };
            let (img, _) = render_scene(&frame, cam)?;
            let mut cfg = config.clone();
            cfg.sampler.seed = config.sampler.seed.wrapping_add(t as u64);
            let k = match cfg.k_mode {
                KMode::Fixed => cfg.k,
                KMode::ObjectCount => scene.objects.len(),
            };
            let result = run_pipeline_with_k(&img, cam, &cfg, k)?;
            let Some(rect) = result.selected_rect().copied() else {
                return Ok(None);
            };
            let (ok, next) = simulate_pick(&scene, &rect, &cfg.gripper, cam, cfg.gdi.collision_tol)?;
            Ok(Some((rect, ok, next)))
        };
        match attempt() {
            Ok(Some((rect, ok, next))) => {
                record.grasp = Some(rect);
                record.success = ok;
                if ok {
                    picked += 1;
                    scene = next;
                }
            }
            Ok(None) => record.error = Some(super::NO_FEASIBLE_GRASP.to_string()),
            Err(e) => record.error = Some(e.to_string()),
        }
        trials.push(record);
    }
    // a scene cleared early still charges NoT trials
    let mt = trials.len().max(not);
    Ok(ExperimentReport {
        metrics: ExperimentMetrics::new(not as u64, picked, mt as u64)?,
        trials,
    })
}

fn mean(rows: &[(String, ExperimentMetrics)], f: impl Fn(&ExperimentMetrics) -> f64) -> f64 {
    rows.iter().map(|(_, m)| f(m)).sum::<f64>() / rows.len() as f64
}

/// `scene,NoT,OP,MT,alpha,beta` rows plus a `mean` row.
pub fn bench_csv(rows: &[(String, ExperimentMetrics)]) -> String {
    let mut out = String::from("scene,NoT,OP,MT,alpha,beta\n");
    for (name, m) in rows {
        let _ = writeln!(out, "{name},{},{},{},{:.4},{:.4}", m.not, m.op, m.mt, m.alpha(), m.beta());
    }
    if !rows.is_empty() {
        let _ = writeln!(
            out,
            "mean,{:.2},{:.2},{:.2},{:.4},{:.4}",
            mean(rows, |m| m.not as f64),
            mean(rows, |m| m.op as f64),
            mean(rows, |m| m.mt as f64),
            mean(rows, ExperimentMetrics::alpha),
            mean(rows, ExperimentMetrics::beta),
        );
    }
    out
}

/// The same table with padded columns and percentages.
pub fn bench_table(rows: &[(String, ExperimentMetrics)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
    let mut out = format!("{:<width$} {:>6} {:>6} {:>6} {:>8} {:>8}\n", "scene", "NoT", "OP", "MT", "alpha%", "beta%");
    for (name, m) in rows {
        let _ = writeln!(
            out,
            "{name:<width$} {:>6} {:>6} {:>6} {:>8.2} {:>8.2}",
            m.not,
            m.op,
            m.mt,
            100.0 * m.alpha(),
            100.0 * m.beta()
        );
    }
    if !rows.is_empty() {
        let _ = writeln!(
            out,
            "{:<width$} {:>6.2} {:>6.2} {:>6.2} {:>8.2} {:>8.2}",
            "mean",
            mean(rows, |m| m.not as f64),
            mean(rows, |m| m.op as f64),
            mean(rows, |m| m.mt as f64),
            100.0 * mean(rows, ExperimentMetrics::alpha),
            100.0 * mean(rows, ExperimentMetrics::beta),
        );
    }
    out
}
