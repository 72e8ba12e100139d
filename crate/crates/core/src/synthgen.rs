//! Synthetic tabletop scenes and brute-force ground-truth checks.
//!
//! Scenes are primitives resting on a plane seen from above. Rendering pastes
//! analytic top-surface heights onto the plane's pixel grid (orthographic at
//! the plane depth), which keeps object footprints exact in pixels.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depthscene::{encode_pgm, CameraModel, DepthImage};
use crate::error::{Error, Result};
use crate::geometry::{meters_to_pixels, GraspRect, GripperModel};

/// Stored unit of the height sidecar PGM.
pub const HEIGHT_UNIT_M: f64 = 1e-4;

/// Solid resting on the plane. Positions are meters in the camera frame at
/// the plane (x right, y down).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Primitive {
    Box {
        center_xy: [f64; 2],
        #[serde(default)]
        yaw: f64,
        size_xyz: [f64; 3],
    },
    Cylinder {
        center_xy: [f64; 2],
        radius: f64,
        height: f64,
    },
    Sphere {
        center_xy: [f64; 2],
        radius: f64,
    },
}

impl Primitive {
    pub fn center(&self) -> [f64; 2] {
        match *self {
            Primitive::Box { center_xy, .. }
            | Primitive::Cylinder { center_xy, .. }
            | Primitive::Sphere { center_xy, .. } => center_xy,
        }
    }

    /// Radius of the smallest circle around the center covering the footprint.
    pub fn footprint_radius(&self) -> f64 {
        match *self {
            Primitive::Box { size_xyz, .. } => 0.5 * size_xyz[0].hypot(size_xyz[1]),
            Primitive::Cylinder { radius, .. } | Primitive::Sphere { radius, .. } => radius,
        }
    }

    pub fn max_height(&self) -> f64 {
        match *self {
            Primitive::Box { size_xyz, .. } => size_xyz[2],
            Primitive::Cylinder { height, .. } => height,
            Primitive::Sphere { radius, .. } => 2.0 * radius,
        }
    }

    fn validate(&self) -> Result<()> {
        let dims: Vec<f64> = match *self {
            Primitive::Box { size_xyz, yaw, .. } => {
                if !yaw.is_finite() {
                    return Err(Error::Scene("box yaw must be finite".into()));
                }
                size_xyz.to_vec()
            }
            Primitive::Cylinder { radius, height, .. } => vec![radius, height],
            Primitive::Sphere { radius, .. } => vec![radius],
        };
        if dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Scene(format!("primitive sizes must be > 0: {self:?}")));
        }
        Ok(())
    }

    /// Top-surface height above the plane at `(x, y)`, if covered.
    pub fn top_height(&self, x: f64, y: f64) -> Option<f64> {
        let [cx, cy] = self.center();
        let (dx, dy) = (x - cx, y - cy);
        match *self {
            Primitive::Box { yaw, size_xyz, .. } => {
                let (s, c) = yaw.sin_cos();
                let lx = c * dx + s * dy;
                let ly = -s * dx + c * dy;
                (lx.abs() <= size_xyz[0] / 2.0 && ly.abs() <= size_xyz[1] / 2.0).then_some(size_xyz[2])
            }
            Primitive::Cylinder { radius, height, .. } => (dx.hypot(dy) <= radius).then_some(height),
            Primitive::Sphere { radius, .. } => {
                let r2 = dx * dx + dy * dy;
                (r2 <= radius * radius).then(|| radius + (radius * radius - r2).sqrt())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(rename = "plane_depth_m", default = "default_plane")]
    pub plane_depth: f64,
    #[serde(default)]
    pub objects: Vec<Primitive>,
    #[serde(rename = "noise_sigma_m", default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_plane() -> f64 {
    1.3
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            plane_depth: default_plane(),
            objects: Vec::new(),
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.plane_depth.is_finite() && self.plane_depth > 0.0) {
            return Err(Error::Scene("plane depth must be > 0".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Scene("noise sigma must be >= 0".into()));
        }
        for o in &self.objects {
            o.validate()?;
            if o.max_height() >= self.plane_depth {
                return Err(Error::Scene(format!("object reaches the camera: {o:?}")));
            }
        }
        Ok(())
    }
}

/// Noiseless ground truth of a rendered scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneTruth {
    pub width: usize,
    pub height: usize,
    pub plane_depth: f64,
    /// Index into `SceneSpec::objects` of the visible surface, per pixel.
    pub mask: Vec<Option<usize>>,
    /// Analytic height above the plane, per pixel.
    pub heights: Vec<f64>,
}

impl SceneTruth {
    pub fn object_at(&self, u: usize, v: usize) -> Option<usize> {
        self.mask[v * self.width + u]
    }

    pub fn height_at(&self, u: usize, v: usize) -> f64 {
        self.heights[v * self.width + u]
    }

    /// Object id at the nearest pixel of a continuous position.
    pub fn object_near(&self, u: f64, v: f64) -> Option<usize> {
        let (u, v) = (u.round(), v.round());
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return None;
        }
        self.object_at(u as usize, v as usize)
    }

    /// Run-length encoding of the mask as `[id, run]` pairs, `-1` for background.
    pub fn mask_rle(&self) -> Vec<[i64; 2]> {
        let mut runs: Vec<[i64; 2]> = Vec::new();
        for m in &self.mask {
            let id = m.map_or(-1, |i| i as i64);
            match runs.last_mut() {
                Some(last) if last[0] == id => last[1] += 1,
                _ => runs.push([id, 1]),
            }
        }
        runs
    }
}

/// Plane-frame metric position of a pixel center.
fn plane_point(cam: &CameraModel, plane: f64, u: f64, v: f64) -> (f64, f64) {
    ((u - cam.cx) * plane / cam.fx, (v - cam.cy) * plane / cam.fy)
}

pub fn render_scene(spec: &SceneSpec, cam: &CameraModel) -> Result<(DepthImage, SceneTruth)> {
    spec.validate()?;
    cam.validate()?;
    let plane = spec.plane_depth;
    let (w, h) = (cam.width, cam.height);
    for (i, o) in spec.objects.iter().enumerate() {
        let [x, y] = o.center();
        let r = o.footprint_radius();
        let u = cam.fx * x / plane + cam.cx;
        let v = cam.fy * y / plane + cam.cy;
        let (ru, rv) = (cam.fx * r / plane, cam.fy * r / plane);
        if u - ru < 0.0 || v - rv < 0.0 || u + ru > (w - 1) as f64 || v + rv > (h - 1) as f64 {
            return Err(Error::Scene(format!("object {i} does not fit inside the image")));
        }
    }

    let mut mask = vec![None; w * h];
    let mut heights = vec![0.0; w * h];
    mask.par_chunks_mut(w)
        .zip(heights.par_chunks_mut(w))
        .enumerate()
        .for_each(|(v, (mrow, hrow))| {
            for u in 0..w {
                let (x, y) = plane_point(cam, plane, u as f64, v as f64);
                for (i, o) in spec.objects.iter().enumerate() {
                    if let Some(top) = o.top_height(x, y) {
                        if top > hrow[u] {
                            hrow[u] = top;
                            mrow[u] = Some(i);
                        }
                    }
                }
            }
        });

    let mut depth: Vec<f64> = heights.iter().map(|hgt| plane - hgt).collect();
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::Scene(format!("noise: {e}")))?;
        for d in depth.iter_mut() {
            *d += normal.sample(&mut rng);
        }
    }
    let img = DepthImage::new(w, h, depth)?;
    Ok((
        img,
        SceneTruth {
            width: w,
            height: h,
            plane_depth: plane,
            mask,
            heights,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub width: usize,
    pub height: usize,
    pub plane_depth_m: f64,
    pub mask_rle: Vec<[i64; 2]>,
    pub height_pgm: String,
    pub height_unit_m: f64,
}

/// Writes the depth PGM (mm), the height PGM (0.1 mm) and the truth JSON.
pub fn write_render(
    img: &DepthImage,
    truth: &SceneTruth,
    depth_path: &Path,
    truth_path: &Path,
) -> Result<()> {
    fs::write(depth_path, encode_pgm(img.width(), img.height(), &img.to_stored(0.001)))?;
    let height_path = truth_path.with_extension("heights.pgm");
    let stored: Vec<u16> = truth
        .heights
        .iter()
        .map(|h| (h / HEIGHT_UNIT_M).round().clamp(0.0, u16::MAX as f64) as u16)
        .collect();
    fs::write(&height_path, encode_pgm(truth.width, truth.height, &stored))?;
    let sidecar = TruthSidecar {
        width: truth.width,
        height: truth.height,
        plane_depth_m: truth.plane_depth,
        mask_rle: truth.mask_rle(),
        height_pgm: height_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        height_unit_m: HEIGHT_UNIT_M,
    };
    fs::write(truth_path, serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(())
}

/// Finger sweep test against analytic truth.
///
/// Each finger occupies `[opening/2, opening/2 + finger_thickness]` along the
/// closing axis and the rectangle's half width across it, projected at the
/// true palm depth. The grasp collides when any object surface inside a
/// finger footprint rises above `palm - collision_tol`, i.e. blocks the
/// finger before it reaches grasping depth. Bare plane never collides.
pub fn oracle_collision(
    rect: &GraspRect,
    truth: &SceneTruth,
    g: &GripperModel,
    cam: &CameraModel,
    collision_tol: f64,
) -> bool {
    let palm = {
        let (u, v) = (rect.x_c.round(), rect.y_c.round());
        if u < 0.0 || v < 0.0 || u >= truth.width as f64 || v >= truth.height as f64 {
            return true;
        }
        truth.height_at(u as usize, v as usize)
    };
    let local_depth = truth.plane_depth - palm;
    let inner = meters_to_pixels(g.opening() / 2.0, local_depth, cam);
    let outer = meters_to_pixels(g.opening() / 2.0 + g.finger_thickness, local_depth, cam);
    let across = rect.half_width;

    let (s, c) = rect.theta.sin_cos();
    let reach = outer.hypot(across) + 1.0;
    let u0 = (rect.x_c - reach).floor().max(0.0) as usize;
    let v0 = (rect.y_c - reach).floor().max(0.0) as usize;
    let u1 = ((rect.x_c + reach).ceil() as usize).min(truth.width - 1);
    let v1 = ((rect.y_c + reach).ceil() as usize).min(truth.height - 1);
    for v in v0..=v1 {
        for u in u0..=u1 {
            let (du, dv) = (u as f64 - rect.x_c, v as f64 - rect.y_c);
            let along = (c * du + s * dv).abs();
            let side = (c * dv - s * du).abs();
            if along < inner || along > outer || side > across {
                continue;
            }
            if truth.object_at(u, v).is_some() && truth.height_at(u, v) > palm - collision_tol {
                return true;
            }
        }
    }
    false
}

/// Every collision-free rectangle on a `stride` pixel grid x `angles`
/// orientations whose center lies on an object.
pub fn oracle_best_grasps(
    spec: &SceneSpec,
    cam: &CameraModel,
    g: &GripperModel,
    stride: usize,
    angles: usize,
    collision_tol: f64,
) -> Result<Vec<GraspRect>> {
    if stride == 0 || angles < 4 {
        return Err(Error::Config("oracle needs stride >= 1 and angles >= 4".into()));
    }
    let (_, truth) = render_scene(spec, cam)?;
    let rows: Vec<usize> = (0..truth.height).step_by(stride).collect();
    let found: Vec<Vec<GraspRect>> = rows
        .par_iter()
        .map(|&v| {
            let mut out = Vec::new();
            for u in (0..truth.width).step_by(stride) {
                if truth.object_at(u, v).is_none() {
                    continue;
                }
                let depth = truth.plane_depth - truth.height_at(u, v);
                for j in 0..angles {
                    let rect = GraspRect {
                        x_c: u as f64,
                        y_c: v as f64,
                        theta: j as f64 * PI / angles as f64,
                        half_length: meters_to_pixels(g.half_length_m(), depth, cam),
                        half_width: meters_to_pixels(g.half_width_m(), depth, cam),
                    };
                    if rect.inside(truth.width, truth.height)
                        && !oracle_collision(&rect, &truth, g, cam, collision_tol)
                    {
                        out.push(rect);
                    }
                }
            }
            out
        })
        .collect();
    Ok(found.into_iter().flatten().collect())
}

/// Shape of randomly generated scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClutterParams {
    pub n_objects: usize,
    /// Half extents of the placement region around the optical axis, meters.
    pub region_half_xy: [f64; 2],
    /// Minimum gap between footprint circles, meters.
    pub min_gap: f64,
    pub plane_depth: f64,
    pub noise_sigma: f64,
}

impl Default for ClutterParams {
    fn default() -> Self {
        Self {
            n_objects: 6,
            region_half_xy: [0.28, 0.2],
            min_gap: 0.01,
            plane_depth: 1.3,
            noise_sigma: 0.0,
        }
    }
}

fn random_primitive(rng: &mut ChaCha8Rng, center_xy: [f64; 2]) -> Primitive {
    match rng.random_range(0..10) {
        0..=4 => Primitive::Box {
            center_xy,
            yaw: rng.random_range(0.0..PI),
            size_xyz: [
                rng.random_range(0.09..0.15),
                rng.random_range(0.03..0.055),
                rng.random_range(0.035..0.08),
            ],
        },
        5..=7 => Primitive::Cylinder {
            center_xy,
            radius: rng.random_range(0.015..0.028),
            height: rng.random_range(0.04..0.1),
        },
        _ => Primitive::Sphere {
            center_xy,
            radius: rng.random_range(0.02..0.032),
        },
    }
}

/// Places `n_objects` random primitives without footprint overlap.
pub fn random_scene(params: &ClutterParams, seed: u64) -> Result<SceneSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [hx, hy] = params.region_half_xy;
    let mut objects: Vec<Primitive> = Vec::with_capacity(params.n_objects);
    let mut attempts = 0;
    while objects.len() < params.n_objects {
        attempts += 1;
        if attempts > 20_000 {
            return Err(Error::Scene(format!(
                "could not place {} objects in the region",
                params.n_objects
            )));
        }
        let o = random_primitive(&mut rng, [0.0, 0.0]);
        let r = o.footprint_radius();
        if r >= hx || r >= hy {
            continue;
        }
        let c = [rng.random_range(-hx + r..hx - r), rng.random_range(-hy + r..hy - r)];
        let clear = objects.iter().all(|p| {
            let [px, py] = p.center();
            (c[0] - px).hypot(c[1] - py) >= r + p.footprint_radius() + params.min_gap
        });
        if clear {
            let placed = match o {
                Primitive::Box { yaw, size_xyz, .. } => Primitive::Box { center_xy: c, yaw, size_xyz },
                Primitive::Cylinder { radius, height, .. } => Primitive::Cylinder { center_xy: c, radius, height },
                Primitive::Sphere { radius, .. } => Primitive::Sphere { center_xy: c, radius },
            };
            objects.push(placed);
        }
    }
    Ok(SceneSpec {
        plane_depth: params.plane_depth,
        objects,
        noise_sigma: params.noise_sigma,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_diff;

    fn small_cam() -> CameraModel {
        CameraModel {
            width: 200,
            height: 160,
            cx: 99.5,
            cy: 79.5,
            ..CameraModel::default()
        }
    }

    fn a_box(x: f64, y: f64, yaw: f64, size: [f64; 3]) -> Primitive {
        Primitive::Box { center_xy: [x, y], yaw, size_xyz: size }
    }

    #[test]
    fn empty_scene_is_flat() {
        let (img, truth) = render_scene(&SceneSpec::default(), &small_cam()).unwrap();
        assert!(img.values().iter().all(|&d| d == 1.3));
        assert!(truth.mask.iter().all(Option::is_none));
    }

    #[test]
    fn axis_aligned_box_footprint() {
        let spec = SceneSpec {
            objects: vec![a_box(0.0, 0.0, 0.0, [0.1, 0.05, 0.04])],
            ..SceneSpec::default()
        };
        let (img, truth) = render_scene(&spec, &small_cam()).unwrap();
        // pixel u covers x = (u - 99.5) * 1.3 / 525; |x| <= 0.05 gives |u - 99.5| <= 20.19
        let cols: Vec<usize> = (0..200).filter(|&u| truth.object_at(u, 80).is_some()).collect();
        assert_eq!((cols[0], *cols.last().unwrap(), cols.len()), (80, 119, 40));
        // |y| <= 0.025 gives |v - 79.5| <= 10.09
        let rows: Vec<usize> = (0..160).filter(|&v| truth.object_at(100, v).is_some()).collect();
        assert_eq!((rows[0], *rows.last().unwrap(), rows.len()), (70, 89, 20));
        for (&m, (&hgt, &d)) in truth.mask.iter().zip(truth.heights.iter().zip(img.values())) {
            assert_eq!(m.is_some(), hgt > 0.0);
            if m.is_some() {
                assert_eq!(hgt, 0.04);
                assert!((d - 1.26).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn overlap_shows_the_taller_surface() {
        let spec = SceneSpec {
            objects: vec![
                a_box(0.0, 0.0, 0.0, [0.1, 0.05, 0.04]),
                a_box(0.03, 0.0, 0.0, [0.1, 0.05, 0.08]),
            ],
            ..SceneSpec::default()
        };
        let (_, truth) = render_scene(&spec, &small_cam()).unwrap();
        assert_eq!(truth.object_at(105, 80), Some(1));
        assert_eq!(truth.height_at(105, 80), 0.08);
        assert_eq!(truth.object_at(82, 80), Some(0));
    }

    #[test]
    fn out_of_frame_object_is_rejected() {
        let spec = SceneSpec {
            objects: vec![a_box(0.2, 0.0, 0.0, [0.1, 0.05, 0.04])],
            ..SceneSpec::default()
        };
        assert!(matches!(render_scene(&spec, &small_cam()), Err(Error::Scene(_))));
    }

    #[test]
    fn noise_is_seeded() {
        let spec = SceneSpec {
            noise_sigma: 0.003,
            seed: 4,
            ..SceneSpec::default()
        };
        let (a, truth) = render_scene(&spec, &small_cam()).unwrap();
        let (b, _) = render_scene(&spec, &small_cam()).unwrap();
        assert_eq!(a, b);
        assert!(truth.heights.iter().all(|&h| h == 0.0));
        assert!(a.values().iter().any(|&d| d != 1.3));
    }

    #[test]
    fn rle_round_trips_counts() {
        let spec = SceneSpec {
            objects: vec![a_box(0.0, 0.0, 0.3, [0.1, 0.05, 0.04])],
            ..SceneSpec::default()
        };
        let (_, truth) = render_scene(&spec, &small_cam()).unwrap();
        let rle = truth.mask_rle();
        assert_eq!(rle.iter().map(|r| r[1]).sum::<i64>(), 200 * 160);
        let on: i64 = rle.iter().filter(|r| r[0] == 0).map(|r| r[1]).sum();
        assert_eq!(on as usize, truth.mask.iter().filter(|m| m.is_some()).count());
    }

    fn rect_at(u: f64, v: f64, theta: f64, depth: f64) -> GraspRect {
        let cam = CameraModel::default();
        let g = GripperModel::default();
        GraspRect {
            x_c: u,
            y_c: v,
            theta,
            half_length: meters_to_pixels(g.half_length_m(), depth, &cam),
            half_width: meters_to_pixels(g.half_width_m(), depth, &cam),
        }
    }

    #[test]
    fn oracle_cases() {
        let cam = CameraModel::default();
        let g = GripperModel::default();
        let lone = SceneSpec {
            objects: vec![a_box(0.0, 0.0, 0.0, [0.16, 0.04, 0.05])],
            ..SceneSpec::default()
        };
        let (_, truth) = render_scene(&lone, &cam).unwrap();
        // closing across the short side
        assert!(!oracle_collision(&rect_at(319.5, 239.5, PI / 2.0, 1.25), &truth, &g, &cam, 0.015));
        // closing along the long side puts both fingers on the box
        assert!(oracle_collision(&rect_at(319.5, 239.5, 0.0, 1.25), &truth, &g, &cam, 0.015));
        // bare plane
        assert!(!oracle_collision(&rect_at(100.0, 100.0, 0.3, 1.3), &truth, &g, &cam, 0.015));

        let pair = SceneSpec {
            objects: vec![
                a_box(0.0, 0.0, 0.0, [0.16, 0.04, 0.05]),
                a_box(0.0, 0.075, 0.0, [0.16, 0.04, 0.08]),
            ],
            ..SceneSpec::default()
        };
        let (_, truth) = render_scene(&pair, &cam).unwrap();
        assert!(oracle_collision(&rect_at(319.5, 239.5, PI / 2.0, 1.25), &truth, &g, &cam, 0.015));
    }

    #[test]
    fn oracle_enumeration_on_elongated_box() {
        let cam = CameraModel::default();
        let g = GripperModel::default();
        // width 0.04 < opening 0.09 < length 0.2
        let spec = SceneSpec {
            objects: vec![a_box(0.0, 0.0, PI / 6.0, [0.2, 0.04, 0.05])],
            ..SceneSpec::default()
        };
        let angles = 8;
        let found = oracle_best_grasps(&spec, &cam, &g, 4, angles, 0.015).unwrap();
        assert!(!found.is_empty());
        let perpendicular = PI / 6.0 + PI / 2.0;
        assert!(found.iter().any(|r| angle_diff(r.theta, perpendicular) <= PI / (2 * angles) as f64));
        // away from the ends, closing near the long axis never clears the box
        let (s, c) = (PI / 6.0).sin_cos();
        for r in &found {
            let along = ((r.x_c - cam.cx) * c + (r.y_c - cam.cy) * s) * spec.plane_depth / cam.fx;
            if along.abs() < 0.06 {
                assert!(angle_diff(r.theta, PI / 6.0) > PI / 4.0, "{r:?}");
            }
        }
    }

    #[test]
    fn oracle_enumeration_on_cylinder_covers_all_angles() {
        let cam = CameraModel::default();
        let g = GripperModel::default();
        let spec = SceneSpec {
            objects: vec![Primitive::Cylinder { center_xy: [0.0, 0.0], radius: 0.025, height: 0.07 }],
            ..SceneSpec::default()
        };
        let angles = 8;
        let found = oracle_best_grasps(&spec, &cam, &g, 2, angles, 0.015).unwrap();
        for j in 0..angles {
            let t = j as f64 * PI / angles as f64;
            assert!(found.iter().any(|r| (r.theta - t).abs() < 1e-12), "no grasp at angle {t}");
        }
    }

    #[test]
    fn crowded_grid_is_graspable_only_at_outer_corners() {
        let cam = CameraModel::default();
        let g = GripperModel::default();
        // touching blocks, each wider than the opening
        let mut objects = Vec::new();
        for i in -1..=1 {
            for j in -1..=1 {
                objects.push(a_box(0.1 * i as f64, 0.1 * j as f64, 0.0, [0.1, 0.1, 0.05]));
            }
        }
        let spec = SceneSpec { objects, ..SceneSpec::default() };
        let found = oracle_best_grasps(&spec, &cam, &g, 4, 8, 0.015).unwrap();
        let half = 0.15 * cam.fx / spec.plane_depth;
        for r in &found {
            let corner = [(-half, -half), (half, -half), (half, half), (-half, half)]
                .iter()
                .any(|&(du, dv)| (r.x_c - cam.cx - du).hypot(r.y_c - cam.cy - dv) < 12.0);
            assert!(corner, "{r:?}");
        }
    }

    #[test]
    fn random_scenes_do_not_overlap() {
        for seed in 0..20 {
            let spec = random_scene(&ClutterParams::default(), seed).unwrap();
            assert_eq!(spec.objects.len(), 6);
            for (i, a) in spec.objects.iter().enumerate() {
                for b in &spec.objects[i + 1..] {
                    let d = (a.center()[0] - b.center()[0]).hypot(a.center()[1] - b.center()[1]);
                    assert!(d >= a.footprint_radius() + b.footprint_radius());
                }
            }
            render_scene(&spec, &CameraModel::default()).unwrap();
        }
    }
}
