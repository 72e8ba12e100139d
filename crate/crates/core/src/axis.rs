//! Stage 4: major-axis angle of each point family and the grasp rectangle
//! perpendicular to it.
//!
//! Two formulas are available. `CentralMoment` is the standard orientation of
//! second central moments, `atan2(2 Sxy, Sxx - Syy) / 2`. `LiteralEq1` keeps the
//! published variant with `Sxx + Syy` in the denominator; it does not recover a
//! 45 degree axis and is kept only for fidelity comparisons.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cluster::{Clustering, PointFamily};
use crate::depthscene::{robust_z, CameraModel, HeightMap};
use crate::error::{Error, Result};
use crate::geometry::{build_rect, normalize_angle, GraspRect, GripperModel};

/// Numerator and denominator magnitudes below this (px^2) mark a family
/// without a dominant direction.
pub const DEGENERATE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisMode {
    #[default]
    CentralMoment,
    LiteralEq1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisResult {
    pub cluster_index: usize,
    pub phi: f64,
    pub mode: AxisMode,
    pub degenerate: bool,
}

/// Second central moments `(Sxx, Syy, Sxy)` about the family mean.
pub fn central_moments(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    points.iter().fold((0.0, 0.0, 0.0), |(sxx, syy, sxy), &(x, y)| {
        let (dx, dy) = (x - mx, y - my);
        (sxx + dx * dx, syy + dy * dy, sxy + dx * dy)
    })
}

pub fn major_axis(family: &PointFamily, mode: AxisMode) -> AxisResult {
    let degenerate = |phi| AxisResult {
        cluster_index: family.cluster_index,
        phi,
        mode,
        degenerate: true,
    };
    let first = family.points.first().copied();
    let distinct = first.is_some_and(|f| family.points.iter().any(|&p| p != f));
    if !distinct {
        return degenerate(0.0);
    }
    let (sxx, syy, sxy) = central_moments(&family.points);
    let num = 2.0 * sxy;
    let den = match mode {
        AxisMode::CentralMoment => sxx - syy,
        AxisMode::LiteralEq1 => sxx + syy,
    };
    if num.abs() < DEGENERATE_EPS && den.abs() < DEGENERATE_EPS {
        return degenerate(0.0);
    }
    AxisResult {
        cluster_index: family.cluster_index,
        phi: normalize_angle(0.5 * num.atan2(den)),
        mode,
        degenerate: false,
    }
}

/// A rectangle for one cluster, plus a note when the axis was degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRect {
    pub cluster_index: usize,
    pub rect: GraspRect,
    pub warning: Option<String>,
}

/// Places the gripper rectangle at the cluster centroid, perpendicular to the
/// family's major axis and sized at the centroid's local depth. Degenerate
/// axes fall back to `theta = 0`.
pub fn rect_for_cluster(
    clustering: &Clustering,
    family: &PointFamily,
    axis: &AxisResult,
    hm: &HeightMap,
    g: &GripperModel,
    cam: &CameraModel,
    z_window: usize,
) -> Result<ClusterRect> {
    let centroid = *clustering
        .centroids
        .get(family.cluster_index)
        .ok_or_else(|| Error::Config(format!("no centroid for cluster {}", family.cluster_index)))?;
    let pixel = hm.pixel_at(centroid.0, centroid.1).ok_or_else(|| {
        Error::OutOfBounds(format!("centroid {centroid:?} outside the height map"))
    })?;
    let z = robust_z(hm, pixel, z_window).ok_or_else(|| {
        Error::Estimation(format!("unknown height at centroid {centroid:?}"))
    })?;
    let local_depth = hm.background_depth() - z;
    let (phi, warning) = if axis.degenerate {
        (
            PI / 2.0,
            Some(format!(
                "cluster {}: isotropic point family, orientation defaulted to 0",
                family.cluster_index
            )),
        )
    } else {
        (axis.phi, None)
    };
    let rect = build_rect(centroid, phi, g, local_depth, cam)?;
    Ok(ClusterRect {
        cluster_index: family.cluster_index,
        rect,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depthscene::{height_map, DepthImage};
    use crate::geometry::angle_diff;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn fam(points: Vec<(f64, f64)>) -> PointFamily {
        PointFamily {
            cluster_index: 0,
            source_poses: (0..points.len() / 2).collect(),
            points,
        }
    }

    #[test]
    fn horizontal_segment() {
        let f = fam((0..10).map(|i| (i as f64, 5.0)).collect());
        for mode in [AxisMode::CentralMoment, AxisMode::LiteralEq1] {
            let a = major_axis(&f, mode);
            assert_eq!(a.phi, 0.0);
            assert!(!a.degenerate);
        }
    }

    #[test]
    fn diagonal_line_separates_modes() {
        let f = fam((0..10).map(|i| (i as f64, i as f64)).collect());
        assert_abs_diff_eq!(major_axis(&f, AxisMode::CentralMoment).phi, PI / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(major_axis(&f, AxisMode::LiteralEq1).phi, PI / 8.0, epsilon = 1e-12);
    }

    #[test]
    fn square_corners_are_degenerate() {
        let f = fam(vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        let a = major_axis(&f, AxisMode::CentralMoment);
        assert!(a.degenerate);
        assert_eq!(a.phi, 0.0);
        assert!(!major_axis(&f, AxisMode::LiteralEq1).degenerate);
    }

    #[test]
    fn coincident_points_are_degenerate() {
        assert!(major_axis(&fam(vec![(2.0, 2.0); 4]), AxisMode::LiteralEq1).degenerate);
        assert!(major_axis(&fam(vec![]), AxisMode::CentralMoment).degenerate);
    }

    fn flat_map(w: usize, h: usize) -> HeightMap {
        let mut d = vec![1.3; w * h];
        for v in 90..110 {
            for u in 90..110 {
                d[v * w + u] = 1.25;
            }
        }
        height_map(&DepthImage::new(w, h, d).unwrap(), 1.3).unwrap()
    }

    fn one_cluster(centroid: (f64, f64)) -> Clustering {
        Clustering {
            k: 1,
            centroids: vec![centroid],
            assignment: vec![0],
            inertia: 0.0,
            iterations: 1,
            inertia_history: vec![0.0],
        }
    }

    #[test]
    fn rect_is_perpendicular_to_axis() {
        let cam = CameraModel { width: 200, height: 200, ..CameraModel::default() };
        let hm = flat_map(200, 200);
        let f = fam(vec![(90.0, 100.0), (110.0, 100.0)]);
        let axis = major_axis(&f, AxisMode::CentralMoment);
        let r = rect_for_cluster(&one_cluster((100.0, 100.0)), &f, &axis, &hm, &GripperModel::default(), &cam, 3)
            .unwrap();
        assert_abs_diff_eq!(r.rect.theta, PI / 2.0, epsilon = 1e-12);
        // sized at the box top, 1.25 m away
        assert_abs_diff_eq!(r.rect.half_length, 525.0 * 0.065 / 1.25, epsilon = 1e-9);
        assert!(r.warning.is_none());
    }

    #[test]
    fn degenerate_cluster_defaults_to_zero() {
        let cam = CameraModel { width: 200, height: 200, ..CameraModel::default() };
        let hm = flat_map(200, 200);
        let f = fam(vec![(99.0, 99.0), (101.0, 99.0), (101.0, 101.0), (99.0, 101.0)]);
        let axis = major_axis(&f, AxisMode::CentralMoment);
        let r = rect_for_cluster(&one_cluster((100.0, 100.0)), &f, &axis, &hm, &GripperModel::default(), &cam, 3)
            .unwrap();
        assert_eq!(r.rect.theta, 0.0);
        assert!(r.warning.is_some());
    }

    #[test]
    fn border_centroid_is_dropped() {
        let cam = CameraModel { width: 200, height: 200, ..CameraModel::default() };
        let hm = flat_map(200, 200);
        let f = fam(vec![(0.0, 100.0), (10.0, 100.0)]);
        let axis = major_axis(&f, AxisMode::CentralMoment);
        let err = rect_for_cluster(&one_cluster((5.0, 100.0)), &f, &axis, &hm, &GripperModel::default(), &cam, 3);
        assert!(matches!(err, Err(Error::OutOfBounds(_))));
    }

    fn rotate(points: &[(f64, f64)], about: (f64, f64), a: f64) -> Vec<(f64, f64)> {
        let (s, c) = a.sin_cos();
        points
            .iter()
            .map(|&(x, y)| {
                let (dx, dy) = (x - about.0, y - about.1);
                (about.0 + c * dx - s * dy, about.1 + s * dx + c * dy)
            })
            .collect()
    }

    fn mean(points: &[(f64, f64)]) -> (f64, f64) {
        let n = points.len() as f64;
        (
            points.iter().map(|p| p.0).sum::<f64>() / n,
            points.iter().map(|p| p.1).sum::<f64>() / n,
        )
    }

    proptest! {
        #[test]
        fn rotation_equivariance(len in 20.0..80.0f64, wid in 1.0..5.0f64, base in 0.0..PI,
                                 alpha in 0.0..PI, cx in 50.0..500.0f64, cy in 50.0..400.0f64) {
            // anisotropic rectangle of points, then rotated
            let mut pts = Vec::new();
            for i in 0..21 {
                for j in 0..5 {
                    pts.push((cx + len * (i as f64 / 20.0 - 0.5), cy + wid * (j as f64 / 4.0 - 0.5)));
                }
            }
            let pts = rotate(&pts, (cx, cy), base);
            let a = major_axis(&fam(pts.clone()), AxisMode::CentralMoment);
            let b = major_axis(&fam(rotate(&pts, mean(&pts), alpha)), AxisMode::CentralMoment);
            prop_assert!(angle_diff(b.phi, a.phi + alpha) < 1e-9);
        }

        #[test]
        fn translation_and_scale_invariance(pts in prop::collection::vec((0.0..100.0f64, 0.0..100.0f64), 4..40),
                                            dx in -200.0..200.0f64, dy in -200.0..200.0f64, s in 0.5..4.0f64) {
            for mode in [AxisMode::CentralMoment, AxisMode::LiteralEq1] {
                let a = major_axis(&fam(pts.clone()), mode);
                prop_assume!(!a.degenerate);
                let shifted: Vec<_> = pts.iter().map(|&(x, y)| (x + dx, y + dy)).collect();
                let m = mean(&pts);
                let scaled: Vec<_> = pts.iter().map(|&(x, y)| (m.0 + s * (x - m.0), m.1 + s * (y - m.1))).collect();
                prop_assert!(angle_diff(major_axis(&fam(shifted), mode).phi, a.phi) < 1e-6);
                prop_assert!(angle_diff(major_axis(&fam(scaled), mode).phi, a.phi) < 1e-6);
            }
        }
    }
}
