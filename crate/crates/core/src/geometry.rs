//! Gripper parameterizations in the image plane.
//!
//! A gripper is a line `(x_c, y_c, l_v, theta)` while sampling and a rectangle
//! `(x_c, y_c, theta)` while scoring. Angles live in `[0, pi)`: both shapes are
//! symmetric under a half turn.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::depthscene::CameraModel;
use crate::error::{Error, Result};

/// Physical two-finger gripper, in meters.
///
/// `max_opening` defaults to 0.18 m. The rectangle's half length is
/// `opening_fraction * max_opening / 2 + side_clearance`, its half width
/// `finger_thickness / 2 + side_clearance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GripperModel {
    #[serde(rename = "max_opening_m")]
    pub max_opening: f64,
    #[serde(rename = "finger_thickness_m")]
    pub finger_thickness: f64,
    #[serde(rename = "side_clearance_m")]
    pub side_clearance: f64,
    pub opening_fraction: f64,
}

impl Default for GripperModel {
    fn default() -> Self {
        Self {
            max_opening: 0.18,
            finger_thickness: 0.02,
            side_clearance: 0.02,
            opening_fraction: 0.5,
        }
    }
}

impl GripperModel {
    pub fn validate(&self) -> Result<()> {
        let lengths = [self.max_opening, self.finger_thickness, self.side_clearance];
        if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Config(format!("gripper lengths must be > 0: {self:?}")));
        }
        if !(self.opening_fraction > 0.0 && self.opening_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "opening_fraction must be in (0, 1], got {}",
                self.opening_fraction
            )));
        }
        if self.opening() < self.finger_thickness {
            return Err(Error::Config(
                "working opening is narrower than a finger".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let g: GripperModel = serde_json::from_slice(&fs::read(path)?)?;
        g.validate()?;
        Ok(g)
    }

    /// Working opening, `opening_fraction * max_opening`.
    pub fn opening(&self) -> f64 {
        self.opening_fraction * self.max_opening
    }

    pub fn half_length_m(&self) -> f64 {
        self.opening() / 2.0 + self.side_clearance
    }

    pub fn half_width_m(&self) -> f64 {
        self.finger_thickness / 2.0 + self.side_clearance
    }
}

/// Wraps an angle into `[0, pi)`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Smallest difference between two orientations modulo `pi`, in `[0, pi/2]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Gripper as a line: palm at `(x_c, y_c)`, fingers at the two ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinePose {
    pub x_c: f64,
    pub y_c: f64,
    pub l_v: f64,
    pub theta: f64,
}

impl LinePose {
    pub fn new(x_c: f64, y_c: f64, l_v: f64, theta: f64) -> Self {
        Self {
            x_c,
            y_c,
            l_v,
            theta: normalize_angle(theta),
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x_c, self.y_c)
    }
}

/// Finger positions of a line pose.
pub fn corners(p: &LinePose) -> ((f64, f64), (f64, f64)) {
    let (s, c) = p.theta.sin_cos();
    let h = p.l_v / 2.0;
    (
        (p.x_c + h * c, p.y_c + h * s),
        (p.x_c - h * c, p.y_c - h * s),
    )
}

/// Gripper as a rectangle. The long axis (direction `theta`) is the closing
/// direction; fingers sit at the two short sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspRect {
    pub x_c: f64,
    pub y_c: f64,
    pub theta: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl GraspRect {
    /// Unit vector of the closing direction.
    pub fn axis(&self) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (c, s)
    }

    /// `(along, across)` offsets of an image point in the rectangle frame.
    pub fn to_local(&self, u: f64, v: f64) -> (f64, f64) {
        let (c, s) = self.axis();
        let (du, dv) = (u - self.x_c, v - self.y_c);
        (du * c + dv * s, -du * s + dv * c)
    }

    pub fn from_local(&self, along: f64, across: f64) -> (f64, f64) {
        let (c, s) = self.axis();
        (
            self.x_c + along * c - across * s,
            self.y_c + along * s + across * c,
        )
    }

    /// Corner points in drawing order.
    pub fn corner_points(&self) -> [(f64, f64); 4] {
        let (l, w) = (self.half_length, self.half_width);
        [
            self.from_local(l, w),
            self.from_local(l, -w),
            self.from_local(-l, -w),
            self.from_local(-l, w),
        ]
    }

    /// Whether all four corners lie inside a `width x height` image.
    pub fn inside(&self, width: usize, height: usize) -> bool {
        let (maxu, maxv) = ((width - 1) as f64, (height - 1) as f64);
        self.corner_points()
            .iter()
            .all(|&(u, v)| u >= 0.0 && v >= 0.0 && u <= maxu && v <= maxv)
    }
}

/// Pinhole projection of a metric length at `depth`, using `fx`.
///
/// Under anisotropic intrinsics the vertical extent would use `fy`; the
/// rectangle is rotated freely, so one focal length is used throughout.
pub fn meters_to_pixels(length: f64, depth: f64, cam: &CameraModel) -> f64 {
    cam.fx * length / depth
}

/// Rectangle centered at `centroid`, perpendicular to the major axis `phi`,
/// sized from the gripper projected at `local_depth`.
pub fn build_rect(
    centroid: (f64, f64),
    phi: f64,
    g: &GripperModel,
    local_depth: f64,
    cam: &CameraModel,
) -> Result<GraspRect> {
    if !(local_depth.is_finite() && local_depth > 0.0) {
        return Err(Error::Config(format!("local depth must be > 0, got {local_depth}")));
    }
    let rect = GraspRect {
        x_c: centroid.0,
        y_c: centroid.1,
        theta: normalize_angle(phi + PI / 2.0),
        half_length: meters_to_pixels(g.half_length_m(), local_depth, cam),
        half_width: meters_to_pixels(g.half_width_m(), local_depth, cam),
    };
    if !rect.inside(cam.width, cam.height) {
        return Err(Error::OutOfBounds(format!(
            "rectangle at ({:.1}, {:.1}) leaves the {}x{} image",
            rect.x_c, rect.y_c, cam.width, cam.height
        )));
    }
    Ok(rect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn axis_aligned_corners() {
        let (a, b) = corners(&LinePose::new(100.0, 100.0, 30.0, 0.0));
        assert_eq!((a, b), ((115.0, 100.0), (85.0, 100.0)));
        let (a, b) = corners(&LinePose::new(100.0, 100.0, 30.0, PI / 2.0));
        assert_abs_diff_eq!(a.0, 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.1, 115.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.0, 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.1, 85.0, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_corners() {
        // 15 / sqrt(2) = 10.606601717798213
        let (a, b) = corners(&LinePose::new(50.0, 60.0, 30.0, PI / 4.0));
        assert_abs_diff_eq!(a.0, 60.606_601_717_798_21, epsilon = 1e-9);
        assert_abs_diff_eq!(a.1, 70.606_601_717_798_21, epsilon = 1e-9);
        assert_abs_diff_eq!(b.0, 39.393_398_282_201_79, epsilon = 1e-9);
        assert_abs_diff_eq!(b.1, 49.393_398_282_201_79, epsilon = 1e-9);
    }

    #[test]
    fn projection_values() {
        let cam = CameraModel::default();
        assert_eq!(meters_to_pixels(0.0, 1.7, &cam), 0.0);
        // 525 * 0.09 / 1.3
        assert_abs_diff_eq!(meters_to_pixels(0.09, 1.3, &cam), 36.346_153_846_153_85, epsilon = 1e-9);
        assert_eq!(
            meters_to_pixels(0.09, 2.6, &cam) * 2.0,
            meters_to_pixels(0.09, 1.3, &cam)
        );
    }

    #[test]
    fn default_rect_dimensions() {
        let cam = CameraModel::default();
        let r = build_rect((320.0, 240.0), 0.0, &GripperModel::default(), 1.3, &cam).unwrap();
        assert_abs_diff_eq!(r.half_length, 525.0 * 0.065 / 1.3, epsilon = 1e-9);
        assert_abs_diff_eq!(r.half_length, 26.25, epsilon = 1e-9);
        assert_abs_diff_eq!(r.half_width, 12.115384615384615, epsilon = 1e-9);
        assert_abs_diff_eq!(r.theta, PI / 2.0, epsilon = 1e-15);
        let r = build_rect((320.0, 240.0), PI / 2.0, &GripperModel::default(), 1.3, &cam).unwrap();
        assert_eq!(r.theta, 0.0);
    }

    #[test]
    fn rect_near_border_is_out_of_bounds() {
        let cam = CameraModel::default();
        let err = build_rect((5.0, 240.0), PI / 2.0, &GripperModel::default(), 1.3, &cam);
        assert!(matches!(err, Err(Error::OutOfBounds(_))));
    }

    #[test]
    fn gripper_validation() {
        assert!(GripperModel::default().validate().is_ok());
        let g = GripperModel {
            opening_fraction: 0.05,
            ..GripperModel::default()
        };
        assert!(g.validate().is_err());
        let g = GripperModel {
            side_clearance: 0.0,
            ..GripperModel::default()
        };
        assert!(g.validate().is_err());
    }

    proptest! {
        #[test]
        fn corners_are_half_turn_symmetric(x in 0.0..640.0f64, y in 0.0..480.0f64,
                                           l in 1.0..100.0f64, t in 0.0..PI) {
            let (a, b) = corners(&LinePose { x_c: x, y_c: y, l_v: l, theta: t });
            let (a2, b2) = corners(&LinePose { x_c: x, y_c: y, l_v: l, theta: t + PI });
            prop_assert!((a.0 - b2.0).abs() < 1e-9 && (a.1 - b2.1).abs() < 1e-9);
            prop_assert!((b.0 - a2.0).abs() < 1e-9 && (b.1 - a2.1).abs() < 1e-9);
            let len = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
            prop_assert!((len - l).abs() < 1e-9);
        }

        #[test]
        fn rect_orientation_is_mod_pi(phi in 0.0..PI, depth in 0.8..2.0f64) {
            let cam = CameraModel::default();
            let g = GripperModel::default();
            let a = build_rect((320.0, 240.0), phi, &g, depth, &cam).unwrap();
            let b = build_rect((320.0, 240.0), phi + PI, &g, depth, &cam).unwrap();
            prop_assert!(angle_diff(a.theta, b.theta) < 1e-12);
            prop_assert_eq!(a.half_length, b.half_length);
            let far = build_rect((320.0, 240.0), phi, &g, 2.0 * depth, &cam).unwrap();
            prop_assert!((a.half_length / far.half_length - 2.0).abs() < 1e-12);
            prop_assert!((a.half_width / far.half_width - 2.0).abs() < 1e-12);
        }
    }
}
