//! Stages 1-2: uniform line sampling and the two-level depth filter.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depthscene::{robust_z, HeightMap, PixelRect};
use crate::error::{Error, Result};
use crate::geometry::{corners, LinePose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_samples: usize,
    #[serde(rename = "l_v_px")]
    pub l_v: f64,
    /// Minimum palm height above the background, meters.
    #[serde(rename = "margin_m")]
    pub margin: f64,
    /// Largest tolerated height difference between the two fingers, meters.
    #[serde(rename = "corner_imbalance_max_m")]
    pub corner_imbalance_max: f64,
    pub seed: u64,
    /// Sampling region; the whole image when absent.
    pub roi: Option<PixelRect>,
    pub z_window: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            l_v: 30.0,
            margin: 0.025,
            corner_imbalance_max: 0.015,
            seed: 0,
            roi: None,
            z_window: 3,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be > 0".into()));
        }
        for (name, v) in [
            ("l_v_px", self.l_v),
            ("margin_m", self.margin),
            ("corner_imbalance_max_m", self.corner_imbalance_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.z_window == 0 || self.z_window.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "z_window must be odd, got {}",
                self.z_window
            )));
        }
        Ok(())
    }

    pub fn roi_within(&self, width: usize, height: usize) -> Result<PixelRect> {
        let roi = self.roi.unwrap_or(PixelRect::full(width, height));
        if !roi.fits_in(width, height) {
            return Err(Error::Config(format!(
                "roi {roi:?} outside {width}x{height} image"
            )));
        }
        Ok(roi)
    }
}

/// Draws `n_samples` line poses with centers uniform over `roi` shrunk by
/// `l_v / 2` (so both fingers stay inside) and angles uniform over `[0, pi)`.
pub fn sample_lines(cfg: &SamplerConfig, roi: PixelRect) -> Result<Vec<LinePose>> {
    cfg.validate()?;
    let half = cfg.l_v / 2.0;
    let (u0, u1) = (roi.x as f64 + half, (roi.x + roi.width - 1) as f64 - half);
    let (v0, v1) = (roi.y as f64 + half, (roi.y + roi.height - 1) as f64 - half);
    if !(u1 > u0 && v1 > v0) {
        return Err(Error::Config(format!(
            "roi {}x{} too small for l_v = {}",
            roi.width, roi.height, cfg.l_v
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..cfg.n_samples)
        .map(|_| {
            let x = rng.random_range(u0..u1);
            let y = rng.random_range(v0..v1);
            let t = rng.random_range(0.0..PI);
            LinePose::new(x, y, cfg.l_v, t)
        })
        .collect())
}

fn height_near(hm: &HeightMap, (u, v): (f64, f64), window: usize) -> Option<f64> {
    hm.pixel_at(u, v).and_then(|p| robust_z(hm, p, window))
}

/// Level 1: keep poses whose palm stands more than `margin` above the background.
pub fn filter_object_region(poses: &[LinePose], hm: &HeightMap, cfg: &SamplerConfig) -> Vec<LinePose> {
    poses
        .par_iter()
        .filter(|p| matches!(height_near(hm, p.center(), cfg.z_window), Some(z) if z > cfg.margin))
        .copied()
        .collect()
}

/// Level 2: keep poses whose two finger heights agree within
/// `corner_imbalance_max`; a large difference means one finger hits something.
pub fn filter_corner_balance(poses: &[LinePose], hm: &HeightMap, cfg: &SamplerConfig) -> Vec<LinePose> {
    poses
        .par_iter()
        .filter(|p| {
            let (a, b) = corners(p);
            match (height_near(hm, a, cfg.z_window), height_near(hm, b, cfg.z_window)) {
                (Some(za), Some(zb)) => (za - zb).abs() <= cfg.corner_imbalance_max,
                _ => false,
            }
        })
        .copied()
        .collect()
}
