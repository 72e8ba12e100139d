//! Stage 5: Grasp Decide Index.
//!
//! For each rectangle we read the heights of the pixels where the fingers
//! descend (two strips at the short sides) and compare them with the palm
//! height at the center. In height terms the deviation of pixel `i` is
//! `Z_c - h_i`: positive means the finger strip is below the palm, i.e. free
//! space. In raw camera depth this is exactly `Z_i - Z_c`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depthscene::{robust_z, HeightMap};
use crate::error::{Error, Result};
use crate::geometry::GraspRect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMode {
    /// `(positive_fraction, max_deviation)`, lexicographic.
    #[default]
    ClearanceCount,
    /// `max_deviation` alone.
    Eq2Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandMode {
    /// Strips at the two short sides, where the fingers go down.
    #[default]
    FingerEnds,
    /// A ring along the whole rectangle boundary.
    FullPerimeter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdiConfig {
    /// Half depth of a finger strip, pixels. A strip spans `2 * band_px`
    /// inward from the rectangle edge.
    pub band_px: f64,
    #[serde(rename = "clearance_min_m")]
    pub clearance_min: f64,
    #[serde(rename = "collision_tol_m")]
    pub collision_tol: f64,
    pub ranking_mode: RankingMode,
    pub top_n: usize,
    pub band_mode: BandMode,
    /// Window of the palm-height median; follows the sampler's `z_window`.
    #[serde(skip)]
    pub z_window: usize,
}

impl Default for GdiConfig {
    fn default() -> Self {
        Self {
            band_px: 4.0,
            clearance_min: 0.005,
            collision_tol: 0.015,
            ranking_mode: RankingMode::ClearanceCount,
            top_n: 5,
            band_mode: BandMode::FingerEnds,
            z_window: 3,
        }
    }
}

impl GdiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.band_px.is_finite() && self.band_px > 0.0) {
            return Err(Error::Config(format!("band_px must be > 0, got {}", self.band_px)));
        }
        if !(self.clearance_min >= 0.0 && self.collision_tol >= 0.0) {
            return Err(Error::Config("clearance_min_m and collision_tol_m must be >= 0".into()));
        }
        if self.z_window.is_multiple_of(2) {
            return Err(Error::Config("palm window must be odd".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdiScore {
    pub cluster_index: usize,
    pub rect: GraspRect,
    /// Palm height `Z_c`, meters above background.
    pub palm_height: f64,
    pub n_pixels: usize,
    /// Largest `Z_c - h_i` over the finger pixels, meters.
    pub max_deviation: f64,
    pub positive_count: usize,
    pub positive_fraction: f64,
    pub colliding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedGrasp {
    pub rank: usize,
    pub cluster_index: usize,
    pub score: GdiScore,
}

/// Integer pixels inside `rect` near its boundary, in row-major order.
///
/// In `FingerEnds` mode a pixel qualifies when its offset along the closing
/// axis is within `2 * band` of either short side; `FullPerimeter` also
/// includes the long sides.
pub fn periphery_pixels(rect: &GraspRect, band: f64, mode: BandMode, width: usize, height: usize) -> Result<Vec<(usize, usize)>> {
    let depth = 2.0 * band;
    if !(band > 0.0 && depth < rect.half_length && band < rect.half_width) {
        return Err(Error::Config(format!(
            "band {band} px too large for rectangle {:.2} x {:.2}",
            rect.half_length, rect.half_width
        )));
    }
    if mode == BandMode::FullPerimeter && depth >= rect.half_width {
        return Err(Error::Config(format!(
            "band {band} px too large for a full-perimeter ring of half width {:.2}",
            rect.half_width
        )));
    }
    if !rect.inside(width, height) {
        return Err(Error::OutOfBounds(format!(
            "rectangle at ({:.1}, {:.1}) leaves the image",
            rect.x_c, rect.y_c
        )));
    }
    let cs = rect.corner_points();
    let lo = |f: fn(&(f64, f64)) -> f64| cs.iter().map(f).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
    let hi = |f: fn(&(f64, f64)) -> f64| cs.iter().map(f).fold(f64::NEG_INFINITY, f64::max).ceil() as usize;
    let (u0, u1) = (lo(|p| p.0), hi(|p| p.0).min(width - 1));
    let (v0, v1) = (lo(|p| p.1), hi(|p| p.1).min(height - 1));
    let (hl, hw) = (rect.half_length, rect.half_width);
    let mut out = Vec::new();
    for v in v0..=v1 {
        for u in u0..=u1 {
            let (a, c) = rect.to_local(u as f64, v as f64);
            let (a, c) = (a.abs(), c.abs());
            if a > hl || c > hw {
                continue;
            }
            let keep = match mode {
                BandMode::FingerEnds => a >= hl - depth,
                BandMode::FullPerimeter => a >= hl - depth || c >= hw - depth,
            };
            if keep {
                out.push((u, v));
            }
        }
    }
    Ok(out)
}

/// Scores one rectangle against the height map.
pub fn gdi_score(rect: &GraspRect, hm: &HeightMap, cfg: &GdiConfig, cluster_index: usize) -> Result<GdiScore> {
    let pixels = periphery_pixels(rect, cfg.band_px, cfg.band_mode, hm.width(), hm.height())?;
    let palm_pixel = hm
        .pixel_at(rect.x_c, rect.y_c)
        .ok_or_else(|| Error::OutOfBounds("palm outside the height map".into()))?;
    let palm = robust_z(hm, palm_pixel, cfg.z_window)
        .ok_or_else(|| Error::Estimation("unknown palm height; candidate is unverifiable".into()))?;

    let mut max_deviation = f64::NEG_INFINITY;
    let mut positive_count = 0;
    let mut colliding = false;
    for &(u, v) in &pixels {
        match hm.get(u, v) {
            Some(h) => {
                let d = palm - h;
                max_deviation = max_deviation.max(d);
                if d > cfg.clearance_min {
                    positive_count += 1;
                }
                if d < -cfg.collision_tol {
                    colliding = true;
                }
            }
            None => colliding = true,
        }
    }
    if !max_deviation.is_finite() {
        max_deviation = 0.0;
    }
    let n = pixels.len();
    Ok(GdiScore {
        cluster_index,
        rect: *rect,
        palm_height: palm,
        n_pixels: n,
        max_deviation,
        positive_count,
        positive_fraction: if n > 0 { positive_count as f64 / n as f64 } else { 0.0 },
        colliding,
    })
}

/// Scores many rectangles in parallel; output order follows input order.
pub fn score_all(rects: &[(usize, GraspRect)], hm: &HeightMap, cfg: &GdiConfig) -> Vec<(usize, Result<GdiScore>)> {
    rects
        .par_iter()
        .map(|&(cluster, ref rect)| (cluster, gdi_score(rect, hm, cfg, cluster)))
        .collect()
}

fn rank_order(mode: RankingMode, a: &GdiScore, b: &GdiScore) -> Ordering {
    let key = match mode {
        RankingMode::ClearanceCount => b
            .positive_fraction
            .total_cmp(&a.positive_fraction)
            .then(b.max_deviation.total_cmp(&a.max_deviation)),
        RankingMode::Eq2Max => b.max_deviation.total_cmp(&a.max_deviation),
    };
    key.then(a.cluster_index.cmp(&b.cluster_index))
}

/// Drops colliding candidates and returns the best `top_n`, rank 1 first.
pub fn rank_grasps(scores: &[GdiScore], mode: RankingMode, top_n: usize) -> Vec<RankedGrasp> {
    let mut feasible: Vec<&GdiScore> = scores.iter().filter(|s| !s.colliding).collect();
    feasible.sort_by(|a, b| rank_order(mode, a, b));
    feasible
        .into_iter()
        .take(top_n)
        .enumerate()
        .map(|(i, s)| RankedGrasp {
            rank: i + 1,
            cluster_index: s.cluster_index,
            score: s.clone(),
        })
        .collect()
}
