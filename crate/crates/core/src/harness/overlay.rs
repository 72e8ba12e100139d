use std::fs;
use std::path::Path;

use super::PipelineResult;
use crate::depthscene::DepthImage;
use crate::error::Result;
use crate::geometry::{corners, GraspRect};

pub(crate) const RED: [u8; 3] = [255, 0, 0];
pub(crate) const GREEN: [u8; 3] = [0, 255, 0];
pub(crate) const YELLOW: [u8; 3] = [255, 255, 0];
pub(crate) const CYAN: [u8; 3] = [0, 255, 255];

/// Spacing of the rank tick marks, in pixels.
const TICK_SPACING: f64 = 2.0;

struct Canvas {
    width: usize,
    height: usize,
    rgb: Vec<u8>,
}

impl Canvas {
    fn put(&mut self, u: i64, v: i64, color: [u8; 3]) {
        if u >= 0 && v >= 0 && (u as usize) < self.width && (v as usize) < self.height {
            let i = 3 * (v as usize * self.width + u as usize);
            self.rgb[i..i + 3].copy_from_slice(&color);
        }
    }

    /// Bresenham between the rounded endpoints.
    fn line(&mut self, a: (f64, f64), b: (f64, f64), color: [u8; 3]) {
        let (mut x0, mut y0) = (a.0.round() as i64, a.1.round() as i64);
        let (x1, y1) = (b.0.round() as i64, b.1.round() as i64);
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let mut err = dx + dy;
        loop {
            self.put(x0, y0, color);
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }

    fn rect(&mut self, rect: &GraspRect, rank: usize, color: [u8; 3]) {
        let c = rect.corner_points();
        for i in 0..4 {
            self.line(c[i], c[(i + 1) % 4], color);
        }
        // `rank` ticks beyond the first corner, continuing along the closing axis
        let (ax, ay) = rect.axis();
        for t in 1..=rank {
            let d = TICK_SPACING * t as f64;
            self.put((c[0].0 + d * ax).round() as i64, (c[0].1 + d * ay).round() as i64, color);
        }
    }
}

/// Grayscale depth (near is bright, unknown is black) with the retained line
/// poses, their finger points and the ranked rectangles drawn on top.
pub fn render_overlay(img: &DepthImage, result: &PipelineResult) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let valid: Vec<f64> = img.values().iter().copied().filter(|&d| d > 0.0).collect();
    let lo = valid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = valid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut rgb = Vec::with_capacity(3 * w * h);
    for &d in img.values() {
        let g = if d <= 0.0 {
            0
        } else if hi > lo {
            (40.0 + 215.0 * (hi - d) / (hi - lo)).round() as u8
        } else {
            128
        };
        rgb.extend_from_slice(&[g, g, g]);
    }
    let mut canvas = Canvas { width: w, height: h, rgb };
    for pose in &result.retained_poses {
        let (a, b) = corners(pose);
        canvas.line(a, b, RED);
    }
    for pose in &result.retained_poses {
        let (a, b) = corners(pose);
        canvas.put(a.0.round() as i64, a.1.round() as i64, GREEN);
        canvas.put(b.0.round() as i64, b.1.round() as i64, GREEN);
    }
    for r in result.ranked.iter().rev() {
        let color = if r.rank == 1 { CYAN } else { YELLOW };
        canvas.rect(&r.score.rect, r.rank, color);
    }
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(&canvas.rgb);
    out
}

/// Writes [`render_overlay`] as a binary PPM.
pub fn emit_overlay(img: &DepthImage, result: &PipelineResult, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, render_overlay(img, result))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gdi::{GdiScore, RankedGrasp};
    use crate::harness::StageTimings;
    use std::collections::BTreeSet;

    fn empty_result() -> PipelineResult {
        PipelineResult {
            background_depth: 1.3,
            sampled: 0,
            retained_level1: 0,
            retained_level2: 0,
            retained_poses: vec![],
            clustering: None,
            axes: vec![],
            scores: vec![],
            dropped: vec![],
            warnings: vec![],
            ranked: vec![],
            selected: None,
            timings: StageTimings::default(),
        }
    }

    fn pixels(bytes: &[u8], w: usize, color: [u8; 3]) -> BTreeSet<(usize, usize)> {
        let body = &bytes[bytes.len() - 3 * w * (bytes.len() / (3 * w))..];
        body.chunks(3)
            .enumerate()
            .filter(|(_, p)| *p == color)
            .map(|(i, _)| (i % w, i / w))
            .collect()
    }

    #[test]
    fn empty_result_is_plain_grayscale() {
        let img = DepthImage::constant(8, 4, 1.3).unwrap();
        let out = render_overlay(&img, &empty_result());
        assert!(out.starts_with(b"P6\n8 4\n255\n"));
        assert!(out[11..].iter().all(|&b| b == 128));
        assert_eq!(out.len(), 11 + 8 * 4 * 3);
    }

    #[test]
    fn single_candidate_golden() {
        let img = DepthImage::constant(100, 80, 1.3).unwrap();
        let rect = GraspRect { x_c: 50.0, y_c: 40.0, theta: 0.0, half_length: 10.0, half_width: 5.0 };
        let score = GdiScore {
            cluster_index: 0,
            rect,
            palm_height: 0.05,
            n_pixels: 10,
            max_deviation: 0.05,
            positive_count: 10,
            positive_fraction: 1.0,
            colliding: false,
        };
        let ranked = RankedGrasp { rank: 1, cluster_index: 0, score };
        let result = PipelineResult {
            ranked: vec![ranked.clone()],
            selected: Some(ranked),
            ..empty_result()
        };
        let out = render_overlay(&img, &result);
        let mut expected = BTreeSet::new();
        for u in 40..=60 {
            expected.insert((u, 35));
            expected.insert((u, 45));
        }
        for v in 35..=45 {
            expected.insert((40, v));
            expected.insert((60, v));
        }
        // one tick two pixels past corner (60, 45)
        expected.insert((62, 45));
        assert_eq!(pixels(&out, 100, CYAN), expected);
        assert!(pixels(&out, 100, YELLOW).is_empty());
        assert_eq!(out, render_overlay(&img, &result));
    }
}
