//! Depth images, the pinhole camera, and the height-above-workspace transform.
//!
//! Every later stage reads heights rather than raw camera depth: a pixel's
//! height is `background_depth - depth`, so "on an object" means "height above
//! the margin" and "free space beside the palm" means "lower than the palm".

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel stored in [`DepthImage`] for pixels without a depth return.
pub const INVALID_DEPTH: f64 = 0.0;

/// Width of the histogram bins used by [`estimate_background`], in meters.
pub const BACKGROUND_BIN_M: f64 = 0.005;

/// Minimum number of valid pixels [`estimate_background`] needs in its roi.
pub const MIN_BACKGROUND_PIXELS: usize = 100;

/// Dense row-major depth raster in meters from the camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DepthImage {
    /// Builds an image, mapping every non-finite or non-positive value to
    /// [`INVALID_DEPTH`].
    pub fn new(width: usize, height: usize, mut values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Format(format!(
                "depth image has zero dimension ({width}x{height})"
            )));
        }
        if values.len() != width * height {
            return Err(Error::Format(format!(
                "expected {} depth values for {width}x{height}, got {}",
                width * height,
                values.len()
            )));
        }
        for v in values.iter_mut() {
            if !v.is_finite() || *v <= 0.0 {
                *v = INVALID_DEPTH;
            }
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, depth: f64) -> Result<Self> {
        Self::new(width, height, vec![depth; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Raw depth at `(u, v)`; [`INVALID_DEPTH`] marks a missing return.
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }

    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.get(u, v) != INVALID_DEPTH
    }

    /// Full-image pixel rectangle.
    pub fn bounds(&self) -> PixelRect {
        PixelRect::full(self.width, self.height)
    }

    /// Quantizes to the stored 16-bit representation (`round(depth / unit_scale)`).
    pub fn to_stored(&self, unit_scale: f64) -> Vec<u16> {
        self.values
            .iter()
            .map(|&d| (d / unit_scale).round().clamp(0.0, u16::MAX as f64) as u16)
            .collect()
    }
}

/// Axis-aligned pixel rectangle `[x, x + width) x [y, y + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl PixelRect {
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            x: 0,
            y: 0,
            width,
            height,
        }
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.width > 0
            && self.height > 0
            && self.x + self.width <= width
            && self.y + self.height <= height
    }
}

/// Pinhole intrinsics plus the mounting height and the sensor resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(rename = "camera_height_m", default = "default_camera_height")]
    pub camera_height: f64,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_height")]
    pub height: usize,
}

fn default_camera_height() -> f64 {
    1.3
}

fn default_width() -> usize {
    640
}

fn default_height() -> usize {
    480
}

impl Default for CameraModel {
    /// Kinect v1 nominal intrinsics, 640x480, mounted 1.3 m above the table.
    fn default() -> Self {
        Self {
            fx: 525.0,
            fy: 525.0,
            cx: 319.5,
            cy: 239.5,
            camera_height: default_camera_height(),
            width: default_width(),
            height: default_height(),
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy, self.camera_height]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 || self.camera_height <= 0.0 {
            return Err(Error::Config(format!("invalid camera model {self:?}")));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("camera resolution must be non-zero".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let cam: CameraModel = serde_json::from_slice(&fs::read(path)?)?;
        cam.validate()?;
        Ok(cam)
    }

    /// Camera-frame point to continuous pixel coordinates.
    pub fn project(&self, p: [f64; 3]) -> (f64, f64) {
        (
            self.fx * p[0] / p[2] + self.cx,
            self.fy * p[1] / p[2] + self.cy,
        )
    }

    /// Continuous pixel coordinates at depth `d` back to the camera frame.
    pub fn unproject(&self, u: f64, v: f64, d: f64) -> [f64; 3] {
        [(u - self.cx) * d / self.fx, (v - self.cy) * d / self.fy, d]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    /// Source pixel `(u, v)` of each point.
    pub pixel_of: Vec<(usize, usize)>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// JSON alternative to PGM: stored integer samples, same scaling rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthDump {
    pub width: usize,
    pub height: usize,
    pub values: Vec<u16>,
}

/// Loads a binary 16-bit PGM (`P5`) or a [`DepthDump`] JSON file and scales
/// every stored sample by `unit_scale` meters.
pub fn load_depth(path: impl AsRef<Path>, unit_scale: f64) -> Result<DepthImage> {
    let bytes = fs::read(path)?;
    decode_depth(&bytes, unit_scale)
}

/// Format-sniffing decoder behind [`load_depth`].
pub fn decode_depth(bytes: &[u8], unit_scale: f64) -> Result<DepthImage> {
    if !(unit_scale.is_finite() && unit_scale > 0.0) {
        return Err(Error::Config(format!("unit scale must be > 0, got {unit_scale}")));
    }
    let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
    let (width, height, stored) = match first {
        Some(b'P') => parse_pgm(bytes)?,
        Some(b'{') => {
            let dump: DepthDump = serde_json::from_slice(bytes)
                .map_err(|e| Error::Format(format!("depth dump: {e}")))?;
            (dump.width, dump.height, dump.values)
        }
        _ => return Err(Error::Format("unrecognized depth file".into())),
    };
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("zero image dimension {width}x{height}")));
    }
    DepthImage::new(
        width,
        height,
        stored.iter().map(|&s| s as f64 * unit_scale).collect(),
    )
}

fn pgm_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Format("truncated PGM header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn pgm_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = pgm_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad PGM {what}: {:?}", String::from_utf8_lossy(tok))))
}

/// Parses a binary PGM. Samples are big-endian 16-bit when maxval > 255.
pub fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>)> {
    let mut pos = 0;
    if pgm_token(bytes, &mut pos)? != b"P5" {
        return Err(Error::Format("not a binary PGM (expected P5)".into()));
    }
    let width = pgm_number(bytes, &mut pos, "width")?;
    let height = pgm_number(bytes, &mut pos, "height")?;
    let maxval = pgm_number(bytes, &mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("zero image dimension {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("bad PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = width * height;
    let wide = maxval > 255;
    let need = if wide { 2 * n } else { n };
    let data = bytes.get(pos..pos + need).ok_or_else(|| {
        Error::Format(format!("PGM raster truncated: need {need} bytes"))
    })?;
    let samples = if wide {
        data.chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        data.iter().map(|&b| b as u16).collect()
    };
    Ok((width, height, samples))
}

/// Encodes 16-bit samples as a binary PGM with maxval 65535.
pub fn encode_pgm(width: usize, height: usize, samples: &[u16]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(samples.len() * 2);
    for s in samples {
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, samples: &[u16]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_pgm(width, height, samples))?;
    Ok(())
}

/// Back-projects every valid pixel through the pinhole model.
pub fn deproject(img: &DepthImage, cam: &CameraModel) -> PointCloud {
    let mut cloud = PointCloud::default();
    for v in 0..img.height() {
        for u in 0..img.width() {
            let d = img.get(u, v);
            if d == INVALID_DEPTH {
                continue;
            }
            cloud.points.push(cam.unproject(u as f64, v as f64, d));
            cloud.pixel_of.push((u, v));
        }
    }
    cloud
}

/// Modal depth of `roi` on a 5 mm histogram.
///
/// The winning bin is refined to the median of the samples falling in it or
/// its two neighbours, so a flat plane returns its exact depth. Equal counts
/// resolve to the deeper bin.
pub fn estimate_background(img: &DepthImage, roi: PixelRect) -> Result<f64> {
    if !roi.fits_in(img.width(), img.height()) {
        return Err(Error::OutOfBounds(format!(
            "background roi {roi:?} outside {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let mut samples: Vec<f64> = Vec::with_capacity(roi.width * roi.height);
    for v in roi.y..roi.y + roi.height {
        for u in roi.x..roi.x + roi.width {
            let d = img.get(u, v);
            if d != INVALID_DEPTH {
                samples.push(d);
            }
        }
    }
    if samples.len() < MIN_BACKGROUND_PIXELS {
        return Err(Error::Estimation(format!(
            "{} valid pixels in roi, need at least {MIN_BACKGROUND_PIXELS}",
            samples.len()
        )));
    }
    let bin_of = |d: f64| (d / BACKGROUND_BIN_M).floor() as i64;
    let mut counts = std::collections::BTreeMap::<i64, usize>::new();
    for &d in &samples {
        *counts.entry(bin_of(d)).or_default() += 1;
    }
    let (&mode, _) = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(b.0)))
        .expect("non-empty histogram");
    let mut near: Vec<f64> = samples
        .into_iter()
        .filter(|&d| (bin_of(d) - mode).abs() <= 1)
        .collect();
    Ok(median(&mut near).expect("modal bin is populated"))
}

/// Height above the workspace plane; NaN marks unknown pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightMap {
    width: usize,
    height: usize,
    heights: Vec<f64>,
    background_depth: f64,
}

impl HeightMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn background_depth(&self) -> f64 {
        self.background_depth
    }

    /// Height at `(u, v)`, `None` when the source depth was invalid.
    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        let h = self.heights[v * self.width + u];
        (!h.is_nan()).then_some(h)
    }

    /// Height at a continuous pixel position rounded to the nearest pixel.
    pub fn at(&self, u: f64, v: f64) -> Option<f64> {
        let (u, v) = self.pixel_at(u, v)?;
        self.get(u, v)
    }

    pub fn pixel_at(&self, u: f64, v: f64) -> Option<(usize, usize)> {
        let (u, v) = (u.round(), v.round());
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return None;
        }
        Some((u as usize, v as usize))
    }

    /// Raw heights, NaN for unknown.
    pub fn raw(&self) -> &[f64] {
        &self.heights
    }

    /// Same map with `offset` added to every known height.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            heights: self.heights.iter().map(|h| h + offset).collect(),
            background_depth: self.background_depth + offset,
            ..self.clone()
        }
    }

    pub fn in_bounds(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= (self.width - 1) as f64 && v <= (self.height - 1) as f64
    }
}

pub fn height_map(img: &DepthImage, background_depth: f64) -> Result<HeightMap> {
    if !(background_depth.is_finite() && background_depth > 0.0) {
        return Err(Error::Config(format!(
            "background depth must be > 0, got {background_depth}"
        )));
    }
    let heights = img
        .values()
        .iter()
        .map(|&d| if d == INVALID_DEPTH { f64::NAN } else { background_depth - d })
        .collect();
    Ok(HeightMap {
        width: img.width(),
        height: img.height(),
        heights,
        background_depth,
    })
}

/// Median of the known heights in the `window x window` neighbourhood of
/// `pixel`, clipped to the image.
pub fn robust_z(hm: &HeightMap, pixel: (usize, usize), window: usize) -> Option<f64> {
    let (u, v) = pixel;
    let r = window / 2;
    let (u0, u1) = (u.saturating_sub(r), (u + r).min(hm.width - 1));
    let (v0, v1) = (v.saturating_sub(r), (v + r).min(hm.height - 1));
    let mut vals = Vec::with_capacity(window * window);
    for y in v0..=v1 {
        for x in u0..=u1 {
            if let Some(h) = hm.get(x, y) {
                vals.push(h);
            }
        }
    }
    median(&mut vals)
}

pub(crate) fn median(vals: &mut [f64]) -> Option<f64> {
    if vals.is_empty() {
        return None;
    }
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    Some(if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pgm_bytes(header: &str, samples: &[u16]) -> Vec<u8> {
        let mut b = header.as_bytes().to_vec();
        for s in samples {
            b.extend_from_slice(&s.to_be_bytes());
        }
        b
    }

    #[test]
    fn pgm_two_by_two_scales_samples() {
        let bytes = pgm_bytes("P5 2 2 65535\n", &[1300, 1250, 1300, 1300]);
        let img = decode_depth(&bytes, 0.001).unwrap();
        let expect = [1.3, 1.25, 1.3, 1.3];
        for (got, want) in img.values().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_vga_pgm() {
        let bytes = encode_pgm(640, 480, &vec![1300; 640 * 480]);
        let img = decode_depth(&bytes, 0.001).unwrap();
        assert_eq!((img.width(), img.height()), (640, 480));
        assert!(img.values().iter().all(|&d| (d - 1.3).abs() < 1e-12));
    }

    #[test]
    fn pgm_header_comments_are_skipped() {
        let bytes = pgm_bytes("P5\n# sensor dump\n1 1\n# max\n65535\n", &[42]);
        let img = decode_depth(&bytes, 0.001).unwrap();
        assert!((img.get(0, 0) - 0.042).abs() < 1e-12);
    }

    #[test]
    fn malformed_headers_are_format_errors() {
        for bad in [
            pgm_bytes("P2 2 2 65535\n", &[0; 4]),
            pgm_bytes("P5 0 2 65535\n", &[]),
            pgm_bytes("P5 2 x 65535\n", &[0; 4]),
            pgm_bytes("P5 2 2 65535\n", &[0; 3]),
            b"hello".to_vec(),
        ] {
            assert!(matches!(decode_depth(&bad, 0.001), Err(Error::Format(_))));
        }
    }

    #[test]
    fn zero_samples_become_invalid() {
        let bytes = pgm_bytes("P5 2 1 65535\n", &[0, 1000]);
        let img = decode_depth(&bytes, 0.001).unwrap();
        assert!(!img.is_valid(0, 0));
        assert!(img.is_valid(1, 0));
    }

    #[test]
    fn json_dump_loads() {
        let dump = DepthDump {
            width: 2,
            height: 1,
            values: vec![1300, 1250],
        };
        let img = decode_depth(&serde_json::to_vec(&dump).unwrap(), 0.001).unwrap();
        assert!((img.get(1, 0) - 1.25).abs() < 1e-12);
    }

    #[test]
    fn deproject_principal_point_and_unit_tangent() {
        let cam = CameraModel {
            cx: 2.0,
            cy: 1.0,
            fx: 3.0,
            fy: 3.0,
            width: 8,
            height: 4,
            ..CameraModel::default()
        };
        let mut vals = vec![0.0; 32];
        vals[8 + 2] = 1.3; // (cx, cy)
        vals[8 + 5] = 2.0; // (cx + fx, cy)
        let img = DepthImage::new(8, 4, vals).unwrap();
        let cloud = deproject(&img, &cam);
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.points[0], [0.0, 0.0, 1.3]);
        assert_eq!(cloud.pixel_of[0], (2, 1));
        assert_eq!(cloud.points[1], [2.0, 0.0, 2.0]);
    }

    #[test]
    fn background_of_constant_image() {
        let img = DepthImage::constant(20, 20, 1.3).unwrap();
        assert_eq!(estimate_background(&img, img.bounds()).unwrap(), 1.3);
    }

    #[test]
    fn background_needs_enough_pixels() {
        let img = DepthImage::constant(9, 9, 1.3).unwrap();
        assert!(matches!(
            estimate_background(&img, img.bounds()),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn height_map_basics() {
        let img = DepthImage::new(3, 1, vec![1.3, 1.25, 0.0]).unwrap();
        let hm = height_map(&img, 1.3).unwrap();
        assert_eq!(hm.get(0, 0), Some(0.0));
        assert!((hm.get(1, 0).unwrap() - 0.05).abs() < 1e-12);
        assert_eq!(hm.get(2, 0), None);
        assert!(height_map(&img, 0.0).is_err());
    }

    #[test]
    fn robust_z_window_one_is_lookup() {
        let img = DepthImage::new(3, 1, vec![1.3, 1.25, 1.2]).unwrap();
        let hm = height_map(&img, 1.3).unwrap();
        for u in 0..3 {
            assert_eq!(robust_z(&hm, (u, 0), 1), hm.get(u, 0));
        }
    }

    #[test]
    fn robust_z_rejects_single_outlier() {
        let mut vals = vec![1.25; 9];
        vals[4] = 0.8;
        let img = DepthImage::new(3, 3, vals).unwrap();
        let hm = height_map(&img, 1.3).unwrap();
        let z = robust_z(&hm, (1, 1), 3).unwrap();
        assert!((z - 0.05).abs() < 1e-12);
    }

    #[test]
    fn robust_z_unknown_when_window_is_empty() {
        let img = DepthImage::new(3, 3, vec![0.0; 9]).unwrap();
        let hm = height_map(&img, 1.3).unwrap();
        assert_eq!(robust_z(&hm, (1, 1), 3), None);
    }
}
