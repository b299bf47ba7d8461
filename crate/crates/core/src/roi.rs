//! Adaptive ROI choice and spatial color averaging.
//!
//! The forehead is used whenever it is visible. Otherwise the head yaw picks
//! a cheek: the right cheek once the head has turned past the threshold, the
//! left cheek in every other case.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RppgError};
use crate::landmarks::{self, LandmarkSet, YawAngle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Forehead,
    LeftCheek,
    RightCheek,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Forehead, Region::LeftCheek, Region::RightCheek];

    /// Landmark the ROI square is centered on.
    pub fn landmark(self) -> usize {
        match self {
            Region::Forehead => landmarks::FOREHEAD,
            Region::LeftCheek => landmarks::LEFT_CHEEK,
            Region::RightCheek => landmarks::RIGHT_CHEEK,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::Forehead => "forehead",
            Region::LeftCheek => "left-cheek",
            Region::RightCheek => "right-cheek",
        })
    }
}

/// Axis-aligned pixel rectangle. The origin may be negative before bounds checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: i64,
    pub y0: i64,
    pub width: u32,
    pub height: u32,
}

impl PixelRect {
    /// `size` x `size` square around an integer pixel center.
    pub fn centered((cx, cy): (i64, i64), size: u32) -> Self {
        let half = i64::from(size / 2);
        Self {
            x0: cx - half,
            y0: cy - half,
            width: size,
            height: size,
        }
    }

    pub fn fits(&self, frame_w: u32, frame_h: u32) -> bool {
        self.x0 >= 0
            && self.y0 >= 0
            && self.x0 + i64::from(self.width) <= i64::from(frame_w)
            && self.y0 + i64::from(self.height) <= i64::from(frame_h)
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoiConfig {
    pub roi_size: u32,
    pub yaw_threshold_deg: f64,
}

impl Default for RoiConfig {
    fn default() -> Self {
        Self {
            roi_size: 40,
            yaw_threshold_deg: 15.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiSelection {
    pub region: Region,
    pub rect: PixelRect,
    pub center_landmark: usize,
}

impl RoiSelection {
    /// ROI square for `region` in a frame, failing if it leaves the frame.
    pub fn for_region(lms: &LandmarkSet, region: Region, frame_w: u32, frame_h: u32, roi_size: u32) -> Result<Self> {
        let center = lms.point(region.landmark())?;
        let rect = PixelRect::centered(center.to_pixel(frame_w, frame_h), roi_size);
        if !rect.fits(frame_w, frame_h) {
            return Err(RppgError::RoiOutOfBounds {
                region: region.to_string(),
                rect: (rect.x0, rect.y0, rect.width, rect.height),
                width: frame_w,
                height: frame_h,
            });
        }
        Ok(Self {
            region,
            rect,
            center_landmark: region.landmark(),
        })
    }
}

pub fn select_roi(lms: &LandmarkSet, yaw: YawAngle, frame_w: u32, frame_h: u32, cfg: &RoiConfig) -> Result<RoiSelection> {
    if cfg.roi_size == 0 {
        return Err(RppgError::Config("roi_size must be positive".into()));
    }
    let region = if landmarks::forehead_visible(lms, frame_w, frame_h, cfg.roi_size)? {
        Region::Forehead
    } else if yaw.degrees() > cfg.yaw_threshold_deg {
        Region::RightCheek
    } else {
        Region::LeftCheek
    };
    RoiSelection::for_region(lms, region, frame_w, frame_h, cfg.roi_size)
}

/// Interleaved RGB8 image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl Frame {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(RppgError::Format(format!(
                "{width}x{height} rgb8 frame needs {expected} bytes, got {}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(width as usize * height as usize * 3).collect();
        Self { width, height, data }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Integer-factor block averaging, rounding each block mean to the nearest level.
    pub fn downsample(&self, factor: u32) -> Result<Frame> {
        if factor == 0 || !self.width.is_multiple_of(factor) || !self.height.is_multiple_of(factor) {
            return Err(RppgError::Config(format!(
                "downsample factor {factor} does not divide {}x{}",
                self.width, self.height
            )));
        }
        let (w, h) = (self.width / factor, self.height / factor);
        let n = u64::from(factor * factor);
        let mut data = Vec::with_capacity(w as usize * h as usize * 3);
        for by in 0..h {
            for bx in 0..w {
                let mut acc = [0u64; 3];
                for y in by * factor..(by + 1) * factor {
                    for x in bx * factor..(bx + 1) * factor {
                        let p = self.pixel(x, y);
                        for c in 0..3 {
                            acc[c] += u64::from(p[c]);
                        }
                    }
                }
                // Round half up in integer arithmetic.
                data.extend(acc.iter().map(|&s| ((2 * s + n) / (2 * n)) as u8));
            }
        }
        Ok(Frame { width: w, height: h, data })
    }
}

/// Spatially averaged ROI color at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RgbSample {
    pub timestamp: f64,
    pub r: f64,
    pub g: f64,
    pub b: f64,
    pub region: Region,
}

impl RgbSample {
    pub fn rgb(&self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }
}

/// Arithmetic mean of each channel over the ROI.
pub fn crop_mean_rgb(frame: &Frame, roi: &RoiSelection, timestamp: f64) -> Result<RgbSample> {
    if frame.data.len() != frame.width as usize * frame.height as usize * 3 {
        return Err(RppgError::Format(format!(
            "frame buffer of {} bytes does not match {}x{}",
            frame.data.len(),
            frame.width,
            frame.height
        )));
    }
    let rect = roi.rect;
    if !rect.fits(frame.width, frame.height) {
        return Err(RppgError::Format(format!(
            "ROI {rect:?} does not fit the {}x{} frame",
            frame.width, frame.height
        )));
    }
    // Integer sums keep the mean independent of pixel order.
    let mut sums = [0u64; 3];
    let stride = frame.width as usize * 3;
    for y in rect.y0 as usize..rect.y0 as usize + rect.height as usize {
        let start = y * stride + rect.x0 as usize * 3;
        let row = &frame.data[start..start + rect.width as usize * 3];
        for px in row.chunks_exact(3) {
            sums[0] += u64::from(px[0]);
            sums[1] += u64::from(px[1]);
            sums[2] += u64::from(px[2]);
        }
    }
    let n = rect.area() as f64;
    Ok(RgbSample {
        timestamp,
        r: sums[0] as f64 / n,
        g: sums[1] as f64 / n,
        b: sums[2] as f64 / n,
        region: roi.region,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::{Point3, FOREHEAD, LANDMARK_COUNT, LEFT_CHEEK, RIGHT_CHEEK};

    fn face() -> LandmarkSet {
        let mut points = vec![Point3::new(0.5, 0.5, 0.0); LANDMARK_COUNT];
        points[FOREHEAD] = Point3::new(0.5, 0.3, -0.08);
        points[LEFT_CHEEK] = Point3::new(0.38, 0.58, -0.03);
        points[RIGHT_CHEEK] = Point3::new(0.62, 0.58, -0.03);
        LandmarkSet::new(0, 0.0, points).unwrap()
    }

    fn roi(rect: PixelRect) -> RoiSelection {
        RoiSelection {
            region: Region::Forehead,
            rect,
            center_landmark: FOREHEAD,
        }
    }

    #[test]
    fn visible_forehead_wins_over_yaw() {
        let sel = select_roi(&face(), YawAngle(30.0), 640, 480, &RoiConfig::default()).unwrap();
        assert_eq!(sel.region, Region::Forehead);
        assert_eq!(sel.center_landmark, 151);
        assert_eq!(
            sel.rect,
            PixelRect {
                x0: 300,
                y0: 124,
                width: 40,
                height: 40
            }
        );
    }

    #[test]
    fn occluded_forehead_falls_back_by_yaw() {
        let lms = face().with_occluded_forehead(true);
        let cfg = RoiConfig::default();
        assert_eq!(select_roi(&lms, YawAngle(20.0), 640, 480, &cfg).unwrap().region, Region::RightCheek);
        assert_eq!(select_roi(&lms, YawAngle(0.0), 640, 480, &cfg).unwrap().region, Region::LeftCheek);
        // Strictly greater than the threshold.
        assert_eq!(select_roi(&lms, YawAngle(15.0), 640, 480, &cfg).unwrap().region, Region::LeftCheek);
    }

    #[test]
    fn cheek_outside_frame_is_an_error() {
        let mut lms = face().with_occluded_forehead(true);
        lms.points[LEFT_CHEEK] = Point3::new(0.01, 0.58, -0.03);
        let err = select_roi(&lms, YawAngle(0.0), 640, 480, &RoiConfig::default()).unwrap_err();
        assert!(matches!(err, RppgError::RoiOutOfBounds { .. }), "{err}");
    }

    #[test]
    fn uniform_roi_mean() {
        let frame = Frame::filled(100, 100, [100, 150, 200]);
        let s = crop_mean_rgb(&frame, &roi(PixelRect::centered((50, 50), 40)), 0.0).unwrap();
        assert_eq!(s.rgb(), [100.0, 150.0, 200.0]);
    }

    #[test]
    fn checkerboard_mean() {
        let mut frame = Frame::filled(40, 40, [0, 0, 0]);
        for y in 0..40 {
            for x in 0..40 {
                if (x + y) % 2 == 0 {
                    frame.set_pixel(x, y, [255, 255, 255]);
                }
            }
        }
        let s = crop_mean_rgb(
            &frame,
            &roi(PixelRect {
                x0: 0,
                y0: 0,
                width: 40,
                height: 40,
            }),
            0.0,
        )
        .unwrap();
        assert_eq!(s.rgb(), [127.5, 127.5, 127.5]);
    }

    #[test]
    fn two_by_two_red_mean() {
        let mut frame = Frame::filled(4, 4, [0, 0, 0]);
        frame.set_pixel(1, 1, [10, 0, 0]);
        frame.set_pixel(2, 1, [20, 0, 0]);
        frame.set_pixel(1, 2, [30, 0, 0]);
        frame.set_pixel(2, 2, [40, 0, 0]);
        let s = crop_mean_rgb(
            &frame,
            &roi(PixelRect {
                x0: 1,
                y0: 1,
                width: 2,
                height: 2,
            }),
            0.0,
        )
        .unwrap();
        assert_eq!(s.r, (10.0 + 20.0 + 30.0 + 40.0) / 4.0);
    }

    #[test]
    fn dimension_mismatch_is_format_error() {
        let mut frame = Frame::filled(10, 10, [1, 2, 3]);
        frame.data.pop();
        let err = crop_mean_rgb(
            &frame,
            &roi(PixelRect {
                x0: 0,
                y0: 0,
                width: 2,
                height: 2,
            }),
            0.0,
        )
        .unwrap_err();
        assert!(matches!(err, RppgError::Format(_)));
    }

    #[test]
    fn downsample_block_average() {
        let mut frame = Frame::filled(4, 4, [0, 0, 0]);
        frame.set_pixel(0, 0, [4, 8, 255]);
        let small = frame.downsample(2).unwrap();
        assert_eq!((small.width, small.height), (2, 2));
        assert_eq!(small.pixel(0, 0), [1, 2, 64]);
        assert_eq!(small.pixel(1, 1), [0, 0, 0]);
        assert!(frame.downsample(3).is_err());
    }
}
