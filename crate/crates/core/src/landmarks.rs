//! Per-frame 3D face landmarks: parsing, head yaw and forehead visibility.
//!
//! Points use normalized image coordinates (`x`, `y` in `[0, 1]`) and a
//! relative depth `z` on the same scale as `x`, smaller `z` being closer to
//! the camera. Pixel conversion happens at the use site so landmark files
//! stay resolution independent.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RppgError};
use crate::roi::PixelRect;

/// Number of points produced by the face mesh model.
pub const LANDMARK_COUNT: usize = 468;
/// Center of the forehead.
pub const FOREHEAD: usize = 151;
/// Left cheek.
pub const LEFT_CHEEK: usize = 50;
/// Right cheek.
pub const RIGHT_CHEEK: usize = 280;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Nearest pixel for this point in a `width` x `height` frame.
    pub fn to_pixel(&self, width: u32, height: u32) -> (i64, i64) {
        ((self.x * width as f64).round() as i64, (self.y * height as f64).round() as i64)
    }
}

/// One frame's landmarks. `points` is empty when no face was detected.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    pub frame_index: u64,
    pub timestamp: f64,
    pub points: Vec<Point3>,
    pub detected: bool,
    /// Upstream judgement that the forehead is covered (hair, headwear, ...).
    pub occluded_forehead: bool,
}

impl LandmarkSet {
    pub fn new(frame_index: u64, timestamp: f64, points: Vec<Point3>) -> Result<Self> {
        let set = Self {
            frame_index,
            timestamp,
            points,
            detected: true,
            occluded_forehead: false,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn undetected(frame_index: u64, timestamp: f64) -> Self {
        Self {
            frame_index,
            timestamp,
            points: Vec::new(),
            detected: false,
            occluded_forehead: false,
        }
    }

    pub fn with_occluded_forehead(mut self, occluded: bool) -> Self {
        self.occluded_forehead = occluded;
        self
    }

    pub fn point(&self, index: usize) -> Result<Point3> {
        if !self.detected {
            return Err(RppgError::NoFace { frame: self.frame_index });
        }
        self.points.get(index).copied().ok_or(RppgError::Schema {
            frame: self.frame_index,
            message: format!("landmark {index} missing"),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let schema = |message: String| RppgError::Schema {
            frame: self.frame_index,
            message,
        };
        if !self.timestamp.is_finite() {
            return Err(schema("timestamp is not finite".into()));
        }
        if !self.detected {
            return if self.points.is_empty() {
                Ok(())
            } else {
                Err(schema("undetected frame carries points".into()))
            };
        }
        if self.points.len() != LANDMARK_COUNT {
            return Err(schema(format!("expected {LANDMARK_COUNT} points, found {}", self.points.len())));
        }
        for (i, p) in self.points.iter().enumerate() {
            if !(0.0..=1.0).contains(&p.x) || !(0.0..=1.0).contains(&p.y) || !p.z.is_finite() {
                return Err(schema(format!(
                    "point {i} ({}, {}, {}) outside the normalized range",
                    p.x, p.y, p.z
                )));
            }
        }
        Ok(())
    }
}

/// Head rotation about the vertical axis, in degrees.
///
/// Positive when the right cheek turns toward the camera (the left cheek
/// recedes in depth), which is the pose where the right cheek ROI is used.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct YawAngle(pub f64);

impl YawAngle {
    pub fn degrees(self) -> f64 {
        self.0
    }
}

/// Wire form of one landmark stream line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkRecord {
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub detected: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub occluded_forehead: bool,
    #[serde(default)]
    pub points: Vec<[f64; 3]>,
}

impl From<&LandmarkSet> for LandmarkRecord {
    fn from(set: &LandmarkSet) -> Self {
        Self {
            frame_index: set.frame_index,
            timestamp_s: set.timestamp,
            detected: set.detected,
            occluded_forehead: set.occluded_forehead,
            points: set.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
        }
    }
}

impl TryFrom<LandmarkRecord> for LandmarkSet {
    type Error = RppgError;

    fn try_from(record: LandmarkRecord) -> Result<Self> {
        let set = LandmarkSet {
            frame_index: record.frame_index,
            timestamp: record.timestamp_s,
            points: if record.detected {
                record.points.into_iter().map(|[x, y, z]| Point3::new(x, y, z)).collect()
            } else {
                Vec::new()
            },
            detected: record.detected,
            occluded_forehead: record.occluded_forehead,
        };
        set.validate()?;
        Ok(set)
    }
}

/// Parses one line of the landmark stream.
pub fn parse_landmark_frame(record: &[u8]) -> Result<LandmarkSet> {
    match serde_json::from_slice::<LandmarkRecord>(record) {
        Ok(rec) => LandmarkSet::try_from(rec),
        Err(err) => {
            // Best effort at naming the frame in the error.
            let frame = serde_json::from_slice::<serde_json::Value>(record)
                .ok()
                .and_then(|v| v.get("frame_index").and_then(|f| f.as_u64()))
                .map_or_else(|| "<unknown>".to_string(), |f| f.to_string());
            Err(RppgError::Parse {
                frame,
                message: err.to_string(),
            })
        }
    }
}

pub fn to_landmark_line(set: &LandmarkSet) -> Result<String> {
    Ok(serde_json::to_string(&LandmarkRecord::from(set))?)
}

/// Yaw from the depth difference of the two cheek anchors.
///
/// `atan2(z_left - z_right, d)` where `d` is the in-plane cheek distance,
/// signed by the horizontal order of the cheeks. Exact zero for a
/// mirror-symmetric face; recovers the angle of a rigid rotation about the
/// vertical axis under orthographic projection.
pub fn estimate_yaw(lms: &LandmarkSet) -> Result<YawAngle> {
    let left = lms.point(LEFT_CHEEK)?;
    let right = lms.point(RIGHT_CHEEK)?;
    let dx = right.x - left.x;
    let dy = right.y - left.y;
    let span = (dx * dx + dy * dy).sqrt();
    // A cheek-ordering flip is a turn past 90 degrees; the sign of dx carries it.
    let signed_span = if dx < 0.0 { -span } else { span };
    let depth = left.z - right.z;
    Ok(YawAngle(depth.atan2(signed_span).to_degrees()))
}

/// Whether a `roi_size` square on the forehead anchor lies inside the frame
/// and upstream tooling has not marked the forehead occluded.
pub fn forehead_visible(lms: &LandmarkSet, frame_w: u32, frame_h: u32, roi_size: u32) -> Result<bool> {
    let center = lms.point(FOREHEAD)?;
    if lms.occluded_forehead {
        return Ok(false);
    }
    let rect = PixelRect::centered(center.to_pixel(frame_w, frame_h), roi_size);
    Ok(rect.fits(frame_w, frame_h))
}

/// Horizontal mirror image of a landmark set.
///
/// Reflects `x` and swaps the bilateral cheek anchors so the result reads as
/// the face a mirrored camera would see. Other points keep their indices.
pub fn mirror_x(lms: &LandmarkSet) -> LandmarkSet {
    let mut out = lms.clone();
    for p in &mut out.points {
        p.x = 1.0 - p.x;
    }
    if out.points.len() > LEFT_CHEEK.max(RIGHT_CHEEK) {
        out.points.swap(LEFT_CHEEK, RIGHT_CHEEK);
    }
    out
}
