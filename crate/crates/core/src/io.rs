//! On-disk formats.
//!
//! * Frames: a JSON header sidecar plus a raw `rgb8-interleaved` payload,
//!   frames stored back to back in row-major order.
//! * Landmarks: newline-delimited JSON, one [`LandmarkRecord`] per frame.
//! * Ground truth for synthetic clips: a JSON [`GroundTruth`] document.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RppgError};
use crate::landmarks::{parse_landmark_frame, to_landmark_line, LandmarkSet};
use crate::roi::Frame;

pub const PIXEL_FORMAT: &str = "rgb8-interleaved";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStreamHeader {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub frame_count: u64,
    pub pixel_format: String,
}

impl FrameStreamHeader {
    pub fn new(width: u32, height: u32, fps: f64, frame_count: u64) -> Self {
        Self {
            width,
            height,
            fps,
            frame_count,
            pixel_format: PIXEL_FORMAT.to_string(),
        }
    }

    pub fn frame_bytes(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height) * 3
    }

    pub fn payload_bytes(&self) -> u64 {
        self.frame_bytes() * self.frame_count
    }

    pub fn validate(&self) -> Result<()> {
        if self.pixel_format != PIXEL_FORMAT {
            return Err(RppgError::Format(format!(
                "unsupported pixel_format {:?}, expected {PIXEL_FORMAT:?}",
                self.pixel_format
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(RppgError::Format("frame dimensions must be positive".into()));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(RppgError::Format(format!("invalid fps {}", self.fps)));
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let header: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        header.validate()?;
        Ok(header)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

/// Sequential frame decoder; yields `(timestamp, frame)` with timestamps `i / fps`.
pub struct FrameReader<R> {
    header: FrameStreamHeader,
    reader: R,
    next: u64,
}

impl<R: Read> FrameReader<R> {
    /// Wraps a payload source of `payload_len` bytes, checking it against the header.
    pub fn new(header: FrameStreamHeader, reader: R, payload_len: u64) -> Result<Self> {
        header.validate()?;
        let expected = header.payload_bytes();
        if payload_len != expected {
            return Err(RppgError::TruncatedStream {
                expected,
                found: payload_len,
            });
        }
        Ok(Self { header, reader, next: 0 })
    }

    pub fn header(&self) -> &FrameStreamHeader {
        &self.header
    }
}

impl<R: Read> Iterator for FrameReader<R> {
    type Item = Result<(f64, Frame)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.header.frame_count {
            return None;
        }
        let mut data = vec![0u8; self.header.frame_bytes() as usize];
        if let Err(e) = self.reader.read_exact(&mut data) {
            self.next = self.header.frame_count;
            return Some(Err(e.into()));
        }
        let t = self.next as f64 / self.header.fps;
        self.next += 1;
        Some(Ok((
            t,
            Frame {
                width: self.header.width,
                height: self.header.height,
                data,
            },
        )))
    }
}

pub fn read_frame_stream(header_path: &Path, payload_path: &Path) -> Result<FrameReader<BufReader<File>>> {
    let header = FrameStreamHeader::read(header_path)?;
    let file = File::open(payload_path)?;
    let len = file.metadata()?.len();
    FrameReader::new(header, BufReader::new(file), len)
}

/// Writes header and payload; the header's `frame_count` is taken from the iterator.
pub fn write_frame_stream<I>(
    header_path: &Path,
    payload_path: &Path,
    width: u32,
    height: u32,
    fps: f64,
    frames: I,
) -> Result<FrameStreamHeader>
where
    I: IntoIterator<Item = Frame>,
{
    let mut w = BufWriter::new(File::create(payload_path)?);
    let mut count = 0u64;
    for frame in frames {
        if frame.width != width || frame.height != height {
            return Err(RppgError::Format(format!(
                "frame {count} is {}x{}, stream is {width}x{height}",
                frame.width, frame.height
            )));
        }
        w.write_all(&frame.data)?;
        count += 1;
    }
    w.flush()?;
    let header = FrameStreamHeader::new(width, height, fps, count);
    header.write(header_path)?;
    Ok(header)
}

/// Parses a landmark stream, enforcing increasing frame indices and timestamps.
pub fn parse_landmark_stream<R: BufRead>(reader: R) -> Result<Vec<LandmarkSet>> {
    let mut out: Vec<LandmarkSet> = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let set = parse_landmark_frame(line.as_bytes())?;
        if let Some(prev) = out.last() {
            if set.frame_index <= prev.frame_index || set.timestamp <= prev.timestamp {
                return Err(RppgError::Schema {
                    frame: set.frame_index,
                    message: "frame indices and timestamps must strictly increase".into(),
                });
            }
        }
        out.push(set);
    }
    Ok(out)
}

pub fn read_landmark_stream(path: &Path) -> Result<Vec<LandmarkSet>> {
    parse_landmark_stream(BufReader::new(File::open(path)?))
}

pub fn write_landmark_stream<'a, I>(path: &Path, sets: I) -> Result<()>
where
    I: IntoIterator<Item = &'a LandmarkSet>,
{
    let mut w = BufWriter::new(File::create(path)?);
    for set in sets {
        writeln!(w, "{}", to_landmark_line(set)?)?;
    }
    w.flush()?;
    Ok(())
}

/// Known answer written next to a synthetic clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub hr_bpm: f64,
    pub fps: f64,
    pub duration_s: f64,
    pub seed: u64,
    pub peak_times: Vec<f64>,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn header(frames: u64) -> FrameStreamHeader {
        FrameStreamHeader::new(4, 4, 30.0, frames)
    }

    #[test]
    fn two_frame_stream() {
        let payload: Vec<u8> = (0..96).collect();
        let frames: Vec<_> = FrameReader::new(header(2), Cursor::new(payload.clone()), 96)
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[1].0, 1.0 / 30.0);
        assert_eq!(frames[1].1.data, payload[48..]);
    }

    #[test]
    fn short_payload_is_truncated() {
        let err = FrameReader::new(header(2), Cursor::new(vec![0u8; 95]), 95).err().unwrap();
        assert!(matches!(err, RppgError::TruncatedStream { expected: 96, found: 95 }));
    }

    #[test]
    fn unknown_pixel_format() {
        let mut h = header(1);
        h.pixel_format = "yuv420".into();
        assert!(matches!(
            FrameReader::new(h, Cursor::new(vec![0u8; 48]), 48).err().unwrap(),
            RppgError::Format(_)
        ));
    }

    #[test]
    fn landmark_stream_must_increase() {
        let text = "{\"frame_index\":1,\"timestamp_s\":0.1,\"detected\":false}\n\
                    {\"frame_index\":1,\"timestamp_s\":0.2,\"detected\":false}\n";
        assert!(parse_landmark_stream(Cursor::new(text)).is_err());
        let ok = "{\"frame_index\":1,\"timestamp_s\":0.1,\"detected\":false}\n\n\
                  {\"frame_index\":2,\"timestamp_s\":0.2,\"detected\":false}\n";
        assert_eq!(parse_landmark_stream(Cursor::new(ok)).unwrap().len(), 2);
    }
}
