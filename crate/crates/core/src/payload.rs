//! In-memory form of a segment payload: what a detector and tracker chain
//! would have produced for each frame. The byte codec lives with the other
//! file formats in the `mission-eval` crate.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::model::{BBox, Modality};

pub const BRF_MAGIC: [u8; 4] = *b"SYNB";
pub const BRF_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub modality: Modality,
    pub quality: f32,
    pub vector: Vec<f32>,
}

/// One tracked person in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackObservation {
    pub track_id: u32,
    pub head_bbox: Option<BBox>,
    pub body_bbox: Option<BBox>,
    pub yaw_deg: f32,
    pub pitch_deg: f32,
    pub roll_deg: f32,
    pub observations: Vec<Observation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PayloadFrame {
    pub frame_index: u32,
    pub timestamp_ms: i64,
    pub tracks: Vec<TrackObservation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Payload {
    pub segment_id: String,
    pub frame_rate: u32,
    pub frames: Vec<PayloadFrame>,
}

impl Payload {
    /// Observations grouped by track id.
    pub fn tracklets(&self) -> BTreeMap<u32, Vec<&TrackObservation>> {
        let mut out: BTreeMap<u32, Vec<&TrackObservation>> = BTreeMap::new();
        for f in &self.frames {
            for t in &f.tracks {
                out.entry(t.track_id).or_default().push(t);
            }
        }
        out
    }

    /// The track seen in the most frames; ties go to the lower id.
    pub fn primary_track(&self) -> Option<u32> {
        let tracks = self.tracklets();
        let mut best: Option<(u32, usize)> = None;
        for (id, obs) in &tracks {
            if best.is_none_or(|(_, n)| obs.len() > n) {
                best = Some((*id, obs.len()));
            }
        }
        best.map(|b| b.0)
    }

    /// Frames whose timestamps fall in `[start_ms, end_ms)`, re-indexed
    /// from zero.
    pub fn cut(&self, segment_id: &str, start_ms: i64, end_ms: i64) -> Payload {
        let frames = self
            .frames
            .iter()
            .filter(|f| f.timestamp_ms >= start_ms && f.timestamp_ms < end_ms)
            .enumerate()
            .map(|(i, f)| PayloadFrame {
                frame_index: i as u32,
                ..f.clone()
            })
            .collect();
        Payload {
            segment_id: String::from(segment_id),
            frame_rate: self.frame_rate,
            frames,
        }
    }

    /// Keeps every second frame.
    pub fn downsampled(&self) -> Payload {
        Payload {
            segment_id: self.segment_id.clone(),
            frame_rate: (self.frame_rate / 2).max(1),
            frames: self.frames.iter().step_by(2).cloned().collect(),
        }
    }

    /// Drops boxes and pose, leaving only the feature observations.
    pub fn without_annotations(&self) -> Payload {
        let mut p = self.clone();
        for t in p.frames.iter_mut().flat_map(|f| f.tracks.iter_mut()) {
            t.head_bbox = None;
            t.body_bbox = None;
            t.yaw_deg = 0.0;
            t.pitch_deg = 0.0;
            t.roll_deg = 0.0;
        }
        p
    }
}
