//! Segmentation, weather join and annotation merging.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::model::{
    Activity, AnnotationSet, ClothingSet, EnvironmentRecord, FrameAnnotation, MediaSegment,
    SegmentGeometry, SensorRecord, SubjectRecord, Timestamp,
};
use crate::payload::Payload;
use crate::rng::{hash_str, mix64};

/// One logged activity interval at a station.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityRecord {
    pub subject_id: String,
    pub activity: Activity,
    pub clothing_set: ClothingSet,
    pub start: Timestamp,
    pub end: Timestamp,
    pub station_id: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActivityLog {
    pub records: Vec<ActivityRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogError {
    EmptyInterval { index: usize },
    Overlap { station_id: String, first: usize, second: usize },
}

impl fmt::Display for LogError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogError::EmptyInterval { index } => {
                write!(f, "activity record {index} does not end after it starts")
            }
            LogError::Overlap { station_id, first, second } => write!(
                f,
                "activity records {first} and {second} overlap on station {station_id}"
            ),
        }
    }
}

impl core::error::Error for LogError {}

impl ActivityLog {
    /// Checks `end > start` and that intervals on one station are disjoint.
    pub fn validate(&self) -> Result<(), LogError> {
        let mut per_station: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            if r.end <= r.start {
                return Err(LogError::EmptyInterval { index: i });
            }
            per_station.entry(&r.station_id).or_default().push(i);
        }
        for (station, mut idx) in per_station {
            idx.sort_by_key(|&i| (self.records[i].start, i));
            for w in idx.windows(2) {
                if self.records[w[1]].start < self.records[w[0]].end {
                    let (first, second) = (w[0].min(w[1]), w[0].max(w[1]));
                    return Err(LogError::Overlap {
                        station_id: String::from(station),
                        first,
                        second,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Continuous capture from one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub sensor_id: String,
    pub station_id: String,
    pub start: Timestamp,
    pub end: Timestamp,
}

/// A cut of one recording: one subject, one activity, one clothing set.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentCut {
    pub segment_id: String,
    pub subject_id: String,
    pub activity: Activity,
    pub clothing_set: ClothingSet,
    pub sensor_id: String,
    pub station_id: String,
    pub start: Timestamp,
    pub end: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedInterval {
    pub index: usize,
    pub subject_id: String,
    pub reason: &'static str,
}

/// Stable segment identifier derived from what the segment contains.
pub fn segment_id(sensor_id: &str, subject_id: &str, activity: Activity, start: Timestamp) -> String {
    let mut h = hash_str(sensor_id);
    h = mix64(h ^ hash_str(subject_id));
    h = mix64(h ^ hash_str(activity.as_str()));
    h = mix64(h ^ start.0 as u64);
    format!("seg-{h:016x}")
}

/// Cuts `recording` along the logged intervals of its station. Intervals
/// that only partly overlap the recording are clipped to it; intervals that
/// miss it are skipped and reported.
pub fn segment_by_timestamps(
    recording: &Recording,
    log: &ActivityLog,
) -> Result<(Vec<SegmentCut>, Vec<SkippedInterval>), LogError> {
    log.validate()?;
    let mut cuts = Vec::new();
    let mut skipped = Vec::new();
    for (i, r) in log.records.iter().enumerate() {
        if r.station_id != recording.station_id {
            continue;
        }
        let start = r.start.max(recording.start);
        let end = r.end.min(recording.end);
        if end <= start {
            skipped.push(SkippedInterval {
                index: i,
                subject_id: r.subject_id.clone(),
                reason: "outside recording span",
            });
            continue;
        }
        cuts.push(SegmentCut {
            segment_id: segment_id(&recording.sensor_id, &r.subject_id, r.activity, start),
            subject_id: r.subject_id.clone(),
            activity: r.activity,
            clothing_set: r.clothing_set,
            sensor_id: recording.sensor_id.clone(),
            station_id: recording.station_id.clone(),
            start,
            end,
        });
    }
    cuts.sort_by_key(|c| c.start);
    Ok((cuts, skipped))
}

/// Weather samples indexed by minute.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeatherSeries {
    by_minute: BTreeMap<Timestamp, EnvironmentRecord>,
}

impl WeatherSeries {
    pub fn new(records: impl IntoIterator<Item = EnvironmentRecord>) -> Self {
        Self {
            by_minute: records
                .into_iter()
                .map(|r| (r.sample_minute.truncate_to_minute(), r))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.by_minute.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_minute.is_empty()
    }

    pub fn remove(&mut self, minute: Timestamp) -> Option<EnvironmentRecord> {
        self.by_minute.remove(&minute)
    }

    pub fn records(&self) -> impl Iterator<Item = &EnvironmentRecord> {
        self.by_minute.values()
    }

    /// Exact-minute lookup, no interpolation.
    pub fn at(&self, ts: Timestamp) -> Option<&EnvironmentRecord> {
        self.by_minute.get(&ts.truncate_to_minute())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingWeather {
    pub segment_id: String,
    pub minute: Timestamp,
}

impl fmt::Display for MissingWeather {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "no weather sample for minute {} (segment {})",
            self.minute.0, self.segment_id
        )
    }
}

impl core::error::Error for MissingWeather {}

/// Weather record for a segment starting at `start`.
pub fn attach_environment(
    segment_id: &str,
    start: Timestamp,
    weather: &WeatherSeries,
) -> Result<EnvironmentRecord, MissingWeather> {
    weather.at(start).cloned().ok_or_else(|| MissingWeather {
        segment_id: String::from(segment_id),
        minute: start.truncate_to_minute(),
    })
}

/// Platform position log for sensors whose geometry changes over time.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRecord {
    pub sensor_id: String,
    pub start: Timestamp,
    pub end: Timestamp,
    pub distance_m: f64,
    pub pitch_deg: f64,
}

/// Geometry of a segment starting at `start`: the telemetry interval that
/// covers it if there is one, else the sensor's fixed mounting.
pub fn segment_geometry(
    sensor: &SensorRecord,
    telemetry: &[TelemetryRecord],
    start: Timestamp,
) -> SegmentGeometry {
    let nominal = sensor.nominal_geometry();
    telemetry
        .iter()
        .find(|t| t.sensor_id == sensor.sensor_id && t.start <= start && start < t.end)
        .map_or(nominal, |t| SegmentGeometry {
            distance_m: t.distance_m,
            pitch_deg: t.pitch_deg,
            ..nominal
        })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameOutOfRange {
    pub frame_index: u32,
    pub frame_count: u32,
}

impl fmt::Display for FrameOutOfRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "manual record for frame {} but the segment has {} frames",
            self.frame_index, self.frame_count
        )
    }
}

impl core::error::Error for FrameOutOfRange {}

#[derive(Debug, Clone, PartialEq)]
pub struct MergedAnnotations {
    pub annotations: AnnotationSet,
    /// Manual review rejected the claimed subject.
    pub quarantined: bool,
}

/// Manual records replace automatic ones frame by frame.
pub fn merge_annotations(
    auto: &AnnotationSet,
    manual: &[FrameAnnotation],
) -> Result<MergedAnnotations, FrameOutOfRange> {
    let mut frames: BTreeMap<u32, FrameAnnotation> = auto
        .frames
        .iter()
        .map(|f| (f.frame_index, f.clone()))
        .collect();
    let mut quarantined = false;
    for m in manual {
        if m.frame_index >= auto.frame_count {
            return Err(FrameOutOfRange {
                frame_index: m.frame_index,
                frame_count: auto.frame_count,
            });
        }
        quarantined |= !m.identity_confirmed;
        frames.insert(m.frame_index, m.clone());
    }
    Ok(MergedAnnotations {
        annotations: AnnotationSet {
            frame_count: auto.frame_count,
            frames: frames.into_values().collect(),
        },
        quarantined,
    })
}

/// One automatic annotation on the recording clock.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedAnnotation {
    pub timestamp_ms: i64,
    pub annotation: FrameAnnotation,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurationError {
    Log(LogError),
    Weather(MissingWeather),
    Annotation { segment_id: String, error: FrameOutOfRange },
    UnknownSubject(String),
    UnknownSensor(String),
}

impl fmt::Display for CurationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurationError::Log(e) => e.fmt(f),
            CurationError::Weather(e) => e.fmt(f),
            CurationError::Annotation { segment_id, error } => write!(f, "segment {segment_id}: {error}"),
            CurationError::UnknownSubject(id) => write!(f, "activity log names unknown subject {id}"),
            CurationError::UnknownSensor(id) => write!(f, "recording from unknown sensor {id}"),
        }
    }
}

impl core::error::Error for CurationError {}

/// Raw collection-event records shared by every recording.
#[derive(Debug, Clone, Copy)]
pub struct EventRecords<'a> {
    pub subjects: &'a [SubjectRecord],
    pub sensors: &'a [SensorRecord],
    pub log: &'a ActivityLog,
    pub weather: &'a WeatherSeries,
    pub telemetry: &'a [TelemetryRecord],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CuratedSegment {
    pub segment: MediaSegment,
    pub payload: Payload,
}

/// Cuts one recording into segments with payload, merged annotations,
/// weather and geometry attached.
pub fn curate_recording(
    event: &EventRecords<'_>,
    recording: &Recording,
    payload: &Payload,
    auto: &[TimedAnnotation],
    manual: &BTreeMap<String, Vec<FrameAnnotation>>,
) -> Result<(Vec<CuratedSegment>, Vec<SkippedInterval>), CurationError> {
    let sensor = event
        .sensors
        .iter()
        .find(|s| s.sensor_id == recording.sensor_id)
        .ok_or_else(|| CurationError::UnknownSensor(recording.sensor_id.clone()))?;
    let (cuts, skipped) = segment_by_timestamps(recording, event.log).map_err(CurationError::Log)?;
    let mut out = Vec::with_capacity(cuts.len());
    for cut in cuts {
        let subject = event
            .subjects
            .iter()
            .find(|s| s.subject_id == cut.subject_id)
            .ok_or_else(|| CurationError::UnknownSubject(cut.subject_id.clone()))?;
        let (start_ms, end_ms) = (cut.start.0 * 1000, cut.end.0 * 1000);
        let seg_payload = payload.cut(&cut.segment_id, start_ms, end_ms);
        let frames: Vec<FrameAnnotation> = auto
            .iter()
            .filter(|a| a.timestamp_ms >= start_ms && a.timestamp_ms < end_ms)
            .enumerate()
            .map(|(i, a)| FrameAnnotation {
                frame_index: i as u32,
                ..a.annotation.clone()
            })
            .collect();
        let auto_set = AnnotationSet {
            frame_count: seg_payload.frames.len() as u32,
            frames,
        };
        let reviewed = manual.get(&cut.segment_id).map_or(&[][..], |v| v.as_slice());
        let merged = merge_annotations(&auto_set, reviewed).map_err(|error| {
            CurationError::Annotation {
                segment_id: cut.segment_id.clone(),
                error,
            }
        })?;
        let environment =
            attach_environment(&cut.segment_id, cut.start, event.weather).map_err(CurationError::Weather)?;
        out.push(CuratedSegment {
            segment: MediaSegment {
                payload_ref: format!("{}.brf", cut.segment_id),
                segment_id: cut.segment_id,
                subject_id: cut.subject_id,
                demographics: subject.demographics,
                activity: cut.activity,
                clothing_set: cut.clothing_set,
                sensor: sensor.clone(),
                geometry: segment_geometry(sensor, event.telemetry, cut.start),
                start_ts: cut.start,
                end_ts: cut.end,
                environment: Some(environment),
                annotations: merged.annotations,
                quarantined: merged.quarantined,
            },
            payload: seg_payload,
        });
    }
    Ok((out, skipped))
}
