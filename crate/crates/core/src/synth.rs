//! Synthetic collection event.
//!
//! [`plan_event`] lays out subjects, sensors, the activity log, recordings,
//! weather and UAV telemetry. [`Renderer`] then produces each sensor's
//! continuous payload together with automatic and manual annotations. Every
//! random draw is keyed by the identifiers of what it describes, so any
//! recording can be rendered on its own and in any order.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::classify::FACING_YAW_LIMIT_DEG;
use crate::curation::{
    segment_id, ActivityLog, ActivityRecord, Recording, TelemetryRecord, TimedAnnotation,
};
use crate::model::{
    Activity, AnnotationSource, BBox, ClothingSet, Demographics, EnvironmentRecord, FaceOcclusion,
    FocalRange, FrameAnnotation, Gender, Modality, Platform, SegmentGeometry, SensorConfiguration,
    SensorRecord, Site, SubjectRecord, SubjectRole, Timestamp,
};
use crate::observation::{identity_latent, observe, projected_px, IdentityLatent, ObservationKey, QualityModel};
use crate::payload::{Observation, Payload, PayloadFrame, TrackObservation};
use crate::pose::{posed_head, wrap_degrees, PoseAngles};
use crate::rng::{hash_str, stream, unit, Purpose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavEnvelope {
    pub distance_m: (f64, f64),
    pub pitch_deg: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Subjects who appear as probes.
    pub n_subjects: usize,
    /// Extra gallery-only subjects, as a fraction of `n_subjects`.
    pub distractor_fraction: f64,
    /// Field sensors producing probe media.
    pub sensor_suite: Vec<SensorRecord>,
    /// Indoor sensors producing gallery media.
    pub gallery_rig: Vec<SensorRecord>,
    pub uav: UavEnvelope,
    /// Per-minute cn2 is log-uniform in this range, m^(-2/3).
    pub cn2_range: (f64, f64),
    pub dims: [usize; 3],
    pub sigma0: f64,
    pub head_size_m: f64,
    pub frame_rate: u32,
    pub duration_s: (u32, u32),
    pub gap_s: (u32, u32),
    pub occlusion_rate: f64,
    /// Field segments in which a second person walks through.
    pub intruder_rate: f64,
    /// Field segments whose media actually show a different subject.
    pub mislabel_rate: f64,
    /// Frames per segment that receive a manual annotation.
    pub manual_frames: u32,
    pub quality: QualityModel,
    pub start: Timestamp,
}

/// 2024-06-03T13:00:00Z
pub const DEFAULT_START: Timestamp = Timestamp(1_717_419_600);

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_subjects: 60,
            distractor_fraction: 0.25,
            sensor_suite: default_sensor_suite(),
            gallery_rig: default_gallery_rig(),
            uav: UavEnvelope {
                distance_m: (20.0, 60.0),
                pitch_deg: (20.0, 45.0),
            },
            cn2_range: (1e-16, 1e-13),
            dims: [64, 64, 32],
            sigma0: 0.35,
            head_size_m: 0.24,
            frame_rate: 1,
            duration_s: (5, 15),
            gap_s: (2, 5),
            occlusion_rate: 0.1,
            intruder_rate: 0.02,
            mislabel_rate: 0.01,
            manual_frames: 2,
            quality: QualityModel::default(),
            start: DEFAULT_START,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn sensor(
    id: &str,
    station: &str,
    site: Site,
    platform: Platform,
    resolution: (u32, u32),
    focal: (f64, f64),
    distance_m: f64,
    pitch_deg: f64,
    configuration: SensorConfiguration,
) -> SensorRecord {
    let model = match configuration {
        SensorConfiguration::FaceConfigured => "FC",
        SensorConfiguration::WholeBodyConfigured => "WB",
    };
    SensorRecord {
        sensor_id: String::from(id),
        station_id: String::from(station),
        make: String::from("Synthetic Optics"),
        model: format!("{model}-{}x{}", resolution.0, resolution.1),
        serial: format!("SN{:08X}", hash_str(id) as u32),
        resolution_px: resolution,
        focal_length_mm: FocalRange {
            min_mm: focal.0,
            max_mm: focal.1,
        },
        platform,
        site,
        distance_m,
        pitch_deg,
        configuration,
    }
}

pub fn default_gallery_rig() -> Vec<SensorRecord> {
    use SensorConfiguration::*;
    vec![
        sensor("IN-FACE-P0", "indoor", Site::Indoor, Platform::Ground, (1920, 1080), (35.0, 35.0), 3.5, 0.0, FaceConfigured),
        sensor("IN-FACE-P50", "indoor", Site::Indoor, Platform::Ground, (1920, 1080), (24.0, 24.0), 2.5, 50.0, FaceConfigured),
        sensor("IN-WB", "indoor", Site::Indoor, Platform::Ground, (3840, 2160), (12.0, 12.0), 6.0, 0.0, WholeBodyConfigured),
    ]
}

pub fn default_sensor_suite() -> Vec<SensorRecord> {
    use SensorConfiguration::*;
    let g = Platform::Ground;
    let f = Site::Field;
    vec![
        sensor("CR-FACE-3.8", "close-range", f, g, (1920, 1080), (12.0, 25.0), 3.8, 2.0, FaceConfigured),
        sensor("CR-WB-3.8", "close-range", f, g, (3840, 2160), (6.0, 6.0), 3.8, 2.0, WholeBodyConfigured),
        sensor("CR-WB-10", "close-range", f, g, (3840, 2160), (8.0, 8.0), 10.0, 2.0, WholeBodyConfigured),
        sensor("CR-WB-17.2", "close-range", f, g, (3840, 2160), (12.0, 12.0), 17.2, 1.0, WholeBodyConfigured),
        sensor("EL-5.8", "elevated", f, Platform::Elevated, (3840, 2160), (8.0, 8.0), 5.8, 35.0, WholeBodyConfigured),
        sensor("EL-12.9", "elevated", f, Platform::Elevated, (3840, 2160), (8.0, 8.0), 12.9, 15.0, WholeBodyConfigured),
        sensor("LR-WB-100", "long-range", f, g, (3840, 2160), (100.0, 100.0), 100.0, 0.0, WholeBodyConfigured),
        sensor("LR-FACE-300", "long-range", f, g, (3840, 2160), (150.0, 600.0), 300.0, 0.0, FaceConfigured),
        sensor("LR-WB-300", "long-range", f, g, (3840, 2160), (200.0, 200.0), 300.0, 0.0, WholeBodyConfigured),
        sensor("LR-WB-500", "long-range", f, g, (3840, 2160), (300.0, 300.0), 500.0, 0.0, WholeBodyConfigured),
        sensor("LR-FACE-1000", "long-range", f, g, (3840, 2160), (800.0, 2000.0), 1000.0, 0.0, FaceConfigured),
        sensor("UAV-1", "uav", f, Platform::Uav, (3840, 2160), (24.0, 24.0), 40.0, 30.0, WholeBodyConfigured),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorError {
    TooFewSubjects(usize),
    BadDims,
    NegativeSigma,
    NoProbeSensors,
    NoGallerySensors,
    WrongSite(String),
    DuplicateSensor(String),
    BadSensorGeometry(String),
    BadRange(&'static str),
}

impl fmt::Display for GeneratorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorError::TooFewSubjects(n) => write!(f, "need at least 2 subjects, got {n}"),
            GeneratorError::BadDims => f.write_str("every modality needs at least 2 dimensions"),
            GeneratorError::NegativeSigma => f.write_str("noise level must be non-negative"),
            GeneratorError::NoProbeSensors => f.write_str("sensor suite has no probe-capable field sensor"),
            GeneratorError::NoGallerySensors => f.write_str("gallery rig has no indoor sensor"),
            GeneratorError::WrongSite(id) => write!(f, "sensor {id} is listed under the wrong site"),
            GeneratorError::DuplicateSensor(id) => write!(f, "sensor id {id} used twice"),
            GeneratorError::BadSensorGeometry(id) => {
                write!(f, "sensor {id} needs a positive distance and a valid lens range")
            }
            GeneratorError::BadRange(what) => write!(f, "invalid range for {what}"),
        }
    }
}

impl core::error::Error for GeneratorError {}

impl GeneratorConfig {
    pub fn n_distractors(&self) -> usize {
        libm::round(self.n_subjects as f64 * self.distractor_fraction) as usize
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.n_subjects < 2 {
            return Err(GeneratorError::TooFewSubjects(self.n_subjects));
        }
        if self.dims.iter().any(|&d| d < 2) {
            return Err(GeneratorError::BadDims);
        }
        if !(self.sigma0 >= 0.0) {
            return Err(GeneratorError::NegativeSigma);
        }
        if self.sensor_suite.is_empty() {
            return Err(GeneratorError::NoProbeSensors);
        }
        if self.gallery_rig.is_empty() {
            return Err(GeneratorError::NoGallerySensors);
        }
        let mut seen = BTreeMap::new();
        for (s, site) in self
            .sensor_suite
            .iter()
            .map(|s| (s, Site::Field))
            .chain(self.gallery_rig.iter().map(|s| (s, Site::Indoor)))
        {
            if s.site != site {
                return Err(GeneratorError::WrongSite(s.sensor_id.clone()));
            }
            if seen.insert(s.sensor_id.as_str(), ()).is_some() {
                return Err(GeneratorError::DuplicateSensor(s.sensor_id.clone()));
            }
            let lens = s.focal_length_mm;
            if !(s.distance_m > 0.0 && lens.min_mm > 0.0 && lens.max_mm >= lens.min_mm) {
                return Err(GeneratorError::BadSensorGeometry(s.sensor_id.clone()));
            }
        }
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 <= r.1;
        if !ok(self.cn2_range) || self.cn2_range.0 < 0.0 {
            return Err(GeneratorError::BadRange("cn2"));
        }
        if !ok(self.uav.distance_m) || self.uav.distance_m.0 <= 0.0 || !ok(self.uav.pitch_deg) {
            return Err(GeneratorError::BadRange("uav envelope"));
        }
        if self.duration_s.0 == 0 || self.duration_s.0 > self.duration_s.1 {
            return Err(GeneratorError::BadRange("duration"));
        }
        if self.gap_s.0 > self.gap_s.1 {
            return Err(GeneratorError::BadRange("gap"));
        }
        if self.frame_rate == 0 {
            return Err(GeneratorError::BadRange("frame rate"));
        }
        if !(self.head_size_m > 0.0) {
            return Err(GeneratorError::BadRange("head size"));
        }
        for (r, what) in [
            (self.distractor_fraction, "distractor fraction"),
            (self.occlusion_rate, "occlusion rate"),
            (self.intruder_rate, "intruder rate"),
            (self.mislabel_rate, "mislabel rate"),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(GeneratorError::BadRange(what));
            }
        }
        Ok(())
    }
}

/// Duration of the rotating indoor capture: one frame per 45 degrees.
pub const INDOOR_ROTATION_STEPS: u32 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct EventPlan {
    pub subjects: Vec<SubjectRecord>,
    pub sensors: Vec<SensorRecord>,
    pub log: ActivityLog,
    pub recordings: Vec<Recording>,
    pub weather: Vec<EnvironmentRecord>,
    pub telemetry: Vec<TelemetryRecord>,
}

impl EventPlan {
    pub fn sensor(&self, id: &str) -> Option<&SensorRecord> {
        self.sensors.iter().find(|s| s.sensor_id == id)
    }

    pub fn subject(&self, id: &str) -> Option<&SubjectRecord> {
        self.subjects.iter().find(|s| s.subject_id == id)
    }
}

fn uniform_u32(rng: &mut ChaCha8Rng, range: (u32, u32)) -> u32 {
    rng.random_range(range.0..=range.1)
}

fn uniform_f64(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..range.1)
    } else {
        range.0
    }
}

fn demographics(seed: u64, id: &str) -> Demographics {
    let mut rng = stream(seed, Purpose::Demographics, &[hash_str(id)]);
    let gender = if rng.random::<bool>() { Gender::Male } else { Gender::Female };
    let age_years = rng.random_range(18..=65);
    let mean = match gender {
        Gender::Female => 163.0,
        Gender::Male => 177.0,
    };
    let h: f64 = Normal::new(mean, 7.0).unwrap().sample(&mut rng);
    Demographics {
        age_years,
        gender,
        height_cm: libm::round(h).clamp(140.0, 210.0) as u32,
    }
}

fn stations(sensors: &[SensorRecord]) -> Vec<(String, Site)> {
    let mut out: Vec<(String, Site)> = Vec::new();
    for s in sensors {
        if !out.iter().any(|(id, _)| *id == s.station_id) {
            out.push((s.station_id.clone(), s.site));
        }
    }
    out
}

/// Lays out the whole collection event.
pub fn plan_event(cfg: &GeneratorConfig) -> Result<EventPlan, GeneratorError> {
    cfg.validate()?;
    let n_total = cfg.n_subjects + cfg.n_distractors();
    let subjects: Vec<SubjectRecord> = (0..n_total)
        .map(|i| {
            let id = format!("S{:04}", i + 1);
            SubjectRecord {
                demographics: demographics(cfg.seed, &id),
                subject_id: id,
                split: None,
                role: if i < cfg.n_subjects {
                    SubjectRole::ProbeSubject
                } else {
                    SubjectRole::Distractor
                },
            }
        })
        .collect();

    let mut sensors = cfg.gallery_rig.clone();
    sensors.extend(cfg.sensor_suite.iter().cloned());
    let station_list = stations(&sensors);

    // subject i visits station j in slot i + j, so no station or subject is
    // ever double-booked
    let slot_s = i64::from(4 * (cfg.duration_s.1.max(INDOOR_ROTATION_STEPS) + cfg.gap_s.1) + 10);
    let mut records = Vec::new();
    for (i, subj) in subjects.iter().enumerate() {
        for (j, (station, site)) in station_list.iter().enumerate() {
            let (activities, clothing): (&[Activity], ClothingSet) = match site {
                Site::Indoor => (&[Activity::Standing, Activity::StructuredWalk], ClothingSet::Two),
                Site::Field if subj.role == SubjectRole::Distractor => continue,
                Site::Field => (&Activity::ALL, ClothingSet::One),
            };
            let mut rng = stream(
                cfg.seed,
                Purpose::Schedule,
                &[hash_str(&subj.subject_id), hash_str(station)],
            );
            let mut t = cfg.start.plus_seconds(((i + j) as i64) * slot_s + 5);
            for &activity in activities {
                let dur = if *site == Site::Indoor && activity == Activity::Standing {
                    (INDOOR_ROTATION_STEPS / cfg.frame_rate).max(1)
                } else {
                    uniform_u32(&mut rng, cfg.duration_s)
                };
                let end = t.plus_seconds(i64::from(dur));
                records.push(ActivityRecord {
                    subject_id: subj.subject_id.clone(),
                    activity,
                    clothing_set: clothing,
                    start: t,
                    end,
                    station_id: station.clone(),
                });
                t = end.plus_seconds(i64::from(uniform_u32(&mut rng, cfg.gap_s)));
            }
        }
    }
    records.sort_by(|a, b| (&a.station_id, a.start).cmp(&(&b.station_id, b.start)));
    let log = ActivityLog { records };

    let mut recordings = Vec::new();
    for s in &sensors {
        let mut span: Option<(Timestamp, Timestamp)> = None;
        for r in log.records.iter().filter(|r| r.station_id == s.station_id) {
            span = Some(match span {
                None => (r.start, r.end),
                Some((a, b)) => (a.min(r.start), b.max(r.end)),
            });
        }
        if let Some((a, b)) = span {
            recordings.push(Recording {
                sensor_id: s.sensor_id.clone(),
                station_id: s.station_id.clone(),
                start: a.plus_seconds(-5),
                end: b.plus_seconds(5),
            });
        }
    }

    let first = recordings.iter().map(|r| r.start).min().unwrap_or(cfg.start).truncate_to_minute();
    let last = recordings.iter().map(|r| r.end).max().unwrap_or(cfg.start);
    let mut weather = Vec::new();
    let mut minute = first;
    while minute <= last {
        weather.push(weather_at(cfg, minute));
        minute = minute.plus_seconds(60);
    }

    let mut telemetry = Vec::new();
    for s in sensors.iter().filter(|s| s.platform == Platform::Uav) {
        for r in log.records.iter().filter(|r| r.station_id == s.station_id) {
            let mut rng = stream(
                cfg.seed,
                Purpose::UavGeometry,
                &[hash_str(&s.sensor_id), r.start.0 as u64],
            );
            telemetry.push(TelemetryRecord {
                sensor_id: s.sensor_id.clone(),
                start: r.start,
                end: r.end,
                distance_m: round_to(uniform_f64(&mut rng, cfg.uav.distance_m), 0.1),
                pitch_deg: round_to(uniform_f64(&mut rng, cfg.uav.pitch_deg), 0.1),
            });
        }
    }

    Ok(EventPlan {
        subjects,
        sensors,
        log,
        recordings,
        weather,
        telemetry,
    })
}

fn round_to(x: f64, step: f64) -> f64 {
    libm::round(x / step) * step
}

fn weather_at(cfg: &GeneratorConfig, minute: Timestamp) -> EnvironmentRecord {
    let mut rng = stream(cfg.seed, Purpose::Weather, &[minute.0 as u64]);
    let temperature_c = round_to(rng.random_range(18.0..32.0), 0.1);
    let relative_humidity_pct = round_to(rng.random_range(20.0..80.0), 0.1);
    let wind_speed_mps = round_to(rng.random_range(0.0..8.0), 0.1);
    let (lo, hi) = cfg.cn2_range;
    let u: f64 = rng.random();
    let cn2 = if lo > 0.0 && hi > lo {
        libm::exp(libm::log(lo) + u * (libm::log(hi) - libm::log(lo)))
    } else {
        lo + u * (hi - lo)
    };
    EnvironmentRecord {
        sample_minute: minute,
        temperature_c,
        wind_chill_c: round_to(temperature_c - 0.7 * wind_speed_mps, 0.1),
        heat_index_c: round_to(temperature_c + 0.05 * relative_humidity_pct, 0.1),
        relative_humidity_pct,
        wind_speed_mps,
        wind_direction_deg: round_to(rng.random_range(0.0..360.0), 1.0),
        pressure_hpa: round_to(rng.random_range(990.0..1030.0), 0.1),
        solar_loading_wpm2: round_to(rng.random_range(0.0..900.0), 1.0),
        cn2,
    }
}

/// Manual review of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ManualReview {
    pub segment_id: String,
    pub frames: Vec<FrameAnnotation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedRecording {
    pub payload: Payload,
    pub auto: Vec<TimedAnnotation>,
    pub manual: Vec<ManualReview>,
}

/// What went into a segment beyond its metadata; kept for tests and audits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentFlags {
    pub intruder: bool,
    pub mislabeled: bool,
}

pub struct Renderer<'a> {
    cfg: &'a GeneratorConfig,
    plan: &'a EventPlan,
    latents: BTreeMap<&'a str, IdentityLatent>,
    weather: BTreeMap<Timestamp, &'a EnvironmentRecord>,
}

impl<'a> Renderer<'a> {
    pub fn new(cfg: &'a GeneratorConfig, plan: &'a EventPlan) -> Self {
        let latents = plan
            .subjects
            .iter()
            .map(|s| (s.subject_id.as_str(), identity_latent(cfg.seed, &s.subject_id, cfg.dims)))
            .collect();
        let weather = plan.weather.iter().map(|w| (w.sample_minute, w)).collect();
        Self {
            cfg,
            plan,
            latents,
            weather,
        }
    }

    pub fn latent(&self, subject_id: &str) -> Option<&IdentityLatent> {
        self.latents.get(subject_id)
    }

    pub fn flags(&self, sensor: &SensorRecord, segment_id: &str) -> SegmentFlags {
        if sensor.site == Site::Indoor {
            return SegmentFlags {
                intruder: false,
                mislabeled: false,
            };
        }
        let key = hash_str(segment_id);
        SegmentFlags {
            intruder: unit(self.cfg.seed, Purpose::ManualReview, &[key, 1]) < self.cfg.intruder_rate,
            mislabeled: unit(self.cfg.seed, Purpose::ManualReview, &[key, 2]) < self.cfg.mislabel_rate,
        }
    }

    /// Subject actually shown in a mislabeled segment: the next probe
    /// subject in id order.
    fn substitute(&self, subject_id: &str) -> &'a str {
        let probes: Vec<&SubjectRecord> = self
            .plan
            .subjects
            .iter()
            .filter(|s| s.role == SubjectRole::ProbeSubject)
            .collect();
        let i = probes.iter().position(|s| s.subject_id == subject_id).unwrap_or(0);
        &probes[(i + 1) % probes.len()].subject_id
    }

    /// Person walking through an intruder segment: a distractor if there
    /// are any, otherwise the substitute subject.
    fn intruder(&self, segment_id: &str, subject_id: &str) -> &'a str {
        let distractors: Vec<&SubjectRecord> = self
            .plan
            .subjects
            .iter()
            .filter(|s| s.role == SubjectRole::Distractor)
            .collect();
        if distractors.is_empty() {
            return self.substitute(subject_id);
        }
        let k = hash_str(segment_id) as usize % distractors.len();
        &distractors[k].subject_id
    }

    pub fn render_recording(&self, sensor_id: &str) -> Option<RenderedRecording> {
        let sensor = self.plan.sensor(sensor_id)?;
        let mut out = RenderedRecording {
            payload: Payload {
                segment_id: String::from(sensor_id),
                frame_rate: self.cfg.frame_rate,
                frames: Vec::new(),
            },
            auto: Vec::new(),
            manual: Vec::new(),
        };
        for r in self.plan.log.records.iter().filter(|r| r.station_id == sensor.station_id) {
            self.render_interval(sensor, r, &mut out);
        }
        Some(out)
    }

    fn geometry(&self, sensor: &SensorRecord, start: Timestamp) -> SegmentGeometry {
        crate::curation::segment_geometry(sensor, &self.plan.telemetry, start)
    }

    fn render_interval(&self, sensor: &SensorRecord, r: &ActivityRecord, out: &mut RenderedRecording) {
        let cfg = self.cfg;
        let seg_id = segment_id(&sensor.sensor_id, &r.subject_id, r.activity, r.start);
        let flags = self.flags(sensor, &seg_id);
        let geometry = self.geometry(sensor, r.start);
        let cn2 = self
            .weather
            .get(&r.start.truncate_to_minute())
            .map_or(0.0, |w| w.cn2);
        let subject = self.plan.subject(&r.subject_id).expect("logged subject exists");
        let shown = if flags.mislabeled {
            self.substitute(&r.subject_id)
        } else {
            subject.subject_id.as_str()
        };
        let shown_height = self.plan.subject(shown).map_or(1.7, |s| f64::from(s.demographics.height_cm) / 100.0);

        let n_frames = (r.end.seconds_since(r.start) as u32) * cfg.frame_rate;
        let head_px = projected_px(sensor, geometry.focal_mm, geometry.distance_m, cfg.head_size_m)
            .unwrap_or(0.0);
        let body_px = projected_px(sensor, geometry.focal_mm, geometry.distance_m, shown_height)
            .unwrap_or(0.0);
        let poses = self.poses(sensor, r.activity, &seg_id, &geometry, n_frames);

        let mut pose_rng = stream(cfg.seed, Purpose::Occlusion, &[hash_str(&seg_id)]);
        let (w, h) = (f64::from(sensor.resolution_px.0), f64::from(sensor.resolution_px.1));
        let body_h = libm::round(body_px).clamp(1.0, h);
        let body_w = libm::round(body_h * 0.4).clamp(1.0, w);
        let head_h = libm::round(head_px).clamp(1.0, body_h);
        let head_w = libm::round(head_h * 0.8).clamp(1.0, body_w);
        let drift: f64 = pose_rng.random_range(-0.25..0.25);
        let body_x = libm::round((w - body_w) * (0.5 + drift)).clamp(0.0, w - body_w);
        let body_y = libm::round((h - body_h) * 0.5).clamp(0.0, h - body_h);
        let body = BBox { x: body_x, y: body_y, w: body_w, h: body_h };
        let head = BBox {
            x: body_x + libm::round((body_w - head_w) * 0.5),
            y: body_y,
            w: head_w,
            h: head_h,
        };

        let intruder_frames = if flags.intruder && n_frames > 2 {
            let k0 = pose_rng.random_range(0..n_frames - 1);
            k0..k0 + 2
        } else {
            0..0
        };
        let intruder_id = self.intruder(&seg_id, &r.subject_id);
        let manual_idx = manual_frames(n_frames, cfg.manual_frames);
        let mut manual = Vec::new();
        let base_index = out.payload.frames.len() as u32;

        for (k, angles) in poses.iter().enumerate() {
            let k = k as u32;
            let occlusion = if pose_rng.random::<f64>() < cfg.occlusion_rate {
                FaceOcclusion::Full
            } else if r.activity == Activity::PhoneUse {
                FaceOcclusion::Partial
            } else {
                FaceOcclusion::None
            };
            let body_occluded = pose_rng.random::<f64>() < cfg.occlusion_rate * 0.5;
            let jitter = (pose_rng.random_range(-2i32..=2), pose_rng.random_range(-2i32..=2));
            let timestamp_ms = r.start.0 * 1000 + i64::from(k) * 1000 / i64::from(cfg.frame_rate);

            let facing = (-FACING_YAW_LIMIT_DEG..=FACING_YAW_LIMIT_DEG).contains(&angles.yaw_deg);
            let mut observations = Vec::new();
            let mut push = |m: Modality, px: f64| {
                let q = cfg.quality.quality(m, px, cn2, geometry.distance_m);
                let key = ObservationKey {
                    subject_id: shown,
                    segment_id: &seg_id,
                    frame: k,
                    modality: m,
                };
                let mu = &self.latents[shown].modality[m.index()];
                observations.push(Observation {
                    modality: m,
                    quality: q as f32,
                    vector: observe(cfg.seed, key, mu, cfg.sigma0, q),
                });
            };
            if facing && occlusion != FaceOcclusion::Full {
                push(Modality::Face, head_px);
            }
            push(Modality::Body, body_px);
            if r.activity.is_walking() {
                push(Modality::Gait, body_px);
            }

            let mut tracks = vec![TrackObservation {
                track_id: 0,
                head_bbox: Some(head),
                body_bbox: Some(body),
                yaw_deg: angles.yaw_deg as f32,
                pitch_deg: angles.pitch_deg as f32,
                roll_deg: angles.roll_deg as f32,
                observations,
            }];
            if intruder_frames.contains(&k) {
                tracks.push(self.intruder_track(intruder_id, &seg_id, k, body_px, cn2, &geometry, r.activity));
            }
            out.payload.frames.push(PayloadFrame {
                frame_index: base_index + k,
                timestamp_ms,
                tracks,
            });

            let keypoints = posed_head(angles, crate::model::Point3::new(0.0, 0.0, geometry.distance_m)).to_vec();
            let exact = FrameAnnotation {
                frame_index: k,
                body_bbox: Some(body),
                head_bbox: Some(head),
                head_keypoints_3d: keypoints,
                face_occlusion: occlusion,
                body_occluded,
                identity_confirmed: true,
                source: AnnotationSource::Auto,
            };
            let mut auto = exact.clone();
            auto.frame_index = base_index + k;
            if let Some(hb) = auto.head_bbox.as_mut() {
                hb.x = (hb.x + f64::from(jitter.0)).clamp(body.x, body.x + body.w - hb.w);
                hb.y = (hb.y + f64::from(jitter.1)).clamp(body.y, body.y + body.h - hb.h);
            }
            out.auto.push(TimedAnnotation {
                timestamp_ms,
                annotation: auto,
            });
            if manual_idx.contains(&k) {
                manual.push(FrameAnnotation {
                    identity_confirmed: !flags.mislabeled,
                    source: AnnotationSource::Manual,
                    ..exact
                });
            }
        }
        if !manual.is_empty() {
            out.manual.push(ManualReview {
                segment_id: seg_id,
                frames: manual,
            });
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn intruder_track(
        &self,
        intruder_id: &str,
        seg_id: &str,
        k: u32,
        body_px: f64,
        cn2: f64,
        geometry: &SegmentGeometry,
        activity: Activity,
    ) -> TrackObservation {
        let cfg = self.cfg;
        let mut observations = Vec::new();
        let mut modalities = vec![Modality::Body];
        if activity.is_walking() {
            modalities.push(Modality::Gait);
        }
        for m in modalities {
            let q = cfg.quality.quality(m, body_px, cn2, geometry.distance_m);
            let key = ObservationKey {
                subject_id: intruder_id,
                segment_id: seg_id,
                frame: k,
                modality: m,
            };
            observations.push(Observation {
                modality: m,
                quality: q as f32,
                vector: observe(cfg.seed, key, &self.latents[intruder_id].modality[m.index()], cfg.sigma0, q),
            });
        }
        TrackObservation {
            track_id: 1,
            head_bbox: None,
            body_bbox: None,
            yaw_deg: 90.0,
            pitch_deg: 0.0,
            roll_deg: 0.0,
            observations,
        }
    }

    /// Head pose relative to the camera for every frame of a segment.
    fn poses(
        &self,
        sensor: &SensorRecord,
        activity: Activity,
        seg_id: &str,
        geometry: &SegmentGeometry,
        n: u32,
    ) -> Vec<PoseAngles> {
        let mut rng = stream(self.cfg.seed, Purpose::FramePose, &[hash_str(seg_id)]);
        let noise = |rng: &mut ChaCha8Rng, sd: f64| sd * rng.sample::<f64, _>(StandardNormal);
        let base_yaw: f64 = rng.random_range(-180.0..180.0);
        let period = rng.random_range(3u32..=6);
        let walk_offset: f64 = rng.random_range(-30.0..30.0);
        let mut yaw = base_yaw;
        (0..n)
            .map(|k| {
                let mut pitch = -geometry.pitch_deg + noise(&mut rng, 3.0);
                let roll = noise(&mut rng, 3.0);
                yaw = match (sensor.site, activity) {
                    (Site::Indoor, Activity::Standing) => 45.0 * f64::from(k % INDOOR_ROTATION_STEPS),
                    (_, Activity::Standing) => base_yaw + noise(&mut rng, 5.0),
                    (_, Activity::StructuredWalk) => {
                        walk_offset + 180.0 * f64::from((k / period) % 2) + noise(&mut rng, 8.0)
                    }
                    (_, Activity::RandomWalk) => yaw + noise(&mut rng, 40.0),
                    (_, Activity::PhoneUse) => {
                        pitch += 35.0;
                        base_yaw + noise(&mut rng, 10.0)
                    }
                };
                PoseAngles {
                    yaw_deg: wrap_degrees(yaw),
                    pitch_deg: pitch.clamp(-80.0, 80.0),
                    roll_deg: roll,
                }
            })
            .collect()
    }
}

/// Frame indices chosen for manual review: spread evenly, first frame
/// always included.
pub fn manual_frames(n_frames: u32, count: u32) -> Vec<u32> {
    let count = count.min(n_frames);
    let mut v: Vec<u32> = (0..count).map(|i| i * n_frames / count.max(1)).collect();
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GeneratorConfig {
        GeneratorConfig {
            n_subjects: 4,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn config_errors() {
        let mut c = small();
        c.sensor_suite.clear();
        assert_eq!(plan_event(&c), Err(GeneratorError::NoProbeSensors));
        let mut c = small();
        c.gallery_rig.clear();
        assert_eq!(plan_event(&c), Err(GeneratorError::NoGallerySensors));
        let c = GeneratorConfig { n_subjects: 1, ..small() };
        assert_eq!(plan_event(&c), Err(GeneratorError::TooFewSubjects(1)));
        let c = GeneratorConfig { sigma0: -1.0, ..small() };
        assert_eq!(plan_event(&c), Err(GeneratorError::NegativeSigma));
        let c = GeneratorConfig { dims: [64, 1, 32], ..small() };
        assert_eq!(plan_event(&c), Err(GeneratorError::BadDims));
    }

    #[test]
    fn log_is_valid_and_complete() {
        let c = small();
        let plan = plan_event(&c).unwrap();
        plan.log.validate().unwrap();
        assert_eq!(plan.subjects.len(), 5);
        let distractor = &plan.subjects[4];
        assert_eq!(distractor.role, SubjectRole::Distractor);
        for s in &plan.subjects {
            let field = plan
                .log
                .records
                .iter()
                .filter(|r| r.subject_id == s.subject_id && r.clothing_set == ClothingSet::One)
                .count();
            let indoor = plan
                .log
                .records
                .iter()
                .filter(|r| r.subject_id == s.subject_id && r.clothing_set == ClothingSet::Two)
                .count();
            assert_eq!(indoor, 2);
            let expected_field = if s.role == SubjectRole::Distractor { 0 } else { 4 * 4 };
            assert_eq!(field, expected_field);
        }
    }

    #[test]
    fn weather_covers_every_recording_minute() {
        let plan = plan_event(&small()).unwrap();
        let minutes: BTreeMap<Timestamp, ()> = plan.weather.iter().map(|w| (w.sample_minute, ())).collect();
        for r in &plan.log.records {
            assert!(minutes.contains_key(&r.start.truncate_to_minute()));
        }
    }

    #[test]
    fn render_is_deterministic() {
        let c = small();
        let plan = plan_event(&c).unwrap();
        let a = Renderer::new(&c, &plan).render_recording("LR-WB-300").unwrap();
        let b = Renderer::new(&c, &plan).render_recording("LR-WB-300").unwrap();
        assert_eq!(a, b);
        assert!(!a.payload.frames.is_empty());
        assert_eq!(a.auto.len(), a.payload.frames.len());
    }

    #[test]
    fn gait_only_for_walking_and_face_only_when_facing() {
        let c = small();
        let plan = plan_event(&c).unwrap();
        let r = Renderer::new(&c, &plan).render_recording("CR-FACE-3.8").unwrap();
        for (f, a) in r.payload.frames.iter().zip(&r.auto) {
            let t = &f.tracks[0];
            let has = |m| t.observations.iter().any(|o| o.modality == m);
            let facing = (-110.0..=110.0).contains(&t.yaw_deg);
            let full = a.annotation.face_occlusion == FaceOcclusion::Full;
            assert_eq!(has(Modality::Face), facing && !full);
            assert!(has(Modality::Body));
        }
    }

    #[test]
    fn manual_frame_choice() {
        assert_eq!(manual_frames(10, 2), vec![0, 5]);
        assert_eq!(manual_frames(1, 2), vec![0]);
        assert_eq!(manual_frames(5, 0), Vec::<u32>::new());
    }
}
