//! Corpus domain types.
//!
//! Everything here is plain data. Loading, validation and serialization of
//! these types live in the companion `mission-eval` crate; the algorithms in
//! this crate only ever read them.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// UTC instant with second precision, stored as seconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn truncate_to_minute(self) -> Self {
        Self(self.0.div_euclid(60) * 60)
    }

    pub fn seconds_since(self, earlier: Timestamp) -> i64 {
        self.0 - earlier.0
    }

    pub fn plus_seconds(self, secs: i64) -> Self {
        Self(self.0 + secs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Female, Gender::Male];

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "female" => Some(Gender::Female),
            "male" => Some(Gender::Male),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Demographics {
    pub age_years: u32,
    pub gender: Gender,
    pub height_cm: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Distractors only ever appear in the gallery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SubjectRole {
    ProbeSubject,
    Distractor,
}

impl SubjectRole {
    pub fn as_str(self) -> &'static str {
        match self {
            SubjectRole::ProbeSubject => "probe-subject",
            SubjectRole::Distractor => "distractor",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "probe-subject" => Some(SubjectRole::ProbeSubject),
            "distractor" => Some(SubjectRole::Distractor),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub demographics: Demographics,
    /// `None` until curation assigns the subject.
    pub split: Option<Split>,
    pub role: SubjectRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Platform {
    Ground,
    Elevated,
    Uav,
}

impl Platform {
    pub fn as_str(self) -> &'static str {
        match self {
            Platform::Ground => "ground",
            Platform::Elevated => "elevated",
            Platform::Uav => "uav",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ground" => Some(Platform::Ground),
            "elevated" => Some(Platform::Elevated),
            "uav" => Some(Platform::Uav),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SensorConfiguration {
    FaceConfigured,
    WholeBodyConfigured,
}

impl SensorConfiguration {
    pub fn as_str(self) -> &'static str {
        match self {
            SensorConfiguration::FaceConfigured => "face-configured",
            SensorConfiguration::WholeBodyConfigured => "wholebody-configured",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "face-configured" => Some(SensorConfiguration::FaceConfigured),
            "wholebody-configured" => Some(SensorConfiguration::WholeBodyConfigured),
            _ => None,
        }
    }
}

/// Controlled (indoor) captures feed the gallery; field captures feed probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Site {
    Indoor,
    Field,
}

impl Site {
    pub fn as_str(self) -> &'static str {
        match self {
            Site::Indoor => "indoor",
            Site::Field => "field",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "indoor" => Some(Site::Indoor),
            "field" => Some(Site::Field),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalRange {
    pub min_mm: f64,
    pub max_mm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorRecord {
    pub sensor_id: String,
    pub station_id: String,
    pub make: String,
    pub model: String,
    pub serial: String,
    pub resolution_px: (u32, u32),
    pub focal_length_mm: FocalRange,
    pub platform: Platform,
    pub site: Site,
    /// Nominal working distance; UAV segments carry their own geometry.
    pub distance_m: f64,
    pub pitch_deg: f64,
    pub configuration: SensorConfiguration,
}

/// Sensor geometry in effect for one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentGeometry {
    pub distance_m: f64,
    pub pitch_deg: f64,
    pub focal_mm: f64,
}

impl SensorRecord {
    pub fn nominal_geometry(&self) -> SegmentGeometry {
        SegmentGeometry {
            distance_m: self.distance_m,
            pitch_deg: self.pitch_deg,
            focal_mm: self.focal_length_mm.max_mm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Activity {
    Standing,
    StructuredWalk,
    RandomWalk,
    PhoneUse,
}

impl Activity {
    pub const ALL: [Activity; 4] = [
        Activity::Standing,
        Activity::StructuredWalk,
        Activity::RandomWalk,
        Activity::PhoneUse,
    ];

    pub fn is_walking(self) -> bool {
        matches!(self, Activity::StructuredWalk | Activity::RandomWalk)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activity::Standing => "standing",
            Activity::StructuredWalk => "structured-walk",
            Activity::RandomWalk => "random-walk",
            Activity::PhoneUse => "phone-use",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "standing" => Some(Activity::Standing),
            "structured-walk" => Some(Activity::StructuredWalk),
            "random-walk" => Some(Activity::RandomWalk),
            "phone-use" => Some(Activity::PhoneUse),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClothingSet {
    One,
    Two,
}

impl ClothingSet {
    pub fn number(self) -> u8 {
        match self {
            ClothingSet::One => 1,
            ClothingSet::Two => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(ClothingSet::One),
            2 => Some(ClothingSet::Two),
            _ => None,
        }
    }
}

/// Weather and turbulence sample for one minute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentRecord {
    pub sample_minute: Timestamp,
    pub temperature_c: f64,
    pub wind_chill_c: f64,
    pub heat_index_c: f64,
    pub relative_humidity_pct: f64,
    pub wind_speed_mps: f64,
    pub wind_direction_deg: f64,
    pub pressure_hpa: f64,
    pub solar_loading_wpm2: f64,
    /// Refractive-index structure constant, m^(-2/3).
    pub cn2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn contains(&self, other: &BBox) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.x + other.w <= self.x + self.w
            && other.y + other.h <= self.y + self.h
    }

    /// Grows the box by `fraction` of its size on every side.
    pub fn padded(&self, fraction: f64) -> BBox {
        let dx = self.w * fraction;
        let dy = self.h * fraction;
        BBox {
            x: self.x - dx,
            y: self.y - dy,
            w: self.w + 2.0 * dx,
            h: self.h + 2.0 * dy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FaceOcclusion {
    None,
    Partial,
    Full,
}

impl FaceOcclusion {
    pub fn as_str(self) -> &'static str {
        match self {
            FaceOcclusion::None => "none",
            FaceOcclusion::Partial => "partial",
            FaceOcclusion::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(FaceOcclusion::None),
            "partial" => Some(FaceOcclusion::Partial),
            "full" => Some(FaceOcclusion::Full),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnnotationSource {
    Auto,
    Manual,
}

impl AnnotationSource {
    pub fn as_str(self) -> &'static str {
        match self {
            AnnotationSource::Auto => "auto",
            AnnotationSource::Manual => "manual",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "auto" => Some(AnnotationSource::Auto),
            "manual" => Some(AnnotationSource::Manual),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnnotation {
    pub frame_index: u32,
    pub body_bbox: Option<BBox>,
    pub head_bbox: Option<BBox>,
    /// Head landmarks in camera-aligned coordinates, index-matched to the
    /// canonical reference head.
    pub head_keypoints_3d: Vec<Point3>,
    pub face_occlusion: FaceOcclusion,
    pub body_occluded: bool,
    pub identity_confirmed: bool,
    pub source: AnnotationSource,
}

/// Per-frame annotations for one segment, sorted by frame index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationSet {
    pub frame_count: u32,
    pub frames: Vec<FrameAnnotation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MediaSegment {
    pub segment_id: String,
    pub subject_id: String,
    pub demographics: Demographics,
    pub activity: Activity,
    pub clothing_set: ClothingSet,
    pub sensor: SensorRecord,
    pub geometry: SegmentGeometry,
    pub start_ts: Timestamp,
    pub end_ts: Timestamp,
    pub payload_ref: String,
    pub environment: Option<EnvironmentRecord>,
    pub annotations: AnnotationSet,
    /// Set when a manual check found the wrong person; kept for audit.
    pub quarantined: bool,
}

pub const PROBE_MIN_SECONDS: i64 = 5;
pub const PROBE_MAX_SECONDS: i64 = 15;

impl MediaSegment {
    pub fn duration_s(&self) -> i64 {
        self.end_ts.seconds_since(self.start_ts)
    }

    pub fn is_probe_duration(&self) -> bool {
        (PROBE_MIN_SECONDS..=PROBE_MAX_SECONDS).contains(&self.duration_s())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SigSetKind {
    Gallery,
    Probe,
}

impl SigSetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SigSetKind::Gallery => "gallery",
            SigSetKind::Probe => "probe",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gallery" => Some(SigSetKind::Gallery),
            "probe" => Some(SigSetKind::Probe),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModalityHint {
    Face,
    Body,
    Gait,
    All,
}

impl ModalityHint {
    pub fn as_str(self) -> &'static str {
        match self {
            ModalityHint::Face => "face",
            ModalityHint::Body => "body",
            ModalityHint::Gait => "gait",
            ModalityHint::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "face" => Some(ModalityHint::Face),
            "body" => Some(ModalityHint::Body),
            "gait" => Some(ModalityHint::Gait),
            "all" => Some(ModalityHint::All),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigSetEntry {
    pub entry_id: String,
    /// Present on gallery entries only.
    pub subject_id: Option<String>,
    pub media_refs: Vec<String>,
    pub modality_hint: ModalityHint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigSet {
    pub sigset_id: String,
    pub kind: SigSetKind,
    pub entries: Vec<SigSetEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SigSetError {
    DuplicateEntry(String),
    GalleryEntryWithoutSubject(String),
    GalleryEntryWithoutMedia(String),
    ProbeEntryWithSubject(String),
    ProbeEntryMediaCount { entry_id: String, count: usize },
}

impl fmt::Display for SigSetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigSetError::DuplicateEntry(id) => write!(f, "duplicate entry id {id}"),
            SigSetError::GalleryEntryWithoutSubject(id) => {
                write!(f, "gallery entry {id} has no subject_id")
            }
            SigSetError::GalleryEntryWithoutMedia(id) => {
                write!(f, "gallery entry {id} has no media")
            }
            SigSetError::ProbeEntryWithSubject(id) => {
                write!(f, "probe entry {id} carries a subject_id")
            }
            SigSetError::ProbeEntryMediaCount { entry_id, count } => write!(
                f,
                "probe entry {entry_id} must reference exactly one segment, found {count}"
            ),
        }
    }
}

impl core::error::Error for SigSetError {}

impl SigSet {
    pub fn validate(&self) -> Result<(), SigSetError> {
        let mut seen: Vec<&str> = self.entries.iter().map(|e| e.entry_id.as_str()).collect();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(SigSetError::DuplicateEntry(w[0].into()));
        }
        for entry in &self.entries {
            match self.kind {
                SigSetKind::Gallery => {
                    if entry.subject_id.is_none() {
                        return Err(SigSetError::GalleryEntryWithoutSubject(
                            entry.entry_id.clone(),
                        ));
                    }
                    if entry.media_refs.is_empty() {
                        return Err(SigSetError::GalleryEntryWithoutMedia(entry.entry_id.clone()));
                    }
                }
                SigSetKind::Probe => {
                    if entry.subject_id.is_some() {
                        return Err(SigSetError::ProbeEntryWithSubject(entry.entry_id.clone()));
                    }
                    if entry.media_refs.len() != 1 {
                        return Err(SigSetError::ProbeEntryMediaCount {
                            entry_id: entry.entry_id.clone(),
                            count: entry.media_refs.len(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Single-modality feature channels carried by payloads and templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modality {
    Face,
    Body,
    Gait,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Face, Modality::Body, Modality::Gait];

    pub fn index(self) -> usize {
        match self {
            Modality::Face => 0,
            Modality::Body => 1,
            Modality::Gait => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Face => "face",
            Modality::Body => "body",
            Modality::Gait => "gait",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

/// Matching mode requested from a holistic solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Face,
    Body,
    Gait,
    Fusion,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Face, Mode::Body, Mode::Gait, Mode::Fusion];

    pub fn modality(self) -> Option<Modality> {
        match self {
            Mode::Face => Some(Modality::Face),
            Mode::Body => Some(Modality::Body),
            Mode::Gait => Some(Modality::Gait),
            Mode::Fusion => None,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Mode::Face => 0x01,
            Mode::Body => 0x02,
            Mode::Gait => 0x04,
            Mode::Fusion => 0x08,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Mode::Face => 0,
            Mode::Body => 1,
            Mode::Gait => 2,
            Mode::Fusion => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Mode::ALL.into_iter().find(|m| m.code() == code)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Face => "face",
            Mode::Body => "body",
            Mode::Gait => "gait",
            Mode::Fusion => "fusion",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

/// Set of modes as the HELLO bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct ModeSet(pub u8);

impl ModeSet {
    pub const EMPTY: ModeSet = ModeSet(0);
    pub const ALL: ModeSet = ModeSet(0x0F);

    pub fn from_modes(modes: &[Mode]) -> Self {
        ModeSet(modes.iter().fold(0, |acc, m| acc | m.bit()))
    }

    pub fn contains(self, mode: Mode) -> bool {
        self.0 & mode.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 & 0x0F == 0
    }

    pub fn intersect(self, other: ModeSet) -> ModeSet {
        ModeSet(self.0 & other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = Mode> {
        Mode::ALL.into_iter().filter(move |m| self.contains(*m))
    }
}
