//! Probe classification: facing gate, Face Included / Face Restricted,
//! treatment vs control, and mission membership.
//!
//! Every function here is a pure predicate over stored metadata so a probe's
//! classification can always be re-derived from its metadata file alone.

use crate::model::{
    Activity, AnnotationSet, FaceOcclusion, FrameAnnotation, Platform, SegmentGeometry,
    SensorConfiguration,
};
use crate::pose::{head_pose, PoseAngles};
use core::fmt;

/// Yaw band (inclusive) in which a subject counts as facing the camera.
pub const FACING_YAW_LIMIT_DEG: f64 = 110.0;
/// Minimum head height (inclusive) for a usable face.
pub const MIN_FACE_HEAD_HEIGHT_PX: f64 = 20.0;
/// Control sensors sit strictly closer than this.
pub const CONTROL_MAX_DISTANCE_M: f64 = 75.0;
/// Eye-level limit (inclusive); elevated means strictly above it.
pub const EYE_LEVEL_MAX_PITCH_DEG: f64 = 12.0;

/// True iff any frame has yaw in [-110, 110] degrees.
pub fn facing_camera(track: &[PoseAngles]) -> bool {
    track.iter().any(|p| is_facing_yaw(p.yaw_deg))
}

fn is_facing_yaw(yaw_deg: f64) -> bool {
    (-FACING_YAW_LIMIT_DEG..=FACING_YAW_LIMIT_DEG).contains(&yaw_deg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Restriction {
    FaceIncluded,
    FaceRestricted,
}

impl Restriction {
    pub const ALL: [Restriction; 2] = [Restriction::FaceIncluded, Restriction::FaceRestricted];

    pub fn as_str(self) -> &'static str {
        match self {
            Restriction::FaceIncluded => "face-included",
            Restriction::FaceRestricted => "face-restricted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

/// Pose of one annotated frame, if its head landmarks allow a fit.
pub fn frame_pose(frame: &FrameAnnotation) -> Option<PoseAngles> {
    if frame.head_keypoints_3d.is_empty() {
        return None;
    }
    head_pose(&frame.head_keypoints_3d).ok()
}

/// A frame with a detectable face: tall enough head box, facing the camera
/// and not fully occluded.
pub fn has_detectable_face(frame: &FrameAnnotation) -> bool {
    let tall_enough = frame
        .head_bbox
        .is_some_and(|b| b.h >= MIN_FACE_HEAD_HEIGHT_PX);
    if !tall_enough || frame.face_occlusion == FaceOcclusion::Full {
        return false;
    }
    frame_pose(frame).is_some_and(|p| facing_camera(&[p]))
}

/// Face Included iff at least one frame has a detectable face.
pub fn classify_restriction(annotations: &AnnotationSet) -> Restriction {
    if annotations.frames.iter().any(has_detectable_face) {
        Restriction::FaceIncluded
    } else {
        Restriction::FaceRestricted
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Treatment {
    Control,
    Treatment,
}

impl Treatment {
    pub const ALL: [Treatment; 2] = [Treatment::Control, Treatment::Treatment];

    pub fn as_str(self) -> &'static str {
        match self {
            Treatment::Control => "control",
            Treatment::Treatment => "treatment",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

/// Control iff a ground sensor closer than 75 m at eye level.
pub fn assign_treatment(platform: Platform, geometry: &SegmentGeometry) -> Treatment {
    if platform == Platform::Ground
        && geometry.distance_m < CONTROL_MAX_DISTANCE_M
        && geometry.pitch_deg <= EYE_LEVEL_MAX_PITCH_DEG
    {
        Treatment::Control
    } else {
        Treatment::Treatment
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MissionId {
    ExperimentalControl,
    CloseRangeFace,
    CloseRangeBody,
    LongRangeFace,
    LongRangeBody,
    Uav,
    Turbulence,
    Elevated,
    Gait,
    FaceRestricted,
}

impl MissionId {
    pub const ALL: [MissionId; 10] = [
        MissionId::ExperimentalControl,
        MissionId::CloseRangeFace,
        MissionId::CloseRangeBody,
        MissionId::LongRangeFace,
        MissionId::LongRangeBody,
        MissionId::Uav,
        MissionId::Turbulence,
        MissionId::Elevated,
        MissionId::Gait,
        MissionId::FaceRestricted,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MissionId::ExperimentalControl => "experimental-control",
            MissionId::CloseRangeFace => "close-range-face",
            MissionId::CloseRangeBody => "close-range-body",
            MissionId::LongRangeFace => "long-range-face",
            MissionId::LongRangeBody => "long-range-body",
            MissionId::Uav => "uav",
            MissionId::Turbulence => "turbulence",
            MissionId::Elevated => "elevated",
            MissionId::Gait => "gait",
            MissionId::FaceRestricted => "face-restricted",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            MissionId::ExperimentalControl => "Experimental Control",
            MissionId::CloseRangeFace => "Close Range Face",
            MissionId::CloseRangeBody => "Close Range Body",
            MissionId::LongRangeFace => "Long Range Face",
            MissionId::LongRangeBody => "Long Range Body (Fusion)",
            MissionId::Uav => "UAV",
            MissionId::Turbulence => "Turbulence",
            MissionId::Elevated => "Elevated Cameras",
            MissionId::Gait => "Gait",
            MissionId::FaceRestricted => "Face Restricted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for MissionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Small bit set of missions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct MissionSet(u16);

impl MissionSet {
    pub const EMPTY: MissionSet = MissionSet(0);

    pub fn insert(&mut self, m: MissionId) {
        self.0 |= 1 << m.index();
    }

    pub fn contains(self, m: MissionId) -> bool {
        self.0 & (1 << m.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = MissionId> {
        MissionId::ALL.into_iter().filter(move |m| self.contains(*m))
    }
}

impl FromIterator<MissionId> for MissionSet {
    fn from_iter<I: IntoIterator<Item = MissionId>>(iter: I) -> Self {
        let mut s = MissionSet::EMPTY;
        for m in iter {
            s.insert(m);
        }
        s
    }
}

/// Distance and angle bands for the mission filters. Bands are inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissionThresholds {
    pub close_range_m: f64,
    pub close_range_tolerance_m: f64,
    pub control_band_m: (f64, f64),
    /// Long-range missions need strictly more than this.
    pub long_range_min_m: f64,
    pub elevated_band_m: (f64, f64),
    /// Elevated mission needs strictly more than this pitch.
    pub elevated_min_pitch_deg: f64,
    pub eye_level_max_pitch_deg: f64,
    /// "Medium to high" turbulence, m^(-2/3).
    pub turbulence_min_cn2: f64,
    pub gait_min_distance_m: f64,
}

impl Default for MissionThresholds {
    fn default() -> Self {
        Self {
            close_range_m: 3.8,
            close_range_tolerance_m: 0.05,
            control_band_m: (3.8, 17.2),
            long_range_min_m: 250.0,
            elevated_band_m: (5.8, 12.9),
            elevated_min_pitch_deg: 12.0,
            eye_level_max_pitch_deg: EYE_LEVEL_MAX_PITCH_DEG,
            turbulence_min_cn2: 1e-14,
            gait_min_distance_m: 3.8,
        }
    }
}

/// Everything the mission filters look at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissionInput {
    pub platform: Platform,
    pub configuration: SensorConfiguration,
    pub geometry: SegmentGeometry,
    pub activity: Activity,
    pub cn2: f64,
    pub restriction: Restriction,
    pub treatment: Treatment,
}

fn within(x: f64, band: (f64, f64)) -> bool {
    x >= band.0 && x <= band.1
}

/// Mission memberships of one classified probe. A probe may belong to
/// several missions or none.
pub fn mission_filter(input: &MissionInput, t: &MissionThresholds) -> MissionSet {
    let d = input.geometry.distance_m;
    let pitch = input.geometry.pitch_deg;
    let ground = input.platform == Platform::Ground;
    let eye_level = pitch <= t.eye_level_max_pitch_deg;
    let face_cam = input.configuration == SensorConfiguration::FaceConfigured;
    let face_included = input.restriction == Restriction::FaceIncluded;
    let close = ground && eye_level && (d - t.close_range_m).abs() <= t.close_range_tolerance_m;
    let long = ground && d > t.long_range_min_m;

    let mut set = MissionSet::EMPTY;
    if ground && eye_level && within(d, t.control_band_m) {
        set.insert(MissionId::ExperimentalControl);
    }
    if close && face_cam && face_included {
        set.insert(MissionId::CloseRangeFace);
    }
    if close {
        set.insert(MissionId::CloseRangeBody);
    }
    if long && face_cam && face_included {
        set.insert(MissionId::LongRangeFace);
    }
    if long {
        set.insert(MissionId::LongRangeBody);
    }
    if input.platform == Platform::Uav {
        set.insert(MissionId::Uav);
    }
    if long && input.cn2 >= t.turbulence_min_cn2 {
        set.insert(MissionId::Turbulence);
    }
    if input.platform != Platform::Uav
        && within(d, t.elevated_band_m)
        && pitch > t.elevated_min_pitch_deg
    {
        set.insert(MissionId::Elevated);
    }
    if input.activity.is_walking() && d >= t.gait_min_distance_m {
        set.insert(MissionId::Gait);
    }
    if input.restriction == Restriction::FaceRestricted && input.treatment == Treatment::Treatment
    {
        set.insert(MissionId::FaceRestricted);
    }
    set
}

/// Full classification of one probe candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeClassification {
    pub restriction: Restriction,
    pub treatment: Treatment,
    pub missions: MissionSet,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AnnotationSource, BBox, Point3};
    use crate::pose::posed_head;
    use alloc::vec;
    use alloc::vec::Vec;

    fn frame(height_px: f64, yaw: f64, occlusion: FaceOcclusion) -> FrameAnnotation {
        FrameAnnotation {
            frame_index: 0,
            body_bbox: Some(BBox { x: 0.0, y: 0.0, w: 100.0, h: 400.0 }),
            head_bbox: Some(BBox { x: 30.0, y: 5.0, w: height_px * 0.8, h: height_px }),
            head_keypoints_3d: posed_head(&PoseAngles::new(yaw, 0.0, 0.0), Point3::new(0.0, 0.0, 10.0))
                .to_vec(),
            face_occlusion: occlusion,
            body_occluded: false,
            identity_confirmed: true,
            source: AnnotationSource::Auto,
        }
    }

    fn set(frames: Vec<FrameAnnotation>) -> AnnotationSet {
        AnnotationSet { frame_count: frames.len() as u32, frames }
    }

    fn yaws(y: f64) -> [PoseAngles; 3] {
        [PoseAngles::new(y, 0.0, 0.0); 3]
    }

    #[test]
    fn facing_boundaries() {
        assert!(facing_camera(&yaws(0.0)));
        assert!(facing_camera(&yaws(110.0)));
        assert!(facing_camera(&yaws(-110.0)));
        assert!(!facing_camera(&yaws(-110.1)));
        assert!(!facing_camera(&yaws(135.0)));
        assert!(!facing_camera(&yaws(180.0)));
        assert!(facing_camera(&[PoseAngles::new(180.0, 0.0, 0.0), PoseAngles::ZERO]));
        assert!(!facing_camera(&[]));
    }

    #[test]
    fn head_height_boundary() {
        let r = |h| classify_restriction(&set(vec![frame(h, 0.0, FaceOcclusion::None)]));
        assert_eq!(r(19.0), Restriction::FaceRestricted);
        assert_eq!(r(20.0), Restriction::FaceIncluded);
        assert_eq!(r(21.0), Restriction::FaceIncluded);
    }

    #[test]
    fn occluded_everywhere_is_restricted() {
        let frames = (0..5).map(|_| frame(60.0, 0.0, FaceOcclusion::Full)).collect();
        assert_eq!(classify_restriction(&set(frames)), Restriction::FaceRestricted);
        let partial = vec![frame(60.0, 0.0, FaceOcclusion::Partial)];
        assert_eq!(classify_restriction(&set(partial)), Restriction::FaceIncluded);
    }

    #[test]
    fn back_of_head_is_restricted() {
        let frames = vec![frame(60.0, 150.0, FaceOcclusion::None)];
        assert_eq!(classify_restriction(&set(frames)), Restriction::FaceRestricted);
    }

    #[test]
    fn missing_head_annotations_are_restricted() {
        let mut f = frame(60.0, 0.0, FaceOcclusion::None);
        f.head_bbox = None;
        assert_eq!(classify_restriction(&set(vec![f])), Restriction::FaceRestricted);
        let mut f = frame(60.0, 0.0, FaceOcclusion::None);
        f.head_keypoints_3d.clear();
        assert_eq!(classify_restriction(&set(vec![f])), Restriction::FaceRestricted);
        assert_eq!(classify_restriction(&set(vec![])), Restriction::FaceRestricted);
    }

    fn geom(distance_m: f64, pitch_deg: f64) -> SegmentGeometry {
        SegmentGeometry { distance_m, pitch_deg, focal_mm: 50.0 }
    }

    #[test]
    fn treatment_boundaries() {
        assert_eq!(assign_treatment(Platform::Ground, &geom(17.2, 3.0)), Treatment::Control);
        assert_eq!(assign_treatment(Platform::Ground, &geom(74.9, 0.0)), Treatment::Control);
        assert_eq!(assign_treatment(Platform::Ground, &geom(75.0, 0.0)), Treatment::Treatment);
        assert_eq!(assign_treatment(Platform::Ground, &geom(6.0, 12.0)), Treatment::Control);
        assert_eq!(assign_treatment(Platform::Ground, &geom(6.0, 12.1)), Treatment::Treatment);
        assert_eq!(assign_treatment(Platform::Elevated, &geom(5.8, 20.0)), Treatment::Treatment);
        assert_eq!(assign_treatment(Platform::Uav, &geom(10.0, 0.0)), Treatment::Treatment);
    }

    fn input(
        platform: Platform,
        configuration: SensorConfiguration,
        g: SegmentGeometry,
        activity: Activity,
        cn2: f64,
        restriction: Restriction,
    ) -> MissionInput {
        MissionInput {
            platform,
            configuration,
            geometry: g,
            activity,
            cn2,
            restriction,
            treatment: assign_treatment(platform, &g),
        }
    }

    fn missions(set: MissionSet) -> Vec<MissionId> {
        set.iter().collect()
    }

    #[test]
    fn long_range_walking_in_turbulence() {
        let t = MissionThresholds::default();
        let wb = input(
            Platform::Ground,
            SensorConfiguration::WholeBodyConfigured,
            geom(300.0, 0.0),
            Activity::StructuredWalk,
            5e-14,
            Restriction::FaceRestricted,
        );
        assert_eq!(
            missions(mission_filter(&wb, &t)),
            vec![
                MissionId::LongRangeBody,
                MissionId::Turbulence,
                MissionId::Gait,
                MissionId::FaceRestricted
            ]
        );
        let face = MissionInput {
            configuration: SensorConfiguration::FaceConfigured,
            restriction: Restriction::FaceIncluded,
            ..wb
        };
        assert_eq!(
            missions(mission_filter(&face, &t)),
            vec![
                MissionId::LongRangeFace,
                MissionId::LongRangeBody,
                MissionId::Turbulence,
                MissionId::Gait
            ]
        );
        let calm = MissionInput { cn2: 1e-15, ..face };
        assert!(!mission_filter(&calm, &t).contains(MissionId::Turbulence));
    }

    #[test]
    fn uav_probe() {
        let t = MissionThresholds::default();
        let walking = input(
            Platform::Uav,
            SensorConfiguration::WholeBodyConfigured,
            geom(12.0, 30.0),
            Activity::RandomWalk,
            1e-13,
            Restriction::FaceRestricted,
        );
        assert_eq!(
            missions(mission_filter(&walking, &t)),
            vec![MissionId::Uav, MissionId::Gait, MissionId::FaceRestricted]
        );
        let standing = MissionInput {
            activity: Activity::Standing,
            restriction: Restriction::FaceIncluded,
            ..walking
        };
        assert_eq!(missions(mission_filter(&standing, &t)), vec![MissionId::Uav]);
    }

    #[test]
    fn close_range_standing_face_included() {
        let t = MissionThresholds::default();
        let p = input(
            Platform::Ground,
            SensorConfiguration::FaceConfigured,
            geom(3.8, 3.0),
            Activity::Standing,
            1e-13,
            Restriction::FaceIncluded,
        );
        assert_eq!(
            missions(mission_filter(&p, &t)),
            vec![
                MissionId::ExperimentalControl,
                MissionId::CloseRangeFace,
                MissionId::CloseRangeBody
            ]
        );
    }

    #[test]
    fn elevated_band() {
        let t = MissionThresholds::default();
        let mk = |d, pitch| {
            input(
                Platform::Elevated,
                SensorConfiguration::WholeBodyConfigured,
                geom(d, pitch),
                Activity::Standing,
                0.0,
                Restriction::FaceIncluded,
            )
        };
        assert!(mission_filter(&mk(5.8, 20.0), &t).contains(MissionId::Elevated));
        assert!(mission_filter(&mk(12.9, 12.1), &t).contains(MissionId::Elevated));
        assert!(!mission_filter(&mk(12.9, 12.0), &t).contains(MissionId::Elevated));
        assert!(!mission_filter(&mk(13.0, 30.0), &t).contains(MissionId::Elevated));
        assert!(!mission_filter(&mk(5.8, 20.0), &t).contains(MissionId::ExperimentalControl));
    }

    #[test]
    fn mission_set_ops() {
        let s: MissionSet = [MissionId::Gait, MissionId::Uav].into_iter().collect();
        assert_eq!(s.len(), 2);
        assert!(s.contains(MissionId::Uav));
        assert!(!s.contains(MissionId::Elevated));
        for m in MissionId::ALL {
            assert_eq!(MissionId::parse(m.as_str()), Some(m));
        }
    }
}
