//! XML forms of the raw collection-event records and the elements shared
//! with segment metadata.

use std::collections::BTreeMap;

use mission_eval_core::curation::{
    ActivityLog, ActivityRecord, Recording, TelemetryRecord, TimedAnnotation,
};
use mission_eval_core::model::{
    Activity, AnnotationSource, BBox, ClothingSet, Demographics, EnvironmentRecord, FaceOcclusion,
    FocalRange, FrameAnnotation, Gender, Platform, Point3, SensorConfiguration, SensorRecord, Site,
    Split, SubjectRecord, SubjectRole,
};

use crate::xml::{
    attr_f64, attr_ts, child, children, fmt_bool, fmt_f64, fmt_timestamp, parse_as, parse_bool,
    parse_enum, req_attr, req_child, req_text, root, text_f64, text_ts, Element, FormatError,
    ReadError, XNode,
};

pub fn demographics_element(d: &Demographics) -> Element {
    Element::new("demographics")
        .child(Element::text("age_years", d.age_years.to_string()))
        .child(Element::text("gender", d.gender.as_str()))
        .child(Element::text("height_cm", d.height_cm.to_string()))
}

pub fn read_demographics(node: XNode<'_, '_>) -> Result<Demographics, FormatError> {
    Ok(Demographics {
        age_years: parse_as(req_text(node, "age_years")?, "age_years")?,
        gender: parse_enum(req_text(node, "gender")?, "gender", Gender::parse)?,
        height_cm: parse_as(req_text(node, "height_cm")?, "height_cm")?,
    })
}

pub fn subject_element(s: &SubjectRecord) -> Element {
    let mut e = Element::new("subject").attr("id", &s.subject_id).attr("role", s.role.as_str());
    if let Some(split) = s.split {
        e = e.attr("split", split.as_str());
    }
    e.child(demographics_element(&s.demographics))
}

pub fn read_subject(node: XNode<'_, '_>) -> Result<SubjectRecord, FormatError> {
    Ok(SubjectRecord {
        subject_id: req_attr(node, "id")?.to_owned(),
        role: parse_enum(req_attr(node, "role")?, "role", SubjectRole::parse)?,
        split: node
            .attribute("split")
            .map(|s| parse_enum(s, "split", Split::parse))
            .transpose()?,
        demographics: read_demographics(req_child(node, "demographics")?)?,
    })
}

pub fn sensor_element(s: &SensorRecord) -> Element {
    Element::new("sensor")
        .attr("id", &s.sensor_id)
        .child(Element::text("station_id", &s.station_id))
        .child(Element::text("make", &s.make))
        .child(Element::text("model", &s.model))
        .child(Element::text("serial", &s.serial))
        .child(
            Element::new("resolution_px")
                .attr("width", s.resolution_px.0.to_string())
                .attr("height", s.resolution_px.1.to_string()),
        )
        .child(
            Element::new("focal_length_mm")
                .attr("min", fmt_f64(s.focal_length_mm.min_mm))
                .attr("max", fmt_f64(s.focal_length_mm.max_mm)),
        )
        .child(Element::text("platform", s.platform.as_str()))
        .child(Element::text("site", s.site.as_str()))
        .child(Element::text("distance_m", fmt_f64(s.distance_m)))
        .child(Element::text("pitch_deg", fmt_f64(s.pitch_deg)))
        .child(Element::text("configuration", s.configuration.as_str()))
}

pub fn read_sensor(node: XNode<'_, '_>) -> Result<SensorRecord, FormatError> {
    let res = req_child(node, "resolution_px")?;
    let focal = req_child(node, "focal_length_mm")?;
    Ok(SensorRecord {
        sensor_id: req_attr(node, "id")?.to_owned(),
        station_id: req_text(node, "station_id")?.to_owned(),
        make: req_text(node, "make")?.to_owned(),
        model: req_text(node, "model")?.to_owned(),
        serial: req_text(node, "serial")?.to_owned(),
        resolution_px: (
            parse_as(req_attr(res, "width")?, "width")?,
            parse_as(req_attr(res, "height")?, "height")?,
        ),
        focal_length_mm: FocalRange {
            min_mm: attr_f64(focal, "min")?,
            max_mm: attr_f64(focal, "max")?,
        },
        platform: parse_enum(req_text(node, "platform")?, "platform", Platform::parse)?,
        site: parse_enum(req_text(node, "site")?, "site", Site::parse)?,
        distance_m: text_f64(node, "distance_m")?,
        pitch_deg: text_f64(node, "pitch_deg")?,
        configuration: parse_enum(
            req_text(node, "configuration")?,
            "configuration",
            SensorConfiguration::parse,
        )?,
    })
}

pub const ENVIRONMENT_FIELDS: [&str; 8] = [
    "temperature_c",
    "wind_chill_c",
    "heat_index_c",
    "relative_humidity_pct",
    "wind_speed_mps",
    "wind_direction_deg",
    "pressure_hpa",
    "solar_loading_wpm2",
];

fn environment_values(e: &EnvironmentRecord) -> [f64; 8] {
    [
        e.temperature_c,
        e.wind_chill_c,
        e.heat_index_c,
        e.relative_humidity_pct,
        e.wind_speed_mps,
        e.wind_direction_deg,
        e.pressure_hpa,
        e.solar_loading_wpm2,
    ]
}

pub fn environment_element(e: &EnvironmentRecord) -> Element {
    let mut el = Element::new("environment")
        .child(Element::text("sample_minute", fmt_timestamp(e.sample_minute)));
    for (name, v) in ENVIRONMENT_FIELDS.iter().zip(environment_values(e)) {
        el.push(Element::text(name, fmt_f64(v)));
    }
    el.child(Element::text("cn2", fmt_f64(e.cn2)))
}

pub fn read_environment(node: XNode<'_, '_>) -> Result<EnvironmentRecord, FormatError> {
    Ok(EnvironmentRecord {
        sample_minute: text_ts(node, "sample_minute")?,
        temperature_c: text_f64(node, "temperature_c")?,
        wind_chill_c: text_f64(node, "wind_chill_c")?,
        heat_index_c: text_f64(node, "heat_index_c")?,
        relative_humidity_pct: text_f64(node, "relative_humidity_pct")?,
        wind_speed_mps: text_f64(node, "wind_speed_mps")?,
        wind_direction_deg: text_f64(node, "wind_direction_deg")?,
        pressure_hpa: text_f64(node, "pressure_hpa")?,
        solar_loading_wpm2: text_f64(node, "solar_loading_wpm2")?,
        cn2: text_f64(node, "cn2")?,
    })
}

pub fn bbox_element(name: &str, b: &BBox) -> Element {
    Element::new(name)
        .attr("x", fmt_f64(b.x))
        .attr("y", fmt_f64(b.y))
        .attr("w", fmt_f64(b.w))
        .attr("h", fmt_f64(b.h))
}

pub fn read_bbox(node: XNode<'_, '_>) -> Result<BBox, FormatError> {
    Ok(BBox {
        x: attr_f64(node, "x")?,
        y: attr_f64(node, "y")?,
        w: attr_f64(node, "w")?,
        h: attr_f64(node, "h")?,
    })
}

pub fn frame_element(a: &FrameAnnotation) -> Element {
    let mut e = Element::new("frame")
        .attr("index", a.frame_index.to_string())
        .attr("source", a.source.as_str())
        .attr("identity_confirmed", fmt_bool(a.identity_confirmed))
        .attr("face_occlusion", a.face_occlusion.as_str())
        .attr("body_occluded", fmt_bool(a.body_occluded));
    if let Some(b) = &a.body_bbox {
        e.push(bbox_element("body_bbox", b));
    }
    if let Some(b) = &a.head_bbox {
        e.push(bbox_element("head_bbox", b));
    }
    if !a.head_keypoints_3d.is_empty() {
        e.push(Element::new("head_keypoints").children(a.head_keypoints_3d.iter().map(|p| {
            Element::new("point")
                .attr("x", fmt_f64(p.x))
                .attr("y", fmt_f64(p.y))
                .attr("z", fmt_f64(p.z))
        })));
    }
    e
}

pub fn read_frame(node: XNode<'_, '_>) -> Result<FrameAnnotation, FormatError> {
    let keypoints = match child(node, "head_keypoints") {
        Some(k) => children(k, "point")
            .map(|p| Ok(Point3::new(attr_f64(p, "x")?, attr_f64(p, "y")?, attr_f64(p, "z")?)))
            .collect::<Result<Vec<_>, FormatError>>()?,
        None => Vec::new(),
    };
    Ok(FrameAnnotation {
        frame_index: parse_as(req_attr(node, "index")?, "index")?,
        body_bbox: child(node, "body_bbox").map(read_bbox).transpose()?,
        head_bbox: child(node, "head_bbox").map(read_bbox).transpose()?,
        head_keypoints_3d: keypoints,
        face_occlusion: parse_enum(req_attr(node, "face_occlusion")?, "face_occlusion", FaceOcclusion::parse)?,
        body_occluded: parse_enum(req_attr(node, "body_occluded")?, "body_occluded", parse_bool)?,
        identity_confirmed: parse_enum(
            req_attr(node, "identity_confirmed")?,
            "identity_confirmed",
            parse_bool,
        )?,
        source: parse_enum(req_attr(node, "source")?, "source", AnnotationSource::parse)?,
    })
}

// Whole documents.

pub fn subjects_document(subjects: &[SubjectRecord]) -> String {
    Element::new("subjects")
        .children(subjects.iter().map(subject_element))
        .to_document()
}

pub fn read_subjects(text: &str) -> Result<Vec<SubjectRecord>, ReadError> {
    let doc = crate::xml::parse_document(text)?;
    let r = root(&doc, "subjects")?;
    Ok(children(r, "subject").map(read_subject).collect::<Result<_, _>>()?)
}

pub fn sensors_document(sensors: &[SensorRecord]) -> String {
    Element::new("sensors")
        .children(sensors.iter().map(sensor_element))
        .to_document()
}

pub fn read_sensors(text: &str) -> Result<Vec<SensorRecord>, ReadError> {
    let doc = crate::xml::parse_document(text)?;
    let r = root(&doc, "sensors")?;
    Ok(children(r, "sensor").map(read_sensor).collect::<Result<_, _>>()?)
}

pub fn activity_log_document(log: &ActivityLog) -> String {
    Element::new("activity_log")
        .children(log.records.iter().map(|r| {
            Element::new("record")
                .attr("subject_id", &r.subject_id)
                .attr("activity", r.activity.as_str())
                .attr("clothing_set", r.clothing_set.number().to_string())
                .attr("station_id", &r.station_id)
                .attr("start_ts", fmt_timestamp(r.start))
                .attr("end_ts", fmt_timestamp(r.end))
        }))
        .to_document()
}

pub fn read_activity_log(text: &str) -> Result<ActivityLog, ReadError> {
    let doc = crate::xml::parse_document(text)?;
    let r = root(&doc, "activity_log")?;
    let records = children(r, "record")
        .map(|n| {
            Ok(ActivityRecord {
                subject_id: req_attr(n, "subject_id")?.to_owned(),
                activity: parse_enum(req_attr(n, "activity")?, "activity", Activity::parse)?,
                clothing_set: parse_enum(req_attr(n, "clothing_set")?, "clothing_set", |s| {
                    s.parse().ok().and_then(ClothingSet::from_number)
                })?,
                station_id: req_attr(n, "station_id")?.to_owned(),
                start: attr_ts(n, "start_ts")?,
                end: attr_ts(n, "end_ts")?,
            })
        })
        .collect::<Result<_, FormatError>>()?;
    Ok(ActivityLog { records })
}

pub fn weather_document(records: &[EnvironmentRecord]) -> String {
    Element::new("weather")
        .children(records.iter().map(environment_element))
        .to_document()
}

pub fn read_weather(text: &str) -> Result<Vec<EnvironmentRecord>, ReadError> {
    let doc = crate::xml::parse_document(text)?;
    let r = root(&doc, "weather")?;
    Ok(children(r, "environment").map(read_environment).collect::<Result<_, _>>()?)
}

pub fn telemetry_document(records: &[TelemetryRecord]) -> String {
    Element::new("telemetry")
        .children(records.iter().map(|t| {
            Element::new("interval")
                .attr("sensor_id", &t.sensor_id)
                .attr("start_ts", fmt_timestamp(t.start))
                .attr("end_ts", fmt_timestamp(t.end))
                .attr("distance_m", fmt_f64(t.distance_m))
                .attr("pitch_deg", fmt_f64(t.pitch_deg))
        }))
        .to_document()
}

pub fn read_telemetry(text: &str) -> Result<Vec<TelemetryRecord>, ReadError> {
    let doc = crate::xml::parse_document(text)?;
    let r = root(&doc, "telemetry")?;
    let out = children(r, "interval")
        .map(|n| {
            Ok(TelemetryRecord {
                sensor_id: req_attr(n, "sensor_id")?.to_owned(),
                start: attr_ts(n, "start_ts")?,
                end: attr_ts(n, "end_ts")?,
                distance_m: attr_f64(n, "distance_m")?,
                pitch_deg: attr_f64(n, "pitch_deg")?,
            })
        })
        .collect::<Result<_, FormatError>>()?;
    Ok(out)
}

pub fn recordings_document(recordings: &[Recording]) -> String {
    Element::new("recordings")
        .children(recordings.iter().map(|r| {
            Element::new("recording")
                .attr("sensor_id", &r.sensor_id)
                .attr("station_id", &r.station_id)
                .attr("start_ts", fmt_timestamp(r.start))
                .attr("end_ts", fmt_timestamp(r.end))
        }))
        .to_document()
}

pub fn read_recordings(text: &str) -> Result<Vec<Recording>, ReadError> {
    let doc = crate::xml::parse_document(text)?;
    let r = root(&doc, "recordings")?;
    let out = children(r, "recording")
        .map(|n| {
            Ok(Recording {
                sensor_id: req_attr(n, "sensor_id")?.to_owned(),
                station_id: req_attr(n, "station_id")?.to_owned(),
                start: attr_ts(n, "start_ts")?,
                end: attr_ts(n, "end_ts")?,
            })
        })
        .collect::<Result<_, FormatError>>()?;
    Ok(out)
}

/// Detector output for a whole recording, keyed by frame timestamp.
pub fn detections_document(sensor_id: &str, auto: &[TimedAnnotation]) -> String {
    Element::new("detections")
        .attr("sensor_id", sensor_id)
        .children(auto.iter().map(|a| frame_element(&a.annotation).attr("timestamp_ms", a.timestamp_ms.to_string())))
        .to_document()
}

pub fn read_detections(text: &str) -> Result<Vec<TimedAnnotation>, ReadError> {
    let doc = crate::xml::parse_document(text)?;
    let r = root(&doc, "detections")?;
    let out = children(r, "frame")
        .map(|n| {
            Ok(TimedAnnotation {
                timestamp_ms: parse_as(req_attr(n, "timestamp_ms")?, "timestamp_ms")?,
                annotation: read_frame(n)?,
            })
        })
        .collect::<Result<_, FormatError>>()?;
    Ok(out)
}

/// Manual review records keyed by segment id, frame indices relative to
/// the segment.
pub fn manual_review_document(reviews: &BTreeMap<String, Vec<FrameAnnotation>>) -> String {
    Element::new("manual_review")
        .children(reviews.iter().map(|(id, frames)| {
            Element::new("segment")
                .attr("id", id)
                .children(frames.iter().map(frame_element))
        }))
        .to_document()
}

pub fn read_manual_review(text: &str) -> Result<BTreeMap<String, Vec<FrameAnnotation>>, ReadError> {
    let doc = crate::xml::parse_document(text)?;
    let r = root(&doc, "manual_review")?;
    let mut out = BTreeMap::new();
    for s in children(r, "segment") {
        let frames = children(s, "frame").map(read_frame).collect::<Result<Vec<_>, _>>()?;
        out.insert(req_attr(s, "id")?.to_owned(), frames);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mission_eval_core::model::Timestamp;
    use mission_eval_core::synth::default_sensor_suite;

    fn frame() -> FrameAnnotation {
        FrameAnnotation {
            frame_index: 3,
            body_bbox: Some(BBox { x: 10.0, y: 20.0, w: 40.0, h: 100.0 }),
            head_bbox: Some(BBox { x: 22.0, y: 20.0, w: 16.0, h: 20.0 }),
            head_keypoints_3d: vec![Point3::new(0.1, -0.2, 30.5), Point3::new(0.0, 0.0, 30.0)],
            face_occlusion: FaceOcclusion::Partial,
            body_occluded: true,
            identity_confirmed: false,
            source: AnnotationSource::Manual,
        }
    }

    #[test]
    fn sensors_round_trip() {
        let suite = default_sensor_suite();
        let text = sensors_document(&suite);
        assert_eq!(read_sensors(&text).unwrap(), suite);
    }

    #[test]
    fn frames_round_trip_with_and_without_boxes() {
        let f = frame();
        let mut reviews = BTreeMap::new();
        let bare = FrameAnnotation {
            body_bbox: None,
            head_bbox: None,
            head_keypoints_3d: vec![],
            ..f.clone()
        };
        reviews.insert("seg-a".to_owned(), vec![f, bare]);
        let text = manual_review_document(&reviews);
        assert_eq!(read_manual_review(&text).unwrap(), reviews);
    }

    #[test]
    fn log_round_trip() {
        let log = ActivityLog {
            records: vec![ActivityRecord {
                subject_id: "S0001".into(),
                activity: Activity::RandomWalk,
                clothing_set: ClothingSet::One,
                start: Timestamp(1_717_419_600),
                end: Timestamp(1_717_419_612),
                station_id: "close-range".into(),
            }],
        };
        assert_eq!(read_activity_log(&activity_log_document(&log)).unwrap(), log);
    }

    #[test]
    fn wrong_root_is_reported() {
        let err = read_subjects("<sensors/>").unwrap_err();
        assert!(matches!(err, ReadError::Format(_)));
        assert!(matches!(read_subjects("<subjects>").unwrap_err(), ReadError::Parse(_)));
    }
}
