//! Segment metadata documents: canonical serialization and validated
//! loading.

use mission_eval_core::model::{
    Activity, AnnotationSet, ClothingSet, MediaSegment, SegmentGeometry,
};

use crate::records::{
    demographics_element, environment_element, frame_element, read_demographics,
    read_environment, read_frame, read_sensor, sensor_element,
};
use crate::schema::{validate_node, ValidationReport};
use crate::xml::{
    child, children, fmt_bool, fmt_f64, fmt_timestamp, parse_as, parse_bool, parse_document,
    parse_enum, req_attr, req_child, req_text, text_f64, text_ts, Element, FormatError,
};

pub fn segment_element(s: &MediaSegment) -> Element {
    let mut e = Element::new("segment")
        .attr("id", &s.segment_id)
        .child(Element::text("subject_id", &s.subject_id))
        .child(demographics_element(&s.demographics))
        .child(Element::text("activity", s.activity.as_str()))
        .child(Element::text("clothing_set", s.clothing_set.number().to_string()))
        .child(sensor_element(&s.sensor))
        .child(
            Element::new("geometry")
                .child(Element::text("distance_m", fmt_f64(s.geometry.distance_m)))
                .child(Element::text("pitch_deg", fmt_f64(s.geometry.pitch_deg)))
                .child(Element::text("focal_mm", fmt_f64(s.geometry.focal_mm))),
        )
        .child(Element::text("start_ts", fmt_timestamp(s.start_ts)))
        .child(Element::text("end_ts", fmt_timestamp(s.end_ts)))
        .child(Element::text("payload_ref", &s.payload_ref))
        .child(Element::text("quarantined", fmt_bool(s.quarantined)));
    if let Some(env) = &s.environment {
        e.push(environment_element(env));
    }
    e.child(
        Element::new("annotations")
            .attr("frame_count", s.annotations.frame_count.to_string())
            .children(s.annotations.frames.iter().map(frame_element)),
    )
}

/// Canonical bytes of a segment's metadata document.
pub fn canonical_serialize(s: &MediaSegment) -> Vec<u8> {
    segment_element(s).to_document().into_bytes()
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("malformed XML: {0}")]
    Parse(#[from] roxmltree::Error),
    #[error("schema violation: {0}")]
    Schema(ValidationReport),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Parses and validates; any violation rejects the document.
pub fn load_segment(text: &str) -> Result<MediaSegment, LoadError> {
    let doc = parse_document(text)?;
    let root = doc.root_element();
    let report = validate_node(root);
    if !report.is_valid() {
        return Err(LoadError::Schema(report));
    }
    let geometry = req_child(root, "geometry")?;
    let ann = req_child(root, "annotations")?;
    Ok(MediaSegment {
        segment_id: req_attr(root, "id")?.to_owned(),
        subject_id: req_text(root, "subject_id")?.to_owned(),
        demographics: read_demographics(req_child(root, "demographics")?)?,
        activity: parse_enum(req_text(root, "activity")?, "activity", Activity::parse)?,
        clothing_set: parse_enum(req_text(root, "clothing_set")?, "clothing_set", |s| {
            s.parse().ok().and_then(ClothingSet::from_number)
        })?,
        sensor: read_sensor(req_child(root, "sensor")?)?,
        geometry: SegmentGeometry {
            distance_m: text_f64(geometry, "distance_m")?,
            pitch_deg: text_f64(geometry, "pitch_deg")?,
            focal_mm: text_f64(geometry, "focal_mm")?,
        },
        start_ts: text_ts(root, "start_ts")?,
        end_ts: text_ts(root, "end_ts")?,
        payload_ref: req_text(root, "payload_ref")?.to_owned(),
        quarantined: parse_enum(req_text(root, "quarantined")?, "quarantined", parse_bool)?,
        environment: child(root, "environment").map(read_environment).transpose()?,
        annotations: AnnotationSet {
            frame_count: parse_as(req_attr(ann, "frame_count")?, "frame_count")?,
            frames: children(ann, "frame").map(read_frame).collect::<Result<_, _>>()?,
        },
    })
}
